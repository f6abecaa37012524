//! Deterministic scenarios: kernel estimates, Gronwall suite, hypotheses.

use logdrift::coefficients::{
    drift_growth_check, diffusion_growth_check, diffusion_lipschitz_check, log_lipschitz_check, standard_pairs, standard_sample,
    uniform_growth_check, DiffusionFamily, MollifiedDrift, MollifierParams,
};
use logdrift::gronwall::{
    domination_sweep, grid_stability, double_exp_report, osgood_classifier, picard_from, reference_corpus,
    GronwallBound, GronwallProblem, Nonlinearity, OsgoodClass, Profile,
};
use logdrift::heat_kernel::*;
use logdrift::stats::loglog_slope;

use crate::config::RunConfig;
use crate::output::{Outcome, Table};

pub fn kernel_estimates(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let params = KernelParams::default();
    let tol = &cfg.tol;

    // series vs images, error normalized by the largest kernel value at each t
    let m = cfg.kernel_points;
    let pts: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let mut dual = Table::new(&["t", "max_abs_diff", "max_kernel", "rel_err"]);
    let mut worst: f64 = 0.0;
    for k in 0..=16 {
        let t = 1e-4 * 1e4f64.powf(k as f64 / 16.0);
        let (mut scale, mut diff) = (0.0f64, 0.0f64);
        for &x in &pts {
            for &y in &pts {
                let a = kernel_series(t, x, y, &params)?;
                let b = kernel_images(t, x, y)?;
                scale = scale.max(a.abs());
                diff = diff.max((a - b).abs());
            }
        }
        worst = worst.max(diff / scale);
        dual.push(vec![t.into(), diff.into(), scale.into(), (diff / scale).into()]);
    }
    out.table("kernel_dual.csv", dual);
    out.check("kernel series/images agreement", worst <= tol.kernel_rel, format!("max rel err {worst:e} (tol {:e})", tol.kernel_rel));

    let mut mass = Table::new(&["t", "mass", "l2", "l2_bound"]);
    let mut mass_ok = true;
    for t in [1e-3, 1e-2, 0.1, 1.0] {
        let (ms, l2) = mass_and_l2_bounds(t, &params)?;
        mass_ok &= ms <= 1.0 + 1e-8 && l2 <= l2_kernel_bound(t) + 1e-8;
        mass.push(vec![t.into(), ms.into(), l2.into(), l2_kernel_bound(t).into()]);
    }
    out.table("kernel_mass_l2.csv", mass);
    out.check("kernel mass <= 1 and L2 bound", mass_ok, "t in {1e-3, 1e-2, 0.1, 1}");

    let horizon = tail_horizon(1e-12);
    let hs: Vec<f64> = (0..=6).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let vals: Vec<f64> = hs.iter().map(|&h| time_increment_estimate(h, horizon, &params)).collect::<logdrift::Result<_>>()?;
    let slope = loglog_slope(&hs, &vals);
    let mut inc = Table::new(&["h", "estimate"]);
    for (h, v) in hs.iter().zip(&vals) {
        inc.push(vec![(*h).into(), (*v).into()]);
    }
    out.table("time_increment.csv", inc);
    out.check(
        "time-increment log-log slope",
        (tol.slope_min..=tol.slope_max).contains(&slope),
        format!("slope {slope:.6} (window [{}, {}])", tol.slope_min, tol.slope_max),
    );
    out.check("time-increment decreasing in h", vals.windows(2).all(|w| w[1] < w[0]), "dyadic h");

    let seps: Vec<f64> = (3..=12).map(|k| 0.5f64.powi(k)).collect();
    let rows = spatial_modulus_sweep(0.5, &seps)?;
    let mut sm = Table::new(&["separation", "estimate", "ratio_to_shape"]);
    for &(d, v, r) in &rows {
        sm.push(vec![d.into(), v.into(), r.into()]);
    }
    out.table("spatial_modulus.csv", sm);
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.2), h.max(r.2)));
    out.check(
        "spatial-modulus shape ratio spread",
        hi / lo < tol.shape_spread,
        format!("max/min {:.6} (limit {})", hi / lo, tol.shape_spread),
    );

    let recs = log_jensen_sweep(cfg.kernel_jensen_draws, cfg.master_seed, &params)?;
    let mut lj = Table::new(&["draw_id", "dt", "norm", "lhs", "rhs", "holds"]);
    for r in &recs {
        lj.push(vec![r.draw_id.into(), r.dt.into(), r.norm.into(), r.lhs.into(), r.rhs.into(), r.holds().into()]);
    }
    out.table("log_jensen.csv", lj);
    let violations = recs.iter().filter(|r| !r.holds()).count();
    let tightest = recs.iter().map(|r| r.lhs / r.rhs).fold(0.0, f64::max);
    out.check(
        "log-Jensen bound",
        violations == 0,
        format!("{violations} violations in {} draws (tightest lhs/rhs {tightest:.4})", recs.len()),
    );
    Ok(())
}

pub fn gronwall_suite(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let tol = &cfg.tol;
    let mut dom = Table::new(&["bound", "draw_id", "oracle_max", "bound_max", "min_ratio", "pass"]);
    for kind in [GronwallBound::LogGronwall, GronwallBound::Reduced, GronwallBound::DoubleExponential] {
        let recs = domination_sweep(kind, cfg.gronwall_draws, cfg.master_seed, cfg.gronwall_grid_dt)?;
        for r in &recs {
            dom.push(vec![
                kind.name().into(),
                r.draw_id.into(),
                r.oracle_max.into(),
                r.bound_max.into(),
                r.min_ratio.into(),
                r.pass.into(),
            ]);
        }
        let fails = recs.iter().filter(|r| !r.pass).count();
        let worst = recs.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
        out.check(
            format!("{} domination", kind.name()),
            fails == 0,
            format!("{fails} violations in {} draws (worst bound/oracle {worst:.6e})", recs.len()),
        );
    }
    out.table("domination.csv", dom);

    let mut st = Table::new(&["problem", "relative_change"]);
    let mut worst: f64 = 0.0;
    for (i, p) in reference_corpus(cfg.gronwall_grid_dt).iter().enumerate() {
        let s = grid_stability(p)?;
        worst = worst.max(s);
        st.push(vec![i.into(), s.into()]);
    }
    out.table("grid_stability.csv", st);
    out.check(
        "oracle grid stability",
        worst < tol.grid_stability,
        format!("max change under dt halving {worst:e} (tol {:e})", tol.grid_stability),
    );

    // ε-seeded Picard iteration with M ≡ 0
    let zero = GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, cfg.gronwall_grid_dt)
        .linear(Profile::constant(1.0))
        .nonlinear(Profile::constant(1.0))
        .singular(Profile::constant(1.0), 0.5);
    let mut zu = Table::new(&["epsilon", "sup", "bound", "iterations"]);
    let mut ok = true;
    for k in 2..=8 {
        let eps = 10f64.powi(-k);
        let (sol, iters) = picard_from(&zero, eps, 1e-10)?;
        let bound = tol.zero_factor * eps.powf(tol.zero_exponent);
        ok &= sol.sup() <= bound;
        zu.push(vec![eps.into(), sol.sup().into(), bound.into(), iters.into()]);
    }
    out.table("zero_uniqueness.csv", zu);
    out.check(
        "zero uniqueness decay",
        ok,
        format!("sup f_eps <= {} eps^{} for eps = 1e-2..1e-8", tol.zero_factor, tol.zero_exponent),
    );

    // double-exponential constant as the kernel exponent grows (logged only)
    let mut dc = Table::new(&["alpha", "constant"]);
    for alpha in [0.0, 0.25, 0.5] {
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, cfg.gronwall_grid_dt)
            .forcing(Profile::constant(2.0))
            .nonlinear(Profile::constant(1.0))
            .singular(Profile::constant(1.0), alpha);
        let c = double_exp_report(&p)?.constant;
        dc.push(vec![alpha.into(), c.into()]);
        out.note(format!("double-exponential constant at alpha = {alpha}: {c:.6e}"));
    }
    out.table("double_exponential_constant.csv", dc);
    Ok(())
}

pub fn hypothesis_check(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let drift = cfg.drift().map_err(|e| logdrift::Error::Domain(e.0))?;
    let diffusion = cfg.diffusion().map_err(|e| logdrift::Error::Domain(e.0))?;
    let (sample, pairs) = (standard_sample(), standard_pairs());
    let mut hy = Table::new(&["coefficient", "hypothesis", "constant_1", "constant_2", "constant_3", "status"]);
    let status = |r: &Result<(), logdrift::Error>| match r {
        Ok(()) => "ok".to_string(),
        Err(e) => e.to_string().replace(',', ";"),
    };

    let growth = drift_growth_check(&drift, &sample);
    let c1 = growth.as_ref().map(|c| c.0).ok();
    let (a, b) = growth.as_ref().copied().unwrap_or((f64::NAN, f64::NAN));
    let s1 = growth.map(|_| ());
    hy.push(vec!["drift".into(), "drift-growth".into(), a.into(), b.into(), f64::NAN.into(), status(&s1).into()]);
    out.check("drift linear-log growth", s1.is_ok(), status(&s1));

    let loglip = log_lipschitz_check(&drift, &pairs);
    let c = loglip.as_ref().map(|c| [c.c3, c.c4, c.c5]).unwrap_or([f64::NAN; 3]);
    let s2 = loglip.map(|_| ());
    hy.push(vec!["drift".into(), "log-lipschitz".into(), c[0].into(), c[1].into(), c[2].into(), status(&s2).into()]);
    out.check("drift log-Lipschitz", s2.is_ok(), status(&s2));

    let theta = match diffusion.family {
        DiffusionFamily::SublinearPower { theta, .. } => theta,
        _ => 0.0,
    };
    let sub = diffusion_growth_check(&diffusion, theta, &sample);
    let (a, b) = sub.as_ref().copied().unwrap_or((f64::NAN, f64::NAN));
    let s3 = sub.map(|_| ());
    hy.push(vec!["diffusion".into(), "diffusion-growth".into(), a.into(), b.into(), theta.into(), status(&s3).into()]);
    out.check("diffusion sublinear growth", s3.is_ok(), status(&s3));

    let lip = diffusion_lipschitz_check(&diffusion, &pairs);
    let d3 = lip.as_ref().copied().unwrap_or(f64::NAN);
    let s4 = lip.map(|_| ());
    hy.push(vec!["diffusion".into(), "diffusion-lipschitz".into(), d3.into(), f64::NAN.into(), f64::NAN.into(), status(&s4).into()]);
    out.check("diffusion Lipschitz", s4.is_ok(), status(&s4));
    out.table("hypotheses.csv", hy);

    match osgood_classifier(&drift, 2.0) {
        Ok(OsgoodClass::Convergent { integral }) => out.note(format!("Osgood integral from 2 converges: {integral:.6e}")),
        Ok(OsgoodClass::Divergent) => out.note("Osgood integral from 2 diverges"),
        Err(e) => out.note(format!("Osgood classification not applicable: {e}")),
    }

    // mollified levels: Lipschitz constants and the level-independent growth constant
    let mut ml = Table::new(&["level", "lipschitz", "growth_constant"]);
    let mut finite = true;
    for &n in &cfg.uniqueness_levels {
        let bn = MollifiedDrift::new(&drift, MollifierParams::new(n)?)?;
        let g = match c1 {
            Some(c1) => uniform_growth_check(&drift, c1, &[n], &sample)?,
            None => f64::NAN,
        };
        finite &= bn.lipschitz().is_finite();
        ml.push(vec![n.into(), bn.lipschitz().into(), g.into()]);
    }
    out.table("mollified_levels.csv", ml);
    out.check("mollified drifts Lipschitz", finite, format!("levels {:?}", cfg.uniqueness_levels));
    if let Some(c1) = c1 {
        let all = uniform_growth_check(&drift, c1, &cfg.uniqueness_levels, &sample)?;
        out.check("uniform growth constant finite", all.is_finite(), format!("L_b' over all levels {all:.6e}"));
    }
    Ok(())
}
