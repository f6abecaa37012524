//! Monte Carlo scenarios: moments, factorization, isometry.

use logdrift::coefficients::DriftFamily;
use logdrift::moments::{convolution_scaling_report, epsilon_split_report, level_uniformity_report, restart_report, run_ensemble};
use logdrift::noise::{ito_isometry_convergence_check, ModalIntegrand};
use logdrift::solver::{factorization_refinement, Diffusion, SpaceTime};
use logdrift::stats::loglog_slope;
use logdrift::SineBasis;

use crate::config::RunConfig;
use crate::output::{Outcome, Table};

fn cfg_err(e: crate::config::ConfigError) -> logdrift::Error {
    logdrift::Error::Domain(e.0)
}

/// Moment order of the level-uniformity and restart reports.
const LEVEL_P: f64 = 2.0;

pub fn moments(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let grid = cfg.grid().map_err(cfg_err)?;
    let drift = cfg.drift().map_err(cfg_err)?;
    let diffusion = cfg.diffusion().map_err(cfg_err)?;
    let u0 = cfg.initial().map_err(cfg_err)?;
    let fp = cfg.fingerprint();
    let se_k = cfg.tol.se_multiple;

    let ens = run_ensemble(&drift, &diffusion, &u0, &grid, cfg.ensemble, cfg.master_seed)?;
    let reports: Vec<_> = cfg.moments_p.iter().map(|&p| ens.report(p)).collect();
    let mut t = Table::new(&[
        "p",
        "horizon",
        "ensemble",
        "estimate",
        "std_error",
        "terminal_mean",
        "terminal_std_error",
        "blowup_fraction",
        "valid",
        "run_fingerprint",
        "config_fingerprint",
    ]);
    for r in &reports {
        t.push(vec![
            r.p.into(),
            r.horizon.into(),
            r.ensemble.into(),
            r.estimate.into(),
            r.std_error.into(),
            r.terminal.mean.into(),
            r.terminal.std_error.into(),
            r.blowup_fraction.into(),
            r.valid.into(),
            r.fingerprint.clone().into(),
            fp.clone().into(),
        ]);
    }
    out.table("moments.csv", t);
    let blown = ens.blowup_fraction();
    out.check("sup-moments finite", reports.iter().all(|r| r.valid), format!("blowup_fraction {blown}"));
    let mut jensen = true;
    for a in &reports {
        for b in reports.iter().filter(|b| b.p > a.p && a.valid && b.valid) {
            jensen &= a.estimate.powf(b.p / a.p) <= b.estimate * (1.0 + 1e-12);
        }
    }
    out.check("Jensen across moment orders", jensen, "E[S^p]^(q/p) <= E[S^q] for p < q");

    // additive noise from rest: the terminal second moment is a closed series
    if drift.family == DriftFamily::Zero && diffusion.is_constant() && u0.l2_norm() == 0.0 {
        if let Some(r) = reports.iter().find(|r| r.p == 2.0) {
            let c = diffusion.eval(0.0);
            let series: f64 = (1..=grid.n_modes)
                .map(|j| {
                    let a = 2.0 * SineBasis::eigenvalue(j);
                    c * c * -(-a * grid.horizon).exp_m1() / a
                })
                .sum();
            out.check(
                "additive-noise terminal second moment",
                (r.terminal.mean - series).abs() <= se_k * r.terminal.std_error,
                format!("{:.8e} +- {:.2e} vs series {series:.8e}", r.terminal.mean, r.terminal.std_error),
            );
            out.check("sup dominates terminal", r.estimate >= series, format!("{:.8e} >= {series:.8e}", r.estimate));
        }
    }

    // convolution scaling skeleton, σ frozen at u = 0 (exact scaling needs σ independent of the solution)
    let frozen = SpaceTime(|t: f64, x: f64| diffusion.sigma(t, x, 0.0));
    let sc = convolution_scaling_report(cfg.moments_scaling_p, &frozen, &cfg.moments_lambdas, &grid, cfg.ensemble, cfg.master_seed)?;
    let mut st = Table::new(&["lambda", "lhs", "lhs_std_error", "rhs", "rhs_std_error", "lhs_ratio", "lhs_over_rhs"]);
    for r in &sc.rows {
        st.push(vec![
            r.lambda.into(),
            r.lhs.mean.into(),
            r.lhs.std_error.into(),
            r.rhs.mean.into(),
            r.rhs.std_error.into(),
            r.lhs_ratio.into(),
            r.ratio.into(),
        ]);
    }
    out.table("scaling.csv", st);
    out.check(
        "convolution moment scales as lambda^p",
        sc.scaling_error() <= cfg.tol.scaling,
        format!("max rel err {:e} (tol {:e}), p = {}", sc.scaling_error(), cfg.tol.scaling, sc.p),
    );
    out.check(
        "convolution moment ratio bounded across lambda",
        sc.spread() < cfg.tol.scaling_spread,
        format!("max/min lhs/rhs {:.6} (limit {}), empirical constant {:.6e}", sc.spread(), cfg.tol.scaling_spread, sc.constant()),
    );

    let eps = epsilon_split_report(cfg.moments_split_p, &cfg.moments_epsilons, &diffusion, &grid, cfg.ensemble, cfg.master_seed)?;
    let mut et = Table::new(&["epsilon", "c_epsilon", "feasible"]);
    for r in &eps.rows {
        et.push(vec![r.epsilon.into(), r.c_eps.unwrap_or(f64::NAN).into(), r.c_eps.is_some().into()]);
    }
    out.table("epsilon_split.csv", et);
    out.check("epsilon splitting feasible", eps.all_feasible(), format!("p = {}, cap 1e9", eps.p));
    out.note(format!("C_eps nondecreasing as eps decreases: {}", eps.monotone()));

    let uni = level_uniformity_report(
        &cfg.moments_levels,
        LEVEL_P,
        &drift,
        &diffusion,
        &u0,
        &grid,
        cfg.ensemble,
        cfg.master_seed,
    )?;
    let mut ut = Table::new(&["level", "estimate", "std_error"]);
    for (n, r) in uni.levels.iter().zip(&uni.reports) {
        ut.push(vec![(*n).into(), r.estimate.into(), r.std_error.into()]);
    }
    out.table("level_uniformity.csv", ut);
    out.check(
        "moments uniform over mollification levels",
        uni.uniform(cfg.tol.uniformity),
        format!("max/min {:.6} (limit {})", uni.spread(), cfg.tol.uniformity),
    );

    if cfg.moments_restart {
        let rr = restart_report(LEVEL_P, &drift, &diffusion, &u0, &grid, cfg.ensemble, cfg.master_seed)?;
        let mut rt = Table::new(&["t0", "moment_at_t0", "sup_moment_first", "sup_moment_second", "blowup_fraction"]);
        rt.push(vec![rr.t0.into(), rr.at_t0.mean.into(), rr.first.mean.into(), rr.second.mean.into(), rr.blowup_fraction.into()]);
        out.table("restart.csv", rt);
        out.check("restart reproduces the uninterrupted run", rr.matches_uninterrupted, "bitwise, every path");
        out.check("restarted moments bounded", rr.bounded(), format!("E sup on [T0, 2T0] = {:.6e}", rr.second.mean));
    }
    Ok(())
}

pub fn factorization(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let grid = cfg.grid().map_err(cfg_err)?;
    let diffusion = cfg.diffusion().map_err(cfg_err)?;
    let sigma = |t: f64, x: f64| diffusion.sigma(t, x, 0.0);
    let rows = factorization_refinement(cfg.factorization_alpha, &sigma, &grid, cfg.master_seed, cfg.factorization_halvings)?;
    let mut t = Table::new(&["n_steps", "dt", "relative_error", "sup_direct"]);
    for r in &rows {
        t.push(vec![r.n_steps.into(), (grid.horizon / r.n_steps as f64).into(), r.relative_error.into(), r.sup_direct.into()]);
    }
    out.table("factorization.csv", t);
    let e: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
    let detail = e.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(" ");
    out.check("factorization error decreasing under dt halving", e.windows(2).all(|w| w[1] < w[0]), detail);
    let last = *e.last().expect("at least one level");
    out.check(
        "factorization error at finest step",
        last < cfg.tol.factorization,
        format!("{last:.6e} (tol {})", cfg.tol.factorization),
    );
    if e.iter().all(|&v| v > 0.0) && e.len() >= 2 {
        let dts: Vec<f64> = rows.iter().map(|r| grid.horizon / r.n_steps as f64).collect();
        out.note(format!("factorization error slope in dt: {:.4}", loglog_slope(&dts, &e)));
    }
    Ok(())
}

/// Mode multipliers of the heat kernel `p_{T−s+lag}`.
fn kernel_slice(n_modes: usize, n_steps: usize, horizon: f64, lag: f64) -> logdrift::Result<ModalIntegrand> {
    ModalIntegrand::from_fn(n_modes, n_steps, horizon / n_steps as f64, |j, s| {
        (-SineBasis::eigenvalue(j) * (horizon - s + lag)).exp()
    })
}

pub fn isometry(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let (n, steps, horizon) = (cfg.n_modes, cfg.n_steps, cfg.horizon);
    let limit = kernel_slice(n, steps, horizon, 0.0)?;
    let lags: Vec<f64> = (0..cfg.isometry_terms).map(|k| 0.1 / (1u64 << k) as f64).collect();
    let seq: Vec<ModalIntegrand> = lags.iter().map(|&l| kernel_slice(n, steps, horizon, l)).collect::<logdrift::Result<_>>()?;
    let r = ito_isometry_convergence_check(&seq, &limit, cfg.isometry_realizations, cfg.master_seed)?;
    let se_k = cfg.tol.se_multiple;
    let mut t = Table::new(&["index", "lag", "exact", "mc_mean", "mc_std_error", "within"]);
    for (row, lag) in r.rows.iter().zip(&lags) {
        t.push(vec![
            row.index.into(),
            (*lag).into(),
            row.exact.into(),
            row.estimate.mean.into(),
            row.estimate.std_error.into(),
            row.within(se_k).into(),
        ]);
    }
    out.table("isometry.csv", t);
    out.check("isometry within SE band", r.all_within(se_k), format!("{} terms, {se_k} SE", r.rows.len()));
    out.check("second moments decrease along the sequence", r.decreasing(), format!("{} realizations", r.realizations));
    Ok(())
}
