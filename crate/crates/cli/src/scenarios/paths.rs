//! Pathwise scenarios: coupled mollification levels and blow-up ensembles.

use logdrift::gronwall::{osgood_classifier, OsgoodClass};
use logdrift::solver::{coupled_uniqueness_experiment, solve_path, SolveOptions};
use logdrift::stats::derive_seed;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{Outcome, Table};

fn cfg_err(e: crate::config::ConfigError) -> logdrift::Error {
    logdrift::Error::Domain(e.0)
}

pub fn uniqueness(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let grid = cfg.grid().map_err(cfg_err)?;
    let drift = cfg.drift().map_err(cfg_err)?;
    let diffusion = cfg.diffusion().map_err(cfg_err)?;
    let u0 = cfg.initial().map_err(cfg_err)?;
    let r = coupled_uniqueness_experiment(&u0, &drift, &diffusion, &grid, cfg.master_seed, &cfg.uniqueness_levels)?;
    let mut t = Table::new(&["coarse", "fine", "sup_difference"]);
    for p in &r.pairs {
        t.push(vec![p.coarse.into(), p.fine.into(), p.sup_difference.into()]);
    }
    out.table("level_pairs.csv", t);
    let mut m = Table::new(&["level", "max_abs"]);
    for (n, v) in cfg.uniqueness_levels.iter().zip(&r.max_abs) {
        m.push(vec![(*n).into(), (*v).into()]);
    }
    out.table("level_range.csv", m);
    let d: Vec<String> = r.pairs.iter().map(|p| format!("{:.3e}", p.sup_difference)).collect();
    out.check("level differences eventually decreasing", r.eventually_decreasing(), d.join(" "));
    out.check(
        "finest level pair",
        r.finest() < cfg.tol.uniqueness,
        format!("{:e} (tol {:e})", r.finest(), cfg.tol.uniqueness),
    );
    Ok(())
}

pub fn blowup_phase(cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
    let grid = cfg.grid().map_err(cfg_err)?;
    let drift = cfg.drift().map_err(cfg_err)?;
    let diffusion = cfg.diffusion().map_err(cfg_err)?;
    let u0 = cfg.initial().map_err(cfg_err)?;
    let options = SolveOptions { save_stride: grid.n_steps, threshold: cfg.threshold };
    let rows: Vec<(bool, Option<f64>, f64)> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|i| {
            let noise = grid.noise(derive_seed(cfg.master_seed, i as u64))?;
            let tr = solve_path(&u0, &drift, &diffusion, &grid, &noise, &options)?;
            Ok((tr.blown_up, tr.blowup_time, tr.sup_l2))
        })
        .collect::<logdrift::Result<_>>()?;
    let mut t = Table::new(&["path", "blown_up", "blowup_time", "sup_l2"]);
    for (i, (b, bt, s)) in rows.iter().enumerate() {
        t.push(vec![i.into(), (*b).into(), bt.unwrap_or(f64::NAN).into(), (*s).into()]);
    }
    out.table("paths.csv", t);
    let blown = rows.iter().filter(|r| r.0).count();
    let fraction = blown as f64 / rows.len() as f64;
    let mut s = Table::new(&["ensemble", "blown_up", "blowup_fraction", "threshold"]);
    s.push(vec![rows.len().into(), blown.into(), fraction.into(), cfg.threshold.into()]);
    out.table("blowup_summary.csv", s);

    let convergent = matches!(osgood_classifier(&drift, 2.0), Ok(OsgoodClass::Convergent { .. }));
    if convergent {
        out.check("blow-up under Osgood drift", fraction > 0.0, format!("blowup_fraction {fraction}"));
    } else {
        out.check("no blow-up without Osgood growth", fraction == 0.0, format!("blowup_fraction {fraction}"));
    }
    Ok(())
}
