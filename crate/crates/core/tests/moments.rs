use logdrift::coefficients::{z_log_abs, DiffusionSpec, DriftSpec};
use logdrift::moments::*;
use logdrift::solver::{Grid, SpaceTime};
use logdrift::{Field, SineBasis};

fn profile(basis: &SineBasis, norm: f64) -> Field {
    let f = Field::from_fn(basis, |x| x * (1.0 - x) * (1.0 + 3.0 * x));
    f.scaled(norm / f.l2_norm())
}

#[test]
fn deterministic_decay_has_exact_moments() {
    let g = Grid::new(16, 1.0, 64).unwrap();
    let u0 = Field::mode(&g.basis(), 1, 1.0);
    for p in [1.0, 2.0, 7.5] {
        let r = mc_sup_moment(p, &DriftSpec::zero(), &DiffusionSpec::zero(), &u0, &g, 30, 1).unwrap();
        assert_eq!((r.estimate, r.std_error, r.blowup_fraction), (1.0, 0.0, 0.0));
        assert!(r.valid);
    }
}

#[test]
fn additive_noise_series() {
    let n = 32;
    let g = Grid::new(n, 1.0, 32).unwrap();
    let r = mc_sup_moment(2.0, &DriftSpec::zero(), &DiffusionSpec::additive(1.0), &Field::zeros(&g.basis()), &g, 1000, 5)
        .unwrap();
    let series: f64 = (1..=n)
        .map(|j| {
            let a = (j * j) as f64 * std::f64::consts::PI.powi(2);
            -(-a).exp_m1() / a
        })
        .sum();
    assert!(r.estimate >= series, "{} vs {series}", r.estimate);
    assert!((r.terminal.mean - series).abs() <= 3.0 * r.terminal.std_error, "{:?} vs {series}", r.terminal);
}

#[test]
fn critical_drift_moments_are_finite() {
    let g = Grid::new(32, 1.0, 256).unwrap();
    let ens = run_ensemble(
        &DriftSpec::log_linear(1.0),
        &DiffusionSpec::bounded(1.0, 0.5).unwrap(),
        &profile(&g.basis(), 5.0),
        &g,
        200,
        17,
    )
    .unwrap();
    let reports: Vec<MomentReport> = [1.0, 2.0, 4.0].iter().map(|&p| ens.report(p)).collect();
    for r in &reports {
        assert!(r.valid && r.estimate.is_finite() && r.blowup_fraction == 0.0, "{r:?}");
    }
    // ‖u‖ ≥ 1 on this horizon: nondecreasing in p
    assert!(reports.windows(2).all(|w| w[1].estimate >= w[0].estimate));
    // Jensen
    assert!(reports[0].estimate.powi(2) <= reports[1].estimate);
    assert!(reports[1].estimate.powi(2) <= reports[2].estimate);
}

#[test]
fn reports_reproduce_and_track_inputs() {
    let g = Grid::new(16, 0.5, 64).unwrap();
    let (b, s) = (DriftSpec::log_linear(1.0), DiffusionSpec::sublinear_power(1.0, 0.5, 0.5).unwrap());
    let u0 = profile(&g.basis(), 2.0);
    let a = mc_sup_moment(2.0, &b, &s, &u0, &g, 40, 3).unwrap();
    assert_eq!(a, mc_sup_moment(2.0, &b, &s, &u0, &g, 40, 3).unwrap());
    let other_seed = mc_sup_moment(2.0, &b, &s, &u0, &g, 40, 4).unwrap();
    assert_ne!(a.fingerprint, other_seed.fingerprint);
    let other_p = mc_sup_moment(3.0, &b, &s, &u0, &g, 40, 3).unwrap();
    assert_ne!(a.fingerprint, other_p.fingerprint);
    let other_drift = mc_sup_moment(2.0, &DriftSpec::log_linear(2.0), &s, &u0, &g, 40, 3).unwrap();
    assert_ne!(a.fingerprint, other_drift.fingerprint);
}

#[test]
fn ensemble_doubling_is_consistent() {
    let g = Grid::new(16, 1.0, 64).unwrap();
    let (b, s) = (DriftSpec::log_linear(1.0), DiffusionSpec::bounded(1.0, 0.5).unwrap());
    let u0 = profile(&g.basis(), 3.0);
    let small = mc_sup_moment(2.0, &b, &s, &u0, &g, 100, 8).unwrap();
    let large = mc_sup_moment(2.0, &b, &s, &u0, &g, 200, 8).unwrap();
    assert!(small.consistent_with(&large), "{small:?} {large:?}");
}

#[test]
fn all_paths_blowing_up_is_reported_invalid() {
    let g = Grid::new(16, 4.0, 512).unwrap();
    let r = mc_sup_moment(
        2.0,
        &DriftSpec::log_power(1.0, 2.0),
        &DiffusionSpec::additive(1.0),
        &Field::mode(&g.basis(), 1, 50.0),
        &g,
        30,
        2,
    )
    .unwrap();
    assert_eq!(r.blowup_fraction, 1.0);
    assert!(!r.valid && r.estimate.is_infinite());
}

#[test]
fn convolution_scaling_skeleton() {
    let g = Grid::new(16, 1.0, 64).unwrap();
    let sigma = SpaceTime(|t: f64, x: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin() * (1.0 - t));
    let r = convolution_scaling_report(10.0, &sigma, &[0.5, 1.0, 2.0, 4.0], &g, 200, 11).unwrap();
    let one = r.rows.iter().find(|row| row.lambda == 1.0).unwrap();
    assert_eq!(one.lhs_ratio, 1.0);
    let two = r.rows.iter().find(|row| row.lambda == 2.0).unwrap();
    assert!((two.lhs_ratio - 1024.0).abs() <= 1e-12 * 1024.0);
    assert!(r.scaling_error() <= 1e-12, "{}", r.scaling_error());
    println!("empirical C_(10,1) = {:.4e}, spread {:.6}", r.constant(), r.spread());
    assert!(r.spread() < 3.0);
}

#[test]
fn epsilon_splitting() {
    let g = Grid::new(16, 1.0, 64).unwrap();
    let zero = epsilon_split_report(2.0, &[0.5], &DiffusionSpec::zero(), &g, 30, 1).unwrap();
    assert_eq!(zero.conv.mean, 0.0);
    assert!(zero.all_feasible());
    let r = epsilon_split_report(2.0, &[0.5, 0.1, 0.02], &DiffusionSpec::additive(1.0), &g, 200, 1).unwrap();
    println!("C_eps: {:?}", r.rows);
    assert!(r.all_feasible() && r.monotone());
}

#[test]
fn moments_uniform_over_mollification_levels() {
    let g = Grid::new(16, 1.0, 128).unwrap();
    let u0 = profile(&g.basis(), 5.0);
    let s = DiffusionSpec::bounded(1.0, 0.5).unwrap();
    let flat = level_uniformity_report(&[4, 8, 16], 2.0, &DriftSpec::zero(), &s, &u0, &g, 30, 4).unwrap();
    assert!(flat.reports.windows(2).all(|w| w[0].estimate == w[1].estimate));
    let r = level_uniformity_report(&[4, 8, 16, 32], 2.0, &z_log_abs, &s, &u0, &g, 60, 4).unwrap();
    println!("level estimates: {:?}", r.reports.iter().map(|m| m.estimate).collect::<Vec<_>>());
    assert!(r.uniform(2.0), "spread {}", r.spread());
}

#[test]
fn restart_continues_the_uninterrupted_run() {
    let g = Grid::new(16, 0.5, 64).unwrap();
    let r = restart_report(
        2.0,
        &DriftSpec::log_linear(1.0),
        &DiffusionSpec::bounded(1.0, 0.5).unwrap(),
        &profile(&g.basis(), 5.0),
        &g,
        40,
        12,
    )
    .unwrap();
    println!("{r:?}");
    assert!(r.matches_uninterrupted);
    assert!(r.bounded());
    // the sup over [T₀, 2T₀] starts at ‖u(T₀)‖
    assert!(r.second.mean >= r.at_t0.mean);
}
