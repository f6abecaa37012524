use logdrift::gronwall::*;

/// RK4 for `x' = c x log₊ x`.
fn log_ode(x0: f64, c: f64, t: f64, steps: usize) -> f64 {
    let f = |x: f64| c * x * x.max(1.0).ln();
    let h = t / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

fn log_ode_problem() -> GronwallProblem {
    GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 1e-3)
        .forcing(Profile::constant(2.0))
        .nonlinear(Profile::constant(1.0))
}

#[test]
fn ode_oracle_below_log_gronwall_bound() {
    let reference = log_ode(2.0, 1.0, 1.0, 100_000);
    let bound = log_gronwall_bound(&log_ode_problem(), 1.0).unwrap();
    assert!((bound - 2f64.powf(std::f64::consts::E)).abs() < 1e-12);
    assert!(reference <= bound * (1.0 + 1e-12), "{reference} vs {bound}");
    let sol = volterra_oracle(&log_ode_problem()).unwrap();
    assert!((sol.values.last().unwrap() - reference).abs() < 1e-8 * reference);
}

#[test]
fn double_exponential_with_ode_oracle() {
    let r = double_exp_report(&log_ode_problem()).unwrap();
    let reference = log_ode(2.0, 1.0, 1.0, 100_000);
    assert!((r.oracle.last().unwrap() - reference).abs() < 1e-8 * reference);
    assert!(r.oracle.iter().zip(&r.bound).all(|(o, b)| o <= b));
    assert!(r.constant <= DOUBLE_EXP_C_MAX);
}

#[test]
fn reduced_form_examples() {
    // no singular term
    let p = GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, 1e-3)
        .forcing(Profile::constant(0.2))
        .linear(Profile::constant(1.0))
        .nonlinear(Profile::constant(1.5));
    let r = reduced_report(&p).unwrap();
    assert!(r.oracle.iter().zip(&r.bound).all(|(o, b)| o <= b));
    // α = ½, unit singular coefficient, M ≡ 0.01
    let p = GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, 1e-3)
        .forcing(Profile::constant(0.01))
        .singular(Profile::constant(1.0), 0.5);
    let r = reduced_report(&p).unwrap();
    assert!(r.oracle.iter().zip(&r.bound).all(|(o, b)| o <= b));
    // Abel equation solution 0.01·E_{1/2}(√(π t)) = 0.01·e^{πt} erfc(−√(πt))
    let pi = std::f64::consts::PI;
    let exact = 0.01 * pi.exp() * (1.0 + statrs::function::erf::erf(pi.sqrt()));
    let got = *r.oracle.last().unwrap();
    assert!((got - exact).abs() < 1e-6 * exact, "{got} vs {exact}");
}

#[test]
fn corpus_domination() {
    for kind in [GronwallBound::LogGronwall, GronwallBound::Reduced, GronwallBound::DoubleExponential] {
        let rows = domination_sweep(kind, 100, 0x5eed, 1.0 / 200.0).unwrap();
        let fails: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
        let worst = rows.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
        println!("{}: failures {} worst bound/oracle {worst:.6e}", kind.name(), fails.len());
        assert!(fails.is_empty(), "{fails:?}");
    }
}

#[test]
fn reference_corpus_is_grid_stable() {
    for (i, p) in reference_corpus(1e-3).iter().enumerate() {
        let s = grid_stability(p).unwrap();
        println!("reference problem {i}: relative change {s:.3e}");
        assert!(s < 1e-6);
    }
}

#[test]
fn epsilon_seeded_picard_decays() {
    let p = GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, 1.0 / 400.0)
        .linear(Profile::constant(1.0))
        .nonlinear(Profile::constant(1.0))
        .singular(Profile::constant(1.0), 0.5);
    for k in 2..=8 {
        let eps = 10f64.powi(-k);
        let (sol, iters) = picard_from(&p, eps, 1e-10).unwrap();
        println!("eps 1e-{k}: sup {:.3e} after {iters} iterations", sol.sup());
        assert!(sol.sup() <= 10.0 * eps.sqrt());
    }
}

#[test]
fn bounds_monotone_in_data() {
    let base = |m: f64, a: f64, b: f64| {
        GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01)
            .forcing(Profile::constant(m))
            .linear(Profile::constant(a))
            .nonlinear(Profile::constant(b))
    };
    let b0 = log_gronwall_bound(&base(1.5, 0.5, 0.5), 1.0).unwrap();
    for p in [base(1.6, 0.5, 0.5), base(1.5, 0.6, 0.5), base(1.5, 0.5, 0.6)] {
        assert!(log_gronwall_bound(&p, 1.0).unwrap() >= b0);
    }
    let c0 = reduced_constants(0.5, 0.5, 0.5, 0.25, 1.0).c;
    assert!(reduced_constants(0.6, 0.5, 0.5, 0.25, 1.0).c >= c0);
    assert!(reduced_constants(0.5, 0.6, 0.5, 0.25, 1.0).c >= c0);
    assert!(reduced_constants(0.5, 0.5, 0.6, 0.25, 1.0).c >= c0);
    assert!(double_exp_log_bound(2.0, 3.0, 0.5) >= double_exp_log_bound(2.0, 2.0, 0.5));
}
