//! Sample-based feasibility checks for the growth and continuity
//! hypotheses on `b` and `σ`. The hypotheses are ∀-statements, so these
//! checks can only falsify on a grid; the sample sets are fixed so results
//! are reproducible.

use super::Coefficient;
use crate::error::{Error, Result};
use crate::heat_kernel::log_plus;

/// Sample growth per decade above which a tail ratio counts as unbounded.
const TAIL_GROWTH: f64 = 1.05;

/// `0` and `±10^k` for 20001 log-uniform `k ∈ [−6, 6]`.
pub fn standard_sample() -> Vec<f64> {
    let n = 20_001;
    let mut s = vec![0.0];
    for i in 0..n {
        let v = 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64);
        s.push(v);
        s.push(-v);
    }
    s
}

/// Pairs `(u, u ± d)` with bases `0, ±½, ±10^{k/4}` (|k| ≤ 24) and
/// separations `d = 10^{k/2}` down to `1e-12`. Pairs whose separation is
/// below `1e-4·max(|u|, |v|)` are dropped: there the difference quotient is
/// dominated by rounding in `b`.
pub fn standard_pairs() -> Vec<(f64, f64)> {
    let mut bases = vec![0.0, 0.5, -0.5];
    for k in -24..=24 {
        let v = 10f64.powf(k as f64 / 4.0);
        bases.push(v);
        bases.push(-v);
    }
    let mut pairs = Vec::new();
    for &u in &bases {
        for k in -24..=12 {
            let d = 10f64.powf(k as f64 / 2.0);
            for v in [u + d, u - d] {
                let sep = (v - u).abs();
                if sep > 0.0 && sep >= 1e-4 * u.abs().max(v.abs()) {
                    pairs.push((u, v));
                }
            }
        }
    }
    pairs
}

/// Tail constant and additive remainder for `|f(u)| ≤ c·φ(u) + c₀`.
fn growth_fit(
    f: &dyn Coefficient,
    phi: impl Fn(f64) -> f64,
    sample: &[f64],
    hypothesis: &'static str,
) -> Result<(f64, f64)> {
    let top = sample.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    if top < 1e3 {
        return Err(Error::Domain(format!("sample must reach |u| >= 1e3, got {top}")));
    }
    let decade_max = |lo: f64, hi: f64| {
        sample
            .iter()
            .filter(|u| (lo..=hi).contains(&u.abs()) && phi(**u) > 0.0)
            .map(|&u| f.eval(u).abs() / phi(u))
            .fold(0.0f64, f64::max)
    };
    let r_top = decade_max(top / 10.0, top);
    let r_prev = decade_max(top / 100.0, top / 10.0);
    if !r_top.is_finite() || r_top > TAIL_GROWTH * r_prev && r_top > 1e-300 {
        return Err(Error::HypothesisViolation {
            hypothesis,
            detail: format!("tail ratio grows from {r_prev:e} to {r_top:e} over the last decade"),
        });
    }
    let c = r_top;
    let rest = sample.iter().map(|&u| f.eval(u).abs() - c * phi(u)).fold(0.0f64, f64::max);
    Ok((c, rest))
}

/// Minimal `(c₁, c₂)` with `|b(u)| ≤ c₁|u|log₊|u| + c₂` on the sample:
/// `c₁` is the top-decade ratio, `c₂` the remaining excess.
pub fn drift_growth_check(b: &dyn Coefficient, sample: &[f64]) -> Result<(f64, f64)> {
    growth_fit(b, |u| u.abs() * log_plus(u.abs()), sample, "drift-growth")
}

/// Minimal `(d₁, d₂)` with `|σ(u)| ≤ d₁|u|^θ + d₂` on the sample.
pub fn diffusion_growth_check(sigma: &dyn Coefficient, theta: f64, sample: &[f64]) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, 1)")));
    }
    growth_fit(sigma, |u| if u == 0.0 && theta > 0.0 { 0.0 } else { u.abs().powf(theta) }, sample, "diffusion-growth")
}

/// Largest sampled difference quotient of `σ` (net of rounding). Flags a violation when the
/// pairs closer than `1e-6` need more than twice the constant of the rest.
pub fn diffusion_lipschitz_check(sigma: &dyn Coefficient, pairs: &[(f64, f64)]) -> Result<f64> {
    let (mut near, mut far) = (0.0f64, 0.0f64);
    for &(u, v) in pairs {
        let d = (u - v).abs();
        let (a, b) = (sigma.eval(u), sigma.eval(v));
        // discount the rounding error of the difference itself
        let q = ((a - b).abs() - 4.0 * f64::EPSILON * (a.abs() + b.abs())).max(0.0) / d;
        if d < 1e-6 {
            near = near.max(q);
        } else {
            far = far.max(q);
        }
    }
    if !near.is_finite() || near > 2.0 * far && near > 1e-12 {
        return Err(Error::HypothesisViolation {
            hypothesis: "diffusion-lipschitz",
            detail: format!("difference quotient {near:e} at separations < 1e-6 vs {far:e} elsewhere"),
        });
    }
    Ok(near.max(far))
}

/// Constants of `|b(u)−b(v)| ≤ c₃ d log₊(1/d) + c₄ log₊(|u|∨|v|) d + c₅ d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLipConstants {
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl LogLipConstants {
    pub fn total(&self) -> f64 {
        self.c3 + self.c4 + self.c5
    }
}

/// Per-pair data normalized by `d`: (quotient, log₊(1/d), log₊ max).
fn h2_rows(b: &dyn Coefficient, pairs: &[(f64, f64)]) -> Vec<[f64; 3]> {
    pairs
        .iter()
        .map(|&(u, v)| {
            let d = (u - v).abs();
            [(b.eval(u) - b.eval(v)).abs() / d, log_plus(1.0 / d), log_plus(u.abs().max(v.abs()))]
        })
        .collect()
}

fn h2_c5(rows: &[[f64; 3]], c3: f64, c4: f64) -> f64 {
    rows.iter().map(|r| r[0] - c3 * r[1] - c4 * r[2]).fold(0.0, f64::max)
}

fn golden_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
        if b - a <= 1e-13 * hi.max(1e-300) {
            break;
        }
    }
    // the objective is piecewise linear, so an endpoint may be optimal
    [(lo, f(lo)), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((lo, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Minimizes `c₃ + c₄ + c₅` over feasible constants (the objective is
/// convex and piecewise linear in `(c₃, c₄)` with `c₅` in closed form).
fn h2_fit(rows: &[[f64; 3]]) -> LogLipConstants {
    let hi = h2_c5(rows, 0.0, 0.0);
    if hi == 0.0 {
        return LogLipConstants { c3: 0.0, c4: 0.0, c5: 0.0 };
    }
    let inner = |c3: f64| golden_min(0.0, hi, |c4| c3 + c4 + h2_c5(rows, c3, c4));
    let (c3, _) = golden_min(0.0, hi, |c3| inner(c3).1);
    let (c4, _) = inner(c3);
    LogLipConstants { c3, c4, c5: h2_c5(rows, c3, c4) }
}

/// Minimal-sum `(c₃, c₄, c₅)` over the pair sample. Reports a violation when
/// the constants more than double once pairs closer than `1e-6` or with
/// magnitudes beyond `1e3` are admitted: for continuous-but-non-log-Lipschitz
/// (or super-log-linear) drifts the fitted constants then keep growing with
/// the sample instead of settling.
pub fn log_lipschitz_check(b: &dyn Coefficient, pairs: &[(f64, f64)]) -> Result<LogLipConstants> {
    let rows = h2_rows(b, pairs);
    if rows.iter().any(|r| !r[0].is_finite()) {
        return Err(Error::HypothesisViolation { hypothesis: "log-lipschitz", detail: "non-finite difference quotient".into() });
    }
    let full = h2_fit(&rows);
    let check = |keep: &dyn Fn(&(f64, f64)) -> bool, what: &str| -> Result<()> {
        let sub: Vec<[f64; 3]> = pairs.iter().zip(&rows).filter(|(p, _)| keep(p)).map(|(_, r)| *r).collect();
        let part = h2_fit(&sub);
        if full.total() > 2.0 * part.total() && full.total() > 1e-12 {
            return Err(Error::HypothesisViolation {
                hypothesis: "log-lipschitz",
                detail: format!("constant sum {:e} vs {:e} without {what}", full.total(), part.total()),
            });
        }
        Ok(())
    };
    check(&|&(u, v)| (u - v).abs() >= 1e-6, "separations < 1e-6")?;
    check(&|&(u, v)| u.abs().max(v.abs()) <= 1e3, "magnitudes > 1e3")?;
    Ok(full)
}
