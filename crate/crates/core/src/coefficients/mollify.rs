//! Smooth, compactly supported, globally Lipschitz approximations
//! `b_n(x) = η_n(x) ∫ b(x − s/n) φ(s) ds` of a continuous drift.

use std::sync::OnceLock;

use rayon::prelude::*;

use super::Coefficient;
use crate::error::{domain, Error, Result};
use crate::heat_kernel::log_plus;

fn bump_raw(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| quadrature::double_exponential::integrate(bump_raw, -1.0, 1.0, 1e-15).integral)
}

/// Unit-mass bump `φ(s) ∝ exp(−1/(1−s²))` supported in `(−1, 1)`.
pub fn bump(s: f64) -> f64 {
    bump_raw(s) / bump_mass()
}

/// Cutoff `η_n`: 1 on `[−n, n]`, 0 outside `(−n−2, n+2)`, quintic
/// smoothstep joins in between.
pub fn cutoff(n: u32, x: f64) -> f64 {
    let w = ((x.abs() - n as f64) / 2.0).clamp(0.0, 1.0);
    1.0 - w * w * w * (10.0 - 15.0 * w + 6.0 * w * w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MollifierParams {
    pub n: u32,
}

impl MollifierParams {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return domain("mollification level must be >= 1");
        }
        Ok(Self { n })
    }

    /// Half-width of the support of `b_n`.
    pub fn support(&self) -> f64 {
        self.n as f64 + 2.0
    }
}

/// `∫ b(x − s/n) φ(s) ds`, split where the argument crosses 0 (the only
/// non-smooth point of the shipped families).
fn smoothed(base: &dyn Coefficient, n: u32, x: f64) -> Result<f64> {
    let n = n as f64;
    let f = |s: f64| base.eval(x - s / n) * bump_raw(s);
    let tol = 1e-13 * (1.0 + base.eval(x).abs());
    let pieces: Vec<(f64, f64)> = if (n * x).abs() < 1.0 {
        vec![(-1.0, n * x), (n * x, 1.0)]
    } else {
        vec![(-1.0, 1.0)]
    };
    let mut total = 0.0;
    for (a, b) in pieces {
        if b <= a {
            continue;
        }
        let out = quadrature::double_exponential::integrate(f, a, b, tol);
        if !out.integral.is_finite() || out.error_estimate > 1e-8 * (1.0 + out.integral.abs()) {
            return Err(Error::Quadrature(format!(
                "mollifier convolution at x = {x}: estimate {:e} (error {:e})",
                out.integral, out.error_estimate
            )));
        }
        total += out.integral;
    }
    Ok(total / bump_mass())
}

/// `b_n` precomputed on a uniform lookup grid over its support and
/// evaluated by monotone cubic (PCHIP) interpolation.
#[derive(Debug, Clone)]
pub struct MollifiedDrift {
    params: MollifierParams,
    lo: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MollifiedDrift {
    /// Table spacing `1/(16 n)`.
    pub fn new(base: &dyn Coefficient, params: MollifierParams) -> Result<Self> {
        let n = params.n;
        let r = params.support();
        let cells = (2.0 * r * 16.0 * n as f64).round() as usize;
        let h = 2.0 * r / cells as f64;
        let values = (0..=cells)
            .into_par_iter()
            .map(|i| {
                let x = -r + i as f64 * h;
                Ok(cutoff(n, x) * smoothed(base, n, x)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let slopes = pchip_slopes(&values, h);
        Ok(Self { params, lo: -r, h, values, slopes })
    }

    pub fn params(&self) -> MollifierParams {
        self.params
    }

    /// Direct evaluation by quadrature, bypassing the table.
    pub fn eval_direct(base: &dyn Coefficient, params: MollifierParams, x: f64) -> Result<f64> {
        if x.abs() >= params.support() {
            return Ok(0.0);
        }
        Ok(cutoff(params.n, x) * smoothed(base, params.n, x)?)
    }

    /// Lipschitz constant of the interpolant: the largest `|b_n'|`, found
    /// exactly per cell (the derivative of a cubic Hermite piece is a
    /// quadratic).
    pub fn lipschitz(&self) -> f64 {
        let mut l = 0.0f64;
        for i in 0..self.values.len() - 1 {
            let (y0, y1) = (self.values[i], self.values[i + 1]);
            let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
            let a = 6.0 * y0 + 3.0 * m0 - 6.0 * y1 + 3.0 * m1;
            let b = -6.0 * y0 - 4.0 * m0 + 6.0 * y1 - 2.0 * m1;
            let d = |t: f64| (a * t * t + b * t + m0).abs();
            let mut best = d(0.0).max(d(1.0));
            if a != 0.0 {
                let v = -b / (2.0 * a);
                if (0.0..=1.0).contains(&v) {
                    best = best.max(d(v));
                }
            }
            l = l.max(best / self.h);
        }
        l
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return f64::NAN;
        }
        if x.abs() >= self.params.support() {
            return 0.0;
        }
        let last = self.values.len() - 2;
        let pos = (x - self.lo) / self.h;
        let i = (pos.floor().max(0.0) as usize).min(last);
        let t = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }
}

impl Coefficient for MollifiedDrift {
    fn eval(&self, z: f64) -> f64 {
        MollifiedDrift::eval(self, z)
    }
}

/// Fritsch-Carlson slopes on a uniform grid (harmonic mean of neighbouring
/// secants, zero at local extrema).
fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; y.len()];
    m[0] = d[0];
    m[y.len() - 1] = d[d.len() - 1];
    for i in 1..y.len() - 1 {
        let (a, b) = (d[i - 1], d[i]);
        m[i] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
    }
    m
}

/// Smallest `L` with `|b_n(x)| ≤ c₁|x|log₊|x| + L(|x|+1)` simultaneously for
/// every level and sample point.
pub fn uniform_growth_check(base: &dyn Coefficient, c1: f64, levels: &[u32], sample: &[f64]) -> Result<f64> {
    let mut l = 0.0f64;
    for &n in levels {
        let bn = MollifiedDrift::new(base, MollifierParams::new(n)?)?;
        for &x in sample.iter().filter(|x| x.abs() < n as f64 + 2.0) {
            let excess = bn.eval(x).abs() - c1 * x.abs() * log_plus(x.abs());
            l = l.max(excess / (x.abs() + 1.0));
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::z_log_abs;

    #[test]
    fn bump_has_unit_mass() {
        let m = quadrature::double_exponential::integrate(bump, -1.0, 1.0, 1e-14).integral;
        assert!((m - 1.0).abs() < 1e-10);
        assert!(bump(0.3) > 0.0 && bump(1.0) == 0.0 && bump(-1.2) == 0.0);
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(4, 3.9), 1.0);
        assert_eq!(cutoff(4, -4.0), 1.0);
        assert_eq!(cutoff(4, 6.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=200 {
            let v = cutoff(4, 4.0 + i as f64 * 0.01);
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
    }

    #[test]
    fn affine_drift_is_preserved_on_plateau() {
        let bn = MollifiedDrift::new(&|z: f64| z, MollifierParams::new(8).unwrap()).unwrap();
        for i in 0..=140 {
            let x = -7.0 + i as f64 * 0.1;
            assert!((bn.eval(x) - x).abs() < 1e-12, "x = {x}: {}", bn.eval(x));
        }
        assert_eq!(bn.eval(11.0), 0.0);
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let p = MollifierParams::new(4).unwrap();
        let bn = MollifiedDrift::new(&z_log_abs, p).unwrap();
        for x in [-5.3, -0.2, 0.0, 0.01, 0.7, 3.3, 4.9] {
            let direct = MollifiedDrift::eval_direct(&z_log_abs, p, x).unwrap();
            assert!((bn.eval(x) - direct).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn convergence_at_fixed_point() {
        let mut errs = vec![];
        for n in [4, 8, 16, 32] {
            let p = MollifierParams::new(n).unwrap();
            errs.push((MollifiedDrift::eval_direct(&z_log_abs, p, 5.0).unwrap() - z_log_abs(5.0)).abs());
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 1e-3);
    }

    #[test]
    fn zero_drift_growth_constant() {
        let l = uniform_growth_check(&|_: f64| 0.0, 0.0, &[1, 2, 4], &[-3.0, 0.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
    }
}
