//! Dirichlet heat kernel of `½∂_xx` on `[0, 1]`, its semigroup, and numerical
//! verifiers for the kernel estimates used in the moment and tightness
//! arguments.
//!
//! The kernel is
//!
//! ```text
//! p_t(x, y) = Σ_{n≥1} exp(-½ n² π² t) e_n(x) e_n(y),   e_n(x) = √2 sin(nπx),
//! ```
//!
//! evaluated by the truncated series for moderate `t` and by the method of
//! images (Gaussians of variance `t`, odd reflections about 0 and 1) for
//! small `t`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{domain, Error, Result};
use crate::quad::{simpson, GaussLegendre};
use crate::spectral::{Field, SineBasis};

/// Controls kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Bound on the omitted series tail.
    pub truncation_tol: f64,
    /// Hard cap on series terms.
    pub max_modes: usize,
    /// Below this time the image-charge form is used.
    pub switch_time: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { truncation_tol: 1e-15, max_modes: 200_000, switch_time: 0.05 }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation_tol > 0.0) {
            return domain("truncation_tol must be positive");
        }
        if self.max_modes < 1 {
            return domain("max_modes must be at least 1");
        }
        if !(self.switch_time > 0.0 && self.switch_time <= 1.0) {
            return domain("switch_time must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Number of reflected images on each side in the small-time form.
const IMAGES: i32 = 5;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("kernel time must be positive and finite, got {t}"));
    }
    Ok(())
}

fn check_position(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("{name} = {x} lies outside [0, 1]"));
    }
    Ok(())
}

/// `log(1 ∨ x)`.
pub fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// Evaluates `p_t(x, y)`, switching between the image-charge and series forms
/// at `params.switch_time`.
pub fn kernel_eval(t: f64, x: f64, y: f64, params: &KernelParams) -> Result<f64> {
    if t < params.switch_time {
        kernel_images(t, x, y)
    } else {
        kernel_series(t, x, y, params)
    }
}

/// Series form, truncated once the geometric tail majorant
/// `2 e^{-λ_{N+1} t} / (1 - q)` drops below `truncation_tol`.
pub fn kernel_series(t: f64, x: f64, y: f64, params: &KernelParams) -> Result<f64> {
    check_time(t)?;
    check_position("x", x)?;
    check_position("y", y)?;
    let c = 0.5 * PI * PI * t;
    let mut sum = 0.0;
    let mut n = 1usize;
    loop {
        let nf = n as f64;
        sum += (-c * nf * nf).exp() * 2.0 * ((nf * PI * x).sin() * (nf * PI * y).sin());
        let next = nf + 1.0;
        let q = (-c * (2.0 * next + 1.0)).exp();
        let tail = 2.0 * (-c * next * next).exp() / (1.0 - q);
        if tail < params.truncation_tol {
            return Ok(sum);
        }
        if n >= params.max_modes {
            return Err(Error::Precondition(format!(
                "series for t = {t} needs more than {} modes",
                params.max_modes
            )));
        }
        n += 1;
    }
}

/// Method-of-images form with `±5` reflected pairs.
pub fn kernel_images(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_position("x", x)?;
    check_position("y", y)?;
    // fixed argument order keeps the floating-point sum exactly symmetric
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    let norm = 1.0 / (2.0 * PI * t).sqrt();
    let g = |z: f64| (-z * z / (2.0 * t)).exp();
    let mut sum = 0.0;
    for k in -IMAGES..=IMAGES {
        let shift = 2.0 * k as f64;
        sum += g(x - y + shift) - g(x + y + shift);
    }
    Ok(norm * sum)
}

/// `P_t f`: mode `n` is multiplied by `exp(-½ n² π² t)`.
pub fn semigroup_apply(t: f64, f: &Field) -> Result<Field> {
    if t < 0.0 || !t.is_finite() {
        return domain(format!("semigroup time must be nonnegative, got {t}"));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let modes = f
        .modes()
        .iter()
        .enumerate()
        .map(|(i, c)| c * (-SineBasis::eigenvalue(i + 1) * t).exp())
        .collect();
    Ok(Field::from_modes(f.basis(), modes))
}

/// `(max_x ∫ p_t(x,y) dy, max_x ∫ p_t(x,y)² dy)` by composite Simpson in `y`
/// and a uniform scan in `x`.
pub fn mass_and_l2_bounds(t: f64, params: &KernelParams) -> Result<(f64, f64)> {
    check_time(t)?;
    params.validate()?;
    // resolve the kernel width √t with at least 40 panels per unit width
    let ny = ((40.0 / t.sqrt()).ceil() as usize).max(400);
    let ny = ny + ny % 2;
    let hy = 1.0 / ny as f64;
    let nx = 200;
    let mut mass_max: f64 = 0.0;
    let mut l2_max: f64 = 0.0;
    let mut p = vec![0.0; ny + 1];
    let mut p2 = vec![0.0; ny + 1];
    for i in 0..=nx {
        let x = i as f64 / nx as f64;
        for (j, (a, b)) in p.iter_mut().zip(p2.iter_mut()).enumerate() {
            let v = kernel_eval(t, x, j as f64 * hy, params)?;
            *a = v;
            *b = v * v;
        }
        mass_max = mass_max.max(simpson(&p, hy));
        l2_max = l2_max.max(simpson(&p2, hy));
    }
    Ok((mass_max, l2_max))
}

/// `(4π)^{-1/2} t^{-1/2}`, the whole-line value of `∫ p_t(x,y)² dy`.
pub fn l2_kernel_bound(t: f64) -> f64 {
    1.0 / (4.0 * PI * t).sqrt()
}

/// Horizon `R` with `2 e^{-π² R} / π² < tol`, so that the part of a time
/// integral beyond `R` driven by the slowest mode is below `tol`.
pub fn tail_horizon(tol: f64) -> f64 {
    (1.01 * (2.0 / (PI * PI * tol)).ln() / (PI * PI)).max(1.0)
}

/// Below this time the increment integrand is evaluated through the
/// image-charge form of `p_{2r}(x, x)`.
const DIRECT_SUM_MIN_TIME: f64 = 1e-3;
const X_SCAN: usize = 128;

/// `∫_0^R sup_x ∫_0^1 (p_{r+h}(x,z) - p_r(x,z))² dz dr`.
///
/// The inner integral is evaluated through the orthonormal expansion
/// `Σ_n e_n(x)² e^{-n²π² r} (1 - e^{-½n²π² h})²`; the supremum over `x` by a
/// scan on `[0, ½]` refined by golden-section search; the `r` integral by
/// Gauss-Legendre panels in `s = √r`, graded toward `r = 0`.
pub fn time_increment_estimate(h: f64, horizon: f64, params: &KernelParams) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return domain(format!("time increment must be positive, got {h}"));
    }
    if !(horizon > 0.0) {
        return domain("integration horizon must be positive");
    }
    params.validate()?;
    let integrand = IncrementIntegrand::new(h);
    let gl = GaussLegendre::new(12);
    let s_max = horizon.sqrt();
    let mut total = 0.0;
    let mut hi = s_max;
    // [0, s_max 2^-40] contributes at most s/√π·(1 + o(1)), below 1e-12
    for _ in 0..40 {
        let lo = 0.5 * hi;
        total += gl.integrate(lo, hi, |s| 2.0 * s * integrand.sup_over_x(s * s));
        hi = lo;
    }
    Ok(total)
}

struct IncrementIntegrand {
    h: f64,
    xs: Vec<f64>,
}

impl IncrementIntegrand {
    fn new(h: f64) -> Self {
        let xs = (0..=X_SCAN).map(|i| 0.5 * i as f64 / X_SCAN as f64).collect();
        Self { h, xs }
    }

    fn value(&self, r: f64, x: f64) -> f64 {
        let pi2 = PI * PI;
        if r >= DIRECT_SUM_MIN_TIME {
            let n_max = ((40.0 / (pi2 * r)).sqrt().ceil() as usize) + 1;
            (1..=n_max)
                .map(|n| {
                    let nf = n as f64;
                    let s = (nf * PI * x).sin();
                    let d = 1.0 - (-0.5 * pi2 * nf * nf * self.h).exp();
                    2.0 * s * s * (-pi2 * nf * nf * r).exp() * d * d
                })
                .sum()
        } else {
            // Σ e_n(x)² e^{-n²π²r} = p_{2r}(x, x); subtract the part damped by h
            let diag = kernel_images(2.0 * r, x, x).unwrap_or(0.0);
            let n_max = ((80.0 / (pi2 * self.h)).sqrt().ceil() as usize) + 1;
            let correction: f64 = (1..=n_max)
                .map(|n| {
                    let nf = n as f64;
                    let s = (nf * PI * x).sin();
                    let e = (-0.5 * pi2 * nf * nf * self.h).exp();
                    2.0 * s * s * (-pi2 * nf * nf * r).exp() * (2.0 * e - e * e)
                })
                .sum();
            diag - correction
        }
    }

    fn sup_over_x(&self, r: f64) -> f64 {
        sup_scan_golden(&self.xs, |x| self.value(r, x))
    }
}

/// Maximum of `f` over a sorted scan grid, refined by golden-section search in
/// the two cells adjacent to the best grid point.
fn sup_scan_golden(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty scan grid");
    let lo = xs[imax.saturating_sub(1)];
    let hi = xs[(imax + 1).min(xs.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    vmax.max(fc).max(fd)
}

/// Per-point version: `∫_0^R ∫_0^1 (p_{r+h}(x,z) - p_r(x,z))² dz dr` at a
/// fixed `x`, with the `r` integral done in closed form mode by mode. The
/// returned value includes the tail majorant of the omitted modes, so it is
/// an upper bound for the exact quantity.
pub fn time_increment_pointwise(h: f64, horizon: f64, x: f64) -> Result<f64> {
    if !(h > 0.0) {
        return domain(format!("time increment must be positive, got {h}"));
    }
    check_position("x", x)?;
    let pi2 = PI * PI;
    let n_terms = 1usize << 20;
    let sum: f64 = (1..=n_terms)
        .map(|n| {
            let nf = n as f64;
            let s = (nf * PI * x).sin();
            let d = 1.0 - (-0.5 * pi2 * nf * nf * h).exp();
            let k2 = pi2 * nf * nf;
            2.0 * s * s * d * d * (1.0 - (-k2 * horizon).exp()) / k2
        })
        .sum();
    Ok(sum + 2.0 / (pi2 * n_terms as f64))
}

/// `∫_0^∞ sup_z |p_t(x,z) - p_t(y,z)| dt` through the mode-sum majorant
/// `Σ_n 4 |sin nπx - sin nπy| / (n²π²)`, including the majorant of the
/// omitted tail.
pub fn spatial_modulus_estimate(x: f64, y: f64) -> Result<f64> {
    check_position("x", x)?;
    check_position("y", y)?;
    if x == y {
        return Ok(0.0);
    }
    let d = (x - y).abs();
    let n_terms = ((64.0 / d).ceil() as usize).max(1 << 20);
    let pi2 = PI * PI;
    let sum: f64 = (1..=n_terms)
        .map(|n| {
            let nf = n as f64;
            4.0 * ((nf * PI * x).sin() - (nf * PI * y).sin()).abs() / (nf * nf * pi2)
        })
        .sum();
    Ok(sum + 8.0 / (pi2 * n_terms as f64))
}

/// `|x - y| (1 + log(1/|x - y|))`, the shape of the spatial modulus bound.
pub fn modulus_shape(d: f64) -> f64 {
    d * (1.0 + (1.0 / d).ln())
}

/// Sweeps the spatial modulus over separations `d` from the base point `x`,
/// returning `(d, value, value / shape(d))`.
pub fn spatial_modulus_sweep(x: f64, separations: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    separations
        .iter()
        .map(|&d| {
            let v = spatial_modulus_estimate(x, x - d)?;
            Ok((d, v, v / modulus_shape(d)))
        })
        .collect()
}

/// Both sides of the log-Jensen kernel estimate
///
/// ```text
/// sup_x ∫ p_dt(x,y) log₊²|u(y)| dy  ≤  (2 + ¼ log₊(1/dt) + log₊‖u‖_{L²})²
/// ```
///
/// `u` is taken as the piecewise-linear interpolant of its nodal values
/// (zero at the boundary), and both sides are computed for that same
/// function: the norm exactly, the left side by Simpson on a sub-grid that
/// resolves the kernel width `√dt`.
pub fn log_jensen_bound_check(dt: f64, u: &Field, params: &KernelParams) -> Result<(f64, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let h = u.basis().spacing();
    let nodal = u.with_boundary();
    let sub = ((8.0 * h / dt.sqrt()).ceil() as usize).clamp(1, 256);
    let hf = h / sub as f64;
    let m = (nodal.len() - 1) * sub;
    let fine: Vec<f64> = (0..=m)
        .map(|k| {
            let (cell, off) = (k / sub, k % sub);
            if off == 0 {
                nodal[cell]
            } else {
                let w = off as f64 / sub as f64;
                (1.0 - w) * nodal[cell] + w * nodal[cell + 1]
            }
        })
        .collect();
    let g: Vec<f64> = fine.iter().map(|v| log_plus(v.abs()).powi(2)).collect();
    let norm_sq: f64 = nodal
        .windows(2)
        .map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
        .sum();
    let window = ((10.0 * dt.sqrt() / hf).ceil() as usize).max(2);
    let mut lhs: f64 = 0.0;
    let mut integrand = Vec::with_capacity(2 * window + 1);
    for i in 0..=m {
        let x = i as f64 * hf;
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(m);
        integrand.clear();
        for j in lo..=hi {
            let y = (j as f64 * hf).min(1.0);
            integrand.push(kernel_eval(dt, x.min(1.0), y, params)? * g[j]);
        }
        lhs = lhs.max(simpson(&integrand, hf));
    }
    let rhs = (2.0 + 0.25 * log_plus(1.0 / dt) + log_plus(norm_sq.sqrt())).powi(2);
    Ok((lhs, rhs))
}

/// One randomized log-Jensen draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LogJensenRecord {
    pub draw_id: usize,
    pub dt: f64,
    pub norm: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl LogJensenRecord {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Random `(dt, u)` for the log-Jensen check: `dt` log-uniform on
/// `[1e-3, 1]`; `u` on 63 interior nodes is a uniform background of
/// amplitude `10^U(−1, 2)` plus one to five spikes of magnitude
/// `10^U(1, 8)` and random sign.
pub fn log_jensen_draw(seed: u64) -> (f64, Field) {
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    use crate::stats::uniform01;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * uniform01(&mut rng);
    let dt = 10f64.powf(u(-3.0, 0.0));
    let basis = SineBasis::new(63);
    let amp = 10f64.powf(u(-1.0, 2.0));
    let mut nodal: Vec<f64> = (0..basis.len()).map(|_| amp * u(-1.0, 1.0)).collect();
    let spikes = 1 + (u(0.0, 5.0) as usize).min(4);
    for _ in 0..spikes {
        let i = (u(0.0, basis.len() as f64) as usize).min(basis.len() - 1);
        let sign = if u(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
        nodal[i] = sign * 10f64.powf(u(1.0, 8.0));
    }
    (dt, Field::from_nodal(&basis, nodal))
}

/// `count` log-Jensen draws, draw `i` seeded by `derive_seed(master_seed, i)`.
pub fn log_jensen_sweep(count: usize, master_seed: u64, params: &KernelParams) -> Result<Vec<LogJensenRecord>> {
    use rayon::prelude::*;

    (0..count)
        .into_par_iter()
        .map(|i| {
            let (dt, u) = log_jensen_draw(crate::stats::derive_seed(master_seed, i as u64));
            let (lhs, rhs) = log_jensen_bound_check(dt, &u, params)?;
            Ok(LogJensenRecord { draw_id: i, dt, norm: u.l2_norm(), lhs, rhs })
        })
        .collect()
}

/// Convenience: the `√2 sin(nπx)` basis function.
pub fn basis_fn(n: usize, x: f64) -> f64 {
    SQRT_2 * (n as f64 * PI * x).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> KernelParams {
        KernelParams::default()
    }

    #[test]
    fn kernel_is_symmetric() {
        for &t in &[1e-3, 0.02, 0.1, 0.7] {
            for &(x, y) in &[(0.1, 0.8), (0.33, 0.5), (0.9, 0.05)] {
                let a = kernel_eval(t, x, y, &params()).unwrap();
                let b = kernel_eval(t, y, x, &params()).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn kernel_vanishes_on_boundary() {
        let v = kernel_eval(0.1, 0.5, 0.0, &params()).unwrap();
        assert!(v.abs() < 1e-15, "{v}");
    }

    #[test]
    fn kernel_rejects_bad_arguments() {
        assert!(matches!(kernel_eval(0.0, 0.5, 0.5, &params()), Err(Error::Domain(_))));
        assert!(matches!(kernel_eval(-1.0, 0.5, 0.5, &params()), Err(Error::Domain(_))));
        assert!(matches!(kernel_eval(0.1, 1.5, 0.5, &params()), Err(Error::Domain(_))));
        assert!(matches!(kernel_eval(0.1, 0.5, -0.1, &params()), Err(Error::Domain(_))));
    }

    #[test]
    fn kernel_matches_long_series_oracle() {
        // 10^4 terms accumulated with Kahan compensation
        let t = 0.1;
        let (mut s, mut comp) = (0.0f64, 0.0f64);
        for n in 1..=10_000u32 {
            let nf = n as f64;
            let term = (-0.5 * nf * nf * PI * PI * t).exp() * 2.0 * (nf * PI * 0.5).sin().powi(2);
            let y = term - comp;
            let tmp = s + y;
            comp = (tmp - s) - y;
            s = tmp;
        }
        let v = kernel_eval(0.1, 0.5, 0.5, &params()).unwrap();
        assert!((v - s).abs() < 1e-14, "{v} vs {s}");
    }

    #[test]
    fn semigroup_identity_and_eigenfunction() {
        let basis = SineBasis::new(32);
        let f = Field::from_fn(&basis, |x| x * (1.0 - x));
        assert_eq!(semigroup_apply(0.0, &f).unwrap(), f);
        let e1 = Field::mode(&basis, 1, 1.0);
        let t = 0.3;
        let g = semigroup_apply(t, &e1).unwrap();
        assert!((g.modes()[0] - (-PI * PI * t / 2.0).exp()).abs() < 1e-15);
        assert!(g.modes()[1..].iter().all(|c| c.abs() < 1e-16));
        assert!(semigroup_apply(-0.1, &f).is_err());
    }

    #[test]
    fn semigroup_is_a_semigroup() {
        let basis = SineBasis::new(48);
        let f = Field::from_fn(&basis, |x| (7.0 * x).sin() * x * (1.0 - x) + 0.3 * (x - 0.4).abs());
        let a = semigroup_apply(0.02, &semigroup_apply(0.05, &f).unwrap()).unwrap();
        let b = semigroup_apply(0.07, &f).unwrap();
        assert!(a.l2_distance(&b) <= 1e-10 * f.l2_norm());
    }

    #[test]
    fn mass_bound_large_time_matches_one_mode_oracle() {
        let t = 10.0;
        let (mass, _) = mass_and_l2_bounds(t, &params()).unwrap();
        // one-mode oracle: e^{-π²t/2} e_1(½) ∫ e_1 = (4/π) e^{-π²t/2}
        let oracle = 4.0 / PI * (-PI * PI * t / 2.0).exp();
        assert!((mass - oracle).abs() <= 1e-8 * oracle, "{mass} vs {oracle}");
    }

    #[test]
    fn positivity_on_samples() {
        for &t in &[1e-4, 1e-3, 0.049, 0.05, 0.3, 2.0] {
            for i in 0..=20 {
                for j in 0..=20 {
                    let v = kernel_eval(t, i as f64 / 20.0, j as f64 / 20.0, &params()).unwrap();
                    assert!(v >= -1e-12, "p_{t}({i},{j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn spatial_modulus_zero_on_diagonal() {
        assert_eq!(spatial_modulus_estimate(0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn log_jensen_trivial_fields() {
        let basis = SineBasis::new(32);
        let zero = Field::zeros(&basis);
        let (lhs, rhs) = log_jensen_bound_check(1.0, &zero, &params()).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 4.0);
        let e = Field::from_fn(&basis, |_| std::f64::consts::E);
        let (lhs, rhs) = log_jensen_bound_check(0.1, &e, &params()).unwrap();
        assert!(lhs <= 1.0 + 1e-9, "{lhs}");
        assert!(lhs <= rhs);
        assert!(log_jensen_bound_check(0.0, &e, &params()).is_err());
    }

    #[test]
    fn tail_horizon_meets_tolerance() {
        let r = tail_horizon(1e-12);
        assert!(2.0 * (-PI * PI * r).exp() / (PI * PI) < 1e-12);
    }
}
