//! Space-time white noise in modal form: independent Brownian motions `W^j`
//! attached to the sine modes `e_j`, with seed-addressable increments.
//!
//! Increments over a grid of `n_steps = m·2^L` steps (`m` odd) are built
//! top-down: `m` root increments over the whole horizon, then `L` rounds of
//! Brownian-bridge midpoint splitting. Every Gaussian used is drawn from a
//! ChaCha8 stream keyed on `(seed, m)`, stream `j`, at a word position fixed
//! by its place in the hierarchy, so a realization with `2·n_steps` steps
//! (and the same horizon) repeats all coarse splits and adds one level.
//!
//! Increments live on the lattice `2^-44 ℤ`: a split of the integer `D` into
//! `a` and `D − a` is exact, and so is the floating-point sum of the two
//! children, which makes coarse increments bit-identical to pairwise sums
//! of fine ones.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::stats::{derive_seed, mean_se, MeanSe};

/// Lattice quantum of the increments.
pub const QUANTUM: f64 = 1.0 / (1u64 << 44) as f64;

/// Root intervals wider than this could leave the exactly representable
/// lattice range (`|ξ| < 2^9`).
const MAX_ROOT_WIDTH: f64 = 1e3;

/// Standard normal quantile of `u ∈ (0, 1)`.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u)
}

/// Standard normal draw from one 64-bit word (53-bit midpoint grid, never 0
/// or 1).
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    normal_quantile(u)
}

/// Odd part and dyadic exponent: `n = m·2^L`.
fn odd_split(n: usize) -> (usize, u32) {
    let l = n.trailing_zeros();
    (n >> l, l)
}

/// All Gaussian increments `ξ_{j,k} ~ N(0, dt)` of one path, `j = 1..=n_modes`,
/// `k = 0..n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub seed: u64,
    pub n_modes: usize,
    pub n_steps: usize,
    pub dt: f64,
    /// Mode-major: `increments[(j − 1)·n_steps + k]`.
    increments: Vec<f64>,
}

impl NoiseRealization {
    /// `ξ_{j,k}` (`j` is 1-based).
    pub fn increment(&self, j: usize, k: usize) -> f64 {
        self.increments[(j - 1) * self.n_steps + k]
    }

    /// All increments of mode `j` in time order.
    pub fn mode(&self, j: usize) -> &[f64] {
        &self.increments[(j - 1) * self.n_steps..j * self.n_steps]
    }

    /// Modal path `W^j_{t_k} = Σ_{l<k} ξ_{j,l}`, `k = 0..=n_steps`.
    pub fn path(&self, j: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_steps + 1);
        let mut acc = 0.0;
        w.push(acc);
        for x in self.mode(j) {
            acc += x;
            w.push(acc);
        }
        w
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// The increments of steps `offset..offset + len`: the time-shifted noise
    /// `W^{t₀}_t = W_{t₀+t} − W_{t₀}` with `t₀ = offset·dt`.
    pub fn window(&self, offset: usize, len: usize) -> Result<Self> {
        if len == 0 || offset + len > self.n_steps {
            return domain(format!("window {offset}..{} outside 0..{}", offset + len, self.n_steps));
        }
        let increments =
            (1..=self.n_modes).flat_map(|j| self.mode(j)[offset..offset + len].iter().copied()).collect();
        Ok(Self { seed: self.seed, n_modes: self.n_modes, n_steps: len, dt: self.dt, increments })
    }
}

/// Draws the realization for `seed`.
pub fn sample_noise(seed: u64, n_modes: usize, n_steps: usize, dt: f64) -> Result<NoiseRealization> {
    if n_modes == 0 || n_steps == 0 {
        return domain("noise needs at least one mode and one step");
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return domain(format!("noise step must be positive and finite, got {dt}"));
    }
    let (m, levels) = odd_split(n_steps);
    let root_width = dt * (1u64 << levels) as f64;
    if root_width > MAX_ROOT_WIDTH {
        return domain(format!("root interval {root_width} too wide for the increment lattice"));
    }
    let key = derive_seed(seed, m as u64);
    let increments = (1..=n_modes)
        .into_par_iter()
        .flat_map_iter(|j| mode_lattice(key, j, m, levels, root_width).into_iter().map(|v| v as f64 * QUANTUM))
        .collect();
    Ok(NoiseRealization { seed, n_modes, n_steps, dt, increments })
}

fn mode_lattice(key: u64, j: usize, m: usize, levels: u32, root_width: f64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(j as u64);
    let q = |x: f64| (x / QUANTUM).round() as i64;
    let sd = root_width.sqrt();
    let mut cur: Vec<i64> = (0..m).map(|_| q(sd * gaussian(&mut rng))).collect();
    let mut width = root_width;
    for level in 1..=levels {
        // nodes of level ℓ occupy counters m·2^{ℓ−1} .. m·2^ℓ, one u64 each
        rng.set_word_pos(2 * ((m as u128) << (level - 1)));
        let half_sd = 0.5 * width.sqrt();
        let mut next = Vec::with_capacity(2 * cur.len());
        for &d in &cur {
            let a = (d as f64 * 0.5 + half_sd * gaussian(&mut rng) / QUANTUM).round() as i64;
            next.push(a);
            next.push(d - a);
        }
        cur = next;
        width *= 0.5;
    }
    cur
}

/// A deterministic `L²([0,1])`-valued integrand, diagonal in the sine basis:
/// `f(t_k) e_j = g[j−1][k] e_j`, piecewise constant on the noise steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalIntegrand {
    pub n_modes: usize,
    pub n_steps: usize,
    pub dt: f64,
    values: Vec<f64>,
}

impl ModalIntegrand {
    pub fn from_fn(n_modes: usize, n_steps: usize, dt: f64, g: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values: Vec<f64> =
            (1..=n_modes).flat_map(|j| (0..n_steps).map(move |k| (j, k as f64 * dt))).map(|(j, t)| g(j, t)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return domain("integrand is not finite on the grid");
        }
        Ok(Self { n_modes, n_steps, dt, values })
    }

    /// `∫_0^T ‖f(s)‖²_{HS} ds` on the grid.
    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.dt
    }

    /// `f − g`.
    pub fn minus(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { values, ..self.clone() }
    }

    /// Mode coefficients of `∫ f dW` for one realization.
    pub fn integrate(&self, w: &NoiseRealization) -> Vec<f64> {
        (1..=self.n_modes)
            .map(|j| {
                let g = &self.values[(j - 1) * self.n_steps..j * self.n_steps];
                g.iter().zip(w.mode(j)).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

/// One sequence member of an isometry check.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryRow {
    pub index: usize,
    /// `∫∫ ‖f_n − f‖²`.
    pub exact: f64,
    /// Monte Carlo `E‖∫ f_n dW − ∫ f dW‖²`.
    pub estimate: MeanSe,
}

impl IsometryRow {
    pub fn within(&self, k_se: f64) -> bool {
        (self.estimate.mean - self.exact).abs() <= k_se * self.estimate.std_error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    pub rows: Vec<IsometryRow>,
    pub realizations: usize,
}

impl IsometryReport {
    /// Every member within `k_se` standard errors of the isometry value.
    pub fn all_within(&self, k_se: f64) -> bool {
        self.rows.iter().all(|r| r.within(k_se))
    }

    /// Estimated second moments strictly decreasing along the sequence.
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].estimate.mean < w[0].estimate.mean)
    }
}

/// Monte Carlo check of `E‖∫(f_n − f) dW‖² = ∫∫‖f_n − f‖²` for each `f_n`,
/// all members evaluated on the same realizations (common random numbers).
/// Realization `r` uses seed `derive_seed(master_seed, r)`.
pub fn ito_isometry_convergence_check(
    sequence: &[ModalIntegrand],
    limit: &ModalIntegrand,
    realizations: usize,
    master_seed: u64,
) -> Result<IsometryReport> {
    if realizations < 2 {
        return domain("need at least two realizations");
    }
    let shape = (limit.n_modes, limit.n_steps, limit.dt);
    if sequence.iter().any(|f| (f.n_modes, f.n_steps, f.dt) != shape) {
        return domain("integrands must share the limit's grid");
    }
    let diffs: Vec<ModalIntegrand> = sequence.iter().map(|f| f.minus(limit)).collect();
    let samples: Vec<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let w = sample_noise(derive_seed(master_seed, r as u64), shape.0, shape.1, shape.2)?;
            Ok(diffs.iter().map(|d| d.integrate(&w).iter().map(|c| c * c).sum()).collect())
        })
        .collect::<Result<_>>()?;
    let rows = diffs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            IsometryRow { index: i, exact: d.squared_norm(), estimate: mean_se(&col) }
        })
        .collect();
    Ok(IsometryReport { rows, realizations })
}
