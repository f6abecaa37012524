//! Spectral exponential-Euler integration of the mild equation
//!
//! ```text
//! u(t) = P_t u₀ + ∫_0^t P_{t−s} b(u(s)) ds + ∫_0^t ∫_0^1 p_{t−s}(·,y) σ(u(s,y)) W(ds,dy)
//! ```
//!
//! on `[0, 1]` with Dirichlet data. Mode `j` of the solution advances as
//!
//! ```text
//! û_j ← e^{−λ_j dt} (û_j + dt·b̂(u)_j) + γ_j·(σ(u) ⊙ ξ)^_j,   λ_j = ½ j² π²,
//! ```
//!
//! where `ξ` is the nodal field of the modal increments and
//! `γ_j² = (1 − e^{−2λ_j dt}) / (2λ_j dt)` makes the per-step variance of the
//! additive stochastic convolution exact.

use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::coefficients::{Coefficient, DiffusionSpec, MollifiedDrift, MollifierParams};
use crate::error::{domain, Error, Result};
use crate::noise::{normal_quantile, sample_noise, NoiseRealization};
use crate::spectral::{modal_distance, Field, SineBasis};

/// Default blow-up threshold on `‖u‖_{L²}`.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Space-time discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n_modes: usize,
    pub horizon: f64,
    pub n_steps: usize,
}

impl Grid {
    pub fn new(n_modes: usize, horizon: f64, n_steps: usize) -> Result<Self> {
        if n_modes < 4 {
            return domain(format!("need at least 4 modes, got {n_modes}"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return domain(format!("horizon must be positive, got {horizon}"));
        }
        if n_steps == 0 {
            return domain("need at least one time step");
        }
        Ok(Self { n_modes, horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `dt · ½π²N²`: how stiff the top mode is (diagnostic only).
    pub fn stiffness(&self) -> f64 {
        self.dt() * SineBasis::eigenvalue(self.n_modes)
    }

    pub fn basis(&self) -> SineBasis {
        SineBasis::new(self.n_modes)
    }

    /// Same horizon and modes, twice the steps.
    pub fn refined(&self) -> Self {
        Self { n_steps: 2 * self.n_steps, ..*self }
    }

    /// Draws the noise for this grid.
    pub fn noise(&self, seed: u64) -> Result<NoiseRealization> {
        sample_noise(seed, self.n_modes, self.n_steps, self.dt())
    }
}

/// Diffusion coefficient `σ(t, x, u)`.
pub trait Diffusion: Send + Sync {
    fn sigma(&self, t: f64, x: f64, u: f64) -> f64;

    /// `Some(c)` when `σ ≡ c`; lets the stepper skip the nodal round trip.
    fn constant(&self) -> Option<f64> {
        None
    }
}

impl Diffusion for DiffusionSpec {
    fn sigma(&self, _t: f64, _x: f64, u: f64) -> f64 {
        self.eval(u)
    }

    fn constant(&self) -> Option<f64> {
        self.is_constant().then(|| self.eval(0.0))
    }
}

/// A deterministic `σ(t, x)`, independent of the solution.
pub struct SpaceTime<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Send + Sync> Diffusion for SpaceTime<F> {
    fn sigma(&self, t: f64, x: f64, _u: f64) -> f64 {
        (self.0)(t, x)
    }
}

/// `λσ`.
pub struct Scaled<'a> {
    pub inner: &'a dyn Diffusion,
    pub factor: f64,
}

impl Diffusion for Scaled<'_> {
    fn sigma(&self, t: f64, x: f64, u: f64) -> f64 {
        self.factor * self.inner.sigma(t, x, u)
    }

    fn constant(&self) -> Option<f64> {
        self.inner.constant().map(|c| self.factor * c)
    }
}

/// Precomputed per-mode factors for one grid.
pub struct Stepper {
    basis: SineBasis,
    nodes: Vec<f64>,
    dt: f64,
    decay: Vec<f64>,
    gamma: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &Grid) -> Self {
        let dt = grid.dt();
        let decay = (1..=grid.n_modes).map(|j| (-SineBasis::eigenvalue(j) * dt).exp()).collect();
        let gamma = (1..=grid.n_modes)
            .map(|j| {
                let a = 2.0 * SineBasis::eigenvalue(j) * dt;
                (-(-a).exp_m1() / a).sqrt()
            })
            .collect();
        let basis = grid.basis();
        Self { nodes: basis.nodes(), basis, dt, decay, gamma }
    }

    /// One step from `u` at time `t` with modal increments `xi` (the first
    /// `n_modes` entries are used).
    pub fn step(&self, u: &Field, t: f64, drift: &dyn Coefficient, diffusion: &dyn Diffusion, xi: &[f64]) -> Field {
        let n = self.basis.len();
        let nodal = u.nodal();
        let b: Vec<f64> = nodal.iter().map(|&v| drift.eval(v)).collect();
        let b_hat = self.basis.to_modes(&b);
        let noise_hat = match diffusion.constant() {
            Some(c) => xi[..n].iter().map(|x| c * x).collect(),
            None => {
                let xi_nodal = self.basis.to_nodal(&xi[..n]);
                let prod: Vec<f64> = nodal
                    .iter()
                    .zip(&self.nodes)
                    .zip(&xi_nodal)
                    .map(|((&v, &x), &w)| diffusion.sigma(t, x, v) * w)
                    .collect();
                self.basis.to_modes(&prod)
            }
        };
        let modes = (0..n)
            .map(|j| self.decay[j] * (u.modes()[j] + self.dt * b_hat[j]) + self.gamma[j] * noise_hat[j])
            .collect();
        Field::from_modes(&self.basis, modes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Keep every `save_stride`-th field (the final one is always kept).
    pub save_stride: usize,
    pub threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { save_stride: 8, threshold: BLOWUP_THRESHOLD }
    }
}

impl SolveOptions {
    pub fn every_step() -> Self {
        Self { save_stride: 1, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub l2_norm: Vec<f64>,
    /// `max_k ‖u(t_k)‖` over every computed step, saved or not.
    pub sup_l2: f64,
    pub blowup_time: Option<f64>,
    pub blown_up: bool,
}

impl Trajectory {
    pub fn terminal(&self) -> &Field {
        self.fields.last().expect("trajectory holds the initial field")
    }
}

fn check_noise(grid: &Grid, noise: &NoiseRealization) -> Result<()> {
    if noise.n_modes < grid.n_modes || noise.n_steps != grid.n_steps {
        return domain(format!(
            "noise is {} modes x {} steps, grid needs {} x {}",
            noise.n_modes, noise.n_steps, grid.n_modes, grid.n_steps
        ));
    }
    if (noise.dt - grid.dt()).abs() > 1e-12 * grid.dt() {
        return domain("noise step differs from grid step");
    }
    Ok(())
}

/// A random smooth initial field: sine coefficients `Z_j / j²` (`Z_j`
/// standard normal, drawn from `seed`), rescaled to `L²` norm `norm`.
pub fn random_initial(basis: &SineBasis, norm: f64, seed: u64) -> Result<Field> {
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;
    if !(norm >= 0.0 && norm.is_finite()) {
        return domain(format!("initial norm must be finite and non-negative, got {norm}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<f64> = (1..=basis.len())
        .map(|j| normal_quantile(crate::stats::uniform01(&mut rng).max(f64::MIN_POSITIVE)) / (j * j) as f64)
        .collect();
    let f = Field::from_modes(basis, modes);
    let n = f.l2_norm();
    Ok(if n == 0.0 { f } else { f.scaled(norm / n) })
}

/// Solves one path; stops at the first step whose norm is non-finite or
/// exceeds `options.threshold`.
pub fn solve_path(
    u0: &Field,
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    grid: &Grid,
    noise: &NoiseRealization,
    options: &SolveOptions,
) -> Result<Trajectory> {
    solve_path_from(0.0, u0, drift, diffusion, grid, noise, options)
}

/// [`solve_path`] started at time `t0` (the grid's horizon is the length of
/// the run, times are reported as `t0 + k·dt`).
pub fn solve_path_from(
    t0: f64,
    u0: &Field,
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    grid: &Grid,
    noise: &NoiseRealization,
    options: &SolveOptions,
) -> Result<Trajectory> {
    if !(t0 >= 0.0 && t0.is_finite()) {
        return domain(format!("start time must be finite and non-negative, got {t0}"));
    }
    check_noise(grid, noise)?;
    if u0.len() != grid.n_modes {
        return domain(format!("initial field has {} nodes, grid has {}", u0.len(), grid.n_modes));
    }
    if !u0.is_finite() {
        return domain("initial field is not finite");
    }
    let stride = options.save_stride.max(1);
    let stepper = Stepper::new(grid);
    let dt = grid.dt();
    let mut u = u0.clone();
    let norm0 = u.l2_norm();
    let mut tr = Trajectory {
        times: vec![t0],
        fields: vec![u.clone()],
        l2_norm: vec![norm0],
        sup_l2: norm0,
        blowup_time: None,
        blown_up: false,
    };
    let mut xi = vec![0.0; grid.n_modes];
    for k in 0..grid.n_steps {
        let t = t0 + k as f64 * dt;
        for (j, x) in xi.iter_mut().enumerate() {
            *x = noise.increment(j + 1, k);
        }
        u = stepper.step(&u, t, drift, diffusion, &xi);
        let norm = u.l2_norm();
        let t_next = t0 + (k + 1) as f64 * dt;
        let blown = !norm.is_finite() || norm > options.threshold || !u.is_finite();
        if blown || (k + 1) % stride == 0 || k + 1 == grid.n_steps {
            tr.times.push(t_next);
            tr.fields.push(u.clone());
            tr.l2_norm.push(norm);
        }
        if blown {
            tr.blown_up = true;
            tr.blowup_time = Some(t_next);
            tr.sup_l2 = f64::INFINITY;
            break;
        }
        tr.sup_l2 = tr.sup_l2.max(norm);
    }
    Ok(tr)
}

/// Sup-in-time `L²` distance between two trajectories saved on the same
/// times (fields compared modally, shorter mode vectors extended by zero).
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times != b.times {
        return domain("trajectories are saved on different times");
    }
    Ok(a.fields.iter().zip(&b.fields).map(|(x, y)| modal_distance(x.modes(), y.modes())).fold(0.0, f64::max))
}

/// One consecutive pair of mollification levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPair {
    pub coarse: u32,
    pub fine: u32,
    pub sup_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub pairs: Vec<LevelPair>,
    /// Largest `|u|` reached at each level.
    pub max_abs: Vec<f64>,
}

impl UniquenessReport {
    /// Differences decrease from some pair on to the finest.
    pub fn eventually_decreasing(&self) -> bool {
        let d: Vec<f64> = self.pairs.iter().map(|p| p.sup_difference).collect();
        d.len() < 2 || d[d.len() - 1] < d[d.len() - 2]
    }

    pub fn finest(&self) -> f64 {
        self.pairs.last().map_or(0.0, |p| p.sup_difference)
    }
}

/// Solves with the mollified drifts `b_n`, `n ∈ levels`, on one noise
/// realization and one initial field, and measures consecutive levels
/// against each other. A blow-up at any level is an error.
pub fn coupled_uniqueness_experiment(
    u0: &Field,
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    grid: &Grid,
    seed: u64,
    levels: &[u32],
) -> Result<UniquenessReport> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return domain("levels must be strictly increasing with at least two entries");
    }
    let noise = grid.noise(seed)?;
    let paths = levels
        .par_iter()
        .map(|&n| {
            let bn = MollifiedDrift::new(drift, MollifierParams::new(n)?)?;
            let tr = solve_path(u0, &bn, diffusion, grid, &noise, &SolveOptions::every_step())?;
            if tr.blown_up {
                return Err(Error::BlowUp(format!("mollification level {n} blew up at t = {:?}", tr.blowup_time)));
            }
            Ok(tr)
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs = levels
        .windows(2)
        .zip(paths.windows(2))
        .map(|(n, p)| Ok(LevelPair { coarse: n[0], fine: n[1], sup_difference: sup_distance(&p[0], &p[1])? }))
        .collect::<Result<_>>()?;
    let max_abs =
        paths.iter().map(|p| p.fields.iter().flat_map(|f| f.nodal()).fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    Ok(UniquenessReport { pairs, max_abs })
}

/// `∫_a^b τ^{s−1} e^{−λτ} dτ` for `s > 0`, `λ > 0`, `0 ≤ a < b`.
fn gamma_kernel_integral(s: f64, lambda: f64, a: f64, b: f64) -> f64 {
    let scale = gamma(s) / lambda.powf(s);
    let (x, y) = (lambda * a, lambda * b);
    // difference of whichever tail is smaller, to limit cancellation
    let lower = |z: f64| if z == 0.0 { 0.0 } else { gamma_lr(s, z) };
    let upper = |z: f64| if z == 0.0 { 1.0 } else { gamma_ur(s, z) };
    let diff = if x < s { lower(y) - lower(x) } else { upper(x) - upper(y) };
    scale * diff
}

/// Result of one factorization comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationResult {
    pub n_steps: usize,
    /// `sup_t ‖L(t) − R(t)‖ / sup_t ‖L(t)‖`.
    pub relative_error: f64,
    pub sup_direct: f64,
}

/// Compares the discrete stochastic convolution
/// `L(t_k) = Σ_{l<k} P_{t_k−t_l} (σ_l ⊙ ξ_l)` with its factorized form
/// `R = (sin απ/π) J^{α−1}(J_α σ)`: the inner integral
/// `Y(t_m) = Σ_{l<m} ⨍_{cell l} (t_m−r)^{−α} P_{t_m−r} dr (σ_l ⊙ ξ_l)` and the outer
/// `R(t_k) = Σ_{m<k} ∫_{cell m} (t_k−s)^{α−1} P_{t_k−s} ds Y(t_m)`, both by
/// exact product integration of the kernels per mode.
pub fn factorization_check(
    alpha: f64,
    sigma: &(dyn Fn(f64, f64) -> f64 + Sync),
    grid: &Grid,
    noise: &NoiseRealization,
) -> Result<FactorizationResult> {
    if !(alpha > 0.0 && alpha < 0.25) {
        return domain(format!("factorization exponent must lie in (0, 1/4), got {alpha}"));
    }
    check_noise(grid, noise)?;
    let (n, steps, dt) = (grid.n_modes, grid.n_steps, grid.dt());
    let basis = grid.basis();
    let nodes = basis.nodes();
    // forcing σ_l ⊙ ξ_l in modes, per step
    let forcing: Vec<Vec<f64>> = (0..steps)
        .into_par_iter()
        .map(|l| {
            let xi: Vec<f64> = (1..=n).map(|j| noise.increment(j, l)).collect();
            let xi_nodal = basis.to_nodal(&xi);
            let prod: Vec<f64> = nodes.iter().zip(&xi_nodal).map(|(&x, &w)| sigma(l as f64 * dt, x) * w).collect();
            basis.to_modes(&prod)
        })
        .collect();
    // lag tables per mode
    let lam: Vec<f64> = (1..=n).map(SineBasis::eigenvalue).collect();
    let inner: Vec<Vec<f64>> = lam
        .par_iter()
        .map(|&l| (0..steps).map(|d| gamma_kernel_integral(1.0 - alpha, l, d as f64 * dt, (d + 1) as f64 * dt) / dt).collect())
        .collect();
    let outer: Vec<Vec<f64>> = lam
        .par_iter()
        .map(|&l| (0..steps).map(|d| gamma_kernel_integral(alpha, l, d as f64 * dt, (d + 1) as f64 * dt)).collect())
        .collect();
    let c = (alpha * PI).sin() / PI;
    let per_mode: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let f: Vec<f64> = forcing.iter().map(|v| v[j]).collect();
            let decay = (-lam[j] * dt).exp();
            let phi = -(-lam[j] * dt).exp_m1() / (lam[j] * dt);
            // direct: L_{k+1} = e^{−λdt}L_k + φ f_k
            let mut direct = vec![0.0; steps + 1];
            for k in 0..steps {
                direct[k + 1] = decay * direct[k] + phi * f[k];
            }
            let y: Vec<f64> = (0..=steps).map(|m| (0..m).map(|l| inner[j][m - l - 1] * f[l]).sum()).collect();
            // outer cell [t_m, t_{m+1}] sees every increment before it: Y held at its right end
            let r: Vec<f64> = (0..=steps).map(|k| c * (0..k).map(|m| outer[j][k - m - 1] * y[m + 1]).sum::<f64>()).collect();
            (direct, r)
        })
        .collect();
    let mut sup_err: f64 = 0.0;
    let mut sup_direct: f64 = 0.0;
    for k in 0..=steps {
        let (mut e2, mut d2) = (0.0, 0.0);
        for (d, r) in &per_mode {
            e2 += (d[k] - r[k]) * (d[k] - r[k]);
            d2 += d[k] * d[k];
        }
        sup_err = sup_err.max(e2.sqrt());
        sup_direct = sup_direct.max(d2.sqrt());
    }
    let relative_error = if sup_direct == 0.0 { 0.0 } else { sup_err / sup_direct };
    Ok(FactorizationResult { n_steps: steps, relative_error, sup_direct })
}

/// [`factorization_check`] on `grid` and `halvings` successive refinements of
/// its time step, all on dyadically consistent noise from `seed`.
pub fn factorization_refinement(
    alpha: f64,
    sigma: &(dyn Fn(f64, f64) -> f64 + Sync),
    grid: &Grid,
    seed: u64,
    halvings: usize,
) -> Result<Vec<FactorizationResult>> {
    let mut g = *grid;
    let mut out = Vec::with_capacity(halvings + 1);
    for _ in 0..=halvings {
        out.push(factorization_check(alpha, sigma, &g, &g.noise(seed)?)?);
        g = g.refined();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::DriftSpec;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 1.0, 10).is_err());
        assert!(Grid::new(8, 0.0, 10).is_err());
        assert!(Grid::new(8, 1.0, 0).is_err());
        let g = Grid::new(8, 1.0, 10).unwrap();
        assert!((g.dt() - 0.1).abs() < 1e-16);
        assert!((g.stiffness() - 0.1 * 32.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn gamma_factor_limits() {
        let g = Grid::new(4, 1.0, 1_000_000).unwrap();
        let s = Stepper::new(&g);
        assert!((s.gamma[0] - 1.0).abs() < 1e-4);
        assert!(s.gamma.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn kernel_integral_matches_quadrature() {
        for (s, l, a, b) in [(0.9, 5.0, 0.0, 0.01), (0.1, 200.0, 0.3, 0.31), (0.75, 1e4, 0.002, 0.003)] {
            let q = quadrature::double_exponential::integrate(
                |t: f64| t.powf(s - 1.0) * (-l * t).exp(),
                a,
                b,
                1e-15,
            )
            .integral;
            let v = gamma_kernel_integral(s, l, a, b);
            assert!((v - q).abs() <= 1e-9 * q.abs().max(1e-300), "{s} {l} {a} {b}: {v} vs {q}");
        }
    }

    #[test]
    fn mismatched_noise_is_rejected() {
        let g = Grid::new(8, 1.0, 16).unwrap();
        let w = sample_noise(1, 8, 32, 1.0 / 32.0).unwrap();
        let u0 = Field::zeros(&g.basis());
        let r = solve_path(&u0, &DriftSpec::zero(), &DiffusionSpec::zero(), &g, &w, &SolveOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn factorization_rejects_alpha_outside_window() {
        let g = Grid::new(8, 1.0, 16).unwrap();
        let w = g.noise(1).unwrap();
        assert!(factorization_check(0.25, &|_, _| 1.0, &g, &w).is_err());
        assert!(factorization_check(0.0, &|_, _| 1.0, &g, &w).is_err());
    }
}
