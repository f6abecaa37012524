//! Monte Carlo moment functionals of the solution and the reports built on
//! them: sup-moments, the scaling skeleton of the convolution moment bound,
//! the ε-splitting for small `p`, uniformity over mollification levels, and
//! the restart argument.
//!
//! Path `i` of an ensemble with master seed `s` is driven by the noise with
//! seed `derive_seed(s, i)`. Paths run in parallel; every reduction runs in
//! path-index order, so reports are bit-reproducible.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::coefficients::{Coefficient, MollifiedDrift, MollifierParams};
use crate::error::{domain, Error, Result};
use crate::solver::{solve_path, solve_path_from, Diffusion, Grid, Scaled, SolveOptions, Trajectory};
use crate::stats::{derive_seed, mean_se, MeanSe};
use crate::{Field, SineBasis};

/// Smallest ensemble for which a CLT standard error is reported.
pub const MIN_ENSEMBLE: usize = 30;

/// Largest feasible constant in the ε-splitting search.
pub const C_CAP: f64 = 1e9;

/// Hex SHA-256 of the concatenated parts.
pub fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of an ensemble run: grid, ensemble size, seed, initial field
/// and the coefficients probed on a fixed set of arguments.
fn run_fingerprint(
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    u0: &Field,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> String {
    let probes: Vec<f64> = (-16..=16).map(|k| k as f64 * 0.75).collect();
    let mut coeffs = Vec::new();
    for &z in &probes {
        coeffs.extend(drift.eval(z).to_bits().to_le_bytes());
        for (t, x) in [(0.0, 0.25), (0.5 * grid.horizon, 0.5), (grid.horizon, 0.8)] {
            coeffs.extend(diffusion.sigma(t, x, z).to_bits().to_le_bytes());
        }
    }
    let u0_bits: Vec<u8> = u0.modes().iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
    let head = [
        grid.n_modes as u64,
        grid.n_steps as u64,
        grid.horizon.to_bits(),
        ensemble as u64,
        master_seed,
    ];
    let head: Vec<u8> = head.iter().flat_map(|v| v.to_le_bytes()).collect();
    fingerprint(&[&head, &u0_bits, &coeffs])
}

/// Per-path summaries of one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub horizon: f64,
    /// `sup_{t ≤ T}‖u(t)‖`, `None` for paths that blew up.
    pub sups: Vec<Option<f64>>,
    /// `‖u(T)‖`, `None` for paths that blew up.
    pub terminals: Vec<Option<f64>>,
    pub fingerprint: String,
}

/// Ensemble estimate of `E[sup_{t≤T}‖u(t)‖^p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub p: f64,
    pub horizon: f64,
    pub ensemble: usize,
    /// Sample mean over all `ensemble` paths; `+∞` once any path blew up.
    pub estimate: f64,
    pub std_error: f64,
    /// `E‖u(T)‖^p` over the same paths.
    pub terminal: MeanSe,
    pub blowup_fraction: f64,
    /// False when some path blew up (the sup-moment is then infinite).
    pub valid: bool,
    pub fingerprint: String,
}

impl MomentReport {
    /// Whether the two estimates' 3-SE intervals overlap.
    pub fn consistent_with(&self, other: &MomentReport) -> bool {
        let gap = (self.estimate - other.estimate).abs();
        self.valid && other.valid && gap <= 3.0 * (self.std_error + other.std_error)
    }
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.sups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sups.is_empty()
    }

    pub fn blowup_fraction(&self) -> f64 {
        self.sups.iter().filter(|s| s.is_none()).count() as f64 / self.len() as f64
    }

    /// The `p`-th sup-moment report.
    pub fn report(&self, p: f64) -> MomentReport {
        let blown = self.blowup_fraction();
        let (estimate, std_error) = if blown > 0.0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let v: Vec<f64> = self.sups.iter().map(|s| s.expect("no blow-up").powf(p)).collect();
            let m = mean_se(&v);
            (m.mean, m.std_error)
        };
        let term: Vec<f64> = self.terminals.iter().flatten().map(|v| v.powf(p)).collect();
        MomentReport {
            p,
            horizon: self.horizon,
            ensemble: self.len(),
            estimate,
            std_error,
            terminal: mean_se(&term),
            blowup_fraction: blown,
            valid: blown == 0.0,
            fingerprint: fingerprint(&[self.fingerprint.as_bytes(), &p.to_bits().to_le_bytes()]),
        }
    }
}

fn check_ensemble(ensemble: usize) -> Result<()> {
    if ensemble < MIN_ENSEMBLE {
        return domain(format!("ensemble of {ensemble} paths is below the minimum {MIN_ENSEMBLE}"));
    }
    Ok(())
}

/// Runs `ensemble` paths (sup over every time step).
pub fn run_ensemble(
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    u0: &Field,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> Result<Ensemble> {
    check_ensemble(ensemble)?;
    // sup_l2 tracks every step, so only the endpoints need saving
    let options = SolveOptions { save_stride: grid.n_steps, ..SolveOptions::default() };
    let rows: Vec<(Option<f64>, Option<f64>)> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let noise = grid.noise(derive_seed(master_seed, i as u64))?;
            let tr = solve_path(u0, drift, diffusion, grid, &noise, &options)?;
            Ok(if tr.blown_up { (None, None) } else { (Some(tr.sup_l2), Some(tr.terminal().l2_norm())) })
        })
        .collect::<Result<_>>()?;
    let (sups, terminals) = rows.into_iter().unzip();
    Ok(Ensemble {
        horizon: grid.horizon,
        sups,
        terminals,
        fingerprint: run_fingerprint(drift, diffusion, u0, grid, ensemble, master_seed),
    })
}

/// `E[sup_{t≤T}‖u(t)‖^p]` over `ensemble` paths.
pub fn mc_sup_moment(
    p: f64,
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    u0: &Field,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> Result<MomentReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return domain(format!("moment order must be >= 1, got {p}"));
    }
    Ok(run_ensemble(drift, diffusion, u0, grid, ensemble, master_seed)?.report(p))
}

/// Per-path functionals of a pure convolution `∫P_{t−s}σ dW` (`b = 0`,
/// `u₀ = 0`): `sup_t‖conv‖`, `sup_t‖σ(t)‖` and `∫‖σ(s)‖^p ds` (left rule on
/// the steps, `σ` read along the path).
#[derive(Debug, Clone, Copy, PartialEq)]
struct ConvolutionPath {
    sup_conv: f64,
    sup_sigma: f64,
    int_sigma_p: f64,
}

fn sigma_norm(basis: &SineBasis, diffusion: &dyn Diffusion, t: f64, u: &Field) -> f64 {
    let vals = basis.nodes().iter().zip(u.nodal()).map(|(&x, &v)| diffusion.sigma(t, x, v)).collect();
    Field::from_nodal(basis, vals).l2_norm()
}

fn convolution_path(diffusion: &dyn Diffusion, grid: &Grid, seed: u64, p: f64) -> Result<ConvolutionPath> {
    let basis = grid.basis();
    let zero = |_: f64| 0.0;
    let tr: Trajectory = solve_path(
        &Field::zeros(&basis),
        &zero,
        diffusion,
        grid,
        &grid.noise(seed)?,
        &SolveOptions { save_stride: 1, threshold: f64::INFINITY },
    )?;
    let dt = grid.dt();
    let norms: Vec<f64> =
        tr.fields[..grid.n_steps].iter().zip(&tr.times).map(|(u, &t)| sigma_norm(&basis, diffusion, t, u)).collect();
    Ok(ConvolutionPath {
        sup_conv: tr.sup_l2,
        sup_sigma: norms.iter().copied().fold(0.0, f64::max),
        int_sigma_p: norms.iter().map(|s| s.powf(p)).sum::<f64>() * dt,
    })
}

fn convolution_ensemble(
    diffusion: &dyn Diffusion,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
    p: f64,
) -> Result<Vec<ConvolutionPath>> {
    (0..ensemble).into_par_iter().map(|i| convolution_path(diffusion, grid, derive_seed(master_seed, i as u64), p)).collect()
}

/// One `λ` of the scaling report.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub lambda: f64,
    /// `E[sup_t‖∫P_{t−s}λσ dW‖^p]`.
    pub lhs: MeanSe,
    /// `∫_0^T E‖λσ(s)‖^p ds`.
    pub rhs: MeanSe,
    /// `LHS(λ)/LHS(1)`.
    pub lhs_ratio: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub p: f64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    /// `max_λ |LHS(λ)/(λ^p LHS(1)) − 1|`.
    pub fn scaling_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.lhs_ratio / r.lambda.powf(self.p) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Empirical `C_{p,T}`: the largest `LHS/RHS`.
    pub fn constant(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// `max/min` of `LHS/RHS` over `λ`.
    pub fn spread(&self) -> f64 {
        let min = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        self.constant() / min
    }
}

/// Convolution moment bound for `p > 8` under `σ ↦ λσ`, common seeds across
/// `λ`. Exact `λ^p` scaling needs `σ` independent of the solution.
pub fn convolution_scaling_report(
    p: f64,
    sigma_base: &dyn Diffusion,
    lambdas: &[f64],
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> Result<ScalingReport> {
    if !(p > 8.0 && p.is_finite()) {
        return domain(format!("the convolution moment bound needs p > 8, got {p}"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return domain("scaling factors must be positive and finite");
    }
    check_ensemble(ensemble)?;
    let run = |lambda: f64| {
        let scaled = Scaled { inner: sigma_base, factor: lambda };
        let paths = convolution_ensemble(&scaled, grid, ensemble, master_seed, p)?;
        let lhs: Vec<f64> = paths.iter().map(|c| c.sup_conv.powf(p)).collect();
        let rhs: Vec<f64> = paths.iter().map(|c| c.int_sigma_p).collect();
        Ok::<_, Error>((mean_se(&lhs), mean_se(&rhs)))
    };
    let (base, _) = run(1.0)?;
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let (lhs, rhs) = run(lambda)?;
            Ok(ScalingRow { lambda, lhs, rhs, lhs_ratio: lhs.mean / base.mean, ratio: lhs.mean / rhs.mean })
        })
        .collect::<Result<_>>()?;
    Ok(ScalingReport { p, rows })
}

/// One `ε` of the splitting report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// Smallest `C` with `A ≤ εB + C·D`; `None` when it exceeds [`C_CAP`].
    pub c_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonReport {
    pub p: f64,
    /// `A = E[sup_t‖conv‖^p]`.
    pub conv: MeanSe,
    /// `B = E[sup_t‖σ(t)‖^p]`.
    pub sup_sigma: MeanSe,
    /// `D = E∫‖σ‖^p`.
    pub int_sigma: MeanSe,
    pub rows: Vec<EpsilonRow>,
}

impl EpsilonReport {
    pub fn all_feasible(&self) -> bool {
        self.rows.iter().all(|r| r.c_eps.is_some())
    }

    /// `C_ε` nondecreasing as `ε` decreases (rows in the order given).
    pub fn monotone(&self) -> bool {
        let mut rows: Vec<&EpsilonRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        rows.windows(2).all(|w| match (w[0].c_eps, w[1].c_eps) {
            (Some(a), Some(b)) => b >= a,
            _ => false,
        })
    }
}

/// `A ≤ εB + C·D`: the least feasible `C`.
fn least_c(a: f64, b: f64, d: f64, eps: f64) -> Option<f64> {
    let excess = a - eps * b;
    if excess <= 0.0 {
        return Some(0.0);
    }
    if d <= 0.0 {
        return None;
    }
    Some(excess / d).filter(|&c| c <= C_CAP)
}

/// ε-splitting of the convolution moment for `0 < p ≤ 8`.
pub fn epsilon_split_report(
    p: f64,
    epsilons: &[f64],
    sigma: &dyn Diffusion,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> Result<EpsilonReport> {
    if !(p > 0.0 && p <= 8.0) {
        return domain(format!("the splitting applies to 0 < p <= 8, got {p}"));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return domain("epsilons must be positive and finite");
    }
    check_ensemble(ensemble)?;
    let paths = convolution_ensemble(sigma, grid, ensemble, master_seed, p)?;
    let col = |f: &dyn Fn(&ConvolutionPath) -> f64| mean_se(&paths.iter().map(f).collect::<Vec<_>>());
    let conv = col(&|c| c.sup_conv.powf(p));
    let sup_sigma = col(&|c| c.sup_sigma.powf(p));
    let int_sigma = col(&|c| c.int_sigma_p);
    let rows = epsilons
        .iter()
        .map(|&epsilon| EpsilonRow { epsilon, c_eps: least_c(conv.mean, sup_sigma.mean, int_sigma.mean, epsilon) })
        .collect();
    Ok(EpsilonReport { p, conv, sup_sigma, int_sigma, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub levels: Vec<u32>,
    pub reports: Vec<MomentReport>,
}

impl UniformityReport {
    /// `max/min` of the level estimates.
    pub fn spread(&self) -> f64 {
        let est = self.reports.iter().map(|r| r.estimate);
        let (lo, hi) = est.fold((f64::INFINITY, 0.0f64), |(l, h), e| (l.min(e), h.max(e)));
        hi / lo
    }

    pub fn uniform(&self, factor: f64) -> bool {
        self.reports.iter().all(|r| r.valid) && self.spread() <= factor
    }
}

/// Sup-moments of the solutions driven by the mollified drifts `b_n`,
/// `n ∈ levels`, all on the same seeds.
#[allow(clippy::too_many_arguments)]
pub fn level_uniformity_report(
    levels: &[u32],
    p: f64,
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    u0: &Field,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> Result<UniformityReport> {
    if levels.is_empty() {
        return domain("need at least one mollification level");
    }
    let reports = levels
        .iter()
        .map(|&n| {
            let bn = MollifiedDrift::new(drift, MollifierParams::new(n)?)?;
            let r = mc_sup_moment(p, &bn, diffusion, u0, grid, ensemble, master_seed)?;
            if !r.valid {
                return Err(Error::BlowUp(format!(
                    "mollification level {n}: {:.1}% of paths blew up",
                    100.0 * r.blowup_fraction
                )));
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(UniformityReport { levels: levels.to_vec(), reports })
}

/// Moments across a restart at `T₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub p: f64,
    pub t0: f64,
    /// `E‖u(T₀)‖^p`.
    pub at_t0: MeanSe,
    /// `E[sup_{t≤T₀}‖u(t)‖^p]`.
    pub first: MeanSe,
    /// `E[sup_{T₀≤t≤2T₀}‖u(t)‖^p]` for the run restarted from `u(T₀)` with
    /// the shifted noise `W^{T₀}`.
    pub second: MeanSe,
    pub blowup_fraction: f64,
    /// The restarted paths coincide bit for bit with uninterrupted runs over
    /// `[0, 2T₀]`.
    pub matches_uninterrupted: bool,
}

impl RestartReport {
    pub fn bounded(&self) -> bool {
        self.blowup_fraction == 0.0 && self.second.mean.is_finite() && self.at_t0.mean.is_finite()
    }
}

/// Runs to `T₀ = grid.horizon`, restarts from `u(T₀)` on `[T₀, 2T₀]` with
/// the time-shifted noise, and compares with uninterrupted runs.
pub fn restart_report(
    p: f64,
    drift: &dyn Coefficient,
    diffusion: &dyn Diffusion,
    u0: &Field,
    grid: &Grid,
    ensemble: usize,
    master_seed: u64,
) -> Result<RestartReport> {
    check_ensemble(ensemble)?;
    let t0 = grid.horizon;
    let long = Grid::new(grid.n_modes, 2.0 * t0, 2 * grid.n_steps)?;
    let options = SolveOptions { save_stride: grid.n_steps, ..SolveOptions::default() };
    let rows: Vec<Option<(f64, f64, f64, bool)>> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let noise = long.noise(derive_seed(master_seed, i as u64))?;
            let first = solve_path(u0, drift, diffusion, grid, &noise.window(0, grid.n_steps)?, &options)?;
            if first.blown_up {
                return Ok(None);
            }
            let u_t0 = first.terminal();
            let shifted = noise.window(grid.n_steps, grid.n_steps)?;
            let second = solve_path_from(t0, u_t0, drift, diffusion, grid, &shifted, &options)?;
            if second.blown_up {
                return Ok(None);
            }
            let whole = solve_path(u0, drift, diffusion, &long, &noise, &options)?;
            let same = whole.fields.get(2) == Some(second.terminal()) && whole.fields.get(1) == Some(u_t0);
            Ok(Some((u_t0.l2_norm(), first.sup_l2, second.sup_l2, same)))
        })
        .collect::<Result<_>>()?;
    let ok: Vec<(f64, f64, f64, bool)> = rows.iter().flatten().copied().collect();
    let col = |f: &dyn Fn(&(f64, f64, f64, bool)) -> f64| mean_se(&ok.iter().map(f).collect::<Vec<_>>());
    Ok(RestartReport {
        p,
        t0,
        at_t0: col(&|r| r.0.powf(p)),
        first: col(&|r| r.1.powf(p)),
        second: col(&|r| r.2.powf(p)),
        blowup_fraction: (ensemble - ok.len()) as f64 / ensemble as f64,
        matches_uninterrupted: ok.iter().all(|r| r.3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{DiffusionSpec, DriftSpec};

    #[test]
    fn fingerprint_is_hex_sha256() {
        let f = fingerprint(&[b"abc"]);
        assert_eq!(f.len(), 64);
        assert_ne!(f, fingerprint(&[b"ab", b"c"]));
    }

    #[test]
    fn least_c_cases() {
        assert_eq!(least_c(0.0, 0.0, 0.0, 0.5), Some(0.0));
        assert_eq!(least_c(1.0, 4.0, 1.0, 0.5), Some(0.0));
        assert_eq!(least_c(3.0, 2.0, 2.0, 0.5), Some(1.0));
        assert_eq!(least_c(1.0, 0.0, 0.0, 0.5), None);
        assert_eq!(least_c(1e12, 0.0, 1.0, 0.5), None);
    }

    #[test]
    fn argument_checks() {
        let g = Grid::new(8, 1.0, 16).unwrap();
        let u0 = Field::zeros(&g.basis());
        let (b, s) = (DriftSpec::zero(), DiffusionSpec::additive(1.0));
        assert!(mc_sup_moment(2.0, &b, &s, &u0, &g, 29, 1).is_err());
        assert!(mc_sup_moment(0.5, &b, &s, &u0, &g, 30, 1).is_err());
        assert!(convolution_scaling_report(8.0, &s, &[1.0], &g, 30, 1).is_err());
        assert!(convolution_scaling_report(10.0, &s, &[0.0], &g, 30, 1).is_err());
        assert!(epsilon_split_report(9.0, &[0.5], &s, &g, 30, 1).is_err());
    }
}
