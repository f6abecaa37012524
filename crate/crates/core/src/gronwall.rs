//! Gronwall-type inequalities with logarithmic nonlinearities: closed-form
//! bounds, an independent Volterra oracle, and the Osgood test for drifts.
//!
//! The oracle solves the integral *equality*
//!
//! ```text
//! f(t) = M(t) + ∫₀ᵗ c_lin f + ∫₀ᵗ c_nl g(f) + ∫₀ᵗ (t−s)^{−α} c_sing f,
//! ```
//!
//! whose solution is the extremal function satisfying the corresponding
//! inequality, so "oracle ≤ bound" is the machine-checkable content of each
//! bound.

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;

use crate::coefficients::Coefficient;
use crate::error::{domain, Error, Result};
use crate::heat_kernel::log_plus;
use crate::stats::{derive_seed, uniform01};

/// Picard stopping rule (relative sup-distance per node).
const PICARD_TOL: f64 = 1e-14;
const PICARD_CAP: usize = 10_000;
const RESOLVE_TOL: f64 = 1e-5;
const MESH_SIGMA: f64 = 0.25;
const RESOLVE_DOUBLINGS: usize = 6;

/// Nonlinearity `g` in the integral equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `x log₊ x`.
    LogPlus,
    /// `x log₊(1/x)`, with value 0 at `x = 0`.
    LogPlusInverse,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::LogPlus => x * log_plus(x),
            Nonlinearity::LogPlusInverse => {
                // −x ln x rather than x ln(1/x): 1/x overflows for subnormal x
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    -x * x.ln()
                }
            }
        }
    }
}

/// A real function of time.
#[derive(Clone)]
pub struct Profile(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Profile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    /// `a + b t`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(move |t| a + b * t)
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile(M(0) = {})", self.at(0.0))
    }
}

/// Data of one Gronwall-type problem on `[0, T]`.
///
/// The time mesh has `n = round(T/grid_dt)` steps. When a singular term is
/// present it is graded, `t_j = T (j/n)^{2/(1−α)}`, which restores
/// second-order accuracy despite the `t^{1−α}` behaviour of the solution at
/// the origin; otherwise it is uniform.
#[derive(Debug, Clone)]
pub struct GronwallProblem {
    pub forcing: Profile,
    pub linear: Profile,
    pub nonlinear: Profile,
    pub singular: Profile,
    pub alpha: f64,
    pub horizon: f64,
    pub grid_dt: f64,
    pub nonlinearity: Nonlinearity,
}

impl GronwallProblem {
    /// `M ≡ 0` and all coefficients zero.
    pub fn new(nonlinearity: Nonlinearity, horizon: f64, grid_dt: f64) -> Self {
        Self {
            forcing: Profile::constant(0.0),
            linear: Profile::constant(0.0),
            nonlinear: Profile::constant(0.0),
            singular: Profile::constant(0.0),
            alpha: 0.0,
            horizon,
            grid_dt,
            nonlinearity,
        }
    }

    pub fn forcing(mut self, m: Profile) -> Self {
        self.forcing = m;
        self
    }

    pub fn linear(mut self, c: Profile) -> Self {
        self.linear = c;
        self
    }

    pub fn nonlinear(mut self, c: Profile) -> Self {
        self.nonlinear = c;
        self
    }

    pub fn singular(mut self, c: Profile, alpha: f64) -> Self {
        self.singular = c;
        self.alpha = alpha;
        self
    }

    /// Same problem with half the step.
    pub fn refined(&self) -> Self {
        Self { grid_dt: 0.5 * self.grid_dt, ..self.clone() }
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.grid_dt).round() as usize).max(1)
    }

    fn has_singular(&self) -> bool {
        self.alpha > 0.0 && self.mesh_with(self.steps()).iter().any(|&t| self.singular.at(t) != 0.0)
    }

    fn grading(&self) -> f64 {
        if self.has_singular() {
            2.0 / (1.0 - self.alpha)
        } else {
            1.0
        }
    }

    fn mesh_with(&self, n: usize) -> Vec<f64> {
        let r = if self.alpha > 0.0 { 2.0 / (1.0 - self.alpha) } else { 1.0 };
        self.mesh_graded(n, r)
    }

    /// Nodes `T·g(j/n)` where `g(s) = τ(s/σ)^r` on `[0, σ]` and is affine
    /// afterwards, with `τ` chosen so `g` is C¹; `σ = ¼`. Grading only near
    /// the singularity at 0 keeps the late steps (where solutions grow
    /// fastest) at `≈ 4/(3n)` instead of `r/n`.
    fn mesh_graded(&self, n: usize, r: f64) -> Vec<f64> {
        let tau = MESH_SIGMA / (r * (1.0 - MESH_SIGMA) + MESH_SIGMA);
        (0..=n)
            .map(|j| {
                let s = j as f64 / n as f64;
                let g = if r == 1.0 {
                    s
                } else if s < MESH_SIGMA {
                    tau * (s / MESH_SIGMA).powf(r)
                } else {
                    tau + (1.0 - tau) * (s - MESH_SIGMA) / (1.0 - MESH_SIGMA)
                };
                self.horizon * g
            })
            .collect()
    }

    /// Time mesh of the oracle output.
    pub fn mesh(&self) -> Vec<f64> {
        self.mesh_graded(self.steps(), self.grading())
    }

    /// Index of mesh node `t`.
    pub fn mesh_index(&self, t: f64) -> Result<usize> {
        let mesh = self.mesh();
        let i = mesh
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if (mesh[i] - t).abs() > 1e-12 * self.horizon.max(1.0) {
            return domain(format!("t = {t} is not a mesh node"));
        }
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon {} must be positive", self.horizon));
        }
        if !(self.grid_dt > 0.0 && self.grid_dt <= self.horizon) {
            return domain(format!("grid_dt {} must lie in (0, T]", self.grid_dt));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return domain(format!("alpha {} outside [0, 1/2]", self.alpha));
        }
        let mesh = self.mesh_graded(2 * self.steps(), self.grading());
        let m: Vec<f64> = mesh.iter().map(|&t| self.forcing.at(t)).collect();
        if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Precondition("forcing M must be finite and nonnegative".into()));
        }
        if m.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition("forcing M must be nondecreasing".into()));
        }
        for (name, c) in [("linear", &self.linear), ("nonlinear", &self.nonlinear), ("singular", &self.singular)] {
            if mesh.iter().any(|&t| !(c.at(t).is_finite() && c.at(t) >= 0.0)) {
                return Err(Error::Precondition(format!("{name} coefficient must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

/// Oracle values on the problem mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl OracleSolution {
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Product-integration weights of `∫ (t_i − s)^{−α} φ(s) ds` over
/// `[t_j, t_{j+1}]` for the linear interpolant of `φ`: `(left, right)`.
struct SingularWeights {
    alpha: f64,
}

impl SingularWeights {
    fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    /// `a = t_i − t_{j+1}`, `h = t_{j+1} − t_j`.
    fn weights(&self, a: f64, h: f64) -> (f64, f64) {
        let al = self.alpha;
        if al == 0.0 {
            return (0.5 * h, 0.5 * h);
        }
        if a >= 4.0 * h {
            // binomial series of (1 + ρτ)^{−α} in ρ = h/a ≤ ¼; avoids the
            // cancellation of the closed form when a ≫ h
            let rho = h / a;
            let (mut l, mut r) = (0.0, 0.0);
            let mut term = 1.0f64;
            let mut k = 0.0;
            while term.abs() > 1e-17 {
                l += term / (k + 2.0);
                r += term / ((k + 1.0) * (k + 2.0));
                term *= rho * (-al - k) / (k + 1.0);
                k += 1.0;
            }
            let scale = h * a.powf(-al);
            return (scale * l, scale * r);
        }
        let b = a + h;
        let i0 = (b.powf(1.0 - al) - a.powf(1.0 - al)) / (1.0 - al);
        let i1 = (b.powf(2.0 - al) - a.powf(2.0 - al)) / (2.0 - al);
        ((i1 - a * i0) / h, (b * i0 - i1) / h)
    }
}

struct Discrete {
    t: Vec<f64>,
    m: Vec<f64>,
    c_lin: Vec<f64>,
    c_nl: Vec<f64>,
    c_sing: Vec<f64>,
    g: Nonlinearity,
    kernel: SingularWeights,
    /// First node of the uniform tail of the mesh and the weights of its
    /// cells by lag `i − j − 1`.
    uniform_from: usize,
    lag_weights: Vec<(f64, f64)>,
}

impl Discrete {
    fn new(prob: &GronwallProblem, n: usize) -> Self {
        let r = prob.grading();
        let t = prob.mesh_graded(n, r);
        let sample = |p: &Profile| t.iter().map(|&s| p.at(s)).collect::<Vec<f64>>();
        let kernel = SingularWeights::new(prob.alpha);
        let uniform_from = if r == 1.0 { 0 } else { (MESH_SIGMA * n as f64).ceil() as usize };
        let h = (t[n] - t[uniform_from]) / (n - uniform_from) as f64;
        let lag_weights = (0..n - uniform_from).map(|lag| kernel.weights(lag as f64 * h, h)).collect();
        Self {
            m: sample(&prob.forcing),
            c_lin: sample(&prob.linear),
            c_nl: sample(&prob.nonlinear),
            c_sing: sample(&prob.singular),
            g: prob.nonlinearity,
            kernel,
            uniform_from,
            lag_weights,
            t,
        }
    }

    /// Singular weights of cell `[t_j, t_{j+1}]` seen from node `i`.
    fn cell_weights(&self, i: usize, j: usize) -> (f64, f64) {
        if j >= self.uniform_from {
            self.lag_weights[i - j - 1]
        } else {
            self.kernel.weights(self.t[i] - self.t[j + 1], self.t[j + 1] - self.t[j])
        }
    }

    fn regular(&self, j: usize, x: f64) -> f64 {
        self.c_lin[j] * x + self.c_nl[j] * self.g.apply(x)
    }

    /// Marches node by node. The discrete system is lower triangular, so
    /// solving each node's scalar equation in turn gives the fixed point of
    /// the whole-grid iteration.
    fn march(&self) -> Result<Vec<f64>> {
        let n = self.t.len() - 1;
        let singular = self.c_sing.iter().any(|&c| c != 0.0);
        let mut f = vec![0.0; n + 1];
        let mut reg = vec![0.0; n + 1];
        f[0] = self.m[0];
        reg[0] = self.regular(0, f[0]);
        let mut cum = 0.0;
        for i in 1..=n {
            let h = self.t[i] - self.t[i - 1];
            let mut known = self.m[i] + cum + 0.5 * h * reg[i - 1];
            let mut self_weight = 0.0;
            if singular {
                for j in 0..i {
                    let (wl, wr) = self.cell_weights(i, j);
                    known += wl * self.c_sing[j] * f[j];
                    if j + 1 < i {
                        known += wr * self.c_sing[j + 1] * f[j + 1];
                    } else {
                        self_weight = wr * self.c_sing[i];
                    }
                }
            }
            let x = self.solve_node(i, known, 0.5 * h, self_weight)?;
            f[i] = x;
            reg[i] = self.regular(i, x);
            cum += 0.5 * h * (reg[i - 1] + reg[i]);
        }
        Ok(f)
    }

    /// Solves `x = known + k·regular(x) + w·x` at node `i`.
    ///
    /// For `x log₊(1/x)` the right side is a concave map with bounded slope
    /// at large `x`, and Picard iteration from `M(t_i)` converges. For
    /// `x log₊ x` the slope grows like `k c log x` and Picard stalls once the
    /// solution is huge; there `F(x) = x − rhs(x)` is concave with
    /// `F(known) ≤ 0`, so Newton from `known` increases monotonically to the
    /// smallest root, the one continuation in time selects. No root (the
    /// step is too coarse for the growth) is an oracle failure.
    fn solve_node(&self, i: usize, known: f64, k: f64, w: f64) -> Result<f64> {
        let rhs = |x: f64| known + k * self.regular(i, x) + w * x;
        let mut last = f64::INFINITY;
        match self.g {
            Nonlinearity::LogPlusInverse => {
                let mut x = self.m[i];
                for _ in 0..PICARD_CAP {
                    let next = rhs(x);
                    last = (next - x).abs();
                    x = next;
                    if !x.is_finite() {
                        break;
                    }
                    if last <= PICARD_TOL * x.abs().max(1.0) {
                        return Ok(x);
                    }
                }
            }
            Nonlinearity::LogPlus => {
                let mut x = known;
                for _ in 0..PICARD_CAP {
                    let dg = if x > 1.0 { 1.0 + x.ln() } else { 0.0 };
                    let slope = 1.0 - k * (self.c_lin[i] + self.c_nl[i] * dg) - w;
                    if slope <= 0.0 {
                        break;
                    }
                    let step = (rhs(x) - x) / slope;
                    last = step.abs();
                    x += step;
                    if !x.is_finite() {
                        break;
                    }
                    if last <= PICARD_TOL * x.abs().max(1.0) {
                        return Ok(x);
                    }
                }
            }
        }
        Err(Error::OracleFailure { iterations: PICARD_CAP, residual: last })
    }

    /// The discrete operator `K f` applied to a whole grid function.
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.t.len() - 1;
        let mut out = vec![0.0; n + 1];
        let mut cum = 0.0;
        out[0] = self.m[0];
        for i in 1..=n {
            let h = self.t[i] - self.t[i - 1];
            cum += 0.5 * h * (self.regular(i - 1, f[i - 1]) + self.regular(i, f[i]));
            let mut s = 0.0;
            for j in 0..i {
                let (wl, wr) = self.cell_weights(i, j);
                s += wl * self.c_sing[j] * f[j] + wr * self.c_sing[j + 1] * f[j + 1];
            }
            out[i] = self.m[i] + cum + s;
        }
        out
    }
}

/// Solution of the integral equality on the problem mesh.
///
/// Product-trapezoid marching is run on nested meshes with `n, 2n, 4n, …`
/// steps and consecutive levels are combined by one Richardson step,
/// `(4 f_{2n} − f_n)/3`, at the problem nodes. The first extrapolant that
/// agrees with its predecessor to `RESOLVE_TOL · max(1, |f|)` everywhere is
/// returned; if none does within `RESOLVE_DOUBLINGS` extra levels the
/// solution counts as unresolved (`OracleFailure`).
pub fn volterra_oracle(prob: &GronwallProblem) -> Result<OracleSolution> {
    prob.validate()?;
    let base = prob.steps();
    let at_base = |n: usize| -> Result<Vec<f64>> {
        let f = Discrete::new(prob, n).march()?;
        let stride = n / base;
        Ok((0..=base).map(|j| f[j * stride]).collect())
    };
    let richardson = |c: &[f64], f: &[f64]| -> Vec<f64> { c.iter().zip(f).map(|(c, f)| f + (f - c) / 3.0).collect() };
    let (f1, f2) = rayon::join(|| at_base(base), || at_base(2 * base));
    let mut fine = f2?;
    let mut prev = richardson(&f1?, &fine);
    let mut change = f64::INFINITY;
    for level in 2..=RESOLVE_DOUBLINGS + 1 {
        let next = at_base(base << level)?;
        let cur = richardson(&fine, &next);
        change = cur.iter().zip(&prev).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
        if !change.is_finite() {
            break;
        }
        if change <= RESOLVE_TOL && cur.iter().all(|v| *v >= 0.0) {
            return Ok(OracleSolution { times: prob.mesh(), values: cur });
        }
        fine = next;
        prev = cur;
    }
    Err(Error::OracleFailure { iterations: RESOLVE_DOUBLINGS, residual: change })
}

/// Whole-grid Picard iteration `f^{k+1} = K f^k` of the (unextrapolated)
/// discrete equation from a constant start `f⁰ ≡ seed`, stopped when the
/// sup-distance of successive iterates drops below `tol`. Returns the final
/// iterate and the iteration count.
pub fn picard_from(prob: &GronwallProblem, seed: f64, tol: f64) -> Result<(OracleSolution, usize)> {
    prob.validate()?;
    if !(seed >= 0.0 && seed.is_finite()) {
        return domain("Picard seed must be finite and nonnegative");
    }
    let disc = Discrete::new(prob, prob.steps());
    let mut f = vec![seed; disc.t.len()];
    let mut dist = f64::INFINITY;
    for k in 1..=PICARD_CAP {
        let next = disc.apply(&f);
        dist = next.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        f = next;
        if !dist.is_finite() {
            break;
        }
        if dist < tol {
            return Ok((OracleSolution { times: disc.t, values: f }, k));
        }
    }
    Err(Error::OracleFailure { iterations: PICARD_CAP, residual: dist })
}

/// Sup-norm change of the oracle under halving `grid_dt`, relative to
/// `max(1, sup f)`, at the common nodes.
pub fn grid_stability(prob: &GronwallProblem) -> Result<f64> {
    let a = volterra_oracle(prob)?;
    let b = volterra_oracle(&prob.refined())?;
    let diff = a.values.iter().enumerate().map(|(j, v)| (v - b.values[2 * j]).abs()).fold(0.0, f64::max);
    Ok(diff / b.sup().max(1.0))
}

fn cumulative_trapezoid_mesh(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.len()];
    for i in 1..t.len() {
        out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    }
    out
}

/// The closed-form bound `M(t)^{exp C₂(t)} exp(exp C₂(t) ∫₀ᵗ c₁ e^{−C₂})`
/// for `X ≤ M + ∫c₁X + ∫c₂ X log₊X`, on the whole mesh. Here `c₁` is the
/// linear and `c₂` the nonlinear coefficient; integrals by trapezoid.
pub fn log_gronwall_bound_curve(prob: &GronwallProblem) -> Result<Vec<f64>> {
    prob.validate()?;
    if prob.nonlinearity != Nonlinearity::LogPlus {
        return Err(Error::Precondition("the log-Gronwall bound needs the x log+ x nonlinearity".into()));
    }
    if prob.has_singular() {
        return Err(Error::Precondition("the log-Gronwall bound has no singular term".into()));
    }
    let m0 = prob.forcing.at(0.0);
    if m0 < 1.0 {
        return Err(Error::Precondition(format!("M(0) = {m0} < 1")));
    }
    let t = prob.mesh();
    let c2: Vec<f64> = t.iter().map(|&s| prob.nonlinear.at(s)).collect();
    let big_c2 = cumulative_trapezoid_mesh(&t, &c2);
    let integrand: Vec<f64> = t.iter().zip(&big_c2).map(|(&s, c)| prob.linear.at(s) * (-c).exp()).collect();
    let inner = cumulative_trapezoid_mesh(&t, &integrand);
    Ok(t.iter()
        .enumerate()
        .map(|(i, &s)| (big_c2[i].exp() * (prob.forcing.at(s).ln() + inner[i])).exp())
        .collect())
}

pub fn log_gronwall_bound(prob: &GronwallProblem, t: f64) -> Result<f64> {
    let i = prob.mesh_index(t)?;
    Ok(log_gronwall_bound_curve(prob)?[i])
}

/// Constants of the reduced form `f ≤ C M + C ∫ f log₊(1/f)`, built by one
/// substitution of the inequality into its singular term, Fubini, and the
/// classical Gronwall inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `max(C₁, C₃) e^{C₂ t}`.
    pub c: f64,
}

/// `C₁ = 1 + c_s t^{1−α}/(1−α)`, `C₂ = c_l + c_l c_s t^{1−α}/(1−α) +
/// c_s² B(1−α, 1−α) t^{1−2α}`, `C₃ = c_n + c_s c_n t^{1−α}/(1−α)`.
pub fn reduced_constants(c_lin: f64, c_nl: f64, c_sing: f64, alpha: f64, t: f64) -> ReducedConstants {
    let a = 1.0 - alpha;
    let s = c_sing * t.powf(a) / a;
    let beta = statrs::function::beta::beta(a, a);
    let c1 = 1.0 + s;
    let c2 = c_lin + c_lin * s + c_sing * c_sing * beta * t.powf(1.0 - 2.0 * alpha);
    let c3 = c_nl + c_nl * s;
    ReducedConstants { c1, c2, c3, c: c1.max(c3) * (c2 * t).exp() }
}

/// Oracle, reduced-form bound and constant on the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedReport {
    pub times: Vec<f64>,
    pub oracle: Vec<f64>,
    pub bound: Vec<f64>,
    pub constant: Vec<f64>,
}

pub fn reduced_report(prob: &GronwallProblem) -> Result<ReducedReport> {
    if prob.nonlinearity != Nonlinearity::LogPlusInverse {
        return Err(Error::Precondition("the reduced form needs the x log+(1/x) nonlinearity".into()));
    }
    let sol = volterra_oracle(prob)?;
    let t = &sol.times;
    let g: Vec<f64> = sol.values.iter().map(|&v| Nonlinearity::LogPlusInverse.apply(v)).collect();
    let cum = cumulative_trapezoid_mesh(t, &g);
    // constant coefficients are required; functions are replaced by their
    // running maximum, which keeps the inequality valid
    let (mut cl, mut cn, mut cs) = (0.0f64, 0.0f64, 0.0f64);
    let mut bound = Vec::with_capacity(t.len());
    let mut constant = Vec::with_capacity(t.len());
    for (i, &s) in t.iter().enumerate() {
        cl = cl.max(prob.linear.at(s));
        cn = cn.max(prob.nonlinear.at(s));
        cs = cs.max(prob.singular.at(s));
        let c = reduced_constants(cl, cn, cs, prob.alpha, s).c;
        constant.push(c);
        bound.push(c * prob.forcing.at(s) + c * cum[i]);
    }
    Ok(ReducedReport { times: sol.times.clone(), oracle: sol.values, bound, constant })
}

/// `(oracle(t), bound(t))` for the reduced form.
pub fn check_reduced(prob: &GronwallProblem, t: f64) -> Result<(f64, f64)> {
    let i = prob.mesh_index(t)?;
    let r = reduced_report(prob)?;
    Ok((r.oracle[i], r.bound[i]))
}

/// Oracle and the bound `(C M(t) + 1)^{exp(C t)}` with the smallest `C`
/// (found by bisection on `[1, 10⁶]`) dominating on the whole mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleExpReport {
    pub times: Vec<f64>,
    pub oracle: Vec<f64>,
    pub bound: Vec<f64>,
    pub constant: f64,
}

pub const DOUBLE_EXP_C_MAX: f64 = 1e6;

/// `log` of `(C m + 1)^{exp(C t)}`.
pub fn double_exp_log_bound(c: f64, m: f64, t: f64) -> f64 {
    (c * t).exp() * (c * m).ln_1p()
}

pub fn double_exp_report(prob: &GronwallProblem) -> Result<DoubleExpReport> {
    if prob.nonlinearity != Nonlinearity::LogPlus {
        return Err(Error::Precondition("the double-exponential bound needs the x log+ x nonlinearity".into()));
    }
    let sol = volterra_oracle(prob)?;
    let m: Vec<f64> = sol.times.iter().map(|&s| prob.forcing.at(s)).collect();
    let dominates = |c: f64| {
        sol.times.iter().zip(&m).zip(&sol.values).all(|((&t, &mi), &f)| f <= 1.0 || double_exp_log_bound(c, mi, t) >= f.ln())
    };
    if !dominates(DOUBLE_EXP_C_MAX) {
        return Err(Error::Counterexample(format!("no C <= {DOUBLE_EXP_C_MAX:e} dominates the oracle")));
    }
    let c = if dominates(1.0) {
        1.0
    } else {
        let (mut lo, mut hi) = (1.0, DOUBLE_EXP_C_MAX);
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if dominates(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let bound = sol.times.iter().zip(&m).map(|(&t, &mi)| double_exp_log_bound(c, mi, t).exp()).collect();
    Ok(DoubleExpReport { times: sol.times, oracle: sol.values, bound, constant: c })
}

pub fn check_double_exp(prob: &GronwallProblem, t: f64) -> Result<(f64, f64)> {
    let i = prob.mesh_index(t)?;
    let r = double_exp_report(prob)?;
    Ok((r.oracle[i], r.bound[i]))
}

/// Classification of `∫_{z₀}^∞ dz / b(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OsgoodClass {
    Convergent { integral: f64 },
    Divergent,
}

/// Decides convergence of `∫_{z₀}^∞ dz/b(z)` after the substitution
/// `z = z₀ eˢ`, which turns it into `∫₀^∞ h(s) ds` with `h = z/b(z)`.
/// `h` is integrated over dyadic panels up to `s = 512`; the local power-law
/// decay exponent `p` of `h` between `s = 256` and `512` decides the tail:
/// `p > 1.05` is convergent, with the tail `h(S)·S/(p−1)` added.
pub fn osgood_classifier(drift: &dyn Coefficient, z0: f64) -> Result<OsgoodClass> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return domain(format!("z0 = {z0} must be positive"));
    }
    let h = |s: f64| {
        let z = z0 * s.exp();
        let b = drift.eval(z);
        if b.is_infinite() && b > 0.0 {
            0.0
        } else {
            z / b
        }
    };
    let mut edges = vec![0.0, 1.0];
    while *edges.last().unwrap() < 512.0 {
        edges.push(2.0 * edges.last().unwrap());
    }
    let mut total = 0.0;
    for w in edges.windows(2) {
        for k in 0..=64 {
            let s = w[0] + (w[1] - w[0]) * k as f64 / 64.0;
            let v = h(s);
            if !(v >= 0.0) || v.is_infinite() || (v == 0.0 && drift.eval(z0 * s.exp()).is_finite()) {
                return Err(Error::Precondition(format!("drift not positive at z = {:e}", z0 * s.exp())));
            }
        }
        let out = quadrature::double_exponential::integrate(h, w[0], w[1], 1e-12 * (1.0 + total));
        total += out.integral;
    }
    let (h1, h2) = (h(256.0), h(512.0));
    if h2 == 0.0 {
        return Ok(OsgoodClass::Convergent { integral: total });
    }
    let p = -(h2.ln() - h1.ln()) / 2f64.ln();
    if p > 1.05 {
        Ok(OsgoodClass::Convergent { integral: total + h2 * 512.0 / (p - 1.0) })
    } else {
        Ok(OsgoodClass::Divergent)
    }
}

/// Which inequality a corpus problem exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GronwallBound {
    /// `X ≤ M + ∫c₁X + ∫c₂X log₊X`, closed-form bound.
    LogGronwall,
    /// Singular kernel and `x log₊(1/x)`, reduced form.
    Reduced,
    /// Singular kernel and `x log₊x`, double-exponential bound.
    DoubleExponential,
}

impl GronwallBound {
    pub fn name(self) -> &'static str {
        match self {
            GronwallBound::LogGronwall => "log-gronwall",
            GronwallBound::Reduced => "reduced",
            GronwallBound::DoubleExponential => "double-exponential",
        }
    }
}

/// Relative slack allowed in the log-Gronwall comparison. That bound is
/// attained exactly for constant data (the equality is then the ODE
/// `(log X)' = c₁ + c₂ log X`), so the comparison only tolerates the
/// discretization error of the oracle.
pub const LOG_GRONWALL_SLACK: f64 = 1e-7;

/// Random problem for `kind`, drawn from `seed`:
/// - log-Gronwall: `M = m₀ + m₁t`, `m₀ ∈ [1,5]`, `m₁ ∈ [0,2]`; affine
///   coefficients with values in `[0, 2]`.
/// - reduced: constants in `[0,2]`, `α ∈ {0, ¼, ½}`, `M = m₀ + m₁t` with
///   `m₀ ∈ [0, ½]`, `m₁ ∈ [0, ½]`.
/// - double-exponential: constants in `[0,2]`, `α ∈ {0, ¼, ½}`, `M ∈ [1,5]`.
pub fn random_problem(kind: GronwallBound, seed: u64, grid_dt: f64) -> GronwallProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * uniform01(&mut rng);
    match kind {
        GronwallBound::LogGronwall => {
            let (m0, m1) = (u(1.0, 5.0), u(0.0, 2.0));
            let (a0, a1) = (u(0.0, 2.0), u(-1.0, 1.0));
            let (b0, b1) = (u(0.0, 2.0), u(-1.0, 1.0));
            // affine coefficients kept inside [0, 2] on [0, 1]
            let clamp = |c0: f64, c1: f64| (c0, c1.clamp(-c0, 2.0 - c0));
            let (a0, a1) = clamp(a0, a1);
            let (b0, b1) = clamp(b0, b1);
            GronwallProblem::new(Nonlinearity::LogPlus, 1.0, grid_dt)
                .forcing(Profile::affine(m0, m1))
                .linear(Profile::affine(a0, a1))
                .nonlinear(Profile::affine(b0, b1))
        }
        GronwallBound::Reduced | GronwallBound::DoubleExponential => {
            let (cl, cn, cs) = (u(0.0, 2.0), u(0.0, 2.0), u(0.0, 2.0));
            let alpha = [0.0, 0.25, 0.5][(u(0.0, 3.0) as usize).min(2)];
            let (nl, m) = if kind == GronwallBound::Reduced {
                (Nonlinearity::LogPlusInverse, Profile::affine(u(0.0, 0.5), u(0.0, 0.5)))
            } else {
                (Nonlinearity::LogPlus, Profile::constant(u(1.0, 5.0)))
            };
            GronwallProblem::new(nl, 1.0, grid_dt)
                .forcing(m)
                .linear(Profile::constant(cl))
                .nonlinear(Profile::constant(cn))
                .singular(Profile::constant(cs), alpha)
        }
    }
}

/// One row of a corpus sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationRecord {
    pub draw_id: usize,
    pub kind: GronwallBound,
    pub oracle_max: f64,
    pub bound_max: f64,
    /// Smallest `bound/oracle` over the mesh (∞ where the oracle is 0).
    pub min_ratio: f64,
    pub pass: bool,
}

/// Oracle-versus-bound comparison for one problem.
pub fn domination(kind: GronwallBound, draw_id: usize, prob: &GronwallProblem) -> Result<DominationRecord> {
    let (oracle, bound, slack) = match kind {
        GronwallBound::LogGronwall => (volterra_oracle(prob)?.values, log_gronwall_bound_curve(prob)?, LOG_GRONWALL_SLACK),
        GronwallBound::Reduced => {
            let r = reduced_report(prob)?;
            (r.oracle, r.bound, 0.0)
        }
        GronwallBound::DoubleExponential => {
            let r = double_exp_report(prob)?;
            (r.oracle, r.bound, 0.0)
        }
    };
    let min_ratio = oracle
        .iter()
        .zip(&bound)
        .map(|(o, b)| if *o == 0.0 { f64::INFINITY } else { b / o })
        .fold(f64::INFINITY, f64::min);
    let pass = oracle.iter().zip(&bound).all(|(o, b)| *o >= 0.0 && *o <= b * (1.0 + slack));
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    Ok(DominationRecord { draw_id, kind, oracle_max: max(&oracle), bound_max: max(&bound), min_ratio, pass })
}

/// Randomized sweep of `count` problems, draw `i` seeded by
/// `derive_seed(master_seed, i)`; results in draw order.
pub fn domination_sweep(kind: GronwallBound, count: usize, master_seed: u64, grid_dt: f64) -> Result<Vec<DominationRecord>> {
    (0..count)
        .into_par_iter()
        .map(|i| domination(kind, i, &random_problem(kind, derive_seed(master_seed, i as u64), grid_dt)))
        .collect()
}

/// Problems with closed-form or well-resolved solutions on which grid
/// stability is asserted.
pub fn reference_corpus(grid_dt: f64) -> Vec<GronwallProblem> {
    vec![
        // exponential: f = e^t
        GronwallProblem::new(Nonlinearity::LogPlus, 1.0, grid_dt)
            .forcing(Profile::constant(1.0))
            .linear(Profile::constant(1.0)),
        // f' = f log f, f(0) = 2
        GronwallProblem::new(Nonlinearity::LogPlus, 1.0, grid_dt)
            .forcing(Profile::constant(2.0))
            .nonlinear(Profile::constant(1.0)),
        // Abel equation with x log+(1/x) term
        GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, grid_dt)
            .forcing(Profile::constant(0.01))
            .singular(Profile::constant(1.0), 0.5),
        // all terms at α = 1/4
        GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, grid_dt)
            .forcing(Profile::constant(0.5))
            .linear(Profile::constant(1.0))
            .nonlinear(Profile::constant(1.0))
            .singular(Profile::constant(1.0), 0.25),
        // zero problem
        GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, grid_dt),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_ode(m: f64) -> GronwallProblem {
        GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 1e-3)
            .forcing(Profile::constant(m))
            .nonlinear(Profile::constant(1.0))
    }

    #[test]
    fn trivial_problem_returns_forcing() {
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).forcing(Profile::affine(1.0, 2.0));
        let sol = volterra_oracle(&p).unwrap();
        for (t, v) in sol.times.iter().zip(&sol.values) {
            assert!((v - (1.0 + 2.0 * t)).abs() < 1e-14);
        }
        let b = log_gronwall_bound_curve(&p).unwrap();
        for (t, v) in sol.times.iter().zip(&b) {
            assert!((v - (1.0 + 2.0 * t)).abs() < 1e-13);
        }
    }

    #[test]
    fn exponential_reference() {
        let p = reference_corpus(1e-3).remove(0);
        let sol = volterra_oracle(&p).unwrap();
        for (t, v) in sol.times.iter().zip(&sol.values) {
            assert!((v - t.exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn classical_gronwall_case() {
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01)
            .forcing(Profile::constant(3.0))
            .linear(Profile::constant(0.7));
        let b = log_gronwall_bound(&p, 1.0).unwrap();
        assert!((b - 3.0 * 0.7f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn log_gronwall_example_value() {
        let b = log_gronwall_bound(&log_ode(2.0), 1.0).unwrap();
        assert!((b - 2f64.powf(std::f64::consts::E)).abs() < 1e-12);
    }

    #[test]
    fn precondition_m0_at_least_one() {
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).forcing(Profile::constant(0.5));
        assert!(matches!(log_gronwall_bound_curve(&p), Err(Error::Precondition(_))));
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).forcing(Profile::affine(2.0, -1.0));
        assert!(volterra_oracle(&p).is_err());
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).singular(Profile::constant(1.0), 0.7);
        assert!(volterra_oracle(&p).is_err());
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).linear(Profile::constant(-1.0));
        assert!(volterra_oracle(&p).is_err());
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let p = GronwallProblem::new(Nonlinearity::LogPlusInverse, 1.0, 0.01)
            .linear(Profile::constant(1.0))
            .nonlinear(Profile::constant(2.0))
            .singular(Profile::constant(1.0), 0.5);
        let r = reduced_report(&p).unwrap();
        assert!(r.oracle.iter().all(|v| *v == 0.0));
        assert!(r.bound.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn singular_weights_integrate_linear_functions() {
        // ∫₀¹ (1−s)^{−½} s ds = B(2, ½) = 4/3
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).singular(Profile::constant(1.0), 0.5);
        let d = Discrete::new(&p, 50);
        let n = d.t.len() - 1;
        let mut s = 0.0;
        for j in 0..n {
            let (wl, wr) = d.kernel.weights(d.t[n] - d.t[j + 1], d.t[j + 1] - d.t[j]);
            s += wl * d.t[j] + wr * d.t[j + 1];
        }
        assert!((s - 4.0 / 3.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn reduced_constants_without_singular_term() {
        let c = reduced_constants(1.0, 2.0, 0.0, 0.5, 1.0);
        assert_eq!((c.c1, c.c2, c.c3), (1.0, 1.0, 2.0));
        assert!((c.c - 2.0 * 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn double_exp_trivial_constant() {
        let p = GronwallProblem::new(Nonlinearity::LogPlus, 1.0, 0.01).forcing(Profile::constant(3.0));
        let r = double_exp_report(&p).unwrap();
        assert_eq!(r.constant, 1.0);
    }

    #[test]
    fn osgood_examples() {
        let sq = osgood_classifier(&|z: f64| z * z, 1.0).unwrap();
        match sq {
            OsgoodClass::Convergent { integral } => assert!((integral - 1.0).abs() < 1e-8, "{integral}"),
            _ => panic!("z^2 must be convergent"),
        }
        let sup = osgood_classifier(&|z: f64| z * z.ln_1p().powi(2), 1.0).unwrap();
        assert!(matches!(sup, OsgoodClass::Convergent { .. }));
        let crit = osgood_classifier(&|z: f64| z * z.ln_1p(), 1.0).unwrap();
        assert_eq!(crit, OsgoodClass::Divergent);
        assert!(osgood_classifier(&|z: f64| -z, 1.0).is_err());
    }
}
