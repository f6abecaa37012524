//! Drift and diffusion coefficient families, sample-based hypothesis
//! checkers, and the mollified drift approximations `b_n`.

mod hypotheses;
mod mollify;

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};

pub use hypotheses::{
    drift_growth_check, diffusion_growth_check, diffusion_lipschitz_check, log_lipschitz_check, standard_pairs,
    standard_sample, LogLipConstants,
};
pub use mollify::{bump, cutoff, uniform_growth_check, MollifiedDrift, MollifierParams};

/// A scalar coefficient `ℝ → ℝ`.
pub trait Coefficient: Send + Sync {
    fn eval(&self, z: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Send + Sync> Coefficient for F {
    fn eval(&self, z: f64) -> f64 {
        self(z)
    }
}

/// `z log|z|` with the continuous value 0 at the origin.
pub fn z_log_abs(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z * z.abs().ln()
    }
}

/// Piecewise-linear table with constant extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.is_empty() {
            return domain("table needs equally many (>= 1) nodes and values");
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return domain("table nodes must be strictly increasing");
        }
        if nodes.iter().chain(&values).any(|v| !v.is_finite()) {
            return domain("table entries must be finite");
        }
        Ok(Self { nodes, values })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let n = &self.nodes;
        if z <= n[0] {
            return self.values[0];
        }
        if z >= n[n.len() - 1] {
            return self.values[n.len() - 1];
        }
        let i = n.partition_point(|&v| v <= z) - 1;
        let w = (z - n[i]) / (n[i + 1] - n[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Largest secant slope of the table.
    pub fn lipschitz(&self) -> f64 {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// Drift families.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftFamily {
    /// `b ≡ 0`.
    Zero,
    /// `c z log|z|`, the critical case.
    LogLinear { scale: f64 },
    /// `c z (log(1 + |z|))^exponent`; supercritical for `exponent > 1`.
    LogPower { scale: f64, exponent: f64 },
    /// `L z`.
    Linear { slope: f64 },
    /// `c z^degree`.
    Polynomial { scale: f64, degree: i32 },
    /// `c |z|^exponent`, used as a non-Lipschitz counterexample.
    AbsPower { scale: f64, exponent: f64 },
    /// Piecewise-linear table, constant outside its range.
    Table(Table),
}

/// Declared growth and log-Lipschitz constants `c₁..c₅`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub family: DriftFamily,
    pub constants: Option<DriftConstants>,
}

impl DriftSpec {
    pub fn new(family: DriftFamily) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match &family {
            DriftFamily::Zero | DriftFamily::Table(_) => true,
            DriftFamily::LogLinear { scale } => finite(&[*scale]),
            DriftFamily::LogPower { scale, exponent } => finite(&[*scale, *exponent]) && *exponent >= 0.0,
            DriftFamily::Linear { slope } => finite(&[*slope]),
            DriftFamily::Polynomial { scale, degree } => finite(&[*scale]) && *degree >= 0,
            DriftFamily::AbsPower { scale, exponent } => finite(&[*scale, *exponent]) && *exponent > 0.0,
        };
        if !ok {
            return domain(format!("invalid drift parameters {family:?}"));
        }
        Ok(Self { family, constants: None })
    }

    pub fn zero() -> Self {
        Self { family: DriftFamily::Zero, constants: None }
    }

    pub fn log_linear(scale: f64) -> Self {
        Self { family: DriftFamily::LogLinear { scale }, constants: None }
    }

    pub fn log_power(scale: f64, exponent: f64) -> Self {
        Self { family: DriftFamily::LogPower { scale, exponent }, constants: None }
    }

    pub fn linear(slope: f64) -> Self {
        Self { family: DriftFamily::Linear { slope }, constants: None }
    }

    /// Attaches declared hypothesis constants; they are checked against the
    /// standard samples.
    pub fn with_constants(mut self, c: DriftConstants) -> Result<Self> {
        drift_growth_check(&self, &standard_sample())?;
        let h1_ok = standard_sample().iter().all(|&u| {
            self.eval(u).abs() <= c.c1 * u.abs() * crate::heat_kernel::log_plus(u.abs()) + c.c2 + 1e-12
        });
        if !h1_ok {
            return Err(crate::Error::HypothesisViolation {
                hypothesis: "drift-growth",
                detail: format!("declared (c1, c2) = ({}, {}) fail on the standard sample", c.c1, c.c2),
            });
        }
        let pairs = standard_pairs();
        let lhs_ok = pairs.iter().all(|&(u, v)| {
            let d = (u - v).abs();
            let m = u.abs().max(v.abs());
            let rhs = c.c3 * d * crate::heat_kernel::log_plus(1.0 / d)
                + c.c4 * crate::heat_kernel::log_plus(m) * d
                + c.c5 * d;
            (self.eval(u) - self.eval(v)).abs() <= rhs * (1.0 + 1e-9) + 1e-12
        });
        if !lhs_ok {
            return Err(crate::Error::HypothesisViolation {
                hypothesis: "log-lipschitz",
                detail: "declared (c3, c4, c5) fail on the standard pair sample".into(),
            });
        }
        self.constants = Some(c);
        Ok(self)
    }

    /// Evaluates the drift (finite for finite `z` except when the family
    /// itself overflows).
    pub fn eval(&self, z: f64) -> f64 {
        match &self.family {
            DriftFamily::Zero => 0.0,
            DriftFamily::LogLinear { scale } => scale * z_log_abs(z),
            DriftFamily::LogPower { scale, exponent } => scale * z * z.abs().ln_1p().powf(*exponent),
            DriftFamily::Linear { slope } => slope * z,
            DriftFamily::Polynomial { scale, degree } => scale * z.powi(*degree),
            DriftFamily::AbsPower { scale, exponent } => scale * z.abs().powf(*exponent),
            DriftFamily::Table(t) => t.eval(z),
        }
    }

    /// Whether `b(0) = 0`.
    pub fn vanishes_at_zero(&self) -> bool {
        self.eval(0.0) == 0.0
    }
}

impl Coefficient for DriftSpec {
    fn eval(&self, z: f64) -> f64 {
        DriftSpec::eval(self, z)
    }
}

/// Diffusion families. All are continuous with sublinear growth.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionFamily {
    /// `d₂ + d₁ (1 + u²)^{θ/2}`.
    SublinearPower { d1: f64, d2: f64, theta: f64 },
    /// `d₂ + d₁ tanh(u)`.
    Bounded { d1: f64, d2: f64 },
    /// Piecewise-linear table, constant outside its range.
    LipschitzTable(Table),
}

/// Declared growth and Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConstants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    pub family: DiffusionFamily,
    pub constants: DiffusionConstants,
}

impl DiffusionSpec {
    pub fn new(family: DiffusionFamily) -> Result<Self> {
        let constants = match &family {
            DiffusionFamily::SublinearPower { d1, d2, theta } => {
                if !(0.0..1.0).contains(theta) {
                    return domain(format!("theta = {theta} must lie in [0, 1)"));
                }
                if !(d1.is_finite() && d2.is_finite()) {
                    return domain("diffusion parameters must be finite");
                }
                // (1+u²)^{θ/2} ≤ 1 + |u|^θ; derivative bounded by θ
                DiffusionConstants { d1: d1.abs(), d2: d1.abs() + d2.abs(), d3: d1.abs() * theta, theta: *theta }
            }
            DiffusionFamily::Bounded { d1, d2 } => {
                if !(d1.is_finite() && d2.is_finite()) {
                    return domain("diffusion parameters must be finite");
                }
                DiffusionConstants { d1: d1.abs(), d2: d2.abs(), d3: d1.abs(), theta: 0.0 }
            }
            DiffusionFamily::LipschitzTable(t) => {
                let sup = t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                DiffusionConstants { d1: 0.0, d2: sup, d3: t.lipschitz(), theta: 0.0 }
            }
        };
        Ok(Self { family, constants })
    }

    pub fn zero() -> Self {
        Self::additive(0.0)
    }

    /// Constant (additive) noise `σ ≡ s`.
    pub fn additive(s: f64) -> Self {
        Self {
            family: DiffusionFamily::Bounded { d1: 0.0, d2: s },
            constants: DiffusionConstants { d1: 0.0, d2: s.abs(), d3: 0.0, theta: 0.0 },
        }
    }

    pub fn sublinear_power(d1: f64, d2: f64, theta: f64) -> Result<Self> {
        Self::new(DiffusionFamily::SublinearPower { d1, d2, theta })
    }

    pub fn bounded(d1: f64, d2: f64) -> Result<Self> {
        Self::new(DiffusionFamily::Bounded { d1, d2 })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.family {
            DiffusionFamily::SublinearPower { d1, d2, theta } => d2 + d1 * (1.0 + u * u).powf(0.5 * theta),
            DiffusionFamily::Bounded { d1, d2 } => d2 + d1 * u.tanh(),
            DiffusionFamily::LipschitzTable(t) => t.eval(u),
        }
    }

    /// `σ` does not depend on `u`.
    pub fn is_constant(&self) -> bool {
        match &self.family {
            DiffusionFamily::SublinearPower { d1, .. } | DiffusionFamily::Bounded { d1, .. } => *d1 == 0.0,
            DiffusionFamily::LipschitzTable(t) => t.values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Diffusion specs shipped with the crate: one per θ in {0, ½, 0.9}
    /// plus a bounded one.
    pub fn shipped() -> Vec<DiffusionSpec> {
        vec![
            Self::sublinear_power(1.0, 0.0, 0.0).expect("valid"),
            Self::sublinear_power(1.0, 0.5, 0.5).expect("valid"),
            Self::sublinear_power(0.5, 0.0, 0.9).expect("valid"),
            Self::bounded(1.0, 0.5).expect("valid"),
        ]
    }
}

impl Coefficient for DiffusionSpec {
    fn eval(&self, u: f64) -> f64 {
        DiffusionSpec::eval(self, u)
    }
}

/// Shared, type-erased coefficient handle used by the solver.
#[derive(Clone)]
pub struct SharedCoefficient(pub Arc<dyn Coefficient>);

impl SharedCoefficient {
    pub fn new(c: impl Coefficient + 'static) -> Self {
        Self(Arc::new(c))
    }
}

impl fmt::Debug for SharedCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedCoefficient(..)")
    }
}

impl Coefficient for SharedCoefficient {
    fn eval(&self, z: f64) -> f64 {
        self.0.eval(z)
    }
}
