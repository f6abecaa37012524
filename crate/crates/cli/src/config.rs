//! Run configuration: flat `key = value` text with dotted namespaces.
//!
//! Resolution order: built-in defaults, then the scenario's overlay, then
//! the config file, then command-line flags. Every key has a default;
//! unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use logdrift::coefficients::{DiffusionFamily, DiffusionSpec, DriftFamily, DriftSpec};
use logdrift::solver::{random_initial, Grid};
use logdrift::Field;
use sha2::{Digest, Sha256};

/// A configuration problem; the binary exits with status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = Result<T, ConfigError>;

fn bad<T>(msg: impl Into<String>) -> Res<T> {
    Err(ConfigError(msg.into()))
}

/// Initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    /// `amp · e_k`.
    Mode { k: usize, amp: f64 },
    /// Random smooth field with the given `L²` norm.
    Random { norm: f64, seed: u64 },
}

impl InitSpec {
    fn parse(s: &str) -> Res<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(InitSpec::Zero);
        }
        let (kind, args) = s.split_once(':').ok_or_else(|| ConfigError(format!("u0 = {s:?}: expected zero, mode:k,amp or random:norm,seed")))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        match (kind.trim(), parts.as_slice()) {
            ("mode", [k]) => Ok(InitSpec::Mode { k: parse_num(k, "u0 mode")?, amp: 1.0 }),
            ("mode", [k, a]) => Ok(InitSpec::Mode { k: parse_num(k, "u0 mode")?, amp: parse_num(a, "u0 amplitude")? }),
            ("random", [n, seed]) => {
                Ok(InitSpec::Random { norm: parse_num(n, "u0 norm")?, seed: parse_num(seed, "u0 seed")? })
            }
            _ => bad(format!("u0 = {s:?}: expected zero, mode:k,amp or random:norm,seed")),
        }
    }

    pub fn field(&self, grid: &Grid) -> Res<Field> {
        let basis = grid.basis();
        match *self {
            InitSpec::Zero => Ok(Field::zeros(&basis)),
            InitSpec::Mode { k, amp } => {
                if !(1..=grid.n_modes).contains(&k) {
                    return bad(format!("u0 mode {k} outside 1..={}", grid.n_modes));
                }
                Ok(Field::mode(&basis, k, amp))
            }
            InitSpec::Random { norm, seed } => random_initial(&basis, norm, seed).map_err(|e| ConfigError(e.to_string())),
        }
    }
}

impl std::fmt::Display for InitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitSpec::Zero => write!(f, "zero"),
            InitSpec::Mode { k, amp } => write!(f, "mode:{k},{amp}"),
            InitSpec::Random { norm, seed } => write!(f, "random:{norm},{seed}"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Res<T> {
    s.trim().parse().map_err(|_| ConfigError(format!("{what}: cannot parse {s:?}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Res<Vec<T>> {
    let v: Vec<T> = s.split(',').map(|x| parse_num(x, what)).collect::<Res<_>>()?;
    if v.is_empty() {
        return bad(format!("{what}: empty list"));
    }
    Ok(v)
}

fn parse_bool(s: &str, what: &str) -> Res<bool> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bad(format!("{what}: expected true or false, got {s:?}")),
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Pass/fail thresholds that a run may override.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub kernel_rel: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    pub shape_spread: f64,
    pub grid_stability: f64,
    pub zero_factor: f64,
    pub zero_exponent: f64,
    pub se_multiple: f64,
    pub scaling: f64,
    pub scaling_spread: f64,
    pub uniqueness: f64,
    pub factorization: f64,
    pub uniformity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub n_modes: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub drift_family: String,
    pub drift_scale: f64,
    pub drift_exponent: f64,
    pub drift_slope: f64,
    pub drift_degree: i32,
    pub diffusion_family: String,
    pub diffusion_d1: f64,
    pub diffusion_d2: f64,
    pub diffusion_theta: f64,
    pub u0: InitSpec,
    pub ensemble: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub threshold: f64,
    pub kernel_points: usize,
    pub kernel_jensen_draws: usize,
    pub gronwall_draws: usize,
    pub gronwall_grid_dt: f64,
    pub uniqueness_levels: Vec<u32>,
    pub moments_p: Vec<f64>,
    pub moments_scaling_p: f64,
    pub moments_lambdas: Vec<f64>,
    pub moments_split_p: f64,
    pub moments_epsilons: Vec<f64>,
    pub moments_levels: Vec<u32>,
    pub moments_restart: bool,
    pub factorization_alpha: f64,
    pub factorization_halvings: usize,
    pub isometry_realizations: usize,
    pub isometry_terms: usize,
    pub tol: Tolerances,
}

/// Every key, in echo order.
pub const KEYS: &[&str] = &[
    "scenario",
    "grid.n_modes",
    "grid.horizon",
    "grid.n_steps",
    "drift.family",
    "drift.scale",
    "drift.exponent",
    "drift.slope",
    "drift.degree",
    "diffusion.family",
    "diffusion.d1",
    "diffusion.d2",
    "diffusion.theta",
    "u0",
    "ensemble",
    "master_seed",
    "output_dir",
    "solver.threshold",
    "kernel.points",
    "kernel.jensen_draws",
    "gronwall.draws",
    "gronwall.grid_dt",
    "uniqueness.levels",
    "moments.p",
    "moments.scaling_p",
    "moments.lambdas",
    "moments.split_p",
    "moments.epsilons",
    "moments.levels",
    "moments.restart",
    "factorization.alpha",
    "factorization.halvings",
    "isometry.realizations",
    "isometry.terms",
    "tolerance.kernel_rel",
    "tolerance.slope_min",
    "tolerance.slope_max",
    "tolerance.shape_spread",
    "tolerance.grid_stability",
    "tolerance.zero_factor",
    "tolerance.zero_exponent",
    "tolerance.se_multiple",
    "tolerance.scaling",
    "tolerance.scaling_spread",
    "tolerance.uniqueness",
    "tolerance.factorization",
    "tolerance.uniformity",
];

pub const DEFAULT_SEED: u64 = 20_240_601;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            n_modes: 32,
            horizon: 1.0,
            n_steps: 256,
            drift_family: "log_linear".into(),
            drift_scale: 1.0,
            drift_exponent: 2.0,
            drift_slope: 1.0,
            drift_degree: 2,
            diffusion_family: "bounded".into(),
            diffusion_d1: 1.0,
            diffusion_d2: 0.5,
            diffusion_theta: 0.5,
            u0: InitSpec::Random { norm: 5.0, seed: 1 },
            ensemble: 200,
            master_seed: DEFAULT_SEED,
            output_dir: PathBuf::from("logdrift-out"),
            threshold: logdrift::solver::BLOWUP_THRESHOLD,
            kernel_points: 17,
            kernel_jensen_draws: 1000,
            gronwall_draws: 100,
            gronwall_grid_dt: 1.0 / 200.0,
            uniqueness_levels: vec![4, 8, 16, 32, 64],
            moments_p: vec![1.0, 2.0, 4.0],
            moments_scaling_p: 10.0,
            moments_lambdas: vec![0.5, 2.0, 4.0],
            moments_split_p: 2.0,
            moments_epsilons: vec![0.5, 0.1, 0.02],
            moments_levels: vec![4, 8, 16, 32],
            moments_restart: true,
            factorization_alpha: 0.1,
            factorization_halvings: 4,
            isometry_realizations: 4000,
            isometry_terms: 4,
            tol: Tolerances {
                kernel_rel: 1e-10,
                slope_min: 0.4,
                slope_max: 0.6,
                shape_spread: 10.0,
                grid_stability: 1e-6,
                zero_factor: 10.0,
                zero_exponent: 0.5,
                se_multiple: 3.0,
                scaling: 1e-12,
                scaling_spread: 3.0,
                uniqueness: 1e-2,
                factorization: 0.1,
                uniformity: 2.0,
            },
        }
    }
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Res<()> {
        let v = value.trim();
        let t = &mut self.tol;
        match key {
            "scenario" => self.scenario = v.to_string(),
            "grid.n_modes" => self.n_modes = parse_num(v, key)?,
            "grid.horizon" => self.horizon = parse_num(v, key)?,
            "grid.n_steps" => self.n_steps = parse_num(v, key)?,
            "drift.family" => self.drift_family = v.to_string(),
            "drift.scale" => self.drift_scale = parse_num(v, key)?,
            "drift.exponent" => self.drift_exponent = parse_num(v, key)?,
            "drift.slope" => self.drift_slope = parse_num(v, key)?,
            "drift.degree" => self.drift_degree = parse_num(v, key)?,
            "diffusion.family" => self.diffusion_family = v.to_string(),
            "diffusion.d1" => self.diffusion_d1 = parse_num(v, key)?,
            "diffusion.d2" => self.diffusion_d2 = parse_num(v, key)?,
            "diffusion.theta" => self.diffusion_theta = parse_num(v, key)?,
            "u0" => self.u0 = InitSpec::parse(v)?,
            "ensemble" => self.ensemble = parse_num(v, key)?,
            "master_seed" => self.master_seed = parse_num(v, key)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "solver.threshold" => self.threshold = parse_num(v, key)?,
            "kernel.points" => self.kernel_points = parse_num(v, key)?,
            "kernel.jensen_draws" => self.kernel_jensen_draws = parse_num(v, key)?,
            "gronwall.draws" => self.gronwall_draws = parse_num(v, key)?,
            "gronwall.grid_dt" => self.gronwall_grid_dt = parse_num(v, key)?,
            "uniqueness.levels" => self.uniqueness_levels = parse_list(v, key)?,
            "moments.p" => self.moments_p = parse_list(v, key)?,
            "moments.scaling_p" => self.moments_scaling_p = parse_num(v, key)?,
            "moments.lambdas" => self.moments_lambdas = parse_list(v, key)?,
            "moments.split_p" => self.moments_split_p = parse_num(v, key)?,
            "moments.epsilons" => self.moments_epsilons = parse_list(v, key)?,
            "moments.levels" => self.moments_levels = parse_list(v, key)?,
            "moments.restart" => self.moments_restart = parse_bool(v, key)?,
            "factorization.alpha" => self.factorization_alpha = parse_num(v, key)?,
            "factorization.halvings" => self.factorization_halvings = parse_num(v, key)?,
            "isometry.realizations" => self.isometry_realizations = parse_num(v, key)?,
            "isometry.terms" => self.isometry_terms = parse_num(v, key)?,
            "tolerance.kernel_rel" => t.kernel_rel = parse_num(v, key)?,
            "tolerance.slope_min" => t.slope_min = parse_num(v, key)?,
            "tolerance.slope_max" => t.slope_max = parse_num(v, key)?,
            "tolerance.shape_spread" => t.shape_spread = parse_num(v, key)?,
            "tolerance.grid_stability" => t.grid_stability = parse_num(v, key)?,
            "tolerance.zero_factor" => t.zero_factor = parse_num(v, key)?,
            "tolerance.zero_exponent" => t.zero_exponent = parse_num(v, key)?,
            "tolerance.se_multiple" => t.se_multiple = parse_num(v, key)?,
            "tolerance.scaling" => t.scaling = parse_num(v, key)?,
            "tolerance.scaling_spread" => t.scaling_spread = parse_num(v, key)?,
            "tolerance.uniqueness" => t.uniqueness = parse_num(v, key)?,
            "tolerance.factorization" => t.factorization = parse_num(v, key)?,
            "tolerance.uniformity" => t.uniformity = parse_num(v, key)?,
            _ => return bad(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Current value of `key` as text (inverse of [`RunConfig::set`]).
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.tol;
        Some(match key {
            "scenario" => self.scenario.clone(),
            "grid.n_modes" => self.n_modes.to_string(),
            "grid.horizon" => self.horizon.to_string(),
            "grid.n_steps" => self.n_steps.to_string(),
            "drift.family" => self.drift_family.clone(),
            "drift.scale" => self.drift_scale.to_string(),
            "drift.exponent" => self.drift_exponent.to_string(),
            "drift.slope" => self.drift_slope.to_string(),
            "drift.degree" => self.drift_degree.to_string(),
            "diffusion.family" => self.diffusion_family.clone(),
            "diffusion.d1" => self.diffusion_d1.to_string(),
            "diffusion.d2" => self.diffusion_d2.to_string(),
            "diffusion.theta" => self.diffusion_theta.to_string(),
            "u0" => self.u0.to_string(),
            "ensemble" => self.ensemble.to_string(),
            "master_seed" => self.master_seed.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "solver.threshold" => self.threshold.to_string(),
            "kernel.points" => self.kernel_points.to_string(),
            "kernel.jensen_draws" => self.kernel_jensen_draws.to_string(),
            "gronwall.draws" => self.gronwall_draws.to_string(),
            "gronwall.grid_dt" => self.gronwall_grid_dt.to_string(),
            "uniqueness.levels" => join(&self.uniqueness_levels),
            "moments.p" => join(&self.moments_p),
            "moments.scaling_p" => self.moments_scaling_p.to_string(),
            "moments.lambdas" => join(&self.moments_lambdas),
            "moments.split_p" => self.moments_split_p.to_string(),
            "moments.epsilons" => join(&self.moments_epsilons),
            "moments.levels" => join(&self.moments_levels),
            "moments.restart" => self.moments_restart.to_string(),
            "factorization.alpha" => self.factorization_alpha.to_string(),
            "factorization.halvings" => self.factorization_halvings.to_string(),
            "isometry.realizations" => self.isometry_realizations.to_string(),
            "isometry.terms" => self.isometry_terms.to_string(),
            "tolerance.kernel_rel" => t.kernel_rel.to_string(),
            "tolerance.slope_min" => t.slope_min.to_string(),
            "tolerance.slope_max" => t.slope_max.to_string(),
            "tolerance.shape_spread" => t.shape_spread.to_string(),
            "tolerance.grid_stability" => t.grid_stability.to_string(),
            "tolerance.zero_factor" => t.zero_factor.to_string(),
            "tolerance.zero_exponent" => t.zero_exponent.to_string(),
            "tolerance.se_multiple" => t.se_multiple.to_string(),
            "tolerance.scaling" => t.scaling.to_string(),
            "tolerance.scaling_spread" => t.scaling_spread.to_string(),
            "tolerance.uniqueness" => t.uniqueness.to_string(),
            "tolerance.factorization" => t.factorization.to_string(),
            "tolerance.uniformity" => t.uniformity.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` text. Blank lines and `#` comments are skipped;
    /// a key may appear once.
    pub fn apply_text(&mut self, text: &str) -> Res<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value, got {raw:?}", no + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return bad(format!("line {}: key {k:?} given twice", no + 1));
            }
            self.set(k, v).map_err(|e| ConfigError(format!("line {}: {}", no + 1, e.0)))?;
        }
        Ok(())
    }

    /// The resolved configuration, one `key = value` line per key.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("every listed key has a value"));
        }
        s
    }

    /// SHA-256 of the echo minus the output directory (where a run writes
    /// does not change what it computes).
    pub fn fingerprint(&self) -> String {
        let text: String = self.echo().lines().filter(|l| !l.starts_with("output_dir ")).map(|l| format!("{l}\n")).collect();
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Res<Grid> {
        Grid::new(self.n_modes, self.horizon, self.n_steps).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn drift(&self) -> Res<DriftSpec> {
        let family = match self.drift_family.as_str() {
            "zero" => DriftFamily::Zero,
            "log_linear" => DriftFamily::LogLinear { scale: self.drift_scale },
            "log_power" => DriftFamily::LogPower { scale: self.drift_scale, exponent: self.drift_exponent },
            "linear" => DriftFamily::Linear { slope: self.drift_slope },
            "polynomial" => DriftFamily::Polynomial { scale: self.drift_scale, degree: self.drift_degree },
            "abs_power" => DriftFamily::AbsPower { scale: self.drift_scale, exponent: self.drift_exponent },
            other => {
                return bad(format!(
                    "drift.family {other:?}: expected zero, log_linear, log_power, linear, polynomial or abs_power"
                ))
            }
        };
        DriftSpec::new(family).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn diffusion(&self) -> Res<DiffusionSpec> {
        let (d1, d2) = (self.diffusion_d1, self.diffusion_d2);
        let family = match self.diffusion_family.as_str() {
            "sublinear_power" => DiffusionFamily::SublinearPower { d1, d2, theta: self.diffusion_theta },
            "bounded" => DiffusionFamily::Bounded { d1, d2 },
            other => return bad(format!("diffusion.family {other:?}: expected sublinear_power or bounded")),
        };
        DiffusionSpec::new(family).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn initial(&self) -> Res<Field> {
        self.u0.field(&self.grid()?)
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Res<()> {
        if self.scenario.is_empty() {
            return bad("no scenario given (use --scenario or the scenario key)");
        }
        self.grid()?;
        self.drift()?;
        self.diffusion()?;
        self.initial()?;
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.ensemble < logdrift::moments::MIN_ENSEMBLE {
            return bad(format!("ensemble must be >= {}", logdrift::moments::MIN_ENSEMBLE));
        }
        if !pos(self.threshold) {
            return bad("solver.threshold must be positive");
        }
        if self.kernel_points < 2 || self.kernel_jensen_draws == 0 || self.gronwall_draws == 0 {
            return bad("kernel.points must be >= 2 and draw counts positive");
        }
        if !(pos(self.gronwall_grid_dt) && self.gronwall_grid_dt <= 0.1) {
            return bad("gronwall.grid_dt must lie in (0, 0.1]");
        }
        let increasing = |v: &[u32]| v.len() >= 2 && v[0] >= 1 && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.uniqueness_levels) {
            return bad("uniqueness.levels must be >= 1, strictly increasing, at least two");
        }
        if self.moments_levels.iter().any(|&n| n == 0) {
            return bad("moments.levels must be >= 1");
        }
        if self.moments_p.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
            return bad("moments.p entries must be >= 1");
        }
        if !(self.moments_scaling_p > 8.0 && self.moments_scaling_p.is_finite()) {
            return bad("moments.scaling_p must exceed 8");
        }
        if !(self.moments_split_p > 0.0 && self.moments_split_p <= 8.0) {
            return bad("moments.split_p must lie in (0, 8]");
        }
        if !self.moments_lambdas.iter().chain(&self.moments_epsilons).all(|&v| pos(v)) {
            return bad("moments.lambdas and moments.epsilons must be positive");
        }
        if !(self.factorization_alpha > 0.0 && self.factorization_alpha < 0.25) {
            return bad("factorization.alpha must lie in (0, 1/4)");
        }
        if self.isometry_realizations < 2 || self.isometry_terms == 0 {
            return bad("isometry.realizations must be >= 2 and isometry.terms >= 1");
        }
        let t = &self.tol;
        let all_pos = [
            t.kernel_rel,
            t.shape_spread,
            t.grid_stability,
            t.zero_factor,
            t.zero_exponent,
            t.se_multiple,
            t.scaling,
            t.scaling_spread,
            t.uniqueness,
            t.factorization,
            t.uniformity,
        ];
        if !all_pos.iter().all(|&v| pos(v)) || !(t.slope_min < t.slope_max) {
            return bad("tolerances must be positive (and slope_min < slope_max)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let c = RunConfig::default();
        for k in KEYS {
            let mut d = RunConfig::default();
            d.set(k, &c.get(k).unwrap()).unwrap();
            assert_eq!(c, d, "{k}");
        }
    }

    #[test]
    fn parses_dotted_text() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\ngrid.n_modes=64\n\n u0 = mode:2,3.5 # trailing\nuniqueness.levels = 2,4\n").unwrap();
        assert_eq!(c.n_modes, 64);
        assert_eq!(c.u0, InitSpec::Mode { k: 2, amp: 3.5 });
        assert_eq!(c.uniqueness_levels, vec![2, 4]);
    }

    #[test]
    fn rejects_unknown_repeated_and_malformed() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("grid.nmodes = 4").unwrap_err().0.contains("unknown key"));
        assert!(c.apply_text("ensemble = 40\nensemble = 50").unwrap_err().0.contains("twice"));
        assert!(c.apply_text("ensemble").is_err());
        assert!(c.apply_text("ensemble = many").is_err());
        assert!(c.apply_text("u0 = mode").is_err());
    }

    #[test]
    fn fingerprint_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.master_seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
