//! Batch runner behind the `logdrift` binary.
//!
//! Configuration precedence, lowest first: built-in defaults, the scenario's
//! overlay, `LOGDRIFT_SEED`, the config file, command-line flags.

pub mod config;
pub mod output;
pub mod scenarios;

use std::path::{Path, PathBuf};

use config::{ConfigError, RunConfig};
use output::Outcome;
use scenarios::Scenario;

/// Exit status of a run.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Everything the command line can say about a run.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub scenario: Option<String>,
    pub config_text: Option<String>,
    pub seed: Option<u64>,
    pub env_seed: Option<String>,
    pub output_dir: Option<PathBuf>,
}

/// Resolves the configuration and the scenario to run.
pub fn resolve(inv: &Invocation) -> Result<(RunConfig, Scenario), ConfigError> {
    // the scenario may be named in the file, and its overlay sits below the file
    let mut probe = RunConfig::default();
    if let Some(text) = &inv.config_text {
        probe.apply_text(text)?;
    }
    let name = inv.scenario.clone().unwrap_or(probe.scenario);
    if name.is_empty() {
        return Err(ConfigError("no scenario given (use --scenario or the scenario key)".into()));
    }
    let scenario = scenarios::find(&name)
        .ok_or_else(|| ConfigError(format!("unknown scenario {name:?}; see --list")))?;

    let mut cfg = RunConfig::default();
    for (k, v) in scenario.defaults {
        cfg.set(k, v)?;
    }
    if let Some(s) = &inv.env_seed {
        cfg.set("master_seed", s).map_err(|e| ConfigError(format!("LOGDRIFT_SEED: {}", e.0)))?;
    }
    if let Some(text) = &inv.config_text {
        cfg.apply_text(text)?;
    }
    cfg.scenario = name;
    if let Some(s) = inv.seed {
        cfg.master_seed = s;
    }
    if let Some(d) = &inv.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate()?;
    Ok((cfg, scenario))
}

/// A finished run.
#[derive(Debug)]
pub struct Report {
    pub outcome: Outcome,
    pub summary: String,
    pub dir: PathBuf,
    pub fingerprint: String,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.outcome.passed() { EXIT_PASS } else { EXIT_CONTRACT }
    }
}

/// Runs `scenario` and writes its artifacts under `output_dir/<scenario>/`.
/// A numerical error inside the scenario is recorded as a failed check.
pub fn execute(cfg: &RunConfig, scenario: &Scenario) -> std::io::Result<Report> {
    let mut outcome = Outcome::default();
    if let Err(e) = scenario.run(cfg, &mut outcome) {
        outcome.check("scenario completed", false, e.to_string());
    }
    let fingerprint = cfg.fingerprint();
    let summary = outcome.summary(scenario.name, &fingerprint);
    let dir = cfg.output_dir.join(scenario.name);
    outcome.write(&dir, &cfg.echo(), &summary)?;
    Ok(Report { outcome, summary, dir, fingerprint })
}

/// Reads a config file; unreadable files are configuration errors.
pub fn read_config(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}
