use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use logdrift_cli::{execute, read_config, resolve, scenarios, Invocation, EXIT_CONFIG, EXIT_CONTRACT};

/// Numerical verification scenarios for log-Lipschitz stochastic heat equations.
#[derive(Parser, Debug)]
#[command(name = "logdrift", version)]
struct Args {
    /// Scenario to run (see --list).
    #[arg(long)]
    scenario: Option<String>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file and LOGDRIFT_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Root directory for artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// List the scenarios and exit.
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if args.list {
        print!("{}", scenarios::listing());
        return ExitCode::SUCCESS;
    }
    let config_error = |msg: String| {
        eprintln!("error: invalid configuration: {msg}");
        ExitCode::from(EXIT_CONFIG as u8)
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return config_error("--threads must be positive".into());
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return config_error(e.to_string());
        }
    }
    let config_text = match args.config.as_deref().map(read_config).transpose() {
        Ok(t) => t,
        Err(e) => return config_error(e.0),
    };
    let inv = Invocation {
        scenario: args.scenario,
        config_text,
        seed: args.seed,
        env_seed: std::env::var("LOGDRIFT_SEED").ok(),
        output_dir: args.output_dir,
    };
    let (cfg, scenario) = match resolve(&inv) {
        Ok(r) => r,
        Err(e) => return config_error(e.0),
    };
    print!("{}", cfg.echo());
    let report = match execute(&cfg, &scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: writing artifacts: {e}");
            return ExitCode::from(EXIT_CONTRACT as u8);
        }
    };
    print!("{}", report.summary);
    for f in report.outcome.failures() {
        eprintln!("contract failure: {}: {}", f.name, f.detail);
    }
    ExitCode::from(report.exit_code() as u8)
}
