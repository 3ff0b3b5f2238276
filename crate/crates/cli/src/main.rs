mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use daylight_core::checks::run_check;
use daylight_core::Error;

use commands::Subcommand;
use output::{Output, RunMeta};

const USAGE: u8 = 1;
const VALIDATION: u8 = 2;
const NUMERICAL: u8 = 3;
const CHECK_FAILED: u8 = 4;

/// Noise-correlation experiments on a stratified sphere.
#[derive(Debug, Parser)]
#[command(name = "daylight", version, about)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML run file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: output_dir from the config, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Also run the acceptance criteria tied to the subcommand.
    #[arg(long)]
    check: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Contract(_) | Error::Precondition(_) | Error::Io(_) => VALIDATION,
        Error::Integration { .. }
        | Error::Conservation { .. }
        | Error::NearResonance { .. }
        | Error::Consistency(_) => NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(USAGE);
        }
    }
    let run = match config::load(&cli.config, cli.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(VALIDATION);
        }
    };
    let dir = cli.out.clone().or_else(|| run.config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let meta = RunMeta {
        tool: "daylight",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.subcommand.name().into(),
        config_hash: run.hash.clone(),
        seed: run.config.seed,
    };
    let out = match Output::create(&dir, meta) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(VALIDATION);
        }
    };

    let result = out.write_text("resolved_config.toml", &run.canonical).and_then(|_| cli.subcommand.run(&run, &out));
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("partial outputs in {} are flagged in status.json", dir.display());
            exit_code(e)
        }
    };
    if let Err(e) = out.finish(result.as_ref().err().map(|e| e.to_string()).as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(VALIDATION);
    }
    if code != 0 {
        return ExitCode::from(code);
    }

    if cli.check {
        let outcomes: Vec<_> = cli.subcommand.criteria().iter().map(|&id| run_check(id, run.config.seed)).collect();
        for o in &outcomes {
            println!("{o}");
        }
        let extra = serde_json::json!({ "criteria": cli.subcommand.criteria() });
        if let Err(e) = out.report("checks.json", &outcomes, extra) {
            eprintln!("error: {e}");
            return ExitCode::from(VALIDATION);
        }
        if outcomes.iter().any(|o| !o.passed) {
            return ExitCode::from(CHECK_FAILED);
        }
    }
    ExitCode::SUCCESS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_map_to_three() {
        assert_eq!(exit_code(&Error::NearResonance { omega: 1.0, denominator: 0.0 }), NUMERICAL);
        assert_eq!(exit_code(&Error::Conservation { residual: 1.0, limit: 1e-6 }), NUMERICAL);
        assert_eq!(exit_code(&Error::Consistency("x".into())), NUMERICAL);
        assert_eq!(exit_code(&Error::Contract("x".into())), VALIDATION);
        assert_eq!(exit_code(&Error::Precondition("x".into())), VALIDATION);
    }
}
