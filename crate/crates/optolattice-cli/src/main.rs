mod commands;
mod config;
mod error;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser};
use serde_json::json;

use commands::Command;
use config::{Format, Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "optolattice", version, about = "Spectra, topology and Gaussian steady states of an optomechanical chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    g_plus: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    g_minus: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    j_hop: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    n_cells: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_m: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output table path; defaults to `<command>.<format>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, env = "OPTOLATTICE_THREADS")]
    threads: Option<usize>,
    /// Run every sweep on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            g_plus: self.g_plus,
            g_minus: self.g_minus,
            j_hop: self.j_hop,
            gamma: self.gamma,
            n_cells: self.n_cells,
            n_m: self.n_m,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            threads: self.threads,
            sequential: self.sequential,
        }
    }
}

fn meta_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    cfg.apply(&cli.common.overrides());
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.{}", cli.command.name(), cfg.format.extension())));

    let compute_start = Instant::now();
    let outcome = optolattice::par::with_threads(cfg.threads, || commands::run(cli.command, &cfg))?;
    let compute = compute_start.elapsed().as_secs_f64();

    table::write_file(&out, &outcome.table.render(cfg.format))?;
    let meta = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "output": out,
        "rows": outcome.table.rows.len(),
        "parallel_available": optolattice::Exec::is_parallel_available(),
        "timings": { "compute_s": compute, "total_s": started.elapsed().as_secs_f64() },
        "result": outcome.summary,
    });
    let meta_text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    table::write_file(&meta_path(&out), &meta_text)?;

    println!("{}: {} rows -> {}", cli.command.name(), outcome.table.rows.len(), out.display());
    println!("{}", outcome.summary);
    if outcome.failures > 0 {
        return Err(CliError::SelfCheck(outcome.failures));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
