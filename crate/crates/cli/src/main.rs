//! `fwmav` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other runtime failure, 2 configuration
//! error, 3 run aborted (safety-box exit or integration blowup).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fwmav_core::harness::{
    compute_metrics, create_log_file, read_config_file, read_log_file, run_scenario_streaming,
    write_config, HarnessError, ScenarioRegistry, Termination,
};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "fwmav", version, about = "Flapping-wing robot flight-control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the per-tick CSV log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `key=value` applied after the file; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a log written by `simulate`.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        /// Start of the metrics window in seconds.
        #[arg(long, default_value_t = 1.0)]
        settle: f64,
    },
    /// List built-in scenarios.
    Scenarios,
    /// Print a built-in scenario's full configuration.
    ShowConfig { name: String },
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
}

fn simulate(config: PathBuf, overrides: Vec<String>, out: PathBuf) -> ExitCode {
    let cfg = match read_config_file(&config, &overrides) {
        Ok(c) => c,
        // An unreadable config file is a configuration problem too.
        Err(HarnessError::Io(e)) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => return fail(&e),
    };
    let mut writer = match create_log_file(&out, &cfg.scenario) {
        Ok(w) => w,
        Err(e) => return fail(&e),
    };
    let (termination, stats) = match run_scenario_streaming(&cfg, |r| writer.write(r)) {
        Ok(x) => x,
        Err(e) => return fail(&e),
    };
    if let Err(e) = writer.finish(&termination.to_string()) {
        return fail(&e);
    }
    println!(
        "{}: {} control ticks, {} mocap samples, {} physics steps -> {}",
        cfg.scenario,
        stats.control_ticks,
        stats.mocap_samples,
        stats.physics_steps,
        out.display()
    );
    match termination {
        Termination::Completed => ExitCode::SUCCESS,
        other => {
            eprintln!("run aborted: {other}");
            ExitCode::from(EXIT_ABORTED)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate {
            config,
            overrides,
            out,
        } => simulate(config, overrides, out),
        Command::Metrics { log, settle } => {
            match read_log_file(&log).and_then(|recs| compute_metrics(&recs, settle)) {
                Ok(m) => {
                    println!("{m}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Scenarios => {
            for s in ScenarioRegistry::builtin().iter() {
                let c = s.config();
                println!("{:28} {:8} {:>5} s  {}", s.name(), s.robot(), c.duration, s.description());
            }
            ExitCode::SUCCESS
        }
        Command::ShowConfig { name } => match ScenarioRegistry::builtin().config(&name) {
            Ok(c) => {
                print!("{}", write_config(&c));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
