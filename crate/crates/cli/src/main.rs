//! Scenario runner: validates configs, executes seeded sweeps onto CSV, and
//! self-checks the XOR demapper against its brute-force reference.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pncvlc_core::pnc::oracle::run_equivalence_suite;
use pncvlc_core::sim::config::{load_config, ConfigError, FramePreset, ScenarioConfig};
use pncvlc_core::sim::csv::{config_hash, emit_csv, sidecar_path, write_meta};
use pncvlc_core::sim::sweep::{run_sweep, trials_per_point};
use pncvlc_core::sim::SimError;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pncvlc",
    version,
    about = "Link-level simulator for two-way relay exchanges over visible-light OFDM channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Conventional,
    PaperMatch,
}

impl From<PresetArg> for FramePreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Conventional => FramePreset::Conventional,
            PresetArg::PaperMatch => FramePreset::PaperMatch,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write a CSV plus its .meta.json sidecar.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trial workers per sweep point; 1 runs single-threaded.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Override the config's throughput-accounting preset.
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the ML XOR demapper against exhaustive enumeration.
    OracleCheck {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_exit(err: &ConfigError) -> ExitCode {
    match err {
        ConfigError::Io { .. } => ExitCode::from(EXIT_IO),
        _ => ExitCode::from(EXIT_CONFIG),
    }
}

fn sim_exit(err: &SimError) -> ExitCode {
    match err {
        SimError::Io(_) | SimError::EmptyReport => ExitCode::from(EXIT_IO),
        SimError::Config(e) => config_exit(e),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn describe(cfg: &ScenarioConfig) -> String {
    let points = cfg.snr_sweep.points().len();
    let schemes: Vec<&str> = cfg.schemes.iter().map(|s| s.name()).collect();
    format!(
        "{}: {} x {} points, {} trials/point, {} bits/packet, seed {}",
        cfg.name,
        schemes.join("+"),
        points,
        trials_per_point(cfg),
        cfg.packet_bits,
        cfg.master_seed
    )
}

fn cmd_run(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    workers: usize,
    preset: Option<PresetArg>,
) -> ExitCode {
    let mut cfg = match load_config(&config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return config_exit(&e);
        }
    };
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(preset) = preset {
        cfg.frame.preset = preset.into();
    }

    eprintln!("running {}", describe(&cfg));
    let results = match run_sweep(&cfg, workers) {
        Ok(results) => results,
        Err(e) => {
            eprintln!("error: {e}");
            return sim_exit(&e);
        }
    };
    let reports: Vec<_> = results.into_iter().map(|p| p.report).collect();
    if let Err(e) = emit_csv(&reports, &out).and_then(|_| write_meta(&out, &cfg)) {
        eprintln!("error: {e}");
        return sim_exit(&e);
    }
    println!(
        "wrote {} reports to {} (sidecar {}, config {})",
        reports.len(),
        out.display(),
        sidecar_path(&out).display(),
        &config_hash(&cfg)[..12]
    );
    ExitCode::SUCCESS
}

fn cmd_validate(config: PathBuf) -> ExitCode {
    match load_config(&config) {
        Ok(cfg) => {
            println!("ok: {}", describe(&cfg));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            config_exit(&e)
        }
    }
}

fn cmd_oracle_check(trials: u64, seed: u64) -> ExitCode {
    let report = run_equivalence_suite(trials, seed);
    if report.passed() {
        println!(
            "oracle-check: PASS ({}/{} decisions agree)",
            report.trials - report.disagreements,
            report.trials
        );
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "oracle-check: FAIL ({} of {} decisions disagree)",
            report.disagreements, report.trials
        );
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            workers,
            preset,
        } => cmd_run(config, out, seed, workers, preset),
        Command::Validate { config } => cmd_validate(config),
        Command::OracleCheck { trials, seed } => cmd_oracle_check(trials, seed),
    }
}
