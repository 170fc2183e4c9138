use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ctipon::pon::DbaMode;
use ctipon::telemetry::{to_csv, to_json_lines};
use ctipon_harness::compare::ComparisonReport;
use ctipon_harness::engine::{EngineError, EngineOptions, Simulation};
use ctipon_harness::live::{serve_live, LiveError, LiveOptions};
use ctipon_harness::scenario::{load_scenario, ScenarioConfig, ScenarioError};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "ctipon", version, about = "Cooperative PON fronthaul scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario in batch mode.
    Run {
        scenario: PathBuf,
        /// Override the scenario's initial DBA mode.
        #[arg(long)]
        mode: Option<DbaMode>,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-window metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write per-window metrics as JSON lines.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        /// Write every bandwidth map in text form.
        #[arg(long)]
        bwmap_trace: Option<PathBuf>,
    },
    /// Run a scenario under both modes with the same seed and compare.
    Compare {
        scenario: PathBuf,
        /// Directory for comparison.json and per-mode CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the live control and telemetry endpoint.
    Serve {
        scenario: PathBuf,
        #[arg(long)]
        port: Option<u16>,
        /// Simulated seconds per wall-clock second; 0 runs unpaced.
        #[arg(long)]
        pace: Option<f64>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Print a scenario file with every default filled in.
    ExplainConfig,
    /// Check a scenario file and print its hash.
    Validate { scenario: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
    Other(anyhow::Error),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            e if e.is_runtime_violation() => Failure::Runtime(e.to_string()),
            EngineError::Setup(msg) => Failure::Config(msg),
            e => Failure::Other(e.into()),
        }
    }
}

impl From<LiveError> for Failure {
    fn from(e: LiveError) -> Self {
        match e {
            LiveError::Engine(e) => e.into(),
            e => Failure::Other(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::Run {
            scenario,
            mode,
            out,
            csv,
            jsonl,
            bwmap_trace,
        } => {
            let cfg = load_scenario(&scenario)?;
            let mode = mode.unwrap_or(cfg.mode);
            let opts = EngineOptions {
                bwmap_trace: bwmap_trace.is_some(),
                ..EngineOptions::default()
            };
            let result = Simulation::new(&cfg, mode, opts)?.run()?;
            let report = &result.report;
            if let Some(p) = out {
                write(&p, &serde_json::to_string_pretty(report).expect("report serializes"))?;
            }
            if let Some(p) = csv {
                write(&p, &to_csv(report))?;
            }
            if let Some(p) = jsonl {
                write(&p, &to_json_lines(report))?;
            }
            if let (Some(p), Some(trace)) = (bwmap_trace, &result.bwmap_trace) {
                write(&p, trace)?;
            }
            let a = &report.aggregates;
            let us = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.1}"));
            println!(
                "{} mode={} seed={} samples={} mean_q_us={} p99_q_us={} util={:.4} drops={}",
                report.scenario_id,
                report.mode,
                report.seed,
                a.fronthaul_samples,
                us(a.queue_delay.mean_us),
                us(a.queue_delay.p99_us),
                a.utilization,
                a.drops
            );
        }
        Cmd::Compare { scenario, out } => {
            let cfg = load_scenario(&scenario)?;
            let cmp = ctipon_harness::compare(&cfg)?;
            if let Some(dir) = out {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                write(
                    &dir.join("comparison.json"),
                    &serde_json::to_string_pretty(&cmp).expect("comparison serializes"),
                )?;
                write(&dir.join("cti.csv"), &to_csv(&cmp.cti))?;
                write(&dir.join("sr.csv"), &to_csv(&cmp.sr))?;
            }
            print!("{}", ComparisonReport::summary(&cmp));
        }
        Cmd::Serve {
            scenario,
            port,
            pace,
            bind,
        } => {
            let cfg = load_scenario(&scenario)?;
            let mut opts = LiveOptions::from_scenario(&cfg);
            opts.bind = bind;
            if let Some(p) = port {
                opts.port = p;
            }
            if let Some(r) = pace {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Failure::Config(format!("--pace must be >= 0, got {r}")));
                }
                opts.pace = r;
            }
            let handle = serve_live(&cfg, opts)?;
            eprintln!("listening on {}", handle.local_addr());
            handle.join();
        }
        Cmd::ExplainConfig => {
            println!("# Every scenario key with its default value.");
            print!("{}", ScenarioConfig::default().to_toml_string());
        }
        Cmd::Validate { scenario } => {
            let cfg = load_scenario(&scenario)?;
            println!("ok {} {}", cfg.name, cfg.hash());
        }
    }
    Ok(())
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Other(_) => EXIT_FAILURE,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("config error: {msg}"),
                Failure::Runtime(msg) => eprintln!("runtime violation: {msg}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
