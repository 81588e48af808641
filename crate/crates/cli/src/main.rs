use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dcf_cli::{
    comparison_rows, parse_metrics, parse_values, run_sweep, write_comparison_csv, write_sweep_csv,
    AnalyzeReport, Axis, Metric, SimulateReport, SweepSpec,
};
use dcf_core::config::{apply_key, parse_scenario};
use dcf_core::sim::{self, SimConfig};
use dcf_core::{AccessMode, Mode, Scenario, SolverError, SolverOptions};

/// 802.11 DCF analysis: fixed-point model, sweeps and simulation.
#[derive(Parser)]
#[command(name = "dcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print a JSON report.
    Analyze {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve across one axis and print CSV.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated metrics; default all.
        #[arg(long)]
        outputs: Option<String>,
        /// Also simulate every point.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one scenario and print a JSON report.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Write a per-event CSV trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic vs simulated values across one axis, as CSV.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value = "throughput")]
        metric: String,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Scenario selection. Flags override the config file, which overrides the
/// preset. Durations are in microseconds, rates in bits/s.
#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value = "dot11b-dsss")]
    preset: String,
    /// `key = value` scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    idle_slot: Option<f64>,
    #[arg(long)]
    sifs: Option<f64>,
    #[arg(long)]
    difs: Option<f64>,
    #[arg(long)]
    prop_delay: Option<f64>,
    #[arg(long)]
    plcp_header_bits: Option<u32>,
    #[arg(long)]
    preamble_bits: Option<u32>,
    #[arg(long)]
    data_rate: Option<f64>,
    #[arg(long)]
    basic_rate: Option<f64>,
    #[arg(long)]
    plcp_rate: Option<f64>,
    #[arg(long)]
    w0: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    m_prime: Option<u32>,
    /// basic | rtscts
    #[arg(long, visible_alias = "access-mode")]
    access: Option<AccessMode>,
    /// packets/s per station
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, conflicts_with = "payload_bytes")]
    payload_bits: Option<u32>,
    #[arg(long)]
    payload_bytes: Option<u32>,
    #[arg(long)]
    ip_header_bits: Option<u32>,
    #[arg(long)]
    transport_header_bits: Option<u32>,
    #[arg(long)]
    queue_len: Option<u32>,
    #[arg(long)]
    p_e: Option<f64>,
    #[arg(long)]
    capture_enabled: Option<bool>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    s: Option<u32>,
    #[arg(long)]
    data_mac_bits: Option<u32>,
    #[arg(long)]
    ack_bits: Option<u32>,
    #[arg(long)]
    rts_bits: Option<u32>,
    #[arg(long)]
    cts_bits: Option<u32>,
}

impl ScenarioArgs {
    fn build(&self) -> Result<Scenario, Failure> {
        let mut s = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let has_preset = text.lines().any(|l| {
                    l.split('#')
                        .next()
                        .unwrap_or("")
                        .trim_start()
                        .starts_with("preset")
                });
                if has_preset {
                    parse_scenario(&text)?
                } else {
                    parse_scenario(&format!("preset = {}\n{text}", self.preset))?
                }
            }
            None => Scenario::preset(&self.preset)?,
        };
        let access = self.access.map(|a| match a {
            AccessMode::Basic => "basic".to_string(),
            AccessMode::RtsCts => "rtscts".to_string(),
        });
        let payload = self
            .payload_bits
            .or(self.payload_bytes.map(|b| b.saturating_mul(8)));
        let overrides: [(&str, Option<String>); 27] = [
            ("n", self.n.map(|v| v.to_string())),
            ("idle_slot", self.idle_slot.map(|v| v.to_string())),
            ("sifs", self.sifs.map(|v| v.to_string())),
            ("difs", self.difs.map(|v| v.to_string())),
            ("prop_delay", self.prop_delay.map(|v| v.to_string())),
            (
                "plcp_header_bits",
                self.plcp_header_bits.map(|v| v.to_string()),
            ),
            ("preamble_bits", self.preamble_bits.map(|v| v.to_string())),
            ("data_rate", self.data_rate.map(|v| v.to_string())),
            ("basic_rate", self.basic_rate.map(|v| v.to_string())),
            ("plcp_rate", self.plcp_rate.map(|v| v.to_string())),
            ("w0", self.w0.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("m_prime", self.m_prime.map(|v| v.to_string())),
            ("access_mode", access),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("payload_bits", payload.map(|v| v.to_string())),
            ("ip_header_bits", self.ip_header_bits.map(|v| v.to_string())),
            (
                "transport_header_bits",
                self.transport_header_bits.map(|v| v.to_string()),
            ),
            ("queue_len", self.queue_len.map(|v| v.to_string())),
            ("p_e", self.p_e.map(|v| v.to_string())),
            (
                "capture_enabled",
                self.capture_enabled.map(|v| v.to_string()),
            ),
            ("z", self.z.map(|v| v.to_string())),
            ("s", self.s.map(|v| v.to_string())),
            ("data_mac_bits", self.data_mac_bits.map(|v| v.to_string())),
            ("ack_bits", self.ack_bits.map(|v| v.to_string())),
            ("rts_bits", self.rts_bits.map(|v| v.to_string())),
            ("cts_bits", self.cts_bits.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                apply_key(&mut s, key, &v)?;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args)]
struct SolverArgs {
    /// unsaturated | saturated
    #[arg(long, default_value = "unsaturated")]
    mode: Mode,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long)]
    tau_seed: Option<f64>,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            mode: self.mode,
            tau_seed: self.tau_seed,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// lambda | n | w0 | m | p_e | payload_bits
    #[arg(long)]
    axis: String,
    /// `v1,v2,...` or `start:stop:step`
    #[arg(long)]
    values: String,
}

impl SweepArgs {
    fn spec(&self, base: Scenario, outputs: Vec<Metric>) -> Result<SweepSpec, Failure> {
        let axis: Axis = self.axis.parse().map_err(Failure::Invalid)?;
        let values = parse_values(&self.values).map_err(Failure::Invalid)?;
        let spec = SweepSpec {
            base,
            axis,
            values,
            outputs,
        };
        spec.scenarios().map_err(Failure::Invalid)?;
        Ok(spec)
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// seconds
    #[arg(long, default_value_t = 2000.0)]
    duration: f64,
    /// seconds
    #[arg(long, default_value_t = 100.0)]
    warmup: f64,
    #[arg(long, default_value_t = 20)]
    batches: usize,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig, Failure> {
        let cfg = SimConfig {
            seed: self.seed,
            sim_duration: self.duration,
            warmup: self.warmup,
            batch_count: self.batches,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Invalid(String),
    NonConvergence(String),
    Other(anyhow::Error),
}

impl From<dcf_core::ParamError> for Failure {
    fn from(e: dcf_core::ParamError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).context("serializing report")?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze {
            scenario,
            solver,
            out,
        } => {
            let s = scenario.build()?;
            let opts = solver.options();
            let sol = match dcf_core::solve(&s, &opts) {
                Ok(sol) => sol,
                Err(e @ SolverError::NonConvergence { .. }) => {
                    return Err(Failure::NonConvergence(e.to_string()))
                }
                Err(SolverError::DegenerateInput(e)) => {
                    return Err(Failure::NonConvergence(format!("degenerate input: {e}")))
                }
                Err(e) => return Err(Failure::Invalid(e.to_string())),
            };
            write_json(&out, &AnalyzeReport::new(&s, &opts, &sol))
        }
        Command::Sweep {
            scenario,
            solver,
            sweep,
            outputs,
            simulate,
            sim,
            out,
        } => {
            let outputs = match outputs {
                Some(text) => parse_metrics(&text).map_err(Failure::Invalid)?,
                None => Metric::ALL.to_vec(),
            };
            let spec = sweep.spec(scenario.build()?, outputs)?;
            let cfg = simulate.then(|| sim.config()).transpose()?;
            let rows = run_sweep(&spec, &solver.options(), cfg.as_ref(), dcf_core::solve)
                .map_err(Failure::Invalid)?;
            let mut w = output(&out)?;
            write_sweep_csv(&mut w, &spec, &rows)?;
            w.flush()?;
            Ok(())
        }
        Command::Simulate {
            scenario,
            sim,
            trace,
            out,
        } => {
            let s = scenario.build()?;
            let cfg = sim.config()?;
            eprintln!("seed: {}", cfg.seed);
            let metrics = match trace {
                Some(path) => {
                    let file = File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    sim::run_traced(&s, &cfg, Box::new(BufWriter::new(file)))
                        .map_err(|e| Failure::Other(e.into()))?
                }
                None => sim::run(&s, &cfg)?,
            };
            write_json(
                &out,
                &SimulateReport {
                    scenario: &s,
                    config: &cfg,
                    metrics: &metrics,
                },
            )
        }
        Command::Compare {
            scenario,
            solver,
            sweep,
            metric,
            sim,
            out,
        } => {
            let metric: Metric = metric.parse().map_err(Failure::Invalid)?;
            if !metric.is_simulated() {
                return Err(Failure::Invalid(format!(
                    "metric `{}` has no simulated counterpart",
                    metric.name()
                )));
            }
            let spec = sweep.spec(scenario.build()?, vec![metric])?;
            let cfg = sim.config()?;
            let rows = run_sweep(&spec, &solver.options(), Some(&cfg), dcf_core::solve)
                .map_err(Failure::Invalid)?;
            let cmp = comparison_rows(&rows, metric).map_err(Failure::Invalid)?;
            let mut w = output(&out)?;
            write_comparison_csv(&mut w, spec.axis, metric, &cmp)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NonConvergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
