//! Sweeps, comparisons and report formatting behind the `dcf` binary.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use dcf_core::sim::{self, SimConfig, SimMetrics};
use dcf_core::{Scenario, Solution, SolverError, SolverOptions};
use rayon::prelude::*;
use serde::Serialize;

/// Scenario field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Lambda,
    N,
    W0,
    M,
    PE,
    PayloadBits,
}

impl Axis {
    pub const ALL: [Axis; 6] = [
        Axis::Lambda,
        Axis::N,
        Axis::W0,
        Axis::M,
        Axis::PE,
        Axis::PayloadBits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::N => "n",
            Axis::W0 => "w0",
            Axis::M => "m",
            Axis::PE => "p_e",
            Axis::PayloadBits => "payload_bits",
        }
    }

    fn unit(self) -> &'static str {
        match self {
            Axis::Lambda => "packets/s",
            Axis::PayloadBits => "bits",
            Axis::PE => "probability",
            _ => "count",
        }
    }

    /// Sets the field. Lowering `m` below `m_prime` lowers `m_prime` too.
    pub fn apply(self, s: &mut Scenario, v: f64) -> Result<(), String> {
        let count = || {
            if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                Ok(v as u32)
            } else {
                Err(format!(
                    "{} takes non-negative integers, got {v}",
                    self.name()
                ))
            }
        };
        match self {
            Axis::Lambda => s.traffic.lambda = v,
            Axis::N => s.n = count()?,
            Axis::W0 => s.protocol.w0 = count()?,
            Axis::M => {
                s.protocol.m = count()?;
                s.protocol.m_prime = s.protocol.m_prime.min(s.protocol.m);
            }
            Axis::PE => s.channel.p_e = v,
            Axis::PayloadBits => s.traffic.payload_bits = count()?,
        }
        s.validate()
            .map_err(|e| format!("{} = {v}: {e}", self.name()))
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s || a.name().replace('_', "-") == s)
            .ok_or_else(|| {
                let names: Vec<_> = Axis::ALL.iter().map(|a| a.name()).collect();
                format!("unknown axis `{s}` (expected one of {})", names.join(", "))
            })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `1,2,5` or an inclusive range `start:stop:step`.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number `{}`", t.trim()))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step.is_nan() || step <= 0.0 || b < a {
                return Err(format!("range `{text}` needs start ≤ stop and step > 0"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|k| a + k as f64 * step).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("bad value list `{text}`")),
    };
    if values.is_empty() {
        return Err("empty value list".into());
    }
    Ok(values)
}

/// Reported quantity. Those with a simulated counterpart also get
/// simulation columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Throughput,
    AccessDelay,
    NetworkLoss,
    QueueLoss,
    Tau,
    PC,
    PF,
    PQ,
    PB,
    SlotTime,
    HoqSlots,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::Throughput,
        Metric::AccessDelay,
        Metric::NetworkLoss,
        Metric::QueueLoss,
        Metric::Tau,
        Metric::PC,
        Metric::PF,
        Metric::PQ,
        Metric::PB,
        Metric::SlotTime,
        Metric::HoqSlots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput",
            Metric::AccessDelay => "access_delay",
            Metric::NetworkLoss => "network_loss",
            Metric::QueueLoss => "queue_loss",
            Metric::Tau => "tau",
            Metric::PC => "p_c",
            Metric::PF => "p_f",
            Metric::PQ => "p_q",
            Metric::PB => "p_b",
            Metric::SlotTime => "slot_time",
            Metric::HoqSlots => "hoq_slots",
        }
    }

    fn unit(self) -> &'static str {
        match self {
            Metric::Throughput => "bits/s",
            Metric::AccessDelay | Metric::SlotTime => "s",
            Metric::HoqSlots => "slots",
            _ => "probability",
        }
    }

    pub fn analytic(self, sol: &Solution) -> f64 {
        let (st, mt) = (&sol.state, &sol.metrics);
        match self {
            Metric::Throughput => mt.throughput,
            Metric::AccessDelay => mt.access_delay,
            Metric::NetworkLoss => mt.network_loss,
            Metric::QueueLoss => mt.queue_loss,
            Metric::Tau => st.tau,
            Metric::PC => st.p_c,
            Metric::PF => st.p_f,
            Metric::PQ => st.p_q,
            Metric::PB => st.p_b,
            Metric::SlotTime => mt.slot_time,
            Metric::HoqSlots => mt.hoq_slots,
        }
    }

    /// Simulated value and CI half-width, when the simulator measures it.
    pub fn simulated(self, m: &SimMetrics) -> Option<(f64, Option<f64>)> {
        let est = |e: sim::Estimate| Some((e.mean, e.half_width));
        match self {
            Metric::Throughput => est(m.throughput),
            Metric::AccessDelay => est(m.mean_access_delay),
            Metric::Tau => est(m.empirical_tau),
            Metric::PC => est(m.empirical_p_c),
            Metric::NetworkLoss => Some((m.network_loss_rate, None)),
            Metric::QueueLoss => Some((m.queue_loss_rate, None)),
            _ => None,
        }
    }

    pub fn is_simulated(self) -> bool {
        matches!(
            self,
            Metric::Throughput
                | Metric::AccessDelay
                | Metric::Tau
                | Metric::PC
                | Metric::NetworkLoss
                | Metric::QueueLoss
        )
    }

    fn has_ci(self) -> bool {
        matches!(
            self,
            Metric::Throughput | Metric::AccessDelay | Metric::Tau | Metric::PC
        )
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

pub fn parse_metrics(text: &str) -> Result<Vec<Metric>, String> {
    let metrics = text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<Vec<Metric>, _>>()?;
    if metrics.is_empty() {
        return Err("empty metric list".into());
    }
    Ok(metrics)
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub outputs: Vec<Metric>,
}

impl SweepSpec {
    /// Builds the per-point scenarios, rejecting any out-of-domain value.
    pub fn scenarios(&self) -> Result<Vec<Scenario>, String> {
        if self.values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        if self.outputs.is_empty() {
            return Err("sweep needs at least one output".into());
        }
        self.values
            .iter()
            .map(|&v| {
                let mut s = self.base.clone();
                self.axis.apply(&mut s, v)?;
                Ok(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub analytic: Result<Solution, SolverError>,
    pub sim: Option<SimMetrics>,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        matches!(&self.analytic, Ok(s) if s.converged)
    }
}

/// Seed for point `index` of a sweep whose base seed is `seed`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Solves (and optionally simulates) every point, in parallel, returning
/// rows in axis order. Exactly one `solve_fn` call per point; a failing
/// point is recorded and the rest still run.
pub fn run_sweep<F>(
    spec: &SweepSpec,
    opts: &SolverOptions,
    sim_cfg: Option<&SimConfig>,
    solve_fn: F,
) -> Result<Vec<SweepRow>, String>
where
    F: Fn(&Scenario, &SolverOptions) -> Result<Solution, SolverError> + Sync,
{
    if let Some(cfg) = sim_cfg {
        cfg.validate().map_err(|e| e.to_string())?;
    }
    let scenarios = spec.scenarios()?;
    Ok(scenarios
        .par_iter()
        .zip(spec.values.par_iter())
        .enumerate()
        .map(|(i, (s, &value))| SweepRow {
            value,
            analytic: solve_fn(s, opts),
            sim: sim_cfg.map(|cfg| {
                let cfg = SimConfig {
                    seed: point_seed(cfg.seed, i),
                    ..cfg.clone()
                };
                sim::run(s, &cfg).expect("validated scenario and config")
            }),
        })
        .collect())
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "nan".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn units_line(axis: Axis, metrics: &[Metric]) -> String {
    let mut parts = vec![format!("{}={}", axis.name(), axis.unit())];
    parts.extend(metrics.iter().map(|m| format!("{}={}", m.name(), m.unit())));
    format!(
        "# units: {}; ci = 95% batch-means half-width",
        parts.join(" ")
    )
}

/// Sweep CSV columns: axis, analytic metrics, simulated metrics, CI
/// half-widths, converged.
pub fn sweep_header(spec: &SweepSpec, with_sim: bool) -> Vec<String> {
    let mut cols = vec![spec.axis.name().to_string()];
    cols.extend(spec.outputs.iter().map(|m| m.name().to_string()));
    if with_sim {
        let simulated: Vec<Metric> = spec
            .outputs
            .iter()
            .copied()
            .filter(|m| m.is_simulated())
            .collect();
        cols.extend(simulated.iter().map(|m| format!("sim_{}", m.name())));
        cols.extend(
            simulated
                .iter()
                .filter(|m| m.has_ci())
                .map(|m| format!("sim_{}_ci", m.name())),
        );
    }
    cols.push("converged".into());
    cols
}

pub fn write_sweep_csv<W: Write>(
    mut out: W,
    spec: &SweepSpec,
    rows: &[SweepRow],
) -> io::Result<()> {
    let with_sim = rows.iter().any(|r| r.sim.is_some());
    writeln!(out, "{}", units_line(spec.axis, &spec.outputs))?;
    writeln!(out, "{}", sweep_header(spec, with_sim).join(","))?;
    for row in rows {
        let mut cells = vec![fmt_num(row.value)];
        for m in &spec.outputs {
            cells.push(match &row.analytic {
                Ok(sol) => fmt_num(m.analytic(sol)),
                Err(_) => String::new(),
            });
        }
        if with_sim {
            let sim = row.sim.as_ref();
            let simulated: Vec<Metric> = spec
                .outputs
                .iter()
                .copied()
                .filter(|m| m.is_simulated())
                .collect();
            for m in &simulated {
                cells.push(fmt_opt(sim.and_then(|s| m.simulated(s)).map(|v| v.0)));
            }
            for m in simulated.iter().filter(|m| m.has_ci()) {
                cells.push(fmt_opt(sim.and_then(|s| m.simulated(s)).and_then(|v| v.1)));
            }
        }
        cells.push(row.converged().to_string());
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Guard for the relative-error denominator.
pub const REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub value: f64,
    pub analytic: Option<f64>,
    pub simulated: f64,
    pub ci: Option<f64>,
    pub rel_err: Option<f64>,
    pub converged: bool,
}

pub fn rel_err(analytic: f64, simulated: f64) -> f64 {
    (analytic - simulated).abs() / simulated.abs().max(REL_EPS)
}

pub fn comparison_rows(rows: &[SweepRow], metric: Metric) -> Result<Vec<ComparisonRow>, String> {
    rows.iter()
        .map(|r| {
            let sim = r
                .sim
                .as_ref()
                .ok_or("comparison rows need simulation results")?;
            let (simulated, ci) = metric
                .simulated(sim)
                .ok_or_else(|| format!("metric `{}` is not simulated", metric.name()))?;
            let analytic = r.analytic.as_ref().ok().map(|s| metric.analytic(s));
            Ok(ComparisonRow {
                value: r.value,
                analytic,
                simulated,
                ci,
                rel_err: analytic.map(|a| rel_err(a, simulated)),
                converged: r.converged(),
            })
        })
        .collect()
}

pub fn write_comparison_csv<W: Write>(
    mut out: W,
    axis: Axis,
    metric: Metric,
    rows: &[ComparisonRow],
) -> io::Result<()> {
    writeln!(out, "{}", units_line(axis, &[metric]))?;
    let m = metric.name();
    writeln!(
        out,
        "{axis},analytic_{m},sim_{m},sim_{m}_ci,rel_err,converged"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.value),
            fmt_opt(r.analytic),
            fmt_num(r.simulated),
            fmt_opt(r.ci),
            fmt_opt(r.rel_err),
            r.converged
        )?;
    }
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.rel_err).collect();
    if errs.is_empty() {
        writeln!(out, "# max_rel_err=nan mean_rel_err=nan points=0")?;
    } else {
        let max = errs.iter().cloned().fold(0.0, f64::max);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        writeln!(
            out,
            "# max_rel_err={} mean_rel_err={} points={}",
            fmt_num(max),
            fmt_num(mean),
            errs.len()
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport<'a> {
    pub scenario: &'a Scenario,
    pub mode: dcf_core::Mode,
    pub state: dcf_core::SteadyState,
    pub metrics: dcf_core::Metrics,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub multiple_roots: bool,
    pub root_brackets: &'a [(f64, f64)],
}

impl<'a> AnalyzeReport<'a> {
    pub fn new(scenario: &'a Scenario, opts: &SolverOptions, sol: &'a Solution) -> Self {
        AnalyzeReport {
            scenario,
            mode: opts.mode,
            state: sol.state,
            metrics: sol.metrics,
            iterations: sol.iterations,
            residual: sol.residual,
            converged: sol.converged,
            multiple_roots: sol.multiple_roots,
            root_brackets: &sol.root_brackets,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateReport<'a> {
    pub scenario: &'a Scenario,
    pub config: &'a SimConfig,
    pub metrics: &'a SimMetrics,
}
