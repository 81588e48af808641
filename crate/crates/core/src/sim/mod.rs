//! Slot-synchronous simulation of `n` DCF stations with finite queues.
//!
//! Time is an integer nanosecond clock. Each step is either an idle slot of
//! length `sigma`, during which every backing-off station decrements its
//! counter, or a busy period of length `t_S` (some frame got through) or
//! `t_F` (none did), during which counters freeze. Poisson arrivals land at
//! their true timestamps and are enqueued before the busy period resolves.

mod stats;
mod world;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::params::Scenario;

pub use stats::Estimate;
pub use world::{Phase, SlotOutcome, Station, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// seconds
    pub sim_duration: f64,
    /// seconds excluded from every statistic
    pub warmup: f64,
    pub batch_count: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            sim_duration: 2000.0,
            warmup: 100.0,
            batch_count: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return Err(ParamError::Invalid("warmup must be ≥ 0"));
        }
        if !(self.sim_duration > self.warmup && self.sim_duration.is_finite()) {
            return Err(ParamError::Invalid("sim_duration must exceed warmup"));
        }
        if self.batch_count < 2 {
            return Err(ParamError::Invalid("batch_count must be ≥ 2"));
        }
        Ok(())
    }
}

/// Whole-run event counts, warmup included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub arrivals: u64,
    pub delivered: u64,
    pub network_dropped: u64,
    pub queue_dropped: u64,
    /// Packets still queued when the run stopped.
    pub in_queue: u64,
    pub slots: u64,
    pub idle_slots: u64,
    /// Station-slots that advanced a backoff chain: idle slots spent
    /// backing off plus own transmissions. Busy periods of others freeze
    /// the counter and are not included.
    pub countdown_slots: u64,
    pub transmissions: u64,
    /// Transmissions that shared their slot with another.
    pub collided: u64,
}

impl RunCounts {
    /// `arrivals == delivered + network_dropped + queue_dropped + in_queue`
    pub fn conserved(&self) -> bool {
        self.arrivals == self.delivered + self.network_dropped + self.queue_dropped + self.in_queue
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub seed: u64,
    /// bits/s of delivered packets (payload + IP + transport headers)
    pub throughput: Estimate,
    /// seconds from reaching the head of the queue to successful delivery
    pub mean_access_delay: Estimate,
    /// fraction of head-of-queue packets dropped at the retry limit
    pub network_loss_rate: f64,
    /// fraction of arrivals refused by a full queue
    pub queue_loss_rate: f64,
    /// transmissions per station per slot
    pub empirical_tau: Estimate,
    /// fraction of transmissions that met another in the same slot
    pub empirical_p_c: Estimate,
    pub counts: RunCounts,
}

/// Runs one replication.
pub fn run(scenario: &Scenario, cfg: &SimConfig) -> Result<SimMetrics, ParamError> {
    scenario.validate()?;
    cfg.validate()?;
    let mut world = World::new(scenario, cfg);
    Ok(drive(&mut world, cfg))
}

/// As [`run`], writing a per-event CSV trace to `sink`.
pub fn run_traced(
    scenario: &Scenario,
    cfg: &SimConfig,
    sink: Box<dyn Write>,
) -> Result<SimMetrics, TraceRunError> {
    scenario.validate()?;
    cfg.validate()?;
    let mut world = World::new(scenario, cfg).with_trace(sink);
    let metrics = drive(&mut world, cfg);
    match world.take_trace_error() {
        Some(e) => Err(TraceRunError::Io(e)),
        None => Ok(metrics),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceRunError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("trace write failed: {0}")]
    Io(std::io::Error),
}

fn drive(world: &mut World, cfg: &SimConfig) -> SimMetrics {
    while !world.done() {
        world.advance();
    }
    summarize(world, cfg)
}

/// Metrics from a world that has run to completion.
pub fn summarize(world: &World, cfg: &SimConfig) -> SimMetrics {
    let n = world.stations().len() as f64;
    let win = &world.window;
    let total = win.total();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };

    let mut tput = Vec::new();
    let mut delay = Vec::new();
    let mut tau = Vec::new();
    let mut p_c = Vec::new();
    for (i, b) in win.batches.iter().enumerate() {
        tput.push(b.delivered_bits as f64 / win.batch_seconds(i));
        if b.delivered > 0 {
            delay.push(b.delay_ns as f64 * 1e-9 / b.delivered as f64);
        }
        if b.slots > 0 {
            tau.push(b.attempts as f64 / (n * b.slots as f64));
        }
        if b.attempts > 0 {
            p_c.push(b.collided_attempts as f64 / b.attempts as f64);
        }
    }

    let mut counts = *world.counts();
    counts.in_queue = world.in_queue();
    let finished = (total.delivered + total.network_dropped) as f64;
    SimMetrics {
        seed: cfg.seed,
        throughput: stats::batch_estimate(total.delivered_bits as f64 / win.seconds(), &tput),
        mean_access_delay: stats::batch_estimate(
            ratio(total.delay_ns as f64 * 1e-9, total.delivered as f64),
            &delay,
        ),
        network_loss_rate: ratio(total.network_dropped as f64, finished),
        queue_loss_rate: ratio(total.queue_dropped as f64, total.arrivals as f64),
        empirical_tau: stats::batch_estimate(
            ratio(total.attempts as f64, n * total.slots as f64),
            &tau,
        ),
        empirical_p_c: stats::batch_estimate(
            ratio(total.collided_attempts as f64, total.attempts as f64),
            &p_c,
        ),
        counts,
    }
}
