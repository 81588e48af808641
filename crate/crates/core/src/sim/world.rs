//! Station and channel state, and the per-slot transition rule.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::stats::Window;
use super::{RunCounts, SimConfig};
use crate::params::Scenario;

const NS: f64 = 1e9;

fn to_ns(seconds: f64) -> u64 {
    (seconds * NS).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// No packet queued (state E).
    EmptyIdle,
    /// Counting down toward a transmission in the slot where `counter == 0`.
    Backoff,
}

#[derive(Debug, Clone)]
pub struct Station {
    /// Arrival timestamps (ns) of queued packets; the front is head-of-queue.
    pub queue: VecDeque<u64>,
    pub stage: u32,
    pub counter: u32,
    pub phase: Phase,
    /// When the current head-of-queue packet reached the head.
    pub hoq_since: u64,
    next_arrival: u64,
    arrivals: ChaCha8Rng,
    backoff: ChaCha8Rng,
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    /// `transmitters` attempted; `winner` got through, if any.
    Busy {
        transmitters: Vec<usize>,
        winner: Option<usize>,
    },
}

/// Full simulation state. Stream layout: the channel uses stream 0 of the
/// seed; station `i` draws arrivals from stream `2i + 1` and backoff
/// counters from stream `2i + 2`.
pub struct World {
    sigma: u64,
    t_s: u64,
    t_f: u64,
    windows: Vec<u32>,
    m: u32,
    p_e: f64,
    /// `1 + z g` when capture is on.
    capture_base: Option<f64>,
    packet_bits: u64,
    queue_len: usize,
    interarrival: Option<Exp<f64>>,
    stations: Vec<Station>,
    channel: ChaCha8Rng,
    clock: u64,
    end: u64,
    pub(crate) window: Window,
    pub(crate) counts: RunCounts,
    trace: Option<Box<dyn Write>>,
    trace_error: Option<std::io::Error>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl World {
    /// Inputs are assumed validated.
    pub fn new(scenario: &Scenario, cfg: &SimConfig) -> Self {
        let proto = &scenario.protocol;
        let windows = (0..=proto.m)
            .map(|i| scenario.window_at_stage(i).expect("validated scenario"))
            .collect();
        let lambda = scenario.traffic.lambda;
        let interarrival = (lambda > 0.0).then(|| Exp::new(lambda).expect("lambda > 0"));
        let stations = (0..u64::from(scenario.n))
            .map(|i| {
                let mut arrivals = stream(cfg.seed, 2 * i + 1);
                let next_arrival = match &interarrival {
                    Some(exp) => to_ns(exp.sample(&mut arrivals)),
                    None => u64::MAX,
                };
                Station {
                    queue: VecDeque::new(),
                    stage: 0,
                    counter: 0,
                    phase: Phase::EmptyIdle,
                    hoq_since: 0,
                    next_arrival,
                    arrivals,
                    backoff: stream(cfg.seed, 2 * i + 2),
                }
            })
            .collect();
        let channel = &scenario.channel;
        World {
            sigma: to_ns(scenario.phy.idle_slot),
            t_s: to_ns(scenario.success_duration()),
            t_f: to_ns(scenario.failure_duration()),
            windows,
            m: proto.m,
            p_e: channel.p_e,
            capture_base: channel
                .capture_enabled
                .then(|| 1.0 + channel.z * channel.processing_gain_inverse()),
            packet_bits: u64::from(scenario.traffic.packet_bits()),
            queue_len: scenario.traffic.queue_len as usize,
            interarrival,
            stations,
            channel: stream(cfg.seed, 0),
            clock: 0,
            end: to_ns(cfg.sim_duration),
            window: Window::new(to_ns(cfg.warmup), to_ns(cfg.sim_duration), cfg.batch_count),
            counts: RunCounts::default(),
            trace: None,
            trace_error: None,
        }
    }

    pub fn with_trace(mut self, mut sink: Box<dyn Write>) -> Self {
        if let Err(e) = writeln!(sink, "time,station,event,stage,counter,queue_len") {
            self.trace_error = Some(e);
        }
        self.trace = Some(sink);
        self
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    pub fn done(&self) -> bool {
        self.clock >= self.end
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station_mut(&mut self, i: usize) -> &mut Station {
        &mut self.stations[i]
    }

    pub fn counts(&self) -> &RunCounts {
        &self.counts
    }

    pub(crate) fn take_trace_error(&mut self) -> Option<std::io::Error> {
        if let Some(sink) = self.trace.as_mut() {
            if let Err(e) = sink.flush() {
                self.trace_error.get_or_insert(e);
            }
        }
        self.trace_error.take()
    }

    fn trace(&mut self, t: u64, i: usize, event: &str) {
        let Some(sink) = self.trace.as_mut() else {
            return;
        };
        if self.trace_error.is_some() {
            return;
        }
        let st = &self.stations[i];
        let r = writeln!(
            sink,
            "{:.9},{i},{event},{},{},{}",
            t as f64 / NS,
            st.stage,
            st.counter,
            st.queue.len()
        );
        if let Err(e) = r {
            self.trace_error = Some(e);
        }
    }

    fn draw_counter(&mut self, i: usize) {
        let w = self.windows[self.stations[i].stage as usize];
        let st = &mut self.stations[i];
        st.counter = st.backoff.random_range(0..w);
        st.phase = Phase::Backoff;
    }

    /// Attributes `k` consecutive slots starting at `start` to their batches.
    fn record_slots(&mut self, start: u64, k: u64, attempts: u64, collided: u64) {
        self.counts.slots += k;
        let mut t = start;
        let mut left = k;
        while left > 0 {
            let b = self.window.next_boundary(t);
            let n = if b == u64::MAX {
                left
            } else {
                left.min((b - t).div_ceil(self.sigma))
            };
            if let Some(batch) = self.window.at(t) {
                batch.slots += n;
                batch.attempts += attempts;
                batch.collided_attempts += collided;
            }
            t += n * self.sigma;
            left -= n;
        }
    }

    /// Enqueues every arrival with timestamp before `end`.
    fn process_arrivals(&mut self, end: u64) {
        let Some(exp) = self.interarrival else { return };
        for i in 0..self.stations.len() {
            while self.stations[i].next_arrival < end {
                let st = &mut self.stations[i];
                let ts = st.next_arrival;
                st.next_arrival = ts.saturating_add(to_ns(exp.sample(&mut st.arrivals)));
                self.counts.arrivals += 1;
                let full = st.queue.len() >= self.queue_len;
                if !full {
                    st.queue.push_back(ts);
                }
                if let Some(b) = self.window.at(ts) {
                    b.arrivals += 1;
                    b.queue_dropped += u64::from(full);
                }
                if full {
                    self.counts.queue_dropped += 1;
                    self.trace(ts, i, "queue_drop");
                } else {
                    self.trace(ts, i, "arrival");
                }
            }
        }
    }

    /// Stations in E that received a packet start stage-0 backoff.
    fn wake_idle(&mut self, at: u64) {
        for i in 0..self.stations.len() {
            let st = &self.stations[i];
            if st.phase == Phase::EmptyIdle && !st.queue.is_empty() {
                let since = st.queue[0];
                let st = &mut self.stations[i];
                st.stage = 0;
                st.hoq_since = since;
                self.draw_counter(i);
                self.trace(at, i, "backoff");
            }
        }
    }

    /// Head-of-queue packet leaves (delivered or dropped); the next one, if
    /// any, starts stage-0 backoff immediately.
    fn retire_hoq(&mut self, i: usize, at: u64) {
        let st = &mut self.stations[i];
        st.queue.pop_front();
        st.stage = 0;
        if st.queue.is_empty() {
            st.phase = Phase::EmptyIdle;
            st.counter = 0;
            self.trace(at, i, "empty");
        } else {
            st.hoq_since = at;
            self.draw_counter(i);
            self.trace(at, i, "backoff");
        }
    }

    fn deliver(&mut self, i: usize, at: u64) {
        let delay = at - self.stations[i].hoq_since;
        self.counts.delivered += 1;
        if let Some(b) = self.window.at(at) {
            b.delivered += 1;
            b.delivered_bits += self.packet_bits;
            b.delay_ns += u128::from(delay);
        }
        self.trace(at, i, "success");
        self.retire_hoq(i, at);
    }

    fn fail(&mut self, i: usize, at: u64) {
        self.trace(at, i, "failure");
        if self.stations[i].stage == self.m {
            self.counts.network_dropped += 1;
            if let Some(b) = self.window.at(at) {
                b.network_dropped += 1;
            }
            self.trace(at, i, "retry_drop");
            self.retire_hoq(i, at);
        } else {
            self.stations[i].stage += 1;
            self.draw_counter(i);
            self.trace(at, i, "backoff");
        }
    }

    fn transmitters(&self) -> Vec<usize> {
        self.stations
            .iter()
            .enumerate()
            .filter(|(_, s)| s.phase == Phase::Backoff && s.counter == 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Advances exactly one slot: an idle slot of length `sigma` or one
    /// busy period.
    pub fn advance_slot(&mut self) -> SlotOutcome {
        let start = self.clock;
        let tx = self.transmitters();
        if tx.is_empty() {
            for st in &mut self.stations {
                if st.phase == Phase::Backoff {
                    st.counter -= 1;
                    self.counts.countdown_slots += 1;
                }
            }
            let end = start + self.sigma;
            self.counts.idle_slots += 1;
            self.record_slots(start, 1, 0, 0);
            self.process_arrivals(end);
            self.wake_idle(end);
            self.clock = end;
            return SlotOutcome::Idle;
        }

        let j = tx.len();
        let mut winner = match (j, self.capture_base) {
            (1, _) => Some(tx[0]),
            (_, Some(base)) => {
                let pick = tx[self.channel.random_range(0..j)];
                let p_capture = base.powi(-(j as i32 - 1));
                (self.channel.random::<f64>() < p_capture).then_some(pick)
            }
            _ => None,
        };
        if winner.is_some() && self.p_e > 0.0 && self.channel.random::<f64>() < self.p_e {
            winner = None;
        }
        let end = start + if winner.is_some() { self.t_s } else { self.t_f };
        let collided = if j >= 2 { j as u64 } else { 0 };
        self.counts.transmissions += j as u64;
        self.counts.countdown_slots += j as u64;
        self.counts.collided += collided;
        self.record_slots(start, 1, j as u64, collided);
        for &i in &tx {
            self.trace(start, i, "transmit");
        }
        self.process_arrivals(end);
        for &i in &tx {
            if Some(i) == winner {
                self.deliver(i, end);
            } else {
                self.fail(i, end);
            }
        }
        self.wake_idle(end);
        self.clock = end;
        SlotOutcome::Busy {
            transmitters: tx,
            winner,
        }
    }

    /// Advances one busy period or a run of idle slots, skipping ahead to
    /// the next slot where something can change. Equivalent to repeated
    /// [`World::advance_slot`].
    pub fn advance(&mut self) {
        let mut min_counter = u64::MAX;
        let mut next_wake = u64::MAX;
        for st in &self.stations {
            match st.phase {
                Phase::Backoff => min_counter = min_counter.min(u64::from(st.counter)),
                Phase::EmptyIdle => next_wake = next_wake.min(st.next_arrival),
            }
        }
        let wake_slot = if next_wake == u64::MAX {
            u64::MAX
        } else {
            (next_wake.saturating_sub(self.clock)) / self.sigma + 1
        };
        let left = (self.end.saturating_sub(self.clock)).div_ceil(self.sigma);
        let k = min_counter.min(wake_slot).min(left);
        if k <= 1 {
            self.advance_slot();
            return;
        }
        let start = self.clock;
        let end = start + k * self.sigma;
        for st in &mut self.stations {
            if st.phase == Phase::Backoff {
                st.counter -= k as u32;
                self.counts.countdown_slots += k;
            }
        }
        self.counts.idle_slots += k;
        self.record_slots(start, k, 0, 0);
        self.process_arrivals(end);
        self.wake_idle(end);
        self.clock = end;
    }

    pub fn in_queue(&self) -> u64 {
        self.stations.iter().map(|s| s.queue.len() as u64).sum()
    }
}
