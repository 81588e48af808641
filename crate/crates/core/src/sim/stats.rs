//! Batch-means accumulation over the post-warmup window.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Point estimate with a 95 % confidence half-width from batch means.
/// `half_width` is `None` when fewer than two batches carry the quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: Option<f64>,
}

impl Estimate {
    pub fn contains(&self, x: f64, widths: f64) -> bool {
        match self.half_width {
            Some(h) => (x - self.mean).abs() <= widths * h,
            None => x == self.mean,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Batch {
    pub delivered_bits: u64,
    pub delivered: u64,
    pub delay_ns: u128,
    pub slots: u64,
    pub attempts: u64,
    pub collided_attempts: u64,
    pub arrivals: u64,
    pub queue_dropped: u64,
    pub network_dropped: u64,
}

/// Splits `[start, end)` into equal batches and attributes events by time.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    pub start: u64,
    pub end: u64,
    pub batches: Vec<Batch>,
}

impl Window {
    pub fn new(start: u64, end: u64, count: usize) -> Self {
        Window {
            start,
            end,
            batches: vec![Batch::default(); count],
        }
    }

    fn len(&self) -> u64 {
        self.end - self.start
    }

    /// First time at or after `t` where the batch index changes.
    pub fn next_boundary(&self, t: u64) -> u64 {
        if t < self.start {
            return self.start;
        }
        if t >= self.end {
            return u64::MAX;
        }
        let k = self.batches.len() as u128;
        let idx = self.index(t).unwrap() as u128 + 1;
        let b = self.start as u128 + (idx * self.len() as u128).div_ceil(k);
        b.min(self.end as u128) as u64
    }

    pub fn index(&self, t: u64) -> Option<usize> {
        if t < self.start || t >= self.end {
            return None;
        }
        let k = self.batches.len() as u128;
        let i = (u128::from(t - self.start) * k) / u128::from(self.len());
        Some(i as usize)
    }

    pub fn at(&mut self, t: u64) -> Option<&mut Batch> {
        self.index(t).map(|i| &mut self.batches[i])
    }

    pub fn total(&self) -> Batch {
        let mut t = Batch::default();
        for b in &self.batches {
            t.delivered_bits += b.delivered_bits;
            t.delivered += b.delivered;
            t.delay_ns += b.delay_ns;
            t.slots += b.slots;
            t.attempts += b.attempts;
            t.collided_attempts += b.collided_attempts;
            t.arrivals += b.arrivals;
            t.queue_dropped += b.queue_dropped;
            t.network_dropped += b.network_dropped;
        }
        t
    }

    /// Length in seconds of batch `i`.
    pub fn batch_seconds(&self, i: usize) -> f64 {
        let k = self.batches.len() as u128;
        let len = self.len() as u128;
        let lo = (i as u128 * len).div_ceil(k);
        let hi = ((i as u128 + 1) * len).div_ceil(k);
        (hi - lo) as f64 * 1e-9
    }

    pub fn seconds(&self) -> f64 {
        self.len() as f64 * 1e-9
    }
}

/// Mean and Student-t 95 % half-width of the sample.
pub fn batch_estimate(overall: f64, samples: &[f64]) -> Estimate {
    let k = samples.len();
    if k < 2 {
        return Estimate {
            mean: overall,
            half_width: None,
        };
    }
    let mean = samples.iter().sum::<f64>() / k as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
        .expect("dof ≥ 1")
        .inverse_cdf(0.975);
    Estimate {
        mean: overall,
        half_width: Some(t * (var / k as f64).sqrt()),
    }
}
