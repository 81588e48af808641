//! Closed-form relations of the m-retry BEB model.
//!
//! Everything here is a pure function of its arguments. The coupled fixed
//! point tying these together lives in [`crate::solver`].

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::params::{ChannelConfig, Scenario};

/// `p_f` above this is treated as `p_f = 1`, where `b00` degenerates.
pub const PF_DEGENERATE: f64 = 1.0 - 1e-9;

/// Slack allowed on probability bounds before an input is rejected.
const EPS: f64 = 1e-12;

fn check_prob(what: &'static str, name: &str, p: f64) -> Result<(), DomainError> {
    if p.is_finite() && (-EPS..=1.0 + EPS).contains(&p) {
        Ok(())
    } else {
        Err(DomainError::new(
            what,
            format!("{name} = {p} outside [0, 1]"),
        ))
    }
}

/// `1 - (1 - tau)^k` without cancellation for small `tau`.
fn one_minus_pow_complement(tau: f64, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    -(f64::from(k) * (-tau).ln_1p()).exp_m1()
}

/// Coupled probabilities at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub tau: f64,
    pub p_b: f64,
    pub p_c: f64,
    pub p_p: f64,
    pub p_f: f64,
    pub p_s: f64,
    pub p_q: f64,
    pub b00: f64,
    pub b_e: f64,
}

impl SteadyState {
    /// Evaluates every derived probability for transmission probability
    /// `tau` and non-empty-queue probability `p_q`.
    ///
    /// `b00` is the closed form at `(p_f, p_q)`; it agrees with `tau` only at
    /// a fixed point. With `p_q = 0` all mass sits in the empty state.
    pub fn evaluate(scenario: &Scenario, tau: f64, p_q: f64) -> Result<Self, DomainError> {
        check_prob("steady state", "p_q", p_q)?;
        let n = scenario.n;
        let p_b = busy_prob(tau, n)?;
        let p_c = collision_prob(tau, n)?;
        let p_p = capture_prob_for(tau, n, &scenario.channel);
        let p_f = failure_prob(p_c, p_p, scenario.channel.p_e)?;
        let proto = &scenario.protocol;
        let (b00, b_e) = if p_q > 0.0 {
            let b00 = b00(p_f, p_q, proto.w0, proto.m, proto.m_prime)?;
            (b00, b00 * (1.0 - p_q) / p_q)
        } else {
            (0.0, 1.0)
        };
        Ok(SteadyState {
            tau,
            p_b,
            p_c,
            p_p,
            p_f,
            p_s: 1.0 - p_f,
            p_q,
            b00,
            b_e,
        })
    }
}

/// Performance measures derived from a [`SteadyState`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// bits/s
    pub throughput: f64,
    /// seconds
    pub access_delay: f64,
    pub network_loss: f64,
    pub queue_loss: f64,
    pub hoq_slots: f64,
    /// seconds
    pub slot_time: f64,
}

impl Metrics {
    pub fn evaluate(scenario: &Scenario, state: &SteadyState) -> Result<Self, DomainError> {
        let proto = &scenario.protocol;
        let slot_time = expected_slot_time(
            state,
            scenario.phy.idle_slot,
            scenario.success_duration(),
            scenario.failure_duration(),
            scenario.channel.p_e,
        );
        let hoq = hoq_slots(state.p_f, proto.w0, proto.m, proto.m_prime)?;
        let delay = access_delay(hoq, slot_time);
        let lambda = scenario.traffic.lambda;
        Ok(Metrics {
            throughput: throughput(state, scenario.traffic.packet_bits(), slot_time),
            access_delay: delay,
            network_loss: network_loss(state.p_f, proto.m),
            queue_loss: queue_loss(lambda, delay, scenario.traffic.queue_len),
            hoq_slots: hoq,
            slot_time,
        })
    }
}

/// Probability that at least one of `n` stations transmits in a slot.
pub fn busy_prob(tau: f64, n: u32) -> Result<f64, DomainError> {
    check_prob("busy_prob", "tau", tau)?;
    if n == 0 {
        return Err(DomainError::new("busy_prob", "n must be ≥ 1"));
    }
    Ok(one_minus_pow_complement(tau.clamp(0.0, 1.0), n))
}

/// `(1 - (1-tau)^(n-1)) / p_B`, with the `tau = 0` case defined as 0.
pub fn collision_prob(tau: f64, n: u32) -> Result<f64, DomainError> {
    let p_b = busy_prob(tau, n)?;
    if n == 1 || p_b == 0.0 {
        return Ok(0.0);
    }
    let others = one_minus_pow_complement(tau.clamp(0.0, 1.0), n - 1);
    Ok((others / p_b).clamp(0.0, 1.0))
}

/// Rayleigh-fading capture probability for `n` stations with capture
/// threshold `z` and spreading factor `s`:
/// `sum_{i=1}^{n-1} C(n, i+1) tau^(i+1) (1-tau)^(n-i-1) (1 + z g)^(-i)` with
/// `g = 2 / (3 s)`.
pub fn capture_prob(tau: f64, n: u32, z: f64, s: u32) -> f64 {
    if n < 2 || tau <= 0.0 {
        return 0.0;
    }
    let g = 2.0 / (3.0 * f64::from(s));
    let capture = 1.0 / (1.0 + z * g);
    if tau >= 1.0 {
        return capture.powi(n as i32 - 1);
    }
    let (ln_t, ln_q) = (tau.ln(), (-tau).ln_1p());
    let nf = f64::from(n);
    let mut ln_binom = nf.ln(); // ln C(n, 1)
    let mut sum = 0.0;
    for i in 1..n {
        let j = f64::from(i + 1);
        ln_binom += (nf - j + 1.0).ln() - j.ln();
        let ln_term = ln_binom + j * ln_t + (nf - j) * ln_q + f64::from(i) * capture.ln();
        sum += ln_term.exp();
    }
    sum.clamp(0.0, 1.0)
}

/// [`capture_prob`] when the channel has capture enabled, 0 otherwise.
pub fn capture_prob_for(tau: f64, n: u32, channel: &ChannelConfig) -> f64 {
    if channel.capture_enabled {
        capture_prob(tau, n, channel.z, channel.s)
    } else {
        0.0
    }
}

/// `p_F = (p_C - p_p) + p_E p_p + (p_E - p_E p_C)`.
pub fn failure_prob(p_c: f64, p_p: f64, p_e: f64) -> Result<f64, DomainError> {
    check_prob("failure_prob", "p_c", p_c)?;
    check_prob("failure_prob", "p_p", p_p)?;
    check_prob("failure_prob", "p_e", p_e)?;
    if p_p > p_c + EPS {
        return Err(DomainError::new(
            "failure_prob",
            format!("capture probability {p_p} exceeds collision probability {p_c}"),
        ));
    }
    let p_f = (p_c - p_p) + p_e * p_p + (p_e - p_e * p_c);
    Ok(p_f.clamp(0.0, 1.0))
}

/// Non-empty probability of an M/M/1/K queue at load `rho`, capacity `k`:
/// `(rho - rho^(k+1)) / (1 - rho^(k+1))`, and `k / (k+1)` at `rho = 1`.
pub fn queue_nonempty_at_load(rho: f64, k: u32) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if rho == 1.0 {
        return f64::from(k) / f64::from(k + 1);
    }
    let kf = f64::from(k);
    if rho < 1.0 {
        let ln = rho.ln();
        // rho (1 - rho^k) / (1 - rho^(k+1))
        rho * (kf * ln).exp_m1() / ((kf + 1.0) * ln).exp_m1()
    } else {
        // divide through by rho^(k+1): (1 - u^k) / (1 - u^(k+1)), u = 1/rho
        let ln = -rho.ln();
        (kf * ln).exp_m1() / ((kf + 1.0) * ln).exp_m1()
    }
}

/// Blocking probability of an M/M/1/K queue at load `rho`:
/// `(rho^k - rho^(k+1)) / (1 - rho^(k+1))`, and `1 / (k+1)` at `rho = 1`.
pub fn queue_loss_at_load(rho: f64, k: u32) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if rho == 1.0 {
        return 1.0 / f64::from(k + 1);
    }
    let kf = f64::from(k);
    if rho < 1.0 {
        let ln = rho.ln();
        // rho^k (rho - 1) / (rho^(k+1) - 1)
        (kf * ln).exp() * (rho - 1.0) / ((kf + 1.0) * ln).exp_m1()
    } else {
        // (1 - u) / (1 - u^(k+1)), u = 1/rho
        let u = 1.0 / rho;
        let ln = -rho.ln();
        (u - 1.0) / ((kf + 1.0) * ln).exp_m1()
    }
}

/// `p_Q` for arrival rate `lambda` and mean service time `d_c`.
pub fn queue_nonempty_prob(lambda: f64, d_c: f64, l_q: u32) -> f64 {
    queue_nonempty_at_load(lambda * d_c, l_q).clamp(0.0, 1.0)
}

/// `e_Q` for arrival rate `lambda` and mean service time `d_c`.
pub fn queue_loss(lambda: f64, d_c: f64, l_q: u32) -> f64 {
    queue_loss_at_load(lambda * d_c, l_q).clamp(0.0, 1.0)
}

/// `2^i W` capped at `i = m'`, as a float.
fn window(i: u32, w0: u32, m_prime: u32) -> f64 {
    f64::from(w0) * 2f64.powi(i.min(m_prime) as i32)
}

fn check_pf(what: &'static str, p_f: f64) -> Result<(), DomainError> {
    check_prob(what, "p_f", p_f)?;
    if p_f > PF_DEGENERATE {
        return Err(DomainError::new(
            what,
            format!("p_f = {p_f} is degenerate (≈ 1)"),
        ));
    }
    Ok(())
}

/// Closed-form stationary mass of state `(0, 0)`.
///
/// The expression has a removable `0/0` at `p_f = 1/2`; within `1e-6` of
/// that point the equivalent stage-by-stage normalisation sum is used.
pub fn b00(p_f: f64, p_q: f64, w0: u32, m: u32, m_prime: u32) -> Result<f64, DomainError> {
    check_pf("b00", p_f)?;
    check_prob("b00", "p_q", p_q)?;
    if p_q <= 0.0 {
        return Err(DomainError::new("b00", "p_q must be > 0"));
    }
    let p = p_f.max(0.0);
    let w = f64::from(w0);
    if (1.0 - 2.0 * p).abs() < 1e-6 {
        return Ok(b00_by_stages(p, p_q, w0, m, m_prime));
    }
    let two_p = 2.0 * p;
    let mp1 = m_prime as i32 + 1;
    let num = 2.0 * p_q * (1.0 - p) * (1.0 - two_p);
    let den = p_q * w * (1.0 - p) * (1.0 - two_p.powi(mp1))
        + p_q * (1.0 - two_p) * (1.0 - p.powi(mp1))
        + p_q
            * p.powi(mp1)
            * (1.0 - two_p)
            * (window(m_prime, w0, m_prime) + 1.0)
            * (1.0 - p.powi((m - m_prime) as i32))
        + 2.0 * (1.0 - p) * (1.0 - two_p) * (1.0 - p_q) * (1.0 - p.powi(m as i32))
        + 2.0 * p.powi(m as i32) * (1.0 - p) * (1.0 - two_p) * (1.0 - p_q);
    Ok(num / den)
}

/// `1 / b00 = sum_i p^i (W_i + 1) / 2 + (1 - p_q) / p_q`.
fn b00_by_stages(p: f64, p_q: f64, w0: u32, m: u32, m_prime: u32) -> f64 {
    let busy: f64 = (0..=m)
        .map(|i| p.powi(i as i32) * (window(i, w0, m_prime) + 1.0) / 2.0)
        .sum();
    1.0 / (busy + (1.0 - p_q) / p_q)
}

/// `tau = b00 * sum_{i=0}^{m} p_f^i`.
pub fn tau_from_b00(b00: f64, p_f: f64, m: u32) -> Result<f64, DomainError> {
    check_pf("tau_from_b00", p_f)?;
    check_prob("tau_from_b00", "b00", b00)?;
    let p = p_f.max(0.0);
    let mut term = 1.0;
    let mut geometric = 0.0;
    for _ in 0..=m {
        geometric += term;
        term *= p;
    }
    let tau = b00 * geometric;
    if tau > 1.0 + EPS {
        return Err(DomainError::new(
            "tau_from_b00",
            format!("tau = {tau} > 1: b00 = {b00} inconsistent with p_f = {p_f}, m = {m}"),
        ));
    }
    Ok(tau.min(1.0))
}

/// Expected slot length averaged over idle, failed, errored and successful
/// slots.
pub fn expected_slot_time(state: &SteadyState, t_sigma: f64, t_s: f64, t_f: f64, p_e: f64) -> f64 {
    let (p_b, p_s) = (state.p_b, state.p_s);
    (1.0 - p_b) * t_sigma
        + p_b * (1.0 - p_s) * t_f
        + p_b * p_s * p_e * t_f
        + p_b * p_s * (1.0 - p_e) * t_s
}

/// `psi = p_B p_S (l_D + l_I + l_U) / t_slot`, bits/s.
pub fn throughput(state: &SteadyState, payload_bits_total: u32, t_slot: f64) -> f64 {
    (state.p_b * state.p_s * f64::from(payload_bits_total) / t_slot).max(0.0)
}

/// `e_N = p_f^(m+1)`.
pub fn network_loss(p_f: f64, m: u32) -> f64 {
    p_f.powi(m as i32 + 1)
}

/// Mean number of slots a delivered packet spends at the head of the queue.
pub fn hoq_slots(p_f: f64, w0: u32, m: u32, m_prime: u32) -> Result<f64, DomainError> {
    check_pf("hoq_slots", p_f)?;
    let p = p_f.max(0.0);
    let last = p.powi(m as i32 + 1);
    let delivered = 1.0 - last;
    Ok((0..=m)
        .map(|i| (window(i, w0, m_prime) + 1.0) / 2.0 * (p.powi(i as i32) - last) / delivered)
        .sum())
}

/// `d_C = n_slot * t_slot`.
pub fn access_delay(n_slot: f64, t_slot: f64) -> f64 {
    n_slot * t_slot
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(p_b: f64, p_s: f64) -> SteadyState {
        SteadyState {
            tau: 0.0,
            p_b,
            p_c: 0.0,
            p_p: 0.0,
            p_f: 1.0 - p_s,
            p_s,
            p_q: 1.0,
            b00: 0.0,
            b_e: 0.0,
        }
    }

    #[test]
    fn busy_prob_cases() {
        assert_eq!(busy_prob(0.0, 7).unwrap(), 0.0);
        assert_relative_eq!(busy_prob(0.5, 1).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(busy_prob(0.1, 2).unwrap(), 0.19, max_relative = 1e-14);
        assert!(busy_prob(1.2, 2).is_err());
        assert!(busy_prob(0.2, 0).is_err());
    }

    #[test]
    fn collision_prob_cases() {
        assert_eq!(collision_prob(0.3, 1).unwrap(), 0.0);
        assert_relative_eq!(
            collision_prob(0.5, 2).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(collision_prob(1e-9, 10).unwrap(), 0.9, max_relative = 1e-7);
        assert_eq!(collision_prob(0.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn capture_prob_cases() {
        assert_eq!(capture_prob(0.4, 1, 1.0, 11), 0.0);
        let ch = ChannelConfig {
            p_e: 0.0,
            capture_enabled: true,
            z: 1.0,
            s: 11,
        };
        assert_relative_eq!(
            ch.processing_gain_inverse(),
            2.0 / 33.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            capture_prob(0.5, 2, 1.0, 11),
            0.25 * 33.0 / 35.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            capture_prob_for(0.5, 2, &ch),
            0.25 * 33.0 / 35.0,
            max_relative = 1e-12
        );
        let off = ChannelConfig {
            capture_enabled: false,
            ..ch
        };
        assert_eq!(capture_prob_for(0.5, 2, &off), 0.0);
    }

    #[test]
    fn capture_prob_matches_direct_sum() {
        // direct binomial sum with integer coefficients
        fn direct(tau: f64, n: u32, z: f64, s: u32) -> f64 {
            let g = 2.0 / (3.0 * s as f64);
            let mut total = 0.0;
            for i in 1..n {
                let j = i + 1;
                let mut c = 1.0;
                for t in 0..j {
                    c = c * (n - t) as f64 / (t + 1) as f64;
                }
                total += c
                    * tau.powi(j as i32)
                    * (1.0 - tau).powi((n - j) as i32)
                    * (1.0 + z * g).powi(-(i as i32));
            }
            total
        }
        for n in [2, 3, 5, 10, 25] {
            for tau in [0.01, 0.1, 0.37, 0.9, 1.0] {
                assert_relative_eq!(
                    capture_prob(tau, n, 4.0, 11),
                    direct(tau, n, 4.0, 11),
                    max_relative = 1e-11
                );
            }
        }
    }

    #[test]
    fn failure_prob_cases() {
        assert_eq!(failure_prob(0.37, 0.0, 0.0).unwrap(), 0.37);
        assert_eq!(failure_prob(0.0, 0.0, 0.21).unwrap(), 0.21);
        assert_relative_eq!(
            failure_prob(0.3, 0.1, 0.2).unwrap(),
            0.36,
            max_relative = 1e-14
        );
        assert!(failure_prob(0.1, 0.3, 0.0).is_err());
    }

    #[test]
    fn queue_cases() {
        assert_eq!(queue_nonempty_prob(0.0, 0.1, 5), 0.0);
        assert_eq!(queue_nonempty_at_load(1.0, 3), 0.75);
        assert_relative_eq!(
            queue_nonempty_at_load(2.0, 2),
            6.0 / 7.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            queue_nonempty_at_load(0.5, 2),
            (0.5 - 0.125) / (1.0 - 0.125),
            max_relative = 1e-14
        );

        assert_eq!(queue_loss_at_load(1.0, 4), 0.2);
        assert_eq!(queue_loss(0.0, 1.0, 4), 0.0);
        assert_relative_eq!(queue_loss_at_load(2.0, 2), 4.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(
            queue_loss_at_load(0.5, 2),
            (0.25 - 0.125) / (1.0 - 0.125),
            max_relative = 1e-14
        );
        // huge loads saturate rather than overflow
        assert_relative_eq!(queue_nonempty_at_load(1e9, 50), 1.0, max_relative = 1e-8);
        assert_relative_eq!(queue_loss_at_load(1e9, 50), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn queue_continuous_at_unit_load() {
        for k in [1, 3, 10, 50] {
            let lim = f64::from(k) / f64::from(k + 1);
            let lim_loss = 1.0 / f64::from(k + 1);
            for rho in [1.0 - 1e-8, 1.0 + 1e-8] {
                assert!((queue_nonempty_at_load(rho, k) - lim).abs() < 1e-6);
                assert!((queue_loss_at_load(rho, k) - lim_loss).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn b00_cases() {
        for w in [1, 2, 16, 32] {
            let b = b00(0.0, 1.0, w, 5, 3).unwrap();
            assert_relative_eq!(b, 2.0 / (f64::from(w) + 1.0), max_relative = 1e-14);
        }
        assert!(b00(1.0, 1.0, 8, 3, 2).is_err());
        assert!(b00(0.3, 0.0, 8, 3, 2).is_err());
    }

    #[test]
    fn b00_closed_form_matches_stage_sum() {
        for p_f in [0.0, 0.1, 0.3, 0.4999, 0.5, 0.5001, 0.7, 0.95] {
            for p_q in [0.05, 0.5, 1.0] {
                for (w0, m, mp) in [(2, 0, 0), (8, 3, 2), (32, 7, 5), (16, 10, 10)] {
                    let a = b00(p_f, p_q, w0, m, mp).unwrap();
                    let b = b00_by_stages(p_f, p_q, w0, m, mp);
                    assert_relative_eq!(a, b, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn tau_from_b00_cases() {
        assert_eq!(tau_from_b00(0.17, 0.0, 6).unwrap(), 0.17);
        assert_eq!(tau_from_b00(0.17, 0.8, 0).unwrap(), 0.17);
        assert_relative_eq!(
            tau_from_b00(0.2, 0.5, 1).unwrap(),
            0.3,
            max_relative = 1e-14
        );
        assert!(tau_from_b00(0.9, 0.5, 1).is_err());
    }

    #[test]
    fn slot_time_cases() {
        assert_eq!(
            expected_slot_time(&state(0.0, 0.4), 20e-6, 9e-3, 1e-3, 0.2),
            20e-6
        );
        assert_eq!(
            expected_slot_time(&state(1.0, 1.0), 20e-6, 9e-3, 1e-3, 0.0),
            9e-3
        );
        assert_relative_eq!(
            expected_slot_time(&state(0.5, 0.8), 20e-6, 9006e-6, 9006e-6, 0.1),
            4513e-6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn throughput_cases() {
        assert_eq!(throughput(&state(0.0, 1.0), 8224, 20e-6), 0.0);
        let psi = throughput(&state(0.5, 0.8), 8224, 4513e-6);
        assert_relative_eq!(psi, 0.4 * 8224.0 / 4513e-6, max_relative = 1e-14);
        assert!((psi - 0.729e6).abs() < 0.001e6);
    }

    #[test]
    fn loss_cases() {
        assert_eq!(network_loss(0.0, 4), 0.0);
        assert_eq!(network_loss(0.3, 0), 0.3);
        assert_eq!(network_loss(0.5, 3), 0.0625);
    }

    #[test]
    fn hoq_and_delay_cases() {
        assert_eq!(hoq_slots(0.6, 32, 0, 0).unwrap(), 16.5);
        assert_eq!(hoq_slots(0.0, 32, 7, 5).unwrap(), 16.5);
        assert_relative_eq!(hoq_slots(0.5, 4, 1, 1).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(access_delay(4.0, 4513e-6), 18.052e-3, max_relative = 1e-12);
        assert_eq!(access_delay(1.0, 1e-3), 1e-3);
    }

    proptest! {
        #[test]
        fn probabilities_stay_in_unit_interval(
            tau in 0.0f64..=1.0,
            n in 1u32..60,
            z in 0.1f64..10.0,
            p_e in 0.0f64..=1.0,
            p_q in 0.01f64..=1.0,
            w0 in 1u32..64,
            m in 0u32..8,
        ) {
            let unit = |x: f64| (0.0..=1.0).contains(&x);
            let p_b = busy_prob(tau, n).unwrap();
            let p_c = collision_prob(tau, n).unwrap();
            let p_p = capture_prob(tau, n, z, 11);
            prop_assert!(unit(p_b) && unit(p_c) && unit(p_p));
            prop_assert!(p_p <= p_c + 1e-12);
            let p_f = failure_prob(p_c, p_p, p_e).unwrap();
            prop_assert!(unit(p_f));
            prop_assert!(unit(network_loss(p_f, m)));
            if p_f <= PF_DEGENERATE {
                let b = b00(p_f, p_q, w0, m, m.min(5)).unwrap();
                prop_assert!(b > 0.0 && b <= 1.0);
                let t = tau_from_b00(b, p_f, m).unwrap();
                prop_assert!(unit(t));
                prop_assert!(hoq_slots(p_f, w0, m, m.min(5)).unwrap() >= (f64::from(w0) + 1.0) / 2.0 - 1e-9);
            }
            let rho = tau * 3.0;
            prop_assert!(unit(queue_nonempty_at_load(rho, w0)));
            prop_assert!(unit(queue_loss_at_load(rho, w0)));
        }

        #[test]
        fn network_loss_decreasing_in_m(p_f in 0.01f64..0.99, m in 0u32..20) {
            prop_assert!(network_loss(p_f, m + 1) < network_loss(p_f, m));
            prop_assert_eq!(network_loss(p_f, m), p_f.powi(m as i32 + 1));
        }
    }

    #[test]
    fn busy_and_capture_monotone_in_tau() {
        for n in [1, 2, 5, 10, 40] {
            let mut prev = (0.0, 0.0);
            for k in 0..=1000 {
                let tau = f64::from(k) / 1000.0;
                let cur = (busy_prob(tau, n).unwrap(), capture_prob(tau, n, 4.0, 11));
                assert!(cur.0 >= prev.0 - 1e-15, "busy n={n} tau={tau}");
                // capture peaks and then falls towards (1+zg)^-(n-1) as every
                // station transmits; below tau = 2/n it is still rising
                if tau <= 2.0 / f64::from(n) {
                    assert!(cur.1 >= prev.1 - 1e-15, "capture n={n} tau={tau}");
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn capture_not_monotone_near_full_load() {
        let n = 10;
        assert!(capture_prob(1.0, n, 4.0, 11) < capture_prob(0.5, n, 4.0, 11));
    }
}
