//! Fixed-point solution of the coupled model.
//!
//! `tau` fixes `p_B`, `p_C`, `p_p` and so `p_F`; `p_F` and `p_Q` fix `b00`
//! and so `tau`; the resulting slot time and head-of-queue slot count fix
//! `d_C`, and `lambda d_C` fixes `p_Q`. Neither the slot time nor the slot
//! count depends on `p_Q`, so `p_Q` is a function of `tau` and the whole
//! system collapses to a one-dimensional map, solved by damped Picard
//! iteration and checked for further roots by a sign scan.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, Metrics, SteadyState};
use crate::error::{DomainError, Iterate, SolverError};
use crate::params::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Unsaturated,
    /// Holds `p_Q = 1` and skips the queue equation.
    Saturated,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unsaturated" => Ok(Mode::Unsaturated),
            "saturated" => Ok(Mode::Saturated),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on the largest defect of `(tau, p_F, p_Q)`.
    pub tol: f64,
    /// Cap on Picard steps per inner solve and on outer passes.
    pub max_iter: usize,
    pub damping: f64,
    pub mode: Mode,
    /// Starting `tau`; `None` means `2 / (W + 1)`.
    pub tau_seed: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
            mode: Mode::Unsaturated,
            tau_seed: None,
        }
    }
}

impl SolverOptions {
    pub fn saturated() -> Self {
        SolverOptions {
            mode: Mode::Saturated,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), SolverError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(SolverError::Options("tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::Options("max_iter must be ≥ 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::Options("damping must lie in (0, 1]"));
        }
        if let Some(seed) = self.tau_seed {
            if !(seed > 0.0 && seed < 1.0) {
                return Err(SolverError::Options("tau_seed must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub state: SteadyState,
    pub metrics: Metrics,
    /// Picard steps taken, summed over outer passes.
    pub iterations: usize,
    /// Largest component of the defect triple at the returned state.
    pub residual: f64,
    pub converged: bool,
    /// Sign-change brackets of the `tau` defect at the final `p_Q`.
    pub root_brackets: Vec<(f64, f64)>,
    /// More than one bracket was found; the smallest-`tau` root was kept.
    pub multiple_roots: bool,
}

/// Defects of the three defining equations at `(tau, p_q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `tau_from_b00(b00(p_F(tau), p_q)) - tau`
    pub tau: f64,
    /// `p_F` after one pass through the map minus `p_F(tau)`.
    pub p_f: f64,
    /// `queue_nonempty_prob(lambda, d_C(tau)) - p_q`; 0 when saturated.
    pub p_q: f64,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.tau.abs().max(self.p_f.abs()).max(self.p_q.abs())
    }
}

fn default_seed(scenario: &Scenario) -> f64 {
    2.0 / (f64::from(scenario.protocol.w0) + 1.0)
}

/// `tau -> tau_from_b00(b00(p_F(tau), p_q), p_F(tau), m)`.
fn tau_map(scenario: &Scenario, tau: f64, p_q: f64) -> Result<(f64, SteadyState), DomainError> {
    let state = SteadyState::evaluate(scenario, tau, p_q)?;
    let next = analytic::tau_from_b00(state.b00, state.p_f, scenario.protocol.m)?;
    Ok((next, state))
}

/// `p_Q` implied by the service time at this state.
fn queue_map(scenario: &Scenario, state: &SteadyState) -> Result<f64, DomainError> {
    let metrics = Metrics::evaluate(scenario, state)?;
    Ok(analytic::queue_nonempty_prob(
        scenario.traffic.lambda,
        metrics.access_delay,
        scenario.traffic.queue_len,
    ))
}

/// Evaluates the defect triple without iterating.
pub fn residual(
    scenario: &Scenario,
    tau: f64,
    p_q: f64,
    mode: Mode,
) -> Result<Residual, SolverError> {
    scenario.validate()?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SolverError::DegenerateInput(format!(
            "tau = {tau} outside (0, 1)"
        )));
    }
    let (next, state) = tau_map(scenario, tau, p_q)?;
    let p_f_next = SteadyState::evaluate(scenario, next, p_q)?.p_f;
    let p_q_defect = match mode {
        Mode::Saturated => 0.0,
        Mode::Unsaturated => queue_map(scenario, &state)? - p_q,
    };
    Ok(Residual {
        tau: next - tau,
        p_f: p_f_next - state.p_f,
        p_q: p_q_defect,
    })
}

/// Number of grid points in the `tau` sign scan.
pub const SCAN_POINTS: usize = 4000;

/// Brackets `(lo, hi)` where the `tau` defect at fixed `p_q` changes sign,
/// scanning a logit-spaced grid over `(0, 1)`. Grid points where the map
/// is undefined are skipped.
pub fn scan_tau_roots(scenario: &Scenario, p_q: f64, points: usize) -> Vec<(f64, f64)> {
    scan_with(
        |tau| tau_map(scenario, tau, p_q).ok().map(|(t, _)| t - tau),
        points,
    )
}

fn scan_with(defect: impl Fn(f64) -> Option<f64>, points: usize) -> Vec<(f64, f64)> {
    let grid = (0..points).map(|k| {
        let x = -16.0 + 32.0 * k as f64 / (points - 1) as f64;
        1.0 / (1.0 + (-x).exp())
    });
    let mut brackets = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for tau in grid {
        let Some(d) = defect(tau) else { continue };
        if let Some((t0, d0)) = prev {
            if d0 == 0.0 {
                brackets.push((t0, t0));
            } else if d0.signum() != d.signum() && d != 0.0 {
                brackets.push((t0, tau));
            }
        }
        prev = Some((tau, d));
    }
    brackets
}

/// Bisects a defect inside a sign-change bracket.
fn bisect_with(
    defect: impl Fn(f64) -> Result<f64, DomainError>,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
) -> f64 {
    let Ok(mut d_lo) = defect(lo) else { return lo };
    for _ in 0..200 {
        if hi - lo <= tol * 1e-3 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match defect(mid) {
            Ok(0.0) => return mid,
            Ok(d) if d.signum() == d_lo.signum() => {
                lo = mid;
                d_lo = d;
            }
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

/// The `p_Q` a given `tau` implies. `d_C` depends on `tau` alone, so the
/// queue equation closes the map without a separate `p_Q` iterate.
fn implied_p_q(scenario: &Scenario, tau: f64, mode: Mode) -> Result<f64, DomainError> {
    match mode {
        Mode::Saturated => Ok(1.0),
        Mode::Unsaturated => {
            let state = SteadyState::evaluate(scenario, tau, 1.0)?;
            Ok(queue_map(scenario, &state)?.clamp(0.0, 1.0))
        }
    }
}

/// `tau -> T(tau, p_Q(tau))`, the full fixed-point map in one variable.
fn composite_map(scenario: &Scenario, tau: f64, mode: Mode) -> Result<(f64, f64), DomainError> {
    let p_q = implied_p_q(scenario, tau, mode)?;
    let (next, _) = tau_map(scenario, tau, p_q)?;
    Ok((next, p_q))
}

fn composite_brackets(scenario: &Scenario, mode: Mode) -> Vec<(f64, f64)> {
    match mode {
        Mode::Saturated => scan_tau_roots(scenario, 1.0, SCAN_POINTS),
        Mode::Unsaturated => scan_with(
            |tau| {
                composite_map(scenario, tau, mode)
                    .ok()
                    .map(|(t, _)| t - tau)
            },
            SCAN_POINTS,
        ),
    }
}

struct Run<'a> {
    scenario: &'a Scenario,
    opts: &'a SolverOptions,
    iterations: usize,
    history: Vec<Iterate>,
}

impl Run<'_> {
    /// Damped Picard iteration on the composite map.
    fn picard(&mut self, mut tau: f64) -> Result<(f64, f64), SolverError> {
        let d = self.opts.damping;
        let mut last = f64::NAN;
        for _ in 0..self.opts.max_iter {
            self.iterations += 1;
            let (next, p_q) = composite_map(self.scenario, tau, self.opts.mode)?;
            if self.history.len() < 1000 {
                let p_f = SteadyState::evaluate(self.scenario, tau, p_q)?.p_f;
                self.history.push((tau, p_f, p_q));
            }
            last = (next - tau).abs();
            if last <= self.opts.tol * 0.1 {
                let p_q = implied_p_q(self.scenario, next, self.opts.mode)?;
                return Ok((next, p_q));
            }
            tau = (1.0 - d) * tau + d * next;
        }
        Err(SolverError::NonConvergence {
            iterations: self.iterations,
            residual: last,
            history: std::mem::take(&mut self.history),
        })
    }
}

/// Solves the coupled model for one scenario.
pub fn solve(scenario: &Scenario, opts: &SolverOptions) -> Result<Solution, SolverError> {
    scenario.validate()?;
    opts.check()?;
    if opts.mode == Mode::Unsaturated && scenario.traffic.lambda == 0.0 {
        return finish(scenario, opts, 0.0, 0.0, 0, Vec::new(), false);
    }
    let seed = opts.tau_seed.unwrap_or_else(|| default_seed(scenario));
    let mut run = Run {
        scenario,
        opts,
        iterations: 0,
        history: Vec::new(),
    };
    let (mut tau, mut p_q) = run.picard(seed)?;

    let root_brackets = composite_brackets(scenario, opts.mode);
    let multiple_roots = root_brackets.len() > 1;
    if multiple_roots {
        let root = |b| {
            let f = |t: f64| composite_map(scenario, t, opts.mode).map(|(x, _)| x - t);
            bisect_with(f, b, opts.tol)
        };
        let smallest = root(root_brackets[0]);
        if (smallest - tau).abs() > opts.tol {
            tau = smallest;
            p_q = implied_p_q(scenario, tau, opts.mode)?;
        }
    }

    finish(
        scenario,
        opts,
        tau,
        p_q,
        run.iterations,
        root_brackets,
        multiple_roots,
    )
}

fn finish(
    scenario: &Scenario,
    opts: &SolverOptions,
    tau: f64,
    p_q: f64,
    iterations: usize,
    root_brackets: Vec<(f64, f64)>,
    multiple_roots: bool,
) -> Result<Solution, SolverError> {
    let state = SteadyState::evaluate(scenario, tau, p_q)?;
    let metrics = Metrics::evaluate(scenario, &state)?;
    let residual = if p_q == 0.0 && tau == 0.0 {
        0.0
    } else {
        self::residual_at(scenario, tau, p_q, opts.mode)?.max_abs()
    };
    Ok(Solution {
        state,
        metrics,
        iterations,
        residual,
        converged: residual <= opts.tol,
        root_brackets,
        multiple_roots,
    })
}

fn residual_at(
    scenario: &Scenario,
    tau: f64,
    p_q: f64,
    mode: Mode,
) -> Result<Residual, SolverError> {
    if tau <= 0.0 || tau >= 1.0 {
        // tau pinned at a boundary by the closed forms (e.g. W = 1, n = 1)
        let (next, state) = tau_map(scenario, tau, p_q)?;
        let q = match mode {
            Mode::Saturated => 0.0,
            Mode::Unsaturated => queue_map(scenario, &state)? - p_q,
        };
        return Ok(Residual {
            tau: next - tau,
            p_f: 0.0,
            p_q: q,
        });
    }
    residual(scenario, tau, p_q, mode)
}
