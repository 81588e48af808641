//! Explicit backoff Markov chain and its stationary distribution.
//!
//! States are the empty-queue state `E` plus `(i, k)` for retry stage
//! `0 <= i <= m` and counter `0 <= k < W_i`. `p_f` and `p_q` are free
//! parameters here, so the chain checks the closed forms in
//! [`crate::analytic`] without any of the coupling.
//!
//! A station sitting in `E` leaves it once its queue becomes non-empty,
//! which happens with probability `p_q` per slot, and then draws a stage-0
//! counter uniformly ([`EmptyExit::Dwell`]). The alternative
//! [`EmptyExit::Immediate`] leaves `E` after one slot regardless of `p_q`;
//! its stationary mass in `E` is `(1 - p_q) b00` instead of
//! `(1 - p_q) / p_q * b00`, so the closed-form `b00` does not describe it
//! for `p_q < 1`.

use std::collections::VecDeque;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::ChainError;

/// Largest chain solved by dense LU; bigger chains use power iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyExit {
    /// `P{E|E} = 1 - p_q`, `P{0,k|E} = p_q / W`.
    #[default]
    Dwell,
    /// `P{0,k|E} = 1 / W`.
    Immediate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub w0: u32,
    pub m: u32,
    pub m_prime: u32,
    pub p_f: f64,
    pub p_q: f64,
    pub empty_exit: EmptyExit,
}

impl ChainSpec {
    pub fn new(w0: u32, m: u32, m_prime: u32, p_f: f64, p_q: f64) -> Self {
        ChainSpec {
            w0,
            m,
            m_prime,
            p_f,
            p_q,
            empty_exit: EmptyExit::Dwell,
        }
    }

    fn check(&self) -> Result<(), ChainError> {
        let bad = |msg: String| Err(ChainError::Spec(msg));
        if self.w0 == 0 {
            return bad("w0 must be ≥ 1".into());
        }
        if self.m_prime > self.m {
            return bad("m_prime exceeds m".into());
        }
        if self.m_prime >= 32 || (u64::from(self.w0) << self.m_prime) > u64::from(u32::MAX) {
            return bad("contention window overflows".into());
        }
        if !(0.0..1.0).contains(&self.p_f) {
            return bad(format!("p_f = {} outside [0, 1)", self.p_f));
        }
        if !(0.0..=1.0).contains(&self.p_q) {
            return bad(format!("p_q = {} outside [0, 1]", self.p_q));
        }
        Ok(())
    }

    pub fn window(&self, stage: u32) -> usize {
        (self.w0 as usize) << stage.min(self.m_prime)
    }
}

/// Row-stochastic transition structure, stored sparsely by row.
#[derive(Debug, Clone)]
pub struct Chain {
    spec: ChainSpec,
    offsets: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

/// State index of `E`.
pub const EMPTY: usize = 0;

impl Chain {
    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn index(&self, stage: u32, counter: usize) -> usize {
        debug_assert!(counter < self.spec.window(stage));
        self.offsets[stage as usize] + counter
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    /// Largest `|sum_j P(i, j) - 1|` over all rows.
    pub fn row_sum_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `x P` for a row vector `x`.
    fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += xi * p;
            }
        }
    }

    /// `max_j |(pi P)_j - pi_j|` for the state vector `pi`.
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let mut next = vec![0.0; pi.len()];
        self.left_multiply(pi, &mut next);
        next.iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Err when some state cannot reach `(0, 0)`, i.e. the chain has more
    /// than one closed class and no unique stationary distribution.
    fn check_single_closed_class(&self) -> Result<(), ChainError> {
        let n = self.state_count();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                if p > 0.0 {
                    reverse[j].push(i);
                }
            }
        }
        let target = self.index(0, 0);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([target]);
        seen[target] = true;
        while let Some(j) = queue.pop_front() {
            for &i in &reverse[j] {
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(i) => Err(ChainError::Reducible(format!(
                "state {} cannot reach (0,0)",
                self.label(i)
            ))),
        }
    }

    fn label(&self, state: usize) -> String {
        if state == EMPTY {
            return "E".into();
        }
        let stage = self.offsets.partition_point(|&o| o <= state) - 1;
        format!("({stage},{})", state - self.offsets[stage])
    }
}

/// Builds the one-step transition structure of the backoff chain.
pub fn build_chain(spec: &ChainSpec) -> Result<Chain, ChainError> {
    spec.check()?;
    let m = spec.m;
    let mut offsets = Vec::with_capacity(m as usize + 1);
    let mut next = 1;
    for i in 0..=m {
        offsets.push(next);
        next += spec.window(i);
    }
    let count = next;
    let (p_f, p_q) = (spec.p_f, spec.p_q);
    let w = spec.window(0);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];

    let spread = |row: &mut Vec<(usize, f64)>, first: usize, width: usize, p: f64| {
        if p > 0.0 {
            row.extend((0..width).map(|k| (first + k, p / width as f64)));
        }
    };
    let push = |row: &mut Vec<(usize, f64)>, to: usize, p: f64| {
        if p > 0.0 {
            row.push((to, p));
        }
    };

    // E
    match spec.empty_exit {
        EmptyExit::Dwell => {
            push(&mut rows[EMPTY], EMPTY, 1.0 - p_q);
            spread(&mut rows[EMPTY], offsets[0], w, p_q);
        }
        EmptyExit::Immediate => spread(&mut rows[EMPTY], offsets[0], w, 1.0),
    }

    for i in 0..=m {
        let base = offsets[i as usize];
        // countdown
        for k in 1..spec.window(i) {
            rows[base + k].push((base + k - 1, 1.0));
        }
        let row = &mut rows[base];
        if i < m {
            spread(row, offsets[i as usize + 1], spec.window(i + 1), p_f);
            spread(row, offsets[0], w, p_q * (1.0 - p_f));
            push(row, EMPTY, (1.0 - p_q) * (1.0 - p_f));
        } else {
            spread(row, offsets[0], w, p_q);
            push(row, EMPTY, 1.0 - p_q);
        }
    }

    Ok(Chain {
        spec: spec.clone(),
        offsets,
        rows,
    })
}

/// Stationary probabilities over `E` and every `(i, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDistribution {
    pub mass_e: f64,
    /// `stages[i][k]` is the mass of state `(i, k)`.
    pub stages: Vec<Vec<f64>>,
}

impl ChainDistribution {
    pub fn mass(&self, stage: u32, counter: usize) -> f64 {
        self.stages[stage as usize][counter]
    }

    pub fn total(&self) -> f64 {
        self.mass_e + self.stages.iter().flatten().sum::<f64>()
    }

    /// Flattened in chain state order.
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.mass_e)
            .chain(self.stages.iter().flatten().copied())
            .collect()
    }

    fn from_vec(chain: &Chain, pi: &[f64]) -> Self {
        let stages = (0..=chain.spec.m)
            .map(|i| {
                let base = chain.offsets[i as usize];
                pi[base..base + chain.spec.window(i)].to_vec()
            })
            .collect();
        ChainDistribution {
            mass_e: pi[EMPTY],
            stages,
        }
    }

    /// Writes `state,i,k,mass` rows; `E` has empty `i` and `k`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "state,i,k,mass")?;
        writeln!(out, "E,,,{:e}", self.mass_e)?;
        for (i, stage) in self.stages.iter().enumerate() {
            for (k, mass) in stage.iter().enumerate() {
                writeln!(out, "({i};{k}),{i},{k},{mass:e}")?;
            }
        }
        Ok(())
    }
}

/// Stationary distribution by direct solve, or power iteration for chains
/// above [`DIRECT_SOLVE_LIMIT`] states.
pub fn stationary(chain: &Chain) -> Result<ChainDistribution, ChainError> {
    if chain.state_count() <= DIRECT_SOLVE_LIMIT {
        stationary_direct(chain)
    } else {
        stationary_power(chain, 1e-13, 50_000_000)
    }
}

/// Solves `pi (P - I) = 0` with one balance equation replaced by
/// `sum pi = 1`.
pub fn stationary_direct(chain: &Chain) -> Result<ChainDistribution, ChainError> {
    chain.check_single_closed_class()?;
    let n = chain.state_count();
    // transpose: column j of P^T - I is row j of P - I
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in chain.rows.iter().enumerate() {
        for &(j, p) in row {
            a[(j, i)] += p;
        }
        a[(i, i)] -= 1.0;
    }
    let last = n - 1;
    for j in 0..n {
        a[(last, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[last] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| ChainError::Solve("singular balance system".into()))?;
    let pi: Vec<f64> = pi.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|x| x / total).collect();
    Ok(ChainDistribution::from_vec(chain, &pi))
}

/// Iterates `pi <- pi P` from the uniform vector until successive iterates
/// differ by less than `tol` in the max norm.
pub fn stationary_power(
    chain: &Chain,
    tol: f64,
    max_iter: usize,
) -> Result<ChainDistribution, ChainError> {
    chain.check_single_closed_class()?;
    let n = chain.state_count();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        chain.left_multiply(&pi, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if delta < tol {
            return Ok(ChainDistribution::from_vec(chain, &pi));
        }
    }
    Err(ChainError::Solve(format!(
        "power iteration did not reach {tol:e} in {max_iter} steps"
    )))
}

/// Per-slot transmission probability: total mass of the `(i, 0)` states.
pub fn oracle_tau(dist: &ChainDistribution, m: u32) -> f64 {
    (0..=m).map(|i| dist.mass(i, 0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve(spec: &ChainSpec) -> (Chain, ChainDistribution) {
        let chain = build_chain(spec).unwrap();
        let dist = stationary(&chain).unwrap();
        (chain, dist)
    }

    #[test]
    fn smallest_chain() {
        let chain = build_chain(&ChainSpec::new(2, 0, 0, 0.3, 0.6)).unwrap();
        assert_eq!(chain.state_count(), 3);
        assert_eq!(chain.label(0), "E");
        assert_eq!(chain.label(2), "(0,1)");
    }

    #[test]
    fn state_count_formula() {
        let spec = ChainSpec::new(8, 4, 2, 0.3, 0.5);
        let chain = build_chain(&spec).unwrap();
        assert_eq!(chain.state_count(), 1 + 8 + 16 + 32 + 32 + 32);
    }

    #[test]
    fn countdown_rows_are_deterministic() {
        let chain = build_chain(&ChainSpec::new(4, 2, 1, 0.4, 0.7)).unwrap();
        for i in 0..=2 {
            for k in 1..chain.spec().window(i) {
                assert_eq!(
                    chain.row(chain.index(i, k)),
                    &[(chain.index(i, k - 1), 1.0)]
                );
            }
        }
    }

    #[test]
    fn last_stage_row_ignores_p_f() {
        for p_f in [0.1, 0.6] {
            let (w0, p_q) = (4, 0.7);
            let chain = build_chain(&ChainSpec::new(w0, 2, 1, p_f, p_q)).unwrap();
            let row = chain.row(chain.index(2, 0));
            let mut to_stage0 = 0.0;
            let mut to_empty = 0.0;
            for &(j, p) in row {
                if j == EMPTY {
                    to_empty += p;
                } else {
                    assert!(j >= chain.index(0, 0) && j < chain.index(0, 0) + w0 as usize);
                    assert_relative_eq!(p, p_q / f64::from(w0), max_relative = 1e-15);
                    to_stage0 += p;
                }
            }
            assert_relative_eq!(to_stage0, p_q, max_relative = 1e-15);
            assert_relative_eq!(to_empty, 1.0 - p_q, max_relative = 1e-15);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        for w0 in [1, 2, 4, 8] {
            for m in 0..=4 {
                for mp in 0..=m {
                    for p_f in [0.0, 0.45, 0.9] {
                        for p_q in [0.25, 1.0] {
                            for exit in [EmptyExit::Dwell, EmptyExit::Immediate] {
                                let spec = ChainSpec {
                                    empty_exit: exit,
                                    ..ChainSpec::new(w0, m, mp, p_f, p_q)
                                };
                                let chain = build_chain(&spec).unwrap();
                                assert!(chain.row_sum_defect() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn two_state_saturated_chain() {
        let (_, dist) = solve(&ChainSpec::new(2, 0, 0, 0.0, 1.0));
        assert_eq!(dist.mass_e, 0.0);
        assert_relative_eq!(dist.mass(0, 0), 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(dist.mass(0, 1), 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_mass_relation() {
        for p_q in [0.1, 0.25, 0.5, 0.9, 1.0] {
            let (chain, dist) = solve(&ChainSpec::new(8, 3, 2, 0.2, p_q));
            assert_relative_eq!(
                dist.mass_e,
                dist.mass(0, 0) * (1.0 - p_q) / p_q,
                max_relative = 1e-10,
                epsilon = 1e-14
            );
            assert!((dist.total() - 1.0).abs() < 1e-12);
            assert!(chain.balance_residual(&dist.to_vec()) < 1e-12);
        }
    }

    #[test]
    fn immediate_exit_changes_empty_mass() {
        let p_q = 0.5;
        let spec = ChainSpec {
            empty_exit: EmptyExit::Immediate,
            ..ChainSpec::new(8, 3, 2, 0.2, p_q)
        };
        let (_, dist) = solve(&spec);
        assert_relative_eq!(
            dist.mass_e,
            dist.mass(0, 0) * (1.0 - p_q),
            max_relative = 1e-10
        );
        let closed = crate::analytic::b00(0.2, p_q, 8, 3, 2).unwrap();
        assert!((dist.mass(0, 0) - closed).abs() > 1e-3);
    }

    #[test]
    fn stage_masses_follow_linear_ramp_and_geometric_heads() {
        let spec = ChainSpec::new(4, 4, 2, 0.35, 0.6);
        let (_, dist) = solve(&spec);
        let b00 = dist.mass(0, 0);
        for i in 0..=spec.m {
            let w = spec.window(i);
            let head = dist.mass(i, 0);
            assert_relative_eq!(head, 0.35f64.powi(i as i32) * b00, max_relative = 1e-10);
            for k in 0..w {
                let ramp = (w - k) as f64 / w as f64 * head;
                assert_relative_eq!(dist.mass(i, k), ramp, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn oracle_tau_simple_cases() {
        let (_, dist) = solve(&ChainSpec::new(4, 0, 0, 0.4, 0.5));
        assert_eq!(oracle_tau(&dist, 0), dist.mass(0, 0));
        let (_, dist) = solve(&ChainSpec::new(4, 3, 2, 0.0, 0.5));
        assert_relative_eq!(oracle_tau(&dist, 3), dist.mass(0, 0), max_relative = 1e-12);
    }

    #[test]
    fn power_iteration_agrees_with_direct() {
        for spec in [
            ChainSpec::new(2, 0, 0, 0.0, 1.0),
            ChainSpec::new(4, 2, 1, 0.5, 0.75),
            ChainSpec::new(8, 4, 3, 0.9, 0.25),
            ChainSpec::new(8, 3, 2, 0.2, 0.5),
        ] {
            let chain = build_chain(&spec).unwrap();
            let direct = stationary_direct(&chain).unwrap().to_vec();
            let power = stationary_power(&chain, 1e-15, 10_000_000)
                .unwrap()
                .to_vec();
            for (a, b) in direct.iter().zip(&power) {
                assert!((a - b).abs() < 1e-10, "{spec:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn reducible_chain_is_reported() {
        let chain = build_chain(&ChainSpec::new(4, 2, 1, 0.3, 0.0)).unwrap();
        assert!(matches!(stationary(&chain), Err(ChainError::Reducible(_))));
        assert!(matches!(
            stationary_power(&chain, 1e-13, 10),
            Err(ChainError::Reducible(_))
        ));
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(build_chain(&ChainSpec::new(0, 1, 0, 0.1, 0.5)).is_err());
        assert!(build_chain(&ChainSpec::new(4, 1, 2, 0.1, 0.5)).is_err());
        assert!(build_chain(&ChainSpec::new(4, 1, 0, 1.0, 0.5)).is_err());
        assert!(build_chain(&ChainSpec::new(4, 1, 0, 0.1, 1.5)).is_err());
    }

    #[test]
    fn csv_dump() {
        let (_, dist) = solve(&ChainSpec::new(2, 1, 1, 0.5, 0.5));
        let mut buf = Vec::new();
        dist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "state,i,k,mass");
        assert!(lines[1].starts_with("E,,,"));
        assert_eq!(lines.len(), 2 + 2 + 4);
        assert!(lines[2].starts_with("(0;0),0,0,"));
    }
}
