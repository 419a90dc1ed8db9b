//! Exhaustive and greedy search over partitions of the source alphabet.
//!
//! Partitions are enumerated as restricted-growth strings with exactly `k`
//! blocks, in lexicographic order; the count is the Stirling number of the
//! second kind `S(n, k)`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::length_solver::optimal_lengths;
use crate::types::{entropy, induced_pmf, Partition, Pmf, SolverConfig};

/// Default cap on the number of partitions a brute-force run may visit.
pub const DEFAULT_BUDGET: u128 = 10_000_000;
/// Default entropy window for [`best_at_beta`].
pub const DEFAULT_TOL_BETA: f64 = 0.02;
/// Entropies closer than this are the same envelope point.
const ENTROPY_TIE: f64 = 1e-9;
/// Ages closer than this are ties, resolved by partition order.
const AGE_TIE: f64 = 1e-12;
const CHUNK: usize = 4096;

/// One partition with the entropy and optimal age of its induced pmf.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPoint {
    pub partition: Partition,
    pub entropy: f64,
    pub age: f64,
}

impl PartitionPoint {
    fn better_than(&self, other: &PartitionPoint) -> bool {
        match cmp_age(self.age, other.age) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.partition < other.partition,
        }
    }
}

fn cmp_age(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= AGE_TIE * a.abs().max(1.0) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Serializable view of a [`PartitionPoint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPointRecord {
    /// One-based restricted-growth string.
    pub rgs: String,
    /// Zero-based member indices per block.
    pub blocks: Vec<Vec<usize>>,
    pub entropy: f64,
    pub age: f64,
}

impl From<&PartitionPoint> for PartitionPointRecord {
    fn from(p: &PartitionPoint) -> Self {
        PartitionPointRecord {
            rgs: p.partition.rgs_string(),
            blocks: p.partition.blocks(),
            entropy: p.entropy,
            age: p.age,
        }
    }
}

/// Stirling number of the second kind via `S(n,k) = k S(n−1,k) + S(n−1,k−1)`,
/// saturating at `u128::MAX`.
pub fn stirling2(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = (j as u128)
                .saturating_mul(row[j])
                .saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[k]
}

/// Iterator over all partitions of `n` symbols into exactly `k` blocks.
#[derive(Debug, Clone)]
pub struct Partitions {
    rgs: Vec<u32>,
    k: u32,
    done: bool,
}

impl Partitions {
    /// Smallest valid completion of `rgs[..=pos]`: zeros, then the missing
    /// block labels in increasing order at the tail.
    fn fill_suffix(&mut self, pos: usize, prefix_max: u32) {
        let n = self.rgs.len();
        let missing = (self.k - 1 - prefix_max) as usize;
        for j in pos + 1..n {
            self.rgs[j] = 0;
        }
        for (t, j) in (n - missing..n).enumerate() {
            self.rgs[j] = prefix_max + 1 + t as u32;
        }
    }

    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        let mut prefix_max = vec![0u32; n];
        let mut m = 0;
        for (i, &b) in self.rgs.iter().enumerate() {
            m = m.max(b);
            prefix_max[i] = m;
        }
        for i in (1..n).rev() {
            let cap = prefix_max[i - 1] + 1;
            let b = self.rgs[i] + 1;
            if b > cap || b >= self.k {
                continue;
            }
            let new_max = prefix_max[i - 1].max(b);
            let missing = (self.k - 1 - new_max) as usize;
            if missing > n - 1 - i {
                continue;
            }
            self.rgs[i] = b;
            self.fill_suffix(i, new_max);
            return true;
        }
        false
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let out = Partition::from_rgs(self.rgs.clone()).expect("generator keeps canonical form");
        if !self.advance() {
            self.done = true;
        }
        Some(out)
    }
}

/// All set partitions of `{1..n}` into exactly `k` non-empty blocks, in
/// restricted-growth-string order.
pub fn enumerate_partitions(n: usize, k: usize) -> Result<Partitions> {
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "need 1 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    let mut it = Partitions {
        rgs: vec![0; n],
        k: k as u32,
        done: false,
    };
    it.fill_suffix(0, 0);
    Ok(it)
}

/// Every partition point plus the lower envelope.
#[derive(Debug, Clone)]
pub struct Frontier {
    /// All points in enumeration order.
    pub points: Vec<PartitionPoint>,
    /// Minimum-age point per distinct entropy, sorted by entropy.
    pub envelope: Vec<PartitionPoint>,
}

/// Options for [`brute_force_frontier_with`].
#[derive(Debug, Clone)]
pub struct BruteForceOptions {
    pub budget: u128,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub jobs: Option<usize>,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            budget: DEFAULT_BUDGET,
            jobs: None,
        }
    }
}

/// Point for a single partition: induced pmf, its entropy and `Δ*`.
pub fn evaluate_partition(p: &Pmf, part: &Partition, cfg: &SolverConfig) -> Result<PartitionPoint> {
    let q = induced_pmf(part, p)?;
    let sol = optimal_lengths(&q, cfg)?;
    Ok(PartitionPoint {
        partition: part.clone(),
        entropy: entropy(&q),
        age: sol.lambda,
    })
}

pub fn brute_force_frontier(p: &Pmf, k: usize, cfg: &SolverConfig) -> Result<Frontier> {
    brute_force_frontier_with(p, k, cfg, &BruteForceOptions::default())
}

/// Evaluates every partition of `p`'s alphabet into `k` blocks.
pub fn brute_force_frontier_with(
    p: &Pmf,
    k: usize,
    cfg: &SolverConfig,
    opts: &BruteForceOptions,
) -> Result<Frontier> {
    let n = p.len();
    if !p.is_sorted_desc() {
        return Err(Error::invalid("source pmf must be sorted nonincreasing"));
    }
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "need 2 <= k <= n for a positive-entropy search, got n = {n}, k = {k}"
        )));
    }
    let count = stirling2(n, k);
    if count > opts.budget {
        return Err(Error::BudgetExceeded {
            count,
            budget: opts.budget,
        });
    }
    let run = || -> Result<Vec<PartitionPoint>> {
        let mut points = Vec::with_capacity(count as usize);
        let mut iter = enumerate_partitions(n, k)?;
        loop {
            let chunk: Vec<Partition> = iter.by_ref().take(CHUNK).collect();
            if chunk.is_empty() {
                break;
            }
            let evaluated: Result<Vec<PartitionPoint>> = chunk
                .par_iter()
                .map(|part| evaluate_partition(p, part, cfg))
                .collect();
            points.extend(evaluated?);
        }
        Ok(points)
    };
    let points = match opts.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let envelope = lower_envelope(&points);
    Ok(Frontier { points, envelope })
}

/// Lowest-age point for each distinct entropy, in increasing entropy order.
pub fn lower_envelope(points: &[PartitionPoint]) -> Vec<PartitionPoint> {
    let mut sorted: Vec<&PartitionPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.entropy
            .total_cmp(&b.entropy)
            .then_with(|| a.partition.cmp(&b.partition))
    });
    let mut envelope: Vec<PartitionPoint> = Vec::new();
    let mut group_start = f64::NEG_INFINITY;
    for pt in sorted {
        match envelope.last_mut() {
            Some(last) if pt.entropy - group_start <= ENTROPY_TIE => {
                if pt.better_than(last) {
                    *last = pt.clone();
                }
            }
            _ => {
                group_start = pt.entropy;
                envelope.push(pt.clone());
            }
        }
    }
    envelope
}

/// How [`best_at_beta_with`] picks among the points inside the entropy window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaRule {
    /// Entropy closest to `beta`, then lowest age.
    #[default]
    NearestEntropy,
    /// Lowest age anywhere in the window.
    MinAge,
}

/// [`best_at_beta_with`] under [`BetaRule::NearestEntropy`].
pub fn best_at_beta(
    frontier: &[PartitionPoint],
    beta: f64,
    tol_beta: f64,
) -> Result<PartitionPoint> {
    best_at_beta_with(frontier, beta, tol_beta, BetaRule::NearestEntropy)
}

/// Selects a point with entropy within `tol_beta` of `beta`. Remaining ties
/// go to the lexicographically smallest partition.
pub fn best_at_beta_with(
    frontier: &[PartitionPoint],
    beta: f64,
    tol_beta: f64,
    rule: BetaRule,
) -> Result<PartitionPoint> {
    if frontier.is_empty() {
        return Err(Error::invalid("empty frontier"));
    }
    if !beta.is_finite() || !(tol_beta >= 0.0) {
        return Err(Error::invalid(format!(
            "bad beta {beta} or tolerance {tol_beta}"
        )));
    }
    let better = |a: &PartitionPoint, b: &PartitionPoint| match rule {
        BetaRule::MinAge => a.better_than(b),
        BetaRule::NearestEntropy => {
            let (da, db) = ((a.entropy - beta).abs(), (b.entropy - beta).abs());
            if (da - db).abs() > ENTROPY_TIE {
                da < db
            } else {
                a.better_than(b)
            }
        }
    };
    let mut best: Option<&PartitionPoint> = None;
    for pt in frontier
        .iter()
        .filter(|pt| (pt.entropy - beta).abs() <= tol_beta)
    {
        if best.is_none_or(|b| better(pt, b)) {
            best = Some(pt);
        }
    }
    best.cloned().ok_or_else(|| {
        let below = frontier
            .iter()
            .map(|p| p.entropy)
            .filter(|&h| h < beta)
            .fold(None, |acc: Option<f64>, h| {
                Some(acc.map_or(h, |a| a.max(h)))
            });
        let above = frontier
            .iter()
            .map(|p| p.entropy)
            .filter(|&h| h > beta)
            .fold(None, |acc: Option<f64>, h| {
                Some(acc.map_or(h, |a| a.min(h)))
            });
        Error::NoPointNearBeta {
            beta,
            tol: tol_beta,
            below,
            above,
        }
    })
}

/// First-fit-decreasing combination of source symbols into blocks that
/// approximate `target`.
///
/// Target blocks at or below `cfg.tol_prob` are dropped, so the number of
/// blocks is the target's support size. Blocks are visited by descending
/// target mass and symbols by descending probability. Each symbol joins the
/// block minimizing `|block sum + p_i − target mass|`, with ties going to
/// the block with the larger remaining deficit and then to the heavier
/// target. Once the remaining symbols only just cover the empty blocks,
/// they go to empty blocks.
pub fn greedy_partition(p: &Pmf, target: &Pmf, cfg: &SolverConfig) -> Result<PartitionPoint> {
    let mut blocks: Vec<f64> = target
        .probs()
        .iter()
        .copied()
        .filter(|&t| t > cfg.tol_prob)
        .collect();
    blocks.sort_by(|a, b| b.total_cmp(a));
    let k = blocks.len();
    let n = p.len();
    if k > n {
        return Err(Error::invalid(format!(
            "target has {k} blocks but the source has only {n} symbols"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.probs()[b].total_cmp(&p.probs()[a]).then(a.cmp(&b)));

    let mut sums = vec![0.0; k];
    let mut filled = vec![false; k];
    let mut empty = k;
    let mut labels = vec![0usize; n];
    for (done, &i) in order.iter().enumerate() {
        let pi = p.probs()[i];
        let remaining = n - done;
        let forced = remaining <= empty;
        let mut choice: Option<(usize, f64, f64)> = None;
        for b in 0..k {
            if forced && filled[b] {
                continue;
            }
            let miss = (sums[b] + pi - blocks[b]).abs();
            let deficit = blocks[b] - sums[b];
            let better = match choice {
                None => true,
                Some((_, m, d)) => {
                    if (miss - m).abs() > 1e-12 {
                        miss < m
                    } else {
                        deficit > d + 1e-12
                    }
                }
            };
            if better {
                choice = Some((b, miss, deficit));
            }
        }
        let (b, _, _) = choice.expect("at least one admissible block");
        sums[b] += pi;
        if !filled[b] {
            filled[b] = true;
            empty -= 1;
        }
        labels[i] = b;
    }
    let partition = Partition::canonicalize(&labels)?;
    evaluate_partition(p, &partition, cfg)
}
