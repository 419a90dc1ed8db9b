//! Alternating minimization of the relaxed problem over `(p̂, ℓ)`.
//!
//! Each round runs the length step on the current pmf and then the pmf step
//! on those lengths, until the stationarity conditions in `ℓ` and in `p̂`
//! hold to `tol_kkt`. The problem is not jointly convex, so the result is a
//! first-order point; multi-start keeps the best one.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::age::average_age;
use crate::error::{Error, Result};
use crate::length_solver::{optimal_lengths, LengthSolution};
use crate::pmf_solver::{optimal_pmf, PmfSolution};
use crate::types::{entropy, CodeLengths, Pmf, SolverConfig, DEFAULT_TOL_PROB};

const STALL_WINDOW: usize = 5;
const STALL_TOL: f64 = 1e-10;

/// Which half of a round produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Length,
    Pmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    /// Round index, starting at 1.
    pub iter: usize,
    pub step: Step,
    pub age: f64,
    pub entropy: f64,
    /// Max stationarity residual in the lengths (`NaN` before multipliers exist).
    pub res_lengths: f64,
    /// Max stationarity residual in the pmf (`NaN` before the first pmf step).
    pub res_pmf: f64,
}

/// Age and entropy after every half-step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    pub records: Vec<IterRecord>,
}

impl IterTrace {
    /// Whether the age after each length step never rose once the entropy
    /// constraint was met.
    pub fn age_monotone_after_feasible(&self) -> bool {
        let ages: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.step == Step::Length && r.iter > 1)
            .map(|r| r.age)
            .collect();
        ages.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltMinSolution {
    /// Last pmf step; its pmf is the returned distribution.
    pub pmf: PmfSolution,
    /// Optimal lengths for the returned pmf.
    pub lengths: LengthSolution,
    pub trace: IterTrace,
    /// Both residuals reached `tol_kkt`.
    pub converged: bool,
    /// Completed rounds.
    pub rounds: usize,
    pub res_lengths: f64,
    pub res_pmf: f64,
    /// 0 for the caller's initial pmf, `r` for the r-th random restart.
    pub start: usize,
}

impl AltMinSolution {
    pub fn age(&self) -> f64 {
        self.lengths.lambda
    }
}

/// In-support `(p, ℓ)` pairs and `E[L]` over them.
fn support(p: &Pmf, l: &CodeLengths) -> (Vec<(f64, f64)>, f64) {
    let pairs: Vec<(f64, f64)> = p
        .probs()
        .iter()
        .zip(l.lengths())
        .filter(|(&pi, &li)| pi > DEFAULT_TOL_PROB && li.is_finite())
        .map(|(&pi, &li)| (pi, li))
        .collect();
    let mean = pairs.iter().map(|(pi, li)| pi * li).sum();
    (pairs, mean)
}

/// Value of the Lagrangian restricted to in-support symbols (where the
/// sign multipliers vanish):
///
/// ```text
/// E[L²]/2 + E[L]² − λE[L] + θ(Σ 2^-ℓ − 1) + γ(Σ p log₂ p + β) + σ(Σ p − 1)
/// ```
///
/// `p` is not required to be normalized, so it can be perturbed freely.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian(
    probs: &[f64],
    lengths: &[f64],
    beta: f64,
    lambda: f64,
    theta: f64,
    gamma: f64,
    sigma: f64,
) -> f64 {
    let mean: f64 = probs.iter().zip(lengths).map(|(p, l)| p * l).sum();
    let second: f64 = probs.iter().zip(lengths).map(|(p, l)| p * l * l).sum();
    let kraft: f64 = lengths.iter().map(|l| (-l).exp2()).sum();
    let neg_entropy: f64 = probs.iter().map(|p| p * p.log2()).sum();
    let total: f64 = probs.iter().sum();
    0.5 * second + mean * mean - lambda * mean
        + theta * (kraft - 1.0)
        + gamma * (neg_entropy + beta)
        + sigma * (total - 1.0)
}

/// Per-symbol partial derivatives of [`lagrangian`] in `ℓ_i` and `p̂_i`.
pub fn lagrangian_gradient(
    probs: &[f64],
    lengths: &[f64],
    lambda: f64,
    theta: f64,
    gamma: f64,
    sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mean: f64 = probs.iter().zip(lengths).map(|(p, l)| p * l).sum();
    probs
        .iter()
        .zip(lengths)
        .map(|(&p, &l)| {
            let d_len = p * l + 2.0 * p * mean - lambda * p - theta * LN_2 * (-l).exp2();
            let d_prob =
                0.5 * l * l + 2.0 * l * mean - lambda * l + gamma * (p.log2() + 1.0 / LN_2) + sigma;
            (d_len, d_prob)
        })
        .unzip()
}

/// Max absolute stationarity residuals `(∂𝓛/∂ℓ, ∂𝓛/∂p̂)` over in-support
/// symbols.
pub fn kkt_residuals(
    p: &Pmf,
    l: &CodeLengths,
    lambda: f64,
    theta: f64,
    gamma: f64,
    sigma: f64,
) -> (f64, f64) {
    let (pairs, _) = support(p, l);
    let (probs, lengths): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (d_len, d_prob) = lagrangian_gradient(&probs, &lengths, lambda, theta, gamma, sigma);
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (max_abs(&d_len), max_abs(&d_prob))
}

/// Drops entries at or below `tol_prob` and renormalizes.
fn prune(p: &Pmf, tol_prob: f64) -> Result<Pmf> {
    if p.probs().iter().all(|&x| x == 0.0 || x > tol_prob) {
        return Ok(p.clone());
    }
    Pmf::from_weights(
        p.probs()
            .iter()
            .map(|&x| if x > tol_prob { x } else { 0.0 })
            .collect(),
    )
}

fn check_beta(k: usize, beta: f64) -> Result<()> {
    let max_entropy = (k as f64).log2();
    if !(beta > 0.0) || beta > max_entropy + 1e-12 {
        return Err(Error::infeasible(format!(
            "beta = {beta} is outside (0, log2({k}) = {max_entropy}]"
        )));
    }
    Ok(())
}

/// Alternating minimization from `initial`.
///
/// Stops when both residuals are at most `tol_kkt` (converged), when over
/// five rounds the age has moved less than `1e-10` and the residuals have
/// not shrunk by at least half, or after
/// `cfg.max_iters` rounds. The last two return the final iterate with
/// `converged = false`.
pub fn alternate_minimize(initial: &Pmf, beta: f64, cfg: &SolverConfig) -> Result<AltMinSolution> {
    cfg.validate()?;
    let k = initial.len();
    if k < 2 {
        return Err(Error::infeasible("need at least two partial updates"));
    }
    check_beta(k, beta)?;

    let mut trace = IterTrace::default();
    let mut pmf = prune(initial, cfg.tol_prob)?;
    let mut lsol = optimal_lengths(&pmf, cfg)?;
    trace.records.push(IterRecord {
        iter: 1,
        step: Step::Length,
        age: lsol.lambda,
        entropy: entropy(&pmf),
        res_lengths: f64::NAN,
        res_pmf: f64::NAN,
    });

    let mut ages = vec![lsol.lambda];
    let mut res_hist = vec![f64::INFINITY];
    let mut last_pmf_step = None;
    let mut converged = false;
    let mut rounds = 0;
    let mut residuals = (f64::NAN, f64::NAN);
    for iter in 1..=cfg.max_iters {
        rounds = iter;
        let mut ps = optimal_pmf(&lsol.lengths, beta, lsol.mean_len, lsol.lambda, cfg)?;
        pmf = prune(&ps.pmf, cfg.tol_prob)?;
        ps.pmf = pmf.clone();
        let (r_len, r_pmf) = kkt_residuals(
            &pmf,
            &lsol.lengths,
            lsol.lambda,
            lsol.theta,
            ps.gamma,
            ps.sigma,
        );
        trace.records.push(IterRecord {
            iter,
            step: Step::Pmf,
            age: average_age(&pmf, &lsol.lengths)?.delta,
            entropy: entropy(&pmf),
            res_lengths: r_len,
            res_pmf: r_pmf,
        });

        lsol = optimal_lengths(&pmf, cfg)?;
        residuals = kkt_residuals(
            &pmf,
            &lsol.lengths,
            lsol.lambda,
            lsol.theta,
            ps.gamma,
            ps.sigma,
        );
        trace.records.push(IterRecord {
            iter: iter + 1,
            step: Step::Length,
            age: lsol.lambda,
            entropy: entropy(&pmf),
            res_lengths: residuals.0,
            res_pmf: residuals.1,
        });
        last_pmf_step = Some(ps);
        ages.push(lsol.lambda);
        res_hist.push(residuals.0.max(residuals.1));

        if residuals.0 <= cfg.tol_kkt && residuals.1 <= cfg.tol_kkt {
            converged = true;
            break;
        }
        if ages.len() > STALL_WINDOW {
            let back = ages.len() - 1 - STALL_WINDOW;
            let res_now = residuals.0.max(residuals.1);
            if (lsol.lambda - ages[back]).abs() < STALL_TOL && !(res_now < 0.5 * res_hist[back]) {
                break;
            }
        }
    }

    Ok(AltMinSolution {
        pmf: last_pmf_step.expect("max_iters >= 1"),
        lengths: lsol,
        trace,
        converged,
        rounds,
        res_lengths: residuals.0,
        res_pmf: residuals.1,
        start: 0,
    })
}

/// Uniform-Dirichlet draw over `k` points from stream `(seed, index)`.
pub fn random_pmf(k: usize, seed: u64, index: u64) -> Result<Pmf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let weights = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    Pmf::from_weights(weights)
}

/// Runs [`alternate_minimize`] from `initial` and from `restarts` random
/// pmfs (streams `(cfg.seed, r)`), returning the lowest-age converged
/// solution, or the lowest-age one if none converged.
pub fn alternate_minimize_multistart(
    initial: &Pmf,
    beta: f64,
    restarts: usize,
    cfg: &SolverConfig,
) -> Result<AltMinSolution> {
    let k = initial.len();
    let starts: Vec<Pmf> = std::iter::once(Ok(initial.clone()))
        .chain((1..=restarts).map(|r| random_pmf(k, cfg.seed, r as u64)))
        .collect::<Result<_>>()?;
    let results: Vec<Result<AltMinSolution>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            alternate_minimize(p, beta, cfg).map(|mut s| {
                s.start = i;
                s
            })
        })
        .collect();

    let mut first_err = None;
    let mut best: Option<AltMinSolution> = None;
    for r in results {
        match r {
            Ok(s) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (s.converged && !b.converged)
                            || (s.converged == b.converged && s.age() < b.age())
                    }
                };
                if better {
                    best = Some(s);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}
