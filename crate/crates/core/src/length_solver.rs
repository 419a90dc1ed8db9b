//! Age-optimal real-valued codeword lengths for a fixed pmf.
//!
//! The ratio objective `E[L²]/(2E[L]) + E[L]` is handled parametrically:
//! for a trial age `λ`, the inner problem
//!
//! ```text
//!   p(λ) = min_ℓ  E[L²]/2 + E[L]² − λ E[L]   s.t.  Σ 2^-ℓ_i ≤ 1
//! ```
//!
//! is convex in `ℓ`. Its stationary point with an active Kraft constraint
//! (multiplier `θ ≥ 0`) is
//!
//! ```text
//!   ℓ_i = (λ − 2θ ln2)/3 + W₀( θ ln²2 / p_i · 2^((2θ ln2 − λ)/3) ) / ln2
//! ```
//!
//! `θ` is fixed by `Σ 2^-ℓ_i = 1`, and `p(λ)` is decreasing with its root at
//! the optimal age. Both unknowns are found by safeguarded Newton iteration.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::lambert_w0_of_exp;
use crate::types::{entropy, CodeLengths, Pmf, SolverConfig};

const ROOT_ITERS: usize = 300;

/// Optimal lengths for one pmf together with the parametric multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSolution {
    pub lengths: CodeLengths,
    /// Optimal average age `Δ* = λ`.
    pub lambda: f64,
    /// Kraft multiplier.
    pub theta: f64,
    pub mean_len: f64,
}

impl LengthSolution {
    /// `|Σ 2^-ℓ − 1|`.
    pub fn kraft_residual(&self) -> f64 {
        (self.lengths.kraft_sum() - 1.0).abs()
    }

    /// `|E[L] − (λ + θ ln2)/3|`.
    pub fn mean_len_residual(&self) -> f64 {
        (self.mean_len - (self.lambda + self.theta * LN_2) / 3.0).abs()
    }
}

/// Positions and probabilities of the entries above `tol_prob`.
#[derive(Debug, Clone)]
pub(crate) struct Support {
    pub index: Vec<usize>,
    pub probs: Vec<f64>,
}

impl Support {
    pub fn of(p: &Pmf, tol_prob: f64) -> Self {
        let (index, probs) = p
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > tol_prob)
            .map(|(i, &x)| (i, x))
            .unzip();
        Support { index, probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// Scatters support values into a full-length vector, `∞` elsewhere.
    pub fn scatter(&self, n: usize, values: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; n];
        for (&i, &v) in self.index.iter().zip(values) {
            out[i] = v;
        }
        out
    }
}

fn fill_lengths(probs: &[f64], lambda: f64, theta: f64, out: &mut Vec<f64>) {
    out.clear();
    let shift = (2.0 * theta * LN_2 - lambda) / 3.0;
    let ln_scale = (theta * LN_2 * LN_2).ln() + shift * LN_2;
    out.extend(probs.iter().map(|&p| {
        let w = if theta == 0.0 {
            0.0
        } else {
            lambert_w0_of_exp(ln_scale - p.ln())
        };
        w / LN_2 - shift
    }));
}

/// Kraft sum at `(λ, θ)` and its derivative in `θ`, leaving the lengths in
/// `scratch`. Uses `dW/dz = W / (z (1 + W))`.
fn kraft_and_slope(probs: &[f64], lambda: f64, theta: f64, scratch: &mut Vec<f64>) -> (f64, f64) {
    fill_lengths(probs, lambda, theta, scratch);
    let shift = (2.0 * theta * LN_2 - lambda) / 3.0;
    let dlnz = 1.0 / theta + 2.0 * LN_2 * LN_2 / 3.0;
    let mut kraft = 0.0;
    let mut slope = 0.0;
    for &l in scratch.iter() {
        let t = (-l).exp2();
        let w = (l + shift) * LN_2;
        let dl = -2.0 * LN_2 / 3.0 + w / (1.0 + w) * dlnz / LN_2;
        kraft += t;
        slope -= LN_2 * t * dl;
    }
    (kraft, slope)
}

/// Safeguarded Newton on `Kraft(θ) = 1`. `None` when the constraint is slack
/// at `θ = 0`.
fn theta_root(probs: &[f64], lambda: f64, tol_root: f64) -> Result<Option<f64>> {
    let mut scratch = Vec::with_capacity(probs.len());
    let at_zero = probs.len() as f64 * (-lambda / 3.0).exp2();
    if at_zero < 1.0 {
        return Ok(None);
    }
    if at_zero == 1.0 {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let (k, _) = kraft_and_slope(probs, lambda, hi, &mut scratch);
        if k < 1.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoRoot {
                what: "Kraft(theta) = 1",
                lo: 0.0,
                hi,
            });
        }
    }
    let target = 1e-3 * tol_root;
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..ROOT_ITERS {
        let (k, slope) = kraft_and_slope(probs, lambda, theta, &mut scratch);
        if (k - 1.0).abs() <= target {
            return Ok(Some(theta));
        }
        if k > 1.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = theta - (k - 1.0) / slope;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next <= lo || next >= hi || next == theta {
            return Ok(Some(theta));
        }
        theta = next;
    }
    Ok(Some(theta))
}

/// Minimizer of the inner problem at a fixed `λ`.
#[derive(Debug, Clone)]
pub(crate) struct Inner {
    pub theta: f64,
    pub lengths: Vec<f64>,
    pub mean: f64,
    pub value: f64,
}

pub(crate) fn inner_solution(probs: &[f64], lambda: f64, tol_root: f64) -> Result<Inner> {
    // With the Kraft constraint slack, θ = 0 and every length is λ/3.
    let theta = theta_root(probs, lambda, tol_root)?.unwrap_or(0.0);
    let mut lengths = Vec::with_capacity(probs.len());
    fill_lengths(probs, lambda, theta, &mut lengths);
    let mean: f64 = probs.iter().zip(&lengths).map(|(p, l)| p * l).sum();
    let second: f64 = probs.iter().zip(&lengths).map(|(p, l)| p * l * l).sum();
    Ok(Inner {
        theta,
        lengths,
        mean,
        value: 0.5 * second + mean * mean - lambda * mean,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Closed-form stationary lengths at a given `(λ, θ)`. Entries with
/// probability at or below `tol_prob` get `∞`.
pub fn lengths_from_lambda_theta(
    p: &Pmf,
    lambda: f64,
    theta: f64,
    cfg: &SolverConfig,
) -> Result<CodeLengths> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::invalid(format!("theta must be >= 0, got {theta}")));
    }
    if !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be finite, got {lambda}"
        )));
    }
    let support = Support::of(p, cfg.tol_prob);
    let mut values = Vec::new();
    fill_lengths(&support.probs, lambda, theta, &mut values);
    CodeLengths::new_relaxed(support.scatter(p.len(), &values))
}

/// The Kraft multiplier `θ ≥ 0` making the stationary lengths at `λ` satisfy
/// `Σ 2^-ℓ = 1`.
pub fn solve_theta_for_kraft(p: &Pmf, lambda: f64, cfg: &SolverConfig) -> Result<f64> {
    check_lambda(lambda)?;
    let support = Support::of(p, cfg.tol_prob);
    if support.len() == 0 {
        return Err(Error::infeasible("pmf has no support"));
    }
    theta_root(&support.probs, lambda, cfg.tol_root)?.ok_or(Error::NoRoot {
        what: "Kraft(theta) = 1",
        lo: 0.0,
        hi: f64::INFINITY,
    })
}

/// `p(λ) = E[L²]/2 + E[L]² − λE[L]` at the inner minimizer.
pub fn p_of_lambda(p: &Pmf, lambda: f64, cfg: &SolverConfig) -> Result<f64> {
    check_lambda(lambda)?;
    let support = Support::of(p, cfg.tol_prob);
    if support.len() == 0 {
        return Err(Error::infeasible("pmf has no support"));
    }
    Ok(inner_solution(&support.probs, lambda, cfg.tol_root)?.value)
}

/// Age-optimal real-valued lengths for `p`: the root `λ*` of `p(λ)` with
/// its Kraft multiplier. Needs at least two symbols above `tol_prob`.
pub fn optimal_lengths(p: &Pmf, cfg: &SolverConfig) -> Result<LengthSolution> {
    cfg.validate()?;
    let support = Support::of(p, cfg.tol_prob);
    let k = support.len();
    if k < 2 {
        return Err(Error::infeasible(format!(
            "need at least two symbols with positive probability, got {k}"
        )));
    }
    let probs = &support.probs;
    let max_len = ((k as f64).log2().ceil() + 10.0).max(1.0);
    let mut lo = (1.5 * entropy(p)).max(f64::MIN_POSITIVE);
    let mut hi = 1.5 * max_len;

    let f_hi = inner_solution(probs, hi, cfg.tol_root)?.value;
    if f_hi > 0.0 {
        return Err(Error::NoRoot {
            what: "p(lambda) = 0",
            lo,
            hi,
        });
    }
    // p is concave with slope −E[L], so Newton from the right end stays
    // right of the root; bisection covers any step that leaves the bracket.
    let target = 1e-3 * cfg.tol_root;
    let mut lambda = hi;
    let mut best = None;
    for _ in 0..ROOT_ITERS {
        let inner = inner_solution(probs, lambda, cfg.tol_root)?;
        if inner.value > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda + inner.value / inner.mean;
        let done = inner.value.abs() <= target || hi - lo <= f64::EPSILON * hi;
        best = Some((lambda, inner));
        if done {
            break;
        }
        lambda = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let (lambda, inner) = best.expect("at least one bisection step");
    if inner.value.abs() > cfg.tol_root {
        return Err(Error::NonConvergence {
            what: "p(lambda) root",
            iters: ROOT_ITERS,
            residual: inner.value.abs(),
        });
    }
    Ok(LengthSolution {
        lengths: CodeLengths::new_relaxed(support.scatter(p.len(), &inner.lengths))?,
        lambda,
        theta: inner.theta,
        mean_len: inner.mean,
    })
}
