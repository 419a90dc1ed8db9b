//! Age-optimal partial-update pmf for fixed codeword lengths, subject to
//! `H(p̂) = β` and `Σ p̂ = 1`.
//!
//! Stationarity in `p̂_i` gives a Gibbs family
//!
//! ```text
//!   p̂_i = 2^((A_i − σ)/γ − 1/ln2),   A_i = −½ℓ_i² − 2E[L]ℓ_i + λℓ_i,
//! ```
//!
//! where `σ` normalizes and `γ` selects the entropy. On each sign of `γ`
//! the entropy rises monotonically from the concentrated limit (`|γ| → 0`)
//! to `log₂ k` (`|γ| → ∞`), so `γ` is found by bracketing each sign and
//! bisecting in `ln |γ|`. The sign with the lower objective wins.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{entropy_of, CodeLengths, Pmf, SolverConfig};

const SCAN_STEPS: usize = 400;
const BISECT_ITERS: usize = 400;

/// Result of one pmf step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfSolution {
    pub pmf: Pmf,
    /// Entropy multiplier.
    pub gamma: f64,
    /// Normalization multiplier.
    pub sigma: f64,
    /// `E[L]` inside the exponents.
    pub mean_len_used: f64,
    /// `λ` inside the exponents.
    pub lambda_used: f64,
}

impl PmfSolution {
    /// Max over in-support symbols of
    /// `|½ℓ² + 2ℓE[L] − λℓ + γ(log₂ p̂ + 1/ln2) + σ|` with the exponents'
    /// `E[L]` and `λ`.
    pub fn stationarity_residual(&self, l: &CodeLengths, tol_prob: f64) -> f64 {
        self.pmf
            .probs()
            .iter()
            .zip(l.lengths())
            .filter(|(&p, _)| p > tol_prob)
            .map(|(&p, &li)| {
                let grad = 0.5 * li * li + 2.0 * li * self.mean_len_used - self.lambda_used * li;
                (grad + self.gamma * (p.log2() + 1.0 / LN_2) + self.sigma).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Finite lengths and their positions.
struct Finite {
    index: Vec<usize>,
    lengths: Vec<f64>,
}

impl Finite {
    fn of(l: &CodeLengths) -> Self {
        let (index, lengths) = l
            .lengths()
            .iter()
            .enumerate()
            .filter(|(_, x)| x.is_finite())
            .map(|(i, &x)| (i, x))
            .unzip();
        Finite { index, lengths }
    }

    fn exponents(&self, mean_len: f64, lambda: f64) -> Vec<f64> {
        self.lengths
            .iter()
            .map(|&l| -0.5 * l * l - 2.0 * mean_len * l + lambda * l)
            .collect()
    }

    fn scatter(&self, n: usize, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &v) in self.index.iter().zip(values) {
            out[i] = v;
        }
        out
    }
}

fn check_inputs(gamma: f64, mean_len: f64, lambda: f64) -> Result<()> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "gamma must be finite and non-zero, got {gamma}"
        )));
    }
    if !mean_len.is_finite() || !lambda.is_finite() {
        return Err(Error::invalid("mean_len and lambda must be finite"));
    }
    Ok(())
}

/// `log₂ Σ 2^(A_i/γ)`, shifted by the largest term.
fn log2_partition(exps: &[f64], gamma: f64) -> f64 {
    let top = exps
        .iter()
        .map(|a| a / gamma)
        .fold(f64::NEG_INFINITY, f64::max);
    let rest: f64 = exps.iter().map(|a| (a / gamma - top).exp2()).sum();
    top + rest.log2()
}

/// Normalized Gibbs weights `2^(A_i/γ) / Σ_j 2^(A_j/γ)`.
fn gibbs(exps: &[f64], gamma: f64) -> Vec<f64> {
    let top = exps
        .iter()
        .map(|a| a / gamma)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = exps.iter().map(|a| (a / gamma - top).exp2()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `σ = (γ/ln2)(ln R − 1)`, `R = Σ 2^(A_i/γ)`: the normalizer that makes
/// the pmf sum to one.
pub fn normalize_sigma(l: &CodeLengths, gamma: f64, mean_len: f64, lambda: f64) -> Result<f64> {
    check_inputs(gamma, mean_len, lambda)?;
    let finite = Finite::of(l);
    if finite.lengths.is_empty() {
        return Err(Error::infeasible("no finite lengths"));
    }
    let exps = finite.exponents(mean_len, lambda);
    let ln_r = log2_partition(&exps, gamma) * LN_2;
    Ok(gamma / LN_2 * (ln_r - 1.0))
}

/// Evaluates `p̂_i = 2^((A_i − σ)/γ − 1/ln2)`; symbols with infinite length
/// get zero. Fails unless `σ` normalizes the result.
pub fn pmf_from_gamma_sigma(
    l: &CodeLengths,
    gamma: f64,
    sigma: f64,
    mean_len: f64,
    lambda: f64,
) -> Result<Pmf> {
    check_inputs(gamma, mean_len, lambda)?;
    let finite = Finite::of(l);
    let probs: Vec<f64> = finite
        .exponents(mean_len, lambda)
        .iter()
        .map(|a| ((a - sigma) / gamma - 1.0 / LN_2).exp2())
        .collect();
    Pmf::new(finite.scatter(l.len(), &probs))
}

/// One sign of γ: `(γ, weights)` with entropy within tolerance of `target`,
/// or `None` when the entropy cannot reach `target` on this side.
fn solve_side(
    exps: &[f64],
    sign: f64,
    target: f64,
    tol: f64,
    scale: f64,
) -> Option<(f64, Vec<f64>)> {
    let h = |g: f64| entropy_of(&gibbs(exps, sign * g));
    let mut lo = scale;
    let mut steps = 0;
    while h(lo) >= target {
        lo /= 16.0;
        steps += 1;
        if steps > SCAN_STEPS || lo == 0.0 {
            return None;
        }
    }
    let mut hi = scale;
    steps = 0;
    while h(hi) < target {
        hi *= 16.0;
        steps += 1;
        if steps > SCAN_STEPS || !hi.is_finite() {
            return None;
        }
    }
    let mut best = (hi, h(hi));
    for _ in 0..BISECT_ITERS {
        let mid = (lo * hi).sqrt();
        let hm = h(mid);
        if (hm - target).abs() < (best.1 - target).abs() {
            best = (mid, hm);
        }
        if (hm - target).abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if hm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = sign * best.0;
    Some((gamma, gibbs(exps, gamma)))
}

fn objective(weights: &[f64], lengths: &[f64], lambda: f64) -> f64 {
    let mean: f64 = weights.iter().zip(lengths).map(|(p, l)| p * l).sum();
    let second: f64 = weights.iter().zip(lengths).map(|(p, l)| p * l * l).sum();
    0.5 * second + mean * mean - lambda * mean
}

/// `(γ, weights on the finite support)` for frozen `E[L]` and `λ`.
fn frozen_step(
    finite: &Finite,
    beta: f64,
    mean_len: f64,
    lambda: f64,
    tol_root: f64,
) -> Result<(f64, Vec<f64>)> {
    let k = finite.lengths.len();
    let max_entropy = (k as f64).log2();
    let exps = finite.exponents(mean_len, lambda);
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = exps.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = top - bottom;

    if spread <= 1e-14 * (1.0 + top.abs().max(bottom.abs())) {
        if (beta - max_entropy).abs() <= tol_root {
            return Ok((1.0, vec![1.0 / k as f64; k]));
        }
        return Err(Error::infeasible(format!(
            "all exponents are equal, so the entropy is fixed at log2({k}) = {max_entropy}"
        )));
    }

    // β = log₂ k is only reached in the limit; aim just inside it, and
    // return the uniform pmf itself when β is within tolerance of the top.
    let at_max = beta >= max_entropy - tol_root;
    let target = beta.min(max_entropy - 0.5 * tol_root);
    let tol = 0.1 * tol_root;
    let candidates: Vec<(f64, Vec<f64>)> = [1.0, -1.0]
        .into_iter()
        .filter_map(|sign| solve_side(&exps, sign, target, tol, spread))
        .map(|(g, w)| {
            if at_max {
                (g, vec![1.0 / k as f64; k])
            } else {
                (g, w)
            }
        })
        .collect();
    candidates
        .into_iter()
        .min_by(|a, b| {
            objective(&a.1, &finite.lengths, lambda).total_cmp(&objective(
                &b.1,
                &finite.lengths,
                lambda,
            ))
        })
        .ok_or_else(|| {
            Error::infeasible(format!("entropy {beta} is unreachable for these lengths"))
        })
}

/// Age-optimal pmf for fixed lengths under `H(p̂) = β`.
///
/// `mean_len` and `lambda` come from the latest length step. With
/// `cfg.fixed_point_mean_len`, `E[L]` is instead iterated to
/// self-consistency with the returned pmf.
pub fn optimal_pmf(
    l: &CodeLengths,
    beta: f64,
    mean_len: f64,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<PmfSolution> {
    cfg.validate()?;
    if !mean_len.is_finite() || !lambda.is_finite() {
        return Err(Error::invalid("mean_len and lambda must be finite"));
    }
    let finite = Finite::of(l);
    let k = finite.lengths.len();
    if k < 2 {
        return Err(Error::infeasible(format!(
            "need at least two finite lengths, got {k}"
        )));
    }
    let max_entropy = (k as f64).log2();
    if !(beta > 0.0) || beta > max_entropy + 1e-12 {
        return Err(Error::infeasible(format!(
            "beta = {beta} is outside (0, log2({k}) = {max_entropy}]"
        )));
    }
    let beta = beta.min(max_entropy);

    let mut mean_used = mean_len;
    let (mut gamma, mut weights) = frozen_step(&finite, beta, mean_used, lambda, cfg.tol_root)?;
    if cfg.fixed_point_mean_len {
        for _ in 0..cfg.max_iters {
            let mean: f64 = weights
                .iter()
                .zip(&finite.lengths)
                .map(|(p, l)| p * l)
                .sum();
            if (mean - mean_used).abs() < cfg.tol_root {
                break;
            }
            mean_used = mean;
            (gamma, weights) = frozen_step(&finite, beta, mean_used, lambda, cfg.tol_root)?;
        }
    }
    let sigma = normalize_sigma(l, gamma, mean_used, lambda)?;
    Ok(PmfSolution {
        pmf: Pmf::new(finite.scatter(l.len(), &weights))?,
        gamma,
        sigma,
        mean_len_used: mean_used,
        lambda_used: lambda,
    })
}
