//! Domain values shared by every solver: probability vectors, codeword
//! lengths, set partitions and the age statistics computed from them.
//!
//! All logarithms are base 2, so entropies and lengths are in bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p = 1` accepted by [`Pmf::new`].
pub const PMF_SUM_TOL: f64 = 1e-9;
/// Slack on the Kraft inequality accepted by [`CodeLengths::new`].
pub const KRAFT_TOL: f64 = 1e-9;
/// Default threshold below which a probability counts as zero.
pub const DEFAULT_TOL_PROB: f64 = 1e-12;

/// A probability mass function over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates `probs`: non-empty, finite, non-negative, summing to 1
    /// within [`PMF_SUM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("pmf must have at least one entry"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::invalid(format!(
                "pmf entry {i} = {p} is not a probability"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::invalid(format!("pmf sums to {sum}, not 1")));
        }
        Ok(Pmf { probs })
    }

    /// Normalizes non-negative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let total = neumaier_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        Pmf::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("uniform pmf needs k >= 1"));
        }
        Ok(Pmf {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Number of entries strictly above `tol_prob`.
    pub fn support_size(&self, tol_prob: f64) -> usize {
        self.probs.iter().filter(|&&p| p > tol_prob).count()
    }

    /// True when entries are nonincreasing.
    pub fn is_sorted_desc(&self) -> bool {
        self.probs.windows(2).all(|w| w[0] >= w[1])
    }

    /// Entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy(self)
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.probs
    }
}

/// Real-valued codeword lengths in bits. `f64::INFINITY` marks a symbol
/// that is never transmitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LengthRepr>", into = "Vec<LengthRepr>")]
pub struct CodeLengths {
    lengths: Vec<f64>,
}

impl CodeLengths {
    /// Validates entries and the Kraft inequality `Σ 2^-ℓ ≤ 1`.
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        let l = CodeLengths::new_relaxed(lengths)?;
        let kraft = kraft_sum(&l);
        if kraft > 1.0 + KRAFT_TOL {
            return Err(Error::invalid(format!("Kraft sum {kraft} exceeds 1")));
        }
        Ok(l)
    }

    /// Validates entries only (finite and > 0, or +∞). Used for trial points
    /// of the solvers and for rounded lengths read from files, which may
    /// overshoot the Kraft bound slightly.
    pub fn new_relaxed(lengths: Vec<f64>) -> Result<Self> {
        if let Some((i, l)) = lengths
            .iter()
            .enumerate()
            .find(|(_, l)| l.is_nan() || **l <= 0.0)
        {
            return Err(Error::invalid(format!("length {i} = {l} must be positive")));
        }
        Ok(CodeLengths { lengths })
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn finite_count(&self) -> usize {
        self.lengths.iter().filter(|l| l.is_finite()).count()
    }

    pub fn kraft_sum(&self) -> f64 {
        kraft_sum(self)
    }
}

/// JSON form of a single length: a number, or the string `"inf"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthRepr {
    Finite(f64),
    Text(String),
}

impl TryFrom<Vec<LengthRepr>> for CodeLengths {
    type Error = Error;

    fn try_from(v: Vec<LengthRepr>) -> Result<Self> {
        let lengths = v
            .into_iter()
            .map(|r| match r {
                LengthRepr::Finite(x) => Ok(x),
                LengthRepr::Text(s) => match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                    _ => Err(Error::invalid(format!("unrecognized length {s:?}"))),
                },
            })
            .collect::<Result<Vec<_>>>()?;
        CodeLengths::new_relaxed(lengths)
    }
}

impl From<CodeLengths> for Vec<LengthRepr> {
    fn from(l: CodeLengths) -> Self {
        l.lengths
            .into_iter()
            .map(|x| {
                if x.is_infinite() {
                    LengthRepr::Text("inf".to_owned())
                } else {
                    LengthRepr::Finite(x)
                }
            })
            .collect()
    }
}

/// A set partition of `n` source symbols into `k` non-empty blocks, stored
/// as a restricted-growth string: `assignment[i]` is the zero-based block of
/// symbol `i`, and blocks are numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    assignment: Vec<u32>,
    blocks: u32,
}

impl Partition {
    /// Accepts an assignment that is already a canonical restricted-growth
    /// string.
    pub fn from_rgs(assignment: Vec<u32>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::invalid("partition of an empty set"));
        }
        let mut next = 0u32;
        for (i, &b) in assignment.iter().enumerate() {
            if b > next {
                return Err(Error::invalid(format!(
                    "position {i} uses block {b} before block {next}"
                )));
            }
            if b == next {
                next += 1;
            }
        }
        Ok(Partition {
            assignment,
            blocks: next,
        })
    }

    /// Relabels arbitrary block labels into canonical form.
    pub fn canonicalize(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("partition of an empty set"));
        }
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len() as u32;
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Ok(Partition {
            assignment,
            blocks: map.len() as u32,
        })
    }

    /// Builds a partition from explicit zero-based blocks of symbol indices.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (b, members) in blocks.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::invalid(format!("block {b} is empty")));
            }
            for &i in members {
                if i >= n {
                    return Err(Error::invalid(format!(
                        "symbol {i} out of range for n = {n}"
                    )));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::invalid(format!("symbol {i} appears in two blocks")));
                }
                labels[i] = b;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::invalid(format!("symbol {i} is not covered")));
        }
        Partition::canonicalize(&labels)
    }

    /// All `n` symbols in one block.
    pub fn single_block(n: usize) -> Result<Self> {
        Partition::from_rgs(vec![0; n])
    }

    /// Every symbol in its own block.
    pub fn identity(n: usize) -> Result<Self> {
        Partition::from_rgs((0..n as u32).collect())
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Number of source symbols.
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.blocks as usize
    }

    /// Zero-based member indices of each block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &b) in self.assignment.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }

    /// One-based restricted-growth string, e.g. `"11111123"`. Labels are
    /// dash-separated once `k > 9`.
    pub fn rgs_string(&self) -> String {
        let labels = self.assignment.iter().map(|b| (b + 1).to_string());
        if self.blocks > 9 {
            labels.collect::<Vec<_>>().join("-")
        } else {
            labels.collect()
        }
    }
}

impl fmt::Display for Partition {
    /// Block notation with one-based symbol names, e.g. `{{x1},{x2},{x3,x4}}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<String> = self
            .blocks()
            .iter()
            .map(|b| {
                let names: Vec<String> = b.iter().map(|i| format!("x{}", i + 1)).collect();
                format!("{{{}}}", names.join(","))
            })
            .collect();
        write!(f, "{{{}}}", blocks.join(","))
    }
}

/// Service-time moments and the long-term average age they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeStats {
    pub mean_len: f64,
    pub second_moment: f64,
    pub delta: f64,
}

impl AgeStats {
    /// `delta = E[L²] / (2 E[L]) + E[L]`.
    pub fn from_moments(mean_len: f64, second_moment: f64) -> Self {
        AgeStats {
            mean_len,
            second_moment,
            delta: second_moment / (2.0 * mean_len) + mean_len,
        }
    }
}

/// Tolerances and limits shared by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Residual target for one-dimensional root finding.
    pub tol_root: f64,
    /// Target for the stationarity residuals.
    pub tol_kkt: f64,
    /// Probabilities at or below this are treated as zero.
    pub tol_prob: f64,
    /// Outer iteration cap of the alternating minimization.
    pub max_iters: usize,
    pub seed: u64,
    /// Recompute `E[L]` self-consistently inside the pmf step instead of
    /// freezing it at the length step's value.
    pub fixed_point_mean_len: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_root: 1e-10,
            tol_kkt: 1e-6,
            tol_prob: DEFAULT_TOL_PROB,
            max_iters: 5000,
            seed: 0,
            fixed_point_mean_len: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("tol_root", self.tol_root),
            ("tol_kkt", self.tol_kkt),
            ("tol_prob", self.tol_prob),
        ];
        for (name, t) in tols {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {t}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        Ok(())
    }
}

/// Shannon entropy in bits; zero-probability terms contribute nothing.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum();
    h.max(0.0)
}

/// Sum of `2^-ℓ` over finite lengths.
pub fn kraft_sum(l: &CodeLengths) -> f64 {
    kraft_of(l.lengths())
}

pub(crate) fn kraft_of(lengths: &[f64]) -> f64 {
    lengths
        .iter()
        .filter(|l| l.is_finite())
        .map(|&l| (-l).exp2())
        .sum()
}

/// Probability of each block: the sum of its members' probabilities.
pub fn induced_pmf(part: &Partition, p: &Pmf) -> Result<Pmf> {
    if part.n() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: part.n(),
            got: p.len(),
        });
    }
    let mut block = vec![0.0; part.k()];
    for (&b, &pi) in part.assignment().iter().zip(p.probs()) {
        block[b as usize] += pi;
    }
    Pmf::new(block)
}

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
