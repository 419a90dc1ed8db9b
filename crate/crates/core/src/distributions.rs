//! Source distributions for experiments.

use crate::error::{Error, Result};
use crate::types::{neumaier_sum, Pmf};

/// Zipf(s, n): `p_i ∝ i^-s` for `i = 1..=n`, nonincreasing in `i`.
pub fn zipf(s: f64, n: usize) -> Result<Pmf> {
    if n == 0 {
        return Err(Error::invalid("zipf needs n >= 1"));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!(
            "zipf exponent must be >= 0, got {s}"
        )));
    }
    let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-s)).collect();
    let total = neumaier_sum(weights.iter().copied());
    Pmf::new(weights.into_iter().map(|w| w / total).collect())
}
