//! Average Age of Information for a zero-wait, generate-at-will link whose
//! service time for symbol `i` is its codeword length `ℓ_i`.
//!
//! The analytic value is `Δ = E[S²] / (2 E[S]) + E[S]`. The simulator
//! draws i.i.d. symbols, accumulates the sawtooth area
//! `½ Σ s_i² + Σ s_i s_{i+1}` and divides by the horizon, which ends at the
//! last departure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{AgeStats, CodeLengths, Pmf, DEFAULT_TOL_PROB};

/// Updates per simulation shard. Fixed so the random streams, and hence the
/// result, do not depend on the worker count.
const SHARD_LEN: u64 = 1 << 16;

/// In-support `(p, ℓ)` pairs, rejecting a positive-probability symbol with
/// an infinite length.
fn support_pairs(p: &Pmf, l: &CodeLengths) -> Result<Vec<(f64, f64)>> {
    if p.len() != l.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: l.len(),
        });
    }
    let mut pairs = Vec::with_capacity(p.len());
    for (i, (&pi, &li)) in p.probs().iter().zip(l.lengths()).enumerate() {
        if pi == 0.0 || (li.is_infinite() && pi <= DEFAULT_TOL_PROB) {
            continue;
        }
        if li.is_infinite() {
            return Err(Error::infeasible(format!(
                "symbol {i} has probability {pi} but infinite length"
            )));
        }
        pairs.push((pi, li));
    }
    Ok(pairs)
}

/// First and second moments of the service time and the average age.
pub fn average_age(p: &Pmf, l: &CodeLengths) -> Result<AgeStats> {
    let pairs = support_pairs(p, l)?;
    let mean: f64 = pairs.iter().map(|(pi, li)| pi * li).sum();
    let second: f64 = pairs.iter().map(|(pi, li)| pi * li * li).sum();
    if !(mean > 0.0) {
        return Err(Error::infeasible("mean service time is zero"));
    }
    Ok(AgeStats::from_moments(mean, second))
}

/// Time-average age over `[0, T]` after the service times `s` have
/// completed, with residual `r = T − Σ s`:
/// `(½ Σ s_i² + Σ s_i s_{i+1} + r²/2 + s_m r / 2) / T`.
pub fn finite_horizon_age(service_times: &[f64], horizon: f64) -> Result<f64> {
    if let Some(s) = service_times
        .iter()
        .find(|s| !(**s > 0.0) || !s.is_finite())
    {
        return Err(Error::invalid(format!(
            "service time {s} must be positive and finite"
        )));
    }
    let total: f64 = service_times.iter().sum();
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let r = horizon - total;
    if r < -1e-12 * total.max(1.0) {
        return Err(Error::invalid(format!(
            "horizon {horizon} is shorter than total service time {total}"
        )));
    }
    let r = r.max(0.0);
    let squares: f64 = service_times.iter().map(|s| s * s).sum();
    let cross: f64 = service_times.windows(2).map(|w| w[0] * w[1]).sum();
    let last = service_times.last().copied().unwrap_or(0.0);
    Ok((0.5 * squares + cross + 0.5 * r * r + 0.5 * last * r) / horizon)
}

#[derive(Debug, Clone, Copy)]
struct ShardSums {
    total: f64,
    squares: f64,
    cross: f64,
    first: f64,
    last: f64,
}

/// Inverse-CDF sampler over a pmf's cumulative vector.
struct Sampler {
    cumulative: Vec<f64>,
    lengths: Vec<f64>,
}

impl Sampler {
    fn new(pairs: &[(f64, f64)]) -> Self {
        let mut acc = 0.0;
        let cumulative = pairs
            .iter()
            .map(|(p, _)| {
                acc += p;
                acc
            })
            .collect();
        Sampler {
            cumulative,
            lengths: pairs.iter().map(|(_, l)| *l).collect(),
        }
    }

    fn draw(&self, u: f64) -> f64 {
        let u = u * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.lengths[idx.min(self.lengths.len() - 1)]
    }
}

fn run_shard(sampler: &Sampler, seed: u64, shard: u64, count: u64) -> ShardSums {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut sums = ShardSums {
        total: 0.0,
        squares: 0.0,
        cross: 0.0,
        first: 0.0,
        last: 0.0,
    };
    for j in 0..count {
        let s = sampler.draw(rng.gen::<f64>());
        if j == 0 {
            sums.first = s;
        } else {
            sums.cross += sums.last * s;
        }
        sums.total += s;
        sums.squares += s * s;
        sums.last = s;
    }
    sums
}

/// Monte-Carlo estimate of the average age from `num_updates` i.i.d.
/// symbols. The horizon ends at the last departure. Deterministic in
/// `seed`; shards draw from stream `(seed, shard index)` and the cross
/// terms at shard boundaries are stitched in order.
pub fn simulate_age(p: &Pmf, l: &CodeLengths, num_updates: u64, seed: u64) -> Result<f64> {
    if num_updates == 0 {
        return Err(Error::invalid("num_updates must be >= 1"));
    }
    // Same feasibility checks as the analytic value.
    average_age(p, l)?;
    let pairs = support_pairs(p, l)?;
    let sampler = Sampler::new(&pairs);
    let shards = num_updates.div_ceil(SHARD_LEN);
    let sums: Vec<ShardSums> = (0..shards)
        .into_par_iter()
        .map(|j| {
            let count = SHARD_LEN.min(num_updates - j * SHARD_LEN);
            run_shard(&sampler, seed, j, count)
        })
        .collect();

    let mut total = 0.0;
    let mut squares = 0.0;
    let mut cross = 0.0;
    let mut prev_last: Option<f64> = None;
    for s in &sums {
        total += s.total;
        squares += s.squares;
        cross += s.cross;
        if let Some(last) = prev_last {
            cross += last * s.first;
        }
        prev_last = Some(s.last);
    }
    Ok((0.5 * squares + cross) / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    fn len(v: &[f64]) -> CodeLengths {
        CodeLengths::new_relaxed(v.to_vec()).unwrap()
    }

    #[test]
    fn average_age_examples() {
        let a = average_age(&pmf(&[0.5, 0.5]), &len(&[1.0, 1.0])).unwrap();
        assert!((a.delta - 1.5).abs() < 1e-15);

        let a = average_age(&pmf(&[0.5, 0.25, 0.25]), &len(&[1.0, 2.0, 2.0])).unwrap();
        assert!((a.mean_len - 1.5).abs() < 1e-15);
        assert!((a.second_moment - 2.5).abs() < 1e-15);
        assert!((a.delta - 7.0 / 3.0).abs() < 1e-15);

        let a = average_age(&pmf(&[1.0]), &len(&[2.0])).unwrap();
        assert_eq!(a.delta, 3.0);
    }

    #[test]
    fn average_age_skips_unused_symbols() {
        let a = average_age(&pmf(&[0.5, 0.5, 0.0]), &len(&[1.0, 1.0, f64::INFINITY])).unwrap();
        assert!((a.delta - 1.5).abs() < 1e-15);
    }

    #[test]
    fn average_age_errors() {
        assert!(matches!(
            average_age(&pmf(&[0.5, 0.5]), &len(&[1.0, f64::INFINITY])),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            average_age(&pmf(&[0.5, 0.5]), &len(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(average_age(&pmf(&[1.0, 0.0]), &len(&[f64::INFINITY, 1.0])).is_err());
    }

    #[test]
    fn finite_horizon_examples() {
        assert!((finite_horizon_age(&[1.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((finite_horizon_age(&[1.0, 1.0], 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((finite_horizon_age(&[2.0], 3.0).unwrap() - 3.5 / 3.0).abs() < 1e-15);
        assert!(finite_horizon_age(&[2.0, 2.0], 3.0).is_err());
        assert!(finite_horizon_age(&[0.0], 3.0).is_err());
    }

    #[test]
    fn simulate_deterministic_service() {
        // One symbol of length 2: area 2m + 4(m-1) over horizon 2m.
        let m = 10_000u64;
        let got = simulate_age(&pmf(&[1.0]), &len(&[2.0]), m, 7).unwrap();
        assert!((got - (3.0 - 2.0 / m as f64)).abs() < 1e-12);
        let got = simulate_age(&pmf(&[1.0]), &len(&[1.0]), 1, 7).unwrap();
        assert_eq!(got, 0.5);
    }

    #[test]
    fn simulate_matches_sequential_definition() {
        // Re-derive the same draws sequentially and evaluate the horizon formula.
        let p = pmf(&[0.5, 0.3, 0.2]);
        let l = len(&[1.0, 2.0, 3.0]);
        let m = 3 * SHARD_LEN + 17;
        let sampler = Sampler::new(&support_pairs(&p, &l).unwrap());
        let mut draws = Vec::new();
        for j in 0..m.div_ceil(SHARD_LEN) {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            rng.set_stream(j);
            for _ in 0..SHARD_LEN.min(m - j * SHARD_LEN) {
                draws.push(sampler.draw(rng.gen::<f64>()));
            }
        }
        let total: f64 = draws.iter().sum();
        let expected = finite_horizon_age(&draws, total).unwrap();
        let got = simulate_age(&p, &l, m, 11).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn simulate_is_reproducible_and_close() {
        let p = pmf(&[0.5, 0.5]);
        let l = len(&[1.0, 2.0]);
        let a = simulate_age(&p, &l, 1_000_000, 3).unwrap();
        let b = simulate_age(&p, &l, 1_000_000, 3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let exact = average_age(&p, &l).unwrap().delta;
        assert!((a - exact).abs() / exact < 0.01);
    }

    #[test]
    fn sampler_never_draws_zero_mass() {
        let s = Sampler::new(&[(0.5, 1.0), (0.0, 9.0), (0.5, 2.0)]);
        for i in 0..1000 {
            assert_ne!(s.draw(i as f64 / 1000.0), 9.0);
        }
        assert_eq!(s.draw(0.999_999_999), 2.0);
    }
}
