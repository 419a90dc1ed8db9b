//! Principal branch of the Lambert W function on the non-negative reals.

use crate::error::{Error, Result};

const MAX_HALLEY_ITERS: usize = 50;
const REL_TOL: f64 = 1e-12;

/// `W₀(x)` for `x ≥ 0`: the unique `w ≥ 0` with `w·eʷ = x`.
///
/// Halley iteration from `ln(1 + x)`; the residual `|w·eʷ − x|` ends below
/// `1e-12·max(1, x)`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("lambert_w0 needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(halley(x))
}

fn halley(x: f64) -> f64 {
    let tol = REL_TOL * x.max(1.0);
    let mut w = x.ln_1p();
    for _ in 0..MAX_HALLEY_ITERS {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= 0.25 * tol {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if next == w {
            break;
        }
        w = next;
    }
    w
}

/// `W₀(eᵘ)` from the logarithm `u = ln x` of the argument, which stays usable
/// when `x` itself would overflow.
pub fn lambert_w0_of_exp(ln_x: f64) -> f64 {
    if ln_x == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_x < 500.0 {
        return halley(ln_x.exp());
    }
    // w + ln w = u, Newton from w = u − ln u.
    let mut w = ln_x - ln_x.ln();
    for _ in 0..MAX_HALLEY_ITERS {
        let g = w + w.ln() - ln_x;
        let next = w - g / (1.0 + 1.0 / w);
        if (next - w).abs() <= f64::EPSILON * next {
            return next;
        }
        w = next;
    }
    w
}
