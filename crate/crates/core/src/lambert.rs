//! Principal branch of the Lambert W function on the nonnegative reals.
//!
//! `W(x)` is the unique `w >= 0` with `w * e^w = x`. Evaluation starts from
//! `ln(1 + x)` and refines with Halley steps; for arguments whose value would
//! overflow an `f64` the log-domain entry point [`lambert_w0_exp`] solves
//! `w + ln w = ln x` with Newton steps instead.

use crate::error::{domain, Result};

const MAX_ITER: usize = 64;

/// Above this log-argument the direct form would need `e^x` close to overflow.
const LOG_DOMAIN_SWITCH: f64 = 500.0;

/// Principal branch `W0(x)` for `x >= 0`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(domain(format!("lambert_w0 requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(halley(x))
}

/// `W0(e^log_x)`, valid for any finite `log_x` (the argument `e^log_x` is
/// always positive).
pub fn lambert_w0_exp(log_x: f64) -> Result<f64> {
    if !log_x.is_finite() {
        if log_x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        return Err(domain(format!("lambert_w0_exp requires a finite log-argument, got {log_x}")));
    }
    if log_x <= LOG_DOMAIN_SWITCH {
        return lambert_w0(log_x.exp());
    }
    // w + ln w = log_x, w > 1 here.
    let mut w = log_x - log_x.ln();
    for _ in 0..MAX_ITER {
        let g = w + w.ln() - log_x;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    Ok(w)
}

fn halley(x: f64) -> f64 {
    let mut w = x.ln_1p();
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    /// Independent oracle: bisection on `w e^w - x` over `[0, max(1, ln(1+x)) + 1]`.
    fn bisect_w(x: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, x.ln_1p().max(1.0) + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn trivial_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn w_of_three_matches_bisection() {
        let oracle = bisect_w(3.0);
        assert!((oracle - 1.049_908_894_964_04).abs() < 1e-12);
        assert!((lambert_w0(3.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn residual_small_on_reference_points() {
        for &x in &[0.0, 0.1, 1.0, E, 3.0, 10.0, 100.0, 1e-300, 1e-8, 1e6, 1e200] {
            let w = lambert_w0(x).unwrap();
            assert!(w >= 0.0);
            let r = (w * w.exp() - x).abs();
            assert!(r <= 1e-12 * x.max(1.0), "x={x} w={w} residual={r}");
        }
    }

    #[test]
    fn negative_argument_is_domain_error() {
        assert!(matches!(lambert_w0(-0.1), Err(crate::Error::Domain(_))));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn log_domain_agrees_with_direct_form() {
        for &lx in &[-30.0, -1.0, 0.0, 1.0, 50.0, 400.0, 499.0] {
            let a = lambert_w0_exp(lx).unwrap();
            let b = lambert_w0(f64::exp(lx)).unwrap();
            assert!((a - b).abs() <= 1e-13 * (1.0 + b), "lx={lx}");
        }
        // Continuity across the switch point.
        let below = lambert_w0_exp(LOG_DOMAIN_SWITCH).unwrap();
        let above = lambert_w0_exp(LOG_DOMAIN_SWITCH + 1e-9).unwrap();
        assert!((above - below).abs() < 1e-8);
        // Far above the switch, w + ln w must reproduce the log-argument.
        let w = lambert_w0_exp(5000.0).unwrap();
        assert!((w + w.ln() - 5000.0).abs() < 1e-11);
    }
}
