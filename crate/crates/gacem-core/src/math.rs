//! Scalar math used throughout the crate.
//!
//! Everything routes through `libm` so the crate builds without `std` and all
//! results are bit-reproducible across platforms, which the run-transcript
//! determinism contract depends on.

use crate::error::{Error, Result};
use alloc::format;

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
pub const SQRT_2: f64 = core::f64::consts::SQRT_2;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Standard normal CDF. `erfc` keeps the tails accurate far beyond the point
/// where `0.5 * (1 + erf(z / sqrt(2)))` would round to 0 or 1.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    exp(-0.5 * z * z) * 0.398_942_280_401_432_7
}

/// Log density of N(mu, sigma^2) at x.
pub fn gaussian_log_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let z = (x - mu) / sigma;
    Ok(-HALF_LN_2PI - ln(sigma) - 0.5 * z * z)
}

/// `max(v) + ln(sum(exp(v - max(v))))`, safe for inputs up to magnitude ~700.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut m = f64::NEG_INFINITY;
    for &v in values {
        if v > m {
            m = v;
        }
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut s = 0.0;
    for &v in values {
        s += exp(v - m);
    }
    m + ln(s)
}

/// In-place softmax over a slice.
pub fn softmax_in_place(values: &mut [f64]) {
    let lse = log_sum_exp(values);
    for v in values.iter_mut() {
        *v = exp(*v - lse);
    }
}
