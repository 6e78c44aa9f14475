//! Detection statistics evaluated at the aligned preamble start.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::weights::WeightVector;

/// Threshold `rho` of the real-part detector, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DetectionThreshold<T>(T);

impl<T: Real> DetectionThreshold<T> {
    pub fn new(rho: T) -> Result<Self> {
        if rho > T::zero() && rho < T::one() {
            Ok(Self(rho))
        } else {
            invalid(format!("rho must lie in (0, 1), got {rho}"))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// All statistics of one block. `l` and `l_real` are `None` when `b == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample<T> {
    pub a: Complex<T>,
    pub a_real: T,
    pub b: T,
    pub l: Option<T>,
    pub l_real: Option<T>,
    pub r: T,
}

impl<T: Real> MetricSample<T> {
    /// Compensated-autocorrelation decision; ties count as no detection.
    pub fn detects(&self) -> bool {
        self.r > T::zero()
    }
}

fn check_len<T>(samples: &[Complex<T>], eta: usize) -> Result<()> {
    if eta == 0 {
        return invalid("eta must be at least 1");
    }
    if samples.len() < 2 * eta {
        return invalid(format!(
            "block has {} samples, need at least 2*eta = {}",
            samples.len(),
            2 * eta
        ));
    }
    Ok(())
}

/// `(1/eta) * sum_k y[k] * conj(y[k + eta])`.
pub fn autocorrelation<T: Real>(samples: &[Complex<T>], eta: usize) -> Result<Complex<T>> {
    check_len(samples, eta)?;
    Ok(autocorrelation_unchecked(samples, eta))
}

/// Mean `|y[k]|^2` over the two STSs.
pub fn average_power<T: Real>(samples: &[Complex<T>], eta: usize) -> Result<T> {
    check_len(samples, eta)?;
    Ok(average_power_unchecked(samples, eta))
}

#[inline]
pub(crate) fn autocorrelation_unchecked<T: Real>(y: &[Complex<T>], eta: usize) -> Complex<T> {
    let (first, second) = y[..2 * eta].split_at(eta);
    let mut acc = Complex::new(T::zero(), T::zero());
    for (p, q) in first.iter().zip(second) {
        acc += *p * q.conj();
    }
    acc / T::from_usize_lossy(eta)
}

#[inline]
pub(crate) fn average_power_unchecked<T: Real>(y: &[Complex<T>], eta: usize) -> T {
    y[..2 * eta].iter().map(|z| z.norm_sqr()).sum::<T>() / T::from_usize_lossy(2 * eta)
}

pub fn metrics<T: Real>(samples: &[Complex<T>], eta: usize, rho: DetectionThreshold<T>) -> Result<MetricSample<T>> {
    check_len(samples, eta)?;
    let a = autocorrelation_unchecked(samples, eta);
    let b = average_power_unchecked(samples, eta);
    Ok(sample_from_parts(a, b, rho.get()))
}

pub(crate) fn sample_from_parts<T: Real>(a: Complex<T>, b: T, rho: T) -> MetricSample<T> {
    let (l, l_real) = if b > T::zero() { (Some(a.norm() / b), Some(a.re / b)) } else { (None, None) };
    MetricSample { a, a_real: a.re, b, l, l_real, r: a.re - rho * b }
}

/// Weighted combination `sum_j w_j r_j`.
pub fn combine<T: Real>(per_antenna_r: &[T], weights: &WeightVector<T>) -> Result<T> {
    if per_antenna_r.len() != weights.len() {
        return invalid(format!(
            "{} statistics but {} weights",
            per_antenna_r.len(),
            weights.len()
        ));
    }
    Ok(per_antenna_r.iter().zip(weights.as_slice()).map(|(&r, &w)| r * w).sum())
}
