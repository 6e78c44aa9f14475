//! Closed-form moments and error probabilities under the Gaussian
//! approximation of the compensated autocorrelation `r = a_R - rho * b`.
//!
//! All SNR arguments are linear power ratios. Per antenna the normalized
//! statistic `r / sigma^2` has
//!
//! ```text
//! mean      mu_j = (1 - rho) gamma_j - rho
//! variance  v_j / eta,   v_j = (1 - rho)^2 gamma_j + (1 + rho^2) / 2
//! ```
//!
//! and the noise-only case is `gamma = 0`. A weighted combination
//! `sum_j w_j r_j` of independent antennas is again treated as Gaussian.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::qfunc::q;
use crate::scalar::Real;
use crate::signal::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompensatedStats<T> {
    pub mean: T,
    pub variance: T,
    pub hypothesis: Hypothesis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint<T> {
    pub rho: T,
    pub pfa: T,
    pub pmd: T,
}

/// Raw (unnormalized) moments of `b`, `a_R` and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawMoments<T> {
    pub e_b: T,
    pub var_b: T,
    pub e_ar: T,
    pub var_ar: T,
    pub e_ar_b: T,
}

fn check_eta(eta: usize) -> Result<()> {
    if eta == 0 {
        invalid("eta must be at least 1")
    } else {
        Ok(())
    }
}

fn check_rho<T: Real>(rho: T) -> Result<()> {
    if rho > T::zero() && rho < T::one() {
        Ok(())
    } else {
        invalid(format!("rho must lie in (0, 1), got {rho}"))
    }
}

#[inline]
fn qt<T: Real>(x: T) -> T {
    T::lit(q(x.as_f64()))
}

/// Per-antenna mean term `(1 - rho) gamma - rho` (Term-A summand).
#[inline]
pub fn mean_term<T: Real>(gamma: T, rho: T) -> T {
    (T::one() - rho) * gamma - rho
}

/// Per-antenna variance term `(1 - rho)^2 gamma + (1 + rho^2)/2`.
#[inline]
pub fn variance_term<T: Real>(gamma: T, rho: T) -> T {
    let one_m = T::one() - rho;
    one_m * one_m * gamma + (T::one() + rho * rho) / T::lit(2.0)
}

/// SNR below which an antenna's mean term is nonpositive: `rho / (1 - rho)`.
#[inline]
pub fn snr_bound<T: Real>(rho: T) -> T {
    rho / (T::one() - rho)
}

pub fn r_stats<T: Real>(eta: usize, rho: T, gamma: T, hypothesis: Hypothesis) -> Result<CompensatedStats<T>> {
    check_eta(eta)?;
    check_rho(rho)?;
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return invalid(format!("gamma must be finite and >= 0, got {gamma}"));
    }
    match hypothesis {
        Hypothesis::NoiseOnly if gamma != T::zero() => {
            return invalid("noise-only statistics require gamma == 0")
        }
        Hypothesis::PacketPresent if gamma == T::zero() => {
            return invalid("packet-present statistics require gamma > 0")
        }
        _ => {}
    }
    let eta_t = T::from_usize_lossy(eta);
    let mean = mean_term(gamma, rho);
    let variance = match hypothesis {
        Hypothesis::NoiseOnly => (T::one() + rho * rho) / (T::lit(2.0) * eta_t),
        Hypothesis::PacketPresent => variance_term(gamma, rho) / eta_t,
    };
    Ok(CompensatedStats { mean, variance, hypothesis })
}

pub fn moments_raw<T: Real>(power: T, sigma2: T, eta: usize) -> Result<RawMoments<T>> {
    check_eta(eta)?;
    if !(power >= T::zero()) || !(sigma2 > T::zero()) {
        return invalid("moments need P >= 0 and sigma^2 > 0");
    }
    let eta_t = T::from_usize_lossy(eta);
    let two = T::lit(2.0);
    let spread = (two * power * sigma2 + sigma2 * sigma2) / (two * eta_t);
    Ok(RawMoments {
        e_b: power + sigma2,
        var_b: spread,
        e_ar: power,
        var_ar: spread,
        e_ar_b: power * power + power * sigma2 / eta_t + power * sigma2,
    })
}

/// Unnormalized mean and variance of `r = a_R - rho b` for power `P` and noise `sigma^2`.
pub fn r_moments_raw<T: Real>(power: T, sigma2: T, eta: usize, rho: T) -> Result<(T, T)> {
    check_eta(eta)?;
    let eta_t = T::from_usize_lossy(eta);
    let one_m = T::one() - rho;
    let mean = one_m * power - rho * sigma2;
    let var = one_m * one_m * power * sigma2 / eta_t
        + (T::one() + rho * rho) * sigma2 * sigma2 / (T::lit(2.0) * eta_t);
    Ok((mean, var))
}

/// Single-antenna false-alarm probability.
pub fn pfa_single<T: Real>(eta: usize, rho: T) -> Result<T> {
    check_eta(eta)?;
    check_rho(rho)?;
    let eta_t = T::from_usize_lossy(eta);
    let arg = (T::lit(2.0) * eta_t * rho * rho / (T::one() + rho * rho)).sqrt();
    Ok(qt(arg))
}

/// Single-antenna missed-detection probability.
pub fn pmd_single<T: Real>(eta: usize, rho: T, gamma: T) -> Result<T> {
    check_eta(eta)?;
    check_rho(rho)?;
    if !(gamma > T::zero()) {
        return invalid(format!("gamma must be positive, got {gamma}"));
    }
    let eta_t = T::from_usize_lossy(eta);
    if gamma.is_infinite() {
        return Ok(T::zero());
    }
    let arg = eta_t.sqrt() * mean_term(gamma, rho) / variance_term(gamma, rho).sqrt();
    Ok(qt(arg))
}

fn check_weights<T: Real>(weights: &[T]) -> Result<T> {
    if weights.is_empty() {
        return invalid("weight vector is empty");
    }
    let mut sum = T::zero();
    for (j, &w) in weights.iter().enumerate() {
        if !(w >= T::zero()) || !w.is_finite() {
            return invalid(format!("weight {j} must be finite and >= 0, got {w}"));
        }
        sum += w;
    }
    if !(sum > T::zero()) {
        return invalid("weights must not all be zero");
    }
    Ok(sum)
}

/// Multi-antenna false-alarm probability; invariant to positive rescaling of `weights`.
pub fn pfa_multi<T: Real>(eta: usize, rho: T, weights: &[T]) -> Result<T> {
    check_eta(eta)?;
    check_rho(rho)?;
    let sum = check_weights(weights)?;
    let sum_sq: T = weights.iter().map(|&w| w * w).sum();
    let eta_t = T::from_usize_lossy(eta);
    let arg = (T::lit(2.0) * eta_t / (T::one() + rho * rho)).sqrt() * rho * sum / sum_sq.sqrt();
    Ok(qt(arg))
}

/// Multi-antenna missed-detection probability; invariant to positive rescaling of `weights`.
pub fn pmd_multi<T: Real>(eta: usize, rho: T, gammas: &[T], weights: &[T]) -> Result<T> {
    check_eta(eta)?;
    check_rho(rho)?;
    check_weights(weights)?;
    if gammas.len() != weights.len() {
        return invalid(format!("{} SNRs but {} weights", gammas.len(), weights.len()));
    }
    for (j, &g) in gammas.iter().enumerate() {
        if !(g >= T::zero()) || !g.is_finite() {
            return invalid(format!("SNR {j} must be finite and >= 0, got {g}"));
        }
    }
    let (num, den) = weighted_terms(gammas, weights, rho);
    let eta_t = T::from_usize_lossy(eta);
    Ok(qt(eta_t.sqrt() * num / den.sqrt()))
}

/// `(sum_j w_j mu_j, sum_j w_j^2 v_j)`.
fn weighted_terms<T: Real>(gammas: &[T], weights: &[T], rho: T) -> (T, T) {
    let mut num = T::zero();
    let mut den = T::zero();
    for (&g, &w) in gammas.iter().zip(weights) {
        num += w * mean_term(g, rho);
        den += w * w * variance_term(g, rho);
    }
    (num, den)
}

/// Equal-weight false-alarm probability, written directly in `N_R`.
pub fn pfa_wfa<T: Real>(eta: usize, rho: T, n_antennas: usize) -> Result<T> {
    check_eta(eta)?;
    check_rho(rho)?;
    if n_antennas == 0 {
        return invalid("need at least one antenna");
    }
    let eta_t = T::from_usize_lossy(eta);
    let n = T::from_usize_lossy(n_antennas);
    Ok(qt((T::lit(2.0) * eta_t / (T::one() + rho * rho)).sqrt() * rho * n.sqrt()))
}

/// Equal-weight missed-detection probability, written through `sum_j gamma_j`.
pub fn pmd_wfa<T: Real>(eta: usize, rho: T, gammas: &[T]) -> Result<T> {
    check_eta(eta)?;
    check_rho(rho)?;
    if gammas.is_empty() {
        return invalid("need at least one antenna");
    }
    let eta_t = T::from_usize_lossy(eta);
    let n = T::from_usize_lossy(gammas.len());
    let total: T = gammas.iter().copied().sum();
    let one_m = T::one() - rho;
    let num = one_m / n * total - rho;
    let den = one_m * one_m / (n * n) * total + (T::one() + rho * rho) / (T::lit(2.0) * n);
    Ok(qt(eta_t.sqrt() * num / den.sqrt()))
}

fn check_feasible<T: Real>(weights: &[T]) -> Result<()> {
    let sum = check_weights(weights)?;
    if (sum - T::one()).abs() > T::lit(1e-9) {
        return invalid(format!("weights must sum to 1, got {sum}"));
    }
    Ok(())
}

/// `f(w) = 1 / sum_j w_j^2`; larger `f` means smaller false-alarm probability.
pub fn objective_f<T: Real>(weights: &[T]) -> Result<T> {
    check_feasible(weights)?;
    Ok(T::one() / weights.iter().map(|&w| w * w).sum::<T>())
}

/// Verify every SNR clears `rho / (1 - rho)`.
pub fn check_snr_bound<T: Real>(gammas: &[T], rho: T) -> Result<()> {
    let bound = snr_bound(rho);
    for (index, &g) in gammas.iter().enumerate() {
        if !(g > bound) {
            return Err(Error::ConstraintViolation { index, gamma: g.as_f64(), bound: bound.as_f64() });
        }
    }
    Ok(())
}

/// `g(w) = (sum_j w_j mu_j)^2 / sum_j w_j^2 v_j`; larger `g` means smaller
/// missed-detection probability.
pub fn objective_g<T: Real>(weights: &[T], gammas: &[T], rho: T) -> Result<T> {
    check_rho(rho)?;
    check_feasible(weights)?;
    if gammas.len() != weights.len() {
        return invalid(format!("{} SNRs but {} weights", gammas.len(), weights.len()));
    }
    check_snr_bound(gammas, rho)?;
    let (num, den) = weighted_terms(gammas, weights, rho);
    Ok(num * num / den)
}

/// Gradient of `g` split into its factors: `dg/dw_j = term_a * term_b[j] / d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientParts<T> {
    /// `2 sum_m w_m mu_m`, positive whenever every SNR clears the bound.
    pub term_a: T,
    /// `mu_j sum_{m != j} w_m^2 v_m - w_j v_j sum_{m != j} w_m mu_m`.
    pub term_b: Vec<T>,
    /// `(sum_m w_m^2 v_m)^2`.
    pub denominator: T,
}

impl<T: Real> GradientParts<T> {
    pub fn gradient(&self) -> Vec<T> {
        self.term_b.iter().map(|&b| self.term_a * b / self.denominator).collect()
    }
}

pub fn g_gradient_parts<T: Real>(weights: &[T], gammas: &[T], rho: T) -> Result<GradientParts<T>> {
    check_rho(rho)?;
    check_feasible(weights)?;
    if gammas.len() != weights.len() {
        return invalid(format!("{} SNRs but {} weights", gammas.len(), weights.len()));
    }
    check_snr_bound(gammas, rho)?;
    let mu: Vec<T> = gammas.iter().map(|&g| mean_term(g, rho)).collect();
    let v: Vec<T> = gammas.iter().map(|&g| variance_term(g, rho)).collect();
    let (num, den) = weighted_terms(gammas, weights, rho);
    let term_b = (0..weights.len())
        .map(|j| {
            let w_j = weights[j];
            // Exclude m == j from both sums; its contributions cancel exactly.
            let others_sq = den - w_j * w_j * v[j];
            let others_mu = num - w_j * mu[j];
            mu[j] * others_sq - w_j * v[j] * others_mu
        })
        .collect();
    Ok(GradientParts { term_a: T::lit(2.0) * num, term_b, denominator: den * den })
}

pub fn g_gradient<T: Real>(weights: &[T], gammas: &[T], rho: T) -> Result<Vec<T>> {
    Ok(g_gradient_parts(weights, gammas, rho)?.gradient())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const EX1_DB: [f64; 4] = [3.6118, 3.8903, 4.0338, 3.3649];

    fn ex1() -> Vec<f64> {
        EX1_DB.iter().map(|d| 10f64.powf(d / 10.0)).collect()
    }

    #[test]
    fn noise_only_stats() {
        let s = r_stats(16, 0.45, 0.0, Hypothesis::NoiseOnly).unwrap();
        assert_eq!(s.mean, -0.45);
        assert_abs_diff_eq!(s.variance, 0.037_578_125, epsilon = 1e-15);
        assert!(r_stats(16, 0.45, 1.0, Hypothesis::NoiseOnly).is_err());
        assert!(r_stats(16, 0.45, 0.0, Hypothesis::PacketPresent).is_err());
    }

    #[test]
    fn packet_stats_zero_mean_on_bound() {
        let rho: f64 = 0.45;
        let s = r_stats(16, rho, rho / (1.0 - rho), Hypothesis::PacketPresent).unwrap();
        assert_abs_diff_eq!(s.mean, 0.0, epsilon = 1e-15);
        let s = r_stats(16, 0.3, 2.0, Hypothesis::PacketPresent).unwrap();
        assert_abs_diff_eq!(s.mean, 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.variance, (0.49 * 2.0 + 1.09 / 2.0) / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn raw_moment_examples() {
        let m = moments_raw(1.0, 1.0, 16).unwrap();
        assert_eq!(m.e_b, 2.0);
        assert_abs_diff_eq!(m.var_b, 3.0 / 32.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.e_ar_b, 1.0 + 1.0 / 16.0 + 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(moments_raw(0.0, 1.0, 16).unwrap().var_b, 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn raw_r_moments_match_normalized_stats() {
        // Dividing r by sigma^2 gives the SNR form.
        let (p, s2, eta, rho) = (3.0, 1.5, 16, 0.3);
        let (m, v) = r_moments_raw(p, s2, eta, rho).unwrap();
        let st = r_stats(eta, rho, p / s2, Hypothesis::PacketPresent).unwrap();
        assert_relative_eq!(m / s2, st.mean, max_relative = 1e-14);
        assert_relative_eq!(v / (s2 * s2), st.variance, max_relative = 1e-14);
    }

    #[test]
    fn r_variance_consistent_with_raw_moments() {
        // Var(r) = Var(a_R) + rho^2 Var(b) - 2 rho Cov(a_R, b).
        let (p, s2, eta, rho) = (2.0, 1.0, 32, 0.2);
        let m = moments_raw(p, s2, eta).unwrap();
        let cov = m.e_ar_b - m.e_ar * m.e_b;
        let var = m.var_ar + rho * rho * m.var_b - 2.0 * rho * cov;
        let (_, v) = r_moments_raw(p, s2, eta, rho).unwrap();
        assert_relative_eq!(var, v, max_relative = 1e-13);
    }

    #[test]
    fn pfa_single_examples() {
        assert_relative_eq!(pfa_single(16, 1e-300).unwrap(), 0.5, max_relative = 1e-12);
        let want = q((6.48f64 / 1.2025).sqrt());
        assert_relative_eq!(pfa_single(16, 0.45).unwrap(), want, max_relative = 1e-13);
        assert!(pfa_single(16, 1.0).is_err());
    }

    #[test]
    fn pmd_single_examples() {
        let rho: f64 = 0.45;
        assert_abs_diff_eq!(pmd_single(16, rho, rho / (1.0 - rho)).unwrap(), 0.5, epsilon = 1e-12);
        assert!(pmd_single(16, rho, 1e6).unwrap() < 1e-12);
        assert!(pmd_single(16, rho, 0.0).is_err());
    }

    #[test]
    fn multi_reduces_to_single() {
        assert_eq!(pfa_multi(16, 0.3, &[1.0, 0.0, 0.0]).unwrap(), pfa_single(16, 0.3).unwrap());
        assert_relative_eq!(
            pmd_multi(16, 0.45, &[2.0], &[1.0]).unwrap(),
            pmd_single(16, 0.45, 2.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn multi_scale_invariance() {
        let a = pfa_multi(16, 0.45, &[0.7, 0.3]).unwrap();
        let b = pfa_multi(16, 0.45, &[7.0, 3.0]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        let a = pmd_multi(16, 0.45, &[2.0, 3.0], &[0.7, 0.3]).unwrap();
        let b = pmd_multi(16, 0.45, &[2.0, 3.0], &[7.0, 3.0]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }

    #[test]
    fn equal_weights_match_wfa_forms() {
        let g = ex1();
        let w = [0.25; 4];
        assert_relative_eq!(
            pfa_multi(16, 0.45, &w).unwrap(),
            pfa_wfa(16, 0.45, 4).unwrap(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            pmd_multi(16, 0.45, &g, &w).unwrap(),
            pmd_wfa(16, 0.45, &g).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn equal_snr_two_antennas_doubles_eta() {
        // Two equal antennas, equal weights: mean unchanged, variance halved.
        let g = 2.0;
        let multi = pmd_multi(16, 0.45, &[g, g], &[0.5, 0.5]).unwrap();
        let single_32 = pmd_single(32, 0.45, g).unwrap();
        assert_relative_eq!(multi, single_32, max_relative = 1e-13);
    }

    #[test]
    fn objective_f_examples() {
        assert_abs_diff_eq!(objective_f(&[0.25; 4]).unwrap(), 4.0, epsilon = 1e-14);
        assert_eq!(objective_f(&[1.0, 0.0]).unwrap(), 1.0);
        assert!(objective_f(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn objective_g_rejects_weak_antenna() {
        let err = objective_g(&[0.5, 0.5], &[0.5, 2.0], 0.45).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation { index: 0, .. }));
    }

    #[test]
    fn gradient_signs_two_antennas() {
        let parts = g_gradient_parts(&[0.6, 0.4], &[2.0, 2.0], 0.45).unwrap();
        let grad = parts.gradient();
        assert!(grad[0] < 0.0 && grad[1] > 0.0, "{grad:?}");
        assert!(parts.term_a > 0.0);
    }
}
