//! Antenna weight assignment.
//!
//! * WFA: equal weights, minimizing the combined false-alarm probability.
//! * WMD: `w_j ∝ mu_j / v_j`, maximizing the missed-detection objective `g`.
//!   I-WMD feeds it oracle SNRs, P-WMD a coarse preamble-power estimate.
//!
//! [`wmd_ascend`] walks from any feasible point to the WMD optimum by moving
//! weight from the largest `w_j / w_j^o` ratios to the smallest ones.

use serde::Serialize;

use crate::analytic::{check_snr_bound, mean_term, objective_f, objective_g, snr_bound, variance_term};
use crate::error::{invalid, Error, Result};
use crate::metrics::average_power;
use crate::scalar::Real;
use crate::signal::ReceivedBlock;

const SUM_TOLERANCE: f64 = 1e-12;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Real> WeightVector<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.is_empty() {
            return invalid("weight vector is empty");
        }
        if let Some((j, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= T::zero()) || !v.is_finite()) {
            return invalid(format!("weight {j} must be finite and >= 0, got {v}"));
        }
        let sum: T = w.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(SUM_TOLERANCE) {
            return invalid(format!("weights must sum to 1 (got {sum})"));
        }
        Ok(Self(w))
    }

    /// Rescale arbitrary nonnegative weights onto the simplex.
    pub fn normalized(raw: &[T]) -> Result<Self> {
        let sum: T = raw.iter().copied().sum();
        if raw.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) || !(sum > T::zero()) {
            return invalid("weights must be finite, nonnegative and not all zero");
        }
        Ok(Self(raw.iter().map(|&v| v / sum).collect()))
    }

    pub fn equal(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("need at least one antenna");
        }
        Ok(Self(vec![T::one() / T::from_usize_lossy(n); n]))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> std::ops::Index<usize> for WeightVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrSource {
    /// True SNRs known in advance (I-WMD).
    Oracle,
    /// Estimated from idle noise power and preamble power (P-WMD).
    PreambleCoarse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrEstimate<T> {
    pub gamma_hat: Vec<T>,
    pub source: SnrSource,
}

pub fn wfa_weights<T: Real>(n_antennas: usize) -> Result<WeightVector<T>> {
    WeightVector::equal(n_antennas)
}

/// Split antennas into those whose SNR clears `rho / (1 - rho)` and the rest.
pub fn filter_antennas<T: Real>(gammas: &[T], rho: T) -> Result<(Vec<usize>, Vec<usize>)> {
    let bound = snr_bound(rho);
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..gammas.len()).partition(|&j| gammas[j] > bound);
    if kept.is_empty() {
        return Err(Error::NoUsableAntenna { bound: bound.as_f64() });
    }
    Ok((kept, dropped))
}

/// Closed-form WMD weights; every SNR must clear the bound.
pub fn wmd_weights<T: Real>(gammas: &[T], rho: T) -> Result<WeightVector<T>> {
    if !(rho > T::zero() && rho < T::one()) {
        return invalid(format!("rho must lie in (0, 1), got {rho}"));
    }
    if gammas.is_empty() {
        return invalid("need at least one antenna");
    }
    check_snr_bound(gammas, rho)?;
    let raw: Vec<T> = gammas.iter().map(|&g| mean_term(g, rho) / variance_term(g, rho)).collect();
    WeightVector::normalized(&raw)
}

/// WMD over the full antenna set: antennas below the bound get weight zero.
pub fn wmd_weights_full<T: Real>(gammas: &[T], rho: T) -> Result<WeightVector<T>> {
    let (kept, _) = filter_antennas(gammas, rho)?;
    let sub: Vec<T> = kept.iter().map(|&j| gammas[j]).collect();
    let w = wmd_weights(&sub, rho)?;
    let mut full = vec![T::zero(); gammas.len()];
    for (&j, &wj) in kept.iter().zip(w.as_slice()) {
        full[j] = wj;
    }
    Ok(WeightVector(full))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult<T> {
    pub weights: WeightVector<T>,
    /// Every iterate, starting with the initial point.
    pub trace: Vec<WeightVector<T>>,
}

impl<T> AscentResult<T> {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Relative tolerance for membership in the max/min ratio sets.
const RATIO_TIE: f64 = 1e-12;

/// Iterative march toward the WMD optimum.
///
/// Each step takes `K` (indices attaining the largest `w_j / w_j^o`) and `I`
/// (the smallest), removes `eps / |K|` from each member of `K` and adds
/// `eps / |I|` to each member of `I`. With untouched indices left over, `eps`
/// is the largest move that keeps `K` above the next-largest ratio and `I`
/// below the next-smallest; otherwise it closes the gap to `w^o` directly.
/// Stops once `max_j |w_j / w_j^o - 1| <= tol`.
pub fn wmd_ascend<T: Real>(
    start: &WeightVector<T>,
    gammas: &[T],
    rho: T,
    tol: T,
    max_iters: usize,
) -> Result<AscentResult<T>> {
    let optimum = wmd_weights(gammas, rho)?;
    if start.len() != gammas.len() {
        return invalid(format!("{} weights but {} SNRs", start.len(), gammas.len()));
    }
    let wo = optimum.as_slice();
    let n = wo.len();
    let mut w = start.as_slice().to_vec();
    let mut trace = vec![start.clone()];
    let tie = T::lit(RATIO_TIE);

    for _ in 0..=max_iters {
        let ratios: Vec<T> = w.iter().zip(wo).map(|(&a, &b)| a / b).collect();
        let deviation = ratios.iter().fold(T::zero(), |m, &r| m.max((r - T::one()).abs()));
        if deviation <= tol {
            return Ok(AscentResult { weights: WeightVector(w), trace });
        }
        if trace.len() > max_iters {
            break;
        }
        let r_max = ratios.iter().copied().fold(T::neg_infinity(), T::max);
        let r_min = ratios.iter().copied().fold(T::infinity(), T::min);
        let in_k: Vec<bool> = ratios.iter().map(|&r| r >= r_max * (T::one() - tie)).collect();
        let in_i: Vec<bool> = ratios.iter().map(|&r| r <= r_min * (T::one() + tie)).collect();
        if in_k.iter().all(|&b| b) {
            // All ratios equal; feasibility then forces w == w^o.
            return Ok(AscentResult { weights: WeightVector(w), trace });
        }
        let k_set: Vec<usize> = (0..n).filter(|&j| in_k[j]).collect();
        let i_set: Vec<usize> = (0..n).filter(|&j| in_i[j]).collect();
        let nk = T::from_usize_lossy(k_set.len());
        let ni = T::from_usize_lossy(i_set.len());
        let has_rest = (0..n).any(|j| !in_k[j] && !in_i[j]);

        let eps = if has_rest {
            let next_high = (0..n).filter(|&j| !in_k[j]).map(|j| ratios[j]).fold(T::neg_infinity(), T::max);
            let next_low = (0..n).filter(|&j| !in_i[j]).map(|j| ratios[j]).fold(T::infinity(), T::min);
            let from_k = k_set.iter().map(|&k| nk * (w[k] - next_high * wo[k])).fold(T::infinity(), T::min);
            let from_i = i_set.iter().map(|&i| ni * (next_low * wo[i] - w[i])).fold(T::infinity(), T::min);
            from_k.min(from_i)
        } else {
            let from_k = k_set.iter().map(|&k| nk * (w[k] - wo[k])).fold(T::infinity(), T::min);
            let from_i = i_set.iter().map(|&i| ni * (wo[i] - w[i])).fold(T::infinity(), T::min);
            from_k.min(from_i)
        };
        // Rounding can push eps to or below zero right at the optimum.
        let eps = eps.max(T::zero());
        if eps == T::zero() {
            return Ok(AscentResult { weights: WeightVector(w), trace });
        }
        for &k in &k_set {
            w[k] -= eps / nk;
        }
        for &i in &i_set {
            w[i] += eps / ni;
        }
        trace.push(WeightVector(w.clone()));
    }

    Err(Error::NonConvergence {
        iterations: trace.len() - 1,
        trace: trace.into_iter().map(|v| v.into_inner().iter().map(|x| x.as_f64()).collect()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `f(w) = 1 / sum w_j^2`.
    FalseAlarm,
    /// `g(w)` for the given SNRs.
    MissedDetection,
}

/// Exhaustive search over the simplex lattice with spacing `grid_step`.
/// Ties resolve to the lexicographically smallest lattice point.
pub fn brute_force_best<T: Real>(
    objective: Objective,
    gammas: &[T],
    rho: T,
    grid_step: f64,
) -> Result<WeightVector<T>> {
    let n = gammas.len();
    if n == 0 || n > 4 {
        return invalid(format!("grid search supports 1..=4 antennas, got {n}"));
    }
    if !(grid_step >= 1e-3) || grid_step > 1.0 {
        return invalid(format!("grid step must lie in [1e-3, 1], got {grid_step}"));
    }
    let m = (1.0 / grid_step).round() as usize;
    if ((m as f64) * grid_step - 1.0).abs() > 1e-9 {
        return invalid(format!("grid step {grid_step} does not divide 1"));
    }
    if objective == Objective::MissedDetection {
        check_snr_bound(gammas, rho)?;
    }
    let mt = T::from_usize_lossy(m);
    let eval = |counts: &[usize]| -> Result<T> {
        let w: Vec<T> = counts.iter().map(|&c| T::from_usize_lossy(c) / mt).collect();
        match objective {
            Objective::FalseAlarm => objective_f(&w),
            Objective::MissedDetection => objective_g(&w, gammas, rho),
        }
    };

    let mut counts = vec![0usize; n];
    let mut best: Option<(T, Vec<usize>)> = None;
    // Lexicographic enumeration of compositions of m into n parts.
    fn visit<T: Real>(
        pos: usize,
        remaining: usize,
        counts: &mut [usize],
        eval: &dyn Fn(&[usize]) -> Result<T>,
        best: &mut Option<(T, Vec<usize>)>,
    ) -> Result<()> {
        if pos + 1 == counts.len() {
            counts[pos] = remaining;
            let v = eval(counts)?;
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, counts.to_vec()));
            }
            return Ok(());
        }
        for c in 0..=remaining {
            counts[pos] = c;
            visit(pos + 1, remaining - c, counts, eval, best)?;
        }
        Ok(())
    }
    visit(0, m, &mut counts, &eval, &mut best)?;
    let (_, c) = best.expect("lattice is non-empty");
    Ok(WeightVector(c.iter().map(|&k| T::from_usize_lossy(k) / mt).collect()))
}

/// Coarse per-antenna SNR from idle noise power and the preamble's average power.
///
/// `gamma_hat = max((b + interference) / noise_hat - 1, 0)`. Interference
/// raises the measured power but contributes nothing to the autocorrelation,
/// so it biases the estimate upward.
pub fn estimate_snr_coarse<T: Real>(
    blocks: &[ReceivedBlock<T>],
    noise_power_hat: T,
    interference_power: T,
) -> Result<SnrEstimate<T>> {
    if !(noise_power_hat > T::zero()) {
        return invalid(format!("noise power estimate must be positive, got {noise_power_hat}"));
    }
    if !(interference_power >= T::zero()) {
        return invalid(format!("interference power must be >= 0, got {interference_power}"));
    }
    let mut gamma_hat = Vec::with_capacity(blocks.len());
    for blk in blocks {
        let eta = blk.samples.len() / 2;
        let b = average_power(&blk.samples, eta)?;
        gamma_hat.push(coarse_snr(b, noise_power_hat, interference_power));
    }
    Ok(SnrEstimate { gamma_hat, source: SnrSource::PreambleCoarse })
}

#[inline]
pub(crate) fn coarse_snr<T: Real>(b: T, noise_power_hat: T, interference_power: T) -> T {
    ((b + interference_power) / noise_power_hat - T::one()).max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::g_gradient_parts;
    use crate::signal::{make_preamble, synthesize_block, AntennaScenario, Hypothesis, PreambleKind};
    use approx::assert_abs_diff_eq;

    fn db(v: &[f64]) -> Vec<f64> {
        v.iter().map(|d| 10f64.powf(d / 10.0)).collect()
    }

    #[test]
    fn wfa_examples() {
        assert_eq!(wfa_weights::<f64>(1).unwrap().as_slice(), &[1.0]);
        assert_eq!(wfa_weights::<f64>(4).unwrap().as_slice(), &[0.25; 4]);
        let w = wfa_weights::<f64>(3).unwrap();
        assert_abs_diff_eq!(w.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(wfa_weights::<f64>(0).is_err());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::<f64>::new(vec![]).is_err());
        let w = WeightVector::normalized(&[7.0, 3.0]).unwrap();
        assert_abs_diff_eq!(w[0], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn filter_examples() {
        assert_eq!(filter_antennas(&[2.0, 2.0], 0.45).unwrap(), (vec![0, 1], vec![]));
        assert_eq!(filter_antennas(&[0.5, 2.0], 0.45).unwrap(), (vec![1], vec![0]));
        let ex2 = db(&[0.2013, 3.5843, 3.3318, 4.2489]);
        assert_abs_diff_eq!(ex2[0], 1.0475, epsilon = 1e-4);
        assert_eq!(filter_antennas(&ex2, 0.45).unwrap().0, vec![0, 1, 2, 3]);
        assert!(matches!(filter_antennas(&[0.1, 0.2], 0.45), Err(Error::NoUsableAntenna { .. })));
    }

    #[test]
    fn wmd_equal_snr_gives_equal_weights() {
        let w = wmd_weights(&[3.0; 4], 0.45).unwrap();
        for &v in w.as_slice() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn wmd_two_antenna_golden() {
        // Direct arithmetic: 0.65/1.20625 and 1.75/1.81125, normalized.
        let a = 0.65 / 1.20625;
        let b = 1.75 / 1.81125;
        let w = wmd_weights(&[2.0, 4.0], 0.45).unwrap();
        assert_abs_diff_eq!(w[0], a / (a + b), epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], b / (a + b), epsilon = 1e-15);
    }

    #[test]
    fn wmd_rejects_weak_antenna_and_full_variant_zeroes_it() {
        assert!(matches!(wmd_weights(&[0.5, 2.0], 0.45), Err(Error::ConstraintViolation { index: 0, .. })));
        let full = wmd_weights_full(&[0.5, 2.0, 2.0], 0.45).unwrap();
        assert_eq!(full.as_slice(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn wmd_invariant_to_common_power_scaling() {
        // Same P/sigma^2 ratios from different absolute powers.
        let g1: Vec<f64> = [2.0, 5.0].iter().zip([1.0, 2.5]).map(|(p, s)| p / s).collect();
        let g2: Vec<f64> = [20.0, 50.0].iter().zip([10.0, 25.0]).map(|(p, s)| p / s).collect();
        assert_eq!(wmd_weights(&g1, 0.4).unwrap(), wmd_weights(&g2, 0.4).unwrap());
    }

    #[test]
    fn wmd_is_stationary() {
        let g = db(&[3.6118, 3.8903, 4.0338, 3.3649]);
        let w = wmd_weights(&g, 0.45).unwrap();
        let parts = g_gradient_parts(w.as_slice(), &g, 0.45).unwrap();
        for b in parts.term_b {
            assert!(b.abs() < 1e-9);
        }
    }

    #[test]
    fn ascend_from_optimum_is_noop() {
        let g = [2.0, 4.0, 3.0];
        let wo = wmd_weights(&g, 0.45).unwrap();
        let res = wmd_ascend(&wo, &g, 0.45, 1e-9, 10).unwrap();
        assert_eq!(res.iterations(), 0);
        assert_eq!(res.weights, wo);
    }

    #[test]
    fn ascend_two_antenna_single_step() {
        let start = WeightVector::new(vec![0.6, 0.4]).unwrap();
        let res = wmd_ascend(&start, &[2.0, 2.0], 0.45, 1e-12, 10).unwrap();
        assert_eq!(res.iterations(), 1);
        assert_abs_diff_eq!(res.weights[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(res.weights[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ascend_reports_non_convergence() {
        let start = WeightVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        match wmd_ascend(&start, &[2.0, 3.0, 4.0], 0.45, 1e-12, 0) {
            Err(Error::NonConvergence { iterations, trace }) => {
                assert_eq!(iterations, 0);
                assert_eq!(trace.len(), 1);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_guards_and_simple_cases() {
        assert!(brute_force_best(Objective::FalseAlarm, &[1.0; 5], 0.45, 0.1).is_err());
        assert!(brute_force_best(Objective::FalseAlarm, &[1.0; 2], 0.45, 1e-4).is_err());
        let w = brute_force_best(Objective::FalseAlarm, &[1.0; 2], 0.45, 0.01).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
        let w3 = brute_force_best(Objective::FalseAlarm, &[1.0; 3], 0.45, 0.01).unwrap();
        let mut sorted = w3.as_slice().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(sorted[0], 0.33, epsilon = 1e-12);
        assert_abs_diff_eq!(sorted[2], 0.34, epsilon = 1e-12);
        let slack = 3.0 - objective_f(w3.as_slice()).unwrap();
        assert!((0.0..1e-2).contains(&slack));
    }

    #[test]
    fn brute_force_g_matches_closed_form() {
        let g = [2.0f64, 4.0];
        let grid = brute_force_best(Objective::MissedDetection, &g, 0.45, 0.001).unwrap();
        let wo = wmd_weights(&g, 0.45).unwrap();
        for j in 0..2 {
            assert!((grid[j] - wo[j]).abs() <= 0.001 + 1e-12);
        }
    }

    #[test]
    fn coarse_estimate_examples() {
        let p = make_preamble::<f64>(16, PreambleKind::QpskRandom, 1).unwrap();
        // Noiseless: b = P exactly, so gamma_hat = P / sigma_hat^2.
        let sc = AntennaScenario::from_noise(3.0, &[0.0]).unwrap();
        let blk = synthesize_block(&p, &sc, 0, Hypothesis::PacketPresent, 0).unwrap();
        let est = estimate_snr_coarse(std::slice::from_ref(&blk), 1.5, 0.0).unwrap();
        assert_abs_diff_eq!(est.gamma_hat[0], 3.0 / 1.5 - 1.0, epsilon = 1e-12);
        // Interference equal to the noise power adds exactly one.
        let est2 = estimate_snr_coarse(std::slice::from_ref(&blk), 1.5, 1.5).unwrap();
        assert_abs_diff_eq!(est2.gamma_hat[0] - est.gamma_hat[0], 1.0, epsilon = 1e-12);
        assert_eq!(est.source, SnrSource::PreambleCoarse);
        assert!(estimate_snr_coarse(std::slice::from_ref(&blk), 0.0, 0.0).is_err());
    }

    #[test]
    fn coarse_estimate_clamps_to_zero() {
        assert_eq!(coarse_snr(0.5, 1.0, 0.0), 0.0);
    }
}
