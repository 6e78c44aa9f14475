//! MD-FA curves and tolerance-region benchmarking of weighting schemes.
//!
//! A curve is swept by the threshold `rho`. Two curves are compared at equal
//! false-alarm probability: over the part of the tolerance region both can
//! reach, a scheme wins if its interpolated miss probability is lower
//! everywhere by more than a small relative band.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{mean_term, pfa_multi, pfa_single, pmd_multi, pmd_single, snr_bound, variance_term, OperatingPoint};
use crate::error::{invalid, Error, Result};
use crate::fmt::sci;
use crate::qfunc::q;
use crate::metrics::average_power_unchecked;
use crate::montecarlo::{estimate_rate, MetricKind, TrialPlan};
use crate::rng::{mix, stream, StreamDomain};
use crate::signal::{add_signal, fill_noise, make_preamble, AntennaScenario, Hypothesis, PreambleKind, PreambleSpec};
use crate::weights::{coarse_snr, wmd_weights_full, WeightVector};

/// Relative band inside which two miss probabilities count as equal.
pub const DRAW_BAND: f64 = 1e-3;

pub const DEFAULT_GRID_POINTS: usize = 512;
pub const DEFAULT_RHO_MIN: f64 = 0.05;
pub const DEFAULT_RHO_MAX: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    #[serde(rename = "WFA")]
    Wfa,
    #[serde(rename = "I-WMD")]
    IWmd,
    #[serde(rename = "P-WMD")]
    PWmd,
    #[serde(rename = "single")]
    Single,
    #[serde(rename = "custom")]
    Custom,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Wfa => "WFA",
            Scheme::IWmd => "I-WMD",
            Scheme::PWmd => "P-WMD",
            Scheme::Single => "single",
            Scheme::Custom => "custom",
        }
    }
}

/// Coarse-estimation setup for P-WMD.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwmdConfig {
    /// Independent SNR-estimation draws averaged at every `rho`.
    pub draws: usize,
    /// Interference power as a multiple of each antenna's noise power.
    pub interference_ratio: f64,
    /// Noise-power estimate as a multiple of the true noise power.
    pub noise_estimate_ratio: f64,
    pub preamble: PreambleKind,
    pub seed: u64,
}

impl Default for PwmdConfig {
    fn default() -> Self {
        Self {
            draws: 200,
            interference_ratio: 0.5,
            noise_estimate_ratio: 1.0,
            preamble: PreambleKind::QpskRandom,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    Wfa,
    IWmd,
    PWmd(PwmdConfig),
    /// Exactly one antenna.
    Single,
    Custom(WeightVector<f64>),
}

impl SchemeSpec {
    pub fn scheme(&self) -> Scheme {
        match self {
            SchemeSpec::Wfa => Scheme::Wfa,
            SchemeSpec::IWmd => Scheme::IWmd,
            SchemeSpec::PWmd(_) => Scheme::PWmd,
            SchemeSpec::Single => Scheme::Single,
            SchemeSpec::Custom(_) => Scheme::Custom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMode {
    Analytic,
    /// Empirical rates; P-WMD splits the trials evenly across its draws.
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdFaCurve {
    pub scheme: Scheme,
    /// Ascending in `rho`. Thresholds where the scheme has no usable antenna are absent.
    pub points: Vec<OperatingPoint<f64>>,
}

impl MdFaCurve {
    pub fn new(scheme: Scheme, points: Vec<OperatingPoint<f64>>) -> Self {
        Self { scheme, points }
    }

    /// Non-dominated `(pfa, pmd)` pairs: `pfa` ascending, `pmd` strictly descending.
    ///
    /// SNR-dependent weights can make `pfa` non-monotone in `rho`; the frontier
    /// keeps only the operating points a designer would actually pick.
    pub fn frontier(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.pfa.is_finite() && p.pmd.is_finite())
            .map(|p| (p.pfa, p.pmd))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            if out.last().is_none_or(|last| p.1 < last.1) {
                out.push(p);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceRegion {
    pfa_max: f64,
    pmd_max: f64,
}

impl ToleranceRegion {
    pub fn new(pfa_max: f64, pmd_max: f64) -> Result<Self> {
        for (name, v) in [("pfa_max", pfa_max), ("pmd_max", pmd_max)] {
            if !(v > 0.0 && v < 1.0) {
                return invalid(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        Ok(Self { pfa_max, pmd_max })
    }

    pub fn pfa_max(&self) -> f64 {
        self.pfa_max
    }

    pub fn pmd_max(&self) -> f64 {
        self.pmd_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    AWins,
    Draw,
    BWins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchmarkVerdict {
    pub outcome: Outcome,
    pub feasible_a: bool,
    pub feasible_b: bool,
}

/// `n` evenly spaced thresholds on `[lo, hi]`.
pub fn rho_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi < 1.0 && lo < hi) || n < 2 {
        return invalid(format!("need 0 < lo < hi < 1 and at least 2 points, got [{lo}, {hi}] x {n}"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect())
}

pub fn default_rho_grid() -> Vec<f64> {
    rho_grid(DEFAULT_RHO_MIN, DEFAULT_RHO_MAX, DEFAULT_GRID_POINTS).expect("default grid is valid")
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return invalid("rho grid is empty");
    }
    if grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return invalid("rho grid values must lie in (0, 1)");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("rho grid must be strictly increasing");
    }
    Ok(())
}

/// One coarse SNR estimate per antenna for each P-WMD draw.
fn pwmd_estimates(gammas: &[f64], eta: usize, cfg: &PwmdConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.draws == 0 {
        return invalid("P-WMD needs at least one estimation draw");
    }
    if !(cfg.interference_ratio >= 0.0) || !(cfg.noise_estimate_ratio > 0.0) {
        return invalid("P-WMD interference ratio must be >= 0 and noise estimate ratio > 0");
    }
    let spec: PreambleSpec<f64> = make_preamble(eta, cfg.preamble, cfg.seed)?;
    // Work in units of each antenna's noise power: signal power gamma, noise 1.
    Ok((0..cfg.draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut buf = vec![Complex::new(0.0, 0.0); spec.len()];
            gammas
                .iter()
                .enumerate()
                .map(|(j, &g)| {
                    let mut rng = stream(cfg.seed, StreamDomain::Estimation, j as u64, d);
                    fill_noise(&mut buf, 1.0, &mut rng);
                    add_signal(&mut buf, &spec, g, 0.0);
                    let b = average_power_unchecked(&buf, eta);
                    coarse_snr(b, cfg.noise_estimate_ratio, cfg.interference_ratio)
                })
                .collect()
        })
        .collect())
}

fn analytic_point(spec: &SchemeSpec, gammas: &[f64], eta: usize, rho: f64, est: &[Vec<f64>]) -> Result<Option<(f64, f64)>> {
    Ok(match spec {
        SchemeSpec::Wfa => {
            let w = vec![1.0 / gammas.len() as f64; gammas.len()];
            Some((pfa_multi(eta, rho, &w)?, pmd_multi(eta, rho, gammas, &w)?))
        }
        SchemeSpec::Single => Some((pfa_single(eta, rho)?, pmd_single(eta, rho, gammas[0])?)),
        SchemeSpec::Custom(w) => Some((pfa_multi(eta, rho, w.as_slice())?, pmd_multi(eta, rho, gammas, w.as_slice())?)),
        SchemeSpec::IWmd => match wmd_weights_full(gammas, rho) {
            Ok(w) => Some((pfa_multi(eta, rho, w.as_slice())?, pmd_multi(eta, rho, gammas, w.as_slice())?)),
            Err(Error::NoUsableAntenna { .. }) => None,
            Err(e) => return Err(e),
        },
        SchemeSpec::PWmd(_) => {
            let (mut pfa, mut pmd, mut usable) = (0.0, 0.0, 0usize);
            for g_hat in est {
                match wmd_point_unnormalized(eta, rho, g_hat, gammas) {
                    Some((a, b)) => {
                        pfa += a;
                        pmd += b;
                        usable += 1;
                    }
                    // The receiver gives up: it never alarms and always misses.
                    None => pmd += 1.0,
                }
            }
            let n = est.len() as f64;
            (usable > 0).then_some((pfa / n, pmd / n))
        }
    })
}

/// Operating point of WMD weights designed for `g_hat` on a channel with
/// true SNRs `gammas`, or `None` if no antenna clears the bound.
///
/// Both probabilities are invariant to rescaling the weights, so the raw
/// `mu / v` ratios are used without normalizing or allocating.
fn wmd_point_unnormalized(eta: usize, rho: f64, g_hat: &[f64], gammas: &[f64]) -> Option<(f64, f64)> {
    let bound = snr_bound(rho);
    let (mut s1, mut s2, mut num, mut den) = (0.0, 0.0, 0.0, 0.0);
    for (&gh, &g) in g_hat.iter().zip(gammas) {
        if gh > bound {
            let w = mean_term(gh, rho) / variance_term(gh, rho);
            s1 += w;
            s2 += w * w;
            num += w * mean_term(g, rho);
            den += w * w * variance_term(g, rho);
        }
    }
    if s1 == 0.0 {
        return None;
    }
    let eta = eta as f64;
    let pfa = q((2.0 * eta / (1.0 + rho * rho)).sqrt() * rho * s1 / s2.sqrt());
    let pmd = q(eta.sqrt() * num / den.sqrt());
    Some((pfa, pmd))
}

fn weights_at(spec: &SchemeSpec, gammas: &[f64], rho: f64) -> Result<Option<WeightVector<f64>>> {
    Ok(match spec {
        SchemeSpec::Wfa | SchemeSpec::Single => Some(WeightVector::equal(gammas.len())?),
        SchemeSpec::Custom(w) => Some(w.clone()),
        SchemeSpec::IWmd | SchemeSpec::PWmd(_) => match wmd_weights_full(gammas, rho) {
            Ok(w) => Some(w),
            Err(Error::NoUsableAntenna { .. }) => None,
            Err(e) => return Err(e),
        },
    })
}

fn empirical_pair(
    spec: &PreambleSpec<f64>,
    scenario: &AntennaScenario<f64>,
    weights: WeightVector<f64>,
    trials: u64,
    seed: u64,
    rho: f64,
) -> Result<(f64, f64)> {
    let base = TrialPlan::new(trials, seed, Hypothesis::NoiseOnly, MetricKind::CompensatedCombined).with_weights(weights);
    let pfa = estimate_rate(&base, spec, scenario, rho)?.rate;
    let miss = TrialPlan { hypothesis: Hypothesis::PacketPresent, ..base };
    let pmd = estimate_rate(&miss, spec, scenario, rho)?.rate;
    Ok((pfa, pmd))
}

fn montecarlo_point(
    scheme: &SchemeSpec,
    gammas: &[f64],
    preamble: &PreambleSpec<f64>,
    rho: f64,
    est: &[Vec<f64>],
    trials: u64,
    seed: u64,
) -> Result<Option<(f64, f64)>> {
    let scenario = AntennaScenario::from_snr(1.0, gammas)?;
    if let SchemeSpec::PWmd(_) = scheme {
        let per_draw = (trials / est.len() as u64).max(1);
        let (mut pfa, mut pmd, mut usable) = (0.0, 0.0, 0usize);
        for (d, g_hat) in est.iter().enumerate() {
            match wmd_weights_full(g_hat, rho) {
                Ok(w) => {
                    let (a, b) = empirical_pair(preamble, &scenario, w, per_draw, mix(seed, d as u64), rho)?;
                    pfa += a;
                    pmd += b;
                    usable += 1;
                }
                Err(Error::NoUsableAntenna { .. }) => pmd += 1.0,
                Err(e) => return Err(e),
            }
        }
        let n = est.len() as f64;
        return Ok((usable > 0).then_some((pfa / n, pmd / n)));
    }
    match weights_at(scheme, gammas, rho)? {
        Some(w) => Ok(Some(empirical_pair(preamble, &scenario, w, trials, seed, rho)?)),
        None => Ok(None),
    }
}

/// Sweep `rho_grid` and record one operating point per threshold.
pub fn build_curve(
    scheme: &SchemeSpec,
    gammas: &[f64],
    eta: usize,
    rho_grid: &[f64],
    mode: CurveMode,
) -> Result<MdFaCurve> {
    check_grid(rho_grid)?;
    if gammas.is_empty() {
        return invalid("need at least one antenna SNR");
    }
    if let Some((j, g)) = gammas.iter().enumerate().find(|(_, g)| !(**g > 0.0) || !g.is_finite()) {
        return invalid(format!("SNR {j} must be positive and finite, got {g}"));
    }
    match scheme {
        SchemeSpec::Single if gammas.len() != 1 => {
            return invalid(format!("single-antenna scheme given {} SNRs", gammas.len()));
        }
        SchemeSpec::Custom(w) if w.len() != gammas.len() => {
            return invalid(format!("{} weights for {} antennas", w.len(), gammas.len()));
        }
        _ => {}
    }
    let est = match scheme {
        SchemeSpec::PWmd(cfg) => pwmd_estimates(gammas, eta, cfg)?,
        _ => Vec::new(),
    };
    let pairs: Vec<Option<(f64, f64)>> = match mode {
        CurveMode::Analytic => rho_grid
            .par_iter()
            .map(|&rho| analytic_point(scheme, gammas, eta, rho, &est))
            .collect::<Result<_>>()?,
        CurveMode::MonteCarlo { trials, seed } => {
            let preamble = make_preamble(eta, PreambleKind::QpskRandom, seed)?;
            rho_grid
                .iter()
                .enumerate()
                .map(|(i, &rho)| montecarlo_point(scheme, gammas, &preamble, rho, &est, trials, mix(seed, i as u64)))
                .collect::<Result<_>>()?
        }
    };
    let points = rho_grid
        .iter()
        .zip(pairs)
        .filter_map(|(&rho, p)| p.map(|(pfa, pmd)| OperatingPoint { rho, pfa, pmd }))
        .collect();
    Ok(MdFaCurve::new(scheme.scheme(), points))
}

/// Logarithm with zero mapped to the smallest normal exponent, so that
/// interpolation toward an underflowed probability stays finite.
fn ln_floor(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE).ln()
}

fn interp(frontier: &[(f64, f64)], fa: f64) -> f64 {
    let i = frontier.partition_point(|p| p.0 < fa);
    if i < frontier.len() && frontier[i].0 == fa {
        return frontier[i].1;
    }
    let (lo, hi) = (frontier[i - 1], frontier[i]);
    let t = (ln_floor(fa) - ln_floor(lo.0)) / (ln_floor(hi.0) - ln_floor(lo.0));
    (ln_floor(lo.1) + t * (ln_floor(hi.1) - ln_floor(lo.1))).exp()
}

/// Miss probability on the frontier at false-alarm probability `pfa_target`,
/// interpolated linearly in log-log coordinates.
pub fn md_at_fa(curve: &MdFaCurve, pfa_target: f64) -> Result<f64> {
    let f = curve.frontier();
    let (lo, hi) = match (f.first(), f.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return invalid("curve has no points"),
    };
    if !(pfa_target >= lo && pfa_target <= hi) {
        return Err(Error::OutOfRange { value: pfa_target, lo, hi });
    }
    Ok(interp(&f, pfa_target))
}

/// The `[fa_lo, fa_hi]` interval of the frontier that lies in the region.
fn feasible_interval(frontier: &[(f64, f64)], region: &ToleranceRegion) -> Option<(f64, f64)> {
    let first = frontier.first()?;
    let hi = frontier.last()?.0.min(region.pfa_max);
    // pmd falls along the frontier, so the feasible set is an upper tail in pfa.
    let k = frontier.iter().position(|p| p.1 <= region.pmd_max)?;
    let lo = if k == 0 {
        first.0
    } else {
        let (a, b) = (frontier[k - 1], frontier[k]);
        let t = (ln_floor(region.pmd_max) - ln_floor(a.1)) / (ln_floor(b.1) - ln_floor(a.1));
        (ln_floor(a.0) + t * (ln_floor(b.0) - ln_floor(a.0))).exp().clamp(a.0, b.0)
    };
    (lo <= hi).then_some((lo, hi))
}

/// Pairwise verdict inside a tolerance region.
pub fn pareto_compare(a: &MdFaCurve, b: &MdFaCurve, region: &ToleranceRegion) -> BenchmarkVerdict {
    let fa = a.frontier();
    let fb = b.frontier();
    let ia = feasible_interval(&fa, region);
    let ib = feasible_interval(&fb, region);
    let verdict = |outcome| BenchmarkVerdict { outcome, feasible_a: ia.is_some(), feasible_b: ib.is_some() };
    let ((a_lo, a_hi), (b_lo, b_hi)) = match (ia, ib) {
        (Some(x), Some(y)) => (x, y),
        (Some(_), None) => return verdict(Outcome::AWins),
        (None, Some(_)) => return verdict(Outcome::BWins),
        (None, None) => return verdict(Outcome::Draw),
    };
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if lo > hi {
        return verdict(Outcome::Draw);
    }
    let mut probes: Vec<f64> = fa.iter().chain(&fb).map(|p| p.0).filter(|&x| x > lo && x < hi).collect();
    probes.push(lo);
    probes.push(hi);
    let (mut a_better, mut b_better) = (true, true);
    for x in probes {
        let ma = interp(&fa, x);
        let mb = interp(&fb, x);
        a_better &= ma < mb * (1.0 - DRAW_BAND);
        b_better &= mb < ma * (1.0 - DRAW_BAND);
    }
    verdict(match (a_better, b_better) {
        (true, _) => Outcome::AWins,
        (_, true) => Outcome::BWins,
        _ => Outcome::Draw,
    })
}

pub const CURVE_CSV_HEADER: [&str; 4] = ["rho", "pfa", "pmd", "scheme"];

pub fn write_curves_csv<W: Write>(out: W, curves: &[MdFaCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_CSV_HEADER)?;
    for c in curves {
        for p in &c.points {
            w.write_record([sci(p.rho), sci(p.pfa), sci(p.pmd), c.scheme.label().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
