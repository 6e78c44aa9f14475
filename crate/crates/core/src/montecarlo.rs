//! Empirical false-alarm and missed-detection rates.
//!
//! Trial `t` on antenna `j` draws its noise from the stream keyed by
//! `(seed, j, t)`, so results do not depend on how rayon splits the work and
//! packet-present and noise-only runs with the same seed share noise.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{moments_raw, r_moments_raw};
use crate::error::{invalid, Result};
use crate::metrics::{autocorrelation_unchecked, average_power_unchecked};
use crate::signal::{fill_samples, AntennaScenario, Hypothesis, PreambleSpec};
use crate::fmt::sci;
use crate::weights::WeightVector;

/// Trials handled per rayon task.
const CHUNK: u64 = 4096;

/// Below this many samples per STS the Gaussian approximation is shaky.
pub const GAUSSIAN_MIN_ETA: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Schmidl-Cox `|a| / b > rho` on a single antenna.
    ScAbs,
    /// Real-part variant `Re(a) / b > rho` on a single antenna.
    RpReal,
    /// `sum_j w_j r_j / sigma_j^2 > 0` over all antennas.
    CompensatedCombined,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::ScAbs => "sc-abs",
            MetricKind::RpReal => "rp-real",
            MetricKind::CompensatedCombined => "compensated-combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub trials: u64,
    pub seed: u64,
    pub hypothesis: Hypothesis,
    pub metric: MetricKind,
    /// Combining weights; `None` means equal weights.
    pub weights: Option<WeightVector<f64>>,
}

impl TrialPlan {
    pub fn new(trials: u64, seed: u64, hypothesis: Hypothesis, metric: MetricKind) -> Self {
        Self { trials, seed, hypothesis, metric, weights: None }
    }

    pub fn with_weights(mut self, weights: WeightVector<f64>) -> Self {
        self.weights = Some(weights);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalRate {
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    /// Binomial standard deviation `sqrt(p (1 - p) / n)` at the empirical rate.
    pub std: f64,
}

impl EmpiricalRate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let rate = hits as f64 / trials as f64;
        Self { hits, trials, rate, std: (rate * (1.0 - rate) / trials as f64).sqrt() }
    }

    /// Distance to `p` in units of the binomial deviation at `p` itself.
    pub fn sigmas_from(&self, p: f64) -> f64 {
        let sd = (p * (1.0 - p) / self.trials as f64).sqrt();
        if sd == 0.0 {
            if self.rate == p { 0.0 } else { f64::INFINITY }
        } else {
            (self.rate - p) / sd
        }
    }
}

/// Per-antenna statistics of one trial.
#[derive(Debug, Clone, Copy)]
struct Observation {
    a: Complex<f64>,
    b: f64,
}

struct TrialRunner<'a> {
    spec: &'a PreambleSpec<f64>,
    scenario: &'a AntennaScenario<f64>,
    hypothesis: Hypothesis,
    seed: u64,
    eta: usize,
}

impl TrialRunner<'_> {
    fn observe(&self, buf: &mut [Complex<f64>], antenna: usize, trial: u64) -> Observation {
        fill_samples(buf, self.spec, self.scenario, antenna, self.hypothesis, self.seed, trial);
        Observation {
            a: autocorrelation_unchecked(buf, self.eta),
            b: average_power_unchecked(buf, self.eta),
        }
    }

    /// Count trials in `0..trials` for which `hit` returns true, in parallel.
    fn count<F>(&self, trials: u64, hit: F) -> u64
    where
        F: Fn(&Self, &mut [Complex<f64>], u64) -> bool + Sync,
    {
        let chunks = trials.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut buf = vec![Complex::new(0.0, 0.0); self.spec.len()];
                let end = ((c + 1) * CHUNK).min(trials);
                (c * CHUNK..end).filter(|&t| hit(self, &mut buf, t)).count() as u64
            })
            .sum()
    }
}

fn check_plan(plan: &TrialPlan, scenario: &AntennaScenario<f64>, rho: f64) -> Result<()> {
    if plan.trials == 0 {
        return invalid("trials must be at least 1");
    }
    if !(rho > 0.0 && rho < 1.0) {
        return invalid(format!("rho must lie in (0, 1), got {rho}"));
    }
    match plan.metric {
        MetricKind::ScAbs | MetricKind::RpReal if scenario.n_antennas() != 1 => invalid(format!(
            "{} is a single-antenna metric, scenario has {} antennas",
            plan.metric.label(),
            scenario.n_antennas()
        )),
        _ => Ok(()),
    }
}

fn decide(metric: MetricKind, obs: Observation, rho: f64) -> bool {
    match metric {
        MetricKind::ScAbs => obs.a.norm() > rho * obs.b,
        MetricKind::RpReal | MetricKind::CompensatedCombined => obs.a.re - rho * obs.b > 0.0,
    }
}

/// Estimate the false-alarm rate (noise-only plan) or miss rate (packet plan).
pub fn estimate_rate(
    plan: &TrialPlan,
    spec: &PreambleSpec<f64>,
    scenario: &AntennaScenario<f64>,
    rho: f64,
) -> Result<EmpiricalRate> {
    check_plan(plan, scenario, rho)?;
    let n = scenario.n_antennas();
    let weights = match &plan.weights {
        Some(w) if w.len() != n => {
            return invalid(format!("{} weights for {n} antennas", w.len()));
        }
        Some(w) => w.as_slice().to_vec(),
        None => vec![1.0 / n as f64; n],
    };
    // Normalizing by the noise floor keeps antennas on the scale the
    // weights were designed for; a noiseless antenna is left unscaled.
    let scale: Vec<f64> = scenario
        .noise_powers()
        .iter()
        .zip(&weights)
        .map(|(&s, &w)| if s > 0.0 { w / s } else { w })
        .collect();
    let runner = TrialRunner {
        spec,
        scenario,
        hypothesis: plan.hypothesis,
        seed: plan.seed,
        eta: spec.eta(),
    };
    let want_detection = plan.hypothesis == Hypothesis::NoiseOnly;
    let metric = plan.metric;
    let hits = runner.count(plan.trials, |r, buf, t| {
        let detected = match metric {
            MetricKind::CompensatedCombined => {
                let mut stat = 0.0;
                for (j, &c) in scale.iter().enumerate() {
                    if c != 0.0 {
                        let o = r.observe(buf, j, t);
                        stat += c * (o.a.re - rho * o.b);
                    }
                }
                stat > 0.0
            }
            _ => decide(metric, r.observe(buf, 0, t), rho),
        };
        detected == want_detection
    });
    Ok(EmpiricalRate::from_counts(hits, plan.trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedReport {
    pub sc_abs: EmpiricalRate,
    pub rp_real: EmpiricalRate,
    /// `rp_real.rate - sc_abs.rate`.
    pub difference: f64,
    /// Standard error of the paired per-trial difference.
    pub difference_std: f64,
    /// Trials where the real-part metric detects but the magnitude metric does not.
    pub containment_violations: u64,
}

/// Run S&C and its real-part variant on identical noise realizations.
pub fn compare_metrics(
    trials: u64,
    seed: u64,
    hypothesis: Hypothesis,
    spec: &PreambleSpec<f64>,
    scenario: &AntennaScenario<f64>,
    rho: f64,
) -> Result<PairedReport> {
    let plan = TrialPlan::new(trials, seed, hypothesis, MetricKind::ScAbs);
    check_plan(&plan, scenario, rho)?;
    let runner = TrialRunner { spec, scenario, hypothesis, seed, eta: spec.eta() };
    let chunks = trials.div_ceil(CHUNK);
    let want_detection = hypothesis == Hypothesis::NoiseOnly;
    // (sc hits, rp hits, trials where exactly one metric hits, violations)
    let (sc, rp, discordant, viol) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![Complex::new(0.0, 0.0); spec.len()];
            let mut acc = (0u64, 0u64, 0u64, 0u64);
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let o = runner.observe(&mut buf, 0, t);
                let d_sc = decide(MetricKind::ScAbs, o, rho);
                let d_rp = decide(MetricKind::RpReal, o, rho);
                let (h_sc, h_rp) = (d_sc == want_detection, d_rp == want_detection);
                acc.0 += h_sc as u64;
                acc.1 += h_rp as u64;
                acc.2 += (h_sc != h_rp) as u64;
                acc.3 += (d_rp && !d_sc) as u64;
            }
            acc
        })
        .reduce(|| (0, 0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2, x.3 + y.3));
    let n = trials as f64;
    let difference = (rp as f64 - sc as f64) / n;
    // Per-trial difference takes values in {-1, 0, 1}; E[d^2] = discordant / n.
    let var_d = (discordant as f64 / n - difference * difference).max(0.0);
    Ok(PairedReport {
        sc_abs: EmpiricalRate::from_counts(sc, trials),
        rp_real: EmpiricalRate::from_counts(rp, trials),
        difference,
        difference_std: (var_d / n).sqrt(),
        containment_violations: viol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub statistic: &'static str,
    pub empirical: f64,
    pub analytic: f64,
    /// `None` when the analytic value is zero.
    pub rel_error: Option<f64>,
    /// Standard error of the empirical estimate.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub eta: usize,
    pub trials: u64,
    pub rho: f64,
    /// Set when `eta` is too small for the Gaussian approximation.
    pub gaussian_caution: bool,
    pub checks: Vec<MomentCheck>,
}

impl MomentReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().filter_map(|c| c.rel_error).fold(0.0, f64::max)
    }
}

/// Streaming mean and variance, mergeable across workers.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }
}

/// Empirical moments of `a_R`, `b` and `r` on antenna 0 under a packet, against closed form.
pub fn validate_moments(
    spec: &PreambleSpec<f64>,
    scenario: &AntennaScenario<f64>,
    trials: u64,
    seed: u64,
    rho: f64,
) -> Result<MomentReport> {
    if trials < 2 {
        return invalid("moment validation needs at least 2 trials");
    }
    let eta = spec.eta();
    let power = scenario.signal_power();
    let sigma2 = scenario.noise_power(0);
    let raw = moments_raw(power, sigma2, eta)?;
    let (r_mean, r_var) = r_moments_raw(power, sigma2, eta, rho)?;
    let runner = TrialRunner {
        spec,
        scenario,
        hypothesis: Hypothesis::PacketPresent,
        seed,
        eta,
    };
    let chunks = trials.div_ceil(CHUNK);
    let acc = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![Complex::new(0.0, 0.0); spec.len()];
            let mut w = [Welford::default(); 3];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let o = runner.observe(&mut buf, 0, t);
                w[0].push(o.a.re);
                w[1].push(o.b);
                w[2].push(o.a.re - rho * o.b);
            }
            w
        })
        .reduce(
            || [Welford::default(); 3],
            |x, y| [x[0].merge(y[0]), x[1].merge(y[1]), x[2].merge(y[2])],
        );
    let n = trials as f64;
    let mut checks = Vec::with_capacity(6);
    let targets = [
        ("a_R", raw.e_ar, raw.var_ar),
        ("b", raw.e_b, raw.var_b),
        ("r", r_mean, r_var),
    ];
    for (w, (name, mean, var)) in acc.iter().zip(targets) {
        let emp_var = w.variance();
        checks.push(check(mean_label(name), w.mean, mean, (emp_var / n).sqrt()));
        // Var of the sample variance is roughly 2 var^2 / n for near-Gaussian data.
        checks.push(check(var_label(name), emp_var, var, emp_var * (2.0 / n).sqrt()));
    }
    Ok(MomentReport { eta, trials, rho, gaussian_caution: eta < GAUSSIAN_MIN_ETA, checks })
}

fn mean_label(name: &str) -> &'static str {
    match name {
        "a_R" => "E[a_R]",
        "b" => "E[b]",
        _ => "E[r]",
    }
}

fn var_label(name: &str) -> &'static str {
    match name {
        "a_R" => "Var[a_R]",
        "b" => "Var[b]",
        _ => "Var[r]",
    }
}

fn check(statistic: &'static str, empirical: f64, analytic: f64, std_error: f64) -> MomentCheck {
    let rel_error = (analytic != 0.0).then(|| ((empirical - analytic) / analytic).abs());
    MomentCheck { statistic, empirical, analytic, rel_error, std_error }
}

/// One line of the rate CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRecord {
    pub metric: MetricKind,
    pub hypothesis: Hypothesis,
    pub eta: usize,
    pub rho: f64,
    /// Linear SNR per antenna; empty for noise-only runs.
    pub gamma: Vec<f64>,
    pub rate: EmpiricalRate,
}

pub const RATE_CSV_HEADER: [&str; 9] = ["metric", "hypothesis", "eta", "rho", "gamma", "trials", "hits", "rate", "std"];

/// Write records as CSV; multi-antenna SNRs are joined with `;`.
pub fn write_rate_csv<W: Write>(out: W, records: &[RateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_CSV_HEADER)?;
    for r in records {
        let gamma = if r.gamma.is_empty() {
            "0".to_string()
        } else {
            r.gamma.iter().map(|&g| sci(g)).collect::<Vec<_>>().join(";")
        };
        w.write_record([
            r.metric.label().to_string(),
            r.hypothesis.label().to_string(),
            r.eta.to_string(),
            sci(r.rho),
            gamma,
            r.rate.trials.to_string(),
            r.rate.hits.to_string(),
            sci(r.rate.rate),
            sci(r.rate.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{pfa_single, pmd_single};
    use crate::signal::{make_preamble, PreambleKind};

    fn spec(eta: usize) -> PreambleSpec<f64> {
        make_preamble(eta, PreambleKind::QpskRandom, 11).unwrap()
    }

    fn single(gamma: f64) -> AntennaScenario<f64> {
        AntennaScenario::from_snr(1.0, &[gamma]).unwrap()
    }

    #[test]
    fn noiseless_packet_never_missed() {
        let sc = AntennaScenario::from_noise(1.0, &[0.0]).unwrap();
        let plan = TrialPlan::new(1000, 1, Hypothesis::PacketPresent, MetricKind::RpReal);
        let r = estimate_rate(&plan, &spec(16), &sc, 0.9).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn threshold_near_one_misses_almost_always() {
        let plan = TrialPlan::new(2000, 2, Hypothesis::PacketPresent, MetricKind::CompensatedCombined);
        let r = estimate_rate(&plan, &spec(16), &single(1.0), 0.9999).unwrap();
        assert!(r.rate > 0.99, "rate {}", r.rate);
    }

    #[test]
    fn false_alarm_near_analytic_at_moderate_rate() {
        // rho = 0.1 keeps the Gaussian approximation error well below 4 std.
        let plan = TrialPlan::new(100_000, 3, Hypothesis::NoiseOnly, MetricKind::RpReal);
        let r = estimate_rate(&plan, &spec(64), &single(1.0), 0.1).unwrap();
        let p = pfa_single(64, 0.1).unwrap();
        assert!(r.sigmas_from(p).abs() < 6.0, "{} vs {p}", r.rate);
    }

    #[test]
    fn miss_rate_near_analytic() {
        let plan = TrialPlan::new(100_000, 4, Hypothesis::PacketPresent, MetricKind::CompensatedCombined);
        let r = estimate_rate(&plan, &spec(64), &single(1.0), 0.45).unwrap();
        let p = pmd_single(64, 0.45, 1.0).unwrap();
        assert!(((r.rate - p) / p).abs() < 0.1, "{} vs {p}", r.rate);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = spec(16);
        let sc = single(1.0);
        let plan = TrialPlan::new(20_000, 9, Hypothesis::NoiseOnly, MetricKind::ScAbs);
        let a = estimate_rate(&plan, &s, &sc, 0.3).unwrap();
        let b = estimate_rate(&plan, &s, &sc, 0.3).unwrap();
        assert_eq!(a, b);
        let other = TrialPlan { seed: 10, ..plan };
        assert_ne!(estimate_rate(&other, &s, &sc, 0.3).unwrap().hits, a.hits);
    }

    #[test]
    fn rate_is_hits_over_trials() {
        let r = EmpiricalRate::from_counts(25, 100);
        assert_eq!(r.rate, 0.25);
        assert!((r.std - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn plan_validation() {
        let s = spec(16);
        let two = AntennaScenario::from_snr(1.0, &[1.0, 2.0]).unwrap();
        let plan = TrialPlan::new(10, 1, Hypothesis::NoiseOnly, MetricKind::ScAbs);
        assert!(estimate_rate(&plan, &s, &two, 0.3).is_err());
        let zero = TrialPlan::new(0, 1, Hypothesis::NoiseOnly, MetricKind::RpReal);
        assert!(estimate_rate(&zero, &s, &single(1.0), 0.3).is_err());
        let bad_w = TrialPlan::new(10, 1, Hypothesis::NoiseOnly, MetricKind::CompensatedCombined)
            .with_weights(WeightVector::equal(3).unwrap());
        assert!(estimate_rate(&bad_w, &s, &two, 0.3).is_err());
    }

    #[test]
    fn paired_containment_and_noiseless_agreement() {
        let rep = compare_metrics(50_000, 5, Hypothesis::NoiseOnly, &spec(16), &single(1.0), 0.3).unwrap();
        assert_eq!(rep.containment_violations, 0);
        assert!(rep.rp_real.hits <= rep.sc_abs.hits);
        let clean = AntennaScenario::from_noise(1.0, &[0.0]).unwrap();
        let rep = compare_metrics(100, 5, Hypothesis::PacketPresent, &spec(16), &clean, 0.3).unwrap();
        assert_eq!(rep.difference, 0.0);
        assert_eq!(rep.sc_abs.hits, 0);
    }

    #[test]
    fn moment_report_flags_small_eta() {
        let s = make_preamble(1, PreambleKind::QpskRandom, 1).unwrap();
        let sc = AntennaScenario::from_noise(1.0, &[1.0]).unwrap();
        let rep = validate_moments(&s, &sc, 10_000, 1, 0.3).unwrap();
        assert!(rep.gaussian_caution);
        assert_eq!(rep.checks.len(), 6);
        let rep16 = validate_moments(&spec(16), &sc, 10_000, 1, 0.3).unwrap();
        assert!(!rep16.gaussian_caution);
    }

    #[test]
    fn zero_signal_autocorrelation_is_centered() {
        let sc = AntennaScenario::from_noise(0.0, &[1.0]).unwrap();
        let rep = validate_moments(&spec(64), &sc, 100_000, 8, 0.3).unwrap();
        let e_ar = &rep.checks[0];
        assert_eq!(e_ar.analytic, 0.0);
        assert!(e_ar.rel_error.is_none());
        let bound = 4.0 / (2.0 * 64.0 * 100_000.0f64).sqrt();
        assert!(e_ar.empirical.abs() < bound, "{} vs {bound}", e_ar.empirical);
    }

    #[test]
    fn welford_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 + 5.0).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-10);
    }

    #[test]
    fn csv_layout() {
        let rec = RateRecord {
            metric: MetricKind::RpReal,
            hypothesis: Hypothesis::NoiseOnly,
            eta: 16,
            rho: 0.2,
            gamma: vec![],
            rate: EmpiricalRate::from_counts(1, 4),
        };
        let mut buf = Vec::new();
        write_rate_csv(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "metric,hypothesis,eta,rho,gamma,trials,hits,rate,std");
        assert_eq!(
            lines.next().unwrap(),
            "rp-real,noise,16,2.0000000000000001e-1,0,4,1,2.5000000000000000e-1,2.1650635094610965e-1"
        );
    }
}
