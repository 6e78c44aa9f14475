//! Preamble construction and received-signal synthesis.
//!
//! A preamble is two identical short training sequences (STS) of `eta`
//! samples each, normalized to unit average power. The receiver sees
//! `y[n] = sqrt(P) s[n] + w[n]` on every antenna, with circular complex
//! Gaussian noise of total power `sigma^2` split evenly between the real and
//! imaginary parts.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{stream, StreamDomain};
use crate::scalar::Real;

/// Number of STS repetitions in a preamble.
pub const STS_COUNT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreambleKind {
    /// Unit-modulus QPSK symbols drawn from the seed.
    QpskRandom,
    /// Deterministic chirp `exp(i*pi*n^2/eta)`; the seed is ignored.
    ConstantEnvelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    PacketPresent,
    NoiseOnly,
}

impl Hypothesis {
    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::PacketPresent => "packet",
            Hypothesis::NoiseOnly => "noise",
        }
    }
}

/// Two-STS preamble with unit average power per STS.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleSpec<T> {
    eta: usize,
    sequence: Vec<Complex<T>>,
}

impl<T: Real> PreambleSpec<T> {
    /// Wrap an explicit STS, repeating it and normalizing to unit power.
    pub fn from_sts(sts: &[Complex<T>]) -> Result<Self> {
        if sts.is_empty() {
            return invalid("STS must contain at least one sample");
        }
        let eta = sts.len();
        let power = sts.iter().map(|s| s.norm_sqr()).sum::<T>() / T::from_usize_lossy(eta);
        if !(power > T::zero()) || !power.is_finite() {
            return invalid("STS must have finite, non-zero power");
        }
        let scale = power.sqrt().recip();
        let mut sequence = Vec::with_capacity(STS_COUNT * eta);
        for _ in 0..STS_COUNT {
            sequence.extend(sts.iter().map(|s| *s * scale));
        }
        Ok(Self { eta, sequence })
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn sequence(&self) -> &[Complex<T>] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Mean `|s[n]|^2` over the first STS.
    pub fn sts_power(&self) -> T {
        self.sequence[..self.eta].iter().map(|s| s.norm_sqr()).sum::<T>()
            / T::from_usize_lossy(self.eta)
    }
}

pub fn make_preamble<T: Real>(eta: usize, kind: PreambleKind, seed: u64) -> Result<PreambleSpec<T>> {
    if eta == 0 {
        return invalid("eta must be at least 1");
    }
    let sts: Vec<Complex<T>> = match kind {
        PreambleKind::QpskRandom => {
            let mut rng = stream(seed, StreamDomain::Preamble, 0, eta as u64);
            let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
            (0..eta)
                .map(|_| {
                    let bits: u8 = rng.random_range(0..4);
                    let re = if bits & 1 == 0 { h } else { -h };
                    let im = if bits & 2 == 0 { h } else { -h };
                    Complex::new(re, im)
                })
                .collect()
        }
        PreambleKind::ConstantEnvelope => (0..eta)
            .map(|n| {
                let phase = std::f64::consts::PI * (n * n) as f64 / eta as f64;
                Complex::new(T::lit(phase.cos()), T::lit(phase.sin()))
            })
            .collect(),
    };
    PreambleSpec::from_sts(&sts)
}

/// Per-antenna power budget.
///
/// Signal power `P` is shared; each antenna carries its own noise power, so
/// `gamma_j = P / sigma_j^2`. A zero noise power means a noiseless antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaScenario<T> {
    signal_power: T,
    noise_powers: Vec<T>,
    /// Phase advance of the second STS relative to the first, in radians.
    /// Models a residual carrier offset; zero everywhere except sensitivity demos.
    phase_rotation: T,
}

impl<T: Real> AntennaScenario<T> {
    /// Build from linear SNRs; `gamma = +inf` yields a noiseless antenna.
    pub fn from_snr(signal_power: T, snr_linear: &[T]) -> Result<Self> {
        if !(signal_power > T::zero()) || !signal_power.is_finite() {
            return invalid("signal power must be positive and finite");
        }
        if snr_linear.is_empty() {
            return invalid("scenario needs at least one antenna");
        }
        let mut noise_powers = Vec::with_capacity(snr_linear.len());
        for (j, &g) in snr_linear.iter().enumerate() {
            if !(g > T::zero()) {
                return invalid(format!("SNR of antenna {j} must be positive, got {g}"));
            }
            noise_powers.push(signal_power / g);
        }
        Ok(Self { signal_power, noise_powers, phase_rotation: T::zero() })
    }

    pub fn from_snr_db(signal_power: T, snr_db: &[T]) -> Result<Self> {
        let lin: Vec<T> = snr_db.iter().map(|&d| db_to_linear(d)).collect();
        Self::from_snr(signal_power, &lin)
    }

    /// Build from explicit noise powers. `signal_power` may be zero here, which
    /// describes a noise-only front end.
    pub fn from_noise(signal_power: T, noise_powers: &[T]) -> Result<Self> {
        if !(signal_power >= T::zero()) || !signal_power.is_finite() {
            return invalid("signal power must be nonnegative and finite");
        }
        if noise_powers.is_empty() {
            return invalid("scenario needs at least one antenna");
        }
        for (j, &s) in noise_powers.iter().enumerate() {
            if !(s >= T::zero()) || !s.is_finite() {
                return invalid(format!("noise power of antenna {j} must be finite and >= 0"));
            }
        }
        Ok(Self {
            signal_power,
            noise_powers: noise_powers.to_vec(),
            phase_rotation: T::zero(),
        })
    }

    pub fn with_phase_rotation(mut self, radians: T) -> Self {
        self.phase_rotation = radians;
        self
    }

    pub fn n_antennas(&self) -> usize {
        self.noise_powers.len()
    }

    pub fn signal_power(&self) -> T {
        self.signal_power
    }

    pub fn noise_power(&self, antenna: usize) -> T {
        self.noise_powers[antenna]
    }

    pub fn noise_powers(&self) -> &[T] {
        &self.noise_powers
    }

    pub fn phase_rotation(&self) -> T {
        self.phase_rotation
    }

    /// Linear SNR per antenna (`+inf` for noiseless antennas).
    pub fn snr_linear(&self) -> Vec<T> {
        self.noise_powers.iter().map(|&s| self.signal_power / s).collect()
    }
}

#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

#[inline]
pub fn linear_to_db<T: Real>(lin: T) -> T {
    T::lit(10.0) * lin.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock<T> {
    pub samples: Vec<Complex<T>>,
    pub hypothesis: Hypothesis,
    pub antenna: usize,
    pub rng_seed: u64,
    pub trial: u64,
}

/// Synthesize trial 0 of `antenna` under `hypothesis`.
pub fn synthesize_block<T: Real>(
    spec: &PreambleSpec<T>,
    scenario: &AntennaScenario<T>,
    antenna: usize,
    hypothesis: Hypothesis,
    seed: u64,
) -> Result<ReceivedBlock<T>> {
    synthesize_trial(spec, scenario, antenna, hypothesis, seed, 0)
}

/// Synthesize an arbitrary trial; the noise of `(seed, antenna, trial)` does
/// not depend on the hypothesis, so packet and noise-only blocks pair up.
pub fn synthesize_trial<T: Real>(
    spec: &PreambleSpec<T>,
    scenario: &AntennaScenario<T>,
    antenna: usize,
    hypothesis: Hypothesis,
    seed: u64,
    trial: u64,
) -> Result<ReceivedBlock<T>> {
    if antenna >= scenario.n_antennas() {
        return invalid(format!(
            "antenna index {antenna} out of range for {} antennas",
            scenario.n_antennas()
        ));
    }
    let mut samples = vec![Complex::new(T::zero(), T::zero()); spec.len()];
    fill_samples(&mut samples, spec, scenario, antenna, hypothesis, seed, trial);
    Ok(ReceivedBlock { samples, hypothesis, antenna, rng_seed: seed, trial })
}

/// Allocation-free core of [`synthesize_trial`]; `out.len()` must equal `spec.len()`.
pub(crate) fn fill_samples<T: Real>(
    out: &mut [Complex<T>],
    spec: &PreambleSpec<T>,
    scenario: &AntennaScenario<T>,
    antenna: usize,
    hypothesis: Hypothesis,
    seed: u64,
    trial: u64,
) {
    debug_assert_eq!(out.len(), spec.len());
    let sigma2 = scenario.noise_power(antenna);
    let mut rng = stream(seed, StreamDomain::Noise, antenna as u64, trial);
    fill_noise(out, sigma2, &mut rng);
    if hypothesis == Hypothesis::PacketPresent {
        add_signal(out, spec, scenario.signal_power(), scenario.phase_rotation());
    }
}

pub(crate) fn fill_noise<T: Real, R: Rng + ?Sized>(out: &mut [Complex<T>], sigma2: T, rng: &mut R) {
    let sd = (sigma2 / T::lit(2.0)).sqrt();
    for z in out.iter_mut() {
        let re = T::std_normal(rng);
        let im = T::std_normal(rng);
        *z = Complex::new(re * sd, im * sd);
    }
}

pub(crate) fn add_signal<T: Real>(out: &mut [Complex<T>], spec: &PreambleSpec<T>, power: T, phase: T) {
    let amp = power.sqrt();
    if phase == T::zero() {
        for (z, s) in out.iter_mut().zip(spec.sequence()) {
            *z += *s * amp;
        }
    } else {
        // Linear phase ramp: the second STS lags the first by `phase` radians.
        let eta = T::from_usize_lossy(spec.eta());
        for (n, (z, s)) in out.iter_mut().zip(spec.sequence()).enumerate() {
            let theta = phase * T::from_usize_lossy(n) / eta;
            *z += *s * Complex::from_polar(amp, theta);
        }
    }
}
