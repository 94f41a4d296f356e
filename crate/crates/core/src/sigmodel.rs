//! Single-target Swerling-0 signal model and the band-limited matched filter.
//!
//! Sample `j` of a snapshot sits at the integer delay `n = j − ⌊tb/2⌋`, so the
//! samples cover the regularized observation interval `[−tb/2, tb/2)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::specialfns::sinc;

/// Binary target state `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TargetState {
    Absent,
    Present,
}

impl TargetState {
    #[inline]
    pub fn is_present(self) -> bool {
        matches!(self, TargetState::Present)
    }

    #[inline]
    pub fn from_present(present: bool) -> Self {
        if present {
            TargetState::Present
        } else {
            TargetState::Absent
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.is_present() as usize
    }
}

impl From<TargetState> for u8 {
    fn from(s: TargetState) -> u8 {
        s.index() as u8
    }
}

impl TryFrom<u8> for TargetState {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(TargetState::Absent),
            1 => Ok(TargetState::Present),
            other => Err(format!("target state must be 0 or 1, got {other}")),
        }
    }
}

/// How the scattering phase φ₀ is chosen for each snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhaseMode {
    /// Uniform on `[0, 2π)`, drawn independently per snapshot.
    #[default]
    Random,
    Fixed(f64),
}

impl Serialize for PhaseMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhaseMode::Random => s.serialize_str("random"),
            PhaseMode::Fixed(phi) => s.serialize_f64(*phi),
        }
    }
}

impl<'de> Deserialize<'de> for PhaseMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(phi) => Ok(PhaseMode::Fixed(phi)),
            Raw::Text(t) if t == "random" => Ok(PhaseMode::Random),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "phase must be a number or \"random\", got {t:?}"
            ))),
        }
    }
}

/// (De)serializes an SNR in dB, writing `−∞` (zero linear SNR) as `"-inf"`.
pub mod serde_db {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        parse(Raw::deserialize(d)?).map_err(serde::de::Error::custom)
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Raw {
        Num(f64),
        Text(String),
    }

    pub(crate) fn parse(raw: Raw) -> Result<f64, String> {
        match raw {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => t
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid SNR value {t:?}")),
        }
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                if *x == f64::NEG_INFINITY {
                    seq.serialize_element("-inf")?;
                } else {
                    seq.serialize_element(x)?;
                }
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<super::Raw>::deserialize(d)?
                .into_iter()
                .map(|r| super::parse(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// Physical and statistical parameters of one detection scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Time-bandwidth product: number of Nyquist samples.
    pub tb: usize,
    /// ρ² = α²/N₀ in dB; `−∞` means zero SNR.
    #[serde(with = "serde_db")]
    pub snr_db: f64,
    /// π(1), prior probability that a target is present.
    pub prior_present: f64,
    pub true_state: TargetState,
    /// Regularized delay x₀ in `[−tb/2, tb/2)`.
    pub true_position: f64,
    #[serde(default)]
    pub true_phase: PhaseMode,
    /// N₀, total complex noise variance per sample.
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise_power() -> f64 {
    1.0
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            tb: 32,
            snr_db: 5.0,
            prior_present: 0.5,
            true_state: TargetState::Present,
            true_position: 0.0,
            true_phase: PhaseMode::Random,
            noise_power: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tb < 2 {
            return Err(Error::validation(
                "tb",
                format!("must be ≥ 2, got {}", self.tb),
            ));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::INFINITY {
            return Err(Error::validation(
                "snr_db",
                format!("must be finite or -inf, got {}", self.snr_db),
            ));
        }
        if !(0.0..=1.0).contains(&self.prior_present) {
            return Err(Error::validation(
                "prior_present",
                format!("must lie in [0, 1], got {}", self.prior_present),
            ));
        }
        let half = self.tb as f64 / 2.0;
        if !(self.true_position >= -half && self.true_position < half) {
            return Err(Error::validation(
                "true_position",
                format!(
                    "must lie in [{}, {}), got {}",
                    -half, half, self.true_position
                ),
            ));
        }
        if let PhaseMode::Fixed(phi) = self.true_phase {
            if !phi.is_finite() {
                return Err(Error::validation(
                    "true_phase",
                    "fixed phase must be finite",
                ));
            }
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::validation(
                "noise_power",
                format!("must be positive, got {}", self.noise_power),
            ));
        }
        Ok(())
    }

    /// Linear SNR ρ².
    #[inline]
    pub fn rho2(&self) -> f64 {
        if self.snr_db == f64::NEG_INFINITY {
            0.0
        } else {
            10f64.powf(self.snr_db / 10.0)
        }
    }

    /// Scattering amplitude α = √(ρ²N₀).
    #[inline]
    pub fn alpha(&self) -> f64 {
        (self.rho2() * self.noise_power).sqrt()
    }

    /// Integer delay of sample 0.
    #[inline]
    pub fn first_sample_index(&self) -> i64 {
        -((self.tb / 2) as i64)
    }

    /// Left edge of the observation interval, `−tb/2`.
    #[inline]
    pub fn interval_start(&self) -> f64 {
        -(self.tb as f64) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        let half = self.tb as f64 / 2.0;
        x >= -half && x < half
    }

    /// Distance from x₀ to the nearer interval edge.
    pub fn edge_margin(&self) -> f64 {
        let half = self.tb as f64 / 2.0;
        (half - self.true_position.abs()).max(0.0)
    }
}

/// Ground truth of a synthesized snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub state: TargetState,
    pub position: f64,
    pub phase: f64,
}

/// One received signal. The noise draw is kept alongside the samples so
/// verification code can evaluate the noise field on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub samples: Vec<Complex64>,
    pub noise: Vec<Complex64>,
    pub truth: Truth,
    first_index: i64,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Integer delay of `samples[0]`.
    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    /// Build a snapshot from explicit samples, e.g. for linearity checks.
    pub fn from_parts(samples: Vec<Complex64>, noise: Vec<Complex64>, truth: Truth) -> Self {
        let first_index = -((samples.len() / 2) as i64);
        Self {
            samples,
            noise,
            truth,
            first_index,
        }
    }
}

/// Draw a snapshot with the configured true state.
pub fn synthesize<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Snapshot {
    synthesize_with_state(config, config.true_state, rng)
}

/// `y(n) = v·α·e^{jφ}·sinc(n − x₀) + w(n)`, `w(n) ~ CN(0, N₀)` i.i.d.
pub fn synthesize_with_state<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    state: TargetState,
    rng: &mut R,
) -> Snapshot {
    let phase = match config.true_phase {
        PhaseMode::Random => 2.0 * PI * rng.gen::<f64>(),
        PhaseMode::Fixed(phi) => phi,
    };
    let sigma = (0.5 * config.noise_power).sqrt();
    let noise: Vec<Complex64> = (0..config.tb)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    let first_index = config.first_sample_index();
    let samples = if state.is_present() {
        let amp = Complex64::from_polar(config.alpha(), phase);
        noise
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let n = (first_index + j as i64) as f64;
                amp * sinc(n - config.true_position) + w
            })
            .collect()
    } else {
        noise.clone()
    };
    Snapshot {
        samples,
        noise,
        truth: Truth {
            state,
            position: config.true_position,
            phase,
        },
        first_index,
    }
}

fn check_delay(len: usize, x: f64) -> Result<()> {
    let half = len as f64 / 2.0;
    if x >= -half && x < half {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "delay {x} outside observation interval [{}, {half})",
            -half
        )))
    }
}

/// Σₙ sinc(n − x)·s(n) over the snapshot's sample grid.
#[inline]
pub(crate) fn sinc_correlate(samples: &[Complex64], first_index: i64, x: f64) -> Complex64 {
    samples
        .iter()
        .enumerate()
        .map(|(j, s)| s * sinc((first_index + j as i64) as f64 - x))
        .sum()
}

/// Noise component of the matched-filter field, `w₀(x) = Σ sinc(n − x)·w(n)`.
pub fn noise_field(snapshot: &Snapshot, x: f64) -> Result<Complex64> {
    check_delay(snapshot.len(), x)?;
    Ok(sinc_correlate(&snapshot.noise, snapshot.first_index, x))
}

/// Matched-filter output `uᴴ(x)·y`.
pub fn matched_filter(snapshot: &Snapshot, x: f64) -> Result<Complex64> {
    check_delay(snapshot.len(), x)?;
    Ok(sinc_correlate(&snapshot.samples, snapshot.first_index, x))
}

/// Matched-filter outputs on the uniform grid `x_g = −tb/2 + g/oversample`,
/// `g = 0..tb·oversample`, computed with one FFT correlation per sub-sample
/// fraction instead of `O(tb)` sinc sums per grid point.
pub struct MatchedFilterBank {
    tb: usize,
    oversample: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // One per residue class g mod oversample.
    kernels: Vec<Vec<Complex64>>,
    // Offset added to the class-local index to address the correlation output.
    first_k: Vec<i64>,
}

impl fmt::Debug for MatchedFilterBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatchedFilterBank")
            .field("tb", &self.tb)
            .field("oversample", &self.oversample)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl MatchedFilterBank {
    pub fn new(tb: usize, oversample: usize) -> Result<Self> {
        if tb < 2 {
            return Err(Error::validation("tb", format!("must be ≥ 2, got {tb}")));
        }
        if oversample == 0 {
            return Err(Error::validation("oversample", "must be ≥ 1"));
        }
        let kernel_len = 2 * tb + 1;
        let fft_len = (tb + kernel_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);

        // x_g − n₀ = offset + g/oversample, offset = ⌊tb/2⌋ − tb/2 ∈ {0, −½}.
        let offset = (tb / 2) as f64 - tb as f64 / 2.0;
        let mut kernels = Vec::with_capacity(oversample);
        let mut first_k = Vec::with_capacity(oversample);
        for class in 0..oversample {
            let t = offset + class as f64 / oversample as f64;
            let k0 = t.floor();
            let frac = t - k0;
            let k0 = k0 as i64;
            // d = j − k spans [−(k0 + tb − 1), tb − 1 − k0]; store h reversed.
            let dmax = tb as i64 - 1 - k0;
            let dmin = -(k0 + tb as i64 - 1);
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            for (i, slot) in buf.iter_mut().enumerate().take((dmax - dmin + 1) as usize) {
                let d = dmax - i as i64;
                *slot = Complex64::new(sinc(d as f64 - frac), 0.0);
            }
            forward.process(&mut buf);
            kernels.push(buf);
            // conv index t = dmax + k with k = k0 + i.
            first_k.push(dmax + k0);
        }
        Ok(Self {
            tb,
            oversample,
            fft_len,
            forward,
            inverse,
            kernels,
            first_k,
        })
    }

    pub fn tb(&self) -> usize {
        self.tb
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn grid_len(&self) -> usize {
        self.tb * self.oversample
    }

    pub fn grid_position(&self, g: usize) -> f64 {
        -(self.tb as f64) / 2.0 + g as f64 / self.oversample as f64
    }

    /// Fill `out` with the matched-filter field on the grid.
    pub fn evaluate(&self, samples: &[Complex64], out: &mut Vec<Complex64>) {
        assert_eq!(samples.len(), self.tb, "snapshot length must equal tb");
        let zero = Complex64::new(0.0, 0.0);
        let mut spectrum = vec![zero; self.fft_len];
        spectrum[..self.tb].copy_from_slice(samples);
        self.forward.process(&mut spectrum);

        out.clear();
        out.resize(self.grid_len(), zero);
        let scale = 1.0 / self.fft_len as f64;
        let mut work = vec![zero; self.fft_len];
        for (class, kernel) in self.kernels.iter().enumerate() {
            for ((w, s), k) in work.iter_mut().zip(&spectrum).zip(kernel) {
                *w = s * k;
            }
            self.inverse.process(&mut work);
            let base = self.first_k[class] as usize;
            for i in 0..self.tb {
                out[class + i * self.oversample] = work[base + i] * scale;
            }
        }
    }
}
