//! Rotating-drum trial synthesis: a 3×3×2 taxel array scanning a texture
//! plate at programmed speed and contact force.
//!
//! The drum carries one of the 16 [`crate::texture`] plates past the sensor.
//! Each of the nine top-layer taxels reads the local surface height through a
//! saturating force gain; the nine bottom-layer taxels see spatially and
//! temporally smoothed versions of the top-layer signals (deeper receptors
//! with larger receptive fields). Readings get per-channel Gaussian noise and
//! 10-bit quantization.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use ndarray::Array2;
use rand_distr::{Distribution, Normal, Uniform};

use crate::math;
use crate::neuron::SAMPLE_RATE_HZ;
use crate::seeds;
use crate::texture::TextureSpec;

/// Sensor channels: 2 layers × 3×3 grid.
pub const N_CHANNELS: usize = 18;
/// Taxels per layer.
pub const LAYER_CHANNELS: usize = 9;
/// Grid pitch in mm; columns are offset along the scan direction.
pub const TAXEL_PITCH_MM: f64 = 5.0;
/// Quantization ceiling: 10-bit readings in 0..=1023.
pub const MAX_LEVEL: u16 = 1023;
/// Default scan length in mm (240 mm at 40–120 mm/s gives 6–2 s trials).
pub const DEFAULT_SCAN_LENGTH_MM: f64 = 240.0;
/// The drum's programmed scan speeds (mm/s).
pub const STANDARD_SPEEDS_MM_S: [f64; 5] = [40.0, 60.0, 80.0, 100.0, 120.0];
/// The drum's programmed contact forces (g).
pub const STANDARD_FORCES_G: [f64; 3] = [250.0, 500.0, 1000.0];
/// Reference force: readings at 500 g define the force-invariance target.
pub const REFERENCE_FORCE_G: f64 = 500.0;
/// Index of [`REFERENCE_FORCE_G`] within [`STANDARD_FORCES_G`].
pub const REFERENCE_FORCE_INDEX: usize = 1;

/// Index of a programmed speed within [`STANDARD_SPEEDS_MM_S`], if standard.
pub fn speed_index(speed_mm_s: f64) -> Option<usize> {
    STANDARD_SPEEDS_MM_S.iter().position(|&s| s == speed_mm_s)
}

/// Index of a programmed force within [`STANDARD_FORCES_G`], if standard.
pub fn force_index(force_g: f64) -> Option<usize> {
    STANDARD_FORCES_G.iter().position(|&f| f == force_g)
}

/// Invalid trial condition parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionError {
    /// Speed was zero, negative, or non-finite.
    BadSpeed,
    /// Force was zero, negative, or non-finite.
    BadForce,
    /// Scan length was zero, negative, or non-finite.
    BadScanLength,
}

impl fmt::Display for ConditionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadSpeed => write!(f, "speed must be positive and finite"),
            Self::BadForce => write!(f, "force must be positive and finite"),
            Self::BadScanLength => write!(f, "scan length must be positive and finite"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ConditionError {}

/// Drum programming for one trial: scan speed, contact force, scan length.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialCondition {
    speed_mm_s: f64,
    force_g: f64,
    scan_length_mm: f64,
}

impl TrialCondition {
    /// A condition with the default 240 mm scan length.
    pub fn new(speed_mm_s: f64, force_g: f64) -> Result<Self, ConditionError> {
        Self::with_scan_length(speed_mm_s, force_g, DEFAULT_SCAN_LENGTH_MM)
    }

    /// A condition with an explicit scan length.
    pub fn with_scan_length(
        speed_mm_s: f64,
        force_g: f64,
        scan_length_mm: f64,
    ) -> Result<Self, ConditionError> {
        if !(speed_mm_s.is_finite() && speed_mm_s > 0.0) {
            return Err(ConditionError::BadSpeed);
        }
        if !(force_g.is_finite() && force_g > 0.0) {
            return Err(ConditionError::BadForce);
        }
        if !(scan_length_mm.is_finite() && scan_length_mm > 0.0) {
            return Err(ConditionError::BadScanLength);
        }
        Ok(Self {
            speed_mm_s,
            force_g,
            scan_length_mm,
        })
    }

    /// Scan speed in mm/s.
    pub fn speed_mm_s(&self) -> f64 {
        self.speed_mm_s
    }

    /// Contact force in grams.
    pub fn force_g(&self) -> f64 {
        self.force_g
    }

    /// Scan length in mm.
    pub fn scan_length_mm(&self) -> f64 {
        self.scan_length_mm
    }

    /// Trial duration in seconds (scan length over speed).
    pub fn duration_s(&self) -> f64 {
        self.scan_length_mm / self.speed_mm_s
    }

    /// Samples in the trial at the 1 kHz sensor rate.
    pub fn n_samples(&self) -> usize {
        math::round(self.duration_s() * SAMPLE_RATE_HZ) as usize
    }
}

/// Signal-model constants for trial synthesis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrumConfig {
    /// Contact baseline of the normalized pre-gain signal.
    pub baseline: f64,
    /// Signal amplitude per mm of profile height.
    pub amplitude_per_mm: f64,
    /// Gaussian noise σ, in full-scale units, added pre-quantization.
    pub noise_sigma: f64,
    /// Force-gain exponent: gain = (force / reference)^exponent.
    pub gain_exponent: f64,
    /// Force at which the gain is exactly 1 (before per-taxel variation).
    pub gain_reference_g: f64,
    /// Half-width of the uniform per-taxel gain variation (±5% → 0.05).
    pub gain_jitter: f64,
    /// Causal temporal smoothing window for the bottom layer, in ms.
    pub smoothing_window_ms: usize,
}

impl Default for DrumConfig {
    fn default() -> Self {
        Self {
            baseline: 0.22,
            amplitude_per_mm: 0.18,
            noise_sigma: 0.01,
            gain_exponent: 0.7,
            gain_reference_g: 500.0,
            gain_jitter: 0.05,
            smoothing_window_ms: 50,
        }
    }
}

/// Fixed per-taxel multiplicative gain variation for one dataset.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaxelGains {
    /// `1 + γ_i` factors, one per channel.
    factors: [f64; N_CHANNELS],
}

impl TaxelGains {
    /// Draws the per-taxel variation uniformly from ±`jitter` using `seed`.
    pub fn from_seed(seed: u64, jitter: f64) -> Self {
        let mut rng = seeds::rng_from_seed(seed);
        let dist = Uniform::new_inclusive(-jitter, jitter);
        let mut factors = [1.0; N_CHANNELS];
        for f in &mut factors {
            *f = 1.0 + dist.sample(&mut rng);
        }
        Self { factors }
    }

    /// No variation: every factor exactly 1 (for tests and diagnostics).
    pub fn unit() -> Self {
        Self {
            factors: [1.0; N_CHANNELS],
        }
    }

    /// The `1 + γ_i` factor of one channel.
    pub fn factor(&self, channel: usize) -> f64 {
        self.factors[channel]
    }

    /// Saturating force gain of one channel:
    /// `(force / reference)^exponent * (1 + γ_i)`.
    pub fn gain(&self, config: &DrumConfig, channel: usize, force_g: f64) -> f64 {
        math::powf(force_g / config.gain_reference_g, config.gain_exponent) * self.factors[channel]
    }
}

/// Scan-direction offset (mm) of a channel: columns of the 3×3 grid sit
/// 5 mm apart along the scan; the two layers are vertically stacked.
pub fn channel_offset_mm(channel: usize) -> f64 {
    assert!(channel < N_CHANNELS);
    ((channel % LAYER_CHANNELS) % 3) as f64 * TAXEL_PITCH_MM
}

/// Whether a channel belongs to the smoothed bottom layer (channels 9–17).
pub fn is_bottom_layer(channel: usize) -> bool {
    assert!(channel < N_CHANNELS);
    channel >= LAYER_CHANNELS
}

/// One trial's quantized sensor output: `n_samples × 18` levels in 0..=1023.
pub type RawLevels = Array2<u16>;

/// A normalized trial ready for spike encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorTrace {
    /// `n_samples × 18` readings in `[0, 1]`.
    pub samples: Array2<f64>,
    /// Sensor sample rate (1 kHz).
    pub sample_rate_hz: f64,
    /// Texture label A–P.
    pub texture: char,
    /// Drum programming of the trial.
    pub condition: TrialCondition,
    /// Trial index within its (texture, condition) cell.
    pub trial_id: u32,
}

/// Synthesizes one trial before quantization: `n_samples × 18` readings in
/// full-scale units (nominally within `[0, 1]`; quantization clamps).
///
/// Deterministic in `(config, gains, spec, cond, seed)`.
pub fn simulate_trial_analog(
    config: &DrumConfig,
    gains: &TaxelGains,
    spec: &TextureSpec,
    cond: &TrialCondition,
    seed: u64,
) -> Array2<f64> {
    let n = cond.n_samples();
    let speed = cond.speed_mm_s();

    // Clean pre-gain surface signal per grid column (rows share columns, so
    // only three distinct scan offsets exist per layer).
    let mut column_clean = [vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]];
    for (col, buf) in column_clean.iter_mut().enumerate() {
        let offset = col as f64 * TAXEL_PITCH_MM;
        for (t, y) in buf.iter_mut().enumerate() {
            let pos = speed * (t as f64 / SAMPLE_RATE_HZ) + offset;
            *y = math::fma(config.amplitude_per_mm, spec.profile(pos), config.baseline);
        }
    }

    // Bottom layer, pre-gain: 3-column spatial box (edge-clamped indices,
    // duplicates counted) then a causal temporal box that grows from the
    // trace start to the full window.
    let mut bottom_clean = [vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]];
    for col in 0..3usize {
        let lo = col.saturating_sub(1);
        let hi = (col + 1).min(2);
        let spatial: Vec<f64> = (0..n)
            .map(|t| {
                (column_clean[lo][t] + column_clean[col][t] + column_clean[hi][t]) / 3.0
            })
            .collect();
        let window = config.smoothing_window_ms.max(1);
        let mut running = 0.0;
        for t in 0..n {
            running += spatial[t];
            if t >= window {
                running -= spatial[t - window];
            }
            let count = (t + 1).min(window);
            bottom_clean[col][t] = running / count as f64;
        }
    }

    // Per-channel force gain and independent noise, channel-major draw order.
    let mut rng = seeds::rng_from_seed(seed);
    let noise = Normal::new(0.0, config.noise_sigma).expect("σ must be non-negative and finite");
    let mut out = Array2::zeros((n, N_CHANNELS));
    for ch in 0..N_CHANNELS {
        let col = (ch % LAYER_CHANNELS) % 3;
        let clean = if is_bottom_layer(ch) {
            &bottom_clean[col]
        } else {
            &column_clean[col]
        };
        let g = gains.gain(config, ch, cond.force_g());
        for t in 0..n {
            out[(t, ch)] = math::fma(clean[t], g, noise.sample(&mut rng));
        }
    }
    out
}

/// Quantizes one analog reading to a 10-bit level: `round(x * 1023)` clamped
/// to `0..=1023`.
pub fn quantize_level(x: f64) -> u16 {
    let level = math::round(x * MAX_LEVEL as f64);
    if level <= 0.0 {
        0
    } else if level >= MAX_LEVEL as f64 {
        MAX_LEVEL
    } else {
        level as u16
    }
}

/// Quantizes analog readings to 10-bit levels: `round(x * 1023)` clamped to
/// `0..=1023`.
pub fn quantize(analog: &Array2<f64>) -> RawLevels {
    analog.mapv(quantize_level)
}

/// Synthesizes one quantized trial (the persisted form).
pub fn simulate_trial(
    config: &DrumConfig,
    gains: &TaxelGains,
    spec: &TextureSpec,
    cond: &TrialCondition,
    seed: u64,
) -> RawLevels {
    quantize(&simulate_trial_analog(config, gains, spec, cond, seed))
}

/// Per-channel normalization range, recorded dataset-wide in the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelRange {
    /// Smallest level seen on this channel across the dataset.
    pub min: u16,
    /// Largest level seen on this channel across the dataset.
    pub max: u16,
}

impl ChannelRange {
    /// A range that cannot normalize: the channel never varied.
    pub fn is_degenerate(&self) -> bool {
        self.min >= self.max
    }

    /// Maps one quantized level to `[0, 1]`: `min → 0`, `max → 1`, clamped.
    /// Degenerate ranges map everything to 0.
    pub fn normalize(&self, level: u16) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let span = (self.max - self.min) as f64;
        let x = level.saturating_sub(self.min) as f64 / span;
        x.min(1.0)
    }
}

/// Maps quantized levels to `[0, 1]` per channel: `min → 0`, `max → 1`,
/// clamping anything outside the recorded range. Degenerate channels
/// (min == max) map to all zeros.
pub fn normalize_levels(levels: &RawLevels, ranges: &[ChannelRange]) -> Array2<f64> {
    assert_eq!(levels.ncols(), ranges.len(), "one range per channel");
    let mut out = Array2::zeros(levels.dim());
    for (j, range) in ranges.iter().enumerate() {
        if range.is_degenerate() {
            continue; // stays zero
        }
        let span = (range.max - range.min) as f64;
        for (i, &level) in levels.column(j).iter().enumerate() {
            let x = (level.saturating_sub(range.min)) as f64 / span;
            out[(i, j)] = x.min(1.0);
        }
    }
    out
}
