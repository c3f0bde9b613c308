//! Simulated real-time scanning sessions: wandering velocity profiles,
//! per-session sensor drift, streamed 9-taxel frames, incrementally built
//! speed-invariant features, and live classification protocols.
//!
//! The constant-speed drum ([`crate::drum`]) provides the training corpus;
//! this module models deployment. An operator-style scan sweeps 200 mm of a
//! texture plate while the velocity wanders around one of five profiles, a
//! motion tracker reports a noisy 100 ms average velocity, and the sensor's
//! nine top-layer taxels stream 1 kHz frames perturbed by per-session gain
//! and offset drift. Feature vectors are assembled batch by batch, exactly
//! as a live system sees the data, with spike-time speed scaling either on
//! or off.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, Uniform};

use crate::drum::{self, ChannelRange};
use crate::encode::EncodeConfig;
use crate::eval::{self, EvalError, ExperimentResult, KfoldSpec};
use crate::features::{self, FeatureMatrix, REALTIME_TAXELS, WINDOW_S};
use crate::lda::{lda_fit, LdaError, LdaModel};
use crate::math;
use crate::neuron::{IzhikevichParams, NeuronBank, SAMPLE_RATE_HZ};
use crate::pca::{pca_fit, PcaBasis, PcaError};
use crate::seeds::{derive_seed, derive_seed_parts, rng_from_seed};
use crate::spike::SpikeTrain;
use crate::texture::{TextureSpec, N_TEXTURES};
use crate::warp::{StreamWarpState, WarpConfig, WarpError};

/// Length of one live scan in mm.
pub const RT_SCAN_LENGTH_MM: f64 = 200.0;
/// Reference speed of the live warp (mm/s): scaled scans last 2 s.
pub const RT_REFERENCE_SPEED_MM_S: f64 = 100.0;
/// Texture plates used by the live protocols: smooth, two circular-ridge
/// plates (base and double spacing), and two wave plates (base and double
/// spacing). The spacing pairs force speed/spatial-frequency confusions.
pub const RT_TEXTURES: [usize; 5] = [0, 1, 3, 11, 13];
/// Seconds between velocity reports; equals the warp batch period.
pub const RT_VELOCITY_PERIOD_S: f64 = 0.1;
/// Frames per velocity batch at the 1 kHz sensor rate.
pub const FRAMES_PER_BATCH: usize = 100;
/// Settling steps run before decoding a stream: the finger is already
/// pressing on the plate when the tracked region begins, so the neurons
/// enter it adapted (recovery time constant 50 ms; 300 ms ≈ 6τ).
pub const WARMUP_STEPS: usize = 300;
/// Live trials per (texture, profile) cell in a training or test set.
pub const RT_TRIALS_PER_CELL: usize = 4;
/// Live trials per (texture, profile) cell in a calibration set.
pub const RT_CALIBRATION_TRIALS_PER_CELL: usize = 2;
/// Hard cap on scan length; the slowest legal profile finishes in under 5 s.
const MAX_SCAN_SAMPLES: usize = 20_000;

const SLOW_MM_S: f64 = 50.0;
const MEDIUM_MM_S: f64 = 100.0;
const FAST_MM_S: f64 = 150.0;

/// Noise and drift magnitudes of the simulated live rig.
#[derive(Clone, Debug)]
pub struct RtConfig {
    /// Per-sample additive sensor noise (fraction of full scale).
    pub sensor_noise_sigma: f64,
    /// Multiplicative noise on each reported 100 ms average velocity.
    pub tracker_noise_frac: f64,
    /// Peak low-frequency velocity modulation around the profile.
    pub velocity_jitter_frac: f64,
    /// Resting sensor reading (fraction of full scale).
    pub baseline: f64,
    /// Reading increase per mm of ridge height.
    pub amplitude_per_mm: f64,
}

impl Default for RtConfig {
    fn default() -> Self {
        let drum = drum::DrumConfig::default();
        Self {
            sensor_noise_sigma: drum.noise_sigma,
            tracker_noise_frac: 0.03,
            velocity_jitter_frac: 0.10,
            // Same sensing front end as the drum rig.
            baseline: drum.baseline,
            amplitude_per_mm: drum.amplitude_per_mm,
        }
    }
}

/// The five scripted velocity profiles of a live scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProfileKind {
    /// ≈50 mm/s throughout.
    Slow,
    /// ≈100 mm/s throughout (the warp reference).
    Medium,
    /// ≈150 mm/s throughout.
    Fast,
    /// Linear ramp 50 → 150 mm/s over the scan.
    SlowToFast,
    /// Linear ramp 150 → 50 mm/s over the scan.
    FastToSlow,
}

impl ProfileKind {
    /// All profiles, in canonical order.
    pub const ALL: [ProfileKind; 5] = [
        ProfileKind::Slow,
        ProfileKind::Medium,
        ProfileKind::Fast,
        ProfileKind::SlowToFast,
        ProfileKind::FastToSlow,
    ];

    /// Profile speed before jitter, as a function of scan progress in
    /// `[0, 1]` (ramps are linear in position).
    pub fn base_velocity(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        match self {
            Self::Slow => SLOW_MM_S,
            Self::Medium => MEDIUM_MM_S,
            Self::Fast => FAST_MM_S,
            Self::SlowToFast => SLOW_MM_S + (FAST_MM_S - SLOW_MM_S) * p,
            Self::FastToSlow => FAST_MM_S - (FAST_MM_S - SLOW_MM_S) * p,
        }
    }

    /// Whether the profile is in the extrapolation protocol's training set
    /// (slow and medium are trained; fast and both ramps are not).
    pub fn is_extrapolation_trained(&self) -> bool {
        matches!(self, Self::Slow | Self::Medium)
    }

    /// Short lower-case name for reports.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Slow => "slow",
            Self::Medium => "medium",
            Self::Fast => "fast",
            Self::SlowToFast => "slow-to-fast",
            Self::FastToSlow => "fast-to-slow",
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            Self::Slow => 0,
            Self::Medium => 1,
            Self::Fast => 2,
            Self::SlowToFast => 3,
            Self::FastToSlow => 4,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => Self::Slow,
            1 => Self::Medium,
            2 => Self::Fast,
            3 => Self::SlowToFast,
            4 => Self::FastToSlow,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct JitterWave {
    amplitude: f64,
    freq_hz: f64,
    phase: f64,
}

/// One realized velocity trajectory: a [`ProfileKind`] plus seeded
/// low-frequency jitter (two slow sinusoids whose amplitudes sum to at most
/// the configured jitter fraction, so the velocity never leaves ±jitter of
/// the profile and never reaches zero).
#[derive(Clone, Debug)]
pub struct VelocityProfile {
    /// The scripted profile this trajectory wanders around.
    pub kind: ProfileKind,
    jitter: [JitterWave; 2],
}

impl VelocityProfile {
    /// Draws the jitter realization for one scan.
    pub fn realize(kind: ProfileKind, jitter_frac: f64, seed: u64) -> Self {
        assert!(
            (0.0..0.5).contains(&jitter_frac),
            "jitter fraction {jitter_frac} must be in [0, 0.5)"
        );
        let mut rng = rng_from_seed(seed);
        let amp_main = Uniform::new_inclusive(0.4, 0.6).sample(&mut rng) * jitter_frac;
        let amp_second = Uniform::new_inclusive(0.1, 0.3).sample(&mut rng) * jitter_frac;
        let freq_main = Uniform::new_inclusive(0.2, 0.5).sample(&mut rng);
        let freq_second = Uniform::new_inclusive(0.5, 1.0).sample(&mut rng);
        let phase = Uniform::new(0.0, core::f64::consts::TAU);
        let jitter = [
            JitterWave {
                amplitude: amp_main,
                freq_hz: freq_main,
                phase: phase.sample(&mut rng),
            },
            JitterWave {
                amplitude: amp_second,
                freq_hz: freq_second,
                phase: phase.sample(&mut rng),
            },
        ];
        Self { kind, jitter }
    }

    /// Instantaneous velocity at a scan position (mm) and time (s).
    pub fn velocity(&self, position_mm: f64, time_s: f64) -> f64 {
        let base = self.kind.base_velocity(position_mm / RT_SCAN_LENGTH_MM);
        let mut modulation = 1.0;
        for wave in &self.jitter {
            modulation +=
                wave.amplitude * math::sin(core::f64::consts::TAU * wave.freq_hz * time_s + wave.phase);
        }
        let v = base * modulation;
        debug_assert!(v > 0.0, "jitter must never stall the scan");
        v
    }
}

/// Per-session sensor drift: a gain and an offset for each taxel, fixed for
/// the whole session. Gains stay within ±10% of 1 (the rig's ±15% tolerance
/// with margin); offsets stay within ±2% of full scale and act as an ADC
/// bias, i.e. a level shift after quantization.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionParams {
    /// Seed the drift was drawn from (0 for the neutral session).
    pub seed: u64,
    gains: [f64; REALTIME_TAXELS],
    offset_counts: [i32; REALTIME_TAXELS],
}

const GAIN_DRIFT_FRAC: f64 = 0.10;
const OFFSET_DRIFT_FRAC: f64 = 0.02;

impl SessionParams {
    fn draw(seed: u64) -> ([f64; REALTIME_TAXELS], [i32; REALTIME_TAXELS]) {
        let mut rng = rng_from_seed(seed);
        let gain = Uniform::new_inclusive(1.0 - GAIN_DRIFT_FRAC, 1.0 + GAIN_DRIFT_FRAC);
        let offset = Uniform::new_inclusive(-OFFSET_DRIFT_FRAC, OFFSET_DRIFT_FRAC);
        let mut gains = [1.0; REALTIME_TAXELS];
        for g in &mut gains {
            *g = gain.sample(&mut rng);
        }
        let mut offsets = [0i32; REALTIME_TAXELS];
        for o in &mut offsets {
            *o = math::round(offset.sample(&mut rng) * drum::MAX_LEVEL as f64) as i32;
        }
        (gains, offsets)
    }

    /// Draws a full drift realization (gain and offset) from a seed.
    pub fn from_seed(seed: u64) -> Self {
        let (gains, offset_counts) = Self::draw(seed);
        Self {
            seed,
            gains,
            offset_counts,
        }
    }

    /// A drift-free session (unit gains, zero offsets).
    pub fn neutral() -> Self {
        Self {
            seed: 0,
            gains: [1.0; REALTIME_TAXELS],
            offset_counts: [0; REALTIME_TAXELS],
        }
    }

    /// A session with the seed's offset drift but unit gains, for isolating
    /// the additive drift component.
    pub fn offset_only(seed: u64) -> Self {
        let (_, offset_counts) = Self::draw(seed);
        Self {
            seed,
            gains: [1.0; REALTIME_TAXELS],
            offset_counts,
        }
    }

    /// Multiplicative drift of one taxel.
    pub fn gain(&self, taxel: usize) -> f64 {
        self.gains[taxel]
    }

    /// Additive drift of one taxel, in quantization counts.
    pub fn offset_counts(&self, taxel: usize) -> i32 {
        self.offset_counts[taxel]
    }
}

/// One live scan as the acquisition system emits it: 1 kHz frames of nine
/// quantized taxel levels, a velocity report for every (possibly final,
/// shorter) 100 ms batch, and an end marker once the integrated position
/// reaches the scan length. Serializes to a framed binary event log that
/// replays bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanStream {
    /// Ground-truth texture plate index.
    pub texture: usize,
    /// Scripted profile of the scan.
    pub profile: ProfileKind,
    /// Quantized taxel levels at 1 kHz.
    pub frames: Vec<[u16; REALTIME_TAXELS]>,
    /// Reported average velocity of each 100 ms batch (tracker noise
    /// included); one entry per started batch, in time order.
    pub velocities: Vec<f64>,
    /// Integrated position at the end marker, or `None` if the stream was
    /// cut off before the scan completed.
    pub end_position_mm: Option<f64>,
}

const STREAM_MAGIC: [u8; 4] = *b"TXRT";
const STREAM_VERSION: u8 = 1;
const EVENT_FRAME: u8 = 0x01;
const EVENT_VELOCITY: u8 = 0x02;
const EVENT_END: u8 = 0x03;

/// Why a serialized scan stream could not be decoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamCodecError {
    /// The byte stream ended inside a header or event.
    Truncated,
    /// The header magic did not match.
    BadMagic,
    /// Unsupported format version.
    BadVersion(u8),
    /// Unknown event type byte.
    BadEventType(u8),
    /// Unknown profile byte in the header.
    BadProfile(u8),
    /// Texture index out of range.
    BadTexture(u8),
    /// An event's timestamp broke the 1 kHz / batch cadence or followed the
    /// end marker.
    OutOfOrderEvent { at_ms: u32 },
}

impl fmt::Display for StreamCodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Truncated => write!(f, "byte stream ends mid-event"),
            Self::BadMagic => write!(f, "not a scan stream (bad magic)"),
            Self::BadVersion(v) => write!(f, "unsupported scan stream version {v}"),
            Self::BadEventType(t) => write!(f, "unknown event type {t:#04x}"),
            Self::BadProfile(p) => write!(f, "unknown profile byte {p}"),
            Self::BadTexture(t) => write!(f, "texture index {t} out of range"),
            Self::OutOfOrderEvent { at_ms } => {
                write!(f, "event at {at_ms} ms breaks the stream cadence")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StreamCodecError {}

impl ScanStream {
    /// Number of started velocity batches.
    pub fn n_batches(&self) -> usize {
        self.frames.len().div_ceil(FRAMES_PER_BATCH)
    }

    /// Real scan duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / SAMPLE_RATE_HZ
    }

    /// Serializes the stream as a framed, time-ordered binary event log:
    /// an 8-byte header, then one event per frame / velocity report / end
    /// marker (type byte, u32 timestamp in ms, payload), all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n_frames = self.frames.len();
        let n_batches = self.n_batches();
        let mut out = Vec::with_capacity(8 + n_frames * 23 + (n_batches + 1) * 13);
        out.extend_from_slice(&STREAM_MAGIC);
        out.push(STREAM_VERSION);
        out.push(self.texture as u8);
        out.push(self.profile.to_byte());
        out.push(0); // reserved
        for (bi, chunk) in self.frames.chunks(FRAMES_PER_BATCH).enumerate() {
            let base = bi * FRAMES_PER_BATCH;
            for (si, frame) in chunk.iter().enumerate() {
                out.push(EVENT_FRAME);
                out.extend_from_slice(&((base + si) as u32).to_le_bytes());
                for &level in frame {
                    out.extend_from_slice(&level.to_le_bytes());
                }
            }
            out.push(EVENT_VELOCITY);
            out.extend_from_slice(&((base + chunk.len()) as u32).to_le_bytes());
            out.extend_from_slice(&self.velocities[bi].to_bits().to_le_bytes());
        }
        if let Some(end) = self.end_position_mm {
            out.push(EVENT_END);
            out.extend_from_slice(&(n_frames as u32).to_le_bytes());
            out.extend_from_slice(&end.to_bits().to_le_bytes());
        }
        out
    }

    /// Decodes a stream serialized by [`to_bytes`](Self::to_bytes),
    /// validating the header, event types, and event cadence.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StreamCodecError> {
        fn take<'a>(cur: &mut &'a [u8], n: usize) -> Result<&'a [u8], StreamCodecError> {
            if cur.len() < n {
                return Err(StreamCodecError::Truncated);
            }
            let (head, tail) = cur.split_at(n);
            *cur = tail;
            Ok(head)
        }
        fn take_u32(cur: &mut &[u8]) -> Result<u32, StreamCodecError> {
            let b = take(cur, 4)?;
            Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        }
        fn take_f64(cur: &mut &[u8]) -> Result<f64, StreamCodecError> {
            let b = take(cur, 8)?;
            Ok(f64::from_bits(u64::from_le_bytes([
                b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
            ])))
        }

        let mut cur = bytes;
        let header = take(&mut cur, 8)?;
        if header[..4] != STREAM_MAGIC {
            return Err(StreamCodecError::BadMagic);
        }
        if header[4] != STREAM_VERSION {
            return Err(StreamCodecError::BadVersion(header[4]));
        }
        let texture = header[5] as usize;
        if texture >= N_TEXTURES {
            return Err(StreamCodecError::BadTexture(header[5]));
        }
        let profile =
            ProfileKind::from_byte(header[6]).ok_or(StreamCodecError::BadProfile(header[6]))?;

        let mut frames: Vec<[u16; REALTIME_TAXELS]> = Vec::new();
        let mut velocities = Vec::new();
        let mut end_position_mm = None;
        while !cur.is_empty() {
            let event = take(&mut cur, 1)?[0];
            let at_ms = take_u32(&mut cur)?;
            if end_position_mm.is_some() {
                return Err(StreamCodecError::OutOfOrderEvent { at_ms });
            }
            match event {
                EVENT_FRAME => {
                    if at_ms as usize != frames.len() {
                        return Err(StreamCodecError::OutOfOrderEvent { at_ms });
                    }
                    let payload = take(&mut cur, 2 * REALTIME_TAXELS)?;
                    let mut frame = [0u16; REALTIME_TAXELS];
                    for (ch, level) in frame.iter_mut().enumerate() {
                        *level = u16::from_le_bytes([payload[2 * ch], payload[2 * ch + 1]]);
                    }
                    frames.push(frame);
                }
                EVENT_VELOCITY => {
                    if at_ms as usize != frames.len() {
                        return Err(StreamCodecError::OutOfOrderEvent { at_ms });
                    }
                    velocities.push(take_f64(&mut cur)?);
                }
                EVENT_END => {
                    if at_ms as usize != frames.len() {
                        return Err(StreamCodecError::OutOfOrderEvent { at_ms });
                    }
                    end_position_mm = Some(take_f64(&mut cur)?);
                }
                other => return Err(StreamCodecError::BadEventType(other)),
            }
        }
        Ok(Self {
            texture,
            profile,
            frames,
            velocities,
            end_position_mm,
        })
    }
}

/// Simulates one live scan: integrates the jittered velocity profile at
/// 1 kHz until the scan length is reached, sampling each taxel's quantized
/// reading (with session drift and sensor noise) along the way and reporting
/// a noisy average velocity per 100 ms batch.
pub fn simulate_scan(
    texture: usize,
    kind: ProfileKind,
    session: &SessionParams,
    cfg: &RtConfig,
    seed: u64,
) -> ScanStream {
    assert!(texture < N_TEXTURES, "texture index {texture} out of range");
    let spec = TextureSpec::plate(texture);
    let profile = VelocityProfile::realize(kind, cfg.velocity_jitter_frac, derive_seed(seed, 0xA));
    let mut noise_rng = rng_from_seed(derive_seed(seed, 0xB));
    let mut tracker_rng = rng_from_seed(derive_seed(seed, 0xC));
    let noise = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let tracker = Uniform::new_inclusive(-cfg.tracker_noise_frac, cfg.tracker_noise_frac);

    let mut frames = Vec::new();
    let mut velocities = Vec::new();
    let mut end_position_mm = None;
    let mut x = 0.0f64;
    let mut batch_len = 0usize;
    let mut batch_start_x = 0.0f64;
    for n in 0..MAX_SCAN_SAMPLES {
        let t_s = n as f64 / SAMPLE_RATE_HZ;
        let v = profile.velocity(x, t_s);
        let mut frame = [0u16; REALTIME_TAXELS];
        for (ch, level) in frame.iter_mut().enumerate() {
            let clean =
                cfg.baseline + cfg.amplitude_per_mm * spec.profile(x + drum::channel_offset_mm(ch));
            let analog = math::fma(
                clean,
                session.gain(ch),
                cfg.sensor_noise_sigma * noise.sample(&mut noise_rng),
            );
            let counts = drum::quantize_level(analog) as i32 + session.offset_counts(ch);
            *level = counts.clamp(0, drum::MAX_LEVEL as i32) as u16;
        }
        frames.push(frame);
        batch_len += 1;
        x += v / SAMPLE_RATE_HZ;

        // The sub-picometer slack keeps accumulated rounding from forcing a
        // phantom extra frame on exact-speed scans.
        let done = x >= RT_SCAN_LENGTH_MM - 1e-9;
        if done || batch_len == FRAMES_PER_BATCH {
            // The tracker reports the batch's average velocity from its
            // position samples, with multiplicative noise.
            let elapsed = batch_len as f64 / SAMPLE_RATE_HZ;
            let mean_v = (x - batch_start_x) / elapsed;
            velocities.push(mean_v * (1.0 + tracker.sample(&mut tracker_rng)));
            batch_len = 0;
            batch_start_x = x;
        }
        if done {
            end_position_mm = Some(x);
            break;
        }
    }
    assert!(
        end_position_mm.is_some(),
        "scan did not reach {RT_SCAN_LENGTH_MM} mm within {MAX_SCAN_SAMPLES} samples"
    );
    ScanStream {
        texture,
        profile: kind,
        frames,
        velocities,
        end_position_mm,
    }
}

/// Why a live operation failed.
#[derive(Clone, Debug, PartialEq)]
pub enum RtError {
    /// The stream carries no end marker (cut off mid-scan).
    NoEndMarker,
    /// The stream has no frames.
    EmptyStream,
    /// Frame count and velocity report count disagree.
    MalformedStream,
    /// Spike warping rejected a batch.
    Warp(WarpError),
    /// Basis fitting failed.
    Pca(PcaError),
    /// Classifier fitting failed.
    Lda(LdaError),
    /// Cross-validation failed.
    Eval(EvalError),
}

impl fmt::Display for RtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoEndMarker => write!(f, "scan stream has no end marker"),
            Self::EmptyStream => write!(f, "scan stream has no frames"),
            Self::MalformedStream => {
                write!(f, "scan stream velocity reports do not match its batches")
            }
            Self::Warp(e) => write!(f, "warp: {e}"),
            Self::Pca(e) => write!(f, "pca: {e}"),
            Self::Lda(e) => write!(f, "lda: {e}"),
            Self::Eval(e) => write!(f, "eval: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RtError {}

impl From<WarpError> for RtError {
    fn from(e: WarpError) -> Self {
        Self::Warp(e)
    }
}
impl From<PcaError> for RtError {
    fn from(e: PcaError) -> Self {
        Self::Pca(e)
    }
}
impl From<LdaError> for RtError {
    fn from(e: LdaError) -> Self {
        Self::Lda(e)
    }
}
impl From<EvalError> for RtError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}

/// Runs one scan stream through the live feature pipeline and returns the
/// 180-length feature vector (9 taxels × 20 windows of SA spike rates).
///
/// Frames are normalized per channel with `ranges`, driven through one SA
/// neuron per taxel, and consumed batch by batch. With `speed_scaling` on,
/// each batch's spikes are warped by its reported velocity and the vector
/// holds per-window rates over the real time spent in each scaled window;
/// with it off, the vector holds plain 100 ms-window rates. Either way the
/// last 20 windows are kept (zero-padded at the front if fewer).
pub fn run_stream(
    stream: &ScanStream,
    ranges: &[ChannelRange],
    encode_cfg: &EncodeConfig,
    speed_scaling: bool,
) -> Result<Vec<f64>, RtError> {
    if stream.end_position_mm.is_none() {
        return Err(RtError::NoEndMarker);
    }
    if stream.frames.is_empty() {
        return Err(RtError::EmptyStream);
    }
    if stream.velocities.len() != stream.n_batches() {
        return Err(RtError::MalformedStream);
    }
    assert_eq!(ranges.len(), REALTIME_TAXELS, "one range per taxel");

    let mut bank = NeuronBank::new(IzhikevichParams::tonic_spiking(1.0), REALTIME_TAXELS);
    let mut warp_states: Vec<StreamWarpState> = (0..REALTIME_TAXELS)
        .map(|_| StreamWarpState::new(WarpConfig::streaming()))
        .collect();
    let mut real_times: Vec<Vec<f64>> = vec![Vec::new(); REALTIME_TAXELS];
    let mut batch_times: Vec<Vec<f64>> = vec![Vec::new(); REALTIME_TAXELS];
    let mut inputs = [0.0f64; REALTIME_TAXELS];
    let mut fired = [0u8; REALTIME_TAXELS];

    // Settle each neuron on its first frame's drive before the scan region
    // starts; spikes fired while settling belong to the approach, not the
    // scan, and are discarded.
    for (ch, &level) in stream.frames[0].iter().enumerate() {
        inputs[ch] = encode_cfg.sa_gain * ranges[ch].normalize(level);
    }
    for _ in 0..WARMUP_STEPS {
        bank.step(&inputs, &mut fired);
    }

    for (bi, chunk) in stream.frames.chunks(FRAMES_PER_BATCH).enumerate() {
        for times in &mut batch_times {
            times.clear();
        }
        // Spikes are stamped on the global 1 kHz grid. The batch period is
        // the difference of consecutive grid anchors, so the warp's internal
        // real clock telescopes onto those anchors exactly and every stamp
        // validates against its batch bounds.
        let batch_start = (bi * FRAMES_PER_BATCH) as f64 / SAMPLE_RATE_HZ;
        let batch_end = (bi * FRAMES_PER_BATCH + chunk.len()) as f64 / SAMPLE_RATE_HZ;
        for (si, frame) in chunk.iter().enumerate() {
            for (ch, &level) in frame.iter().enumerate() {
                inputs[ch] = encode_cfg.sa_gain * ranges[ch].normalize(level);
            }
            bank.step(&inputs, &mut fired);
            let stamped = (bi * FRAMES_PER_BATCH + si) as f64 / SAMPLE_RATE_HZ;
            for ch in 0..REALTIME_TAXELS {
                for _ in 0..fired[ch] {
                    batch_times[ch].push(stamped);
                    real_times[ch].push(stamped);
                }
            }
        }
        let velocity = stream.velocities[bi];
        for ch in 0..REALTIME_TAXELS {
            warp_states[ch].push_batch_with_period(
                &batch_times[ch],
                velocity,
                batch_end - batch_start,
            )?;
        }
    }

    if speed_scaling {
        let durations = warp_states[0].window_real_durations(WINDOW_S);
        let trains: Vec<SpikeTrain> = warp_states
            .into_iter()
            .map(|s| s.into_train().expect("at least one batch was pushed"))
            .collect();
        Ok(features::realtime_vector(&trains, &durations))
    } else {
        let duration = stream.duration_s();
        let n_windows = (duration / WINDOW_S + 1e-9) as usize;
        let mut out = Vec::with_capacity(REALTIME_TAXELS * features::REALTIME_WINDOWS);
        for times in real_times {
            let train =
                SpikeTrain::new(times, duration).expect("grid times are valid by construction");
            let rates = features::windowed_sr(&train, WINDOW_S, n_windows, 1.0);
            out.extend(features::last_windows(&rates));
        }
        Ok(out)
    }
}

/// Feature rows for a set of scans, with their texture labels and profiles.
#[derive(Clone, Debug)]
pub struct RtFeatures {
    /// Feature rows (one per scan) and texture labels.
    pub matrix: FeatureMatrix,
    /// Scripted profile of each row.
    pub profiles: Vec<ProfileKind>,
}

/// Runs every scan through the live pipeline with the given normalization
/// ranges (the deployed calibration, which need not come from the same
/// session as the scans).
pub fn featureize(
    scans: &[ScanStream],
    ranges: &[ChannelRange],
    encode_cfg: &EncodeConfig,
    speed_scaling: bool,
) -> Result<RtFeatures, RtError> {
    let mut rows = Vec::with_capacity(scans.len());
    let mut labels = Vec::with_capacity(scans.len());
    let mut profiles = Vec::with_capacity(scans.len());
    for scan in scans {
        rows.push(run_stream(scan, ranges, encode_cfg, speed_scaling)?);
        labels.push(scan.texture);
        profiles.push(scan.profile);
    }
    Ok(RtFeatures {
        matrix: FeatureMatrix::assemble(&rows, labels),
        profiles,
    })
}

/// Per-channel min/max levels over a set of scans, for normalization.
pub fn channel_ranges(scans: &[ScanStream]) -> Vec<ChannelRange> {
    let mut min = [u16::MAX; REALTIME_TAXELS];
    let mut max = [0u16; REALTIME_TAXELS];
    for scan in scans {
        for frame in &scan.frames {
            for ch in 0..REALTIME_TAXELS {
                min[ch] = min[ch].min(frame[ch]);
                max[ch] = max[ch].max(frame[ch]);
            }
        }
    }
    (0..REALTIME_TAXELS)
        .map(|ch| ChannelRange {
            min: min[ch],
            max: max[ch],
        })
        .collect()
}

/// Everything one live session records: its drift realization, the channel
/// ranges from its calibration scans, and its three scan sets (training,
/// realtime test, calibration).
#[derive(Clone, Debug)]
pub struct SessionScans {
    /// Drift realization of the session.
    pub params: SessionParams,
    /// Normalization ranges from this session's calibration scans.
    pub ranges: Vec<ChannelRange>,
    /// 100 training scans: 4 per (texture, profile) cell.
    pub train: Vec<ScanStream>,
    /// 100 realtime test scans: 4 per (texture, profile) cell.
    pub realtime: Vec<ScanStream>,
    /// 50 calibration scans: 2 per (texture, profile) cell. Provide the
    /// ranges and the recalibration feature pool.
    pub calibration: Vec<ScanStream>,
}

const SESSION_PARAMS_TAG: u64 = 0x5E55;
const TRAIN_ROLE: u64 = 1;
const REALTIME_ROLE: u64 = 2;
const CALIBRATION_ROLE: u64 = 3;

/// Simulates one full session: drift drawn from the seed, then 100 training,
/// 100 realtime, and 50 calibration scans over the five protocol textures ×
/// five profiles.
pub fn build_session(seed: u64, cfg: &RtConfig) -> SessionScans {
    let params = SessionParams::from_seed(derive_seed(seed, SESSION_PARAMS_TAG));
    let scan_set = |role: u64, trials: usize| -> Vec<ScanStream> {
        let mut out = Vec::with_capacity(RT_TEXTURES.len() * ProfileKind::ALL.len() * trials);
        for &texture in &RT_TEXTURES {
            for (pi, &kind) in ProfileKind::ALL.iter().enumerate() {
                for trial in 0..trials {
                    let s =
                        derive_seed_parts(seed, &[role, texture as u64, pi as u64, trial as u64]);
                    out.push(simulate_scan(texture, kind, &params, cfg, s));
                }
            }
        }
        out
    };
    let train = scan_set(TRAIN_ROLE, RT_TRIALS_PER_CELL);
    let realtime = scan_set(REALTIME_ROLE, RT_TRIALS_PER_CELL);
    let calibration = scan_set(CALIBRATION_ROLE, RT_CALIBRATION_TRIALS_PER_CELL);
    let ranges = channel_ranges(&calibration);
    SessionScans {
        params,
        ranges,
        train,
        realtime,
        calibration,
    }
}

/// Pooled correctness counts plus per-repeat accuracies for one protocol
/// condition.
#[derive(Clone, Debug, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProportionScore {
    /// Correct classifications pooled over repeats.
    pub correct: u64,
    /// Classifications attempted pooled over repeats.
    pub tested: u64,
    /// Accuracy of each repeat.
    pub accuracies: Vec<f64>,
}

impl ProportionScore {
    /// Pooled proportion correct (0 if nothing was tested).
    pub fn proportion(&self) -> f64 {
        if self.tested == 0 {
            0.0
        } else {
            self.correct as f64 / self.tested as f64
        }
    }

    /// Mean of the per-repeat accuracies.
    pub fn mean_accuracy(&self) -> f64 {
        if self.accuracies.is_empty() {
            return 0.0;
        }
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Absorbs another score (pooling across sessions).
    pub fn merge(&mut self, other: &ProportionScore) {
        self.correct += other.correct;
        self.tested += other.tested;
        self.accuracies.extend_from_slice(&other.accuracies);
    }

    fn push_repeat(&mut self, correct: u64, tested: u64) {
        self.correct += correct;
        self.tested += tested;
        self.accuracies.push(if tested == 0 {
            0.0
        } else {
            correct as f64 / tested as f64
        });
    }
}

/// Settings shared by the live protocols.
#[derive(Clone, Copy, Debug)]
pub struct RtProtocolSpec {
    /// Principal components kept by the classifier (the live system's 25).
    pub pcs: usize,
    /// Resampling repeats.
    pub n_repeats: usize,
    /// Whether the live features are speed-scaled.
    pub speed_scaling: bool,
    /// Root seed for resampling.
    pub seed: u64,
}

impl Default for RtProtocolSpec {
    fn default() -> Self {
        Self {
            pcs: 25,
            n_repeats: 100,
            speed_scaling: true,
            seed: 0,
        }
    }
}

fn rows_by_class(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| {
            let rows = labels
                .iter()
                .enumerate()
                .filter_map(|(i, &l)| (l == c).then_some(i))
                .collect();
            (c, rows)
        })
        .collect()
}

fn fit_and_score(
    train_values: &Array2<f64>,
    train_labels: &[usize],
    pcs: usize,
    test_sets: &[(&Array2<f64>, &[usize])],
) -> Result<Vec<(u64, u64)>, RtError> {
    let basis = pca_fit(train_values, pcs)?;
    let projected = basis.project_rows(train_values);
    let model = lda_fit(&projected, train_labels)?;
    let mut out = Vec::with_capacity(test_sets.len());
    for (values, labels) in test_sets {
        let predictions = model.predict_rows(&basis.project_rows(values));
        let correct = predictions
            .iter()
            .zip(labels.iter())
            .filter(|(p, t)| p == t)
            .count() as u64;
        out.push((correct, labels.len() as u64));
    }
    Ok(out)
}

/// Offline protocol: stratified 4-fold cross-validation over one session's
/// training scans (75 train / 25 test per fold at the canonical counts).
pub fn offline_kfold(
    session: &SessionScans,
    encode_cfg: &EncodeConfig,
    spec: &RtProtocolSpec,
) -> Result<ExperimentResult, RtError> {
    let feats = featureize(&session.train, &session.ranges, encode_cfg, spec.speed_scaling)?;
    let per_class = rows_by_class(&feats.matrix.labels)
        .iter()
        .map(|(_, rows)| rows.len())
        .min()
        .unwrap_or(0);
    let kspec = KfoldSpec {
        k: 4,
        n_repeats: spec.n_repeats,
        per_class,
        seed: spec.seed,
    };
    Ok(eval::kfold_eval(
        &feats.matrix.values,
        &feats.matrix.labels,
        &[spec.pcs],
        &kspec,
    )?)
}

/// Converts a cross-validation result into pooled correctness counts (taken
/// from the confusion matrix, which the protocol accumulates at its single
/// PC count).
pub fn experiment_score(result: &ExperimentResult) -> ProportionScore {
    let correct = (0..result.classes.len())
        .map(|i| result.confusion[(i, i)])
        .sum();
    let tested = result.confusion.iter().sum();
    let accuracies = result
        .points
        .last()
        .map(|p| p.accuracies.clone())
        .unwrap_or_default();
    ProportionScore {
        correct,
        tested,
        accuracies,
    }
}

/// Cross-session protocol: train on 75% of one session's training scans,
/// classify every realtime scan of another session. The deployed pipeline
/// keeps the training session's normalization ranges, so the test session's
/// drift is fully visible to it.
pub fn cross_session_eval(
    train_session: &SessionScans,
    test_session: &SessionScans,
    encode_cfg: &EncodeConfig,
    spec: &RtProtocolSpec,
) -> Result<ProportionScore, RtError> {
    let train = featureize(
        &train_session.train,
        &train_session.ranges,
        encode_cfg,
        spec.speed_scaling,
    )?;
    let test = featureize(
        &test_session.realtime,
        &train_session.ranges,
        encode_cfg,
        spec.speed_scaling,
    )?;
    let by_class = rows_by_class(&train.matrix.labels);
    let mut score = ProportionScore::default();
    for repeat in 0..spec.n_repeats {
        let mut rng = rng_from_seed(derive_seed_parts(spec.seed, &[repeat as u64]));
        let mut picked: Vec<usize> = Vec::new();
        for (_, rows) in &by_class {
            let take = eval::extrapolation_train_per_cell(rows.len());
            picked.extend(rows.choose_multiple(&mut rng, take).copied());
        }
        let sub = train.matrix.values.select(Axis(0), &picked);
        let sub_labels: Vec<usize> = picked.iter().map(|&i| train.matrix.labels[i]).collect();
        let (correct, tested) = fit_and_score(
            &sub,
            &sub_labels,
            spec.pcs,
            &[(&test.matrix.values, &test.matrix.labels)],
        )?[0];
        score.push_repeat(correct, tested);
    }
    Ok(score)
}

/// Scores of the profile-extrapolation protocol, split by whether the test
/// scan's profile was in the training set.
#[derive(Clone, Debug)]
pub struct ProfileExtrapolationScores {
    /// Realtime scans with slow/medium profiles (trained).
    pub trained: ProportionScore,
    /// Realtime scans with fast or ramp profiles (untrained).
    pub untrained: ProportionScore,
}

/// Profile-extrapolation protocol: train on 75% of the slow+medium training
/// scans (30 of 40 at canonical counts), then classify the session's
/// realtime scans — 40 with trained profiles, 60 with untrained (fast and
/// both ramps).
pub fn profile_extrapolation(
    session: &SessionScans,
    encode_cfg: &EncodeConfig,
    spec: &RtProtocolSpec,
) -> Result<ProfileExtrapolationScores, RtError> {
    let train = featureize(&session.train, &session.ranges, encode_cfg, spec.speed_scaling)?;
    let test = featureize(
        &session.realtime,
        &session.ranges,
        encode_cfg,
        spec.speed_scaling,
    )?;

    // Training pool: trained-profile rows, grouped per texture.
    let pool_rows: Vec<usize> = (0..train.matrix.labels.len())
        .filter(|&i| train.profiles[i].is_extrapolation_trained())
        .collect();
    let pool_labels: Vec<usize> = pool_rows.iter().map(|&i| train.matrix.labels[i]).collect();
    let by_class = rows_by_class(&pool_labels);

    let trained_rows: Vec<usize> = (0..test.matrix.labels.len())
        .filter(|&i| test.profiles[i].is_extrapolation_trained())
        .collect();
    let untrained_rows: Vec<usize> = (0..test.matrix.labels.len())
        .filter(|&i| !test.profiles[i].is_extrapolation_trained())
        .collect();
    let trained_values = test.matrix.values.select(Axis(0), &trained_rows);
    let trained_labels: Vec<usize> = trained_rows.iter().map(|&i| test.matrix.labels[i]).collect();
    let untrained_values = test.matrix.values.select(Axis(0), &untrained_rows);
    let untrained_labels: Vec<usize> =
        untrained_rows.iter().map(|&i| test.matrix.labels[i]).collect();

    let mut scores = ProfileExtrapolationScores {
        trained: ProportionScore::default(),
        untrained: ProportionScore::default(),
    };
    for repeat in 0..spec.n_repeats {
        let mut rng = rng_from_seed(derive_seed_parts(spec.seed, &[repeat as u64]));
        let mut picked: Vec<usize> = Vec::new();
        for (_, rows) in &by_class {
            let take = eval::extrapolation_train_per_cell(rows.len());
            picked.extend(
                rows.choose_multiple(&mut rng, take)
                    .map(|&r| pool_rows[r]),
            );
        }
        let sub = train.matrix.values.select(Axis(0), &picked);
        let sub_labels: Vec<usize> = picked.iter().map(|&i| train.matrix.labels[i]).collect();
        let results = fit_and_score(
            &sub,
            &sub_labels,
            spec.pcs,
            &[
                (&trained_values, &trained_labels),
                (&untrained_values, &untrained_labels),
            ],
        )?;
        scores.trained.push_repeat(results[0].0, results[0].1);
        scores.untrained.push_repeat(results[1].0, results[1].1);
    }
    Ok(scores)
}

/// Classifies one live feature vector: subtract the session mean, project
/// onto the basis (ignoring its stored training mean — the session mean
/// replaces it), and run the classifier. Returns the predicted label and
/// whether it matched the truth.
pub fn classify_live(
    basis: &PcaBasis,
    model: &LdaModel,
    session_mean: &[f64],
    feature: &[f64],
    truth: usize,
) -> (usize, bool) {
    assert_eq!(feature.len(), basis.n_features(), "feature width mismatch");
    assert_eq!(session_mean.len(), feature.len(), "mean width mismatch");
    let k = basis.n_components();
    let mut projected = vec![0.0f64; k];
    for (f, (&x, &m)) in feature.iter().zip(session_mean.iter()).enumerate() {
        let centered = x - m;
        for (o, &c) in projected.iter_mut().zip(basis.components().row(f).iter()) {
            *o += centered * c;
        }
    }
    let label = model.predict_row(&projected);
    (label, label == truth)
}

/// Recalibration demo: a model trained on one session (all 100 training
/// scans) classifies another session's realtime scans live. With
/// `recalibrate`, each repeat re-centers features on the mean of 10 scans
/// drawn from the test session's calibration pool; without it, the model's
/// own training mean is used.
pub fn recalibration_demo(
    train_session: &SessionScans,
    test_session: &SessionScans,
    recalibrate: bool,
    encode_cfg: &EncodeConfig,
    spec: &RtProtocolSpec,
) -> Result<ProportionScore, RtError> {
    let train = featureize(
        &train_session.train,
        &train_session.ranges,
        encode_cfg,
        spec.speed_scaling,
    )?;
    let test = featureize(
        &test_session.realtime,
        &train_session.ranges,
        encode_cfg,
        spec.speed_scaling,
    )?;
    let calib = featureize(
        &test_session.calibration,
        &train_session.ranges,
        encode_cfg,
        spec.speed_scaling,
    )?;

    let basis = pca_fit(&train.matrix.values, spec.pcs)?;
    let projected = basis.project_rows(&train.matrix.values);
    let model = lda_fit(&projected, &train.matrix.labels)?;
    let n_features = basis.n_features();

    let calib_rows: Vec<usize> = (0..calib.matrix.labels.len()).collect();
    let mut score = ProportionScore::default();
    for repeat in 0..spec.n_repeats {
        let session_mean: Vec<f64> = if recalibrate {
            let mut rng = rng_from_seed(derive_seed_parts(spec.seed, &[repeat as u64]));
            let picked: Vec<usize> = calib_rows.choose_multiple(&mut rng, 10).copied().collect();
            (0..n_features)
                .map(|j| {
                    picked
                        .iter()
                        .map(|&i| calib.matrix.values[(i, j)])
                        .sum::<f64>()
                        / picked.len() as f64
                })
                .collect()
        } else {
            basis.mean().to_vec()
        };
        let mut correct = 0u64;
        for (i, truth) in test.matrix.labels.iter().enumerate() {
            let row = test.matrix.values.row(i);
            let feature = row.as_slice().expect("feature rows are contiguous");
            if classify_live(&basis, &model, &session_mean, feature, *truth).1 {
                correct += 1;
            }
        }
        score.push_repeat(correct, test.matrix.labels.len() as u64);
    }
    Ok(score)
}

/// The live classification protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtProtocol {
    /// Stratified 4-fold cross-validation within each session.
    OfflineKfold,
    /// Train on one session, test on the next (cyclically).
    CrossSession,
    /// Train on slow+medium profiles, test trained vs untrained profiles.
    ProfileExtrapolation,
    /// Cross-session with live session-mean recalibration.
    RecalibrationDemo,
}

/// Runs a protocol over every session (or session pair, for the
/// cross-session protocols) and returns one headline score per run:
/// pooled accuracy for the offline and cross-session protocols, the
/// untrained-profile score for extrapolation, and the recalibrated score
/// for the demo. Each run gets its own derived seed.
pub fn run_protocol(
    which: RtProtocol,
    sessions: &[SessionScans],
    encode_cfg: &EncodeConfig,
    spec: &RtProtocolSpec,
) -> Result<Vec<ProportionScore>, RtError> {
    let mut out = Vec::with_capacity(sessions.len());
    for (run, session) in sessions.iter().enumerate() {
        let run_spec = RtProtocolSpec {
            seed: derive_seed_parts(spec.seed, &[run as u64]),
            ..*spec
        };
        let score = match which {
            RtProtocol::OfflineKfold => {
                experiment_score(&offline_kfold(session, encode_cfg, &run_spec)?)
            }
            RtProtocol::CrossSession => {
                let test = &sessions[(run + 1) % sessions.len()];
                cross_session_eval(session, test, encode_cfg, &run_spec)?
            }
            RtProtocol::ProfileExtrapolation => {
                profile_extrapolation(session, encode_cfg, &run_spec)?.untrained
            }
            RtProtocol::RecalibrationDemo => {
                let test = &sessions[(run + 1) % sessions.len()];
                recalibration_demo(session, test, true, encode_cfg, &run_spec)?
            }
        };
        out.push(score);
    }
    Ok(out)
}
