//! Speed-invariant spike-time scaling.
//!
//! Spike times recorded at scan speed `v` are mapped into the time base of a
//! reference speed: every time (offline) or inter-spike gap (streaming) is
//! multiplied by `v / reference`. A slow scan's long spike train compresses,
//! a fast scan's dilates, and trains from any speed become comparable.
//!
//! * [`warp_offline`] — whole-trial scaling at one constant speed.
//! * [`StreamWarpState`] — incremental scaling for a live scan whose
//!   velocity estimate updates once per 100 ms batch. Gaps that straddle a
//!   batch boundary are scaled entirely by the velocity of the batch where
//!   the later spike falls (causal, single pass); the first gap is anchored
//!   at scan start. A piecewise-linear batch-integral clock tracks how much
//!   scaled time has elapsed, for window bookkeeping; zero velocity freezes
//!   that clock.

use alloc::vec::Vec;
use core::fmt;

use crate::spike::SpikeTrain;

/// Reference speed and batching for the warp.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WarpConfig {
    /// Speed whose time base everything is mapped into (mm/s).
    pub reference_speed_mm_s: f64,
    /// Streaming batch period in seconds.
    pub batch_period_s: f64,
}

impl WarpConfig {
    /// Offline convention: reference 120 mm/s.
    pub const fn offline() -> Self {
        Self {
            reference_speed_mm_s: 120.0,
            batch_period_s: 0.1,
        }
    }

    /// Streaming convention: reference 100 mm/s, 100 ms batches.
    pub const fn streaming() -> Self {
        Self {
            reference_speed_mm_s: 100.0,
            batch_period_s: 0.1,
        }
    }

    fn assert_valid(&self) {
        assert!(
            self.reference_speed_mm_s.is_finite() && self.reference_speed_mm_s > 0.0,
            "reference speed must be positive"
        );
        assert!(
            self.batch_period_s.is_finite() && self.batch_period_s > 0.0,
            "batch period must be positive"
        );
    }
}

/// Warp failures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WarpError {
    /// Offline speed was zero, negative, or non-finite.
    BadSpeed { speed_mm_s: f64 },
    /// Streaming velocity was negative or non-finite.
    BadVelocity { velocity_mm_s: f64 },
    /// A streamed batch period was zero, negative, or non-finite.
    BadBatchPeriod { period_s: f64 },
    /// A streamed spike fell outside the current batch window.
    SpikeOutsideBatch { time_s: f64 },
    /// A streamed spike was earlier than its predecessor.
    SpikeOutOfOrder { time_s: f64 },
}

impl fmt::Display for WarpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadSpeed { speed_mm_s } => {
                write!(f, "scan speed {speed_mm_s} mm/s must be positive and finite")
            }
            Self::BadVelocity { velocity_mm_s } => write!(
                f,
                "velocity {velocity_mm_s} mm/s must be non-negative and finite"
            ),
            Self::BadBatchPeriod { period_s } => {
                write!(f, "batch period {period_s} s must be positive and finite")
            }
            Self::SpikeOutsideBatch { time_s } => {
                write!(f, "spike at {time_s} s lies outside the current batch")
            }
            Self::SpikeOutOfOrder { time_s } => {
                write!(f, "spike at {time_s} s is earlier than its predecessor")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for WarpError {}

/// Scales a constant-speed trial into the reference time base: every spike
/// time and the duration are multiplied by `speed / reference`. Spike count
/// is preserved exactly.
pub fn warp_offline(
    train: &SpikeTrain,
    speed_mm_s: f64,
    cfg: &WarpConfig,
) -> Result<SpikeTrain, WarpError> {
    cfg.assert_valid();
    if !(speed_mm_s.is_finite() && speed_mm_s > 0.0) {
        return Err(WarpError::BadSpeed { speed_mm_s });
    }
    let factor = speed_mm_s / cfg.reference_speed_mm_s;
    let times: Vec<f64> = train.times().iter().map(|&t| t * factor).collect();
    let duration = train.duration() * factor;
    Ok(SpikeTrain::new(times, duration).expect("scaling by a positive factor preserves validity"))
}

/// Incremental warp state for one live spike stream.
///
/// Spikes arrive in 100 ms batches together with that batch's velocity
/// estimate. The batches define a piecewise-linear scaled clock (each one
/// advances it by `period × velocity / reference`), and a spike at real
/// time `t` is emitted where that clock stands at `t`: gaps are scaled
/// piecewise by the factor of each batch they cross, so spikes and windows
/// share one clock and velocity changes cannot drift the chain.
#[derive(Clone, Debug)]
pub struct StreamWarpState {
    cfg: WarpConfig,
    /// Batch-integral scaled clock: Σ batch_period · (velocity / reference).
    scaled_clock_s: f64,
    /// Real time of the chain anchor: the last spike or batch boundary,
    /// whichever came later.
    anchor_real_s: f64,
    /// Scaled time of the chain anchor.
    anchor_scaled_s: f64,
    /// Real time at the start of the next batch.
    real_clock_s: f64,
    /// Scaled times emitted so far.
    emitted: Vec<f64>,
    /// Velocity factor (velocity / reference) and real period of every
    /// consumed batch. All batches span `cfg.batch_period_s` except possibly
    /// a shorter final one (a scan rarely ends on a batch boundary).
    batches: Vec<(f64, f64)>,
    /// How many zero-velocity batches froze the clock.
    zero_velocity_batches: usize,
}

impl StreamWarpState {
    /// A fresh stream anchored at scan start (time 0).
    pub fn new(cfg: WarpConfig) -> Self {
        cfg.assert_valid();
        Self {
            cfg,
            scaled_clock_s: 0.0,
            anchor_real_s: 0.0,
            anchor_scaled_s: 0.0,
            real_clock_s: 0.0,
            emitted: Vec::new(),
            batches: Vec::new(),
            zero_velocity_batches: 0,
        }
    }

    /// Consumes one batch of real-time spikes (non-decreasing, inside
    /// `[real_clock, real_clock + batch_period)`) at the batch's velocity.
    /// Returns the newly scaled spike times.
    pub fn push_batch(
        &mut self,
        spikes: &[f64],
        velocity_mm_s: f64,
    ) -> Result<Vec<f64>, WarpError> {
        let period = self.cfg.batch_period_s;
        self.push_batch_with_period(spikes, velocity_mm_s, period)
    }

    /// Like [`push_batch`](Self::push_batch) but with an explicit real
    /// period, for a final batch cut short by the end of the scan.
    pub fn push_batch_with_period(
        &mut self,
        spikes: &[f64],
        velocity_mm_s: f64,
        period_s: f64,
    ) -> Result<Vec<f64>, WarpError> {
        if !(velocity_mm_s.is_finite() && velocity_mm_s >= 0.0) {
            return Err(WarpError::BadVelocity { velocity_mm_s });
        }
        if !(period_s.is_finite() && period_s > 0.0) {
            return Err(WarpError::BadBatchPeriod { period_s });
        }
        let start = self.real_clock_s;
        let end = start + period_s;
        let factor = velocity_mm_s / self.cfg.reference_speed_mm_s;

        // Validate the whole batch before mutating anything.
        let mut prev = self.anchor_real_s;
        for &t in spikes {
            if !(t.is_finite() && t >= start && t < end) {
                return Err(WarpError::SpikeOutsideBatch { time_s: t });
            }
            if t < prev {
                return Err(WarpError::SpikeOutOfOrder { time_s: t });
            }
            prev = t;
        }

        let mut out = Vec::with_capacity(spikes.len());
        if factor == 1.0 && self.anchor_scaled_s == self.anchor_real_s {
            // The scaled clock has never diverged from real time, so this
            // batch is the bit-exact identity: no chained rounding.
            out.extend_from_slice(spikes);
            self.emitted.extend_from_slice(spikes);
            self.anchor_real_s = end;
            self.anchor_scaled_s = end;
        } else {
            for &t in spikes {
                let gap = t - self.anchor_real_s;
                let scaled = self.anchor_scaled_s + gap * factor;
                out.push(scaled);
                self.emitted.push(scaled);
                self.anchor_real_s = t;
                self.anchor_scaled_s = scaled;
            }
            // Park the anchor on the batch boundary so a silent stretch
            // spanning several batches is scaled piecewise by each batch's
            // own factor, not wholly by the factor in force when the next
            // spike lands.
            self.anchor_scaled_s += (end - self.anchor_real_s) * factor;
            self.anchor_real_s = end;
        }
        if velocity_mm_s == 0.0 {
            self.zero_velocity_batches += 1;
        }
        self.batches.push((factor, period_s));
        self.scaled_clock_s += period_s * factor;
        self.real_clock_s = end;
        Ok(out)
    }

    /// Real-time seconds spent inside each complete scaled window of width
    /// `window_s`, reconstructed from the piecewise-linear batch clock.
    ///
    /// Each batch advances the scaled clock by `batch_period × factor` over
    /// `batch_period` real seconds; its real time is apportioned to the
    /// scaled windows it traverses. A zero-velocity batch's whole period is
    /// charged to the window containing the frozen clock. Only windows the
    /// clock has fully traversed are returned.
    pub fn window_real_durations(&self, window_s: f64) -> Vec<f64> {
        assert!(window_s > 0.0, "window must be positive");
        let n_windows = (self.scaled_clock_s / window_s + 1e-9) as usize;
        let mut real = alloc::vec![0.0f64; n_windows];
        let mut charge = |window: usize, seconds: f64| {
            if window < n_windows {
                real[window] += seconds;
            }
        };
        let mut scaled = 0.0f64;
        for &(factor, period) in &self.batches {
            if factor == 0.0 {
                charge((scaled / window_s) as usize, period);
                continue;
            }
            // The batch sweeps scaled time [scaled, scaled + period·factor);
            // split its real period across the windows in that span.
            let mut remaining_scaled = period * factor;
            while remaining_scaled > 0.0 {
                let window = (scaled / window_s) as usize;
                let window_end = (window + 1) as f64 * window_s;
                let step = remaining_scaled.min(window_end - scaled);
                let advanced = scaled + step;
                if !(step > 0.0) || advanced == scaled {
                    // Roundoff stalled at a boundary: charge the remainder
                    // here rather than loop forever.
                    charge(window, remaining_scaled / factor);
                    break;
                }
                charge(window, step / factor);
                scaled = advanced;
                remaining_scaled -= step;
            }
        }
        real
    }

    /// Scaled time elapsed according to the batch-integral clock.
    pub fn scaled_clock_s(&self) -> f64 {
        self.scaled_clock_s
    }

    /// Real time at the start of the next expected batch.
    pub fn real_clock_s(&self) -> f64 {
        self.real_clock_s
    }

    /// Scaled time of the most recent spike (0 if none).
    pub fn last_scaled_spike_s(&self) -> f64 {
        self.emitted.last().copied().unwrap_or(0.0)
    }

    /// All scaled spike times emitted so far.
    pub fn emitted(&self) -> &[f64] {
        &self.emitted
    }

    /// How many batches carried a zero velocity (clock frozen).
    pub fn zero_velocity_batches(&self) -> usize {
        self.zero_velocity_batches
    }

    /// Closes the stream into a spike train. The duration is the scaled
    /// clock (the spike chain can outrun it only by roundoff, in which case
    /// the larger value wins so every spike fits). `None` if no batch was
    /// ever consumed.
    pub fn into_train(self) -> Option<SpikeTrain> {
        if self.real_clock_s == 0.0 {
            return None;
        }
        let duration = self.scaled_clock_s.max(self.anchor_scaled_s);
        if duration <= 0.0 {
            return None;
        }
        Some(
            SpikeTrain::new(self.emitted, duration)
                .expect("emitted times are monotone and within the clock"),
        )
    }
}
