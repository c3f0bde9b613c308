//! Spike trains: ordered event times with a known recording duration.

use alloc::vec::Vec;
use core::fmt;

/// An ordered sequence of spike times over a recording of known duration.
///
/// Times are seconds, non-decreasing, and lie within `[0, duration]`. Equal
/// adjacent times are permitted: they represent multiple threshold crossings
/// inside one sample period, which the 1 kHz time grid cannot separate. In
/// practice the encoding front end never produces them (input bandwidth keeps
/// inter-spike intervals well above one sample), but the representation stays
/// faithful to the integrator if they occur.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
    duration: f64,
}

/// Validation failures when constructing a [`SpikeTrain`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpikeTrainError {
    /// Duration was zero, negative, or non-finite.
    BadDuration,
    /// A spike time was non-finite, negative, past the duration, or decreasing.
    BadTime { index: usize },
}

impl fmt::Display for SpikeTrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpikeTrainError::BadDuration => write!(f, "duration must be positive and finite"),
            SpikeTrainError::BadTime { index } => write!(
                f,
                "spike time at index {index} is not finite, in range, and non-decreasing"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpikeTrainError {}

impl SpikeTrain {
    /// Builds a validated spike train.
    pub fn new(times: Vec<f64>, duration: f64) -> Result<Self, SpikeTrainError> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(SpikeTrainError::BadDuration);
        }
        let mut prev = 0.0_f64;
        for (index, &t) in times.iter().enumerate() {
            if !(t.is_finite() && t >= prev && t <= duration) {
                return Err(SpikeTrainError::BadTime { index });
            }
            prev = t;
        }
        Ok(Self { times, duration })
    }

    /// A train with no spikes.
    pub fn empty(duration: f64) -> Result<Self, SpikeTrainError> {
        Self::new(Vec::new(), duration)
    }

    /// Spike times in seconds, non-decreasing.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Recording duration in seconds (always positive).
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Number of spikes.
    pub fn count(&self) -> usize {
        self.times.len()
    }

    /// Mean spike rate over the whole recording: count / duration (spikes/s).
    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.duration
    }

    /// Number of spikes with `t0 <= t < t1`.
    pub fn count_in(&self, t0: f64, t1: f64) -> usize {
        let lo = self.times.partition_point(|&t| t < t0);
        let hi = self.times.partition_point(|&t| t < t1);
        hi - lo
    }

    /// Consumes the train, returning its times.
    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}
