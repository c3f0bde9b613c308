//! Causal second-order lowpass filtering for the RA encoding front end.

use alloc::vec::Vec;

use crate::math;

/// A biquad IIR filter section (direct form I).
///
/// Constructed as a Butterworth-style lowpass via the bilinear transform
/// (audio-cookbook formulation, Q = 1/sqrt(2)). State can be primed to the
/// steady-state response of a constant input so that a signal that starts
/// flat produces no startup transient.
#[derive(Clone, Copy, Debug)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    /// Butterworth lowpass at `cutoff_hz` for signals sampled at
    /// `sample_rate_hz`. Panics if the cutoff is not in (0, Nyquist).
    pub fn lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        assert!(
            cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0,
            "cutoff must lie strictly between 0 and Nyquist"
        );
        let q = 1.0 / math::sqrt(2.0);
        let w0 = 2.0 * core::f64::consts::PI * cutoff_hz / sample_rate_hz;
        let (sin_w0, cos_w0) = (math::sin(w0), math::cos(w0));
        let alpha = sin_w0 / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 - cos_w0) / 2.0 / a0,
            b1: (1.0 - cos_w0) / a0,
            b2: (1.0 - cos_w0) / 2.0 / a0,
            a1: -2.0 * cos_w0 / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// Sets the internal state to the steady-state response for constant
    /// input `x0` (unity DC gain: output settles at `x0`).
    pub fn prime(&mut self, x0: f64) {
        self.x1 = x0;
        self.x2 = x0;
        self.y1 = x0;
        self.y2 = x0;
    }

    /// Processes one sample.
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Filters a whole signal, priming the state with its first sample.
    pub fn apply_primed(mut self, signal: &[f64]) -> Vec<f64> {
        if let Some(&first) = signal.first() {
            self.prime(first);
        }
        signal.iter().map(|&x| self.step(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn dc_gain_is_unity() {
        let mut f = Biquad::lowpass(20.0, 1000.0);
        let mut y = 0.0;
        for _ in 0..5000 {
            y = f.step(0.7);
        }
        assert_relative_eq!(y, 0.7, max_relative = 1e-9);
    }

    #[test]
    fn primed_constant_input_passes_through_immediately() {
        let f = Biquad::lowpass(20.0, 1000.0);
        let out = f.apply_primed(&vec![0.4; 100]);
        for &y in &out {
            assert_relative_eq!(y, 0.4, max_relative = 1e-12);
        }
    }

    #[test]
    fn attenuates_above_cutoff_passes_below() {
        // 2 Hz should pass nearly unattenuated; 200 Hz should be crushed
        // (second-order rolloff: ~40 dB at 10x cutoff).
        let fs = 1000.0;
        let measure = |freq: f64| -> f64 {
            let mut f = Biquad::lowpass(20.0, fs);
            let n = 4000;
            let mut peak = 0.0_f64;
            for i in 0..n {
                let t = i as f64 / fs;
                let y = f.step(crate::math::sin(2.0 * core::f64::consts::PI * freq * t));
                if i > n / 2 {
                    peak = peak.max(crate::math::abs(y));
                }
            }
            peak
        };
        assert!(measure(2.0) > 0.95);
        assert!(measure(200.0) < 0.02);
    }

    #[test]
    fn half_power_near_cutoff() {
        let fs = 1000.0;
        let mut f = Biquad::lowpass(20.0, fs);
        let n = 8000;
        let mut peak = 0.0_f64;
        for i in 0..n {
            let t = i as f64 / fs;
            let y = f.step(crate::math::sin(2.0 * core::f64::consts::PI * 20.0 * t));
            if i > n / 2 {
                peak = peak.max(crate::math::abs(y));
            }
        }
        // Butterworth magnitude at the cutoff is 1/sqrt(2).
        assert_relative_eq!(peak, core::f64::consts::FRAC_1_SQRT_2, max_relative = 0.02);
    }
}
