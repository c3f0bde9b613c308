//! Spike encoding of normalized tactile signals.
//!
//! Two receptor types per taxel, both built on the tonic-spiking Izhikevich
//! neuron in [`crate::neuron`]:
//!
//! * **SA** (slowly adapting): drive is the pressure signal itself, scaled by
//!   a gain of 100 and a per-cell force-scaling coefficient. Constant
//!   pressure sustains a steady firing rate.
//! * **RA** (rapidly adapting): drive is the time derivative of the 20 Hz
//!   low-pass-filtered signal, scaled by a gain of 3. Only pressure *changes*
//!   fire; steady contact is silent.
//!
//! Any number of lanes (channel × receptor-type combinations) can be encoded
//! in one pass over the trial via [`encode_lanes`], which feeds the wide
//! neuron bank. The single-channel helpers are one-lane wrappers around the
//! same path, so batched and per-channel encodings agree exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use ndarray::Array2;

use crate::filter::Biquad;
use crate::neuron::{IzhikevichParams, NeuronBank, SAMPLE_RATE_HZ};
use crate::spike::SpikeTrain;

/// Largest admissible force-scaling coefficient; the calibration search
/// brackets `(0, MAX_COEFFICIENT]` and clamps here when it cannot converge.
pub const MAX_COEFFICIENT: f64 = 5.0;

/// How the RA drive treats the sign of the filtered derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RaDerivative {
    /// Keep the sign: falling pressure hyperpolarizes instead of firing.
    Signed,
    /// Full-wave rectify: respond to change in either direction.
    Rectified,
}

/// Encoding-stage gains and filter settings.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncodeConfig {
    /// Input gain of the SA population.
    pub sa_gain: f64,
    /// Input gain of the RA population.
    pub ra_gain: f64,
    /// RA pre-filter cutoff in Hz.
    pub ra_cutoff_hz: f64,
    /// RA derivative convention.
    pub ra_derivative: RaDerivative,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            sa_gain: 100.0,
            ra_gain: 3.0,
            ra_cutoff_hz: 20.0,
            ra_derivative: RaDerivative::Signed,
        }
    }
}

/// One neuron lane: which channel it reads and how it is driven.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LaneSpec {
    /// Slowly adapting lane with a force-scaling coefficient.
    Sa { channel: usize, coefficient: f64 },
    /// Rapidly adapting lane.
    Ra { channel: usize },
}

/// Validation failures when encoding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EncodeError {
    /// A force-scaling coefficient fell outside `(0, MAX_COEFFICIENT]`.
    BadCoefficient { value: f64 },
    /// A signal value was non-finite or outside the normalized `[0, 1]` range.
    BadSample { channel: usize, sample: usize },
    /// The trial contained no samples.
    EmptySignal,
}

impl fmt::Display for EncodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadCoefficient { value } => write!(
                f,
                "force-scaling coefficient {value} outside (0, {MAX_COEFFICIENT}]"
            ),
            Self::BadSample { channel, sample } => write!(
                f,
                "sample {sample} on channel {channel} is not a normalized reading in [0, 1]"
            ),
            Self::EmptySignal => write!(f, "cannot encode an empty signal"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EncodeError {}

/// Whether a coefficient is admissible: finite and in `(0, MAX_COEFFICIENT]`.
pub fn coefficient_is_valid(c: f64) -> bool {
    c.is_finite() && c > 0.0 && c <= MAX_COEFFICIENT
}

/// Encodes an arbitrary set of lanes over shared channels in one bank pass.
///
/// `channels` holds the normalized per-channel signals (equal lengths); each
/// [`LaneSpec`] names the channel it reads. Returns one spike train per lane,
/// in spec order. Lane order does not affect any lane's output.
pub fn encode_lanes(
    channels: &[&[f64]],
    specs: &[LaneSpec],
    config: &EncodeConfig,
) -> Result<Vec<SpikeTrain>, EncodeError> {
    let n = channels.first().map_or(0, |c| c.len());
    if n == 0 {
        return Err(EncodeError::EmptySignal);
    }
    assert!(
        channels.iter().all(|c| c.len() == n),
        "channels must share one trial length"
    );
    for spec in specs {
        let channel = match spec {
            LaneSpec::Sa {
                channel,
                coefficient,
            } => {
                if !coefficient_is_valid(*coefficient) {
                    return Err(EncodeError::BadCoefficient {
                        value: *coefficient,
                    });
                }
                *channel
            }
            LaneSpec::Ra { channel } => *channel,
        };
        assert!(channel < channels.len(), "lane reads a missing channel");
        if let Some(sample) = channels[channel]
            .iter()
            .position(|&x| !(x.is_finite() && (0.0..=1.0).contains(&x)))
        {
            return Err(EncodeError::BadSample { channel, sample });
        }
    }

    // Per-lane drive currents. SA is a pure gain; RA is the scaled derivative
    // of the low-pass-filtered signal (units of normalized reading per
    // second), zero at the first sample.
    let currents: Vec<Vec<f64>> = specs
        .iter()
        .map(|spec| match spec {
            LaneSpec::Sa {
                channel,
                coefficient,
            } => {
                let m = config.sa_gain * coefficient;
                channels[*channel].iter().map(|&x| m * x).collect()
            }
            LaneSpec::Ra { channel } => {
                let filtered =
                    Biquad::lowpass(config.ra_cutoff_hz, SAMPLE_RATE_HZ).apply_primed(channels[*channel]);
                let mut drive = vec![0.0; n];
                for t in 1..n {
                    let mut d = (filtered[t] - filtered[t - 1]) * SAMPLE_RATE_HZ;
                    if config.ra_derivative == RaDerivative::Rectified {
                        d = d.abs();
                    }
                    drive[t] = config.ra_gain * d;
                }
                drive
            }
        })
        .collect();

    let mut bank = NeuronBank::new(IzhikevichParams::tonic_spiking(1.0), specs.len());
    let mut inputs = vec![0.0f64; specs.len()];
    let mut fired = vec![0u8; specs.len()];
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); specs.len()];
    for t in 0..n {
        for (lane, current) in currents.iter().enumerate() {
            inputs[lane] = current[t];
        }
        bank.step(&inputs, &mut fired);
        let stamp = t as f64 / SAMPLE_RATE_HZ;
        for (lane, &count) in fired.iter().enumerate() {
            for _ in 0..count {
                times[lane].push(stamp);
            }
        }
    }

    let duration = n as f64 / SAMPLE_RATE_HZ;
    Ok(times
        .into_iter()
        .map(|t| SpikeTrain::new(t, duration).expect("grid times are valid by construction"))
        .collect())
}

/// Encodes one channel through the SA pathway.
pub fn encode_sa(
    signal: &[f64],
    coefficient: f64,
    config: &EncodeConfig,
) -> Result<SpikeTrain, EncodeError> {
    let mut trains = encode_lanes(
        &[signal],
        &[LaneSpec::Sa {
            channel: 0,
            coefficient,
        }],
        config,
    )?;
    Ok(trains.pop().expect("one lane in, one train out"))
}

/// Encodes one channel through the RA pathway.
pub fn encode_ra(signal: &[f64], config: &EncodeConfig) -> Result<SpikeTrain, EncodeError> {
    let mut trains = encode_lanes(&[signal], &[LaneSpec::Ra { channel: 0 }], config)?;
    Ok(trains.pop().expect("one lane in, one train out"))
}

/// SA and RA spike trains for every channel of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpikes {
    /// One SA train per channel, in channel order.
    pub sa: Vec<SpikeTrain>,
    /// One RA train per channel, in channel order.
    pub ra: Vec<SpikeTrain>,
}

/// Encodes a whole trial (`n_samples × n_channels`, values in `[0, 1]`) with
/// one SA lane per channel (using `coefficients[channel]`) and one RA lane
/// per channel, in a single bank pass.
pub fn encode_trial(
    samples: &Array2<f64>,
    coefficients: &[f64],
    config: &EncodeConfig,
) -> Result<TrialSpikes, EncodeError> {
    let n_channels = samples.ncols();
    assert_eq!(
        coefficients.len(),
        n_channels,
        "one coefficient per channel"
    );
    let columns: Vec<Vec<f64>> = (0..n_channels).map(|ch| samples.column(ch).to_vec()).collect();
    let views: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let mut specs = Vec::with_capacity(2 * n_channels);
    for (channel, &coefficient) in coefficients.iter().enumerate() {
        specs.push(LaneSpec::Sa {
            channel,
            coefficient,
        });
    }
    for channel in 0..n_channels {
        specs.push(LaneSpec::Ra { channel });
    }
    let mut trains = encode_lanes(&views, &specs, config)?;
    let ra = trains.split_off(n_channels);
    Ok(TrialSpikes { sa: trains, ra })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drum::{self, DrumConfig, TaxelGains, TrialCondition};
    use crate::neuron;
    use crate::texture::TextureSpec;

    #[test]
    fn sa_on_constant_pressure_matches_the_direct_integrator() {
        // Unit coefficient and pressure 0.5 drive the neuron with exactly the
        // same current as the reference single-neuron integrator at I = 50.
        let signal = vec![0.5; 2000];
        let train = encode_sa(&signal, 1.0, &EncodeConfig::default()).unwrap();
        let current = vec![50.0; 2000];
        let (_, reference) =
            neuron::integrate(&IzhikevichParams::tonic_spiking(1.0), &current).unwrap();
        assert_eq!(train, reference);
        assert!(train.count() > 10, "constant drive should fire tonically");
    }

    #[test]
    fn zero_pressure_is_silent() {
        let train = encode_sa(&vec![0.0; 1000], 1.0, &EncodeConfig::default()).unwrap();
        assert_eq!(train.count(), 0);
    }

    #[test]
    fn stronger_pressure_fires_faster() {
        let config = EncodeConfig::default();
        let soft = encode_sa(&vec![0.3; 2000], 1.0, &config).unwrap();
        let hard = encode_sa(&vec![0.8; 2000], 1.0, &config).unwrap();
        assert!(hard.count() > soft.count());
    }

    #[test]
    fn larger_coefficient_fires_faster() {
        let config = EncodeConfig::default();
        let signal = vec![0.4; 2000];
        let weak = encode_sa(&signal, 0.5, &config).unwrap();
        let strong = encode_sa(&signal, 2.0, &config).unwrap();
        assert!(strong.count() > weak.count());
    }

    #[test]
    fn ra_ignores_steady_pressure() {
        // The pre-filter is primed to steady state, so constant contact
        // produces a zero derivative from the very first sample.
        let train = encode_ra(&vec![0.8; 1000], &EncodeConfig::default()).unwrap();
        assert_eq!(train.count(), 0);
    }

    #[test]
    fn ra_fires_on_rising_pressure_and_sign_convention_gates_falls() {
        let config = EncodeConfig::default();
        let mut rising = vec![0.2; 1000];
        rising[500..].fill(0.8);
        let train = encode_ra(&rising, &config).unwrap();
        assert_eq!(train.count_in(0.0, 0.5), 0, "no change, no spikes");
        assert!(train.count_in(0.5, 0.6) >= 1, "step must fire");

        // On release, the signed convention hyperpolarizes: nothing fires
        // while the pressure is actually dropping (the ~30 ms filter
        // transient). A later post-inhibitory rebound spike is legitimate
        // neuron behavior. Rectified fires during the drop itself.
        let mut falling = vec![0.8; 1000];
        falling[500..].fill(0.2);
        let signed = encode_ra(&falling, &config).unwrap();
        assert_eq!(
            signed.count_in(0.0, 0.53),
            0,
            "signed RA must stay silent through the drop; spikes at {:?}",
            signed.times()
        );

        let rectified = EncodeConfig {
            ra_derivative: RaDerivative::Rectified,
            ..config
        };
        let train = encode_ra(&falling, &rectified).unwrap();
        assert!(train.count_in(0.5, 0.53) >= 1, "rectified RA fires on release");
    }

    #[test]
    fn rejects_bad_coefficients_and_samples() {
        let config = EncodeConfig::default();
        let signal = vec![0.5; 100];
        for c in [0.0, -1.0, MAX_COEFFICIENT + 1e-9, f64::NAN] {
            assert!(matches!(
                encode_sa(&signal, c, &config).unwrap_err(),
                EncodeError::BadCoefficient { .. }
            ));
        }
        // Boundary: exactly MAX_COEFFICIENT is admissible.
        assert!(encode_sa(&signal, MAX_COEFFICIENT, &config).is_ok());

        let mut bad = vec![0.5; 100];
        bad[7] = 1.5;
        assert_eq!(
            encode_sa(&bad, 1.0, &config).unwrap_err(),
            EncodeError::BadSample {
                channel: 0,
                sample: 7
            }
        );
        bad[7] = -0.1;
        assert_eq!(
            encode_ra(&bad, &config).unwrap_err(),
            EncodeError::BadSample {
                channel: 0,
                sample: 7
            }
        );
        assert_eq!(
            encode_sa(&[], 1.0, &config).unwrap_err(),
            EncodeError::EmptySignal
        );
    }

    #[test]
    fn batched_trial_encoding_equals_per_channel_encoding() {
        let drum_config = DrumConfig::default();
        let gains = TaxelGains::from_seed(2, drum_config.gain_jitter);
        let spec = TextureSpec::plate(7);
        let cond = TrialCondition::new(120.0, 500.0).unwrap();
        let levels = drum::simulate_trial(&drum_config, &gains, &spec, &cond, 77);
        let ranges: Vec<drum::ChannelRange> = (0..drum::N_CHANNELS)
            .map(|ch| {
                let col = levels.column(ch);
                drum::ChannelRange {
                    min: *col.iter().min().unwrap(),
                    max: *col.iter().max().unwrap(),
                }
            })
            .collect();
        let samples = drum::normalize_levels(&levels, &ranges);
        let coefficients: Vec<f64> = (0..drum::N_CHANNELS)
            .map(|ch| 0.5 + 0.1 * (ch % 5) as f64)
            .collect();

        let config = EncodeConfig::default();
        let batched = encode_trial(&samples, &coefficients, &config).unwrap();
        for ch in 0..drum::N_CHANNELS {
            let signal: Vec<f64> = samples.column(ch).to_vec();
            let sa = encode_sa(&signal, coefficients[ch], &config).unwrap();
            let ra = encode_ra(&signal, &config).unwrap();
            assert_eq!(batched.sa[ch], sa, "SA channel {ch}");
            assert_eq!(batched.ra[ch], ra, "RA channel {ch}");
        }
    }
}
