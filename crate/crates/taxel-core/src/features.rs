//! Windowed spike-train features and labeled feature matrices.
//!
//! Every spike train is summarized over non-overlapping 100 ms windows:
//! SA trains as spike *rates* (optionally normalized by the trial's speed
//! factor so warped trials from different speeds compare directly), RA trains
//! as raw spike *counts*. Per-trial vectors concatenate encoding-major, then
//! taxel, then window:
//!
//! * speed-scaled: 18 SA + 18 RA warped trains × 20 windows → 720 features;
//! * unscaled: the same trains unwarped × 60 windows (zero-padded past the
//!   trial end) → 2160 features;
//! * real-time: 9 SA streamed trains × last 20 scaled windows → 180
//!   features, each window's count divided by its real-time duration.

use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;

use crate::spike::SpikeTrain;

/// Feature window length in seconds.
pub const WINDOW_S: f64 = 0.1;
/// Windows per train in speed-scaled mode (2 s reference trial).
pub const SCALED_WINDOWS: usize = 20;
/// Windows per train in unscaled mode (longest trial: 6 s at 40 mm/s).
pub const UNSCALED_WINDOWS: usize = 60;
/// Windows per train kept in real-time mode.
pub const REALTIME_WINDOWS: usize = 20;
/// Taxels feeding the real-time pipeline (top layer only).
pub const REALTIME_TAXELS: usize = 9;

/// Fixed-length feature vector layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeatureMode {
    /// Warped trains, 20 windows, SR speed-normalized: length 720.
    SpeedScaled,
    /// Raw trains, 60 windows, zero-padded: length 2160.
    Unscaled,
    /// Streamed SA-only trains, last 20 scaled windows: length 180.
    Realtime,
}

impl FeatureMode {
    /// The fixed vector length of this mode.
    pub fn len(&self) -> usize {
        match self {
            Self::SpeedScaled => 2 * 18 * SCALED_WINDOWS,
            Self::Unscaled => 2 * 18 * UNSCALED_WINDOWS,
            Self::Realtime => REALTIME_TAXELS * REALTIME_WINDOWS,
        }
    }

    /// Always false; vectors of every mode carry features.
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Spike rates over `n_windows` non-overlapping windows: count / window ×
/// `norm`. Pass `norm = speed / reference` for warped SA trains, 1 otherwise.
/// Windows past the train's duration are zero.
pub fn windowed_sr(train: &SpikeTrain, window_s: f64, n_windows: usize, norm: f64) -> Vec<f64> {
    assert!(window_s > 0.0, "window must be positive");
    assert!(norm.is_finite() && norm >= 0.0, "norm must be non-negative");
    (0..n_windows)
        .map(|w| {
            let t0 = w as f64 * window_s;
            let t1 = (w + 1) as f64 * window_s;
            train.count_in(t0, t1) as f64 / window_s * norm
        })
        .collect()
}

/// Spike counts over `n_windows` non-overlapping windows; no normalization.
pub fn windowed_sc(train: &SpikeTrain, window_s: f64, n_windows: usize) -> Vec<f64> {
    assert!(window_s > 0.0, "window must be positive");
    (0..n_windows)
        .map(|w| {
            let t0 = w as f64 * window_s;
            let t1 = (w + 1) as f64 * window_s;
            train.count_in(t0, t1) as f64
        })
        .collect()
}

/// Builds the 720-length speed-scaled vector from 18 warped SA and 18 warped
/// RA trains: SR (normalized by `speed / reference`) then SC, 20 windows
/// each, taxel-major within each encoding.
pub fn speed_scaled_vector(
    sa_warped: &[SpikeTrain],
    ra_warped: &[SpikeTrain],
    speed_mm_s: f64,
    reference_speed_mm_s: f64,
) -> Vec<f64> {
    assert_eq!(sa_warped.len(), 18, "speed-scaled mode expects 18 SA trains");
    assert_eq!(ra_warped.len(), 18, "speed-scaled mode expects 18 RA trains");
    assert!(speed_mm_s > 0.0 && reference_speed_mm_s > 0.0);
    let norm = speed_mm_s / reference_speed_mm_s;
    let mut out = Vec::with_capacity(FeatureMode::SpeedScaled.len());
    for train in sa_warped {
        out.extend(windowed_sr(train, WINDOW_S, SCALED_WINDOWS, norm));
    }
    for train in ra_warped {
        out.extend(windowed_sc(train, WINDOW_S, SCALED_WINDOWS));
    }
    out
}

/// Builds the 2160-length unscaled vector from 18 raw SA and 18 raw RA
/// trains: 60 windows each, zeros past the trial end.
pub fn unscaled_vector(sa: &[SpikeTrain], ra: &[SpikeTrain]) -> Vec<f64> {
    assert_eq!(sa.len(), 18, "unscaled mode expects 18 SA trains");
    assert_eq!(ra.len(), 18, "unscaled mode expects 18 RA trains");
    let mut out = Vec::with_capacity(FeatureMode::Unscaled.len());
    for train in sa {
        out.extend(windowed_sr(train, WINDOW_S, UNSCALED_WINDOWS, 1.0));
    }
    for train in ra {
        out.extend(windowed_sc(train, WINDOW_S, UNSCALED_WINDOWS));
    }
    out
}

/// Per-window real-time rates of one streamed, scaled train: each complete
/// scaled window's spike count divided by the real-time seconds spent in it
/// (from [`crate::warp::StreamWarpState::window_real_durations`]).
pub fn realtime_window_rates(train: &SpikeTrain, window_real_durations_s: &[f64]) -> Vec<f64> {
    window_real_durations_s
        .iter()
        .enumerate()
        .map(|(w, &real)| {
            let t0 = w as f64 * WINDOW_S;
            let t1 = (w + 1) as f64 * WINDOW_S;
            let count = train.count_in(t0, t1) as f64;
            if real > 0.0 {
                count / real
            } else {
                0.0
            }
        })
        .collect()
}

/// Keeps the trailing [`REALTIME_WINDOWS`] values, front-padding with zeros
/// when fewer exist, so the most recent window always sits last.
pub fn last_windows(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; REALTIME_WINDOWS];
    let take = values.len().min(REALTIME_WINDOWS);
    out[REALTIME_WINDOWS - take..].copy_from_slice(&values[values.len() - take..]);
    out
}

/// Builds the 180-length real-time vector from 9 streamed SA trains sharing
/// one scaled clock (hence one set of window durations).
pub fn realtime_vector(
    sa_scaled: &[SpikeTrain],
    window_real_durations_s: &[f64],
) -> Vec<f64> {
    assert_eq!(
        sa_scaled.len(),
        REALTIME_TAXELS,
        "real-time mode expects 9 SA trains"
    );
    let mut out = Vec::with_capacity(FeatureMode::Realtime.len());
    for train in sa_scaled {
        let rates = realtime_window_rates(train, window_real_durations_s);
        out.extend(last_windows(&rates));
    }
    out
}

/// A labeled feature matrix: one row per trial, one texture label per row,
/// and an optional centering mean.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    /// Trial rows × feature columns.
    pub values: Array2<f64>,
    /// Texture index per row.
    pub labels: Vec<usize>,
    /// Column mean subtracted from `values`, if centered.
    pub mean: Option<Vec<f64>>,
}

impl FeatureMatrix {
    /// Assembles rows of equal length with one label each.
    pub fn assemble(rows: &[Vec<f64>], labels: Vec<usize>) -> Self {
        assert_eq!(rows.len(), labels.len(), "one label per row");
        let n_cols = rows.first().map_or(0, |r| r.len());
        assert!(
            rows.iter().all(|r| r.len() == n_cols),
            "rows must share one length"
        );
        let mut values = Array2::zeros((rows.len(), n_cols));
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                values[(i, j)] = x;
            }
        }
        Self {
            values,
            labels,
            mean: None,
        }
    }

    /// Centers by this matrix's own column means, storing the fitted mean.
    pub fn center_fit(&mut self) -> Vec<f64> {
        let n = self.values.nrows().max(1) as f64;
        let mean: Vec<f64> = (0..self.values.ncols())
            .map(|j| self.values.column(j).sum() / n)
            .collect();
        self.center_apply(&mean);
        mean
    }

    /// Centers by a supplied mean (the cross-session calibration path).
    pub fn center_apply(&mut self, mean: &[f64]) {
        assert_eq!(mean.len(), self.values.ncols(), "mean length mismatch");
        for mut row in self.values.rows_mut() {
            for (x, &m) in row.iter_mut().zip(mean) {
                *x -= m;
            }
        }
        self.mean = Some(mean.to_vec());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::SpikeTrain;

    fn train(times: &[f64], duration: f64) -> SpikeTrain {
        SpikeTrain::new(times.to_vec(), duration).unwrap()
    }

    #[test]
    fn windowed_sr_counts_over_window_times_norm() {
        // Three spikes in the first window at unit norm → 30 spikes/s.
        let t = train(&[0.01, 0.05, 0.09, 0.15], 2.0);
        let sr = windowed_sr(&t, WINDOW_S, SCALED_WINDOWS, 1.0);
        assert_eq!(sr.len(), 20);
        assert_eq!(sr[0], 30.0);
        assert_eq!(sr[1], 10.0);
        assert!(sr[2..].iter().all(|&x| x == 0.0));
        // Speed normalization: a 40 mm/s trial scales by 1/3.
        let nsr = windowed_sr(&t, WINDOW_S, SCALED_WINDOWS, 40.0 / 120.0);
        assert!((nsr[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn windowed_sc_is_raw_counts_and_partitions_the_train() {
        let empty = SpikeTrain::empty(2.0).unwrap();
        assert!(windowed_sc(&empty, WINDOW_S, 20).iter().all(|&x| x == 0.0));

        let per_window: Vec<f64> = (0..20).map(|w| w as f64 * 0.1 + 0.05).collect();
        let t = train(&per_window, 2.0);
        let sc = windowed_sc(&t, WINDOW_S, 20);
        assert!(sc.iter().all(|&x| x == 1.0));

        // Partition property: windows covering the duration sum to the count.
        let t = train(&[0.03, 0.55, 0.56, 1.0, 1.99], 2.0);
        let total: f64 = windowed_sc(&t, WINDOW_S, 20).iter().sum();
        assert_eq!(total, t.count() as f64);
    }

    #[test]
    fn features_only_depend_on_window_membership() {
        let a = train(&[0.11, 0.34, 0.77], 2.0);
        let b = train(&[0.19, 0.36, 0.71], 2.0); // same windows, shifted inside
        assert_eq!(
            windowed_sr(&a, WINDOW_S, 20, 1.0),
            windowed_sr(&b, WINDOW_S, 20, 1.0)
        );
    }

    #[test]
    fn offline_vectors_have_the_documented_lengths_and_layout() {
        let sa: Vec<SpikeTrain> = (0..18).map(|i| train(&[0.01 * (i + 1) as f64], 2.0)).collect();
        let ra: Vec<SpikeTrain> = (0..18).map(|_| SpikeTrain::empty(2.0).unwrap()).collect();
        let v = speed_scaled_vector(&sa, &ra, 120.0, 120.0);
        assert_eq!(v.len(), FeatureMode::SpeedScaled.len());
        assert_eq!(v.len(), 720);
        // Taxel 0's single spike sits in window 0 of the first block.
        assert_eq!(v[0], 10.0);
        // RA half (second encoding block) is all zeros here.
        assert!(v[360..].iter().all(|&x| x == 0.0));

        let sa3: Vec<SpikeTrain> = (0..18).map(|_| train(&[0.05, 2.95], 3.0)).collect();
        let ra3: Vec<SpikeTrain> = (0..18).map(|_| train(&[1.25], 3.0)).collect();
        let v = unscaled_vector(&sa3, &ra3);
        assert_eq!(v.len(), 2160);
        // 3 s trial: windows 30..60 of each train are zero padding, and the
        // leading real windows match a direct 30-window computation.
        let direct = windowed_sr(&sa3[0], WINDOW_S, 30, 1.0);
        assert_eq!(&v[..30], &direct[..]);
        assert!(v[30..60].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn realtime_vector_keeps_the_last_twenty_windows() {
        // 26 complete windows: only the last 20 survive.
        let durations = vec![0.1; 26];
        let spikes: Vec<f64> = (0..26).map(|w| w as f64 * 0.1 + 0.05).collect();
        let trains: Vec<SpikeTrain> = (0..9).map(|_| train(&spikes, 2.6)).collect();
        let v = realtime_vector(&trains, &durations);
        assert_eq!(v.len(), 180);
        assert!(v.iter().all(|&x| x == 10.0), "1 spike / 0.1 s real = 10");

        // 12 windows: front-padded with 8 zeros per taxel.
        let durations = vec![0.2; 12];
        let spikes: Vec<f64> = (0..12).map(|w| w as f64 * 0.1 + 0.05).collect();
        let trains: Vec<SpikeTrain> = (0..9).map(|_| train(&spikes, 1.2)).collect();
        let v = realtime_vector(&trains, &durations);
        assert_eq!(v.len(), 180);
        assert!(v[..8].iter().all(|&x| x == 0.0));
        assert!(v[8..20].iter().all(|&x| x == 5.0), "1 spike / 0.2 s real = 5");
    }

    #[test]
    fn realtime_rates_divide_by_real_window_time() {
        // Window real durations 0.2 s (half-speed scan): 4 spikes → 20/s.
        let t = train(&[0.01, 0.03, 0.05, 0.07], 0.2);
        let rates = realtime_window_rates(&t, &[0.2, 0.2]);
        assert_eq!(rates, vec![20.0, 0.0]);
    }

    #[test]
    fn centering_fits_and_applies() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 30.0], vec![5.0, 20.0]];
        let mut m = FeatureMatrix::assemble(&rows, vec![0, 1, 2]);
        let mean = m.center_fit();
        assert!((mean[0] - 3.0).abs() < 1e-12 && (mean[1] - 20.0).abs() < 1e-12);
        for j in 0..2 {
            let col_mean: f64 = m.values.column(j).sum() / 3.0;
            assert!(col_mean.abs() < 1e-12);
        }

        // Applying a zero mean changes nothing.
        let mut unchanged = FeatureMatrix::assemble(&rows, vec![0, 1, 2]);
        unchanged.center_apply(&[0.0, 0.0]);
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(unchanged.values[(i, j)], x);
            }
        }

        // Applying a supplied mean subtracts it (the cross-session path).
        let mut applied = FeatureMatrix::assemble(&rows, vec![0, 1, 2]);
        applied.center_apply(&[1.0, 10.0]);
        assert_eq!(applied.values[(0, 0)], 0.0);
        assert_eq!(applied.values[(2, 1)], 10.0);
    }

    #[test]
    fn speed_normalization_closes_the_loop_on_noise_free_trials() {
        // A noise-free texture scanned at each slower speed, warped and
        // SR-normalized, must reproduce the reference-speed features: the
        // median per-taxel window correlation stays above 0.95 (single
        // taxels can alias against the window grid, so the median is the
        // robust statement of the invariance).
        use crate::drum::{self, DrumConfig, TaxelGains, TrialCondition};
        use crate::encode::{encode_sa, EncodeConfig};
        use crate::texture::TextureSpec;
        use crate::warp::{warp_offline, WarpConfig};

        let config = DrumConfig {
            noise_sigma: 0.0,
            ..DrumConfig::default()
        };
        let gains = TaxelGains::unit();
        let enc = EncodeConfig::default();
        let cfg = WarpConfig::offline();
        let corr = |a: &[f64], b: &[f64]| {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (ma, mb) = (mean(a), mean(b));
            let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                cov += (x - ma) * (y - mb);
                va += (x - ma) * (x - ma);
                vb += (y - mb) * (y - mb);
            }
            cov / (va.sqrt() * vb.sqrt())
        };

        for plate in [6usize, 11] {
            let spec = TextureSpec::plate(plate);
            let fast_cond = TrialCondition::new(120.0, 500.0).unwrap();
            let fast_raw = drum::simulate_trial(&config, &gains, &spec, &fast_cond, 1);
            for slow_speed in [40.0, 60.0, 80.0, 100.0] {
                let slow_cond = TrialCondition::new(slow_speed, 500.0).unwrap();
                let slow_raw = drum::simulate_trial(&config, &gains, &spec, &slow_cond, 1);
                // Shared normalization ranges so both speeds see one scale.
                let ranges: Vec<drum::ChannelRange> = (0..drum::N_CHANNELS)
                    .map(|ch| drum::ChannelRange {
                        min: *slow_raw
                            .column(ch)
                            .iter()
                            .chain(fast_raw.column(ch).iter())
                            .min()
                            .unwrap(),
                        max: *slow_raw
                            .column(ch)
                            .iter()
                            .chain(fast_raw.column(ch).iter())
                            .max()
                            .unwrap(),
                    })
                    .collect();
                let slow = drum::normalize_levels(&slow_raw, &ranges);
                let fast = drum::normalize_levels(&fast_raw, &ranges);

                let mut rs: Vec<f64> = (0..drum::N_CHANNELS)
                    .map(|ch| {
                        let s = encode_sa(&slow.column(ch).to_vec(), 1.0, &enc).unwrap();
                        let f = encode_sa(&fast.column(ch).to_vec(), 1.0, &enc).unwrap();
                        let sw = warp_offline(&s, slow_speed, &cfg).unwrap();
                        let fw = warp_offline(&f, 120.0, &cfg).unwrap();
                        let a =
                            windowed_sr(&sw, WINDOW_S, SCALED_WINDOWS, slow_speed / 120.0);
                        let b = windowed_sr(&fw, WINDOW_S, SCALED_WINDOWS, 1.0);
                        corr(&a, &b)
                    })
                    .filter(|r| r.is_finite())
                    .collect();
                rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = rs[rs.len() / 2];
                assert!(
                    median > 0.95,
                    "plate {plate} at {slow_speed} vs 120 mm/s: median correlation {median}"
                );
            }
        }
    }
}
