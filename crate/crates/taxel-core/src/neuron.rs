//! Izhikevich spiking neuron: the tonic-spiking regime used by both
//! mechanoreceptor encodings.
//!
//! Dynamics (time in ms, voltage in mV):
//!
//! ```text
//! dv/dt = 0.04 v^2 + 5 v + 140 - u + k I(t)
//! du/dt = a (b v - u)
//! if v >= 30 mV: v <- c, u <- u + d
//! ```
//!
//! Input signals are sampled at 1 kHz and held constant within a sample.
//! Integration uses the model's published forward-Euler scheme — check the
//! spike threshold, then two half-steps for `v` and one full step for `u` —
//! iterated at a fine internal step of 0.01 ms (100 substeps per sample).
//! The published reference code takes a single 1 ms step per sample, but at
//! that step size spike counts diverge from fine-step integration by tens of
//! spikes per second for currents the encoder actually produces (k = 100 on
//! full-scale signals), so the fine internal step is used for correctness.
//! Spike times are reported on the 1 kHz sample grid.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::spike::SpikeTrain;

/// Samples per second of the input signal grid.
pub const SAMPLE_RATE_HZ: f64 = 1000.0;

/// Internal integration substeps per 1 kHz sample (0.01 ms step).
pub const SUBSTEPS_PER_SAMPLE: u32 = 100;

/// Spike threshold in mV.
pub const SPIKE_THRESHOLD_MV: f64 = 30.0;

/// Internal step in ms and its half, derived from [`SUBSTEPS_PER_SAMPLE`].
const STEP_MS: f64 = 1.0 / SUBSTEPS_PER_SAMPLE as f64;
const HALF_STEP_MS: f64 = 0.5 * STEP_MS;

/// Izhikevich model constants plus the input gain `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IzhikevichParams {
    /// Recovery time scale.
    pub a: f64,
    /// Recovery sensitivity to `v`.
    pub b: f64,
    /// Post-spike reset voltage (mV).
    pub c: f64,
    /// Post-spike recovery increment.
    pub d: f64,
    /// Input gain: the injected current is `k * I(t)`.
    pub k: f64,
}

impl IzhikevichParams {
    /// The tonic-spiking regime with a caller-chosen input gain.
    pub const fn tonic_spiking(k: f64) -> Self {
        Self {
            a: 0.02,
            b: 0.2,
            c: -65.0,
            d: 6.0,
            k,
        }
    }

    /// Slowly-adapting encoder parameters (gain 100 on normalized readings).
    pub const fn sa() -> Self {
        Self::tonic_spiking(100.0)
    }

    /// Rapidly-adapting encoder parameters (gain 3 on signal derivatives).
    pub const fn ra() -> Self {
        Self::tonic_spiking(3.0)
    }
}

/// Instantaneous neuron state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronState {
    /// Membrane voltage (mV).
    pub v: f64,
    /// Recovery variable.
    pub u: f64,
}

impl NeuronState {
    /// Standard resting initialization: `v = -65`, `u = b * v`.
    pub fn resting(params: &IzhikevichParams) -> Self {
        let v = -65.0;
        Self { v, u: params.b * v }
    }
}

/// Integration failure: the input signal contained a non-finite sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonFiniteInput {
    /// Index of the offending sample.
    pub index: usize,
}

impl fmt::Display for NonFiniteInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input sample {} is not finite", self.index)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NonFiniteInput {}

/// Lanes per SIMD-friendly register block in the integration kernel.
const BLOCK: usize = 8;

/// A bank of identical neurons advanced in lock step, one lane per input
/// channel. Running all channels of a trial together keeps the hot integration
/// loop vectorizable: lanes are held in blocks of eight that live in registers
/// for the whole sample, and up to three blocks advance interleaved so the
/// serial substep dependency of one block overlaps with the others.
#[derive(Clone, Debug)]
pub struct NeuronBank {
    params: IzhikevichParams,
    n_lanes: usize,
    /// Lane state, padded to a whole number of blocks. Padding lanes rest at
    /// the zero-input equilibrium and never spike.
    v: Vec<f64>,
    u: Vec<f64>,
    fired: Vec<f64>,
    /// Per-lane loop invariant `h * (140 + k * input)` for the current sample.
    h140cc: Vec<f64>,
}

impl NeuronBank {
    /// A bank of `n_lanes` neurons at the resting state.
    pub fn new(params: IzhikevichParams, n_lanes: usize) -> Self {
        let padded = n_lanes.div_ceil(BLOCK).max(1) * BLOCK;
        let state = NeuronState::resting(&params);
        Self {
            params,
            n_lanes,
            v: vec![state.v; padded],
            u: vec![state.u; padded],
            fired: vec![0.0; padded],
            h140cc: vec![SchemeConsts::h140c(0.0); padded],
        }
    }

    /// Number of lanes.
    pub fn lanes(&self) -> usize {
        self.n_lanes
    }

    /// Membrane voltage of one lane.
    pub fn voltage(&self, lane: usize) -> f64 {
        assert!(lane < self.n_lanes);
        self.v[lane]
    }

    /// Returns every lane to the resting state.
    pub fn reset(&mut self) {
        let state = NeuronState::resting(&self.params);
        self.v.fill(state.v);
        self.u.fill(state.u);
    }

    /// Advances every lane by one 1 kHz sample with per-lane input `inputs`
    /// (pre-gain; the bank applies `k`). Writes the number of threshold
    /// crossings in this sample per lane into `spikes_out`.
    ///
    /// Inputs must be finite; the caller validates (this loop is too hot for
    /// per-sample checks).
    pub fn step(&mut self, inputs: &[f64], spikes_out: &mut [u8]) {
        let n = self.n_lanes;
        assert_eq!(inputs.len(), n, "input lane count mismatch");
        assert_eq!(spikes_out.len(), n, "output lane count mismatch");

        let k = self.params.k;
        for (s, &x) in self.h140cc.iter_mut().zip(inputs) {
            *s = SchemeConsts::h140c(k * x);
        }
        self.fired[..n].fill(0.0);

        let sc = SchemeConsts::new(&self.params);
        let n_blocks = self.v.len() / BLOCK;
        let mut blk = 0;
        // Monomorphized group sizes: interleaving two blocks gives the
        // out-of-order core independent dependency chains to overlap. Two is
        // the sweet spot — the live state of a third block exceeds the
        // register file and the optimizer starts spilling inside the substep
        // loop.
        while blk < n_blocks {
            let o = blk * BLOCK;
            if n_blocks - blk >= 2 {
                run_blocks::<2>(&sc, &mut self.v[o..], &mut self.u[o..], &self.h140cc[o..], &mut self.fired[o..]);
                blk += 2;
            } else {
                run_blocks::<1>(&sc, &mut self.v[o..], &mut self.u[o..], &self.h140cc[o..], &mut self.fired[o..]);
                blk += 1;
            }
        }

        for (out, &f) in spikes_out.iter_mut().zip(self.fired.iter()) {
            *out = f as u8;
        }
    }
}

/// Scheme constants derived from the model parameters, in the exact form the
/// integration kernel consumes. The half-step update
/// `v += h/2 * (0.04 v^2 + 5 v + 140 - u + I)` is evaluated as the Horner
/// polynomial `v' = fma(fma(0.04*h, v, 1 + 5*h), v, h*(140 + I - u))` with
/// `h = STEP_MS / 2`: algebraically identical, but the serial dependency
/// chain per substep shrinks from six fused operations to four, which is
/// what bounds throughput (the kernel is latency-bound, not port-bound).
/// The recovery update `u += a*STEP_MS * (b*v - u)` is likewise distributed
/// into `u' = (a*STEP_MS*b) * v + (1 - a*STEP_MS) * u` so it stays off the
/// voltage chain.
#[derive(Clone, Copy)]
struct SchemeConsts {
    /// Reset voltage `c`.
    c: f64,
    /// Recovery increment `d`.
    d: f64,
    /// `0.04 * h` (Horner quadratic coefficient).
    c2: f64,
    /// `1 + 5 * h` (Horner linear coefficient).
    c1: f64,
    /// `-h`.
    neg_h: f64,
    /// `a * STEP_MS * b` (recovery gain on `v`).
    ahb: f64,
    /// `1 - a * STEP_MS` (recovery decay).
    one_m_ah: f64,
    /// `-(h * a * STEP_MS * b)` (recovery gain folded into the `v` feed).
    neg_h_ahb: f64,
}

impl SchemeConsts {
    fn new(params: &IzhikevichParams) -> Self {
        let h = HALF_STEP_MS;
        let ah = params.a * STEP_MS;
        let ahb = ah * params.b;
        Self {
            c: params.c,
            d: params.d,
            c2: 0.04 * h,
            c1: 1.0 + 5.0 * h,
            neg_h: -h,
            ahb,
            one_m_ah: 1.0 - ah,
            neg_h_ahb: -(h * ahb),
        }
    }

    /// Per-lane loop invariant `h * (140 + I)` for injected current `I`.
    fn h140c(current: f64) -> f64 {
        HALF_STEP_MS * (140.0 + current)
    }
}

/// Advances `G` consecutive blocks of eight lanes through one full sample
/// (all substeps), with voltage and recovery state held in local arrays that
/// the optimizer keeps in vector registers.
///
/// `h140cc` holds the per-lane invariant [`SchemeConsts::h140c`]; `fired`
/// accumulates threshold crossings per lane.
#[inline(always)]
fn run_blocks<const G: usize>(
    k: &SchemeConsts,
    v: &mut [f64],
    u: &mut [f64],
    h140cc: &[f64],
    fired: &mut [f64],
) {
    let v = &mut v[..G * BLOCK];
    let u = &mut u[..G * BLOCK];
    let h140cc = &h140cc[..G * BLOCK];
    let fired = &mut fired[..G * BLOCK];

    let mut vv = [[0.0_f64; BLOCK]; G];
    for g in 0..G {
        for j in 0..BLOCK {
            vv[g][j] = v[g * BLOCK + j];
        }
    }

    // The `hb = h * (140 + I - u0)` feed for the two half-steps is produced
    // through the carried value `q = (1 - a*STEP) * u0`, keeping the recovery
    // chain one substep ahead of the voltage chain. The seed `q = u - ahb * v`
    // makes the first substep's feed consistent with the steady-state
    // recurrence (u_next = ahb * v + q).
    let mut qq = [[0.0_f64; BLOCK]; G];
    for g in 0..G {
        for j in 0..BLOCK {
            qq[g][j] = math::fma(-k.ahb, vv[g][j], u[g * BLOCK + j]);
        }
    }

    // Check-then-step with an immediate reset. Each elementwise operation is
    // its own eight-wide loop over a block so the optimizer turns every one
    // into a handful of vector instructions instead of unrolling a mixed
    // per-lane body it cannot re-vectorize.
    for _ in 0..SUBSTEPS_PER_SAMPLE {
        for g in 0..G {
            let mut du = [0.0_f64; BLOCK];
            let mut v0 = [0.0_f64; BLOCK];
            for j in 0..BLOCK {
                let spiked = vv[g][j] >= SPIKE_THRESHOLD_MV;
                du[j] = if spiked { k.d } else { 0.0 };
                v0[j] = if spiked { k.c } else { vv[g][j] };
                fired[g * BLOCK + j] += if spiked { 1.0 } else { 0.0 };
            }

            // hb = h * (140 + I - u0) with u0 = ahb*v + q + du, assembled as
            // fma(-h*ahb, v, fma(-h, du, fma(-h, q, h140cc))) so it is ready
            // early; the innermost term only depends on the previous
            // substep's q and a loop-invariant memory operand.
            let mut hb = [0.0_f64; BLOCK];
            for j in 0..BLOCK {
                hb[j] = math::fma(
                    k.neg_h_ahb,
                    vv[g][j],
                    math::fma(
                        k.neg_h,
                        du[j],
                        math::fma(k.neg_h, qq[g][j], h140cc[g * BLOCK + j]),
                    ),
                );
            }
            // u0 (post-reset recovery) and its carried q for the next
            // substep; u_next = ahb * v2 + q lands after v2 below.
            let mut u0 = [0.0_f64; BLOCK];
            for j in 0..BLOCK {
                u0[j] = math::fma(k.ahb, vv[g][j], qq[g][j]) + du[j];
            }
            for j in 0..BLOCK {
                qq[g][j] = k.one_m_ah * u0[j];
            }

            // Two Horner half-steps sharing the same hb.
            let mut v1 = [0.0_f64; BLOCK];
            for j in 0..BLOCK {
                v1[j] = math::fma(math::fma(k.c2, v0[j], k.c1), v0[j], hb[j]);
            }
            for j in 0..BLOCK {
                vv[g][j] = math::fma(math::fma(k.c2, v1[j], k.c1), v1[j], hb[j]);
            }
        }
    }

    // The recovery value is carried as q = (1 - a*STEP) * u0; materialize
    // u_next = ahb * v2 + q only once at the end of the sample.
    for g in 0..G {
        for j in 0..BLOCK {
            v[g * BLOCK + j] = vv[g][j];
            u[g * BLOCK + j] = math::fma(k.ahb, vv[g][j], qq[g][j]);
        }
    }
}

/// Integrates one channel, returning the per-sample membrane trace (voltage at
/// the end of each sample) and the spike train on the 1 kHz grid.
///
/// Errors if any input sample is non-finite.
pub fn integrate(
    params: &IzhikevichParams,
    current: &[f64],
) -> Result<(Vec<f64>, SpikeTrain), NonFiniteInput> {
    if let Some(index) = current.iter().position(|x| !x.is_finite()) {
        return Err(NonFiniteInput { index });
    }
    let duration = current.len() as f64 / SAMPLE_RATE_HZ;
    let mut bank = NeuronBank::new(*params, 1);
    let mut membrane = Vec::with_capacity(current.len());
    let mut times = Vec::new();
    let mut fired = [0u8; 1];
    for (sample, &x) in current.iter().enumerate() {
        bank.step(&[x], &mut fired);
        for _ in 0..fired[0] {
            times.push(sample as f64 / SAMPLE_RATE_HZ);
        }
        membrane.push(bank.voltage(0));
    }
    let train = SpikeTrain::new(times, duration).expect("grid times are valid by construction");
    Ok((membrane, train))
}

/// A record of one threshold crossing, for diagnostics and invariant tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeCrossing {
    /// Sample containing the crossing.
    pub sample: usize,
    /// Membrane voltage at the check that fired (>= threshold).
    pub v_before: f64,
    /// Membrane voltage immediately after the reset.
    pub v_after: f64,
}

/// Like [`integrate`] but also records every threshold crossing. Slower;
/// intended for tests and debugging.
pub fn integrate_with_crossings(
    params: &IzhikevichParams,
    current: &[f64],
) -> Result<(SpikeTrain, Vec<SpikeCrossing>), NonFiniteInput> {
    if let Some(index) = current.iter().position(|x| !x.is_finite()) {
        return Err(NonFiniteInput { index });
    }
    let sc = SchemeConsts::new(params);
    let state = NeuronState::resting(params);
    let (mut v, mut u) = (state.v, state.u);
    let mut times = Vec::new();
    let mut crossings = Vec::new();
    // Identical operation order to the bank kernel so both paths produce
    // bit-identical trajectories (same per-sample seed, same fused ops).
    for (sample, &x) in current.iter().enumerate() {
        let h140c = SchemeConsts::h140c(params.k * x);
        let mut q = math::fma(-sc.ahb, v, u);
        for _ in 0..SUBSTEPS_PER_SAMPLE {
            let spiked = v >= SPIKE_THRESHOLD_MV;
            let du = if spiked { sc.d } else { 0.0 };
            let v0 = if spiked {
                crossings.push(SpikeCrossing {
                    sample,
                    v_before: v,
                    v_after: sc.c,
                });
                times.push(sample as f64 / SAMPLE_RATE_HZ);
                sc.c
            } else {
                v
            };
            let hb = math::fma(
                sc.neg_h_ahb,
                v,
                math::fma(sc.neg_h, du, math::fma(sc.neg_h, q, h140c)),
            );
            let u0 = math::fma(sc.ahb, v, q) + du;
            q = sc.one_m_ah * u0;
            let v1 = math::fma(math::fma(sc.c2, v0, sc.c1), v0, hb);
            v = math::fma(math::fma(sc.c2, v1, sc.c1), v1, hb);
        }
        u = math::fma(sc.ahb, v, q);
    }
    let duration = current.len() as f64 / SAMPLE_RATE_HZ;
    let train = SpikeTrain::new(times, duration).expect("grid times are valid by construction");
    Ok((train, crossings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn resting_input_never_spikes() {
        let params = IzhikevichParams::tonic_spiking(1.0);
        let (membrane, train) = integrate(&params, &vec![0.0; 2000]).unwrap();
        assert_eq!(train.count(), 0);
        assert!(membrane.iter().all(|&v| v < SPIKE_THRESHOLD_MV));
    }

    #[test]
    fn constant_ten_is_regular_tonic_spiking() {
        // Constant I = 10 at unit gain: regular spiking with near-constant
        // inter-spike interval after the first spike.
        let params = IzhikevichParams::tonic_spiking(1.0);
        let (_, train) = integrate(&params, &vec![10.0; 1000]).unwrap();
        assert!(train.count() > 10, "expected sustained spiking");
        let times = train.times();
        let isis: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        // Drop the first interval (initial transient from rest).
        let isis = &isis[1..];
        let mean = isis.iter().sum::<f64>() / isis.len() as f64;
        let var = isis.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / isis.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.01, "ISI coefficient of variation {cv} >= 1%");
    }

    #[test]
    fn spike_count_increases_with_current() {
        let params = IzhikevichParams::tonic_spiking(1.0);
        let mut last = 0;
        for i in [6.0, 10.0, 14.0] {
            let (_, train) = integrate(&params, &vec![i; 1000]).unwrap();
            assert!(
                train.count() > last,
                "count at I={i} did not increase ({} <= {last})",
                train.count()
            );
            last = train.count();
        }
    }

    #[test]
    fn non_finite_input_is_rejected_with_index() {
        let params = IzhikevichParams::sa();
        let err = integrate(&params, &[0.0, 0.5, f64::NAN, 0.5]).unwrap_err();
        assert_eq!(err, NonFiniteInput { index: 2 });
    }

    #[test]
    fn crossings_satisfy_reset_rule() {
        let params = IzhikevichParams::tonic_spiking(1.0);
        let (train, crossings) = integrate_with_crossings(&params, &vec![20.0; 1000]).unwrap();
        assert_eq!(train.count(), crossings.len());
        assert!(!crossings.is_empty());
        for c in &crossings {
            assert!(c.v_before >= SPIKE_THRESHOLD_MV);
            assert_eq!(c.v_after, params.c);
        }
    }

    #[test]
    fn bank_matches_instrumented_path() {
        // The vector bank and the instrumented scalar path implement the same
        // scheme; they must agree spike-for-spike.
        let params = IzhikevichParams::sa();
        let signal: Vec<f64> = (0..1500)
            .map(|i| 0.3 + 0.25 * crate::math::sin(2.0 * core::f64::consts::PI * 7.0 * i as f64 / 1000.0))
            .collect();
        let (_, train_a) = integrate(&params, &signal).unwrap();
        let (train_b, _) = integrate_with_crossings(&params, &signal).unwrap();
        assert_eq!(train_a, train_b);
    }

    #[test]
    fn bank_lanes_are_independent() {
        let params = IzhikevichParams::tonic_spiking(1.0);
        let inputs: Vec<f64> = vec![4.0, 10.0, 14.0];
        let mut bank = NeuronBank::new(params, 3);
        let mut counts = [0u32; 3];
        let mut fired = [0u8; 3];
        for _ in 0..1000 {
            bank.step(&inputs, &mut fired);
            for (c, &f) in counts.iter_mut().zip(fired.iter()) {
                *c += u32::from(f);
            }
        }
        for (lane, &i) in inputs.iter().enumerate() {
            let (_, train) = integrate(&params, &vec![i; 1000]).unwrap();
            assert_eq!(counts[lane] as usize, train.count(), "lane {lane}");
        }
    }
}
