//! Force-scaling calibration: binary search for per-cell SA coefficients.
//!
//! A cell is one (texture, taxel, speed, force) combination. For the two
//! non-reference forces (250 g, 1000 g) the calibration finds a coefficient
//! `c ∈ (0, 5]` such that the cell's trial-mean SA spike rate, encoded with
//! `c`, matches the same cell's rate at the 500 g reference force with a unit
//! coefficient. Reference-force entries are fixed at 1.0.
//!
//! The search is a bisection over `[0, 5]` against a monotone rate-versus-
//! coefficient response: a zero coefficient drives nothing (rate 0), and the
//! first probe at the bracket top decides reachability. Searches that exhaust
//! the bracket without meeting the tolerance report the clamp value 5 with
//! `converged = false`.
//!
//! [`BisectionState`] is a resumable probe/submit state machine so that many
//! cells can bisect in lock-step, sharing wide neuron-bank passes over the
//! trial signals ([`solve_cells`]); [`solve_monotone`] drives a single search
//! from a closure.

use alloc::vec::Vec;
use core::fmt;

use crate::drum::{
    force_index, speed_index, N_CHANNELS, REFERENCE_FORCE_INDEX, STANDARD_FORCES_G,
    STANDARD_SPEEDS_MM_S,
};
use crate::encode::{self, EncodeConfig, EncodeError, LaneSpec, MAX_COEFFICIENT};
use crate::texture::N_TEXTURES;

/// Number of programmed speeds in the calibration grid.
pub const N_SPEEDS: usize = STANDARD_SPEEDS_MM_S.len();
/// Number of programmed forces in the calibration grid.
pub const N_FORCES: usize = STANDARD_FORCES_G.len();
/// Total table entries: 16 textures × 18 taxels × 5 speeds × 3 forces.
pub const N_ENTRIES: usize = N_TEXTURES * N_CHANNELS * N_SPEEDS * N_FORCES;

/// Bisection policy.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveSettings {
    /// Convergence tolerance on |rate − target| in spikes/s.
    pub epsilon: f64,
    /// Hard cap on rate evaluations per search.
    pub max_evaluations: u32,
    /// Bracket width below which the search gives up.
    pub min_bracket_width: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_evaluations: 40,
            min_bracket_width: 1e-4,
        }
    }
}

/// Result of one coefficient search.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveOutcome {
    /// The solved coefficient, or exactly [`MAX_COEFFICIENT`] on failure.
    pub coefficient: f64,
    /// Whether the tolerance was met.
    pub converged: bool,
    /// Smallest |rate − target| seen across all evaluations.
    pub residual: f64,
    /// Rate evaluations spent.
    pub evaluations: u32,
}

/// Resumable bisection over a monotone non-decreasing rate response.
///
/// Call [`probe`](Self::probe) for the next coefficient to evaluate, submit
/// the measured rate with [`submit`](Self::submit), and repeat until
/// [`probe`](Self::probe) returns `None`; then read the
/// [`outcome`](Self::outcome).
#[derive(Clone, Debug)]
pub struct BisectionState {
    settings: SolveSettings,
    target: f64,
    lo: f64,
    hi: f64,
    probe: Option<f64>,
    first_probe: bool,
    best_residual: f64,
    evaluations: u32,
    outcome: Option<SolveOutcome>,
}

impl BisectionState {
    /// Starts a search for `target` spikes/s. The first probe is the bracket
    /// top, which decides whether the target is reachable at all.
    pub fn new(target: f64, settings: SolveSettings) -> Self {
        assert!(target >= 0.0, "target rate must be non-negative");
        assert!(settings.epsilon > 0.0, "tolerance must be positive");
        Self {
            settings,
            target,
            lo: 0.0,
            hi: MAX_COEFFICIENT,
            probe: Some(MAX_COEFFICIENT),
            first_probe: true,
            best_residual: f64::INFINITY,
            evaluations: 0,
            outcome: None,
        }
    }

    /// Next coefficient to evaluate, or `None` once decided.
    pub fn probe(&self) -> Option<f64> {
        self.probe
    }

    /// Feeds back the measured rate at the last probe.
    pub fn submit(&mut self, rate: f64) {
        let c = self.probe.expect("submit without a pending probe");
        self.evaluations += 1;
        let residual = (rate - self.target).abs();
        if residual < self.best_residual {
            self.best_residual = residual;
        }
        if residual < self.settings.epsilon {
            return self.finish(c, true);
        }
        if self.first_probe {
            self.first_probe = false;
            if rate < self.target {
                // Even the cap undershoots: unreachable, clamp and flag.
                return self.finish(MAX_COEFFICIENT, false);
            }
        } else if rate < self.target {
            self.lo = c;
        } else {
            self.hi = c;
        }
        if self.hi - self.lo < self.settings.min_bracket_width
            || self.evaluations >= self.settings.max_evaluations
        {
            // Exhausted without meeting tolerance: report the clamp value.
            return self.finish(MAX_COEFFICIENT, false);
        }
        self.probe = Some(0.5 * (self.lo + self.hi));
    }

    fn finish(&mut self, coefficient: f64, converged: bool) {
        self.probe = None;
        self.outcome = Some(SolveOutcome {
            coefficient,
            converged,
            residual: self.best_residual,
            evaluations: self.evaluations,
        });
    }

    /// The decision, once [`probe`](Self::probe) returns `None`.
    pub fn outcome(&self) -> Option<SolveOutcome> {
        self.outcome
    }
}

/// Drives one bisection from a rate closure (monotone non-decreasing in the
/// coefficient).
pub fn solve_monotone(
    mut rate_of: impl FnMut(f64) -> f64,
    target: f64,
    settings: SolveSettings,
) -> SolveOutcome {
    let mut state = BisectionState::new(target, settings);
    while let Some(c) = state.probe() {
        state.submit(rate_of(c));
    }
    state.outcome().expect("search ended without an outcome")
}

/// One cell's search problem: its trial signals (equal lengths, values in
/// `[0, 1]`) and the reference-force target rate.
#[derive(Clone, Debug)]
pub struct CellProblem<'a> {
    /// Normalized channel signal of every trial in the cell.
    pub trials: Vec<&'a [f64]>,
    /// Trial-mean SA rate at the reference force, unit coefficient.
    pub target_rate: f64,
}

/// Solves many cells in lock-step, sharing wide neuron-bank passes.
///
/// All trials across all problems must have one common length (one drum
/// condition per call). Each bisection round encodes every still-active
/// cell's trials at that cell's probe coefficient in a single bank pass; a
/// cell's rate is the mean of its per-trial rates. Results are identical to
/// driving [`solve_monotone`] per cell over [`encode::encode_sa`].
pub fn solve_cells(
    problems: &[CellProblem<'_>],
    settings: SolveSettings,
    config: &EncodeConfig,
) -> Result<Vec<SolveOutcome>, EncodeError> {
    for p in problems {
        assert!(!p.trials.is_empty(), "a cell needs at least one trial");
    }
    let mut states: Vec<BisectionState> = problems
        .iter()
        .map(|p| BisectionState::new(p.target_rate, settings))
        .collect();

    loop {
        // Gather this round's evaluations: (cell, probe coefficient).
        let active: Vec<(usize, f64)> = states
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.probe().map(|c| (i, c)))
            .collect();
        if active.is_empty() {
            break;
        }
        let mut channels: Vec<&[f64]> = Vec::new();
        let mut specs: Vec<LaneSpec> = Vec::new();
        let mut lane_cell: Vec<usize> = Vec::new();
        for &(cell, coefficient) in &active {
            for &trial in &problems[cell].trials {
                specs.push(LaneSpec::Sa {
                    channel: channels.len(),
                    coefficient,
                });
                channels.push(trial);
                lane_cell.push(cell);
            }
        }
        let trains = encode::encode_lanes(&channels, &specs, config)?;
        for &(cell, _) in &active {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (lane, &owner) in lane_cell.iter().enumerate() {
                if owner == cell {
                    sum += trains[lane].rate();
                    n += 1;
                }
            }
            states[cell].submit(sum / n as f64);
        }
    }
    Ok(states
        .into_iter()
        .map(|s| s.outcome().expect("drained state must be decided"))
        .collect())
}

/// The solved coefficient table: 16 textures × 18 taxels × 5 speeds × 3
/// forces, row-major in that order. Reference-force entries are fixed at 1.0.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForceScalingTable {
    coefficients: Vec<f64>,
    converged: Vec<bool>,
    /// Target rates per (texture, taxel, speed), row-major.
    target_rates: Vec<f64>,
    /// |rate − target| per entry (0 for fixed reference entries).
    residuals: Vec<f64>,
}

/// A trial's (speed, force) is not on the calibration grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnknownCondition {
    /// The offending speed in mm/s.
    pub speed_mm_s: f64,
    /// The offending force in g.
    pub force_g: f64,
}

impl fmt::Display for UnknownCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "condition (speed {} mm/s, force {} g) is not on the calibration grid",
            self.speed_mm_s, self.force_g
        )
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnknownCondition {}

impl ForceScalingTable {
    /// A table of all-unit coefficients (every entry converged, targets 0).
    pub fn unit() -> Self {
        Self {
            coefficients: alloc::vec![1.0; N_ENTRIES],
            converged: alloc::vec![true; N_ENTRIES],
            target_rates: alloc::vec![0.0; N_TEXTURES * N_CHANNELS * N_SPEEDS],
            residuals: alloc::vec![0.0; N_ENTRIES],
        }
    }

    /// Flat index of an entry, row-major (texture, taxel, speed, force).
    pub fn entry_index(texture: usize, taxel: usize, speed: usize, force: usize) -> usize {
        assert!(texture < N_TEXTURES && taxel < N_CHANNELS && speed < N_SPEEDS && force < N_FORCES);
        ((texture * N_CHANNELS + taxel) * N_SPEEDS + speed) * N_FORCES + force
    }

    /// Flat index of a cell target, row-major (texture, taxel, speed).
    pub fn target_index(texture: usize, taxel: usize, speed: usize) -> usize {
        assert!(texture < N_TEXTURES && taxel < N_CHANNELS && speed < N_SPEEDS);
        (texture * N_CHANNELS + taxel) * N_SPEEDS + speed
    }

    /// One entry's coefficient.
    pub fn coefficient(&self, texture: usize, taxel: usize, speed: usize, force: usize) -> f64 {
        self.coefficients[Self::entry_index(texture, taxel, speed, force)]
    }

    /// Whether one entry's search converged (reference entries: true).
    pub fn converged(&self, texture: usize, taxel: usize, speed: usize, force: usize) -> bool {
        self.converged[Self::entry_index(texture, taxel, speed, force)]
    }

    /// One cell's reference-force target rate.
    pub fn target_rate(&self, texture: usize, taxel: usize, speed: usize) -> f64 {
        self.target_rates[Self::target_index(texture, taxel, speed)]
    }

    /// Records a cell's target rate.
    pub fn set_target_rate(&mut self, texture: usize, taxel: usize, speed: usize, rate: f64) {
        self.target_rates[Self::target_index(texture, taxel, speed)] = rate;
    }

    /// Records a solved entry. The reference force cannot be overwritten.
    pub fn set_solved(
        &mut self,
        texture: usize,
        taxel: usize,
        speed: usize,
        force: usize,
        outcome: &SolveOutcome,
    ) {
        assert_ne!(
            force, REFERENCE_FORCE_INDEX,
            "reference-force entries are fixed at 1.0"
        );
        assert!(
            outcome.coefficient > 0.0 && outcome.coefficient <= MAX_COEFFICIENT,
            "coefficient outside (0, {MAX_COEFFICIENT}]"
        );
        let i = Self::entry_index(texture, taxel, speed, force);
        self.coefficients[i] = outcome.coefficient;
        self.converged[i] = outcome.converged;
        self.residuals[i] = outcome.residual;
    }

    /// The 18 per-taxel coefficients for one (texture, speed, force) cell.
    pub fn coefficients_for(
        &self,
        texture: usize,
        speed: usize,
        force: usize,
    ) -> [f64; N_CHANNELS] {
        let mut out = [0.0; N_CHANNELS];
        for (taxel, slot) in out.iter_mut().enumerate() {
            *slot = self.coefficient(texture, taxel, speed, force);
        }
        out
    }

    /// Per-taxel coefficients for a trial's programmed condition, looked up
    /// by value; rejects conditions off the grid. RA encoding never uses
    /// these.
    pub fn coefficients_for_condition(
        &self,
        texture: usize,
        speed_mm_s: f64,
        force_g: f64,
    ) -> Result<[f64; N_CHANNELS], UnknownCondition> {
        let (Some(speed), Some(force)) = (speed_index(speed_mm_s), force_index(force_g)) else {
            return Err(UnknownCondition { speed_mm_s, force_g });
        };
        Ok(self.coefficients_for(texture, speed, force))
    }

    /// Flat row-major view of all coefficients.
    pub fn flat_coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Flat row-major view of all convergence flags.
    pub fn flat_converged(&self) -> &[bool] {
        &self.converged
    }

    /// Rebuilds a table from persisted flat data.
    pub fn from_flat(
        coefficients: Vec<f64>,
        converged: Vec<bool>,
        target_rates: Vec<f64>,
        residuals: Vec<f64>,
    ) -> Result<Self, &'static str> {
        if coefficients.len() != N_ENTRIES
            || converged.len() != N_ENTRIES
            || residuals.len() != N_ENTRIES
            || target_rates.len() != N_TEXTURES * N_CHANNELS * N_SPEEDS
        {
            return Err("table dimensions must be 16×18×5×3");
        }
        let table = Self {
            coefficients,
            converged,
            target_rates,
            residuals,
        };
        table.check_invariants()?;
        Ok(table)
    }

    /// Verifies the structural invariants: reference entries exactly 1.0 and
    /// converged; all coefficients in (0, 5]; non-converged entries clamped.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        for texture in 0..N_TEXTURES {
            for taxel in 0..N_CHANNELS {
                for speed in 0..N_SPEEDS {
                    for force in 0..N_FORCES {
                        let i = Self::entry_index(texture, taxel, speed, force);
                        let c = self.coefficients[i];
                        if !(c > 0.0 && c <= MAX_COEFFICIENT) {
                            return Err("coefficient outside (0, 5]");
                        }
                        if force == REFERENCE_FORCE_INDEX && (c != 1.0 || !self.converged[i]) {
                            return Err("reference-force entries must be fixed at 1.0");
                        }
                        if !self.converged[i] && c != MAX_COEFFICIENT {
                            return Err("non-converged entries must report the clamp value");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Summarizes convergence for reporting.
    pub fn report(&self) -> CalibrationReport {
        let mut converged = 0usize;
        let mut clamped = 0usize;
        let fixed = N_TEXTURES * N_CHANNELS * N_SPEEDS;
        for texture in 0..N_TEXTURES {
            for taxel in 0..N_CHANNELS {
                for speed in 0..N_SPEEDS {
                    for force in 0..N_FORCES {
                        if force == REFERENCE_FORCE_INDEX {
                            continue;
                        }
                        if self.converged[Self::entry_index(texture, taxel, speed, force)] {
                            converged += 1;
                        } else {
                            clamped += 1;
                        }
                    }
                }
            }
        }
        CalibrationReport {
            total: N_ENTRIES,
            converged,
            clamped,
            fixed,
            residuals: self.residuals.clone(),
        }
    }
}

/// Calibration summary: entry counts and per-entry residuals.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationReport {
    /// All table entries (4320).
    pub total: usize,
    /// Solved entries that met the tolerance.
    pub converged: usize,
    /// Solved entries that exhausted the search (reported as 5.0).
    pub clamped: usize,
    /// Reference-force entries fixed at 1.0.
    pub fixed: usize,
    /// |rate − target| per entry, row-major; 0 for fixed entries.
    pub residuals: Vec<f64>,
}

impl CalibrationReport {
    /// Converged fraction among solved (non-fixed) entries.
    pub fn converged_fraction(&self) -> f64 {
        self.converged as f64 / (self.converged + self.clamped) as f64
    }

    /// The bookkeeping identity every report must satisfy.
    pub fn is_consistent(&self) -> bool {
        self.converged + self.clamped + self.fixed == self.total
            && self.residuals.len() == self.total
    }
}
