//! Classification protocols: stratified k-fold with per-repeat trial
//! resampling, the speed/force extrapolation split with its four test
//! buckets, confusion matrices, and accuracy-curve containers.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;

use crate::calibrate::{N_FORCES, N_SPEEDS};
use crate::lda::{lda_fit, LdaError};
use crate::pca::{pca_fit, PcaError};
use crate::seeds;

/// Speed indices used for extrapolation training (40, 60, 80 mm/s).
pub const TRAINED_SPEED_INDICES: [usize; 3] = [0, 1, 2];
/// Force indices used for extrapolation training (250, 500 g).
pub const TRAINED_FORCE_INDICES: [usize; 2] = [0, 1];

/// Evaluation failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalError {
    /// `pcs` was empty or contained a zero.
    BadPcList,
    /// Fewer than two folds requested.
    BadFoldCount,
    /// A label or condition list length differs from the row count.
    LengthMismatch,
    /// A stratum has fewer trials than the per-repeat subsample needs.
    TooFewTrials {
        /// The class (stratum) label.
        label: usize,
        /// Trials available for it.
        available: usize,
        /// Trials the protocol needs.
        needed: usize,
    },
    /// The per-class subsample cannot give every fold at least one trial.
    SubsampleBelowFolds,
    /// A condition index is outside the standard speed/force grid.
    UnknownCondition {
        /// The offending speed index.
        speed_index: usize,
        /// The offending force index.
        force_index: usize,
    },
    /// A (class, speed, force) cell required by the protocol has no trials.
    MissingCell {
        /// The class label missing the cell.
        label: usize,
        /// The cell's speed index.
        speed_index: usize,
        /// The cell's force index.
        force_index: usize,
    },
    /// The PC request exceeds what a training split can support.
    Pca(PcaError),
    /// A discriminant fit failed.
    Lda(LdaError),
    /// A prediction or truth label was not in the class list.
    UnknownLabel(usize),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadPcList => write!(f, "pcs must be non-empty positive counts"),
            Self::BadFoldCount => write!(f, "need at least two folds"),
            Self::LengthMismatch => write!(f, "one label and condition per trial row"),
            Self::TooFewTrials { label, available, needed } => {
                write!(f, "class {label} has {available} trials, needs {needed}")
            }
            Self::SubsampleBelowFolds => {
                write!(f, "per-class subsample must be at least the fold count")
            }
            Self::UnknownCondition { speed_index, force_index } => {
                write!(f, "condition ({speed_index}, {force_index}) outside the standard grid")
            }
            Self::MissingCell { label, speed_index, force_index } => {
                write!(f, "class {label} has no trials in cell ({speed_index}, {force_index})")
            }
            Self::Pca(e) => write!(f, "pca: {e}"),
            Self::Lda(e) => write!(f, "lda: {e}"),
            Self::UnknownLabel(l) => write!(f, "label {l} not in the class list"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

impl From<PcaError> for EvalError {
    fn from(e: PcaError) -> Self {
        Self::Pca(e)
    }
}

impl From<LdaError> for EvalError {
    fn from(e: LdaError) -> Self {
        Self::Lda(e)
    }
}

/// Accuracy samples for one PC count.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyPoint {
    /// Number of principal components used.
    pub pcs: usize,
    /// One pooled accuracy per repeat.
    pub accuracies: Vec<f64>,
}

impl AccuracyPoint {
    /// Number of repeats.
    pub fn n(&self) -> usize {
        self.accuracies.len()
    }

    /// Mean accuracy over repeats.
    pub fn mean(&self) -> f64 {
        if self.accuracies.is_empty() {
            return 0.0;
        }
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Sample standard deviation over repeats (0 when n < 2).
    pub fn std_dev(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let var = self
            .accuracies
            .iter()
            .map(|&a| (a - mean) * (a - mean))
            .sum::<f64>()
            / (n as f64 - 1.0);
        crate::math::sqrt(var)
    }
}

/// An accuracy-vs-PCs curve plus a confusion matrix at the largest PC count.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentResult {
    /// One point per requested PC count, in request order.
    pub points: Vec<AccuracyPoint>,
    /// The distinct class labels, ascending (confusion row/column order).
    pub classes: Vec<usize>,
    /// Confusion counts at the largest PC count, accumulated over all
    /// repeats; rows are truth, columns are predictions.
    pub confusion: Array2<u64>,
}

impl ExperimentResult {
    /// The point for an exact PC count, if present.
    pub fn point(&self, pcs: usize) -> Option<&AccuracyPoint> {
        self.points.iter().find(|p| p.pcs == pcs)
    }
}

/// Settings for the k-fold protocol.
#[derive(Clone, Copy, Debug)]
pub struct KfoldSpec {
    /// Number of folds (the paper's protocol uses 4).
    pub k: usize,
    /// Independent repeats, each resampling trials.
    pub n_repeats: usize,
    /// Trials drawn per class per repeat.
    pub per_class: usize,
    /// Root seed; repeats derive from it deterministically.
    pub seed: u64,
}

/// Settings for the extrapolation protocol.
#[derive(Clone, Copy, Debug)]
pub struct ExtrapolationSpec {
    /// Independent repeats, each resampling the training cells.
    pub n_repeats: usize,
    /// Root seed; repeats derive from it deterministically.
    pub seed: u64,
}

/// Train/test sizes of one fold split: k-fold holds out `total / k`.
pub fn kfold_split_sizes(total: usize, k: usize) -> (usize, usize) {
    let test = total / k;
    (total - test, test)
}

/// Trials drawn per cell for extrapolation training: 75% of what is there.
pub fn extrapolation_train_per_cell(available: usize) -> usize {
    available * 3 / 4
}

/// Which test bucket a speed/force cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionBucket {
    /// Neither the speed nor the force was trained (2 cells).
    UntrainedBoth,
    /// Trained speed, untrained force (3 cells).
    UntrainedForce,
    /// Untrained speed, trained force (4 cells).
    UntrainedSpeed,
    /// Both trained (6 cells).
    Trained,
}

/// All buckets in reporting order.
pub const BUCKET_ORDER: [ConditionBucket; 4] = [
    ConditionBucket::UntrainedBoth,
    ConditionBucket::UntrainedForce,
    ConditionBucket::UntrainedSpeed,
    ConditionBucket::Trained,
];

/// The bucket of a standard-grid cell.
pub fn condition_bucket(speed_index: usize, force_index: usize) -> ConditionBucket {
    let speed_trained = TRAINED_SPEED_INDICES.contains(&speed_index);
    let force_trained = TRAINED_FORCE_INDICES.contains(&force_index);
    match (speed_trained, force_trained) {
        (false, false) => ConditionBucket::UntrainedBoth,
        (true, false) => ConditionBucket::UntrainedForce,
        (false, true) => ConditionBucket::UntrainedSpeed,
        (true, true) => ConditionBucket::Trained,
    }
}

/// Cells per bucket, in `BUCKET_ORDER`: derived from the grid, not assumed.
pub fn bucket_cell_counts() -> [usize; 4] {
    let mut counts = [0usize; 4];
    for s in 0..N_SPEEDS {
        for f in 0..N_FORCES {
            let b = BUCKET_ORDER
                .iter()
                .position(|&x| x == condition_bucket(s, f))
                .expect("every bucket listed");
            counts[b] += 1;
        }
    }
    counts
}

/// Extrapolation results, one per test bucket.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtrapolationResult {
    /// Untrained speed and force (hardest transfer).
    pub untrained_both: ExperimentResult,
    /// Untrained force at trained speeds.
    pub untrained_force: ExperimentResult,
    /// Untrained speed at trained forces.
    pub untrained_speed: ExperimentResult,
    /// Held-out trials from the trained cells.
    pub trained: ExperimentResult,
}

impl ExtrapolationResult {
    /// The result for one bucket.
    pub fn bucket(&self, which: ConditionBucket) -> &ExperimentResult {
        match which {
            ConditionBucket::UntrainedBoth => &self.untrained_both,
            ConditionBucket::UntrainedForce => &self.untrained_force,
            ConditionBucket::UntrainedSpeed => &self.untrained_speed,
            ConditionBucket::Trained => &self.trained,
        }
    }
}

/// Counts truth/prediction pairs into a classes × classes table
/// (rows = truth, columns = predicted, both in `classes` order).
pub fn confusion_matrix(
    truth: &[usize],
    predicted: &[usize],
    classes: &[usize],
) -> Result<Array2<u64>, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch);
    }
    let index_of = |label: usize| {
        classes
            .iter()
            .position(|&c| c == label)
            .ok_or(EvalError::UnknownLabel(label))
    };
    let mut counts = Array2::zeros((classes.len(), classes.len()));
    for (&t, &p) in truth.iter().zip(predicted.iter()) {
        counts[[index_of(t)?, index_of(p)?]] += 1;
    }
    Ok(counts)
}

fn sorted_distinct(labels: &[usize]) -> Vec<usize> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

fn validate_pcs(pcs: &[usize]) -> Result<usize, EvalError> {
    if pcs.is_empty() || pcs.contains(&0) {
        return Err(EvalError::BadPcList);
    }
    Ok(*pcs.iter().max().expect("non-empty"))
}

/// One accumulator per (label set), holding counters per PC count.
struct ScoreSheet {
    classes: Vec<usize>,
    /// correct[pc_index] summed over folds within the current repeat.
    correct: Vec<usize>,
    tested: usize,
    accuracies: Vec<Vec<f64>>, // [pc_index][repeat]
    confusion: Array2<u64>,
}

impl ScoreSheet {
    fn new(classes: Vec<usize>, n_pcs: usize) -> Self {
        let n = classes.len();
        Self {
            classes,
            correct: vec![0; n_pcs],
            tested: 0,
            accuracies: vec![Vec::new(); n_pcs],
            confusion: Array2::zeros((n, n)),
        }
    }

    fn finish_repeat(&mut self) {
        for (acc, &c) in self.accuracies.iter_mut().zip(self.correct.iter()) {
            acc.push(c as f64 / self.tested.max(1) as f64);
        }
        self.correct.iter_mut().for_each(|c| *c = 0);
        self.tested = 0;
    }

    fn into_result(self, pcs: &[usize]) -> ExperimentResult {
        let points = pcs
            .iter()
            .zip(self.accuracies)
            .map(|(&pcs, accuracies)| AccuracyPoint { pcs, accuracies })
            .collect();
        ExperimentResult { points, classes: self.classes, confusion: self.confusion }
    }
}

/// Stratified k-fold evaluation of one label set.
pub fn kfold_eval(
    values: &Array2<f64>,
    labels: &[usize],
    pcs: &[usize],
    spec: &KfoldSpec,
) -> Result<ExperimentResult, EvalError> {
    let mut results = kfold_eval_multi(values, labels, &[labels], pcs, spec)?;
    Ok(results.pop().expect("one label set in, one result out"))
}

/// Stratified k-fold evaluation sharing trial subsamples, folds, and PCA
/// bases across several label sets over the same rows (e.g. fine texture
/// labels and coarse group labels). Stratification uses `strata`; each label
/// set gets its own discriminant fits and its own result.
pub fn kfold_eval_multi(
    values: &Array2<f64>,
    strata: &[usize],
    label_sets: &[&[usize]],
    pcs: &[usize],
    spec: &KfoldSpec,
) -> Result<Vec<ExperimentResult>, EvalError> {
    let rows = values.nrows();
    if strata.len() != rows || label_sets.iter().any(|ls| ls.len() != rows) {
        return Err(EvalError::LengthMismatch);
    }
    if spec.k < 2 {
        return Err(EvalError::BadFoldCount);
    }
    if spec.per_class < spec.k {
        return Err(EvalError::SubsampleBelowFolds);
    }
    let kmax = validate_pcs(pcs)?;
    let confusion_at = pcs.iter().position(|&p| p == kmax).expect("kmax in the list");

    let strata_classes = sorted_distinct(strata);
    let mut per_stratum: Vec<Vec<usize>> = vec![Vec::new(); strata_classes.len()];
    for (i, &s) in strata.iter().enumerate() {
        let c = strata_classes.binary_search(&s).expect("seen above");
        per_stratum[c].push(i);
    }
    for (c, idxs) in per_stratum.iter().enumerate() {
        if idxs.len() < spec.per_class {
            return Err(EvalError::TooFewTrials {
                label: strata_classes[c],
                available: idxs.len(),
                needed: spec.per_class,
            });
        }
    }

    let mut sheets: Vec<ScoreSheet> = label_sets
        .iter()
        .map(|ls| ScoreSheet::new(sorted_distinct(ls), pcs.len()))
        .collect();

    for repeat in 0..spec.n_repeats {
        let mut rng = seeds::rng_from_seed(seeds::derive_seed_parts(spec.seed, &[repeat as u64]));

        // Per-class subsample, shuffled, then round-robin fold assignment:
        // every class lands in every fold.
        let mut chosen: Vec<usize> = Vec::new();
        let mut fold_of: Vec<usize> = Vec::new();
        for idxs in &per_stratum {
            let mut picked: Vec<usize> =
                idxs.choose_multiple(&mut rng, spec.per_class).copied().collect();
            picked.shuffle(&mut rng);
            for (pos, &i) in picked.iter().enumerate() {
                chosen.push(i);
                fold_of.push(pos % spec.k);
            }
        }

        for fold in 0..spec.k {
            let train_idx: Vec<usize> = chosen
                .iter()
                .zip(fold_of.iter())
                .filter(|(_, &f)| f != fold)
                .map(|(&i, _)| i)
                .collect();
            let test_idx: Vec<usize> = chosen
                .iter()
                .zip(fold_of.iter())
                .filter(|(_, &f)| f == fold)
                .map(|(&i, _)| i)
                .collect();

            let train_values = values.select(Axis(0), &train_idx);
            let test_values = values.select(Axis(0), &test_idx);
            let basis = pca_fit(&train_values, kmax)?;
            let train_proj = basis.project_rows(&train_values);
            let test_proj = basis.project_rows(&test_values);

            for (pi, &p) in pcs.iter().enumerate() {
                let train_p = train_proj.slice(s![.., ..p]);
                let test_p = test_proj.slice(s![.., ..p]);
                for (sheet, ls) in sheets.iter_mut().zip(label_sets.iter()) {
                    let train_labels: Vec<usize> = train_idx.iter().map(|&i| ls[i]).collect();
                    let truth: Vec<usize> = test_idx.iter().map(|&i| ls[i]).collect();
                    let model = lda_fit(&train_p, &train_labels)?;
                    let predicted = model.predict_rows(&test_p);
                    sheet.correct[pi] += predicted
                        .iter()
                        .zip(truth.iter())
                        .filter(|(a, b)| a == b)
                        .count();
                    if pi == confusion_at {
                        sheet.tested += truth.len();
                        let add = confusion_matrix(&truth, &predicted, &sheet.classes)?;
                        sheet.confusion += &add;
                    }
                }
            }
        }
        for sheet in sheets.iter_mut() {
            sheet.finish_repeat();
        }
    }

    Ok(sheets.into_iter().map(|s| s.into_result(pcs)).collect())
}

/// Speed/force extrapolation: train on 75% subsamples of the six trained
/// cells (speeds 40/60/80 × forces 250/500) each repeat, then score the four
/// condition buckets separately. No folding.
pub fn extrapolation_eval(
    values: &Array2<f64>,
    labels: &[usize],
    conditions: &[(usize, usize)],
    pcs: &[usize],
    spec: &ExtrapolationSpec,
) -> Result<ExtrapolationResult, EvalError> {
    let rows = values.nrows();
    if labels.len() != rows || conditions.len() != rows {
        return Err(EvalError::LengthMismatch);
    }
    for &(s, f) in conditions {
        if s >= N_SPEEDS || f >= N_FORCES {
            return Err(EvalError::UnknownCondition { speed_index: s, force_index: f });
        }
    }
    let kmax = validate_pcs(pcs)?;
    let confusion_at = pcs.iter().position(|&p| p == kmax).expect("kmax in the list");
    let classes = sorted_distinct(labels);

    // Index trials per (class, cell); every cell of every class must exist,
    // and trained cells must survive the 75% cut.
    let cell_key = |s: usize, f: usize| s * N_FORCES + f;
    let mut per_class_cell: Vec<Vec<Vec<usize>>> =
        vec![vec![Vec::new(); N_SPEEDS * N_FORCES]; classes.len()];
    for (i, (&l, &(s, f))) in labels.iter().zip(conditions.iter()).enumerate() {
        let c = classes.binary_search(&l).expect("distinct from labels");
        per_class_cell[c][cell_key(s, f)].push(i);
    }
    for (c, cells) in per_class_cell.iter().enumerate() {
        for s in 0..N_SPEEDS {
            for f in 0..N_FORCES {
                let n = cells[cell_key(s, f)].len();
                let trained = condition_bucket(s, f) == ConditionBucket::Trained;
                let needed = if trained { 2 } else { 1 };
                if n < needed {
                    return Err(EvalError::MissingCell {
                        label: classes[c],
                        speed_index: s,
                        force_index: f,
                    });
                }
            }
        }
    }

    // Fixed test rows for the three untrained buckets (all trials in those
    // cells); the trained bucket tests the per-repeat held-out remainder.
    let bucket_pos = |b: ConditionBucket| {
        BUCKET_ORDER.iter().position(|&x| x == b).expect("bucket listed")
    };
    let mut fixed_test: [Vec<usize>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (i, &(s, f)) in conditions.iter().enumerate() {
        let b = condition_bucket(s, f);
        if b != ConditionBucket::Trained {
            fixed_test[bucket_pos(b)].push(i);
        }
    }

    let mut sheets: Vec<ScoreSheet> = (0..4)
        .map(|_| ScoreSheet::new(classes.clone(), pcs.len()))
        .collect();

    for repeat in 0..spec.n_repeats {
        let mut rng = seeds::rng_from_seed(seeds::derive_seed_parts(spec.seed, &[repeat as u64]));

        let mut train_idx: Vec<usize> = Vec::new();
        let mut held_out: Vec<usize> = Vec::new();
        for cells in &per_class_cell {
            for &s in &TRAINED_SPEED_INDICES {
                for &f in &TRAINED_FORCE_INDICES {
                    let idxs = &cells[cell_key(s, f)];
                    let take = extrapolation_train_per_cell(idxs.len()).max(1);
                    let mut picked: Vec<usize> =
                        idxs.choose_multiple(&mut rng, take).copied().collect();
                    picked.sort_unstable();
                    let mut it = picked.iter().peekable();
                    for &i in idxs {
                        if it.peek() == Some(&&i) {
                            it.next();
                            train_idx.push(i);
                        } else {
                            held_out.push(i);
                        }
                    }
                }
            }
        }

        let train_values = values.select(Axis(0), &train_idx);
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let basis = pca_fit(&train_values, kmax)?;
        let train_proj = basis.project_rows(&train_values);

        for (b, sheet) in sheets.iter_mut().enumerate() {
            let test_idx: &[usize] = if BUCKET_ORDER[b] == ConditionBucket::Trained {
                &held_out
            } else {
                &fixed_test[b]
            };
            let test_values = values.select(Axis(0), test_idx);
            let test_proj = basis.project_rows(&test_values);
            let truth: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();

            for (pi, &p) in pcs.iter().enumerate() {
                let train_p = train_proj.slice(s![.., ..p]);
                let model = lda_fit(&train_p, &train_labels)?;
                let predicted = model.predict_rows(&test_proj.slice(s![.., ..p]));
                sheet.correct[pi] += predicted
                    .iter()
                    .zip(truth.iter())
                    .filter(|(a, b)| a == b)
                    .count();
                if pi == confusion_at {
                    sheet.tested += truth.len();
                    let add = confusion_matrix(&truth, &predicted, &sheet.classes)?;
                    sheet.confusion += &add;
                }
            }
        }
        for sheet in sheets.iter_mut() {
            sheet.finish_repeat();
        }
    }

    let mut it = sheets.into_iter().map(|s| s.into_result(pcs));
    Ok(ExtrapolationResult {
        untrained_both: it.next().expect("four buckets"),
        untrained_force: it.next().expect("four buckets"),
        untrained_speed: it.next().expect("four buckets"),
        trained: it.next().expect("four buckets"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Gaussian blobs: `per_class` trials for each of `n_classes`, one-hot
    /// class means scaled by `sep` in `dims` dimensions plus unit noise σ.
    fn blob_matrix(
        seed: u64,
        n_classes: usize,
        per_class: usize,
        dims: usize,
        sep: f64,
        sigma: f64,
    ) -> (Array2<f64>, Vec<usize>) {
        let mut rng = seeds::rng_from_seed(seed);
        let rows = n_classes * per_class;
        let mut values = Array2::zeros((rows, dims));
        let mut labels = Vec::with_capacity(rows);
        for c in 0..n_classes {
            for t in 0..per_class {
                let r = c * per_class + t;
                for d in 0..dims {
                    let noise: f64 = rng.sample(StandardNormal);
                    values[[r, d]] = if d == c % dims { sep } else { 0.0 } + sigma * noise;
                }
                labels.push(c);
            }
        }
        (values, labels)
    }

    #[test]
    fn kfold_on_separable_blobs_is_perfect_every_repeat() {
        let (values, labels) = blob_matrix(41, 4, 12, 5, 10.0, 0.01);
        let spec = KfoldSpec { k: 4, n_repeats: 3, per_class: 8, seed: 7 };
        let result = kfold_eval(&values, &labels, &[2, 4], &spec).unwrap();

        assert_eq!(result.points.len(), 2);
        let top = result.point(4).unwrap();
        assert_eq!(top.n(), 3, "exactly one accuracy sample per repeat");
        assert!(top.accuracies.iter().all(|&a| a == 1.0), "{:?}", top.accuracies);
        assert_eq!(top.mean(), 1.0);
        assert_eq!(top.std_dev(), 0.0);

        // Pooled-fold bookkeeping: each repeat tests per_class trials per
        // class (k folds of per_class/k each), accumulated over repeats.
        assert_eq!(result.classes, vec![0, 1, 2, 3]);
        for r in 0..4 {
            let row_sum: u64 = result.confusion.row(r).sum();
            assert_eq!(row_sum, 8 * 3, "8 tested per class per repeat, 3 repeats");
            assert_eq!(result.confusion[[r, r]], 8 * 3, "perfect diagonal");
        }
    }

    #[test]
    fn kfold_is_deterministic_and_repeats_resample() {
        let (values, labels) = blob_matrix(42, 3, 30, 4, 1.2, 1.0);
        let spec = KfoldSpec { k: 4, n_repeats: 6, per_class: 16, seed: 99 };
        let a = kfold_eval(&values, &labels, &[1, 2, 3], &spec).unwrap();
        let b = kfold_eval(&values, &labels, &[1, 2, 3], &spec).unwrap();
        assert_eq!(a, b, "same seed, same result, bit for bit");

        // Resampling gives non-identical per-repeat accuracies on noisy data
        // (deterministic under the fixed seed above).
        let accs = &a.point(3).unwrap().accuracies;
        assert!(accs.windows(2).any(|w| w[0] != w[1]), "{accs:?}");

        let other = KfoldSpec { seed: 100, ..spec };
        let c = kfold_eval(&values, &labels, &[1, 2, 3], &other).unwrap();
        assert_ne!(a.point(3).unwrap().accuracies, c.point(3).unwrap().accuracies);
    }

    #[test]
    fn shared_folds_make_identical_label_sets_identical() {
        let (values, labels) = blob_matrix(43, 4, 20, 6, 2.0, 0.8);
        let groups: Vec<usize> = labels.iter().map(|&l| l / 2).collect();
        let spec = KfoldSpec { k: 4, n_repeats: 4, per_class: 12, seed: 5 };
        let results =
            kfold_eval_multi(&values, &labels, &[&labels, &labels, &groups], &[2, 3], &spec)
                .unwrap();
        assert_eq!(results.len(), 3);
        assert_eq!(results[0], results[1], "same labels through shared folds");
        assert_eq!(results[2].classes, vec![0, 1]);
    }

    #[test]
    fn kfold_validates_its_inputs() {
        let (values, labels) = blob_matrix(44, 3, 10, 4, 5.0, 0.1);
        let spec = KfoldSpec { k: 4, n_repeats: 2, per_class: 8, seed: 1 };
        assert_eq!(
            kfold_eval(&values, &labels, &[], &spec).unwrap_err(),
            EvalError::BadPcList
        );
        assert_eq!(
            kfold_eval(&values, &labels, &[0, 2], &spec).unwrap_err(),
            EvalError::BadPcList
        );
        let bad_k = KfoldSpec { k: 1, ..spec };
        assert_eq!(
            kfold_eval(&values, &labels, &[2], &bad_k).unwrap_err(),
            EvalError::BadFoldCount
        );
        let too_many = KfoldSpec { per_class: 11, ..spec };
        assert_eq!(
            kfold_eval(&values, &labels, &[2], &too_many).unwrap_err(),
            EvalError::TooFewTrials { label: 0, available: 10, needed: 11 }
        );
        let below_k = KfoldSpec { per_class: 3, ..spec };
        assert_eq!(
            kfold_eval(&values, &labels, &[2], &below_k).unwrap_err(),
            EvalError::SubsampleBelowFolds
        );
        let short_labels = &labels[..labels.len() - 1];
        assert_eq!(
            kfold_eval(&values, short_labels, &[2], &spec).unwrap_err(),
            EvalError::LengthMismatch
        );
    }

    #[test]
    fn fold_size_arithmetic_matches_the_protocol() {
        assert_eq!(kfold_split_sizes(8000, 4), (6000, 2000));
        assert_eq!(kfold_split_sizes(1600, 4), (1200, 400));
        assert_eq!(kfold_split_sizes(100, 4), (75, 25));
        assert_eq!(extrapolation_train_per_cell(100), 75);
        assert_eq!(extrapolation_train_per_cell(20), 15);
        assert_eq!(bucket_cell_counts(), [2, 3, 4, 6]);
    }

    /// A full 15-cell grid: `per_cell` trials per class per cell. Features
    /// are condition-independent separated one-hots.
    fn grid_matrix(
        seed: u64,
        n_classes: usize,
        per_cell: usize,
        sep: f64,
        sigma: f64,
    ) -> (Array2<f64>, Vec<usize>, Vec<(usize, usize)>) {
        let mut rng = seeds::rng_from_seed(seed);
        let dims = n_classes.max(3);
        let rows = n_classes * per_cell * N_SPEEDS * N_FORCES;
        let mut values = Array2::zeros((rows, dims));
        let mut labels = Vec::with_capacity(rows);
        let mut conditions = Vec::with_capacity(rows);
        let mut r = 0;
        for c in 0..n_classes {
            for s in 0..N_SPEEDS {
                for f in 0..N_FORCES {
                    for _ in 0..per_cell {
                        for d in 0..dims {
                            let noise: f64 = rng.sample(StandardNormal);
                            values[[r, d]] = if d == c { sep } else { 0.0 } + sigma * noise;
                        }
                        labels.push(c);
                        conditions.push((s, f));
                        r += 1;
                    }
                }
            }
        }
        (values, labels, conditions)
    }

    #[test]
    fn extrapolation_buckets_score_condition_independent_features_equally() {
        let (values, labels, conditions) = grid_matrix(45, 3, 4, 8.0, 0.05);
        let spec = ExtrapolationSpec { n_repeats: 3, seed: 11 };
        let result = extrapolation_eval(&values, &labels, &conditions, &[2], &spec).unwrap();

        for bucket in BUCKET_ORDER {
            let point = &result.bucket(bucket).points[0];
            assert_eq!(point.n(), 3);
            assert!(
                point.accuracies.iter().all(|&a| a == 1.0),
                "{bucket:?}: {:?}",
                point.accuracies
            );
        }

        // Test-count accounting per repeat: untrained buckets test every
        // trial of their cells; trained tests the 25% held out (1 of 4).
        let per_class_counts = [
            2 * 4, // untrained both: 2 cells × 4 trials
            3 * 4,
            4 * 4,
            6 * 1, // trained: 6 cells × (4 − 3) held out
        ];
        for (bucket, want) in BUCKET_ORDER.iter().zip(per_class_counts) {
            let confusion = &result.bucket(*bucket).confusion;
            for c in 0..3 {
                assert_eq!(confusion.row(c).sum(), want * 3, "{bucket:?} over 3 repeats");
            }
        }
    }

    #[test]
    fn extrapolation_rejects_missing_cells_and_bad_conditions() {
        let (values, labels, mut conditions) = grid_matrix(46, 3, 2, 8.0, 0.05);
        let spec = ExtrapolationSpec { n_repeats: 1, seed: 3 };

        conditions[0] = (9, 0);
        assert_eq!(
            extrapolation_eval(&values, &labels, &conditions, &[2], &spec).unwrap_err(),
            EvalError::UnknownCondition { speed_index: 9, force_index: 0 }
        );
        conditions[0] = (0, 0);

        // Rehome every (class 0, speed 0, force 0) trial into another cell:
        // the protocol must notice the empty cell.
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 && conditions[i] == (0, 0) {
                conditions[i] = (0, 1);
            }
        }
        assert_eq!(
            extrapolation_eval(&values, &labels, &conditions, &[2], &spec).unwrap_err(),
            EvalError::MissingCell { label: 0, speed_index: 0, force_index: 0 }
        );
    }

    #[test]
    fn confusion_matrix_counts_and_validates() {
        let classes = [2, 5, 7];
        let truth = [2, 2, 5, 7, 7, 7];
        let predicted = [2, 5, 5, 7, 7, 2];
        let m = confusion_matrix(&truth, &predicted, &classes).unwrap();
        assert_eq!(m[[0, 0]], 1);
        assert_eq!(m[[0, 1]], 1);
        assert_eq!(m[[1, 1]], 1);
        assert_eq!(m[[2, 2]], 2);
        assert_eq!(m[[2, 0]], 1);
        for r in 0..3 {
            let want = truth.iter().filter(|&&t| t == classes[r]).count() as u64;
            assert_eq!(m.row(r).sum(), want, "row sums are truth counts");
        }

        assert_eq!(
            confusion_matrix(&truth, &predicted[..3], &classes).unwrap_err(),
            EvalError::LengthMismatch
        );
        assert_eq!(
            confusion_matrix(&[2, 9], &[2, 2], &classes).unwrap_err(),
            EvalError::UnknownLabel(9)
        );
    }
}
