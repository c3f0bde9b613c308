//! Linear discriminant analysis with a shared (pooled) covariance.
//!
//! Classes share one within-class covariance estimate, so the decision rule
//! is linear: `score_c(x) = w_c·x + b_c` with `w_c = Σ⁻¹μ_c` and
//! `b_c = −½·μ_cᵀΣ⁻¹μ_c`. Priors are uniform, so their log drops out. An
//! ill-conditioned covariance is ridged toward a scaled identity before the
//! Cholesky solve.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use ndarray::{Array2, ArrayBase, ArrayView1, Data, Ix2};

use crate::math;
use crate::pca;

/// Condition-number threshold beyond which the covariance is ridged.
const CONDITION_LIMIT: f64 = 1e12;
/// Ridge scale relative to the mean diagonal entry.
const RIDGE_FRACTION: f64 = 1e-6;

/// LDA input failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdaError {
    /// `labels` length differs from the number of rows.
    LabelCountMismatch,
    /// Fewer than two distinct classes.
    NeedTwoClasses,
    /// Not enough rows: the pooled estimate needs `rows > classes`.
    TooFewRows,
    /// Zero feature columns.
    EmptyFeatures,
}

impl fmt::Display for LdaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LabelCountMismatch => write!(f, "one label per row required"),
            Self::NeedTwoClasses => write!(f, "need at least two distinct classes"),
            Self::TooFewRows => write!(f, "need more rows than classes"),
            Self::EmptyFeatures => write!(f, "need at least one feature column"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LdaError {}

/// A fitted linear discriminant classifier.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LdaModel {
    classes: Vec<usize>,
    /// classes × dim class means.
    means: Array2<f64>,
    /// Pooled within-class covariance (after any ridging), classes share it.
    pooled: Array2<f64>,
    /// classes × dim discriminant weights `Σ⁻¹μ_c`.
    weights: Array2<f64>,
    /// Per-class bias `−½·μ_cᵀΣ⁻¹μ_c`.
    biases: Vec<f64>,
    ridged: bool,
}

impl LdaModel {
    /// The distinct class labels, ascending.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    /// The feature-space dimension.
    pub fn n_features(&self) -> usize {
        self.means.ncols()
    }

    /// The class means, classes × dim.
    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    /// The pooled within-class covariance the model solves against.
    pub fn pooled_covariance(&self) -> &Array2<f64> {
        &self.pooled
    }

    /// Whether the covariance needed an identity ridge before solving.
    pub fn ridged(&self) -> bool {
        self.ridged
    }

    /// Per-class discriminant scores for one row.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        self.scores_view(ArrayView1::from(row))
    }

    fn scores_view(&self, row: ArrayView1<f64>) -> Vec<f64> {
        assert_eq!(row.len(), self.n_features(), "feature width mismatch");
        self.weights
            .rows()
            .into_iter()
            .zip(self.biases.iter())
            .map(|(w, &b)| w.iter().zip(row.iter()).map(|(&wi, &xi)| wi * xi).sum::<f64>() + b)
            .collect()
    }

    /// Predicted class label for one row; ties resolve to the lowest label.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        self.predict_view(ArrayView1::from(row))
    }

    fn predict_view(&self, row: ArrayView1<f64>) -> usize {
        let scores = self.scores_view(row);
        let mut best = 0usize;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        self.classes[best]
    }

    /// Predicted class labels for each row of a matrix (owned or view).
    pub fn predict_rows<S: Data<Elem = f64>>(&self, data: &ArrayBase<S, Ix2>) -> Vec<usize> {
        data.rows().into_iter().map(|r| self.predict_view(r)).collect()
    }
}

/// Fits the classifier on rows × dim data (owned or view) with one label per
/// row.
pub fn lda_fit<S: Data<Elem = f64>>(
    data: &ArrayBase<S, Ix2>,
    labels: &[usize],
) -> Result<LdaModel, LdaError> {
    let (rows, dim) = data.dim();
    if labels.len() != rows {
        return Err(LdaError::LabelCountMismatch);
    }
    if dim == 0 {
        return Err(LdaError::EmptyFeatures);
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let k = classes.len();
    if k < 2 {
        return Err(LdaError::NeedTwoClasses);
    }
    if rows <= k {
        return Err(LdaError::TooFewRows);
    }

    let class_of = |label: usize| classes.binary_search(&label).expect("label seen above");

    let mut means = Array2::<f64>::zeros((k, dim));
    let mut counts = vec![0usize; k];
    for (row, &label) in data.rows().into_iter().zip(labels.iter()) {
        let c = class_of(label);
        counts[c] += 1;
        for (m, &x) in means.row_mut(c).iter_mut().zip(row.iter()) {
            *m += x;
        }
    }
    for (mut mean, &count) in means.rows_mut().into_iter().zip(counts.iter()) {
        mean.mapv_inplace(|m| m / count as f64);
    }

    // Pooled within-class scatter, normalized by n − k.
    let mut pooled = Array2::<f64>::zeros((dim, dim));
    let mut centered = vec![0.0; dim];
    for (row, &label) in data.rows().into_iter().zip(labels.iter()) {
        let mean = means.row(class_of(label));
        for ((c, &x), &m) in centered.iter_mut().zip(row.iter()).zip(mean.iter()) {
            *c = x - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            for j in i..dim {
                pooled[[i, j]] += ci * centered[j];
            }
        }
    }
    let denom = (rows - k) as f64;
    for i in 0..dim {
        for j in i..dim {
            let value = pooled[[i, j]] / denom;
            pooled[[i, j]] = value;
            pooled[[j, i]] = value;
        }
    }

    // Ridge when the covariance is ill-conditioned (or outright singular).
    let (eigs, _) = pca::jacobi_eigh(pooled.clone());
    let max_eig = eigs.first().copied().unwrap_or(0.0);
    let min_eig = eigs.last().copied().unwrap_or(0.0);
    let ill = min_eig <= 0.0 || max_eig / min_eig > CONDITION_LIMIT;
    let mut ridged = false;
    if ill {
        let trace: f64 = (0..dim).map(|i| pooled[[i, i]]).sum();
        let mut ridge = RIDGE_FRACTION * trace / dim as f64;
        if !(ridge > 0.0) {
            ridge = 1e-12;
        }
        for i in 0..dim {
            pooled[[i, i]] += ridge;
        }
        ridged = true;
    }

    let mut chol = cholesky(&pooled);
    while chol.is_none() {
        // A pooled scatter plus a positive ridge is positive definite in
        // exact arithmetic; grow the ridge defensively if rounding disagrees.
        let trace: f64 = (0..dim).map(|i| pooled[[i, i]]).sum();
        let bump = (RIDGE_FRACTION * trace / dim as f64).max(1e-12) * 1000.0;
        for i in 0..dim {
            pooled[[i, i]] += bump;
        }
        ridged = true;
        chol = cholesky(&pooled);
    }
    let chol = chol.expect("positive definite after ridging");

    let mut weights = Array2::<f64>::zeros((k, dim));
    let mut biases = vec![0.0; k];
    for c in 0..k {
        let mu: Vec<f64> = means.row(c).to_vec();
        let w = cholesky_solve(&chol, &mu);
        biases[c] = -0.5 * w.iter().zip(mu.iter()).map(|(&a, &b)| a * b).sum::<f64>();
        for (dst, &src) in weights.row_mut(c).iter_mut().zip(w.iter()) {
            *dst = src;
        }
    }

    Ok(LdaModel { classes, means, pooled, weights, biases, ridged })
}

/// Lower-triangular Cholesky factor, or `None` if not positive definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for t in 0..j {
                sum -= l[[i, t]] * l[[j, t]];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[[i, j]] = math::sqrt(sum);
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `LLᵀx = b` by forward then backward substitution.
fn cholesky_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for t in 0..i {
            sum -= l[[i, t]] * y[t];
        }
        y[i] = sum / l[[i, i]];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for t in (i + 1)..n {
            sum -= l[[t, i]] * x[t];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}
