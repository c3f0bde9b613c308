//! Statistical tests for reporting: Welch's t-test with Cohen's d, the
//! two-proportion z-test with Cohen's h, and the significance-marking rules
//! used in result tables.
//!
//! The Student-t tail is computed through the regularized incomplete beta
//! function (modified Lentz continued fraction), since Welch's
//! degrees-of-freedom are fractional.

use core::fmt;

use crate::math;

/// Statistical-test input failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsError {
    /// A sample had fewer than two observations.
    UndersizedSample,
    /// Both samples were exactly constant: no variance to test against.
    ZeroVariance,
    /// A proportion's trial count was zero or successes exceeded trials.
    BadProportion,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UndersizedSample => write!(f, "each sample needs at least two observations"),
            Self::ZeroVariance => write!(f, "samples carry no variance"),
            Self::BadProportion => write!(f, "proportion needs 0 <= successes <= trials, trials >= 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StatsError {}

/// Welch's two-sample t-test result.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WelchTest {
    /// The t statistic (sign follows `mean(a) − mean(b)`).
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom (fractional).
    pub dof: f64,
    /// Two-tailed p-value.
    pub p: f64,
}

fn mean_and_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-tailed, two-population Welch's t-test (unequal variances).
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::UndersizedSample);
    }
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (ma - mb) / math::sqrt(se2);
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = student_t_two_tailed(t, dof);
    Ok(WelchTest { t, dof, p })
}

/// Cohen's d with the pooled standard deviation.
pub fn cohen_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::UndersizedSample);
    }
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((ma - mb) / math::sqrt(pooled))
}

/// Two-proportion z-test result.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropTest {
    /// The z statistic under the pooled proportion.
    pub z: f64,
    /// Two-tailed p-value.
    pub p: f64,
}

/// Two-tailed, two-proportion z-test with the pooled proportion.
pub fn two_prop_z(
    successes_1: u64,
    trials_1: u64,
    successes_2: u64,
    trials_2: u64,
) -> Result<PropTest, StatsError> {
    if trials_1 == 0 || trials_2 == 0 || successes_1 > trials_1 || successes_2 > trials_2 {
        return Err(StatsError::BadProportion);
    }
    let (n1, n2) = (trials_1 as f64, trials_2 as f64);
    let p1 = successes_1 as f64 / n1;
    let p2 = successes_2 as f64 / n2;
    let pooled = (successes_1 + successes_2) as f64 / (n1 + n2);
    let denom = math::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    if denom == 0.0 {
        // Both samples all-success or all-failure: no detectable difference.
        return Ok(PropTest { z: 0.0, p: 1.0 });
    }
    let z = (p1 - p2) / denom;
    let p = math::erfc(math::abs(z) / core::f64::consts::SQRT_2);
    Ok(PropTest { z, p })
}

/// Cohen's h effect size for proportions: `2·asin√p₁ − 2·asin√p₂`.
pub fn cohen_h(p1: f64, p2: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2));
    2.0 * math::asin(math::sqrt(p1)) - 2.0 * math::asin(math::sqrt(p2))
}

/// Result-table significance marks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Significance {
    /// Not significant under the marking rules.
    None,
    /// p < 0.05 with a medium effect (d > 0.5, or h > 0.2).
    Single,
    /// p < 0.01 with a large effect (d > 1, or h > 0.5).
    Double,
}

impl Significance {
    /// The conventional asterisk rendering.
    pub fn marker(&self) -> &'static str {
        match self {
            Self::None => "",
            Self::Single => "*",
            Self::Double => "**",
        }
    }
}

/// Marks a mean difference: double at p < 0.01 and |d| > 1, single at
/// p < 0.05 and |d| > 0.5.
pub fn mark_mean_difference(p: f64, d: f64) -> Significance {
    let d = math::abs(d);
    if p < 0.01 && d > 1.0 {
        Significance::Double
    } else if p < 0.05 && d > 0.5 {
        Significance::Single
    } else {
        Significance::None
    }
}

/// Marks a proportion difference: double at p < 0.01 and |h| > 0.5, single
/// at p < 0.05 and |h| > 0.2.
pub fn mark_proportion_difference(p: f64, h: f64) -> Significance {
    let h = math::abs(h);
    if p < 0.01 && h > 0.5 {
        Significance::Double
    } else if p < 0.05 && h > 0.2 {
        Significance::Single
    } else {
        Significance::None
    }
}

/// Two-tailed Student-t tail probability for fractional `dof`.
fn student_t_two_tailed(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(0.5 * dof, 0.5, x)
}

/// Regularized incomplete beta function `I_x(a, b)` by the modified Lentz
/// continued fraction, with the symmetry switch for fast convergence.
fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0 && (0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // ln of the prefactor x^a (1-x)^b / B(a, b).
    let ln_front = math::ln_gamma(a + b) - math::ln_gamma(a) - math::ln_gamma(b)
        + a * math::ln(x)
        + b * math::ln(1.0 - x);
    if x < (a + 1.0) / (a + b + 2.0) {
        math::exp(ln_front) * beta_cf(a, b, x) / a
    } else {
        1.0 - math::exp(ln_front) * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if math::abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if math::abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        let err = (got - want).abs();
        let bound = tol * want.abs().max(1.0);
        assert!(err <= bound, "{what}: got {got}, want {want} (err {err:.3e})");
    }

    // Reference values below were computed independently with 30-digit
    // arithmetic from the closed-form Welch / Satterthwaite / incomplete-beta
    // and arcsine expressions, then frozen.

    #[test]
    fn welch_matches_the_frozen_references() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_t(&a, &b).unwrap();
        assert_close(r.t, -1.0, 1e-12, "t equal-variance shifted");
        assert_close(r.dof, 8.0, 1e-12, "dof equal-variance shifted");
        assert_close(r.p, 0.34659350708733425, 1e-12, "p equal-variance shifted");

        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [2.0, 2.5, 3.0, 3.5];
        let r = welch_t(&a, &b).unwrap();
        assert_close(r.t, 0.9045340337332909, 1e-12, "t unbalanced");
        assert_close(r.dof, 6.59467097295115, 1e-12, "dof unbalanced");
        assert_close(r.p, 0.39755140950319989, 1e-12, "p unbalanced");

        let a = [10.1, 10.5, 9.8, 10.2, 10.4, 9.9, 10.0, 10.3];
        let b = [11.2, 11.0, 11.5, 10.9, 11.3];
        let r = welch_t(&a, &b).unwrap();
        assert_close(r.t, -7.492147564769081, 1e-12, "t well-separated");
        assert_close(r.dof, 8.814403553299492, 1e-12, "dof well-separated");
        assert_close(r.p, 4.1681843757605546e-5, 1e-12, "p well-separated");
    }

    #[test]
    fn welch_identities_and_errors() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_close(r.p, 1.0, 1e-12, "identical samples");

        let b = [5.0, 6.0, 7.0];
        let fwd = welch_t(&a, &b).unwrap();
        let rev = welch_t(&b, &a).unwrap();
        assert_eq!(fwd.t, -rev.t);
        assert_eq!(fwd.p, rev.p);

        assert_eq!(welch_t(&[1.0], &a).unwrap_err(), StatsError::UndersizedSample);
        assert_eq!(
            welch_t(&[2.0, 2.0], &[2.0, 2.0]).unwrap_err(),
            StatsError::ZeroVariance
        );
    }

    #[test]
    fn cohen_d_matches_the_frozen_references() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        assert_close(
            cohen_d(&a, &b).unwrap(),
            -0.6324555320336759,
            1e-12,
            "d shifted",
        );

        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [2.0, 2.5, 3.0, 3.5];
        assert_close(cohen_d(&a, &b).unwrap(), 0.48989794855663565, 1e-12, "d unbalanced");

        let a = [10.1, 10.5, 9.8, 10.2, 10.4, 9.9, 10.0, 10.3];
        let b = [11.2, 11.0, 11.5, 10.9, 11.3];
        assert_close(cohen_d(&a, &b).unwrap(), -4.243713578726968, 1e-12, "d separated");

        assert_eq!(cohen_d(&[1.0, 1.0], &[1.0, 1.0]).unwrap_err(), StatsError::ZeroVariance);
        let sym = cohen_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sym, 0.0);
    }

    #[test]
    fn two_prop_z_matches_the_frozen_references() {
        let r = two_prop_z(45, 100, 30, 100).unwrap();
        assert_close(r.z, 2.1908902300206647, 1e-12, "z 45/100 vs 30/100");
        assert_close(r.p, 0.028459736916310556, 1e-12, "p 45/100 vs 30/100");

        let r = two_prop_z(520, 1000, 480, 1000).unwrap();
        assert_close(r.z, 1.7888543819998333, 1e-12, "z 520 vs 480");
        assert_close(r.p, 0.073638270120302411, 1e-12, "p 520 vs 480");

        let r = two_prop_z(9, 10, 1, 10).unwrap();
        assert_close(r.z, 3.577708763999664, 1e-12, "z 9/10 vs 1/10");
        assert_close(r.p, 0.00034661935113466651, 1e-12, "p 9/10 vs 1/10");

        let equal = two_prop_z(30, 100, 30, 100).unwrap();
        assert_eq!(equal.z, 0.0);
        assert_close(equal.p, 1.0, 1e-12, "equal proportions");

        let degenerate = two_prop_z(10, 10, 5, 5).unwrap();
        assert_eq!(degenerate.z, 0.0);
        assert_eq!(degenerate.p, 1.0);

        assert_eq!(two_prop_z(5, 0, 1, 10).unwrap_err(), StatsError::BadProportion);
        assert_eq!(two_prop_z(11, 10, 1, 10).unwrap_err(), StatsError::BadProportion);
    }

    #[test]
    fn cohen_h_matches_the_frozen_references() {
        assert_close(cohen_h(0.6, 0.5), 0.20135792079033066, 1e-12, "h(0.6, 0.5)");
        assert_close(cohen_h(1.0, 0.0), core::f64::consts::PI, 1e-12, "h(1, 0)");
        assert_eq!(cohen_h(0.3, 0.3), 0.0);
        assert_close(cohen_h(0.45, 0.30), 0.3113494249059283, 1e-12, "h(0.45, 0.30)");
    }

    #[test]
    fn significance_marks_follow_the_table_rules() {
        assert_eq!(mark_mean_difference(0.005, 1.5), Significance::Double);
        assert_eq!(mark_mean_difference(0.005, 0.8), Significance::Single);
        assert_eq!(mark_mean_difference(0.03, 2.0), Significance::Single);
        assert_eq!(mark_mean_difference(0.03, 0.4), Significance::None);
        assert_eq!(mark_mean_difference(0.2, 3.0), Significance::None);
        assert_eq!(mark_mean_difference(0.005, -1.5), Significance::Double);

        assert_eq!(mark_proportion_difference(0.001, 0.6), Significance::Double);
        assert_eq!(mark_proportion_difference(0.001, 0.3), Significance::Single);
        assert_eq!(mark_proportion_difference(0.04, 0.25), Significance::Single);
        assert_eq!(mark_proportion_difference(0.04, 0.1), Significance::None);
        assert_eq!(Significance::Double.marker(), "**");
    }

    #[test]
    fn incomplete_beta_brackets_and_symmetry() {
        // I_x(a, b) endpoints and the reflection identity
        // I_x(a, b) = 1 − I_{1−x}(b, a), spot-checked across the domain.
        for (a, b) in [(0.5, 0.5), (2.0, 3.0), (4.5, 0.5), (10.0, 10.0)] {
            assert_eq!(regularized_incomplete_beta(a, b, 0.0), 0.0);
            assert_eq!(regularized_incomplete_beta(a, b, 1.0), 1.0);
            for x in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let lhs = regularized_incomplete_beta(a, b, x);
                let rhs = 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
                assert_close(lhs, rhs, 1e-12, "reflection identity");
                assert!((0.0..=1.0).contains(&lhs));
            }
        }
        // I_x(1, 1) = x exactly (uniform distribution).
        for x in [0.2, 0.5, 0.8] {
            assert_close(regularized_incomplete_beta(1.0, 1.0, x), x, 1e-12, "uniform");
        }
    }
}
