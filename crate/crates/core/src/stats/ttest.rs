//! Welch, paired and one-sample t-tests with Student-t inference.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::StatsError;
use crate::scalar::Scalar;

/// Result of a two-sided t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T> {
    pub statistic: T,
    /// Welch–Satterthwaite dof may be fractional.
    pub dof: T,
    pub p_value: T,
    pub mean_diff: T,
    pub std_err: T,
    pub ci95: (T, T),
}

/// Upper `level` quantile of the Student-t with `dof` degrees of freedom.
/// Infinite dof gives the normal quantile.
pub fn t_critical(dof: f64, level: f64) -> f64 {
    if dof.is_infinite() {
        return Normal::standard().inverse_cdf(level);
    }
    if !(dof > 0.0) {
        return f64::NAN;
    }
    StudentsT::new(0.0, 1.0, dof)
        .map(|t| t.inverse_cdf(level))
        .unwrap_or(f64::NAN)
}

pub fn two_sided_p(statistic: f64, dof: f64) -> f64 {
    if statistic.is_nan() || !(dof > 0.0) {
        return f64::NAN;
    }
    if statistic.is_infinite() {
        return 0.0;
    }
    let sf = if dof.is_infinite() {
        Normal::standard().sf(statistic.abs())
    } else {
        match StudentsT::new(0.0, 1.0, dof) {
            Ok(t) => t.sf(statistic.abs()),
            Err(_) => return f64::NAN,
        }
    };
    (2.0 * sf).clamp(0.0, 1.0)
}

/// `mean ± t_crit(dof, 0.975) · se`.
pub fn ci95_from<T: Scalar>(mean: T, std_err: T, dof: T) -> (T, T) {
    let half = T::of(t_critical(dof.as_f64(), 0.975)) * std_err;
    (mean - half, mean + half)
}

fn finish<T: Scalar>(mean_diff: T, std_err: T, dof: T) -> TestResult<T> {
    let statistic = if std_err > T::zero() {
        mean_diff / std_err
    } else {
        // zero spread and zero mean: nothing to reject
        T::zero()
    };
    TestResult {
        statistic,
        dof,
        p_value: T::of(two_sided_p(statistic.as_f64(), dof.as_f64())),
        mean_diff,
        std_err,
        ci95: ci95_from(mean_diff, std_err, dof),
    }
}

fn mean_var<T: Scalar>(x: &[T]) -> (T, T) {
    let n = T::of_usize(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let ss: T = x.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - T::one()))
}

/// Two-sample t-test without assuming equal variances.
pub fn welch_ttest<T: Scalar>(a: &[T], b: &[T]) -> Result<TestResult<T>, StatsError> {
    let found = a.len().min(b.len());
    if found < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, found });
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == T::zero() && vb == T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    let na = T::of_usize(a.len());
    let nb = T::of_usize(b.len());
    let qa = va / na;
    let qb = vb / nb;
    let se2 = qa + qb;
    let dof = se2 * se2 / (qa * qa / (na - T::one()) + qb * qb / (nb - T::one()));
    Ok(finish(ma - mb, se2.sqrt(), dof))
}

/// One-sample t-test of `H0: mean = 0`.
pub fn one_sample_ttest<T: Scalar>(x: &[T]) -> Result<TestResult<T>, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            found: x.len(),
        });
    }
    let (m, v) = mean_var(x);
    if v == T::zero() && m != T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    let n = T::of_usize(x.len());
    Ok(finish(m, (v / n).sqrt(), n - T::one()))
}

/// Paired t-test: a one-sample test on the differences `a - b`.
///
/// All-zero differences give statistic 0 and p-value 1; identical nonzero
/// differences are rejected.
pub fn paired_ttest<T: Scalar>(pairs: &[(T, T)]) -> Result<TestResult<T>, StatsError> {
    if pairs.len() < 2 {
        return Err(StatsError::TooFewPairs { found: pairs.len() });
    }
    let diffs: Vec<T> = pairs.iter().map(|&(a, b)| a - b).collect();
    let first = diffs[0];
    if diffs.iter().all(|&d| d == first) {
        if first == T::zero() {
            return Ok(finish(T::zero(), T::zero(), T::of_usize(diffs.len() - 1)));
        }
        return Err(StatsError::ZeroVarianceDifferences);
    }
    one_sample_ttest(&diffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [1.0_f64, 2.0, 4.0, 7.0];
        let r = welch_ttest(&a, &a).unwrap();
        assert_eq!(r.mean_diff, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_samples_rejected() {
        assert!(matches!(
            welch_ttest(&[3.0, 3.0], &[3.0, 3.0, 3.0]),
            Err(StatsError::ZeroVariance)
        ));
        assert!(matches!(
            welch_ttest(&[1.0], &[3.0, 3.0, 3.0]),
            Err(StatsError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn welch_matches_textbook_values() {
        // R: t.test(c(19.1,20.3,21.7,18.2,22.5), c(23.4,24.1,22.8,25.9))
        let a = [19.1_f64, 20.3, 21.7, 18.2, 22.5];
        let b = [23.4, 24.1, 22.8, 25.9];
        let r = welch_ttest(&a, &b).unwrap();
        // hand-computed: means 20.36 / 24.05, variances 3.158 / 1.80333..
        let se = (3.158f64 / 5.0 + (5.41 / 3.0) / 4.0).sqrt();
        assert!((r.mean_diff + 3.69).abs() < 1e-12);
        assert!((r.std_err - se).abs() < 1e-12);
        assert!(r.p_value < 0.01 && r.p_value > 0.001);
    }

    #[test]
    fn paired_zero_differences() {
        let r = paired_ttest(&[(1.0_f64, 1.0), (2.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!(r.mean_diff, 0.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn paired_constant_nonzero_differences() {
        assert!(matches!(
            paired_ttest(&[(2.0, 1.0), (3.0, 2.0), (4.0, 3.0)]),
            Err(StatsError::ZeroVarianceDifferences)
        ));
        assert!(matches!(
            paired_ttest(&[(2.0, 1.0)]),
            Err(StatsError::TooFewPairs { found: 1 })
        ));
    }

    #[test]
    fn critical_values() {
        // tabulated t_{0.975}
        assert!((t_critical(1.0, 0.975) - 12.706204736).abs() < 1e-6);
        assert!((t_critical(3.0, 0.975) - 3.182446305).abs() < 1e-8);
        assert!((t_critical(30.0, 0.975) - 2.042272456).abs() < 1e-8);
        assert!((t_critical(f64::INFINITY, 0.975) - 1.959963985).abs() < 1e-8);
    }

    #[test]
    fn printed_ci_rows() {
        let (lo, hi) = ci95_from(-2.19e-06_f64, 5.91e-05, 728.0);
        assert!((lo - -1.18e-04).abs() < 5e-7 && (hi - 1.14e-04).abs() < 5e-7);
        let (lo, hi) = ci95_from(1.033e-04_f64, 5.52e-05, 728.0);
        assert!((lo - -4.96e-06).abs() < 2e-7 && (hi - 2.116e-04).abs() < 2e-7);
    }
}
