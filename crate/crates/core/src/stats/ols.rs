//! Weighted least squares with heteroskedasticity-robust (HC0/HC1) covariance.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::linalg::PivotedQr;
use super::ttest::{t_critical, two_sided_p};
use super::StatsError;
use crate::scalar::Scalar;

/// Robust covariance flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CovType {
    /// White's estimator without small-sample scaling.
    HC0,
    /// HC0 scaled by `n / (n - k)`.
    #[default]
    HC1,
}

/// What to do with columns that are collinear with earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Collinear {
    #[default]
    Drop,
    Fail,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub cov: CovType,
    pub collinear: Collinear,
    /// Parameters estimated outside the design (absorbed fixed effects); they
    /// count against the residual degrees of freedom.
    pub absorbed_params: usize,
}

/// Output of a (weighted) least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    /// One entry per design column; dropped columns hold zero.
    pub coefficients: Array1<T>,
    /// Robust covariance; rows/columns of dropped columns are zero.
    pub vcov: Array2<T>,
    /// `y - X b` in the outcome's units.
    pub residuals: Array1<T>,
    pub r_squared: T,
    pub ssr: T,
    pub sst: T,
    /// Observations with positive weight.
    pub n_obs: usize,
    /// Residual degrees of freedom: `n - rank - absorbed`.
    pub dof: usize,
    pub dropped: Vec<usize>,
    pub cov_type: CovType,
}

impl<T: Scalar> FitResult<T> {
    pub fn std_error(&self, j: usize) -> T {
        self.vcov[[j, j]].max(T::zero()).sqrt()
    }

    pub fn std_errors(&self) -> Array1<T> {
        (0..self.coefficients.len()).map(|j| self.std_error(j)).collect()
    }

    pub fn t_stat(&self, j: usize) -> T {
        self.coefficients[j] / self.std_error(j)
    }

    /// Two-sided p-value from the Student-t with the residual dof.
    pub fn p_value(&self, j: usize) -> T {
        T::of(two_sided_p(self.t_stat(j).as_f64(), self.dof as f64))
    }

    pub fn ci95(&self, j: usize) -> (T, T) {
        let half = T::of(t_critical(self.dof as f64, 0.975)) * self.std_error(j);
        (self.coefficients[j] - half, self.coefficients[j] + half)
    }

    pub fn rank(&self) -> usize {
        self.coefficients.len() - self.dropped.len()
    }
}

/// Fits `outcome ~ design` by (weighted) least squares with HC1 covariance.
pub fn wls_fit<T: Scalar>(
    design: ArrayView2<T>,
    outcome: ArrayView1<T>,
    weights: Option<ArrayView1<T>>,
) -> Result<FitResult<T>, StatsError> {
    wls_fit_with(design, outcome, weights, &FitOptions::default())
}

pub fn wls_fit_with<T: Scalar>(
    design: ArrayView2<T>,
    outcome: ArrayView1<T>,
    weights: Option<ArrayView1<T>>,
    opts: &FitOptions,
) -> Result<FitResult<T>, StatsError> {
    let (n, k) = design.dim();
    if n == 0 || k == 0 {
        return Err(StatsError::EmptyInput);
    }
    if outcome.len() != n {
        return Err(StatsError::DimensionMismatch {
            expected: n,
            found: outcome.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(StatsError::DimensionMismatch {
                expected: n,
                found: w.len(),
            });
        }
        if w.iter().any(|&v| v < T::zero() || !v.is_finite()) {
            return Err(StatsError::InvalidWeights);
        }
        if w.iter().all(|&v| v == T::zero()) {
            return Err(StatsError::EmptyInput);
        }
    }
    let w_of = |i: usize| weights.map_or(T::one(), |w| w[i]);
    let n_eff = (0..n).filter(|&i| w_of(i) > T::zero()).count();

    // sqrt(W) X and sqrt(W) y
    let mut xs = design.to_owned();
    let mut ys = outcome.to_owned();
    if weights.is_some() {
        for i in 0..n {
            let s = w_of(i).sqrt();
            xs.row_mut(i).mapv_inplace(|v| v * s);
            ys[i] = ys[i] * s;
        }
    }

    let qr = PivotedQr::new(xs.view());
    if !qr.dropped.is_empty() && opts.collinear == Collinear::Fail {
        return Err(StatsError::RankDeficient {
            columns: qr.dropped.clone(),
        });
    }
    let p = qr.rank();
    if p == 0 {
        return Err(StatsError::RankDeficient {
            columns: qr.dropped.clone(),
        });
    }
    if n_eff < k + opts.absorbed_params {
        return Err(StatsError::TooFewObservations {
            needed: k + opts.absorbed_params,
            found: n_eff,
        });
    }

    let mut qty = ys.to_vec();
    qr.apply_qt(&mut qty);
    let beta_scaled = qr.solve_r(&qty);
    let mut coefficients = Array1::<T>::zeros(k);
    for (pos, &c) in qr.kept.iter().enumerate() {
        coefficients[c] = beta_scaled[pos] / qr.scale[c];
    }

    let fitted = design.dot(&coefficients);
    let residuals = &outcome - &fitted;

    // weighted SSR and centred SST
    let sw: T = (0..n).map(w_of).sum();
    let ybar = (0..n).map(|i| w_of(i) * outcome[i]).sum::<T>() / sw;
    let ssr: T = (0..n).map(|i| w_of(i) * residuals[i] * residuals[i]).sum();
    let sst: T = (0..n)
        .map(|i| w_of(i) * (outcome[i] - ybar) * (outcome[i] - ybar))
        .sum();
    let r_squared = if sst > T::zero() {
        (T::one() - ssr / sst).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };

    // Sandwich in the equilibrated basis: bread = (R^T R)^{-1},
    // meat = sum_i (w_i e_i)^2 z_i z_i^T with z_i the scaled kept columns.
    let bread = qr.inverse_gram();
    let mut meat = Array2::<T>::zeros((p, p));
    let mut z = vec![T::zero(); p];
    for i in 0..n {
        let wi = w_of(i);
        if wi == T::zero() {
            continue;
        }
        let g = wi * residuals[i];
        for (pos, &c) in qr.kept.iter().enumerate() {
            z[pos] = design[[i, c]] / qr.scale[c] * g;
        }
        for a in 0..p {
            if z[a] == T::zero() {
                continue;
            }
            for b in a..p {
                meat[[a, b]] = meat[[a, b]] + z[a] * z[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            meat[[a, b]] = meat[[b, a]];
        }
    }
    let mut v_scaled = bread.dot(&meat).dot(&bread);
    let dof = n_eff - p - opts.absorbed_params;
    if dof == 0 {
        // exactly identified: no residual variation to estimate from
        v_scaled.fill(T::nan());
    } else if opts.cov == CovType::HC1 {
        let f = T::of_usize(n_eff) / T::of_usize(dof);
        v_scaled.mapv_inplace(|v| v * f);
    }
    let mut vcov = Array2::<T>::zeros((k, k));
    for (pa, &ca) in qr.kept.iter().enumerate() {
        for (pb, &cb) in qr.kept.iter().enumerate() {
            vcov[[ca, cb]] = v_scaled[[pa, pb]] / (qr.scale[ca] * qr.scale[cb]);
        }
    }
    // exact symmetry
    for a in 0..k {
        for b in 0..a {
            let m = (vcov[[a, b]] + vcov[[b, a]]) / T::of(2.0);
            vcov[[a, b]] = m;
            vcov[[b, a]] = m;
        }
    }

    Ok(FitResult {
        coefficients,
        vcov,
        residuals,
        r_squared,
        ssr,
        sst,
        n_obs: n_eff,
        dof,
        dropped: qr.dropped.clone(),
        cov_type: opts.cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_fit_on_constant_outcome() {
        let x = array![[1.0_f64], [1.0], [1.0]];
        let y = array![2.0_f64, 2.0, 2.0];
        let fit = wls_fit(x.view(), y.view(), None).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-15);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-15));
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn exactly_identified_system() {
        let x = array![[1.0_f64, 0.0], [1.0, 1.0]];
        let y = array![1.0_f64, 3.0];
        let fit = wls_fit(x.view(), y.view(), None).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-14);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-14));
        assert_eq!(fit.dof, 0);
        assert!(fit.vcov[[1, 1]].is_nan());
    }

    #[test]
    fn underdetermined_is_rejected() {
        let x = array![[1.0_f64, 0.0, 2.0], [1.0, 1.0, 0.5]];
        let y = array![1.0_f64, 3.0];
        let err = wls_fit(x.view(), y.view(), None).unwrap_err();
        assert!(matches!(err, StatsError::TooFewObservations { .. }));
    }

    #[test]
    fn collinear_fail_mode_reports_columns() {
        let x = array![[1.0_f64, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let y = array![1.0_f64, 2.0, 3.0, 4.0];
        let opts = FitOptions {
            collinear: Collinear::Fail,
            ..Default::default()
        };
        match wls_fit_with(x.view(), y.view(), None, &opts) {
            Err(StatsError::RankDeficient { columns }) => assert_eq!(columns, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_and_weight_errors() {
        let x = array![[1.0_f64], [1.0], [1.0]];
        let y = array![1.0_f64, 2.0];
        assert!(matches!(
            wls_fit(x.view(), y.view(), None),
            Err(StatsError::DimensionMismatch { .. })
        ));
        let y = array![1.0_f64, 2.0, 3.0];
        let w = array![0.0_f64, 0.0, 0.0];
        assert!(matches!(
            wls_fit(x.view(), y.view(), Some(w.view())),
            Err(StatsError::EmptyInput)
        ));
        let w = array![1.0_f64, -1.0, 1.0];
        assert!(matches!(
            wls_fit(x.view(), y.view(), Some(w.view())),
            Err(StatsError::InvalidWeights)
        ));
    }

    #[test]
    fn hc0_and_hc1_differ_by_dof_factor() {
        let x = array![[1.0_f64, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]];
        let y = array![0.1_f64, 1.3, 1.9, 3.4, 3.8];
        let hc1 = wls_fit(x.view(), y.view(), None).unwrap();
        let hc0 = wls_fit_with(
            x.view(),
            y.view(),
            None,
            &FitOptions {
                cov: CovType::HC0,
                ..Default::default()
            },
        )
        .unwrap();
        let ratio = hc1.vcov[[1, 1]] / hc0.vcov[[1, 1]];
        assert!((ratio - 5.0 / 3.0).abs() < 1e-12);
    }
}
