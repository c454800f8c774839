//! One-way fixed-effect absorption (within transformation).

use std::collections::HashMap;
use std::hash::Hash;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::ols::{wls_fit_with, FitOptions, FitResult};
use super::StatsError;
use crate::scalar::Scalar;

/// A design and outcome with group means removed.
#[derive(Debug, Clone)]
pub struct Absorbed<T> {
    pub design: Array2<T>,
    pub outcome: Array1<T>,
    pub weights: Option<Array1<T>>,
    /// Number of distinct groups; this is the dof correction of the within fit.
    pub n_groups: usize,
    /// Group index (by first appearance) of every row.
    pub group_index: Vec<usize>,
    /// Weighted grand means of the original regressors and outcome.
    pub design_means: Array1<T>,
    pub outcome_mean: T,
    /// Weighted total sum of squares of the original outcome around its mean.
    pub total_ss: T,
}

/// Subtracts within-group (weighted) means from the outcome and every regressor.
pub fn absorb_fixed_effects<T: Scalar, G: Hash + Eq>(
    groups: &[G],
    design: ArrayView2<T>,
    outcome: ArrayView1<T>,
    weights: Option<ArrayView1<T>>,
) -> Result<Absorbed<T>, StatsError> {
    let (n, k) = design.dim();
    if n == 0 {
        return Err(StatsError::EmptyInput);
    }
    for len in [groups.len(), outcome.len()] {
        if len != n {
            return Err(StatsError::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
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
    }
    let w_of = |i: usize| weights.map_or(T::one(), |w| w[i]);

    let mut index: HashMap<&G, usize> = HashMap::new();
    let mut group_index = Vec::with_capacity(n);
    for g in groups {
        let next = index.len();
        group_index.push(*index.entry(g).or_insert(next));
    }
    let n_groups = index.len();

    let mut counts = vec![0usize; n_groups];
    let mut wsum = vec![T::zero(); n_groups];
    let mut xsum = Array2::<T>::zeros((n_groups, k));
    let mut ysum = vec![T::zero(); n_groups];
    for i in 0..n {
        let g = group_index[i];
        let w = w_of(i);
        if w > T::zero() {
            counts[g] += 1;
        }
        wsum[g] = wsum[g] + w;
        ysum[g] = ysum[g] + w * outcome[i];
        for c in 0..k {
            xsum[[g, c]] = xsum[[g, c]] + w * design[[i, c]];
        }
    }
    if counts.iter().all(|&c| c < 2) {
        return Err(StatsError::SingletonOnlyGroups);
    }

    let mut dx = design.to_owned();
    let mut dy = outcome.to_owned();
    for i in 0..n {
        let g = group_index[i];
        if wsum[g] == T::zero() {
            continue;
        }
        dy[i] = dy[i] - ysum[g] / wsum[g];
        for c in 0..k {
            dx[[i, c]] = dx[[i, c]] - xsum[[g, c]] / wsum[g];
        }
    }

    // A regressor constant within every group is spanned by the dummies; what
    // survives demeaning is round-off, so clear it and let the fit drop it.
    for c in 0..k {
        let before = (0..n)
            .map(|i| w_of(i) * design[[i, c]] * design[[i, c]])
            .sum::<T>()
            .sqrt();
        let after = (0..n)
            .map(|i| w_of(i) * dx[[i, c]] * dx[[i, c]])
            .sum::<T>()
            .sqrt();
        if after <= T::rank_tolerance() * before {
            dx.column_mut(c).fill(T::zero());
        }
    }

    let total_w: T = wsum.iter().copied().sum();
    let outcome_mean = ysum.iter().copied().sum::<T>() / total_w;
    let design_means: Array1<T> = (0..k)
        .map(|c| (0..n_groups).map(|g| xsum[[g, c]]).sum::<T>() / total_w)
        .collect();
    let total_ss = (0..n)
        .map(|i| w_of(i) * (outcome[i] - outcome_mean) * (outcome[i] - outcome_mean))
        .sum();

    Ok(Absorbed {
        design: dx,
        outcome: dy,
        weights: weights.map(|w| w.to_owned()),
        n_groups,
        group_index,
        design_means,
        outcome_mean,
        total_ss,
    })
}

/// Slope fit after absorption, with the R² of the full dummy model alongside.
#[derive(Debug, Clone)]
pub struct WithinFit<T> {
    /// Fit on demeaned data; `r_squared` is the within R².
    pub fit: FitResult<T>,
    /// R² of the equivalent explicit-dummy regression.
    pub full_r_squared: T,
    /// Intercept reported the way `areg` does: `ȳ - x̄'b`.
    pub constant: T,
    pub n_groups: usize,
}

impl<T: Scalar> Absorbed<T> {
    /// Fits the demeaned data. Residual dof is `n - k - n_groups`, matching an
    /// intercept plus `n_groups - 1` explicit dummies.
    pub fn fit(&self, opts: &FitOptions) -> Result<WithinFit<T>, StatsError> {
        let opts = FitOptions {
            absorbed_params: opts.absorbed_params + self.n_groups,
            ..opts.clone()
        };
        let fit = wls_fit_with(
            self.design.view(),
            self.outcome.view(),
            self.weights.as_ref().map(|w| w.view()),
            &opts,
        )?;
        let full_r_squared = if self.total_ss > T::zero() {
            (T::one() - fit.ssr / self.total_ss).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let constant = self.outcome_mean
            - self
                .design_means
                .iter()
                .zip(fit.coefficients.iter())
                .map(|(&m, &b)| m * b)
                .sum::<T>();
        Ok(WithinFit {
            fit,
            full_r_squared,
            constant,
            n_groups: self.n_groups,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_group_within_transform() {
        let groups = [0, 0, 1, 1];
        let x = array![[0.0_f64], [1.0], [0.0], [1.0]];
        let y = array![1.0_f64, 3.0, 5.0, 7.0];
        let a = absorb_fixed_effects(&groups, x.view(), y.view(), None).unwrap();
        assert_eq!(a.outcome.to_vec(), vec![-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(a.n_groups, 2);
        let fit = a.fit(&FitOptions::default()).unwrap();
        assert!((fit.fit.coefficients[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_group_equals_global_demeaning() {
        let groups = ["a"; 5];
        let x = array![[1.0_f64], [2.0], [4.0], [8.0], [16.0]];
        let y = array![3.0_f64, 1.0, 4.0, 1.0, 5.0];
        let a = absorb_fixed_effects(&groups, x.view(), y.view(), None).unwrap();
        let ybar = y.mean().unwrap();
        let xbar = x.column(0).mean().unwrap();
        for i in 0..5 {
            assert!((a.outcome[i] - (y[i] - ybar)).abs() < 1e-14);
            assert!((a.design[[i, 0]] - (x[[i, 0]] - xbar)).abs() < 1e-14);
        }
    }

    #[test]
    fn singleton_only_groups_rejected() {
        let groups = [1, 2, 3];
        let x = array![[0.0_f64], [1.0], [2.0]];
        let y = array![1.0_f64, 2.0, 3.0];
        assert!(matches!(
            absorb_fixed_effects(&groups, x.view(), y.view(), None),
            Err(StatsError::SingletonOnlyGroups)
        ));
    }
}
