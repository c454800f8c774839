//! Kernel-weighted local polynomial smoothing with the Epanechnikov kernel.

use ndarray::{Array1, Array2};

use super::linalg::lstsq;
use super::StatsError;
use crate::scalar::Scalar;

pub fn epanechnikov<T: Scalar>(u: T) -> T {
    if u.abs() < T::one() {
        T::of(0.75) * (T::one() - u * u)
    } else {
        T::zero()
    }
}

/// Rule-of-thumb bandwidth `0.9 · min(sd, IQR/1.34) · n^(-1/5)`.
pub fn silverman_bandwidth<T: Scalar>(x: &[T]) -> Result<T, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            found: x.len(),
        });
    }
    let n = T::of_usize(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let sd = (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one())).sqrt();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite input"));
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = T::of(pos - lo as f64);
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > T::zero() {
        sd.min(iqr / T::of(1.34))
    } else {
        sd
    };
    if spread <= T::zero() {
        return Err(StatsError::ConstantInput);
    }
    Ok(T::of(0.9) * spread * n.powf(T::of(-0.2)))
}

/// Evaluates a local polynomial fit of `y` on `x` at every grid point.
///
/// At each point `g` the polynomial of the given degree in `(x - g)` is fitted
/// by least squares with weights `K((x - g)/bandwidth)`; its intercept is the
/// smoothed value.
pub fn kernel_local_poly<T: Scalar>(
    x: &[T],
    y: &[T],
    degree: usize,
    bandwidth: T,
    grid: &[T],
) -> Result<Vec<T>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if degree > 3 {
        return Err(StatsError::InvalidArgument(format!(
            "degree {degree} outside 0..=3"
        )));
    }
    if !(bandwidth > T::zero()) {
        return Err(StatsError::InvalidArgument(
            "bandwidth must be positive".into(),
        ));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (gi, &g) in grid.iter().enumerate() {
        let local: Vec<(T, T, T)> = x
            .iter()
            .zip(y)
            .filter_map(|(&xi, &yi)| {
                let u = (xi - g) / bandwidth;
                let w = epanechnikov(u);
                (w > T::zero()).then_some((u, yi, w))
            })
            .collect();
        let mut distinct: Vec<T> = local.iter().map(|t| t.0).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite input"));
        distinct.dedup();
        if distinct.len() < degree + 1 {
            return Err(StatsError::EmptyNeighborhood {
                index: gi,
                point: g.as_f64(),
                found: distinct.len(),
                needed: degree + 1,
            });
        }
        // sqrt(w)-scaled Vandermonde in the bandwidth-scaled offset
        let m = local.len();
        let mut a = Array2::<T>::zeros((m, degree + 1));
        let mut b = Array1::<T>::zeros(m);
        for (r, &(u, yi, w)) in local.iter().enumerate() {
            let s = w.sqrt();
            let mut p = s;
            for c in 0..=degree {
                a[[r, c]] = p;
                p = p * u;
            }
            b[r] = yi * s;
        }
        let (coef, _) = lstsq(a.view(), b.view());
        out.push(coef[0]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_reproduced() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y = vec![2.5; 40];
        for degree in 0..=3 {
            let s = kernel_local_poly(&x, &y, degree, 6.0, &[0.0, 10.5, 39.0]).unwrap();
            assert!(s.iter().all(|v| (v - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn empty_neighbourhood_reports_grid_point() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 1.0, 1.0];
        match kernel_local_poly(&x, &y, 1, 1.5, &[1.0, 10.0]) {
            Err(StatsError::EmptyNeighborhood { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degree_zero_is_kernel_weighted_mean() {
        let x = [-2.0_f64, -1.0, 0.0, 1.0, 2.0];
        let y = [1.0, 4.0, 2.0, 8.0, 5.0];
        let h = 2.5_f64;
        let s = kernel_local_poly(&x, &y, 0, h, &[0.0]).unwrap()[0];
        let (num, den) = x.iter().zip(&y).fold((0.0, 0.0), |(n, d), (&xi, &yi)| {
            let w = 0.75 * (1.0 - (xi / h) * (xi / h));
            (n + w * yi, d + w)
        });
        assert!((s - num / den).abs() < 1e-13);
    }
}
