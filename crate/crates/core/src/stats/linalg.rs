//! Householder QR with deterministic, first-listed-wins column dropping.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::scalar::Scalar;

/// A Householder reflector `H = I - beta v v^T` acting on rows `offset..n`.
#[derive(Debug, Clone)]
struct Reflector<T> {
    offset: usize,
    v: Vec<T>,
    beta: T,
}

impl<T: Scalar> Reflector<T> {
    fn apply(&self, x: &mut [T]) {
        let tail = &mut x[self.offset..];
        let dot: T = self.v.iter().zip(tail.iter()).map(|(&a, &b)| a * b).sum();
        let f = self.beta * dot;
        for (t, &vi) in tail.iter_mut().zip(&self.v) {
            *t = *t - f * vi;
        }
    }
}

/// QR factorisation of a tall matrix in which a column is dropped when its
/// component orthogonal to the previously kept columns is negligible.
///
/// Columns are equilibrated to unit norm first; `scale` holds the original
/// norms so callers can map results back to the input units.
#[derive(Debug, Clone)]
pub(crate) struct PivotedQr<T> {
    reflectors: Vec<Reflector<T>>,
    /// Upper-triangular factor over the kept columns (rank × rank).
    r: Array2<T>,
    /// Original column indices that survived, in order.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Column norms of the input matrix, indexed by original column.
    pub scale: Vec<T>,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(a: ArrayView2<T>) -> Self {
        let (n, k) = a.dim();
        let tol = T::rank_tolerance();

        // column-major working copy
        let mut cols: Vec<Vec<T>> = (0..k).map(|c| a.column(c).to_vec()).collect();
        let mut scale = vec![T::zero(); k];
        for (c, col) in cols.iter_mut().enumerate() {
            let norm = col.iter().map(|&v| v * v).sum::<T>().sqrt();
            scale[c] = norm;
            if norm > T::zero() {
                col.iter_mut().for_each(|v| *v = *v / norm);
            }
        }

        let mut reflectors: Vec<Reflector<T>> = Vec::new();
        let mut r_cols: Vec<Vec<T>> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();

        for c in 0..k {
            let rank = reflectors.len();
            if scale[c] == T::zero() || rank >= n {
                dropped.push(c);
                continue;
            }
            let tail_norm = cols[c][rank..].iter().map(|&v| v * v).sum::<T>().sqrt();
            if tail_norm <= tol {
                dropped.push(c);
                continue;
            }
            let x0 = cols[c][rank];
            let alpha = if x0 >= T::zero() { -tail_norm } else { tail_norm };
            let mut v = cols[c][rank..].to_vec();
            v[0] = v[0] - alpha;
            let vnorm2: T = v.iter().map(|&x| x * x).sum();
            let beta = if vnorm2 > T::zero() {
                T::of(2.0) / vnorm2
            } else {
                T::zero()
            };
            let refl = Reflector {
                offset: rank,
                v,
                beta,
            };
            for later in cols.iter_mut().skip(c + 1) {
                refl.apply(later);
            }
            let mut rc = cols[c][..rank].to_vec();
            rc.push(alpha);
            r_cols.push(rc);
            reflectors.push(refl);
            kept.push(c);
        }

        let p = kept.len();
        let mut r = Array2::<T>::zeros((p, p));
        for (j, col) in r_cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                r[[i, j]] = v;
            }
        }
        Self {
            reflectors,
            r,
            kept,
            dropped,
            scale,
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Computes `Q^T b` in place.
    pub fn apply_qt(&self, b: &mut [T]) {
        for refl in &self.reflectors {
            refl.apply(b);
        }
    }

    /// Solves `R x = c` using the leading `rank` entries of `c`.
    pub fn solve_r(&self, c: &[T]) -> Array1<T> {
        let p = self.rank();
        let mut x = Array1::<T>::zeros(p);
        for i in (0..p).rev() {
            let mut s = c[i];
            for j in (i + 1)..p {
                s = s - self.r[[i, j]] * x[j];
            }
            x[i] = s / self.r[[i, i]];
        }
        x
    }

    /// `(R^T R)^{-1}` over the kept, equilibrated columns.
    pub fn inverse_gram(&self) -> Array2<T> {
        let p = self.rank();
        let mut rinv = Array2::<T>::zeros((p, p));
        for j in 0..p {
            rinv[[j, j]] = T::one() / self.r[[j, j]];
            for i in (0..j).rev() {
                let mut s = T::zero();
                for m in (i + 1)..=j {
                    s = s + self.r[[i, m]] * rinv[[m, j]];
                }
                rinv[[i, j]] = -s / self.r[[i, i]];
            }
        }
        let mut out = Array2::<T>::zeros((p, p));
        for i in 0..p {
            for j in i..p {
                let mut s = T::zero();
                for m in j..p {
                    s = s + rinv[[i, m]] * rinv[[j, m]];
                }
                out[[i, j]] = s;
                out[[j, i]] = s;
            }
        }
        out
    }
}

/// Least-squares solution of `a x ≈ b`; dropped columns get a zero entry.
pub(crate) fn lstsq<T: Scalar>(a: ArrayView2<T>, b: ArrayView1<T>) -> (Array1<T>, PivotedQr<T>) {
    let qr = PivotedQr::new(a);
    let mut qtb = b.to_vec();
    qr.apply_qt(&mut qtb);
    let xs = qr.solve_r(&qtb);
    let mut x = Array1::<T>::zeros(a.ncols());
    for (pos, &c) in qr.kept.iter().enumerate() {
        x[c] = xs[pos] / qr.scale[c];
    }
    (x, qr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_system() {
        let a = array![[1.0_f64, 0.0], [1.0, 1.0]];
        let b = array![1.0_f64, 3.0];
        let (x, qr) = lstsq(a.view(), b.view());
        assert!(qr.dropped.is_empty());
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn later_duplicate_column_is_dropped() {
        let a = array![[1.0_f64, 2.0, 2.0], [1.0, 0.0, 0.0], [1.0, 5.0, 5.0], [1.0, 1.0, 1.0]];
        let b = array![1.0_f64, 2.0, 3.0, 4.0];
        let (x, qr) = lstsq(a.view(), b.view());
        assert_eq!(qr.kept, vec![0, 1]);
        assert_eq!(qr.dropped, vec![2]);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn zero_column_is_dropped() {
        let a = array![[1.0_f64, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let b = array![1.0_f64, 2.0, 3.0];
        let (x, qr) = lstsq(a.view(), b.view());
        assert_eq!(qr.dropped, vec![1]);
        assert!((x[0] - 2.0).abs() < 1e-14);
    }
}
