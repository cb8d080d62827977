//! Dense LU solve for the small systems that appear in steady-state polishing
//! and convergence certificates (a few hundred unknowns at most).

use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct DenseMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub(crate) fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, x: S) {
        self.data[i * self.n + j] = x;
    }

    #[cfg(test)]
    pub(crate) fn mul_vec(&self, x: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot vanishes (numerically singular).
    pub(crate) fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(S::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * S::epsilon() * S::from_usize_lossy(n.max(1));
        for col in 0..n {
            let (piv, pval) =
                (col..n)
                    .map(|r| (r, a[r * n + col].abs()))
                    .fold(
                        (col, S::zero()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pval <= tiny || !pval.is_finite() {
                return None;
            }
            if piv != col {
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                }
                x.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f == S::zero() {
                    continue;
                }
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
                let xc = x[col];
                x[r] -= f * xc;
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for k in col + 1..n {
                s -= a[col * n + k] * x[k];
            }
            x[col] = s / a[col * n + col];
        }
        Some(x)
    }
}
