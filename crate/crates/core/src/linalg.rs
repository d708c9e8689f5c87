//! Dense linear solves for the small systems arising from usage models.

use thiserror::Error;

/// Pivots smaller than this (relative to the largest entry of the matrix)
/// are treated as zero.
const PIVOT_EPS: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("singular or ill-conditioned system: pivot {pivot:e} in column {column} (pivot ratio {ratio:e})")]
pub struct SingularError {
    pub column: usize,
    pub pivot: f64,
    /// Smallest over largest absolute pivot seen before failing.
    pub ratio: f64,
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SingularError> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side has wrong length");
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let (mut min_piv, mut max_piv) = (f64::INFINITY, 0.0f64);

        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, a[r * n + col]))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("non-empty range");
            min_piv = min_piv.min(pivot.abs());
            max_piv = max_piv.max(pivot.abs());
            if pivot.abs() <= PIVOT_EPS * scale {
                return Err(SingularError {
                    column: col,
                    pivot,
                    ratio: min_piv / max_piv.max(f64::MIN_POSITIVE),
                });
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                x.swap(col, pivot_row);
            }
            for r in col + 1..n {
                let f = a[r * n + col] / pivot;
                if f == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col];
            for k in col + 1..n {
                acc -= a[col * n + k] * x[k];
            }
            x[col] = acc / a[col * n + col];
        }
        Ok(x)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n + c]
    }
}
