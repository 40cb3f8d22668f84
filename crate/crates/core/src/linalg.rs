//! Small direct solvers for wall-normal pencils. Matrices are real; right
//! hand sides may be real or complex.

use std::ops::{Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types a real-coefficient pencil solve can act on.
pub trait PencilScalar:
    Copy + Default + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
}
impl PencilScalar for f64 {}
impl PencilScalar for Complex64 {}

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in
/// place (Thomas algorithm). `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal<T: PencilScalar>(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [T],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let n = rhs.len();
    if n == 0 {
        return Ok(());
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    if beta.abs() < f64::MIN_POSITIVE * 1e10 {
        return Err(Error::Singular { context: "tridiagonal solve" });
    }
    rhs[0] = rhs[0] * (1.0 / beta);
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta.abs() < f64::MIN_POSITIVE * 1e10 || !beta.is_finite() {
            return Err(Error::Singular { context: "tridiagonal solve" });
        }
        rhs[i] = (rhs[i] - rhs[i - 1] * lower[i]) * (1.0 / beta);
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - rhs[i + 1] * scratch[i + 1];
    }
    Ok(())
}

/// Cholesky factor of a symmetric positive definite band matrix with
/// `bandwidth` sub-diagonals.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// `l[i * (bw + 1) + d] = L[i][i - d]`.
    l: Vec<f64>,
}

impl BandCholesky {
    /// `entry(i, j)` returns `A[i][j]` for `j <= i`, `i - j <= bandwidth`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let stride = bw + 1;
        let mut l = vec![0.0; n * stride];
        for i in 0..n {
            let jmin = i.saturating_sub(bw);
            for j in jmin..=i {
                let mut s = entry(i, j);
                let kmin = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= l[i * stride + (i - k)] * l[j * stride + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Singular { context: "banded Cholesky" });
                    }
                    l[i * stride] = s.sqrt();
                } else {
                    l[i * stride + (i - j)] = s / l[j * stride];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve_in_place<T: PencilScalar>(&self, b: &mut [T]) {
        let stride = self.bw + 1;
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(self.bw)..i {
                s = s - b[k] * self.l[i * stride + (i - k)];
            }
            b[i] = s * (1.0 / self.l[i * stride]);
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s = s - b[k] * self.l[k * stride + (k - i)];
            }
            b[i] = s * (1.0 / self.l[i * stride]);
        }
    }
}
