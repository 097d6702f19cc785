//! Small dense linear algebra used for the per-cell N×N blocks.
//!
//! Blocks are stored row-major in flat slices. N is the number of mixture
//! components, so these routines are written for tiny matrices and never
//! allocate in the hot path beyond what the caller hands them.

use std::fmt;
use std::ops::{Index, IndexMut};

/// Square dense matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
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

    /// Wraps row-major data. Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data must hold n*n entries");
        SquareMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        gemv_add(&self.data, self.n, x, &mut y);
        y
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_struct("SquareMatrix")
            .field("n", &self.n)
            .field("rows", &rows)
            .finish()
    }
}

/// `y += A x` for a row-major n×n block.
pub(crate) fn gemv_add(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        y[i] += acc;
    }
}

/// `y -= A x` for a row-major n×n block.
pub(crate) fn gemv_sub(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        y[i] -= acc;
    }
}

/// `C -= A B` for row-major n×n blocks.
pub(crate) fn gemm_sub(a: &[f64], b: &[f64], n: usize, c: &mut [f64]) {
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] -= aik * b[k * n + j];
            }
        }
    }
}

/// In-place LU factorization with partial pivoting. On success `a` holds the
/// unit-lower and upper factors and `piv` the row permutation.
///
/// Returns `false` when a pivot is exactly zero or not finite.
pub(crate) fn lu_factor(a: &mut [f64], n: usize, piv: &mut [usize]) -> bool {
    for (i, p) in piv.iter_mut().enumerate().take(n) {
        *p = i;
    }
    for k in 0..n {
        let mut best = k;
        let mut best_abs = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best_abs {
                best = r;
                best_abs = v;
            }
        }
        if best_abs == 0.0 || !best_abs.is_finite() {
            return false;
        }
        if best != k {
            for j in 0..n {
                a.swap(k * n + j, best * n + j);
            }
            piv.swap(k, best);
        }
        let pivot = a[k * n + k];
        for r in k + 1..n {
            let l = a[r * n + k] / pivot;
            a[r * n + k] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    a[r * n + j] -= l * a[k * n + j];
                }
            }
        }
    }
    true
}

/// Solves `A x = b` in place using the output of [`lu_factor`].
pub(crate) fn lu_solve(lu: &[f64], n: usize, piv: &[usize], b: &mut [f64], scratch: &mut [f64]) {
    for i in 0..n {
        scratch[i] = b[piv[i]];
    }
    for i in 0..n {
        let mut s = scratch[i];
        for j in 0..i {
            s -= lu[i * n + j] * scratch[j];
        }
        scratch[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = scratch[i];
        for j in i + 1..n {
            s -= lu[i * n + j] * scratch[j];
        }
        scratch[i] = s / lu[i * n + i];
    }
    b[..n].copy_from_slice(&scratch[..n]);
}
