//! Sparse Hermitian operators and the dense/banded kernels built on them.

mod banded;
mod dense;
mod expm;

pub use banded::{factor_real_shift, BandedLu};
pub use dense::{
    adjoint_apply, dense_apply, expm_hermitian, hermitian_eigen, max_abs, max_abs_diff, op_norm,
    unitarity_defect, unitary_eigen, HermitianEigen, UnitaryEigen,
};
pub use expm::{bessel_j_sequence, ChebyshevExp, StepExponential};

use nalgebra::DMatrix;

use crate::scalar::{cabs, czero, Real, C};

/// Square complex matrix in CSR layout, Hermitian by construction of its
/// producers.
#[derive(Clone, Debug)]
pub struct HermitianOperator<T: Real> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C<T>>,
}

impl<T: Real> HermitianOperator<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, C<T>)>) -> Self {
        let mut rows: Vec<Vec<(usize, C<T>)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) out of range for n={n}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    let k = vals.len() - 1;
                    vals[k] += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    /// Keeps every entry of a dense matrix whose modulus exceeds `drop_tol`
    /// (the diagonal is always kept).
    pub fn from_dense(m: &DMatrix<C<T>>, drop_tol: T) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let triplets = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = m[(i, j)];
            (i == j || cabs(v) > drop_tol).then_some((i, j, v))
        });
        Self::from_triplets(n, triplets.collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Slot index of entry `(i, j)` if it is stored.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn entry(&self, i: usize, j: usize) -> C<T> {
        self.slot(i, j).map(|k| self.vals[k]).unwrap_or_else(czero)
    }

    pub fn values(&self) -> &[C<T>] {
        &self.vals
    }

    /// Mutable access to stored values; the sparsity pattern is fixed.
    pub fn values_mut(&mut self) -> &mut [C<T>] {
        &mut self.vals
    }

    /// `y = H x`.
    pub fn apply_into(&self, x: &[C<T>], y: &mut [C<T>]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = czero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    /// `Y = H X` for a row-major block `X` with `width` columns.
    pub fn apply_block_into(&self, x: &[C<T>], width: usize, y: &mut [C<T>]) {
        debug_assert_eq!(x.len(), self.n * width);
        debug_assert_eq!(y.len(), self.n * width);
        for (i, yi) in y.chunks_exact_mut(width).enumerate() {
            yi.fill(czero());
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.vals[k];
                let xr = &x[self.cols[k] * width..(self.cols[k] + 1) * width];
                for (a, b) in yi.iter_mut().zip(xr) {
                    *a += v * *b;
                }
            }
        }
    }

    pub fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        let mut y = vec![czero(); self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut m = DMatrix::from_element(self.n, self.n, czero());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// `max_{ij} |H_ij − conj(H_ji)|`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let d = cabs(v - self.entry(j, i).conj());
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Gershgorin enclosure `[lo, hi]` of the (real) spectrum.
    pub fn spectral_bounds(&self) -> (T, T) {
        let mut lo: Option<T> = None;
        let mut hi: Option<T> = None;
        for i in 0..self.n {
            let mut center = T::zero();
            let mut radius = T::zero();
            for (j, v) in self.row(i) {
                if j == i {
                    center = v.re;
                } else {
                    radius += cabs(v);
                }
            }
            let (a, b) = (center - radius, center + radius);
            lo = Some(lo.map_or(a, |l: T| l.min(a)));
            hi = Some(hi.map_or(b, |h: T| h.max(b)));
        }
        (lo.unwrap_or_else(T::zero), hi.unwrap_or_else(T::zero))
    }

    /// Largest distance between the stored diagonal and its neighbours'
    /// column indices; the half-bandwidth of the matrix.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Elementwise max-norm distance, independent of sparsity patterns.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n);
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max(cabs(v - other.entry(i, j)));
            }
            for (j, v) in other.row(i) {
                worst = worst.max(cabs(v - self.entry(i, j)));
            }
        }
        worst
    }

    /// Adds `d_i` to each diagonal entry (inserting missing diagonal slots).
    pub fn add_diagonal(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.n);
        let trip = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .chain(d.iter().enumerate().map(|(i, &x)| (i, i, crate::scalar::creal(x))))
            .collect::<Vec<_>>();
        Self::from_triplets(self.n, trip)
    }

    /// `self − other` as a new operator.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let trip = (0..self.n)
            .flat_map(|i| {
                self.row(i)
                    .map(move |(j, v)| (i, j, v))
                    .chain(other.row(i).map(move |(j, v)| (i, j, -v)))
            })
            .collect::<Vec<_>>();
        Self::from_triplets(self.n, trip)
    }

    /// Spectral norm through the dense eigen-decomposition.
    pub fn norm(&self) -> crate::Result<T> {
        let eig = hermitian_eigen(self.to_dense(), "operator norm")?;
        Ok(eig
            .values
            .iter()
            .fold(T::zero(), |acc, &l| acc.max(l.abs())))
    }
}
