use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{cabs, cis, cone, czero, eps, Real, C};

/// Sorted eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    /// Eigenvalues, non-decreasing.
    pub values: Vec<T>,
    /// Column `j` is the eigenvector of `values[j]`.
    pub vectors: DMatrix<C<T>>,
}

/// Diagonalizes a Hermitian matrix and sorts the spectrum. Ties keep the
/// solver's order.
pub fn hermitian_eigen<T: Real>(m: DMatrix<C<T>>, context: &str) -> Result<HermitianEigen<T>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: m,
        });
    }
    let eig = SymmetricEigen::try_new(m, eps::<T>(), 0).ok_or_else(|| Error::EigensolverFailure {
        context: context.to_string(),
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// `e^{−i s H}` from an eigen-decomposition.
pub fn expm_hermitian<T: Real>(eig: &HermitianEigen<T>, s: T) -> DMatrix<C<T>> {
    let n = eig.values.len();
    let phases: Vec<C<T>> = eig.values.iter().map(|&l| cis(-(l * s))).collect();
    let mut scaled = eig.vectors.clone();
    for (j, p) in phases.iter().enumerate() {
        scaled.column_mut(j).scale_mut_complex(*p);
    }
    let out = &scaled * eig.vectors.adjoint();
    debug_assert_eq!(out.nrows(), n);
    out
}

trait ScaleComplex<T: Real> {
    fn scale_mut_complex(&mut self, a: C<T>);
}

impl<T: Real, S> ScaleComplex<T>
    for nalgebra::Matrix<C<T>, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C<T>, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, a: C<T>) {
        for z in self.iter_mut() {
            *z *= a;
        }
    }
}

/// `max_{ij} |(U*U − I)_{ij}|`.
pub fn unitarity_defect<T: Real>(u: &DMatrix<C<T>>) -> T {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { cone() } else { czero() };
            worst = worst.max(cabs(g[(i, j)] - target));
        }
    }
    worst
}

pub fn max_abs<T: Real>(m: &DMatrix<C<T>>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

pub fn max_abs_diff<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max(cabs(*x - *y)))
}

/// Spectral norm (largest singular value).
pub fn op_norm<T: Real>(m: &DMatrix<C<T>>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

pub fn dense_apply<T: Real>(m: &DMatrix<C<T>>, x: &[C<T>]) -> Vec<C<T>> {
    let n = m.nrows();
    let mut y = vec![czero(); n];
    for (j, &xj) in x.iter().enumerate() {
        if xj == czero() {
            continue;
        }
        let col = m.column(j);
        for (yi, mij) in y.iter_mut().zip(col.iter()) {
            *yi += *mij * xj;
        }
    }
    y
}

/// `M* x` without forming the adjoint.
pub fn adjoint_apply<T: Real>(m: &DMatrix<C<T>>, x: &[C<T>]) -> Vec<C<T>> {
    (0..m.ncols())
        .map(|j| {
            m.column(j)
                .iter()
                .zip(x)
                .fold(czero(), |acc, (mij, xi)| acc + mij.conj() * *xi)
        })
        .collect()
}

/// Eigenvalues and eigenvectors of a unitary (normal) matrix from its
/// complex Schur form.
#[derive(Clone, Debug)]
pub struct UnitaryEigen<T: Real> {
    pub values: Vec<C<T>>,
    pub vectors: DMatrix<C<T>>,
    /// Largest strictly-upper entry of the Schur factor; zero for an exactly
    /// normal input.
    pub non_normality: T,
}

pub fn unitary_eigen<T: Real>(m: &DMatrix<C<T>>) -> Result<UnitaryEigen<T>> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), eps::<T>(), 0).ok_or_else(|| Error::EigensolverFailure {
        context: "Schur decomposition of monodromy".into(),
    })?;
    let (q, t) = schur.unpack();
    let values = (0..n).map(|i| t[(i, i)]).collect();
    let mut non_normality = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            non_normality = non_normality.max(cabs(t[(i, j)]));
        }
    }
    Ok(UnitaryEigen {
        values,
        vectors: q,
        non_normality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_is_unitary_and_matches_scalar_case() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C::new(1.0, 0.0),
                C::new(0.3, -0.2),
                C::new(0.3, 0.2),
                C::new(-0.5, 0.0),
            ],
        );
        let eig = hermitian_eigen(m, "t").unwrap();
        let u = expm_hermitian(&eig, 0.7_f64);
        assert!(unitarity_defect(&u) < 1e-14);

        let one = DMatrix::from_element(1, 1, C::new(2.0, 0.0));
        let u1 = expm_hermitian(&hermitian_eigen(one, "t").unwrap(), 0.5);
        assert!((u1[(0, 0)] - C::new(1.0_f64.cos(), -1.0_f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn unitary_eigen_recovers_phases() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            cis(0.3_f64),
            cis(-2.0),
            cis(3.0),
        ]));
        let ue = unitary_eigen(&d).unwrap();
        let mut args: Vec<f64> = ue.values.iter().map(|z| z.arg()).collect();
        args.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((args[0] + 2.0).abs() < 1e-14 && (args[2] - 3.0).abs() < 1e-14);
    }
}
