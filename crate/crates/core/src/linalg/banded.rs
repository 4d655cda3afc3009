//! Banded LU with partial pivoting for shifted lattice operators `H − λ`.

use super::HermitianOperator;
use crate::error::{Error, Result};
use crate::scalar::{cabs, creal, czero, Real, C};

/// Factorization of a complex banded matrix with `kl` sub- and `ku`
/// super-diagonals. Row windows are anchored at their position and span
/// columns `[r − kl, r + kl + ku]` to hold pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandedLu<T: Real> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<C<T>>,
    lower: Vec<C<T>>,
    pivots: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    /// Factors `H − shift·I`.
    pub fn factor_shifted(h: &HermitianOperator<T>, shift: C<T>) -> Result<Self> {
        let n = h.dim();
        let b = h.bandwidth();
        let (kl, ku) = (b, b);
        let width = 2 * kl + ku + 1;
        let mut rows = vec![czero(); n * width];
        for i in 0..n {
            for (j, v) in h.row(i) {
                rows[i * width + (j + kl - i)] += v;
            }
            rows[i * width + kl] -= shift;
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            rows,
            lower: vec![czero(); n * kl.max(1)],
            pivots: vec![0; n],
        };
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = cabs(self.rows[self.idx(k, k)]);
            for r in (k + 1)..=last {
                let v = cabs(self.rows[self.idx(r, k)]);
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() {
                return Err(Error::SolverStagnation(format!(
                    "singular banded matrix at column {k}"
                )));
            }
            self.pivots[k] = p;
            let c_hi = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for c in k..=c_hi {
                    let a = self.idx(k, c);
                    let b = self.idx(p, c);
                    self.rows.swap(a, b);
                }
            }
            let piv = self.rows[self.idx(k, k)];
            for r in (k + 1)..=last {
                let l = self.rows[self.idx(r, k)] / piv;
                self.lower[k * self.kl.max(1) + (r - k - 1)] = l;
                let rk = self.idx(r, k);
                self.rows[rk] = czero();
                if l == czero() {
                    continue;
                }
                for c in (k + 1)..=c_hi {
                    let u = self.rows[self.idx(k, c)];
                    let t = self.idx(r, c);
                    self.rows[t] -= l * u;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `(H − shift) x = b`.
    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            let xk = x[k];
            for r in (k + 1)..=last {
                let l = self.lower[k * self.kl.max(1) + (r - k - 1)];
                x[r] -= l * xk;
            }
        }
        for k in (0..n).rev() {
            let c_hi = (k + self.kl + self.ku).min(n - 1);
            let mut acc = x[k];
            for c in (k + 1)..=c_hi {
                acc -= self.rows[self.idx(k, c)] * x[c];
            }
            x[k] = acc / self.rows[self.idx(k, k)];
        }
        x
    }
}

/// Convenience: real shift.
pub fn factor_real_shift<T: Real>(h: &HermitianOperator<T>, shift: T) -> Result<BandedLu<T>> {
    BandedLu::factor_shifted(h, creal(shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_apply;
    use rand::{Rng, SeedableRng};

    #[test]
    fn solves_random_banded_systems() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let band = 3;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, C::new(rng.gen_range(-1.0..1.0), 0.0)));
            for j in (i + 1)..(i + band + 1).min(n) {
                let v = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                trip.push((i, j, v));
                trip.push((j, i, v.conj()));
            }
        }
        let h = HermitianOperator::<f64>::from_triplets(n, trip);
        let shift = C::new(0.3, 1e-3);
        let lu = BandedLu::factor_shifted(&h, shift).unwrap();
        let b: Vec<C<f64>> = (0..n).map(|i| C::new(i as f64, 1.0)).collect();
        let x = lu.solve(&b);
        let mut r = dense_apply(&h.to_dense(), &x);
        for i in 0..n {
            r[i] -= shift * x[i] + b[i];
        }
        let res: f64 = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let h = HermitianOperator::<f64>::from_triplets(
            2,
            vec![(0, 1, C::new(1.0, 0.0)), (1, 0, C::new(1.0, 0.0))],
        );
        let lu = factor_real_shift(&h, 0.0).unwrap();
        let x = lu.solve(&[C::new(2.0, 0.0), C::new(3.0, 0.0)]);
        assert!((x[0] - C::new(3.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - C::new(2.0, 0.0)).norm() < 1e-15);
    }
}
