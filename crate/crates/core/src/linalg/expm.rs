//! Short-time exponentials `e^{−i δt H}` for Hermitian `H`.
//!
//! Small operators are exponentiated through a dense eigen-decomposition,
//! which is unitary to machine precision. Larger ones use a Chebyshev
//! expansion whose truncation error is bounded a priori by the Bessel tail
//! `2 Σ_{k>K} |J_k(r δt)|`, valid on the Gershgorin enclosure of the spectrum.

use nalgebra::DMatrix;

use super::dense::{expm_hermitian, hermitian_eigen};
use super::HermitianOperator;
use crate::error::{Error, Result};
use crate::scalar::{cis, czero, from_usize, lit, Real, C};

/// `J_0(x), …, J_kmax(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence<T: Real>(x: T, kmax: usize) -> Vec<T> {
    let mut out = vec![T::zero(); kmax + 1];
    if x == T::zero() {
        out[0] = T::one();
        return out;
    }
    let ax = x.abs();
    let top = kmax.max(crate::scalar::to_f64(ax).ceil() as usize);
    let mut m = top + 16 + (40.0 * top as f64).sqrt() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let big = lit::<T>(1e18);
    let shrink = lit::<T>(1e-18);
    let two = lit::<T>(2.0);
    let mut j_next = T::zero();
    let mut j_cur = T::one();
    let mut even_sum = T::zero();
    for k in (1..=m).rev() {
        // j_cur = J_k (unnormalized)
        if k <= kmax {
            out[k] = j_cur;
        }
        if k % 2 == 0 {
            even_sum += j_cur;
        }
        let j_prev = two * from_usize::<T>(k) / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        if j_cur.abs() > big {
            j_cur *= shrink;
            j_next *= shrink;
            even_sum *= shrink;
            for v in out.iter_mut() {
                *v *= shrink;
            }
        }
    }
    out[0] = j_cur;
    let norm = j_cur + two * even_sum;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < T::zero() {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Chebyshev expansion of `e^{−i δt H}` for spectra inside `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct ChebyshevExp<T: Real> {
    center: T,
    half_width: T,
    global_phase: C<T>,
    coeffs: Vec<C<T>>,
    tail_bound: T,
}

impl<T: Real> ChebyshevExp<T> {
    pub const MAX_TERMS: usize = 20_000;

    pub fn new(lo: T, hi: T, dt: T, tol: T) -> Result<Self> {
        let center = (lo + hi) / lit(2.0);
        let half_width = ((hi - lo) / lit(2.0)).max(T::zero());
        let global_phase = cis(-(center * dt));
        let x = (half_width * dt).abs();
        // tail of 2 Σ_{k>K} (x/2)^k / k!, times e^{x/2}
        let half = x / lit(2.0);
        let growth = half.exp();
        let mut term = half; // (x/2)^{K+1}/(K+1)! with K = 0
        let mut k_last = 0usize;
        while lit::<T>(2.0) * term * growth > tol {
            k_last += 1;
            if k_last > Self::MAX_TERMS {
                return Err(Error::StepBudgetExceeded(format!(
                    "Chebyshev expansion needs more than {} terms (r·δt = {})",
                    Self::MAX_TERMS,
                    crate::scalar::to_f64(x)
                )));
            }
            term = term * half / from_usize::<T>(k_last + 1);
        }
        let tail_bound = lit::<T>(2.0) * term * growth;
        let bessel = bessel_j_sequence(x, k_last);
        let mut coeffs = Vec::with_capacity(k_last + 1);
        // (−i)^k
        let rot = [
            C::new(T::one(), T::zero()),
            C::new(T::zero(), -T::one()),
            C::new(-T::one(), T::zero()),
            C::new(T::zero(), T::one()),
        ];
        let sign = if dt < T::zero() { -T::one() } else { T::one() };
        for (k, jk) in bessel.iter().enumerate() {
            let eps_k = if k == 0 { T::one() } else { lit(2.0) };
            // e^{−i x cos θ} = Σ ε_k (−i)^k J_k(x) T_k(cos θ); dt < 0 flips x.
            let jk_signed = if k % 2 == 1 { *jk * sign } else { *jk };
            coeffs.push(rot[k % 4] * (eps_k * jk_signed));
        }
        Ok(Self {
            center,
            half_width,
            global_phase,
            coeffs,
            tail_bound,
        })
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    /// A priori bound on `‖e^{−iδtH} − p(H)‖`.
    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn apply(&self, h: &HermitianOperator<T>, x: &[C<T>], out: &mut [C<T>]) {
        self.apply_impl(h, x, out, false)
    }

    /// Applies the adjoint `e^{+iδtH}` with the same polynomial.
    pub fn apply_adjoint(&self, h: &HermitianOperator<T>, x: &[C<T>], out: &mut [C<T>]) {
        self.apply_impl(h, x, out, true)
    }

    /// `p(H) X` for a row-major block `X` with `width` columns.
    /// With `adjoint` the conjugate polynomial, i.e. `e^{+iδtH}`, is applied.
    pub fn apply_block(&self, h: &HermitianOperator<T>, x: &[C<T>], width: usize, out: &mut [C<T>], adjoint: bool) {
        let pick = |z: C<T>| if adjoint { z.conj() } else { z };
        let phase = pick(self.global_phase);
        if self.half_width == T::zero() || self.coeffs.len() == 1 {
            let z = pick(self.coeffs[0]) * phase;
            for (o, xi) in out.iter_mut().zip(x) {
                *o = *xi * z;
            }
            return;
        }
        let inv_r = T::one() / self.half_width;
        let c = self.center;
        let mut t_prev: Vec<C<T>> = x.to_vec();
        let mut t_cur = vec![czero(); x.len()];
        let mut hx = vec![czero(); x.len()];
        h.apply_block_into(x, width, &mut hx);
        let (c0, c1) = (pick(self.coeffs[0]), pick(self.coeffs[1]));
        for i in 0..x.len() {
            t_cur[i] = (hx[i] - x[i] * c) * inv_r;
            out[i] = x[i] * c0 + t_cur[i] * c1;
        }
        let two_inv_r = inv_r * lit(2.0);
        for ck in &self.coeffs[2..] {
            h.apply_block_into(&t_cur, width, &mut hx);
            for ((o, (tp, tc)), hv) in out.iter_mut().zip(t_prev.iter_mut().zip(t_cur.iter_mut())).zip(&hx) {
                let t_next = (*hv - *tc * c) * two_inv_r - *tp;
                *tp = *tc;
                *tc = t_next;
                *o += t_next * pick(*ck);
            }
        }
        for o in out.iter_mut() {
            *o *= phase;
        }
    }

    fn apply_impl(&self, h: &HermitianOperator<T>, x: &[C<T>], out: &mut [C<T>], adjoint: bool) {
        let n = x.len();
        let pick = |z: C<T>| if adjoint { z.conj() } else { z };
        let global_phase = pick(self.global_phase);
        if self.half_width == T::zero() || self.coeffs.len() == 1 {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = *xi * pick(self.coeffs[0]) * global_phase;
            }
            return;
        }
        let inv_r = T::one() / self.half_width;
        let c = self.center;
        let mut t_prev: Vec<C<T>> = x.to_vec();
        let mut t_cur = vec![czero(); n];
        let mut hx = vec![czero(); n];
        h.apply_into(x, &mut hx);
        for i in 0..n {
            t_cur[i] = (hx[i] - x[i] * c) * inv_r;
            out[i] = x[i] * pick(self.coeffs[0]) + t_cur[i] * pick(self.coeffs[1]);
        }
        let two_inv_r = inv_r * lit(2.0);
        for ck in &self.coeffs[2..] {
            h.apply_into(&t_cur, &mut hx);
            for i in 0..n {
                let t_next = (hx[i] - t_cur[i] * c) * two_inv_r - t_prev[i];
                t_prev[i] = t_cur[i];
                t_cur[i] = t_next;
                out[i] += t_next * pick(*ck);
            }
        }
        for o in out.iter_mut() {
            *o *= global_phase;
        }
    }
}

/// One propagation step `e^{−i δt H}`, either dense or Chebyshev.
#[derive(Clone, Debug)]
pub enum StepExponential<T: Real> {
    Dense(DMatrix<C<T>>),
    Chebyshev {
        op: HermitianOperator<T>,
        cheb: ChebyshevExp<T>,
    },
}

impl<T: Real> StepExponential<T> {
    /// Dense eigen-decomposition when `dim ≤ dense_threshold`, otherwise a
    /// Chebyshev expansion truncated at `tol`.
    pub fn new(h: HermitianOperator<T>, dt: T, dense_threshold: usize, tol: T) -> Result<Self> {
        if h.dim() <= dense_threshold {
            let eig = hermitian_eigen(h.to_dense(), "step exponential")?;
            Ok(StepExponential::Dense(expm_hermitian(&eig, dt)))
        } else {
            let (lo, hi) = h.spectral_bounds();
            let cheb = ChebyshevExp::new(lo, hi, dt, tol)?;
            Ok(StepExponential::Chebyshev { op: h, cheb })
        }
    }

    pub fn tail_bound(&self) -> T {
        match self {
            StepExponential::Dense(_) => T::zero(),
            StepExponential::Chebyshev { cheb, .. } => cheb.tail_bound(),
        }
    }

    pub fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        match self {
            StepExponential::Dense(u) => super::dense::dense_apply(u, x),
            StepExponential::Chebyshev { op, cheb } => {
                let mut out = vec![czero(); x.len()];
                cheb.apply(op, x, &mut out);
                out
            }
        }
    }

    /// `e^{+iδtH} x`, the inverse step.
    pub fn apply_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        match self {
            StepExponential::Dense(u) => super::dense::adjoint_apply(u, x),
            StepExponential::Chebyshev { op, cheb } => {
                let mut out = vec![czero(); x.len()];
                cheb.apply_adjoint(op, x, &mut out);
                out
            }
        }
    }

    /// `m ← e^{−iδtH} m`.
    pub fn apply_columns(&self, m: &mut DMatrix<C<T>>) {
        self.apply_columns_impl(m, false)
    }

    /// `m ← e^{+iδtH} m`.
    pub fn apply_adjoint_columns(&self, m: &mut DMatrix<C<T>>) {
        self.apply_columns_impl(m, true)
    }

    fn apply_columns_impl(&self, m: &mut DMatrix<C<T>>, adjoint: bool) {
        match self {
            StepExponential::Dense(u) => {
                *m = if adjoint { u.adjoint() * &*m } else { u * &*m };
            }
            StepExponential::Chebyshev { op, cheb } => {
                if m.nrows() == 0 || m.ncols() == 0 {
                    return;
                }
                // row-major copy so the sparse product streams contiguous rows
                let width = m.ncols();
                let x: Vec<C<T>> = m.transpose().as_slice().to_vec();
                let mut out = vec![czero(); x.len()];
                cheb.apply_block(op, &x, width, &mut out, adjoint);
                *m = DMatrix::from_vec(width, m.nrows(), out).transpose();
            }
        }
    }
}
