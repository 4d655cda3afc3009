//! The quasienergy space `L²(T_τ, ℋ)` through Fourier modes: the free
//! resolvent of `∂ + h_0` on the mode ladder and as an explicit time kernel.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{adjoint_apply, dense_apply, hermitian_eigen, HermitianEigen};
use crate::scalar::{cabs, cis, czero, from_usize, lit, norm2, to_f64, Real, C};
use crate::spectral::merge_intervals;

pub const DEFAULT_N_MAX: usize = 64;

/// Truncated Fourier ladder `f(t) = τ^{−1/2} Σ_{|n|≤n_max} f_n e^{iωnt}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HowlandVector<T: Real> {
    pub tau: f64,
    pub n_max: usize,
    /// `modes[n + n_max]` is `f_n`.
    pub modes: Vec<Vec<C<T>>>,
    /// Squared norm of the modes dropped when this vector was built from
    /// samples.
    pub tail_mass: f64,
}

impl<T: Real> HowlandVector<T> {
    pub fn zeros(tau: f64, n_max: usize, dim: usize) -> Self {
        Self {
            tau,
            n_max,
            modes: vec![vec![czero(); dim]; 2 * n_max + 1],
            tail_mass: 0.0,
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.tau
    }

    pub fn dim(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    pub fn mode(&self, n: i64) -> Option<&[C<T>]> {
        let k = n + self.n_max as i64;
        (k >= 0).then(|| self.modes.get(k as usize).map(Vec::as_slice)).flatten()
    }

    pub fn mode_mut(&mut self, n: i64) -> Option<&mut Vec<C<T>>> {
        let k = n + self.n_max as i64;
        if k < 0 {
            return None;
        }
        self.modes.get_mut(k as usize)
    }

    pub fn norm(&self) -> T {
        self.modes.iter().map(|m| norm2(m).powi(2)).fold(T::zero(), |a, b| a + b).sqrt()
    }

    /// Modes of the samples `f(jτ/M)`, `j < M`. Modes beyond `n_max` (and
    /// beyond the grid's Nyquist limit) are dropped and their mass recorded.
    pub fn from_samples(samples: &[Vec<C<T>>], tau: f64, n_max: usize) -> Result<Self> {
        let m = samples.len();
        if m == 0 {
            return Err(Error::DimensionMismatch("no time samples".into()));
        }
        let dim = samples[0].len();
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch("time samples differ in length".into()));
        }
        let all = dft(samples, tau);
        let mut out = Self::zeros(tau, n_max, dim);
        let mut tail = 0.0;
        for (n, c) in all {
            if n.unsigned_abs() as usize <= n_max {
                out.mode_mut(n).expect("in range").clone_from(&c);
            } else {
                tail += to_f64(norm2(&c)).powi(2);
            }
        }
        out.tail_mass = tail;
        Ok(out)
    }

    /// Values on the grid `jτ/M`.
    pub fn to_samples(&self, m: usize) -> Vec<Vec<C<T>>> {
        let omega = self.omega();
        let scale = lit::<T>(1.0 / self.tau.sqrt());
        (0..m)
            .map(|j| {
                let t = j as f64 * self.tau / m as f64;
                let mut v = vec![czero::<T>(); self.dim()];
                for (k, c) in self.modes.iter().enumerate() {
                    let n = k as i64 - self.n_max as i64;
                    let e = cis(lit::<T>(omega * n as f64 * t)) * scale;
                    v.iter_mut().zip(c).for_each(|(v, c)| *v += *c * e);
                }
                v
            })
            .collect()
    }

    /// Multiplication by `e^{ikωt}`: mode `n` moves to `n + k`; modes
    /// leaving the ladder are dropped.
    pub fn shift(&self, k: i64) -> Self {
        let mut out = Self::zeros(self.tau, self.n_max, self.dim());
        let nm = self.n_max as i64;
        for n in -nm..=nm {
            if let Some(dst) = out.mode_mut(n + k) {
                dst.clone_from(&self.modes[(n + nm) as usize]);
            }
        }
        out
    }
}

/// Fourier coefficients `c_n = √τ/M Σ_j f(t_j) e^{−iωnt_j}` for
/// `−⌊M/2⌋ ≤ n ≤ ⌊(M−1)/2⌋`; an even grid's Nyquist mode is split evenly
/// between `±M/2`.
fn dft<T: Real>(samples: &[Vec<C<T>>], tau: f64) -> Vec<(i64, Vec<C<T>>)> {
    let m = samples.len();
    let dim = samples[0].len();
    let scale = lit::<T>(tau.sqrt() / m as f64);
    let coeff = |n: i64| -> Vec<C<T>> {
        let mut c = vec![czero::<T>(); dim];
        for (j, s) in samples.iter().enumerate() {
            let e = cis(lit::<T>(-2.0 * std::f64::consts::PI * ((n * j as i64).rem_euclid(m as i64)) as f64 / m as f64));
            c.iter_mut().zip(s).for_each(|(c, s)| *c += *s * e);
        }
        c.iter_mut().for_each(|c| *c *= scale);
        c
    };
    let lo = -((m / 2) as i64);
    let hi = ((m - 1) / 2) as i64;
    let mut out: Vec<(i64, Vec<C<T>>)> = (lo..=hi).map(|n| (n, coeff(n))).collect();
    if m.is_multiple_of(2) {
        let half = lit::<T>(0.5);
        let c = &mut out[0].1;
        c.iter_mut().for_each(|z| *z *= half);
        let c = c.clone();
        out.push((-lo, c));
    }
    out
}

fn spectrum_check<T: Real>(eig: &HermitianEigen<T>, lambda: C<f64>, omega: f64, n: i64) -> Result<()> {
    for &mu in &eig.values {
        let d = (C::new(to_f64(mu) + omega * n as f64, 0.0) - lambda).norm();
        if d <= 1e-12 * (1.0 + lambda.norm()) {
            return Err(Error::SpectrumHit { mode: n, distance: d });
        }
    }
    Ok(())
}

fn apply_spectral<T: Real>(eig: &HermitianEigen<T>, f: &[C<T>], g: impl Fn(T) -> C<T>) -> Vec<C<T>> {
    let mut c = adjoint_apply(&eig.vectors, f);
    c.iter_mut().zip(&eig.values).for_each(|(c, &mu)| *c *= g(mu));
    dense_apply(&eig.vectors, &c)
}

fn c_of<T: Real>(z: C<f64>) -> C<T> {
    C::new(lit(z.re), lit(z.im))
}

/// `(∂ + h_0) f` mode by mode: `(h_0 + ωn) f_n`.
pub fn quasienergy_apply<T: Real>(h0: &DMatrix<C<T>>, f: &HowlandVector<T>) -> HowlandVector<T> {
    let omega = lit::<T>(f.omega());
    let mut out = f.clone();
    out.tail_mass = 0.0;
    for (k, (o, fi)) in out.modes.iter_mut().zip(&f.modes).enumerate() {
        let n = from_usize::<T>(k) - from_usize::<T>(f.n_max);
        let mut g = dense_apply(h0, fi);
        g.iter_mut().zip(fi).for_each(|(g, x)| *g += *x * (omega * n));
        *o = g;
    }
    out
}

/// `g_n = (h_0 + ωn − λ)^{−1} f_n`.
pub fn free_resolvent_modes<T: Real>(h0: &DMatrix<C<T>>, lambda: C<f64>, f: &HowlandVector<T>) -> Result<HowlandVector<T>> {
    check_dim(h0, f.dim())?;
    let eig = hermitian_eigen(h0.clone(), "free quasienergy resolvent")?;
    let omega = f.omega();
    let nm = f.n_max as i64;
    let modes = f
        .modes
        .par_iter()
        .enumerate()
        .map(|(k, fn_)| {
            let n = k as i64 - nm;
            spectrum_check(&eig, lambda, omega, n)?;
            let shift = c_of::<T>(C::new(omega * n as f64, 0.0) - lambda);
            Ok(apply_spectral(&eig, fn_, |mu| (C::new(mu, T::zero()) + shift).inv()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HowlandVector {
        tau: f.tau,
        n_max: f.n_max,
        modes,
        tail_mass: f.tail_mass,
    })
}

fn check_dim<T: Real>(h0: &DMatrix<C<T>>, dim: usize) -> Result<()> {
    if h0.nrows() != dim || h0.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "h0 is {}x{}, vectors have {dim} entries",
            h0.nrows(),
            h0.ncols()
        )));
    }
    Ok(())
}

/// `∫_a^b e^{izs} ds`.
fn exp_integral(z: C<f64>, a: f64, b: f64) -> C<f64> {
    let w = z * (b - a);
    // (e^{iw} − 1)/(iw), by series near zero
    let ratio = if w.norm() < 1e-4 {
        let iw = C::new(0.0, 1.0) * w;
        C::new(1.0, 0.0) + iw / 2.0 + iw * iw / 6.0 + iw * iw * iw / 24.0
    } else {
        ((C::new(0.0, 1.0) * w).exp() - 1.0) / (C::new(0.0, 1.0) * w)
    };
    (C::new(0.0, 1.0) * z * a).exp() * ratio * (b - a)
}

/// `R_0(λ) f (t) = i e^{itφ} ∫_0^τ (1_{t−s} + e^{iτφ}/(1 − e^{iτφ})) e^{−isφ} f(s) ds`,
/// `φ = λ − h_0`, at the sample times of `samples` (uniform grid on
/// `[0, τ)`). The s-integral is evaluated exactly against the trigonometric
/// interpolant of the samples, split at `s = t`; `1_0` counts as 1.
pub fn free_resolvent_kernel<T: Real>(
    h0: &DMatrix<C<T>>,
    lambda: C<f64>,
    samples: &[Vec<C<T>>],
    tau: f64,
) -> Result<Vec<Vec<C<T>>>> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::DimensionMismatch("no time samples".into()));
    }
    check_dim(h0, samples[0].len())?;
    let eig = hermitian_eigen(h0.clone(), "free quasienergy kernel")?;
    let dim = h0.nrows();
    let phis: Vec<C<f64>> = eig.values.iter().map(|&mu| lambda - to_f64(mu)).collect();
    let i = C::new(0.0, 1.0);
    let mut resonance = Vec::with_capacity(dim);
    for phi in &phis {
        let e = (i * tau * phi).exp();
        let d = (C::new(1.0, 0.0) - e).norm();
        if d <= 1e-12 {
            return Err(Error::ResonantPeriod(d));
        }
        resonance.push(e / (C::new(1.0, 0.0) - e));
    }
    // coefficients in the eigenbasis of h0
    let rotated: Vec<Vec<C<T>>> = samples.iter().map(|s| adjoint_apply(&eig.vectors, s)).collect();
    let coeffs: Vec<(i64, Vec<C<f64>>)> = dft(&rotated, tau)
        .into_iter()
        .map(|(n, c)| (n, c.iter().map(|z| C::new(to_f64(z.re), to_f64(z.im))).collect()))
        .collect();
    let omega = 2.0 * std::f64::consts::PI / tau;
    let norm = 1.0 / tau.sqrt();
    let out = (0..m)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * tau / m as f64;
            let mut g = vec![czero::<T>(); dim];
            for (k, phi) in phis.iter().enumerate() {
                let mut acc = C::new(0.0, 0.0);
                for (n, c) in &coeffs {
                    let z = C::new(omega * *n as f64, 0.0) - phi;
                    acc += c[k] * norm * (exp_integral(z, 0.0, t) + resonance[k] * exp_integral(z, 0.0, tau));
                }
                g[k] = c_of(i * (i * t * phi).exp() * acc);
            }
            dense_apply(&eig.vectors, &g)
        })
        .collect();
    Ok(out)
}

/// `‖e^{itω} R_0(λ) e^{−itω} f − R_0(λ + ω) f‖_{L²}` with both resolvents
/// evaluated by the kernel formula on the sample grid.
pub fn omega_shift_defect<T: Real>(h0: &DMatrix<C<T>>, lambda: C<f64>, samples: &[Vec<C<T>>], tau: f64) -> Result<f64> {
    let m = samples.len();
    let omega = 2.0 * std::f64::consts::PI / tau;
    let times: Vec<f64> = (0..m).map(|j| j as f64 * tau / m as f64).collect();
    let twist = |s: &[Vec<C<T>>], sign: f64| -> Vec<Vec<C<T>>> {
        s.iter()
            .zip(&times)
            .map(|(v, &t)| {
                let e = cis(lit::<T>(sign * omega * t));
                v.iter().map(|z| *z * e).collect()
            })
            .collect()
    };
    let lhs = twist(&free_resolvent_kernel(h0, lambda, &twist(samples, -1.0), tau)?, 1.0);
    let rhs = free_resolvent_kernel(h0, lambda + omega, samples, tau)?;
    Ok(sample_distance(&lhs, &rhs, tau))
}

/// Discrete `L²(T_τ)` distance of two sampled functions.
pub fn sample_distance<T: Real>(a: &[Vec<C<T>>], b: &[Vec<C<T>>], tau: f64) -> f64 {
    let dt = tau / a.len() as f64;
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| to_f64(cabs(*p - *q)).powi(2)).sum::<f64>())
        .sum();
    (s * dt).sqrt()
}

/// Discrete `L²(T_τ)` norm of a sampled function.
pub fn sample_norm<T: Real>(a: &[Vec<C<T>>], tau: f64) -> f64 {
    let zero: Vec<Vec<C<T>>> = a.iter().map(|v| vec![czero(); v.len()]).collect();
    sample_distance(a, &zero, tau)
}

/// `⋃_n (σ(h_0) + ωn) ∩ window` as merged intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeQuasienergySpectrum {
    pub omega: f64,
    pub window: (f64, f64),
    pub intervals: Vec<(f64, f64)>,
    /// `ω` exceeds the width of `σ(h_0)`, so neighbouring copies leave gaps.
    pub gapped: bool,
}

pub fn free_quasienergy_spectrum(spectrum: &[(f64, f64)], omega: f64, window: (f64, f64)) -> FreeQuasienergySpectrum {
    let (lo, hi) = window;
    let s_min = spectrum.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let s_max = spectrum.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    let mut pieces = Vec::new();
    if !spectrum.is_empty() && omega > 0.0 && lo <= hi {
        let n_lo = ((lo - s_max) / omega).floor() as i64;
        let n_hi = ((hi - s_min) / omega).ceil() as i64;
        for n in n_lo..=n_hi {
            for &(a, b) in spectrum {
                let (a, b) = (a + omega * n as f64, b + omega * n as f64);
                if b >= lo && a <= hi {
                    pieces.push((a.max(lo), b.min(hi)));
                }
            }
        }
    }
    FreeQuasienergySpectrum {
        omega,
        window,
        intervals: merge_intervals(pieces, 0.0),
        gapped: omega > s_max - s_min,
    }
}
