use nalgebra::DMatrix;
use serde::Serialize;

use super::{propagate, propagator_matrix, Hamiltonian, Propagator, StepOptions};
use crate::error::{Error, Result};
use crate::graph::StateVector;
use crate::linalg::{op_norm, unitarity_defect, unitary_eigen};
use crate::scalar::{carg, cis, dist2, lit, to_f64, Real, C};

/// Input unitarity accepted by [`quasienergy_spectrum`].
pub const UNITARITY_TOL: f64 = 1e-8;
/// Quasienergies closer than this count as one eigenvalue.
pub const MULTIPLICITY_TOL: f64 = 1e-9;

/// `M(t0) = U(t0 + τ, t0)`.
pub fn monodromy<T: Real, H: Hamiltonian<T> + ?Sized>(
    h: &H,
    t0: f64,
    n_steps: usize,
    opts: &StepOptions,
) -> Result<Propagator<T>> {
    propagator_matrix(h, t0, t0 + h.period(), n_steps, opts)
}

fn grid_index(t0: f64, tau: f64, n_steps: usize) -> Result<usize> {
    let k = t0 / tau * n_steps as f64;
    let r = k.round();
    if r < 0.0 || (k - r).abs() > 1e-9 * (1.0 + r) {
        return Err(Error::ConfigInvalid(format!(
            "t0 = {t0} is not on the step grid τ/{n_steps}"
        )));
    }
    Ok(r as usize)
}

/// `‖M(t0) − U(t0, 0) M(0) U(0, t0)‖` with `U(0, t0) = U(t0, 0)*`. `t0`
/// must lie on the step grid so that both sides share their steps.
pub fn conjugacy_defect<T: Real, H: Hamiltonian<T> + ?Sized>(
    h: &H,
    t0: f64,
    n_steps: usize,
    opts: &StepOptions,
) -> Result<f64> {
    let k = grid_index(t0, h.period(), n_steps)?;
    let m0 = monodromy(h, 0.0, n_steps, opts)?.matrix;
    let mt = monodromy(h, t0, n_steps, opts)?.matrix;
    let u = if k == 0 {
        DMatrix::identity(h.dim(), h.dim())
    } else {
        propagator_matrix(h, 0.0, t0, k, opts)?.matrix
    };
    let rhs = &u * m0 * u.adjoint();
    Ok(to_f64(op_norm(&(mt - rhs))))
}

/// `λ = (−arg μ mod 2π) / τ` in `[0, ω)`, with the branch cut sent to 0.
pub fn fold_quasienergy(mu_arg: f64, tau: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut theta = -mu_arg;
    if theta < 0.0 {
        theta += two_pi;
    }
    if theta >= two_pi {
        theta = 0.0;
    }
    theta / tau
}

/// Folded eigenphases of a monodromy operator.
#[derive(Clone, Debug, Serialize)]
pub struct QuasienergySpectrum {
    pub tau: f64,
    pub omega: f64,
    /// `arg μ` per eigenvalue, in the order of `quasienergies`.
    pub eigenphases: Vec<f64>,
    /// Non-decreasing, in `[0, ω)`.
    pub quasienergies: Vec<f64>,
    /// Distinct quasienergies with their multiplicities.
    pub clusters: Vec<(f64, usize)>,
    pub unitarity_defect: f64,
    pub non_normality: f64,
    /// Column `j` belongs to `quasienergies[j]`.
    #[serde(skip)]
    pub eigenvectors: Option<DMatrix<C<f64>>>,
}

impl QuasienergySpectrum {
    pub fn len(&self) -> usize {
        self.quasienergies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quasienergies.is_empty()
    }
}

/// Distance on the circle `ℝ / ωℤ`.
pub fn circle_distance(a: f64, b: f64, omega: f64) -> f64 {
    let d = (a - b).rem_euclid(omega);
    d.min(omega - d)
}

pub fn quasienergy_spectrum<T: Real>(m: &DMatrix<C<T>>, tau: f64, keep_vectors: bool) -> Result<QuasienergySpectrum> {
    let defect = to_f64(unitarity_defect(m));
    if !(defect <= UNITARITY_TOL) {
        return Err(Error::NonUnitaryInput(defect));
    }
    let eig = unitary_eigen(m)?;
    let n = eig.values.len();
    let args: Vec<f64> = eig.values.iter().map(|&z| to_f64(carg(z))).collect();
    let lambdas: Vec<f64> = args.iter().map(|&a| fold_quasienergy(a, tau)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let quasienergies: Vec<f64> = order.iter().map(|&k| lambdas[k]).collect();
    let eigenphases = order.iter().map(|&k| args[k]).collect();
    let omega = 2.0 * std::f64::consts::PI / tau;
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for &l in &quasienergies {
        match clusters.last_mut() {
            Some((v, c)) if (l - *v).abs() <= MULTIPLICITY_TOL => *c += 1,
            _ => clusters.push((l, 1)),
        }
    }
    // the last cluster may wrap around to the first
    if clusters.len() > 1 {
        let (first, last) = (clusters[0].0, clusters[clusters.len() - 1].0);
        if circle_distance(first, last, omega) <= MULTIPLICITY_TOL {
            let (_, c) = clusters.pop().expect("nonempty");
            clusters[0].1 += c;
        }
    }
    let eigenvectors = keep_vectors.then(|| {
        DMatrix::from_fn(n, n, |i, j| {
            let z = eig.vectors[(i, order[j])];
            C::new(to_f64(z.re), to_f64(z.im))
        })
    });
    Ok(QuasienergySpectrum {
        tau,
        omega,
        eigenphases,
        quasienergies,
        clusters,
        unitarity_defect: defect,
        non_normality: to_f64(eig.non_normality),
        eigenvectors,
    })
}

/// Largest `‖M(t)ψ(t) − e^{−iτλ}ψ(t)‖` over `samples` equally spaced
/// `t ∈ [0, τ)`, with `ψ(t) = e^{itλ} U(t, 0) ψ(0)`. `n_steps` per period
/// must be a multiple of `samples`.
pub fn floquet_mode_check<T: Real, H: Hamiltonian<T> + ?Sized>(
    h: &H,
    lambda: f64,
    psi0: &StateVector<T>,
    samples: usize,
    n_steps: usize,
    tol: f64,
    opts: &StepOptions,
) -> Result<f64> {
    if samples == 0 || !n_steps.is_multiple_of(samples) {
        return Err(Error::ConfigInvalid(format!(
            "{n_steps} steps per period cannot be split into {samples} samples"
        )));
    }
    let tau = h.period();
    let mu = cis(lit::<T>(-tau * lambda));
    let residual = |t: f64, psi: &StateVector<T>| -> Result<f64> {
        let m_psi = propagate(h, psi, t, t + tau, n_steps, opts)?;
        let target: Vec<C<T>> = psi.values.iter().map(|z| *z * mu).collect();
        Ok(to_f64(dist2(&m_psi.values, &target)))
    };
    let scale = to_f64(psi0.norm());
    let r0 = residual(0.0, psi0)?;
    if !(r0 <= tol * scale) {
        return Err(Error::NotAnEigenpair(r0));
    }
    let dt = tau / samples as f64;
    let mut u_psi = psi0.clone();
    let mut worst = r0;
    for j in 1..samples {
        let (a, b) = ((j - 1) as f64 * dt, j as f64 * dt);
        u_psi = propagate(h, &u_psi, a, b, n_steps / samples, opts)?;
        let phase = cis(lit::<T>(b * lambda));
        let psi = StateVector::new(u_psi.values.iter().map(|z| *z * phase).collect());
        worst = worst.max(residual(b, &psi)?);
    }
    Ok(worst)
}
