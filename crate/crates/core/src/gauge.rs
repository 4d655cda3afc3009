//! The gauge `J(t) = e^{−iQ(t)}` that trades the oscillating potential q for
//! a time-dependent magnetic field.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::driving::{primitive_of, ElectricDrive, PrimitiveMethod, PrimitiveQ};
use crate::error::{Error, Result};
use crate::evolution::{circle_distance, monodromy, quasienergy_spectrum, DrivenHamiltonian, StepOptions};
use crate::graph::FiniteLattice;
use crate::linalg::{op_norm, HermitianOperator};
use crate::scalar::{cis, to_f64, Real, C};

/// `J(t) = e^{−iQ(t)}` as a diagonal unitary.
#[derive(Clone, Debug)]
pub struct GaugeTransform {
    big_q: PrimitiveQ,
}

impl GaugeTransform {
    /// Fails with `MeanNonzero` when `Q(τ) ≠ 0`, since `J` would then not be
    /// periodic.
    pub fn new(q: &ElectricDrive, method: PrimitiveMethod) -> Result<Self> {
        let big_q = primitive_of(q, method).map_err(|e| match e {
            Error::PeriodMeanNonzero { vertex, value, .. } => Error::MeanNonzero { vertex, value },
            other => other,
        })?;
        Ok(Self { big_q })
    }

    pub fn primitive(&self) -> &PrimitiveQ {
        &self.big_q
    }

    pub fn period(&self) -> f64 {
        self.big_q.period()
    }

    /// Diagonal of `J(t)`.
    pub fn diagonal(&self, t: f64) -> Vec<C<f64>> {
        self.big_q.eval(t).iter().map(|&q| cis(-q)).collect()
    }

    /// `max_x |J_x(τ) − 1|`.
    pub fn closure_defect(&self) -> f64 {
        self.diagonal(self.period())
            .iter()
            .map(|z| (z - 1.0).norm())
            .fold(0.0, f64::max)
    }
}

/// `J(t)* (h(t) − q(t)) J(t)`: hopping phases `φ = β + Q_x − Q_y`, v kept,
/// q removed.
pub fn gauge_transform<T: Real>(
    h: &DrivenHamiltonian<T>,
    method: PrimitiveMethod,
) -> Result<(DrivenHamiltonian<T>, GaugeTransform)> {
    let gt = GaugeTransform::new(&h.fields().q, method)?;
    Ok((h.gauge_transformed(gt.big_q.clone())?, gt))
}

/// Largest entry of `J(t)* (h(t) − q(t)) J(t) − h̄(t)`, the two-way
/// assembly check.
pub fn conjugation_defect<T: Real>(h: &DrivenHamiltonian<T>, h_bar: &DrivenHamiltonian<T>, gt: &GaugeTransform, t: f64) -> f64 {
    let q: Vec<T> = h.fields().q.sample(t).iter().map(|&v| crate::scalar::lit(-v)).collect();
    let direct = h.generator_at(t).add_diagonal(&q).to_dense();
    let j = gt.diagonal(t);
    let conj = DMatrix::from_fn(direct.nrows(), direct.ncols(), |x, y| {
        let z = direct[(x, y)];
        C::new(to_f64(z.re), to_f64(z.im)) * j[x].conj() * j[y]
    });
    let bar = h_bar.generator_at(t).to_dense();
    conj.iter()
        .zip(bar.iter())
        .map(|(a, b)| (a - C::new(to_f64(b.re), to_f64(b.im))).norm())
        .fold(0.0, f64::max)
}

/// `K = QΔ − ΔQ` at one time.
#[derive(Clone, Debug)]
pub struct CommutatorK {
    pub matrix: DMatrix<C<f64>>,
    /// Sum of singular values.
    pub trace_norm: f64,
    /// `Σ_e |Q_x − Q_y|` over lattice edges.
    pub edge_variation: f64,
}

impl CommutatorK {
    pub fn nonzeros(&self) -> usize {
        self.matrix.iter().filter(|z| z.norm() > 0.0).count()
    }
}

/// Literal matrix commutator of `diag(Q)` with `h0`.
pub fn commutator_k(lat: &FiniteLattice, h0: &HermitianOperator<f64>, big_q: &[f64]) -> Result<CommutatorK> {
    if big_q.len() != lat.len() || h0.dim() != lat.len() {
        return Err(Error::DimensionMismatch("Q, h0 and lattice sizes differ".into()));
    }
    let d = h0.to_dense();
    let qd = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        big_q.len(),
        big_q.iter().map(|&v| C::new(v, 0.0)),
    ));
    let matrix = &qd * &d - &d * &qd;
    let trace_norm = matrix
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigensolverFailure {
            context: "singular values of K".into(),
        })?
        .singular_values
        .sum();
    Ok(CommutatorK {
        matrix,
        trace_norm,
        edge_variation: edge_variation(lat, big_q),
    })
}

pub fn edge_variation(lat: &FiniteLattice, big_q: &[f64]) -> f64 {
    lat.edges().iter().map(|e| (big_q[e.x] - big_q[e.y]).abs()).sum()
}

/// `∫_0^τ Σ_e |Q_x − Q_y| dt` by the periodic trapezoid rule.
pub fn edge_variation_integral(lat: &FiniteLattice, gt: &GaugeTransform, samples: usize) -> f64 {
    let tau = gt.period();
    let dt = tau / samples.max(1) as f64;
    (0..samples.max(1))
        .map(|j| edge_variation(lat, &gt.big_q.eval(j as f64 * dt)))
        .sum::<f64>()
        * dt
}

/// `U(t, 0) = I − iQ(t) + Q_•(t)` for the diagonal family q alone, with the
/// trace-norm bound `‖Q_•(t)‖ ≤ C e^{∫_0^t ‖q‖}`.
#[derive(Clone, Debug, Serialize)]
pub struct GaugeExpansion {
    pub t: f64,
    pub big_q: Vec<f64>,
    /// Diagonal of `e^{−iQ} − I + iQ`.
    #[serde(skip)]
    pub remainder: Vec<C<f64>>,
    pub remainder_trace_norm: f64,
    /// `C = sup_s ‖∫_0^s qQ‖_{B_1} = sup_s Σ_x Q_x(s)²/2` over one period.
    pub c: f64,
    /// `∫_0^t max_x |q_x|`.
    pub q_integral: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn gauge_propagator_expansion(gt: &GaugeTransform, t: f64, samples: usize) -> GaugeExpansion {
    let samples = samples.max(2);
    let tau = gt.period();
    let big_q = gt.big_q.eval(t);
    let remainder: Vec<C<f64>> = big_q.iter().map(|&q| cis(-q) - 1.0 + C::new(0.0, q)).collect();
    let remainder_trace_norm = remainder.iter().map(|z| z.norm()).sum();
    let c = (0..=samples)
        .map(|j| gt.big_q.eval(j as f64 * tau / samples as f64).iter().map(|q| 0.5 * q * q).sum::<f64>())
        .fold(0.0, f64::max);
    // Simpson on an even number of panels over [0, t]
    let panels = 2 * samples;
    let h = t / panels as f64;
    let q = gt.big_q.field();
    let sup = |s: f64| q.sample(s).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut acc = sup(0.0) + sup(t);
    for k in 1..panels {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * sup(k as f64 * h);
    }
    let q_integral = (acc * h / 3.0).abs();
    let bound = c * q_integral.exp();
    GaugeExpansion {
        t,
        big_q,
        holds: remainder_trace_norm <= bound * (1.0 + 1e-12) + 1e-15,
        remainder,
        remainder_trace_norm,
        c,
        q_integral,
        bound,
    }
}

/// Comparison of the period maps of `h` and of its gauge transform.
#[derive(Clone, Debug, Serialize)]
pub struct GaugeEquivalence {
    pub n_steps: usize,
    /// `‖M − M̄‖`.
    pub monodromy_defect: f64,
    /// Largest circle distance between the eigenphase sets, in radians.
    pub eigenphase_discrepancy: f64,
    pub closure_defect: f64,
    pub unitarity_defect: f64,
}

pub fn gauge_equivalence_check<T: Real>(
    h: &DrivenHamiltonian<T>,
    method: PrimitiveMethod,
    n_steps: usize,
    opts: &StepOptions,
) -> Result<GaugeEquivalence> {
    let (h_bar, gt) = gauge_transform(h, method)?;
    let m = monodromy(h, 0.0, n_steps, opts)?;
    let m_bar = monodromy(&h_bar, 0.0, n_steps, opts)?;
    let tau = gt.period();
    let s = quasienergy_spectrum(&m.matrix, tau, false)?;
    let s_bar = quasienergy_spectrum(&m_bar.matrix, tau, false)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let phases = |v: &[f64]| v.iter().map(|l| l * tau).collect::<Vec<f64>>();
    let (a, b) = (phases(&s.quasienergies), phases(&s_bar.quasienergies));
    let one_way = |a: &[f64], b: &[f64]| {
        a.iter()
            .map(|x| b.iter().map(|y| circle_distance(*x, *y, two_pi)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(GaugeEquivalence {
        n_steps,
        monodromy_defect: to_f64(op_norm(&(&m.matrix - &m_bar.matrix))),
        eigenphase_discrepancy: one_way(&a, &b).max(one_way(&b, &a)),
        closure_defect: gt.closure_defect(),
        unitarity_defect: to_f64(m.unitarity_defect).max(to_f64(m_bar.unitarity_defect)),
    })
}

/// Least-squares slope of `log defect` against `log n_steps`.
pub fn convergence_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
