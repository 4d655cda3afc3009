//! Propagators of driven Hamiltonians: unitary stepping, truncated Dyson
//! series, monodromy operators and quasienergies.

mod dyson;
mod floquet;

pub use dyson::{dyson_bound, dyson_propagator, dyson_tail, order_for_tail, DysonPropagator};
pub use floquet::{
    circle_distance, conjugacy_defect, floquet_mode_check, fold_quasienergy, monodromy, quasienergy_spectrum, QuasienergySpectrum,
};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driving::{BoundFields, PrimitiveQ};
use crate::error::{Error, Result};
use crate::graph::{FiniteLattice, StateVector};
use crate::linalg::{unitarity_defect, HermitianOperator, StepExponential};
use crate::scalar::{cis, czero, lit, to_f64, Real, C};
use crate::spectral::HoppingPattern;

/// Largest number of steps accepted by a single propagation call.
pub const MAX_STEPS: usize = 1 << 24;

// Gauss–Legendre nodes on [−1, 1] and weights summing to one.
const GL3_NODE: f64 = 0.774_596_669_241_483_4;
const GL3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// A time-dependent Hermitian generator as seen by the stepper.
pub trait Hamiltonian<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn period(&self) -> f64;
    /// Generator used for the step `[t0, t1]`.
    fn step_generator(&self, t0: f64, t1: f64) -> Result<HermitianOperator<T>>;
}

/// Static operator that driven Hamiltonians are compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Δ, no magnetic or electric background.
    Free,
    /// Δ_α + 𝔭.
    #[default]
    Static,
}

/// `h(t) = Δ_{β(t)} + 𝔭 + v(t) + q(t)` on a truncation.
///
/// After [`DrivenHamiltonian::gauge_transformed`] the oscillating part q is
/// absorbed into the hopping phases `β_e + Q_x − Q_y` and dropped from the
/// diagonal.
#[derive(Clone, Debug)]
pub struct DrivenHamiltonian<T: Real> {
    lattice: FiniteLattice,
    pattern: HoppingPattern<T>,
    fields: BoundFields,
    gauge: Option<PrimitiveQ>,
    comparison: Comparison,
}

impl<T: Real> DrivenHamiltonian<T> {
    pub fn new(lattice: &FiniteLattice, fields: BoundFields) -> Result<Self> {
        let n = lattice.len();
        if fields.p.len() != n || fields.alpha.len() != lattice.edges().len() || fields.v.len() != n || fields.q.len() != n {
            return Err(Error::DimensionMismatch("bound fields do not match the lattice".into()));
        }
        Ok(Self {
            lattice: lattice.clone(),
            pattern: HoppingPattern::new(lattice),
            fields,
            gauge: None,
            comparison: Comparison::default(),
        })
    }

    pub fn with_comparison(mut self, comparison: Comparison) -> Self {
        self.comparison = comparison;
        self
    }

    /// Replaces q by the hopping phases of `J(t)* (h(t) − q(t)) J(t)`,
    /// `J = e^{−iQ}`.
    pub fn gauge_transformed(&self, big_q: PrimitiveQ) -> Result<Self> {
        if big_q.len() != self.lattice.len() {
            return Err(Error::DimensionMismatch("Q does not match the lattice".into()));
        }
        let mut out = self.clone();
        out.gauge = Some(big_q);
        Ok(out)
    }

    pub fn lattice(&self) -> &FiniteLattice {
        &self.lattice
    }

    pub fn fields(&self) -> &BoundFields {
        &self.fields
    }

    pub fn pattern(&self) -> &HoppingPattern<T> {
        &self.pattern
    }

    pub fn comparison(&self) -> Comparison {
        self.comparison
    }

    pub fn is_gauge_transformed(&self) -> bool {
        self.gauge.is_some()
    }

    fn magnetic_is_static(&self) -> bool {
        self.gauge.is_none() && self.fields.delta.is_zero()
    }

    /// Hopping phase per lattice edge at time `t`.
    pub fn phases(&self, t: f64) -> Vec<f64> {
        let mut phi = self.fields.beta(t);
        if let Some(q) = &self.gauge {
            let big_q = q.eval(t);
            for (p, e) in phi.iter_mut().zip(self.lattice.edges()) {
                *p += big_q[e.x] - big_q[e.y];
            }
        }
        phi
    }

    /// Diagonal potential `𝔭 + v(t) [+ q(t)]` at time `t`.
    pub fn potential(&self, t: f64) -> Vec<f64> {
        let mut d = self.fields.v.sample(t);
        for (d, p) in d.iter_mut().zip(&self.fields.p) {
            *d += p;
        }
        if self.gauge.is_none() {
            let q = self.fields.q.sample(t);
            d.iter_mut().zip(&q).for_each(|(d, q)| *d += q);
        }
        d
    }

    /// Instantaneous generator `h(t)`.
    pub fn generator_at(&self, t: f64) -> HermitianOperator<T> {
        let phi = self.phases(t);
        let pot = self.potential(t);
        let half = lit::<T>(-0.5);
        let hd = self.pattern.half_degrees();
        self.pattern
            .assemble_with(|e| cis(lit::<T>(phi[e])) * half, |x| hd[x] + lit(pot[x]))
    }

    /// Static comparison operator, Δ or Δ_α + 𝔭.
    pub fn comparison_operator(&self) -> HermitianOperator<T> {
        match self.comparison {
            Comparison::Free => {
                let zero = vec![T::zero(); self.pattern.n_edges()];
                self.pattern.laplacian(&zero, None)
            }
            Comparison::Static => {
                let a: Vec<T> = self.fields.alpha.iter().map(|&x| lit(x)).collect();
                let p: Vec<T> = self.fields.p.iter().map(|&x| lit(x)).collect();
                self.pattern.laplacian(&a, Some(&p))
            }
        }
    }

    /// Generator minus the comparison operator at time `t`.
    pub fn perturbation_at(&self, t: f64) -> HermitianOperator<T> {
        self.generator_at(t).sub(&self.comparison_operator())
    }
}

impl<T: Real> Hamiltonian<T> for DrivenHamiltonian<T> {
    fn dim(&self) -> usize {
        self.lattice.len()
    }

    fn period(&self) -> f64 {
        self.fields.period
    }

    /// Time average of `h` over the step. Electric terms use closed-form
    /// averages where available; hopping entries are averaged by 3-point
    /// Gauss–Legendre when the phases move.
    fn step_generator(&self, t0: f64, t1: f64) -> Result<HermitianOperator<T>> {
        let n = self.lattice.len();
        let mut diag = vec![0.0; n];
        let mut buf = vec![0.0; n];
        self.fields.v.step_average_into(t0, t1, &mut diag);
        if self.gauge.is_none() {
            self.fields.q.step_average_into(t0, t1, &mut buf);
            diag.iter_mut().zip(&buf).for_each(|(d, q)| *d += q);
        }
        for (d, p) in diag.iter_mut().zip(&self.fields.p) {
            *d += p;
        }
        let hops: Vec<C<f64>> = if self.magnetic_is_static() {
            self.fields.alpha.iter().map(|&a| cis(a) * -0.5).collect()
        } else {
            let (tm, h) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            let mut acc = vec![czero::<f64>(); self.pattern.n_edges()];
            for (k, w) in GL3_WEIGHTS.iter().enumerate() {
                let t = tm + (k as f64 - 1.0) * GL3_NODE * h;
                for (a, phi) in acc.iter_mut().zip(self.phases(t)) {
                    *a += cis(phi) * (-0.5 * w);
                }
            }
            acc
        };
        if diag.iter().any(|d| !d.is_finite()) || hops.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonHermitianSample {
                t: 0.5 * (t0 + t1),
                defect: f64::INFINITY,
            });
        }
        let hd = self.pattern.half_degrees();
        Ok(self.pattern.assemble_with(
            |e| C::new(lit(hops[e].re), lit(hops[e].im)),
            |x| hd[x] + lit(diag[x]),
        ))
    }
}

/// Hamiltonian given by a dense matrix-valued closure, for small systems.
pub struct DenseHamiltonian<T: Real, F> {
    f: F,
    dim: usize,
    period: f64,
    _scalar: std::marker::PhantomData<fn() -> T>,
}

impl<T: Real, F: Fn(f64) -> DMatrix<C<T>> + Sync> DenseHamiltonian<T, F> {
    pub fn new(dim: usize, period: f64, f: F) -> Self {
        Self {
            f,
            dim,
            period,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn at(&self, t: f64) -> DMatrix<C<T>> {
        (self.f)(t)
    }
}

impl<T: Real, F: Fn(f64) -> DMatrix<C<T>> + Sync> Hamiltonian<T> for DenseHamiltonian<T, F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn step_generator(&self, t0: f64, t1: f64) -> Result<HermitianOperator<T>> {
        let (tm, h) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        let mut avg = DMatrix::from_element(self.dim, self.dim, czero::<T>());
        for (k, w) in GL3_WEIGHTS.iter().enumerate() {
            let m = (self.f)(tm + (k as f64 - 1.0) * GL3_NODE * h);
            if m.nrows() != self.dim || m.ncols() != self.dim {
                return Err(Error::DimensionMismatch(format!(
                    "generator sample is {}x{}, expected {}",
                    m.nrows(),
                    m.ncols(),
                    self.dim
                )));
            }
            avg += m * C::new(lit::<T>(*w), T::zero());
        }
        let op = HermitianOperator::from_dense(&avg, T::zero());
        let defect = to_f64(op.hermiticity_defect());
        let scale = to_f64(crate::linalg::max_abs(&avg)).max(1.0);
        if !(defect <= 1e-12 * scale) {
            return Err(Error::NonHermitianSample { t: tm, defect });
        }
        Ok(op)
    }
}

/// Step exponential settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepOptions {
    /// Dense eigendecomposition up to this dimension, Chebyshev above.
    pub dense_threshold: usize,
    /// Truncation tolerance of each Chebyshev step.
    pub tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 32,
            tol: 1e-15,
        }
    }
}

fn check_steps(n_steps: usize) -> Result<()> {
    if n_steps == 0 || n_steps > MAX_STEPS {
        return Err(Error::StepBudgetExceeded(format!(
            "n_steps must lie in 1..={MAX_STEPS}, got {n_steps}"
        )));
    }
    Ok(())
}

fn step_times(s: f64, t: f64, n_steps: usize) -> impl Iterator<Item = (f64, f64)> {
    let dt = (t - s) / n_steps as f64;
    (0..n_steps).map(move |k| {
        let a = s + k as f64 * dt;
        let b = if k + 1 == n_steps { t } else { s + (k + 1) as f64 * dt };
        (a, b)
    })
}

fn step_exponential<T: Real, H: Hamiltonian<T> + ?Sized>(
    h: &H,
    a: f64,
    b: f64,
    opts: &StepOptions,
) -> Result<StepExponential<T>> {
    let g = h.step_generator(a, b)?;
    StepExponential::new(g, lit(b - a), opts.dense_threshold, lit(opts.tol))
}

/// `U(t, s) f` by `n_steps` exponential steps of the step-averaged
/// generator. `t < s` runs backward.
pub fn propagate<T: Real, H: Hamiltonian<T> + ?Sized>(
    h: &H,
    f: &StateVector<T>,
    s: f64,
    t: f64,
    n_steps: usize,
    opts: &StepOptions,
) -> Result<StateVector<T>> {
    check_steps(n_steps)?;
    if f.len() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, Hamiltonian acts on {}",
            f.len(),
            h.dim()
        )));
    }
    if s == t {
        return Ok(f.clone());
    }
    let mut x = f.values.clone();
    for (a, b) in step_times(s, t, n_steps) {
        x = step_exponential(h, a, b, opts)?.apply(&x);
    }
    Ok(StateVector::new(x))
}

/// Cached step exponentials on a fixed time grid, for repeated application.
#[derive(Clone, Debug)]
pub struct StepSequence<T: Real> {
    steps: Vec<StepExponential<T>>,
    s: f64,
    t: f64,
    dim: usize,
}

impl<T: Real> StepSequence<T> {
    /// Precomputes the steps of `[s, t]`; steps are built in parallel.
    pub fn new<H: Hamiltonian<T> + ?Sized>(h: &H, s: f64, t: f64, n_steps: usize, opts: &StepOptions) -> Result<Self> {
        check_steps(n_steps)?;
        let times: Vec<(f64, f64)> = step_times(s, t, n_steps).collect();
        let steps = times
            .par_iter()
            .map(|&(a, b)| step_exponential(h, a, b, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            steps,
            s,
            t,
            dim: h.dim(),
        })
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.s, self.t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sum of the per-step truncation bounds.
    pub fn tail_bound(&self) -> T {
        self.steps.iter().fold(T::zero(), |a, s| a + s.tail_bound())
    }

    pub fn apply(&self, f: &[C<T>]) -> Vec<C<T>> {
        let mut x = f.to_vec();
        for s in &self.steps {
            x = s.apply(&x);
        }
        x
    }

    /// `U(s, t) f`, running the cached steps backward.
    pub fn apply_inverse(&self, f: &[C<T>]) -> Vec<C<T>> {
        let mut x = f.to_vec();
        for s in self.steps.iter().rev() {
            x = s.apply_adjoint(&x);
        }
        x
    }

    pub fn apply_columns(&self, m: &mut DMatrix<C<T>>) {
        for s in &self.steps {
            s.apply_columns(m);
        }
    }

    /// Runs `m ← U(t, s) m`, returning copies of `m` after each step count
    /// listed in `at`.
    pub fn apply_columns_with_snapshots(&self, m: &mut DMatrix<C<T>>, at: &[usize]) -> Vec<DMatrix<C<T>>> {
        let mut snaps: Vec<_> = at.iter().map(|&r| (r == 0).then(|| m.clone())).collect();
        for (k, s) in self.steps.iter().enumerate() {
            s.apply_columns(m);
            for (slot, &r) in snaps.iter_mut().zip(at) {
                if r == k + 1 {
                    *slot = Some(m.clone());
                }
            }
        }
        snaps.into_iter().map(|s| s.unwrap_or_else(|| m.clone())).collect()
    }

    /// `U(t, t_r)` for each step count `r` in `at`, from one backward sweep
    /// of adjoint steps.
    pub fn suffix_propagators(&self, at: &[usize]) -> Vec<DMatrix<C<T>>> {
        let mut y = DMatrix::<C<T>>::identity(self.dim, self.dim);
        let mut out = vec![None; at.len()];
        let lowest = at.iter().copied().min().unwrap_or(self.steps.len());
        for k in (lowest..self.steps.len()).rev() {
            self.steps[k].apply_adjoint_columns(&mut y);
            for (slot, &r) in out.iter_mut().zip(at) {
                if r == k {
                    *slot = Some(y.adjoint());
                }
            }
        }
        out.into_iter()
            .map(|s| s.unwrap_or_else(|| DMatrix::identity(self.dim, self.dim)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum PropagatorMethod {
    Stepping { n_steps: usize },
    Dyson { order: usize },
}

/// A propagator matrix `U(t, s)` with its defect certificates.
#[derive(Clone, Debug)]
pub struct Propagator<T: Real> {
    pub matrix: DMatrix<C<T>>,
    pub method: PropagatorMethod,
    pub s: f64,
    pub t: f64,
    /// `max |U*U − I|`.
    pub unitarity_defect: T,
    /// Chebyshev truncation bound summed over steps, or the Dyson tail.
    pub tail_bound: T,
}

/// Dense `U(t, s)` by stepping all basis vectors.
pub fn propagator_matrix<T: Real, H: Hamiltonian<T> + ?Sized>(
    h: &H,
    s: f64,
    t: f64,
    n_steps: usize,
    opts: &StepOptions,
) -> Result<Propagator<T>> {
    check_steps(n_steps)?;
    let n = h.dim();
    let mut m = DMatrix::<C<T>>::identity(n, n);
    let mut tail = T::zero();
    if s != t {
        for (a, b) in step_times(s, t, n_steps) {
            let step = step_exponential(h, a, b, opts)?;
            tail += step.tail_bound();
            step.apply_columns(&mut m);
        }
    }
    Ok(Propagator {
        unitarity_defect: unitarity_defect(&m),
        matrix: m,
        method: PropagatorMethod::Stepping { n_steps },
        s,
        t,
        tail_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{ElectricField, FieldSpec, Spatial, Temporal};
    use crate::graph::PeriodicGraph;
    use crate::linalg::{expm_hermitian, hermitian_eigen, max_abs_diff};
    use crate::scalar::dist2;
    use proptest::prelude::*;

    pub(crate) fn driven_z1(radius: usize, amplitude: f64) -> DrivenHamiltonian<f64> {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), radius).unwrap();
        let spec = FieldSpec {
            period: 1.0,
            v: ElectricField::Separable {
                amplitude,
                spatial: Spatial::Exponential { rate: 1.0 },
                temporal: Temporal::Cos { harmonic: 1, phase: 0.0 },
                envelope: Default::default(),
            },
            ..Default::default()
        };
        let fields = spec.bind(&lat, 1.0).unwrap();
        DrivenHamiltonian::new(&lat, fields).unwrap()
    }

    #[test]
    fn scalar_constant_generator_is_exact() {
        let h = DenseHamiltonian::new(1, 1.0, |_| DMatrix::from_element(1, 1, C::new(0.7, 0.0)));
        let f = StateVector::<f64>::delta(1, 0);
        let u = propagate(&h, &f, 0.2, 1.5, 3, &StepOptions::default()).unwrap();
        assert!((u.values[0] - cis(-0.7 * 1.3)).norm() < 1e-15);
    }

    #[test]
    fn static_field_matches_direct_exponential() {
        let h = driven_z1(6, 0.0);
        let g = h.comparison_operator();
        let eig = hermitian_eigen(g.to_dense(), "t").unwrap();
        let exact = expm_hermitian(&eig, 0.9);
        let p = propagator_matrix(&h, 0.0, 0.9, 5, &StepOptions::default()).unwrap();
        assert!(max_abs_diff(&p.matrix, &exact) < 1e-12);
        assert!(p.unitarity_defect < 1e-13);
    }

    #[test]
    fn chebyshev_and_dense_paths_agree() {
        let h = driven_z1(20, 0.8);
        let f = StateVector::<f64>::delta(h.dim(), 20);
        let dense = StepOptions {
            dense_threshold: 1000,
            ..Default::default()
        };
        let a = propagate(&h, &f, 0.0, 1.0, 64, &dense).unwrap();
        let b = propagate(&h, &f, 0.0, 1.0, 64, &StepOptions::default()).unwrap();
        assert!(dist2(&a.values, &b.values) < 1e-12);
    }

    #[test]
    fn backward_run_inverts_forward_run() {
        let h = driven_z1(20, 0.8);
        let f = StateVector::<f64>::delta(h.dim(), 17);
        let o = StepOptions::default();
        let g = propagate(&h, &f, 0.0, 0.75, 48, &o).unwrap();
        let back = propagate(&h, &g, 0.75, 0.0, 48, &o).unwrap();
        assert!(dist2(&back.values, &f.values) < 1e-12);
    }

    #[test]
    fn self_convergence_is_second_order() {
        let h = driven_z1(15, 1.0);
        let f = StateVector::<f64>::delta(h.dim(), 15);
        let o = StepOptions::default();
        let run = |n| propagate(&h, &f, 0.0, 1.0, n, &o).unwrap().values;
        let (a, b, c) = (run(16), run(32), run(64));
        let slope = (dist2(&a, &b) / dist2(&b, &c)).log2();
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn group_law_on_grid_aligned_triples() {
        let h = driven_z1(8, 0.9);
        let o = StepOptions::default();
        let a = propagator_matrix(&h, 0.0, 0.5, 64, &o).unwrap();
        let b = propagator_matrix(&h, 0.5, 1.0, 64, &o).unwrap();
        let c = propagator_matrix(&h, 0.0, 1.0, 128, &o).unwrap();
        assert!(max_abs_diff(&(&b.matrix * &a.matrix), &c.matrix) < 1e-12);
    }

    #[test]
    fn period_shift_is_invisible() {
        let h = driven_z1(8, 0.9);
        let o = StepOptions::default();
        let a = propagator_matrix(&h, 0.2, 0.7, 40, &o).unwrap();
        let b = propagator_matrix(&h, 1.2, 1.7, 40, &o).unwrap();
        assert!(max_abs_diff(&a.matrix, &b.matrix) < 1e-10);
    }

    #[test]
    fn step_sequence_matches_propagate() {
        let h = driven_z1(30, 0.5);
        let o = StepOptions::default();
        let f = StateVector::<f64>::gaussian_packet(h.lattice(), &[0.0], &[1.0], 3.0).unwrap();
        let seq = StepSequence::new(&h, 0.0, 1.0, 32, &o).unwrap();
        let a = seq.apply(&f.values);
        let b = propagate(&h, &f, 0.0, 1.0, 32, &o).unwrap();
        assert!(dist2(&a, &b.values) < 1e-14);
        assert!(dist2(&seq.apply_inverse(&a), &f.values) < 1e-13);
    }

    #[test]
    fn zero_steps_rejected() {
        let h = driven_z1(3, 0.5);
        let f = StateVector::<f64>::delta(h.dim(), 0);
        assert!(matches!(
            propagate(&h, &f, 0.0, 1.0, 0, &StepOptions::default()),
            Err(Error::StepBudgetExceeded(_))
        ));
    }

    #[test]
    fn non_hermitian_closure_is_caught() {
        let h = DenseHamiltonian::new(2, 1.0, |_| {
            DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)])
        });
        let f = StateVector::<f64>::delta(2, 0);
        assert!(matches!(
            propagate(&h, &f, 0.0, 1.0, 2, &StepOptions::default()),
            Err(Error::NonHermitianSample { .. })
        ));
    }

    #[test]
    fn f32_stepping_stays_unitary() {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 4).unwrap();
        let fields = FieldSpec::default().bind(&lat, 1.0).unwrap();
        let h = DrivenHamiltonian::<f32>::new(&lat, fields).unwrap();
        let p = propagator_matrix(&h, 0.0, 1.0, 8, &StepOptions::default()).unwrap();
        assert!(p.unitarity_defect < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn norm_is_preserved(amp in -1.5f64..1.5, x0 in 0usize..21, t in 0.1f64..2.0) {
            let h = driven_z1(10, amp);
            let f = StateVector::<f64>::delta(h.dim(), x0);
            let g = propagate(&h, &f, 0.0, t, 20, &StepOptions::default()).unwrap();
            prop_assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }
}
