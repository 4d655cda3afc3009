//! Wave-operator approximants `W_n f = U(0, nτ) e^{−inτ h_c} P_ac f` and
//! their diagnostics.
//!
//! With `g_n = e^{−inτ h_c} f` and `M = U(τ, 0)`, periodicity gives
//! `‖W_{n+1} f − W_n f‖ = ‖M g_n − e^{−iτ h_c} g_n‖`, so each Cauchy
//! decrement costs one period of forward stepping. The approximants
//! themselves are formed only at checkpoints, by stepping back to 0.

mod resolvent;

pub use resolvent::{weighted_resolvent_sample, LanczosOptions, ResolventRow, ResolventSample, ResolventWeight};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{propagate, Comparison, DrivenHamiltonian, Hamiltonian, StepOptions, StepSequence};
use crate::graph::{FiniteLattice, StateVector};
use crate::linalg::{hermitian_eigen, HermitianOperator, StepExponential};
use crate::scalar::{cabs, czero, dist2, lit, norm2, to_f64, Real, C};

pub const DEFAULT_BOUNDARY_CAP: f64 = 1e-6;
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_PARTICIPATION_MIN: f64 = 0.1;

/// Projection used in place of `P_ac` of the comparison operator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PacFilter {
    /// Identity when the comparison operator is Δ on a one-vertex cell,
    /// spectral otherwise.
    #[default]
    Auto,
    Identity,
    /// Keeps eigenvectors of the comparison operator whose eigenvalue lies
    /// in one of `bands` (all of them when empty) and whose participation
    /// ratio is at least `participation_min`.
    Spectral {
        participation_min: f64,
        #[serde(default)]
        bands: Vec<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringOptions {
    pub n_periods: usize,
    pub steps_per_period: usize,
    #[serde(default)]
    pub step: StepOptions,
    #[serde(default = "default_cap")]
    pub boundary_cap: f64,
    /// Shell width for the boundary mass; `max(1, L/20)` when absent.
    #[serde(default)]
    pub boundary_shell: Option<usize>,
    /// Convergence threshold on the final decrement, relative to `‖P_ac f‖`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Periods at which approximants are formed; the last period when empty.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default)]
    pub p_ac: PacFilter,
}

fn default_cap() -> f64 {
    DEFAULT_BOUNDARY_CAP
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl ScatteringOptions {
    pub fn new(n_periods: usize, steps_per_period: usize) -> Self {
        Self {
            n_periods,
            steps_per_period,
            step: StepOptions::default(),
            boundary_cap: DEFAULT_BOUNDARY_CAP,
            boundary_shell: None,
            threshold: DEFAULT_THRESHOLD,
            checkpoints: Vec::new(),
            p_ac: PacFilter::Auto,
        }
    }

    fn shell(&self, lat: &FiniteLattice) -> usize {
        self.boundary_shell.unwrap_or((lat.radius() / 20).max(1)).min(lat.radius())
    }

    fn checkpoint_list(&self) -> Result<Vec<usize>> {
        if self.n_periods == 0 {
            return Err(Error::ConfigInvalid("n_periods must be positive".into()));
        }
        let mut c = if self.checkpoints.is_empty() {
            vec![self.n_periods]
        } else {
            self.checkpoints.clone()
        };
        c.sort_unstable();
        c.dedup();
        if c.iter().any(|&n| n > self.n_periods) {
            return Err(Error::ConfigInvalid(format!(
                "checkpoints must not exceed n_periods = {}",
                self.n_periods
            )));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatteringVerdict {
    Pass,
    NotConverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `U(0, t) e^{−it h_c} f`.
    Forward,
    /// `e^{it h_c} U(t, 0) g`.
    Adjoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub time: f64,
    /// `‖W_{n+1} − W_n‖` applied to the input.
    pub decrement: f64,
    pub boundary_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub approximant_norm: f64,
    pub isometry_defect: f64,
    /// `‖M W_n f − W_n e^{−iτh_c} f‖`; absent for aperiodic runs.
    pub intertwining_defect: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringReport {
    pub direction: Direction,
    pub comparison: Comparison,
    /// Period, or segment length for aperiodic runs.
    pub tau: f64,
    pub steps_per_period: usize,
    pub n_periods: usize,
    pub p_ac: String,
    pub input_norm: f64,
    /// Relative convergence threshold.
    pub threshold: f64,
    pub trace: Vec<TraceRow>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_decrement: f64,
    pub max_boundary_mass: f64,
    pub converged: bool,
    pub verdict: ScatteringVerdict,
    #[serde(skip)]
    pub final_approximant: Vec<C<f64>>,
}

impl ScatteringReport {
    pub fn last_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// Per-period trace as CSV.
    pub fn write_trace_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "time", "decrement", "boundary_mass"])?;
        for r in &self.trace {
            out.write_record([
                r.n.to_string(),
                format!("{:.15e}", r.time),
                format!("{:.15e}", r.decrement),
                format!("{:.15e}", r.boundary_mass),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One-period (or one-segment) maps of the driven evolution.
enum Evolution<'a, T: Real> {
    Periodic(StepSequence<T>),
    Segments {
        h: &'a DrivenHamiltonian<T>,
        length: f64,
        steps: usize,
        opts: StepOptions,
    },
}

impl<'a, T: Real> Evolution<'a, T> {
    fn periodic(h: &DrivenHamiltonian<T>, steps: usize, opts: &StepOptions) -> Result<Self> {
        Ok(Evolution::Periodic(StepSequence::new(h, 0.0, h.period(), steps, opts)?))
    }

    /// `U((n+1)T, nT) x`.
    fn forward(&self, n: usize, x: &[C<T>]) -> Result<Vec<C<T>>> {
        match self {
            Evolution::Periodic(m) => Ok(m.apply(x)),
            Evolution::Segments { h, length, steps, opts } => {
                let (a, b) = (n as f64 * length, (n + 1) as f64 * length);
                Ok(propagate(*h, &StateVector::new(x.to_vec()), a, b, *steps, opts)?.values)
            }
        }
    }

    /// `U(nT, (n+1)T) x`.
    fn backward(&self, n: usize, x: &[C<T>]) -> Result<Vec<C<T>>> {
        match self {
            Evolution::Periodic(m) => Ok(m.apply_inverse(x)),
            Evolution::Segments { h, length, steps, opts } => {
                let (a, b) = (n as f64 * length, (n + 1) as f64 * length);
                Ok(propagate(*h, &StateVector::new(x.to_vec()), b, a, *steps, opts)?.values)
            }
        }
    }

    fn is_periodic(&self) -> bool {
        matches!(self, Evolution::Periodic(_))
    }

    /// `U(0, nT) x`.
    fn back_to_zero(&self, n: usize, x: &[C<T>]) -> Result<Vec<C<T>>> {
        let mut y = x.to_vec();
        for k in (0..n).rev() {
            y = self.backward(k, &y)?;
        }
        Ok(y)
    }
}

fn check_input<T: Real>(h: &DrivenHamiltonian<T>, f: &StateVector<T>) -> Result<()> {
    h.lattice().check_len(f)?;
    let n = to_f64(f.norm());
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NonNormalizedInput(n));
    }
    Ok(())
}

fn to_f64_vec<T: Real>(v: &[C<T>]) -> Vec<C<f64>> {
    v.iter().map(|z| C::new(to_f64(z.re), to_f64(z.im))).collect()
}

fn comparison_step<T: Real>(h: &DrivenHamiltonian<T>, length: f64, opts: &StepOptions) -> Result<StepExponential<T>> {
    StepExponential::new(h.comparison_operator(), lit(length), opts.dense_threshold, lit(opts.tol))
}

fn guard_boundary<T: Real>(lat: &FiniteLattice, x: &[C<T>], shell: usize, cap: f64, n: usize) -> Result<f64> {
    let mass = to_f64(lat.boundary_mass(&StateVector::new(x.to_vec()), shell)?);
    if mass > cap {
        return Err(Error::BoundaryContamination { step: n, mass, cap });
    }
    Ok(mass)
}

/// Applies the filter to `f`; returns the projected vector and the filter's name.
pub fn apply_pac<T: Real>(h: &DrivenHamiltonian<T>, filter: &PacFilter, f: &[C<T>]) -> Result<(Vec<C<T>>, String)> {
    let resolved = match filter {
        PacFilter::Auto => {
            let plain = h.comparison() == Comparison::Free
                || (h.fields().alpha.iter().all(|&a| a == 0.0) && h.fields().p.iter().all(|&p| p == 0.0));
            if plain && h.lattice().graph().cell_size() == 1 {
                PacFilter::Identity
            } else {
                PacFilter::Spectral {
                    participation_min: DEFAULT_PARTICIPATION_MIN,
                    bands: Vec::new(),
                }
            }
        }
        other => other.clone(),
    };
    match resolved {
        PacFilter::Identity => Ok((f.to_vec(), "identity".into())),
        PacFilter::Spectral { participation_min, bands } => {
            let eig = hermitian_eigen(h.comparison_operator().to_dense(), "absolutely continuous filter")?;
            let n = f.len();
            let mut out = vec![czero::<T>(); n];
            for (j, &lambda) in eig.values.iter().enumerate() {
                let l = to_f64(lambda);
                if !bands.is_empty() && !bands.iter().any(|&(a, b)| l >= a - 1e-12 && l <= b + 1e-12) {
                    continue;
                }
                let col = eig.vectors.column(j);
                let p4: f64 = col.iter().map(|z| to_f64(cabs(*z)).powi(4)).sum();
                if 1.0 / (n as f64 * p4) < participation_min {
                    continue;
                }
                let mut c = czero::<T>();
                for (v, x) in col.iter().zip(f) {
                    c += v.conj() * *x;
                }
                for (o, v) in out.iter_mut().zip(col.iter()) {
                    *o += *v * c;
                }
            }
            Ok((out, format!("spectral(participation >= {participation_min})")))
        }
        PacFilter::Auto => unreachable!("resolved above"),
    }
}

struct Run {
    trace: Vec<TraceRow>,
    checkpoints: Vec<Checkpoint>,
    final_approximant: Vec<C<f64>>,
}

fn forward_run<T: Real>(
    h: &DrivenHamiltonian<T>,
    evo: &Evolution<'_, T>,
    e: &StepExponential<T>,
    g0: Vec<C<T>>,
    length: f64,
    opts: &ScatteringOptions,
) -> Result<Run> {
    let lat = h.lattice();
    let shell = opts.shell(lat);
    let checkpoints = opts.checkpoint_list()?;
    let input = to_f64(norm2(&g0));
    let mut saved: Vec<(usize, Vec<C<T>>, Vec<C<T>>)> = Vec::new();
    let mut trace = Vec::with_capacity(opts.n_periods);
    let mut g = g0;
    for n in 0..opts.n_periods {
        let mass = guard_boundary(lat, &g, shell, opts.boundary_cap, n)?;
        let mg = evo.forward(n, &g)?;
        let eg = e.apply(&g);
        trace.push(TraceRow {
            n,
            time: n as f64 * length,
            decrement: to_f64(dist2(&mg, &eg)),
            boundary_mass: mass,
        });
        if checkpoints.contains(&n) {
            saved.push((n, g.clone(), eg.clone()));
        }
        g = eg;
    }
    let n_last = opts.n_periods;
    guard_boundary(lat, &g, shell, opts.boundary_cap, n_last)?;
    if checkpoints.contains(&n_last) {
        let eg = e.apply(&g);
        saved.push((n_last, g.clone(), eg));
    }
    let mut out = Vec::new();
    let mut final_approximant = Vec::new();
    for (n, g_n, g_next) in saved {
        let w = evo.back_to_zero(n, &g_n)?;
        let norm = to_f64(norm2(&w));
        let intertwining = if evo.is_periodic() {
            let w_e = evo.back_to_zero(n, &g_next)?;
            let mw = evo.forward(0, &w)?;
            Some(to_f64(dist2(&mw, &w_e)))
        } else {
            None
        };
        out.push(Checkpoint {
            n,
            approximant_norm: norm,
            isometry_defect: (norm - input).abs(),
            intertwining_defect: intertwining,
        });
        final_approximant = to_f64_vec(&w);
    }
    Ok(Run {
        trace,
        checkpoints: out,
        final_approximant,
    })
}

fn adjoint_run<T: Real>(
    h: &DrivenHamiltonian<T>,
    evo: &Evolution<'_, T>,
    e: &StepExponential<T>,
    g0: Vec<C<T>>,
    length: f64,
    opts: &ScatteringOptions,
) -> Result<Run> {
    let lat = h.lattice();
    let shell = opts.shell(lat);
    let checkpoints = opts.checkpoint_list()?;
    let input = to_f64(norm2(&g0));
    let mut saved: Vec<(usize, Vec<C<T>>, Vec<C<T>>)> = Vec::new();
    let mut trace = Vec::with_capacity(opts.n_periods);
    let mut g = g0;
    for n in 0..opts.n_periods {
        let mass = guard_boundary(lat, &g, shell, opts.boundary_cap, n)?;
        let mg = evo.forward(n, &g)?;
        let eg = e.apply(&g);
        trace.push(TraceRow {
            n,
            time: n as f64 * length,
            decrement: to_f64(dist2(&mg, &eg)),
            boundary_mass: mass,
        });
        if checkpoints.contains(&n) {
            saved.push((n, g.clone(), mg.clone()));
        }
        g = mg;
    }
    let n_last = opts.n_periods;
    guard_boundary(lat, &g, shell, opts.boundary_cap, n_last)?;
    if checkpoints.contains(&n_last) {
        let mg = evo.forward(n_last, &g)?;
        saved.push((n_last, g.clone(), mg));
    }
    let back = |n: usize, x: &[C<T>]| {
        let mut y = x.to_vec();
        for _ in 0..n {
            y = e.apply_adjoint(&y);
        }
        y
    };
    let mut out = Vec::new();
    let mut final_approximant = Vec::new();
    for (n, h_n, h_next) in saved {
        // W_n* g = e^{inτh_c} h_n
        let w = back(n, &h_n);
        let norm = to_f64(norm2(&w));
        let intertwining = if evo.is_periodic() {
            let w_m = back(n, &h_next);
            Some(to_f64(dist2(&e.apply(&w), &w_m)))
        } else {
            None
        };
        out.push(Checkpoint {
            n,
            approximant_norm: norm,
            isometry_defect: (norm - input).abs(),
            intertwining_defect: intertwining,
        });
        final_approximant = to_f64_vec(&w);
    }
    Ok(Run {
        trace,
        checkpoints: out,
        final_approximant,
    })
}

fn report<T: Real>(
    h: &DrivenHamiltonian<T>,
    direction: Direction,
    run: Run,
    p_ac: String,
    input_norm: f64,
    length: f64,
    opts: &ScatteringOptions,
) -> ScatteringReport {
    let final_decrement = run.trace.last().map_or(0.0, |r| r.decrement);
    let max_boundary_mass = run.trace.iter().map(|r| r.boundary_mass).fold(0.0, f64::max);
    let converged = final_decrement <= opts.threshold * input_norm.max(f64::MIN_POSITIVE);
    ScatteringReport {
        direction,
        comparison: h.comparison(),
        tau: length,
        steps_per_period: opts.steps_per_period,
        n_periods: opts.n_periods,
        p_ac,
        input_norm,
        threshold: opts.threshold,
        trace: run.trace,
        checkpoints: run.checkpoints,
        final_decrement,
        max_boundary_mass,
        converged,
        verdict: if converged {
            ScatteringVerdict::Pass
        } else {
            ScatteringVerdict::NotConverged
        },
        final_approximant: run.final_approximant,
    }
}

/// Approximants `W_n f` at `t_n = nτ` for a periodic Hamiltonian.
pub fn wave_operator_apply<T: Real>(
    h: &DrivenHamiltonian<T>,
    f: &StateVector<T>,
    opts: &ScatteringOptions,
) -> Result<ScatteringReport> {
    check_input(h, f)?;
    let tau = h.period();
    let (g0, p_ac) = apply_pac(h, &opts.p_ac, &f.values)?;
    let input_norm = to_f64(norm2(&g0));
    let evo = Evolution::periodic(h, opts.steps_per_period, &opts.step)?;
    let e = comparison_step(h, tau, &opts.step)?;
    let run = forward_run(h, &evo, &e, g0, tau, opts)?;
    Ok(report(h, Direction::Forward, run, p_ac, input_norm, tau, opts))
}

/// Inverse approximants `e^{inτh_c} U(nτ, 0) g`; their decrements measure
/// whether g lies in the range of the wave operator.
pub fn adjoint_wave_probe<T: Real>(
    h: &DrivenHamiltonian<T>,
    g: &StateVector<T>,
    opts: &ScatteringOptions,
) -> Result<ScatteringReport> {
    check_input(h, g)?;
    let tau = h.period();
    let evo = Evolution::periodic(h, opts.steps_per_period, &opts.step)?;
    let e = comparison_step(h, tau, &opts.step)?;
    let run = adjoint_run(h, &evo, &e, g.values.clone(), tau, opts)?;
    Ok(report(h, Direction::Adjoint, run, "none".into(), 1.0, tau, opts))
}

/// Forward and adjoint runs for an aperiodic (time-decaying) Hamiltonian on
/// the grid `t_n = nT`.
#[derive(Clone, Debug, Serialize)]
pub struct TimeDecayingReport {
    pub segment: f64,
    /// The limit is asserted unitary only for `d ≥ 3`.
    pub guaranteed: bool,
    pub forward: ScatteringReport,
    pub adjoint: ScatteringReport,
    pub converged: bool,
    pub verdict: ScatteringVerdict,
}

pub fn time_decaying_scenario<T: Real>(
    h: &DrivenHamiltonian<T>,
    f: &StateVector<T>,
    segment: f64,
    opts: &ScatteringOptions,
) -> Result<TimeDecayingReport> {
    check_input(h, f)?;
    if !(segment.is_finite() && segment > 0.0) {
        return Err(Error::ConfigInvalid(format!("segment length must be positive, got {segment}")));
    }
    let evo = Evolution::Segments {
        h,
        length: segment,
        steps: opts.steps_per_period,
        opts: opts.step,
    };
    let e = comparison_step(h, segment, &opts.step)?;
    let fwd = forward_run(h, &evo, &e, f.values.clone(), segment, opts)?;
    let adj = adjoint_run(h, &evo, &e, f.values.clone(), segment, opts)?;
    let forward = report(h, Direction::Forward, fwd, "identity".into(), 1.0, segment, opts);
    let adjoint = report(h, Direction::Adjoint, adj, "none".into(), 1.0, segment, opts);
    let converged = forward.converged && adjoint.converged;
    Ok(TimeDecayingReport {
        segment,
        guaranteed: h.lattice().graph().dim() >= 3,
        forward,
        adjoint,
        converged,
        verdict: if converged {
            ScatteringVerdict::Pass
        } else {
            ScatteringVerdict::NotConverged
        },
    })
}

/// Eigenvector of `M = U(τ, 0)` with the smallest participation ratio,
/// with its quasienergy.
pub fn most_localized_floquet_state<T: Real>(
    h: &DrivenHamiltonian<T>,
    steps: usize,
    opts: &StepOptions,
) -> Result<(f64, StateVector<f64>)> {
    let m = crate::evolution::monodromy(h, 0.0, steps, opts)?;
    let s = crate::evolution::quasienergy_spectrum(&m.matrix, h.period(), true)?;
    let v: &DMatrix<C<f64>> = s.eigenvectors.as_ref().expect("vectors requested");
    let n = v.nrows();
    let (best, _) = (0..n)
        .map(|j| (j, v.column(j).iter().map(|z| z.norm().powi(4)).sum::<f64>()))
        .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let mut psi = StateVector::new(v.column(best).iter().copied().collect());
    psi.normalize();
    Ok((s.quasienergies[best], psi))
}

/// `ℓ²` distance between two reports' final approximants.
pub fn approximant_distance(a: &ScatteringReport, b: &ScatteringReport) -> f64 {
    dist2(&a.final_approximant, &b.final_approximant)
}

/// Plain Δ on a truncation, the comparison operator of the resolvent bounds.
pub fn free_laplacian(lat: &FiniteLattice) -> HermitianOperator<f64> {
    crate::spectral::HoppingPattern::new(lat).laplacian(&vec![0.0; lat.edges().len()], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{ElectricField, FieldSpec, Spatial, Temporal};
    use crate::graph::PeriodicGraph;
    use crate::spectral::StaticElectricPotential;

    fn hamiltonian(radius: usize, amplitude: f64) -> DrivenHamiltonian<f64> {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), radius).unwrap();
        let spec = FieldSpec {
            period: 1.0,
            v: ElectricField::Separable {
                amplitude,
                spatial: Spatial::PowerDecay { a: 2.0 },
                temporal: Temporal::Cos { harmonic: 1, phase: 0.0 },
                envelope: Default::default(),
            },
            ..Default::default()
        };
        DrivenHamiltonian::new(&lat, spec.bind(&lat, 1.0).unwrap()).unwrap()
    }

    fn packet(h: &DrivenHamiltonian<f64>) -> StateVector<f64> {
        StateVector::gaussian_packet(h.lattice(), &[0.0], &[std::f64::consts::FRAC_PI_2], 4.0).unwrap()
    }

    #[test]
    fn free_dynamics_is_stationary() {
        let h = hamiltonian(60, 0.0);
        let f = packet(&h);
        let r = wave_operator_apply(&h, &f, &ScatteringOptions::new(10, 16)).unwrap();
        assert!(r.trace.iter().all(|t| t.decrement < 1e-12));
        assert!(dist2(&r.final_approximant, &f.values) < 1e-11);
        assert!(r.converged && r.p_ac == "identity");
        let a = adjoint_wave_probe(&h, &f, &ScatteringOptions::new(10, 16)).unwrap();
        assert!(a.final_decrement < 1e-12);
    }

    #[test]
    fn decaying_drive_converges_and_intertwines() {
        let h = hamiltonian(120, 0.8);
        let f = packet(&h);
        let mut o = ScatteringOptions::new(50, 64);
        o.checkpoints = vec![10, 50];
        let r = wave_operator_apply(&h, &f, &o).unwrap();
        assert!(r.trace[49].decrement < 0.05 * r.trace[0].decrement);
        for c in &r.checkpoints {
            assert!(c.isometry_defect < 1e-10);
            let d = r.trace.get(c.n).map_or(f64::NAN, |t| t.decrement);
            if c.n < 50 {
                assert!((c.intertwining_defect.unwrap() - d).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn boundary_contamination_detected() {
        let h = hamiltonian(15, 0.5);
        let f = packet(&h);
        let err = wave_operator_apply(&h, &f, &ScatteringOptions::new(40, 16)).unwrap_err();
        assert!(matches!(err, Error::BoundaryContamination { .. }));
    }

    #[test]
    fn unnormalized_input_rejected() {
        let h = hamiltonian(10, 0.5);
        let mut f = packet(&h);
        f.values[10] *= 2.0;
        assert!(matches!(
            wave_operator_apply(&h, &f, &ScatteringOptions::new(2, 4)),
            Err(Error::NonNormalizedInput(_))
        ));
    }

    #[test]
    fn bound_state_is_outside_the_range() {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 12).unwrap();
        let mut p = vec![0.0; lat.len()];
        p[12] = 5.0;
        let spec = FieldSpec {
            period: 1.0,
            p: Some(StaticElectricPotential::Sites(p)),
            v: ElectricField::Separable {
                amplitude: 0.2,
                spatial: Spatial::Site { cell: vec![0], label: 0 },
                temporal: Temporal::Cos { harmonic: 1, phase: 0.0 },
                envelope: Default::default(),
            },
            ..Default::default()
        };
        let h = DrivenHamiltonian::new(&lat, spec.bind(&lat, 1.0).unwrap())
            .unwrap()
            .with_comparison(Comparison::Free);
        let (_, g) = most_localized_floquet_state(&h, 128, &StepOptions::default()).unwrap();
        let mut o = ScatteringOptions::new(20, 128);
        o.boundary_cap = 1.0;
        let r = adjoint_wave_probe(&h, &g, &o).unwrap();
        assert!(r.final_decrement > 0.1 && !r.converged);
    }

    #[test]
    fn spectral_filter_drops_the_bound_state() {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 20).unwrap();
        let mut p = vec![0.0; lat.len()];
        p[20] = 5.0;
        let spec = FieldSpec {
            p: Some(StaticElectricPotential::Sites(p)),
            ..Default::default()
        };
        let h = DrivenHamiltonian::new(&lat, spec.bind(&lat, 1.0).unwrap()).unwrap();
        let f = StateVector::<f64>::delta(lat.len(), 20);
        let (g, name) = apply_pac(&h, &PacFilter::Auto, &f.values).unwrap();
        assert!(name.starts_with("spectral"));
        // the bound state carries most of the weight at the defect
        assert!(to_f64(norm2(&g)) < 0.5);
    }

    #[test]
    fn time_decaying_zero_field_is_identity() {
        let h = hamiltonian(40, 0.0);
        let f = packet(&h);
        let r = time_decaying_scenario(&h, &f, 0.5, &ScatteringOptions::new(6, 8)).unwrap();
        assert!(!r.guaranteed);
        assert!(r.forward.final_decrement < 1e-12 && r.adjoint.final_decrement < 1e-12);
        assert!(r.forward.checkpoints[0].isometry_defect < 1e-12);
    }

    #[test]
    fn trace_csv_has_one_row_per_period() {
        let h = hamiltonian(30, 0.3);
        let r = wave_operator_apply(&h, &packet(&h), &ScatteringOptions::new(4, 8)).unwrap();
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }
}
