//! Time-dependent fields: magnetic potential β(e,t) = α(e) + δ(e,t), electric
//! potentials v and q, the primitive Q of q, and the magnetic difference
//! F(t) = Δ_β − Δ_α.
//!
//! Fields are described by a small closed set of families (serde enums) and
//! bound to a [`FiniteLattice`] before evaluation, which precomputes spatial
//! profiles.

mod conditions;
mod spec;

pub use conditions::{check_condition, CheckOptions, ClauseReport, ConditionReport, Verdict, WeightFamily, Weights, CONDITIONS};
pub use spec::{BoundFields, FieldSpec, PotentialSpecDocument, StaticPart, DEFAULT_PERIOD};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FiniteLattice;
use crate::linalg::HermitianOperator;
use crate::scalar::{cis, lit, Real, C};
use crate::spectral::HoppingPattern;

/// Time profile of a separable field. Harmonics are multiples of `ω = 2π/τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Temporal {
    #[default]
    Constant,
    Cos {
        #[serde(default = "one_u32")]
        harmonic: u32,
        #[serde(default)]
        phase: f64,
    },
    Sin {
        #[serde(default = "one_u32")]
        harmonic: u32,
        #[serde(default)]
        phase: f64,
    },
}

fn one_u32() -> u32 {
    1
}


/// `sin(x)/x`, continuous at 0.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl Temporal {
    fn eval(&self, omega: f64, t: f64) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::Cos { harmonic, phase } => (harmonic as f64 * omega * t + phase).cos(),
            Self::Sin { harmonic, phase } => (harmonic as f64 * omega * t + phase).sin(),
        }
    }

    /// Mean over `[t0, t1]`.
    fn average(&self, omega: f64, t0: f64, t1: f64) -> f64 {
        let tm = 0.5 * (t0 + t1);
        match *self {
            Self::Constant => 1.0,
            Self::Cos { harmonic, .. } | Self::Sin { harmonic, .. } => {
                let w = harmonic as f64 * omega;
                self.eval(omega, tm) * sinc(0.5 * w * (t1 - t0))
            }
        }
    }

    /// `∫_0^t`.
    fn primitive(&self, omega: f64, t: f64) -> f64 {
        match *self {
            Self::Constant => t,
            Self::Cos { harmonic: 0, phase } => phase.cos() * t,
            Self::Sin { harmonic: 0, phase } => phase.sin() * t,
            Self::Cos { harmonic, phase } => {
                let w = harmonic as f64 * omega;
                ((w * t + phase).sin() - phase.sin()) / w
            }
            Self::Sin { harmonic, phase } => {
                let w = harmonic as f64 * omega;
                (phase.cos() - (w * t + phase).cos()) / w
            }
        }
    }

    fn mean_zero(&self) -> bool {
        match *self {
            Self::Constant => false,
            Self::Cos { harmonic, phase } => harmonic > 0 || phase.cos() == 0.0,
            Self::Sin { harmonic, phase } => harmonic > 0 || phase.sin() == 0.0,
        }
    }
}

/// Decay envelope in time; any envelope other than `None` makes the field
/// aperiodic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Envelope {
    #[default]
    None,
    /// `(1 + t²)^{−s/2}`.
    Algebraic { s: f64 },
    /// `exp(−t²/(2 width²))`.
    Gaussian { width: f64 },
}


impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::None => 1.0,
            Self::Algebraic { s } => (1.0 + t * t).powf(-0.5 * s),
            Self::Gaussian { width } => (-t * t / (2.0 * width * width)).exp(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    /// Whether the envelope lies in `L²(R)`.
    pub fn square_integrable(&self) -> bool {
        match *self {
            Self::None => false,
            Self::Algebraic { s } => s > 0.5,
            Self::Gaussian { width } => width > 0.0,
        }
    }
}

/// Spatial profile on vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Spatial {
    Uniform,
    /// `(1 + |x|)^{−a}`.
    PowerDecay { a: f64 },
    /// `exp(−rate·|x|)`.
    Exponential { rate: f64 },
    /// Indicator of one vertex.
    Site {
        cell: Vec<i64>,
        #[serde(default)]
        label: usize,
    },
    /// One value per vertex of the truncation.
    Table { values: Vec<f64> },
}

impl Spatial {
    fn profile(&self, lat: &FiniteLattice) -> Result<Vec<f64>> {
        let n = lat.len();
        Ok(match self {
            Self::Uniform => vec![1.0; n],
            Self::PowerDecay { a } => (0..n).map(|x| (1.0 + lat.abs_position(x)).powf(-a)).collect(),
            Self::Exponential { rate } => (0..n).map(|x| (-rate * lat.abs_position(x)).exp()).collect(),
            Self::Site { cell, label } => {
                if cell.len() != lat.graph().dim() || *label >= lat.graph().cell_size() {
                    return Err(Error::PotentialShapeMismatch(format!("site {cell:?}/{label} is not a vertex")));
                }
                let x = lat
                    .index_of(cell, *label)
                    .ok_or_else(|| Error::PotentialShapeMismatch(format!("site {cell:?} lies outside the truncation")))?;
                let mut v = vec![0.0; n];
                v[x] = 1.0;
                v
            }
            Self::Table { values } => {
                if values.len() != n {
                    return Err(Error::PotentialShapeMismatch(format!(
                        "table has {} values, lattice has {n} vertices",
                        values.len()
                    )));
                }
                values.clone()
            }
        })
    }

    /// Exponent `e` with `|profile_x| ≤ C (1+|x|)^{−e}` on the infinite graph.
    fn decay(&self) -> Option<f64> {
        match self {
            Self::Uniform => Some(0.0),
            Self::PowerDecay { a } => Some(*a),
            Self::Exponential { rate } if *rate > 0.0 => Some(f64::INFINITY),
            Self::Exponential { .. } => Some(0.0),
            Self::Site { .. } | Self::Table { .. } => Some(f64::INFINITY),
        }
    }
}

/// Spatial profile on edges `e = (x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EdgeSpatial {
    Uniform,
    /// `(1+|x|)^{−a/2} (1+|y|)^{−a/2}`.
    PowerDecay { a: f64 },
    /// One value per truncation edge, in the orientation of its cell edge.
    Table { values: Vec<f64> },
}

impl EdgeSpatial {
    fn profile(&self, lat: &FiniteLattice) -> Result<Vec<f64>> {
        Ok(match self {
            Self::Uniform => vec![1.0; lat.edges().len()],
            Self::PowerDecay { a } => lat
                .edges()
                .iter()
                .map(|e| ((1.0 + lat.abs_position(e.x)) * (1.0 + lat.abs_position(e.y))).powf(-0.5 * a))
                .collect(),
            Self::Table { values } => {
                if values.len() != lat.edges().len() {
                    return Err(Error::PotentialShapeMismatch(format!(
                        "edge table has {} values, lattice has {} edges",
                        values.len(),
                        lat.edges().len()
                    )));
                }
                values.clone()
            }
        })
    }

    fn decay(&self) -> Option<f64> {
        match self {
            Self::Uniform => Some(0.0),
            Self::PowerDecay { a } => Some(*a),
            Self::Table { .. } => Some(f64::INFINITY),
        }
    }
}

/// Electric (vertex) field families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ElectricField {
    #[default]
    Zero,
    /// `A · s(x) · T(t) · w(t)`.
    Separable {
        amplitude: f64,
        spatial: Spatial,
        #[serde(default)]
        temporal: Temporal,
        #[serde(default)]
        envelope: Envelope,
    },
    /// `A w(t) / (1 + |x + sin(ωt) e₁|^a)`: a bump oscillating along the
    /// first axis.
    MovingBump {
        amplitude: f64,
        a: f64,
        #[serde(default)]
        envelope: Envelope,
    },
    /// `A cos(c_x t^γ)` with `c_x = max(1, |x|^m)`; `m` defaults to `2d`.
    SiteOscillatory {
        amplitude: f64,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default = "one_f64")]
        gamma: f64,
    },
}

fn one_f64() -> f64 {
    1.0
}


/// Magnetic (edge) field families; values are for the cell-edge orientation
/// and negate under reversal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum MagneticField {
    #[default]
    Zero,
    Separable {
        amplitude: f64,
        spatial: EdgeSpatial,
        #[serde(default)]
        temporal: Temporal,
        #[serde(default)]
        envelope: Envelope,
    },
}


#[derive(Clone, Debug)]
enum ElectricKind {
    Zero,
    Separable {
        profile: Vec<f64>,
        temporal: Temporal,
        envelope: Envelope,
    },
    MovingBump {
        amplitude: f64,
        a: f64,
        /// first coordinate and squared norm of the remaining ones
        coords: Vec<(f64, f64)>,
        envelope: Envelope,
    },
    SiteOscillatory {
        amplitude: f64,
        freq: Vec<f64>,
        gamma: f64,
    },
}

/// Electric field bound to a truncation.
#[derive(Clone, Debug)]
pub struct ElectricDrive {
    kind: ElectricKind,
    n: usize,
    tau: f64,
    decay: Option<f64>,
    primitive_decay: Option<f64>,
    sup: f64,
}

impl ElectricDrive {
    pub fn bind(field: &ElectricField, lat: &FiniteLattice, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let n = lat.len();
        let (kind, decay, primitive_decay, sup) = match field {
            ElectricField::Zero => (ElectricKind::Zero, Some(f64::INFINITY), Some(f64::INFINITY), 0.0),
            ElectricField::Separable {
                amplitude,
                spatial,
                temporal,
                envelope,
            } => {
                let profile: Vec<f64> = spatial.profile(lat)?.into_iter().map(|s| amplitude * s).collect();
                let sup = profile.iter().fold(0.0f64, |m, s| m.max(s.abs()));
                (
                    ElectricKind::Separable {
                        profile,
                        temporal: temporal.clone(),
                        envelope: envelope.clone(),
                    },
                    spatial.decay(),
                    spatial.decay(),
                    sup,
                )
            }
            ElectricField::MovingBump { amplitude, a, envelope } => {
                if *a <= 0.0 {
                    return Err(Error::MalformedSpec("moving bump needs a > 0".into()));
                }
                let coords = (0..n)
                    .map(|x| {
                        let p = lat.position(x);
                        (p[0], p[1..].iter().map(|c| c * c).sum())
                    })
                    .collect();
                (
                    ElectricKind::MovingBump {
                        amplitude: *amplitude,
                        a: *a,
                        coords,
                        envelope: envelope.clone(),
                    },
                    Some(*a),
                    Some(*a),
                    amplitude.abs(),
                )
            }
            ElectricField::SiteOscillatory {
                amplitude,
                exponent,
                gamma,
            } => {
                let m = exponent.unwrap_or(2.0 * lat.graph().dim() as f64);
                if *gamma <= 0.0 {
                    return Err(Error::MalformedSpec("site-oscillatory field needs γ > 0".into()));
                }
                let freq = (0..n).map(|x| lat.abs_position(x).powf(m).max(1.0)).collect();
                (
                    ElectricKind::SiteOscillatory {
                        amplitude: *amplitude,
                        freq,
                        gamma: *gamma,
                    },
                    Some(0.0),
                    Some(m),
                    amplitude.abs(),
                )
            }
        };
        Ok(Self {
            kind,
            n,
            tau,
            decay,
            primitive_decay,
            sup,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn period(&self) -> f64 {
        self.tau
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ElectricKind::Zero)
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.tau
    }

    /// Whether the field is τ-periodic by construction.
    pub fn is_periodic(&self) -> bool {
        match &self.kind {
            ElectricKind::Zero => true,
            ElectricKind::Separable { envelope, .. } | ElectricKind::MovingBump { envelope, .. } => envelope.is_none(),
            ElectricKind::SiteOscillatory { freq, gamma, .. } => {
                // cos(c t) has period τ iff cτ/2π is an integer
                *gamma == 1.0
                    && freq.iter().all(|c| {
                        let r = c * self.tau / (2.0 * PI);
                        (r - r.round()).abs() <= 1e-9 * r.max(1.0)
                    })
            }
        }
    }

    /// Upper bound for `sup_{x,t} |value|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// `e` with `|value_x(t)| ≤ C (1+|x|)^{−e}` for all vertices of the
    /// infinite graph.
    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay
    }

    /// The same for the primitive `∫_0^t value`, when the family is mean-zero.
    pub fn primitive_decay_exponent(&self) -> Option<f64> {
        self.primitive_decay
    }

    pub fn value(&self, x: usize, t: f64) -> f64 {
        let w = self.omega();
        match &self.kind {
            ElectricKind::Zero => 0.0,
            ElectricKind::Separable {
                profile,
                temporal,
                envelope,
            } => profile[x] * temporal.eval(w, t) * envelope.eval(t),
            ElectricKind::MovingBump {
                amplitude,
                a,
                coords,
                envelope,
            } => {
                let (x1, rest) = coords[x];
                let s = x1 + (w * t).sin();
                amplitude * envelope.eval(t) / (1.0 + (s * s + rest).sqrt().powf(*a))
            }
            ElectricKind::SiteOscillatory { amplitude, freq, gamma } => amplitude * (freq[x] * pow_signed(t, *gamma)).cos(),
        }
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        match &self.kind {
            ElectricKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ElectricKind::Separable {
                profile,
                temporal,
                envelope,
            } => {
                let s = temporal.eval(self.omega(), t) * envelope.eval(t);
                for (o, p) in out.iter_mut().zip(profile) {
                    *o = p * s;
                }
            }
            _ => {
                for (x, o) in out.iter_mut().enumerate() {
                    *o = self.value(x, t);
                }
            }
        }
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        self.sample_into(t, &mut v);
        v
    }

    /// Mean of the field over `[t0, t1]`: exact for families with a closed
    /// form, 3-point Gauss–Legendre otherwise.
    pub fn step_average_into(&self, t0: f64, t1: f64, out: &mut [f64]) {
        let w = self.omega();
        match &self.kind {
            ElectricKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ElectricKind::Separable {
                profile,
                temporal,
                envelope,
            } if envelope.is_none() => {
                let s = temporal.average(w, t0, t1);
                for (o, p) in out.iter_mut().zip(profile) {
                    *o = p * s;
                }
            }
            ElectricKind::SiteOscillatory { amplitude, freq, gamma } if *gamma == 1.0 => {
                let (tm, h) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
                for (o, c) in out.iter_mut().zip(freq) {
                    *o = amplitude * (c * tm).cos() * sinc(c * h);
                }
            }
            _ => {
                let (tm, h) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
                let r = (0.6f64).sqrt() * h;
                let mut a = vec![0.0; self.n];
                let mut b = vec![0.0; self.n];
                self.sample_into(tm - r, &mut a);
                self.sample_into(tm + r, &mut b);
                self.sample_into(tm, out);
                for ((o, a), b) in out.iter_mut().zip(&a).zip(&b) {
                    *o = (5.0 * (a + b) + 8.0 * *o) / 18.0;
                }
            }
        }
    }

    /// Closed-form `∫_0^t value_x`, when the family has one.
    pub fn closed_primitive(&self, x: usize, t: f64) -> Option<f64> {
        match &self.kind {
            ElectricKind::Zero => Some(0.0),
            ElectricKind::Separable {
                profile,
                temporal,
                envelope,
            } if envelope.is_none() => Some(profile[x] * temporal.primitive(self.omega(), t)),
            ElectricKind::SiteOscillatory { amplitude, freq, gamma } if *gamma == 1.0 => {
                Some(amplitude * (freq[x] * t).sin() / freq[x])
            }
            _ => None,
        }
    }

    pub fn has_closed_primitive(&self) -> bool {
        match &self.kind {
            ElectricKind::Zero => true,
            ElectricKind::Separable { envelope, .. } => envelope.is_none(),
            ElectricKind::MovingBump { .. } => false,
            ElectricKind::SiteOscillatory { gamma, .. } => *gamma == 1.0,
        }
    }

    /// Whether the primitive is expected to vanish at τ.
    fn declared_mean_zero(&self) -> bool {
        match &self.kind {
            ElectricKind::Zero => true,
            ElectricKind::Separable { temporal, envelope, .. } => envelope.is_none() && temporal.mean_zero(),
            ElectricKind::MovingBump { .. } => false,
            ElectricKind::SiteOscillatory { .. } => self.is_periodic(),
        }
    }
}

fn pow_signed(t: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        t
    } else {
        t.signum() * t.abs().powf(gamma)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::MalformedSpec(format!("period τ must be positive, got {tau}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum MagneticKind {
    Zero,
    Separable {
        profile: Vec<f64>,
        temporal: Temporal,
        envelope: Envelope,
    },
}

/// Magnetic field δ bound to a truncation, one value per lattice edge.
#[derive(Clone, Debug)]
pub struct MagneticDrive {
    kind: MagneticKind,
    n_edges: usize,
    tau: f64,
    decay: Option<f64>,
}

impl MagneticDrive {
    pub fn bind(field: &MagneticField, lat: &FiniteLattice, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let (kind, decay) = match field {
            MagneticField::Zero => (MagneticKind::Zero, Some(f64::INFINITY)),
            MagneticField::Separable {
                amplitude,
                spatial,
                temporal,
                envelope,
            } => (
                MagneticKind::Separable {
                    profile: spatial.profile(lat)?.into_iter().map(|s| amplitude * s).collect(),
                    temporal: temporal.clone(),
                    envelope: envelope.clone(),
                },
                spatial.decay(),
            ),
        };
        Ok(Self {
            kind,
            n_edges: lat.edges().len(),
            tau,
            decay,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, MagneticKind::Zero)
    }

    pub fn is_periodic(&self) -> bool {
        match &self.kind {
            MagneticKind::Zero => true,
            MagneticKind::Separable { envelope, .. } => envelope.is_none(),
        }
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay
    }

    /// Value on edge `e` in its cell-edge orientation.
    pub fn value(&self, e: usize, t: f64) -> f64 {
        match &self.kind {
            MagneticKind::Zero => 0.0,
            MagneticKind::Separable {
                profile,
                temporal,
                envelope,
            } => profile[e] * temporal.eval(2.0 * PI / self.tau, t) * envelope.eval(t),
        }
    }

    /// Value on the reversed edge.
    pub fn value_reversed(&self, e: usize, t: f64) -> f64 {
        -self.value(e, t)
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        match &self.kind {
            MagneticKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            MagneticKind::Separable {
                profile,
                temporal,
                envelope,
            } => {
                let s = temporal.eval(2.0 * PI / self.tau, t) * envelope.eval(t);
                for (o, p) in out.iter_mut().zip(profile) {
                    *o = p * s;
                }
            }
        }
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_edges];
        self.sample_into(t, &mut v);
        v
    }
}

/// How [`primitive_of`] integrates q.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PrimitiveMethod {
    /// Closed form when the family registers one, quadrature otherwise.
    Auto,
    /// Cumulative composite Simpson with this many panels over the horizon.
    Quadrature { panels: usize },
}

pub const DEFAULT_Q_PANELS: usize = 4096;

/// `Q_x(t) = ∫_0^t q_x(s) ds` per vertex.
#[derive(Clone, Debug)]
pub struct PrimitiveQ {
    q: ElectricDrive,
    table: Option<QTable>,
    periodic: bool,
}

#[derive(Clone, Debug)]
struct QTable {
    h: f64,
    /// node-major: `values[i * n + x] = Q_x(i h)`
    values: Vec<f64>,
    nodes: usize,
}

impl PrimitiveQ {
    /// Builds the primitive without checking `Q(τ) = 0`. `horizon` bounds the
    /// times at which an aperiodic field is evaluated.
    pub fn build(q: &ElectricDrive, method: PrimitiveMethod, horizon: f64) -> Result<Self> {
        let periodic = q.is_periodic();
        let use_table = match method {
            PrimitiveMethod::Auto => !q.has_closed_primitive(),
            PrimitiveMethod::Quadrature { .. } => true,
        };
        let table = if use_table {
            let panels = match method {
                PrimitiveMethod::Quadrature { panels } => panels,
                PrimitiveMethod::Auto => DEFAULT_Q_PANELS,
            };
            if panels == 0 || panels > 1 << 22 {
                return Err(Error::QuadratureBudgetExceeded(format!("{panels} panels requested for Q")));
            }
            let span = if periodic { q.period() } else { horizon.max(q.period()) };
            if !(span.is_finite() && span > 0.0) {
                return Err(Error::MalformedSpec(format!("primitive horizon must be positive, got {span}")));
            }
            let n = q.len();
            let h = span / panels as f64;
            let mut values = vec![0.0; (panels + 1) * n];
            let (mut a, mut m, mut b) = (q.sample(0.0), vec![0.0; n], vec![0.0; n]);
            for i in 0..panels {
                let t0 = i as f64 * h;
                q.sample_into(t0 + 0.5 * h, &mut m);
                q.sample_into(t0 + h, &mut b);
                for x in 0..n {
                    values[(i + 1) * n + x] = values[i * n + x] + h / 6.0 * (a[x] + 4.0 * m[x] + b[x]);
                }
                std::mem::swap(&mut a, &mut b);
            }
            Some(QTable {
                h,
                values,
                nodes: panels + 1,
            })
        } else {
            None
        };
        Ok(Self {
            q: q.clone(),
            table,
            periodic,
        })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.q.period()
    }

    pub fn field(&self) -> &ElectricDrive {
        &self.q
    }

    pub fn is_closed_form(&self) -> bool {
        self.table.is_none()
    }

    /// `tol_Q = 1e−10 · τ · ‖q‖_∞`.
    pub fn tolerance(&self) -> f64 {
        1e-10 * self.q.period() * self.q.sup_norm()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.q.len();
        match &self.table {
            None => {
                for (x, o) in out.iter_mut().enumerate() {
                    *o = self.q.closed_primitive(x, t).unwrap_or(0.0);
                }
            }
            Some(tab) => {
                let tau = self.q.period();
                let (t, base) = if self.periodic && (t < 0.0 || t > tau) {
                    let k = (t / tau).floor();
                    (t - k * tau, k)
                } else {
                    (t, 0.0)
                };
                let i = ((t / tab.h).floor().max(0.0) as usize).min(tab.nodes - 1);
                let t0 = i as f64 * tab.h;
                let row = &tab.values[i * n..(i + 1) * n];
                let dt = t - t0;
                if dt == 0.0 {
                    out.copy_from_slice(row);
                } else {
                    let (a, m, b) = (self.q.sample(t0), self.q.sample(t0 + 0.5 * dt), self.q.sample(t));
                    for x in 0..n {
                        out[x] = row[x] + dt / 6.0 * (a[x] + 4.0 * m[x] + b[x]);
                    }
                }
                if base != 0.0 {
                    // Q(τ) carries over for each completed period
                    let last = &tab.values[(tab.nodes - 1) * n..];
                    for (o, l) in out.iter_mut().zip(last) {
                        *o += base * l;
                    }
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.q.len()];
        self.eval_into(t, &mut v);
        v
    }

    /// Largest `|Q_x(τ)|` and its vertex.
    pub fn period_residual(&self) -> (usize, f64) {
        self.eval(self.q.period())
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bx, bv), (x, v)| if v.abs() > bv { (x, v.abs()) } else { (bx, bv) })
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        if self.q.declared_mean_zero() {
            self.q.primitive_decay_exponent()
        } else {
            None
        }
    }
}

/// Primitive of a periodic q, rejecting fields whose period mean is nonzero.
pub fn primitive_of(q: &ElectricDrive, method: PrimitiveMethod) -> Result<PrimitiveQ> {
    let p = PrimitiveQ::build(q, method, q.period())?;
    let (vertex, value) = p.period_residual();
    let tol = p.tolerance();
    if value > tol {
        return Err(Error::PeriodMeanNonzero { vertex, value, tol });
    }
    Ok(p)
}

/// `F(t) = Δ_β − Δ_α` and, given a weight, `F_b = b⁻¹ F b⁻¹`.
#[derive(Clone, Debug)]
pub struct MagneticDifference<T: Real> {
    pub f: HermitianOperator<T>,
    pub weighted: Option<WeightedDifference<T>>,
}

#[derive(Clone, Debug)]
pub struct WeightedDifference<T: Real> {
    pub fb: HermitianOperator<T>,
    pub norm: T,
    /// Whether `|δ(e,t)| ≤ b_x b_y` holds on every edge.
    pub premise_holds: bool,
    /// Whether `‖F_b‖ ≤ κ_+` holds.
    pub bound_holds: bool,
}

/// Assembles `F(t)` from `(F f)_x = −i Σ e^{iα + iδ/2} sin(δ/2) f_y`.
/// `b` holds the weight per vertex.
pub fn magnetic_difference<T: Real>(
    lat: &FiniteLattice,
    pattern: &HoppingPattern<T>,
    alpha: &[f64],
    delta: &MagneticDrive,
    t: f64,
    b: Option<&[f64]>,
) -> Result<MagneticDifference<T>> {
    if alpha.len() != lat.edges().len() || delta.n_edges() != lat.edges().len() {
        return Err(Error::PotentialShapeMismatch("magnetic data does not match the lattice edges".into()));
    }
    let d = delta.sample(t);
    let entry = |e: usize| -> C<T> {
        let ph = lit::<T>(alpha[e] + 0.5 * d[e]);
        cis(ph) * C::new(T::zero(), -lit::<T>((0.5 * d[e]).sin()))
    };
    let f = pattern.assemble_with(entry, |_| T::zero());
    let weighted = match b {
        None => None,
        Some(b) => {
            if b.len() != lat.len() {
                return Err(Error::PotentialShapeMismatch("weight length differs from lattice".into()));
            }
            if let Some(x) = b.iter().position(|&v| v == 0.0 || !v.is_finite()) {
                return Err(Error::WeightVanishes(x));
            }
            let edges = lat.edges();
            let fb = pattern.assemble_with(
                |e| entry(e) * lit::<T>(1.0 / (b[edges[e].x] * b[edges[e].y])),
                |_| T::zero(),
            );
            let norm = fb.norm()?;
            let premise_holds = edges.iter().zip(&d).all(|(e, dv)| dv.abs() <= b[e.x] * b[e.y]);
            let kappa = lit::<T>(lat.graph().kappa_plus() as f64);
            Some(WeightedDifference {
                bound_holds: norm <= kappa * (T::one() + lit(1e-12)),
                fb,
                norm,
                premise_holds,
            })
        }
    };
    Ok(MagneticDifference { f, weighted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PeriodicGraph;
    use crate::spectral::magnetic_laplacian;
    use crate::spectral::StaticMagneticPotential;
    use proptest::prelude::*;

    fn z1(l: usize) -> FiniteLattice {
        FiniteLattice::new(&PeriodicGraph::hypercubic(1), l).unwrap()
    }

    #[test]
    fn example_primitive_matches_formula() {
        let lat = z1(6);
        let q = ElectricDrive::bind(
            &ElectricField::SiteOscillatory {
                amplitude: 0.7,
                exponent: None,
                gamma: 1.0,
            },
            &lat,
            2.0 * PI,
        )
        .unwrap();
        assert!(q.is_periodic());
        let p = primitive_of(&q, PrimitiveMethod::Auto).unwrap();
        for t in [0.0, 0.4, 3.0, 5.9] {
            let got = p.eval(t);
            for x in 0..lat.len() {
                let r = lat.abs_position(x);
                let c = (r * r).max(1.0);
                assert!((got[x] - 0.7 * (c * t).sin() / c).abs() < 1e-15);
            }
        }
        assert_eq!(p.eval(0.0), vec![0.0; lat.len()]);
    }

    #[test]
    fn zero_field_has_zero_primitive() {
        let lat = z1(3);
        let q = ElectricDrive::bind(&ElectricField::Zero, &lat, 1.0).unwrap();
        let p = primitive_of(&q, PrimitiveMethod::Auto).unwrap();
        assert!(p.eval(0.37).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinusoidal_primitive_against_simpson() {
        let lat = z1(5);
        let tau = 1.7;
        let q = ElectricDrive::bind(
            &ElectricField::Separable {
                amplitude: 1.3,
                spatial: Spatial::PowerDecay { a: 2.0 },
                temporal: Temporal::Sin { harmonic: 1, phase: 0.0 },
                envelope: Envelope::None,
            },
            &lat,
            tau,
        )
        .unwrap();
        let exact = primitive_of(&q, PrimitiveMethod::Auto).unwrap();
        let quad = primitive_of(&q, PrimitiveMethod::Quadrature { panels: 512 }).unwrap();
        assert!(exact.is_closed_form() && !quad.is_closed_form());
        let w = 2.0 * PI / tau;
        for t in [0.0, 0.3, 0.85, 1.2, 1.7, 2.5] {
            let (a, b) = (exact.eval(t), quad.eval(t));
            for x in 0..lat.len() {
                let g = 1.3 * (1.0 + lat.abs_position(x)).powf(-2.0);
                let formula = (tau / (2.0 * PI)) * (1.0 - (w * t).cos()) * g;
                assert!((a[x] - formula).abs() < 1e-14);
                assert!((b[x] - formula).abs() < 1e-10, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let lat = z1(2);
        let q = ElectricDrive::bind(
            &ElectricField::Separable {
                amplitude: 1.0,
                spatial: Spatial::Uniform,
                temporal: Temporal::Constant,
                envelope: Envelope::None,
            },
            &lat,
            1.0,
        )
        .unwrap();
        assert!(matches!(primitive_of(&q, PrimitiveMethod::Auto), Err(Error::PeriodMeanNonzero { .. })));
    }

    #[test]
    fn step_average_matches_quadrature() {
        let lat = z1(4);
        for field in [
            ElectricField::SiteOscillatory {
                amplitude: 1.0,
                exponent: None,
                gamma: 1.0,
            },
            ElectricField::Separable {
                amplitude: 0.5,
                spatial: Spatial::Exponential { rate: 1.0 },
                temporal: Temporal::Cos { harmonic: 2, phase: 0.3 },
                envelope: Envelope::None,
            },
            ElectricField::MovingBump {
                amplitude: 1.0,
                a: 2.0,
                envelope: Envelope::None,
            },
        ] {
            let q = ElectricDrive::bind(&field, &lat, 2.0 * PI).unwrap();
            let (t0, t1) = (0.3, 0.42);
            let mut avg = vec![0.0; lat.len()];
            q.step_average_into(t0, t1, &mut avg);
            let m = 2000;
            for (x, a) in avg.iter().enumerate() {
                let h = (t1 - t0) / m as f64;
                let mut s = q.value(x, t0) + q.value(x, t1);
                for i in 1..m {
                    s += if i % 2 == 1 { 4.0 } else { 2.0 } * q.value(x, t0 + i as f64 * h);
                }
                let oracle = s * h / 3.0 / (t1 - t0);
                assert!((a - oracle).abs() < 1e-9, "{field:?} x={x}: {a} vs {oracle}");
            }
        }
    }

    #[test]
    fn periodic_fields_repeat() {
        let lat = z1(4);
        let q = ElectricDrive::bind(
            &ElectricField::MovingBump {
                amplitude: 1.0,
                a: 2.0,
                envelope: Envelope::None,
            },
            &lat,
            2.0 * PI,
        )
        .unwrap();
        for t in [0.1, 1.0, 4.0] {
            let (a, b) = (q.sample(t), q.sample(t + 2.0 * PI));
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn difference_vanishes_when_beta_equals_alpha() {
        let lat = z1(4);
        let pat = HoppingPattern::<f64>::new(&lat);
        let delta = MagneticDrive::bind(&MagneticField::Zero, &lat, 1.0).unwrap();
        let alpha = vec![0.3; lat.edges().len()];
        let d = magnetic_difference(&lat, &pat, &alpha, &delta, 0.2, None).unwrap();
        assert!(d.f.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn constant_shift_difference_norm() {
        // Δ_β − Δ_α has hopping −½(e^{iβ} − e^{iα}); for constant δ=ε its
        // norm is |sin(ε/2)| times the norm of the unit-modulus hopping part
        let lat = z1(20);
        let pat = HoppingPattern::<f64>::new(&lat);
        let eps = 0.4;
        let delta = MagneticDrive::bind(
            &MagneticField::Separable {
                amplitude: eps,
                spatial: EdgeSpatial::Uniform,
                temporal: Temporal::Constant,
                envelope: Envelope::None,
            },
            &lat,
            1.0,
        )
        .unwrap();
        let alpha = vec![0.0; lat.edges().len()];
        let d = magnetic_difference(&lat, &pat, &alpha, &delta, 0.0, None).unwrap();
        let hop = pat.assemble_with(|_| C::new(1.0, 0.0), |_| 0.0);
        let expected = (0.5 * eps).sin().abs() * hop.norm().unwrap();
        assert!((d.f.norm().unwrap() - expected).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sine_formula_equals_two_assemblies(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(2), 2).unwrap();
            let ne = lat.edges().len();
            let alpha: Vec<f64> = (0..ne).map(|_| rng.gen_range(-PI..PI)).collect();
            let dv: Vec<f64> = (0..ne).map(|_| rng.gen_range(-PI..PI)).collect();
            let delta = MagneticDrive::bind(
                &MagneticField::Separable { amplitude: 1.0, spatial: EdgeSpatial::Table { values: dv.clone() }, temporal: Temporal::Constant, envelope: Envelope::None },
                &lat, 1.0).unwrap();
            let pat = HoppingPattern::<f64>::new(&lat);
            let f = magnetic_difference(&lat, &pat, &alpha, &delta, 0.0, None).unwrap().f;
            let beta: Vec<f64> = alpha.iter().zip(&dv).map(|(a, d)| a + d).collect();
            let lb = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::Edges(beta)).unwrap();
            let la = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::Edges(alpha)).unwrap();
            prop_assert!(f.max_abs_diff(&lb.sub(&la)) <= 1e-12);
        }

        #[test]
        fn weighted_difference_is_bounded_by_kappa(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(2), 3).unwrap();
            let b: Vec<f64> = (0..lat.len()).map(|x| (1.0 + lat.abs_position(x)).powf(-0.75) * rng.gen_range(0.5..1.5)).collect();
            let dv: Vec<f64> = lat.edges().iter().map(|e| rng.gen_range(-1.0..1.0) * b[e.x] * b[e.y]).collect();
            let delta = MagneticDrive::bind(
                &MagneticField::Separable { amplitude: 1.0, spatial: EdgeSpatial::Table { values: dv }, temporal: Temporal::Constant, envelope: Envelope::None },
                &lat, 1.0).unwrap();
            let alpha: Vec<f64> = (0..lat.edges().len()).map(|_| rng.gen_range(-PI..PI)).collect();
            let pat = HoppingPattern::<f64>::new(&lat);
            let w = magnetic_difference(&lat, &pat, &alpha, &delta, 0.0, Some(&b)).unwrap().weighted.unwrap();
            prop_assert!(w.premise_holds);
            prop_assert!(w.bound_holds, "‖F_b‖ = {}", w.norm);
        }

        #[test]
        fn magnetic_field_is_antisymmetric(t in -10.0..10.0f64, amp in -2.0..2.0f64) {
            let lat = z1(3);
            let delta = MagneticDrive::bind(
                &MagneticField::Separable { amplitude: amp, spatial: EdgeSpatial::PowerDecay { a: 2.0 }, temporal: Temporal::Cos { harmonic: 1, phase: 0.2 }, envelope: Envelope::None },
                &lat, 1.5).unwrap();
            for e in 0..delta.n_edges() {
                prop_assert_eq!(delta.value_reversed(e, t), -delta.value(e, t));
                prop_assert!((delta.value(e, t + 1.5) - delta.value(e, t)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_weight_is_rejected() {
        let lat = z1(2);
        let pat = HoppingPattern::<f64>::new(&lat);
        let delta = MagneticDrive::bind(&MagneticField::Zero, &lat, 1.0).unwrap();
        let mut b = vec![1.0; lat.len()];
        b[2] = 0.0;
        let r = magnetic_difference(&lat, &pat, &vec![0.0; lat.edges().len()], &delta, 0.0, Some(&b));
        assert!(matches!(r, Err(Error::WeightVanishes(2))));
    }
}
