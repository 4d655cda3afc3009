//! Potential specification documents and their binding to a truncation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ElectricDrive, ElectricField, MagneticDrive, MagneticField, PrimitiveMethod, PrimitiveQ, Weights,
};
use crate::error::{Error, Result};
use crate::graph::{FiniteLattice, PeriodicGraph};
use crate::spectral::{StaticElectricPotential, StaticMagneticPotential};

/// Potential specification document (TOML).
///
/// ```toml
/// period = 6.283185307179586
///
/// [static]
/// electric = { periodic = [0.0] }
/// magnetic = { periodic = [0.0] }
///
/// [v]
/// family = "separable"
/// amplitude = 0.5
/// spatial = { kind = "power_decay", a = 2.0 }
/// temporal = { kind = "cos", harmonic = 1 }
///
/// [q]
/// family = "site_oscillatory"
/// amplitude = 0.3
///
/// [beta]
/// family = "zero"
///
/// [weights]
/// b = { scale = 4.0, exponent = 2.0 }
/// a = 2.0
/// ```
///
/// Every section is optional. Several documents may be combined as long as
/// no section is given twice.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpecDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, rename = "static", skip_serializing_if = "Option::is_none")]
    pub static_part: Option<StaticPart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<MagneticField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<ElectricField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<ElectricField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticPart {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electric: Option<StaticElectricPotential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<StaticMagneticPotential>,
}

impl PotentialSpecDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.context(format!("potential spec {}", path.display())))
    }
}

/// Every field of a driven Hamiltonian `h(t) = Δ_{α+δ(t)} + 𝔭 + v(t) + q(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub period: f64,
    pub alpha: Option<StaticMagneticPotential>,
    pub p: Option<StaticElectricPotential>,
    pub delta: MagneticField,
    pub v: ElectricField,
    pub q: ElectricField,
    pub weights: Weights,
}

pub const DEFAULT_PERIOD: f64 = 2.0 * std::f64::consts::PI;

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            period: DEFAULT_PERIOD,
            alpha: None,
            p: None,
            delta: MagneticField::Zero,
            v: ElectricField::Zero,
            q: ElectricField::Zero,
            weights: Weights::default(),
        }
    }
}

fn put<T>(slot: &mut Option<T>, value: Option<T>, name: &str) -> Result<()> {
    if let Some(v) = value {
        if slot.is_some() {
            return Err(Error::ConfigInvalid(format!("potential section `{name}` given twice")));
        }
        *slot = Some(v);
    }
    Ok(())
}

impl FieldSpec {
    /// Combines documents; a section may appear in at most one of them.
    pub fn from_documents(docs: &[PotentialSpecDocument]) -> Result<Self> {
        let (mut period, mut electric, mut magnetic, mut beta, mut v, mut q, mut weights) =
            (None, None, None, None, None, None, None);
        for d in docs.iter().cloned() {
            put(&mut period, d.period, "period")?;
            if let Some(s) = d.static_part {
                put(&mut electric, s.electric, "static.electric")?;
                put(&mut magnetic, s.magnetic, "static.magnetic")?;
            }
            put(&mut beta, d.beta, "beta")?;
            put(&mut v, d.v, "v")?;
            put(&mut q, d.q, "q")?;
            put(&mut weights, d.weights, "weights")?;
        }
        let spec = Self {
            period: period.unwrap_or(DEFAULT_PERIOD),
            alpha: magnetic,
            p: electric,
            delta: beta.unwrap_or_default(),
            v: v.unwrap_or_default(),
            q: q.unwrap_or_default(),
            weights: weights.unwrap_or_default(),
        };
        let driven = spec.delta != MagneticField::Zero || spec.v != ElectricField::Zero || spec.q != ElectricField::Zero;
        if driven && period.is_none() {
            return Err(Error::ConfigInvalid("time-dependent potentials need `period`".into()));
        }
        if !(spec.period.is_finite() && spec.period > 0.0) {
            return Err(Error::ConfigInvalid(format!("period must be positive, got {}", spec.period)));
        }
        Ok(spec)
    }

    pub fn alpha_or_zero(&self, g: &PeriodicGraph) -> StaticMagneticPotential {
        self.alpha.clone().unwrap_or_else(|| StaticMagneticPotential::zero(g))
    }

    pub fn p_or_zero(&self, g: &PeriodicGraph) -> StaticElectricPotential {
        self.p.clone().unwrap_or_else(|| StaticElectricPotential::zero(g))
    }

    /// Binds every field to `lat`. `horizon` bounds the times at which
    /// aperiodic primitives are tabulated.
    pub fn bind(&self, lat: &FiniteLattice, horizon: f64) -> Result<BoundFields> {
        let g = lat.graph();
        let alpha_spec = self.alpha_or_zero(g);
        let alpha = alpha_spec.on_lattice(lat)?;
        let alpha_decay = match &alpha_spec {
            StaticMagneticPotential::Periodic(v) if v.iter().any(|&a| a != 0.0) => Some(0.0),
            _ => Some(f64::INFINITY),
        };
        let p = self.p_or_zero(g).on_lattice(lat)?;
        let q = ElectricDrive::bind(&self.q, lat, self.period)?;
        let big_q = PrimitiveQ::build(&q, PrimitiveMethod::Auto, horizon)?;
        Ok(BoundFields {
            period: self.period,
            alpha,
            alpha_decay,
            p,
            delta: MagneticDrive::bind(&self.delta, lat, self.period)?,
            v: ElectricDrive::bind(&self.v, lat, self.period)?,
            q,
            big_q,
        })
    }
}

/// Fields bound to a truncation.
#[derive(Clone, Debug)]
pub struct BoundFields {
    pub period: f64,
    /// α per lattice edge.
    pub alpha: Vec<f64>,
    pub alpha_decay: Option<f64>,
    /// 𝔭 per vertex.
    pub p: Vec<f64>,
    pub delta: MagneticDrive,
    pub v: ElectricDrive,
    pub q: ElectricDrive,
    /// Primitive of q, not checked for `Q(τ) = 0`.
    pub big_q: PrimitiveQ,
}

impl BoundFields {
    pub fn is_periodic(&self) -> bool {
        self.delta.is_periodic() && self.v.is_periodic() && self.q.is_periodic()
    }

    /// `β(e, t) = α(e) + δ(e, t)` per lattice edge.
    pub fn beta(&self, t: f64) -> Vec<f64> {
        let mut d = self.delta.sample(t);
        for (d, a) in d.iter_mut().zip(&self.alpha) {
            *d += a;
        }
        d
    }

    /// Decay exponent of β, combining α and δ.
    pub fn beta_decay(&self) -> Option<f64> {
        match (self.alpha_decay, self.delta.decay_exponent()) {
            (Some(a), Some(d)) => Some(a.min(d)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{Spatial, Temporal};

    const DOC: &str = r#"
period = 1.0

[static]
electric = { periodic = [0.25] }

[v]
family = "separable"
amplitude = 0.5
spatial = { kind = "power_decay", a = 2.0 }
temporal = { kind = "cos", harmonic = 1 }

[weights]
b = { scale = 1.0, exponent = 2.0 }
a = 2.0
"#;

    #[test]
    fn parses_and_binds() {
        let doc = PotentialSpecDocument::parse(DOC).unwrap();
        let spec = FieldSpec::from_documents(&[doc]).unwrap();
        assert_eq!(
            spec.v,
            ElectricField::Separable {
                amplitude: 0.5,
                spatial: Spatial::PowerDecay { a: 2.0 },
                temporal: Temporal::Cos { harmonic: 1, phase: 0.0 },
                envelope: Default::default(),
            }
        );
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 3).unwrap();
        let b = spec.bind(&lat, 1.0).unwrap();
        assert_eq!(b.p, vec![0.25; 7]);
        assert!(b.is_periodic());
        assert!((b.v.value(3, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_family_and_keys() {
        assert!(PotentialSpecDocument::parse("[v]\nfamily = \"gaussian_blob\"\n").is_err());
        assert!(PotentialSpecDocument::parse("periodd = 1.0\n").is_err());
    }

    #[test]
    fn duplicate_sections_conflict() {
        let a = PotentialSpecDocument::parse("period = 1.0\n").unwrap();
        assert!(FieldSpec::from_documents(&[a.clone(), a]).is_err());
    }

    #[test]
    fn driven_fields_need_a_period() {
        let d = PotentialSpecDocument::parse("[q]\nfamily = \"site_oscillatory\"\namplitude = 1.0\n").unwrap();
        assert!(matches!(FieldSpec::from_documents(&[d]), Err(Error::ConfigInvalid(_))));
    }
}
