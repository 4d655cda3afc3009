//! Batch experiments: TOML configs, per-kind runners and on-disk artifacts.
//!
//! ```toml
//! schema = 1
//! kind = "scattering"
//! graph = "graphs/z1.toml"          # relative to this file
//! potentials = ["potentials/vza.toml"]
//! radius = 400
//! seed = 7
//!
//! [scattering]
//! n_periods = 100
//! steps_per_period = 256
//! ```
//!
//! Every kind has its own section with defaults; only the section matching
//! `kind` is read. Outputs are deterministic for a fixed config and seed;
//! only `manifest.json` carries timings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driving::{FieldSpec, PotentialSpecDocument, PrimitiveMethod};
use crate::error::{Error, Result};
use crate::evolution::{
    circle_distance, dyson_bound, dyson_propagator, order_for_tail, propagator_matrix, quasienergy_spectrum,
    Comparison, DenseHamiltonian, DrivenHamiltonian, Hamiltonian, StepOptions, StepSequence,
};
use crate::gauge::{convergence_slope, gauge_equivalence_check, gauge_transform, GaugeEquivalence};
use crate::graph::{FiniteLattice, GraphSpecDocument, PeriodicGraph, StateVector};
use crate::howland::{free_resolvent_kernel, free_resolvent_modes, omega_shift_defect, sample_distance, sample_norm, HowlandVector};
use crate::linalg::{hermitian_eigen, op_norm};
use crate::scalar::C;
use crate::scattering::{
    adjoint_wave_probe, approximant_distance, most_localized_floquet_state, time_decaying_scenario,
    wave_operator_apply, weighted_resolvent_sample, LanczosOptions, PacFilter, ResolventSample, ResolventWeight,
    ScatteringOptions, ScatteringReport, TimeDecayingReport,
};
use crate::spectral::{band_structure, magnetic_laplacian, BandStructure, StaticMagneticPotential};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "MAGFLOQUET_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bands,
    Quasienergy,
    GaugeCheck,
    Scattering,
    TimeDecaying,
    ResolventSample,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::Bands,
        Self::Quasienergy,
        Self::GaugeCheck,
        Self::Scattering,
        Self::TimeDecaying,
        Self::ResolventSample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bands => "bands",
            Self::Quasienergy => "quasienergy",
            Self::GaugeCheck => "gauge-check",
            Self::Scattering => "scattering",
            Self::TimeDecaying => "time-decaying",
            Self::ResolventSample => "resolvent-sample",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("kind: unknown experiment kind `{s}`")))
    }

    fn needs_graph(self) -> bool {
        self != Self::ResolventSample
    }
}

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

fn default_radius() -> usize {
    20
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub kind: ExperimentKind,
    /// Defaults to the config file stem.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default)]
    pub potentials: Vec<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Truncation radius `L`.
    #[serde(default = "default_radius")]
    pub radius: usize,
    #[serde(default)]
    pub stepping: StepOptions,
    #[serde(default)]
    pub bands: BandsKnobs,
    #[serde(default)]
    pub quasienergy: QuasienergyKnobs,
    #[serde(default)]
    pub gauge: GaugeKnobs,
    #[serde(default)]
    pub scattering: ScatteringKnobs,
    #[serde(default)]
    pub time_decaying: TimeDecayingKnobs,
    #[serde(default)]
    pub resolvent: ResolventKnobs,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsKnobs {
    pub n_k: usize,
    pub flat_tol: f64,
    /// Expected spectrum as closed intervals; checked when present.
    pub expected_spectrum: Option<Vec<(f64, f64)>>,
    pub spectrum_tol: f64,
    /// Random static magnetic potentials on the truncation whose spectra are
    /// checked against `[0, κ₊]`.
    pub random_alpha_trials: usize,
    pub bound_tol: f64,
}

impl Default for BandsKnobs {
    fn default() -> Self {
        Self {
            n_k: 64,
            flat_tol: crate::spectral::DEFAULT_FLAT_TOL,
            expected_spectrum: None,
            spectrum_tol: 1e-12,
            random_alpha_trials: 0,
            bound_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasienergyKnobs {
    /// Steps per period.
    pub n_steps: usize,
    /// Operator-norm bound on `U*U − I` for the monodromy.
    pub unitarity_tol: f64,
    /// Checks `U(τ, r)U(r, 0) = U(τ, 0)` at grid-aligned `r` and the period shift.
    pub group_law: bool,
    pub group_law_tol: f64,
    /// For autonomous Hamiltonians, distance on the circle between folded
    /// eigenphases and directly computed eigenvalues.
    pub fold_tol: f64,
    pub howland: Option<HowlandKnobs>,
    pub dyson: Option<DysonKnobs>,
}

impl Default for QuasienergyKnobs {
    fn default() -> Self {
        Self {
            n_steps: 256,
            unitarity_tol: 1e-10,
            group_law: true,
            group_law_tol: 1e-8,
            fold_tol: 1e-9,
            howland: None,
            dyson: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HowlandKnobs {
    /// Sizes of the leading principal blocks of the comparison operator used as `h_0`.
    pub sites: Vec<usize>,
    pub lambda: (f64, f64),
    pub samples: usize,
    pub n_max: usize,
    /// Highest Fourier mode of the random test functions.
    pub band: i64,
    pub kernel_tol: f64,
    pub shift_tol: f64,
}

impl Default for HowlandKnobs {
    fn default() -> Self {
        Self {
            sites: vec![1, 8],
            lambda: (0.3, 0.5),
            samples: 128,
            n_max: 64,
            band: 40,
            kernel_tol: 1e-6,
            shift_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DysonKnobs {
    pub systems: usize,
    pub max_dim: usize,
    pub span: f64,
    pub nodes: usize,
    pub tail: f64,
    pub steps: usize,
    pub tol: f64,
}

impl Default for DysonKnobs {
    fn default() -> Self {
        Self {
            systems: 50,
            max_dim: 16,
            span: 1.0,
            nodes: 201,
            tail: 1e-8,
            steps: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeKnobs {
    pub n_steps: usize,
    /// Radians.
    pub eigenphase_tol: f64,
    /// Step counts for the refinement ladder; empty disables it.
    pub ladder: Vec<usize>,
    pub expected_slope: f64,
    pub slope_tol: f64,
}

impl Default for GaugeKnobs {
    fn default() -> Self {
        Self {
            n_steps: 4096,
            eigenphase_tol: 1e-7,
            ladder: vec![64, 128, 256],
            expected_slope: -2.0,
            slope_tol: 0.3,
        }
    }
}

/// Initial vector of a scattering run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Gaussian packet; momentum `π/2` along every axis by default.
    Packet {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        momentum: Option<Vec<f64>>,
        width: f64,
    },
    Site {
        cell: Vec<i64>,
        #[serde(default)]
        label: usize,
    },
    /// Monodromy eigenvector with the largest inverse participation ratio.
    LocalizedFloquet,
}

impl Default for InitialState {
    fn default() -> Self {
        Self::Packet {
            center: None,
            momentum: None,
            width: 8.0,
        }
    }
}

impl InitialState {
    fn build(&self, h: &DrivenHamiltonian<f64>, steps: usize, opts: &StepOptions) -> Result<StateVector<f64>> {
        let lat = h.lattice();
        let d = lat.graph().dim();
        match self {
            Self::Packet { center, momentum, width } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; d]);
                let k = momentum.clone().unwrap_or_else(|| vec![std::f64::consts::FRAC_PI_2; d]);
                StateVector::gaussian_packet(lat, &c, &k, *width)
            }
            Self::Site { cell, label } => {
                let x = lat
                    .index_of(cell, *label)
                    .ok_or_else(|| Error::ConfigInvalid(format!("initial: site {cell:?}/{label} outside the truncation")))?;
                Ok(StateVector::delta(lat.len(), x))
            }
            Self::LocalizedFloquet => Ok(most_localized_floquet_state(h, steps, opts)?.1),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringKnobs {
    pub n_periods: usize,
    pub steps_per_period: usize,
    pub comparison: Comparison,
    /// `forward` applies `W_n`, `adjoint` probes the range.
    pub direction: crate::scattering::Direction,
    pub initial: InitialState,
    pub p_ac: PacFilter,
    pub threshold: f64,
    pub boundary_cap: f64,
    pub boundary_shell: Option<usize>,
    pub checkpoints: Vec<usize>,
    pub isometry_tol: f64,
    pub intertwining_tol: f64,
    /// Repeats the run on the gauge-transformed Hamiltonian and compares
    /// the final approximants.
    pub compare_gauge: bool,
    pub gauge_tol: f64,
    /// When false the run passes only if it does not converge and the final
    /// decrement exceeds `divergence_floor` (negative controls).
    pub expect_converged: bool,
    pub divergence_floor: f64,
}

impl Default for ScatteringKnobs {
    fn default() -> Self {
        Self {
            n_periods: 50,
            steps_per_period: 256,
            comparison: Comparison::Static,
            direction: crate::scattering::Direction::Forward,
            initial: InitialState::default(),
            p_ac: PacFilter::Auto,
            threshold: crate::scattering::DEFAULT_THRESHOLD,
            boundary_cap: crate::scattering::DEFAULT_BOUNDARY_CAP,
            boundary_shell: None,
            checkpoints: Vec::new(),
            isometry_tol: 1e-3,
            intertwining_tol: 1e-2,
            compare_gauge: false,
            gauge_tol: 1e-3,
            expect_converged: true,
            divergence_floor: 0.1,
        }
    }
}

impl ScatteringKnobs {
    fn options(&self) -> ScatteringOptions {
        ScatteringOptions {
            n_periods: self.n_periods,
            steps_per_period: self.steps_per_period,
            step: StepOptions::default(),
            boundary_cap: self.boundary_cap,
            boundary_shell: self.boundary_shell,
            threshold: self.threshold,
            checkpoints: self.checkpoints.clone(),
            p_ac: self.p_ac.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeDecayingKnobs {
    pub segment: f64,
    pub n_segments: usize,
    pub steps_per_segment: usize,
    pub initial: InitialState,
    /// Runs on `h` with q gauged away by its tabulated primitive.
    pub gauge: bool,
    pub threshold: f64,
    pub boundary_cap: f64,
    pub boundary_shell: Option<usize>,
    pub isometry_tol: f64,
}

impl Default for TimeDecayingKnobs {
    fn default() -> Self {
        Self {
            segment: 1.0,
            n_segments: 50,
            steps_per_segment: 64,
            initial: InitialState::default(),
            gauge: false,
            threshold: crate::scattering::DEFAULT_THRESHOLD,
            boundary_cap: crate::scattering::DEFAULT_BOUNDARY_CAP,
            boundary_shell: None,
            isometry_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventKnobs {
    pub dim: usize,
    pub weight: ResolventWeight,
    /// `(Re λ, Im λ)` pairs.
    pub lambdas: Vec<(f64, f64)>,
    pub delta: f64,
    pub plateau_tol: f64,
    /// Far-field rows must satisfy `estimate / f ≤ norm ≤ f · estimate`.
    pub neumann_factor: f64,
    pub lanczos: LanczosOptions,
}

impl Default for ResolventKnobs {
    fn default() -> Self {
        Self {
            dim: 1,
            weight: ResolventWeight::Rho { a: 1.0 },
            lambdas: vec![(1.0, 1e-1), (1.0, 1e-2), (1.0, 1e-3), (-10.0, 0.0)],
            delta: 0.1,
            plateau_tol: 0.2,
            neumann_factor: 2.0,
            lanczos: LanczosOptions::default(),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid(format!("{field}: {msg}"))
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(invalid(field, "must be positive"));
    }
    Ok(())
}

fn positive_f(field: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(field, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Sets `path` (dot separated) in `table` to `value`, parsed as a TOML value
/// when possible and as a string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::ConfigInvalid(format!("override `{assignment}` is not key=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::ConfigInvalid(format!("override `{assignment}` has an empty key")));
    }
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::ConfigInvalid(format!("override `{path}`: `{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses a config; `base_dir` anchors relative paths.
    pub fn from_table(table: toml::Table, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            Error::ConfigInvalid(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn parse(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigInvalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table, base_dir)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("config {}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::parse(&text, &base, overrides)?;
        if cfg.scenario.is_none() {
            cfg.scenario = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn scenario_id(&self) -> String {
        self.scenario.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    /// Schema and cross-field checks; no side effects.
    pub fn validate(&self) -> Result<ValidationReport> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        positive("radius", self.radius)?;
        positive("stepping.dense_threshold", self.stepping.dense_threshold)?;
        positive_f("stepping.tol", self.stepping.tol)?;
        let mut files = Vec::new();
        match &self.graph {
            Some(g) => files.push(("graph".to_string(), self.resolve(g))),
            None if self.kind.needs_graph() => return Err(invalid("graph", "required for this kind")),
            None => {}
        }
        for (i, p) in self.potentials.iter().enumerate() {
            files.push((format!("potentials[{i}]"), self.resolve(p)));
        }
        for (field, p) in &files {
            if !p.is_file() {
                return Err(invalid(field, format!("file {} does not exist", p.display())));
            }
        }
        match self.kind {
            ExperimentKind::Bands => {
                let b = &self.bands;
                if b.n_k < 2 {
                    return Err(invalid("bands.n_k", "must be at least 2"));
                }
                positive_f("bands.flat_tol", b.flat_tol)?;
                positive_f("bands.spectrum_tol", b.spectrum_tol)?;
                positive_f("bands.bound_tol", b.bound_tol)?;
            }
            ExperimentKind::Quasienergy => {
                let q = &self.quasienergy;
                positive("quasienergy.n_steps", q.n_steps)?;
                positive_f("quasienergy.unitarity_tol", q.unitarity_tol)?;
                positive_f("quasienergy.group_law_tol", q.group_law_tol)?;
                positive_f("quasienergy.fold_tol", q.fold_tol)?;
                if q.group_law && !q.n_steps.is_multiple_of(4) {
                    return Err(invalid("quasienergy.n_steps", "must be a multiple of 4 for the group-law check"));
                }
                if let Some(h) = &q.howland {
                    if h.sites.is_empty() || h.sites.contains(&0) {
                        return Err(invalid("quasienergy.howland.sites", "needs positive block sizes"));
                    }
                    positive("quasienergy.howland.samples", h.samples)?;
                    positive("quasienergy.howland.n_max", h.n_max)?;
                    positive_f("quasienergy.howland.kernel_tol", h.kernel_tol)?;
                    positive_f("quasienergy.howland.shift_tol", h.shift_tol)?;
                    if h.band < 0 || h.band as usize > h.n_max {
                        return Err(invalid("quasienergy.howland.band", "must lie in [0, n_max]"));
                    }
                }
                if let Some(d) = &q.dyson {
                    positive("quasienergy.dyson.systems", d.systems)?;
                    if d.max_dim < 2 {
                        return Err(invalid("quasienergy.dyson.max_dim", "must be at least 2"));
                    }
                    positive_f("quasienergy.dyson.span", d.span)?;
                    positive_f("quasienergy.dyson.tail", d.tail)?;
                    positive_f("quasienergy.dyson.tol", d.tol)?;
                    positive("quasienergy.dyson.steps", d.steps)?;
                    if d.nodes < 3 || d.nodes % 2 == 0 {
                        return Err(invalid("quasienergy.dyson.nodes", "must be odd and at least 3"));
                    }
                }
            }
            ExperimentKind::GaugeCheck => {
                let g = &self.gauge;
                positive("gauge.n_steps", g.n_steps)?;
                positive_f("gauge.eigenphase_tol", g.eigenphase_tol)?;
                if g.ladder.len() == 1 || g.ladder.contains(&0) {
                    return Err(invalid("gauge.ladder", "needs at least two positive step counts"));
                }
                positive_f("gauge.slope_tol", g.slope_tol)?;
            }
            ExperimentKind::Scattering => {
                let s = &self.scattering;
                positive("scattering.n_periods", s.n_periods)?;
                positive("scattering.steps_per_period", s.steps_per_period)?;
                positive_f("scattering.threshold", s.threshold)?;
                positive_f("scattering.boundary_cap", s.boundary_cap)?;
                positive_f("scattering.isometry_tol", s.isometry_tol)?;
                positive_f("scattering.intertwining_tol", s.intertwining_tol)?;
                positive_f("scattering.gauge_tol", s.gauge_tol)?;
                if s.checkpoints.iter().any(|&c| c > s.n_periods) {
                    return Err(invalid("scattering.checkpoints", "must not exceed n_periods"));
                }
                if let InitialState::Packet { width, .. } = s.initial {
                    positive_f("scattering.initial.width", width)?;
                }
            }
            ExperimentKind::TimeDecaying => {
                let t = &self.time_decaying;
                positive_f("time_decaying.segment", t.segment)?;
                positive("time_decaying.n_segments", t.n_segments)?;
                positive("time_decaying.steps_per_segment", t.steps_per_segment)?;
                positive_f("time_decaying.threshold", t.threshold)?;
                positive_f("time_decaying.boundary_cap", t.boundary_cap)?;
                positive_f("time_decaying.isometry_tol", t.isometry_tol)?;
                if t.initial == InitialState::LocalizedFloquet {
                    return Err(invalid("time_decaying.initial", "aperiodic runs have no monodromy"));
                }
            }
            ExperimentKind::ResolventSample => {
                let r = &self.resolvent;
                positive("resolvent.dim", r.dim)?;
                if r.lambdas.is_empty() {
                    return Err(invalid("resolvent.lambdas", "must not be empty"));
                }
                positive_f("resolvent.delta", r.delta)?;
                positive_f("resolvent.plateau_tol", r.plateau_tol)?;
                if !(r.neumann_factor >= 1.0) {
                    return Err(invalid("resolvent.neumann_factor", "must be at least 1"));
                }
                positive("resolvent.lanczos.max_iter", r.lanczos.max_iter)?;
                positive_f("resolvent.lanczos.tol", r.lanczos.tol)?;
            }
        }
        Ok(ValidationReport {
            kind: self.kind,
            scenario: self.scenario_id(),
            files: files.into_iter().map(|(f, p)| (f, p.display().to_string())).collect(),
        })
    }

    fn graph(&self) -> Result<PeriodicGraph> {
        let path = self.graph.as_ref().ok_or_else(|| invalid("graph", "required for this kind"))?;
        PeriodicGraph::from_document(&GraphSpecDocument::load(&self.resolve(path))?)
    }

    fn field_spec(&self) -> Result<FieldSpec> {
        let docs = self
            .potentials
            .iter()
            .map(|p| PotentialSpecDocument::load(&self.resolve(p)))
            .collect::<Result<Vec<_>>>()?;
        FieldSpec::from_documents(&docs)
    }

    fn hamiltonian(&self, horizon: f64) -> Result<DrivenHamiltonian<f64>> {
        let g = self.graph()?;
        let lat = FiniteLattice::new(&g, self.radius)?;
        let spec = self.field_spec()?;
        DrivenHamiltonian::new(&lat, spec.bind(&lat, horizon)?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub kind: ExperimentKind,
    pub scenario: String,
    pub files: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunVerdict {
    Pass,
    /// Some check missed its tolerance at this truncation and step count.
    NotConverged,
}

impl RunVerdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::NotConverged => 2,
        }
    }
}

/// One named check with its measured value and bound.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

/// Scientific notation with at most five significant digits, so derived
/// bounds print as `1e-3` rather than `9.999999999999998e-4`.
fn short(x: f64) -> String {
    let s = format!("{x:.4e}");
    match s.split_once('e') {
        Some((m, e)) if m.contains('.') => format!("{}e{e}", m.trim_end_matches('0').trim_end_matches('.')),
        _ => s,
    }
}

fn check_le(name: &str, value: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        value,
        bound: format!("<= {}", short(tol)),
        pass: value <= tol,
    }
}

fn check_ge(name: &str, value: f64, floor: f64) -> Check {
    Check {
        name: name.into(),
        value,
        bound: format!(">= {}", short(floor)),
        pass: value >= floor,
    }
}

/// A file to write, relative to the output directory.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn json_artifact<S: Serialize>(name: &str, value: &S) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.into(), bytes })
}

pub struct Outcome {
    pub verdict: RunVerdict,
    pub checks: Vec<Check>,
    /// Headline lines for the summary.
    pub headline: Vec<String>,
    pub artifacts: Vec<Artifact>,
    pub timings: BTreeMap<String, f64>,
}

struct Timer {
    start: Instant,
    timings: BTreeMap<String, f64>,
}

impl Timer {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            timings: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.insert(stage.into(), (now - self.start).as_secs_f64());
        self.start = now;
    }
}

fn finish(checks: Vec<Check>, headline: Vec<String>, artifacts: Vec<Artifact>, timer: Timer) -> Outcome {
    let verdict = if checks.iter().all(|c| c.pass) {
        RunVerdict::Pass
    } else {
        RunVerdict::NotConverged
    };
    Outcome {
        verdict,
        checks,
        headline,
        artifacts,
        timings: timer.timings,
    }
}

fn interval_list(v: &[(f64, f64)]) -> String {
    v.iter().map(|(a, b)| format!("[{a:.6},{b:.6}]")).collect::<Vec<_>>().join("∪")
}

fn run_bands(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let k = &cfg.bands;
    let g = cfg.graph()?;
    let spec = cfg.field_spec()?;
    let mut b: BandStructure = band_structure::<f64>(&g, &spec.alpha_or_zero(&g), &spec.p_or_zero(&g), k.n_k)
        .map_err(|e| e.context("band structure"))?;
    if k.flat_tol != crate::spectral::DEFAULT_FLAT_TOL {
        b.flat_flags = crate::spectral::detect_flat_bands(&b, k.flat_tol)?;
    }
    timer.lap("bands");
    let mut checks = Vec::new();
    if let Some(expected) = &k.expected_spectrum {
        let err = if expected.len() == b.spectrum.len() {
            expected
                .iter()
                .zip(&b.spectrum)
                .map(|(e, s)| (e.0 - s.0).abs().max((e.1 - s.1).abs()))
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        checks.push(check_le("spectrum endpoint error", err, k.spectrum_tol));
    }
    let mut bound_rows = Vec::new();
    if k.random_alpha_trials > 0 {
        let lat = FiniteLattice::new(&g, cfg.radius)?;
        let kappa = g.kappa_plus() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst = 0.0_f64;
        for trial in 0..k.random_alpha_trials {
            let alpha: Vec<f64> = (0..lat.edges().len())
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            let h = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::Edges(alpha))?;
            let ev = hermitian_eigen(h.to_dense(), "random magnetic Laplacian")?.values;
            let (lo, hi) = (ev[0], ev[ev.len() - 1]);
            let excess = (-lo).max(hi - kappa).max(0.0);
            worst = worst.max(excess);
            bound_rows.push(serde_json::json!({ "trial": trial, "min": lo, "max": hi, "excess": excess }));
        }
        checks.push(check_le("magnetic spectrum outside [0, κ₊]", worst, k.bound_tol));
    }
    timer.lap("checks");
    let mut csv = Vec::new();
    b.write_csv(&mut csv)?;
    let summary = b.summary();
    let headline = vec![format!("σ={}", interval_list(&b.spectrum))];
    let artifacts = vec![
        Artifact {
            name: "bands.csv".into(),
            bytes: csv,
        },
        json_artifact(
            "bands.json",
            &serde_json::json!({
                "scenario": cfg.scenario_id(),
                "summary": summary,
                "band_intervals": b.band_intervals,
                "flat_flags": b.flat_flags,
                "spectrum": b.spectrum,
                "random_alpha": bound_rows,
            }),
        )?,
    ];
    Ok(finish(checks, headline, artifacts, timer))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<C<f64>> {
    let s = scale / (n as f64).sqrt();
    let a = DMatrix::from_fn(n, n, |_, _| C::new(rng.gen_range(-s..s), rng.gen_range(-s..s)));
    (&a + a.adjoint()) * C::new(0.5, 0.0)
}

#[derive(Serialize)]
struct DysonRow {
    system: usize,
    dim: usize,
    a_integral: f64,
    order: usize,
    stepping_difference: f64,
    free_distance: f64,
    bound: f64,
}

fn dyson_study(d: &DysonKnobs, seed: u64, opts: &StepOptions) -> Result<Vec<DysonRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(d.systems);
    for system in 0..d.systems {
        let n = rng.gen_range(2..=d.max_dim);
        let h0 = random_hermitian(&mut rng, n, 2.0);
        let v1 = random_hermitian(&mut rng, n, 1.0);
        let v2 = random_hermitian(&mut rng, n, 1.0);
        let v = |t: f64| &v1 * C::new(t.cos(), 0.0) + &v2 * C::new((2.0 * t).sin(), 0.0);
        let probe = dyson_propagator(&h0, v, 0.0, d.span, 0, d.nodes)?;
        let order = order_for_tail(probe.a_integral, d.tail)?;
        let dy = dyson_propagator(&h0, v, 0.0, d.span, order, d.nodes)?;
        let full = DenseHamiltonian::new(n, d.span, |t| &h0 + v(t));
        let u = propagator_matrix(&full, 0.0, d.span, d.steps, opts)?.matrix;
        rows.push(DysonRow {
            system,
            dim: n,
            a_integral: dy.a_integral,
            order,
            stepping_difference: op_norm(&(&u - &dy.propagator.matrix)),
            free_distance: op_norm(&(&u - &dy.free)),
            bound: dyson_bound(dy.a_integral),
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct HowlandRow {
    sites: usize,
    kernel_relative_error: f64,
    omega_shift_defect: f64,
}

fn howland_study(h: &DrivenHamiltonian<f64>, k: &HowlandKnobs, seed: u64) -> Result<Vec<HowlandRow>> {
    let full = h.comparison_operator().to_dense();
    let tau = h.period();
    let lambda = C::new(k.lambda.0, k.lambda.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    k.sites
        .iter()
        .map(|&n| {
            if n > full.nrows() {
                return Err(invalid("quasienergy.howland.sites", format!("{n} exceeds the truncation size {}", full.nrows())));
            }
            let h0 = full.view((0, 0), (n, n)).into_owned();
            let mut f = HowlandVector::zeros(tau, k.n_max, n);
            for m in -k.band..=k.band {
                for z in f.mode_mut(m).expect("band within n_max") {
                    *z = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1.0 + (m * m) as f64);
                }
            }
            let samples = f.to_samples(k.samples);
            let by_modes = free_resolvent_modes(&h0, lambda, &f)?.to_samples(k.samples);
            let by_kernel = free_resolvent_kernel(&h0, lambda, &samples, tau)?;
            Ok(HowlandRow {
                sites: n,
                kernel_relative_error: sample_distance(&by_modes, &by_kernel, tau) / sample_norm(&by_modes, tau),
                omega_shift_defect: omega_shift_defect(&h0, lambda, &samples, tau)?,
            })
        })
        .collect()
}

fn run_quasienergy(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let k = &cfg.quasienergy;
    let opts = cfg.stepping;
    let h = cfg.hamiltonian(2.0 * cfg.field_spec()?.period)?;
    let tau = h.period();
    timer.lap("setup");
    let seq = StepSequence::new(&h, 0.0, tau, k.n_steps, &opts)?;
    let n = h.dim();
    let (q, half) = (k.n_steps / 4, k.n_steps / 2);
    let cuts = [q, half, 3 * q];
    let mut mono = DMatrix::<C<f64>>::identity(n, n);
    let prefixes = if k.group_law {
        seq.apply_columns_with_snapshots(&mut mono, &cuts)
    } else {
        seq.apply_columns(&mut mono);
        Vec::new()
    };
    let tail_bound = seq.tail_bound();
    let unitarity = op_norm(&(mono.adjoint() * &mono - DMatrix::<C<f64>>::identity(n, n)));
    let spectrum = quasienergy_spectrum(&mono, tau, false)?;
    timer.lap("monodromy");
    let mut checks = vec![check_le("monodromy unitarity ‖U*U − I‖", unitarity, k.unitarity_tol)];
    let mut extra = serde_json::Map::new();
    if k.group_law {
        let suffixes = seq.suffix_propagators(&cuts);
        drop(seq);
        let worst = prefixes
            .iter()
            .zip(&suffixes)
            .map(|(a, b)| op_norm(&(b * a - &mono)))
            .fold(0.0_f64, f64::max);
        // U(3τ/2, τ) against U(τ/2, 0) on a random probe block
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let width = n.min(8);
        let probe = DMatrix::<C<f64>>::from_fn(n, width, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut shifted = probe.clone();
        StepSequence::new(&h, tau, tau + tau / 2.0, half, &opts)?.apply_columns(&mut shifted);
        let shift = op_norm(&(shifted - &prefixes[1] * &probe)) / op_norm(&probe);
        checks.push(check_le("group law U(τ,r)U(r,0) − U(τ,0)", worst, k.group_law_tol));
        checks.push(check_le("period shift U(3τ/2,τ) − U(τ/2,0)", shift, k.group_law_tol));
        timer.lap("group law");
    }
    let f = h.fields();
    let autonomous = f.v.is_zero() && f.q.is_zero() && f.delta.is_zero();
    if autonomous {
        let direct = hermitian_eigen(h.generator_at(0.0).to_dense(), "autonomous generator")?.values;
        let worst = direct
            .iter()
            .map(|l| {
                spectrum
                    .quasienergies
                    .iter()
                    .map(|q| circle_distance(*q, *l, spectrum.omega))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        checks.push(check_le("folded eigenphases vs direct eigenvalues", worst, k.fold_tol));
        extra.insert("fold_defect".into(), worst.into());
        timer.lap("fold");
    }
    if let Some(hk) = &k.howland {
        let rows = howland_study(&h, hk, cfg.seed)?;
        for r in &rows {
            checks.push(check_le(&format!("kernel vs modes ({} sites)", r.sites), r.kernel_relative_error, hk.kernel_tol));
            checks.push(check_le(&format!("ω-shift identity ({} sites)", r.sites), r.omega_shift_defect, hk.shift_tol));
        }
        extra.insert("howland".into(), serde_json::to_value(&rows)?);
        timer.lap("howland");
    }
    if let Some(dk) = &k.dyson {
        let rows = dyson_study(dk, cfg.seed, &opts)?;
        let diff = rows.iter().map(|r| r.stepping_difference).fold(0.0, f64::max);
        let violations = rows.iter().filter(|r| r.free_distance > r.bound).count();
        checks.push(check_le("Dyson vs stepping", diff, dk.tol));
        checks.push(check_le("Dyson bound violations", violations as f64, 0.0));
        extra.insert("dyson".into(), serde_json::to_value(&rows)?);
        timer.lap("dyson");
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["index", "quasienergy", "eigenphase"])?;
    for (i, (q, p)) in spectrum.quasienergies.iter().zip(&spectrum.eigenphases).enumerate() {
        csv.write_record([i.to_string(), format!("{q:.15e}"), format!("{p:.15e}")])?;
    }
    let csv = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let headline = vec![format!(
        "{} quasienergies in [0, {:.6}), {} distinct",
        spectrum.len(),
        spectrum.omega,
        spectrum.clusters.len()
    )];
    let artifacts = vec![
        Artifact {
            name: "quasienergies.csv".into(),
            bytes: csv,
        },
        json_artifact(
            "quasienergy.json",
            &serde_json::json!({
                "scenario": cfg.scenario_id(),
                "tau": tau,
                "n_steps": k.n_steps,
                "dimension": n,
                "unitarity_defect": unitarity,
                "chebyshev_tail_bound": tail_bound,
                "spectrum": spectrum,
                "autonomous": autonomous,
                "diagnostics": extra,
            }),
        )?,
    ];
    Ok(finish(checks, headline, artifacts, timer))
}

fn run_gauge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let k = &cfg.gauge;
    let opts = cfg.stepping;
    let h = cfg.hamiltonian(2.0 * cfg.field_spec()?.period)?;
    timer.lap("setup");
    let main: GaugeEquivalence = gauge_equivalence_check(&h, PrimitiveMethod::Auto, k.n_steps, &opts)?;
    timer.lap("equivalence");
    let mut checks = vec![check_le("eigenphase discrepancy", main.eigenphase_discrepancy, k.eigenphase_tol)];
    let ladder = k
        .ladder
        .iter()
        .map(|&n| gauge_equivalence_check(&h, PrimitiveMethod::Auto, n, &opts))
        .collect::<Result<Vec<_>>>()?;
    let slope = (!ladder.is_empty()).then(|| {
        let pts: Vec<(usize, f64)> = ladder.iter().map(|g| (g.n_steps, g.monodromy_defect)).collect();
        convergence_slope(&pts)
    });
    if let Some(s) = slope {
        checks.push(check_le("|ladder slope − expected|", (s - k.expected_slope).abs(), k.slope_tol));
    }
    timer.lap("ladder");
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["n_steps", "monodromy_defect", "eigenphase_discrepancy"])?;
    for g in ladder.iter().chain(std::iter::once(&main)) {
        csv.write_record([
            g.n_steps.to_string(),
            format!("{:.15e}", g.monodromy_defect),
            format!("{:.15e}", g.eigenphase_discrepancy),
        ])?;
    }
    let csv = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let headline = vec![format!(
        "eigenphase discrepancy {:.3e} at {} steps{}",
        main.eigenphase_discrepancy,
        main.n_steps,
        slope.map_or(String::new(), |s| format!(", ladder slope {s:.3}"))
    )];
    let artifacts = vec![
        Artifact {
            name: "gauge_ladder.csv".into(),
            bytes: csv,
        },
        json_artifact(
            "gauge.json",
            &serde_json::json!({
                "scenario": cfg.scenario_id(),
                "main": main,
                "ladder": ladder,
                "slope": slope,
            }),
        )?,
    ];
    Ok(finish(checks, headline, artifacts, timer))
}

fn trace_artifact(name: &str, r: &ScatteringReport) -> Result<Artifact> {
    let mut bytes = Vec::new();
    r.write_trace_csv(&mut bytes)?;
    Ok(Artifact { name: name.into(), bytes })
}

fn scattering_checks(r: &ScatteringReport, isometry_tol: f64, intertwining_tol: Option<f64>, boundary_cap: f64) -> Vec<Check> {
    let mut c = vec![check_le("final Cauchy decrement", r.final_decrement, r_threshold(r))];
    if let Some(cp) = r.last_checkpoint() {
        c.push(check_le("isometry defect", cp.isometry_defect, isometry_tol));
        if let (Some(tol), Some(d)) = (intertwining_tol, cp.intertwining_defect) {
            c.push(check_le("intertwining defect", d, tol));
        }
    }
    c.push(check_le("max boundary mass", r.max_boundary_mass, boundary_cap));
    c
}

/// Absolute decrement threshold the report was judged against.
fn r_threshold(r: &ScatteringReport) -> f64 {
    r.threshold * r.input_norm
}

fn run_scattering(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let k = &cfg.scattering;
    let spec = cfg.field_spec()?;
    let h = cfg.hamiltonian(spec.period * (k.n_periods + 1) as f64)?.with_comparison(k.comparison);
    let mut opts = k.options();
    opts.step = cfg.stepping;
    let f = k.initial.build(&h, k.steps_per_period, &cfg.stepping)?;
    timer.lap("setup");
    let run = |h: &DrivenHamiltonian<f64>| match k.direction {
        crate::scattering::Direction::Forward => wave_operator_apply(h, &f, &opts),
        crate::scattering::Direction::Adjoint => adjoint_wave_probe(h, &f, &opts),
    };
    let report = run(&h)?;
    timer.lap("run");
    let mut checks = if k.expect_converged {
        scattering_checks(&report, k.isometry_tol, Some(k.intertwining_tol), k.boundary_cap)
    } else {
        vec![check_ge("final Cauchy decrement (negative control)", report.final_decrement, k.divergence_floor)]
    };
    let mut artifacts = vec![trace_artifact("trace.csv", &report)?];
    let mut gauge = None;
    if k.compare_gauge {
        let (hb, _) = gauge_transform(&h, PrimitiveMethod::Auto)?;
        let rb = run(&hb)?;
        let d = approximant_distance(&report, &rb);
        checks.push(check_le("direct vs gauged approximant", d, k.gauge_tol));
        artifacts.push(trace_artifact("trace_gauged.csv", &rb)?);
        gauge = Some(serde_json::json!({ "distance": d, "report": rb }));
        timer.lap("gauged run");
    }
    let headline = vec![format!(
        "{:?} run, {} periods: final decrement {:.3e}, converged {}",
        report.direction, report.n_periods, report.final_decrement, report.converged
    )];
    artifacts.push(json_artifact(
        "scattering.json",
        &serde_json::json!({
            "scenario": cfg.scenario_id(),
            "report": report,
            "gauge_comparison": gauge,
        }),
    )?);
    Ok(finish(checks, headline, artifacts, timer))
}

fn run_time_decaying(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let k = &cfg.time_decaying;
    let horizon = k.segment * (k.n_segments + 1) as f64;
    let mut h = cfg.hamiltonian(horizon)?;
    if k.gauge {
        h = h.gauge_transformed(h.fields().big_q.clone())?;
    }
    let opts = ScatteringOptions {
        n_periods: k.n_segments,
        steps_per_period: k.steps_per_segment,
        step: cfg.stepping,
        boundary_cap: k.boundary_cap,
        boundary_shell: k.boundary_shell,
        threshold: k.threshold,
        checkpoints: Vec::new(),
        p_ac: PacFilter::Identity,
    };
    let f = k.initial.build(&h, k.steps_per_segment, &cfg.stepping)?;
    timer.lap("setup");
    let r: TimeDecayingReport = time_decaying_scenario(&h, &f, k.segment, &opts)?;
    timer.lap("run");
    let mut checks = scattering_checks(&r.forward, k.isometry_tol, None, k.boundary_cap);
    for c in scattering_checks(&r.adjoint, k.isometry_tol, None, k.boundary_cap) {
        checks.push(Check {
            name: format!("adjoint {}", c.name),
            ..c
        });
    }
    let headline = vec![format!(
        "forward decrement {:.3e}, adjoint decrement {:.3e}{}",
        r.forward.final_decrement,
        r.adjoint.final_decrement,
        if r.guaranteed { "" } else { " (dimension below 3: convergence is not guaranteed)" }
    )];
    let artifacts = vec![
        trace_artifact("trace_forward.csv", &r.forward)?,
        trace_artifact("trace_adjoint.csv", &r.adjoint)?,
        json_artifact(
            "time_decaying.json",
            &serde_json::json!({ "scenario": cfg.scenario_id(), "gauged": k.gauge, "report": r }),
        )?,
    ];
    Ok(finish(checks, headline, artifacts, timer))
}

fn run_resolvent(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let k = &cfg.resolvent;
    let lambdas: Vec<C<f64>> = k.lambdas.iter().map(|&(a, b)| C::new(a, b)).collect();
    let s: ResolventSample = weighted_resolvent_sample(k.dim, cfg.radius, k.weight, &lambdas, k.delta, &k.lanczos)?;
    timer.lap("sample");
    let mut checks = Vec::new();
    if let Some(spread) = s.plateau_spread {
        checks.push(check_le("plateau spread", spread, k.plateau_tol));
    }
    for r in &s.rows {
        if let Some(est) = r.neumann_estimate {
            let ratio = r.norm / est;
            let off = ratio.max(1.0 / ratio);
            checks.push(check_le(&format!("far field at λ = {}{:+}i: factor to Neumann estimate", r.re, r.im), off, k.neumann_factor));
        }
    }
    let mut csv = Vec::new();
    s.write_csv(&mut csv)?;
    let headline = vec![format!(
        "{} λ values on Z^{} (L = {}), plateau spread {}",
        s.rows.len(),
        s.dim,
        s.radius,
        s.plateau_spread.map_or("n/a".into(), |v| format!("{v:.3}"))
    )];
    let artifacts = vec![
        Artifact {
            name: "resolvent.csv".into(),
            bytes: csv,
        },
        json_artifact("resolvent.json", &serde_json::json!({ "scenario": cfg.scenario_id(), "sample": s }))?,
    ];
    Ok(finish(checks, headline, artifacts, timer))
}

/// Runs a validated config without touching the filesystem beyond reading inputs.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let ctx = cfg.kind.name();
    match cfg.kind {
        ExperimentKind::Bands => run_bands(cfg),
        ExperimentKind::Quasienergy => run_quasienergy(cfg),
        ExperimentKind::GaugeCheck => run_gauge(cfg),
        ExperimentKind::Scattering => run_scattering(cfg),
        ExperimentKind::TimeDecaying => run_time_decaying(cfg),
        ExperimentKind::ResolventSample => run_resolvent(cfg),
    }
    .map_err(|e| e.context(ctx))
}

pub fn summary_text(cfg: &ExperimentConfig, o: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", cfg.scenario_id());
    let _ = writeln!(s, "kind: {}", cfg.kind.name());
    for h in &o.headline {
        let _ = writeln!(s, "{h}");
    }
    for c in &o.checks {
        let _ = writeln!(
            s,
            "[{}] {}: {:.6e} ({})",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
    let _ = writeln!(
        s,
        "verdict: {}",
        match o.verdict {
            RunVerdict::Pass => "pass",
            RunVerdict::NotConverged => "not converged at this scale",
        }
    );
    s
}

/// Executes `cfg` and writes artifacts, `summary.txt` and `manifest.json`
/// into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, overrides: &[String]) -> Result<Outcome> {
    let start = Instant::now();
    let outcome = execute(cfg)?;
    std::fs::create_dir_all(out)?;
    let mut names = Vec::new();
    for a in &outcome.artifacts {
        std::fs::write(out.join(&a.name), &a.bytes)?;
        names.push(a.name.clone());
    }
    std::fs::write(out.join("summary.txt"), summary_text(cfg, &outcome))?;
    std::fs::write(
        out.join("checks.json"),
        serde_json::to_vec_pretty(&serde_json::json!({ "verdict": outcome.verdict, "checks": outcome.checks }))?,
    )?;
    names.push("summary.txt".into());
    names.push("checks.json".into());
    let manifest = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "scenario": cfg.scenario_id(),
        "kind": cfg.kind.name(),
        "config": cfg,
        "overrides": overrides,
        "inputs": cfg.validate()?.files,
        "threads": rayon::current_num_threads(),
        "verdict": outcome.verdict,
        "outputs": names,
        "timings_seconds": { "stages": outcome.timings, "total": start.elapsed().as_secs_f64() },
    });
    std::fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_print_short() {
        assert_eq!(short(1e-10), "1e-10");
        assert_eq!(short(0.1 * 0.01), "1e-3");
        assert_eq!(short(2.5), "2.5e0");
    }

    fn base() -> toml::Table {
        "kind = \"resolvent-sample\"\nradius = 10\n".parse().unwrap()
    }

    #[test]
    fn override_parses_values_and_creates_tables() {
        let mut t = base();
        apply_override(&mut t, "resolvent.delta=0.25").unwrap();
        apply_override(&mut t, "scenario=probe").unwrap();
        apply_override(&mut t, "radius = 12").unwrap();
        let c = ExperimentConfig::from_table(t, Path::new(".")).unwrap();
        assert_eq!(c.resolvent.delta, 0.25);
        assert_eq!(c.scenario.as_deref(), Some("probe"));
        assert_eq!(c.radius, 12);
    }

    #[test]
    fn negative_radius_names_the_field() {
        let mut t = base();
        apply_override(&mut t, "radius=-3").unwrap();
        let e = ExperimentConfig::from_table(t, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("radius"), "{e}");
    }

    #[test]
    fn unknown_kind_and_field_rejected() {
        let t: toml::Table = "kind = \"spectra\"".parse().unwrap();
        assert!(matches!(ExperimentConfig::from_table(t, Path::new(".")), Err(Error::ConfigInvalid(_))));
        let t: toml::Table = "kind = \"bands\"\n[bands]\nnk = 3".parse().unwrap();
        let e = ExperimentConfig::from_table(t, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("bands"), "{e}");
    }

    #[test]
    fn zero_knob_fails_validation() {
        let mut t = base();
        apply_override(&mut t, "resolvent.dim=0").unwrap();
        let c = ExperimentConfig::from_table(t, Path::new(".")).unwrap();
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("resolvent.dim"), "{e}");
    }

    #[test]
    fn missing_graph_rejected() {
        let t: toml::Table = "kind = \"bands\"".parse().unwrap();
        let c = ExperimentConfig::from_table(t, Path::new(".")).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("graph"));
    }

    #[test]
    fn resolvent_runs_in_memory() {
        let mut t = base();
        apply_override(&mut t, "resolvent.lambdas=[[-10.0, 0.0]]").unwrap();
        let c = ExperimentConfig::from_table(t, Path::new(".")).unwrap();
        let o = execute(&c).unwrap();
        assert_eq!(o.verdict, RunVerdict::Pass);
        assert!(summary_text(&c, &o).contains("verdict: pass"));
    }
}
