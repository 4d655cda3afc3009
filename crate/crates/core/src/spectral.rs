//! Static operators: magnetic Laplacians, Schrödinger operators, Bloch fibers
//! and band structures.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteLattice, PeriodicGraph};
use crate::linalg::{hermitian_eigen, HermitianOperator};
use crate::scalar::{cis, czero, lit, to_f64, Real, C};

/// Static magnetic potential α.
///
/// Values are stored once per unoriented edge in the orientation of its cell
/// edge; the reversed edge carries the negated value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticMagneticPotential {
    /// One value per cell edge, Γ-periodic.
    Periodic(Vec<f64>),
    /// One value per edge of a particular truncation.
    Edges(Vec<f64>),
}

impl StaticMagneticPotential {
    pub fn zero(g: &PeriodicGraph) -> Self {
        Self::Periodic(vec![0.0; g.cell_edges().len()])
    }

    /// Phase per truncation edge.
    pub fn on_lattice(&self, lat: &FiniteLattice) -> Result<Vec<f64>> {
        match self {
            Self::Periodic(v) => {
                check_len("magnetic potential per cell edge", v.len(), lat.graph().cell_edges().len())?;
                Ok(lat.edges().iter().map(|e| v[e.cell_edge]).collect())
            }
            Self::Edges(v) => {
                check_len("magnetic potential per lattice edge", v.len(), lat.edges().len())?;
                Ok(v.clone())
            }
        }
    }

    fn periodic(&self, g: &PeriodicGraph) -> Result<&[f64]> {
        match self {
            Self::Periodic(v) => {
                check_len("magnetic potential per cell edge", v.len(), g.cell_edges().len())?;
                Ok(v)
            }
            Self::Edges(_) => Err(Error::PotentialShapeMismatch(
                "fiber operators need a periodic magnetic potential".into(),
            )),
        }
    }
}

/// Static electric potential 𝔭.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticElectricPotential {
    /// One value per cell vertex, Γ-periodic.
    Periodic(Vec<f64>),
    /// One value per vertex of a particular truncation.
    Sites(Vec<f64>),
}

impl StaticElectricPotential {
    pub fn zero(g: &PeriodicGraph) -> Self {
        Self::Periodic(vec![0.0; g.cell_size()])
    }

    pub fn on_lattice(&self, lat: &FiniteLattice) -> Result<Vec<f64>> {
        let v = match self {
            Self::Periodic(v) => {
                check_len("electric potential per cell vertex", v.len(), lat.graph().cell_size())?;
                (0..lat.len()).map(|x| v[lat.label_of(x)]).collect()
            }
            Self::Sites(v) => {
                check_len("electric potential per lattice vertex", v.len(), lat.len())?;
                v.clone()
            }
        };
        if let Some(x) = v.iter().position(|p| !p.is_finite()) {
            return Err(Error::PotentialShapeMismatch(format!("non-finite potential at vertex {x}")));
        }
        Ok(v)
    }

    fn periodic(&self, g: &PeriodicGraph) -> Result<&[f64]> {
        match self {
            Self::Periodic(v) => {
                check_len("electric potential per cell vertex", v.len(), g.cell_size())?;
                Ok(v)
            }
            Self::Sites(_) => Err(Error::PotentialShapeMismatch(
                "fiber operators need a periodic electric potential".into(),
            )),
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::PotentialShapeMismatch(format!("{what}: got {got} values, expected {want}")));
    }
    Ok(())
}

/// Sparsity pattern of the hopping operators on a truncation. Holds the CSR
/// slot of every edge so time-dependent operators are refilled in place.
#[derive(Clone, Debug)]
pub struct HoppingPattern<T: Real> {
    template: HermitianOperator<T>,
    forward: Vec<usize>,
    backward: Vec<usize>,
    diagonal: Vec<usize>,
    half_degree: Vec<T>,
}

impl<T: Real> HoppingPattern<T> {
    pub fn new(lat: &FiniteLattice) -> Self {
        let n = lat.len();
        let one = C::new(T::one(), T::zero());
        let trip = (0..n)
            .map(|x| (x, x, one))
            .chain(lat.edges().iter().flat_map(|e| [(e.x, e.y, one), (e.y, e.x, one)]));
        let template = HermitianOperator::from_triplets(n, trip);
        let slot = |i, j| template.slot(i, j).expect("pattern contains every edge");
        let forward = lat.edges().iter().map(|e| slot(e.x, e.y)).collect();
        let backward = lat.edges().iter().map(|e| slot(e.y, e.x)).collect();
        let diagonal = (0..n).map(|x| slot(x, x)).collect();
        let half_degree = lat.degrees().iter().map(|&k| lit::<T>(k as f64 / 2.0)).collect();
        Self {
            template,
            forward,
            backward,
            diagonal,
            half_degree,
        }
    }

    pub fn dim(&self) -> usize {
        self.template.dim()
    }

    pub fn n_edges(&self) -> usize {
        self.forward.len()
    }

    /// `κ_x / 2` per vertex, counting retained edges.
    pub fn half_degrees(&self) -> &[T] {
        &self.half_degree
    }

    /// Operator with entry `hop(e)` at `(x, y)` and its conjugate at `(y, x)`
    /// for each edge `e = (x, y)`, and `diag[x]` on the diagonal.
    pub fn assemble_with(&self, mut hop: impl FnMut(usize) -> C<T>, diag: impl Fn(usize) -> T) -> HermitianOperator<T> {
        let mut op = self.template.clone();
        let vals = op.values_mut();
        vals.iter_mut().for_each(|z| *z = czero());
        for (e, (&f, &b)) in self.forward.iter().zip(&self.backward).enumerate() {
            let z = hop(e);
            vals[f] += z;
            vals[b] += z.conj();
        }
        for (x, &s) in self.diagonal.iter().enumerate() {
            vals[s] += C::new(diag(x), T::zero());
        }
        op
    }

    /// `Δ_α + diag(p)` from one phase per edge.
    pub fn laplacian(&self, phases: &[T], potential: Option<&[T]>) -> HermitianOperator<T> {
        let half = lit::<T>(-0.5);
        self.assemble_with(
            |e| cis(phases[e]) * half,
            |x| self.half_degree[x] + potential.map_or(T::zero(), |p| p[x]),
        )
    }
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| lit(x)).collect()
}

/// Matrix of `(Δ_α f)_x = ½ Σ_{e=(x,y)} (f_x − e^{iα(e)} f_y)` on a truncation.
pub fn magnetic_laplacian<T: Real>(lat: &FiniteLattice, alpha: &StaticMagneticPotential) -> Result<HermitianOperator<T>> {
    let phases = to_t::<T>(&alpha.on_lattice(lat)?);
    Ok(HoppingPattern::new(lat).laplacian(&phases, None))
}

/// `h_α = Δ_α + 𝔭`.
pub fn schrodinger<T: Real>(
    lat: &FiniteLattice,
    alpha: &StaticMagneticPotential,
    p: &StaticElectricPotential,
) -> Result<HermitianOperator<T>> {
    let phases = to_t::<T>(&alpha.on_lattice(lat)?);
    let pot = to_t::<T>(&p.on_lattice(lat)?);
    Ok(HoppingPattern::new(lat).laplacian(&phases, Some(&pot)))
}

/// Sorted eigenvalues of a Hermitian operator by dense diagonalization.
pub fn eigenvalues<T: Real>(h: &HermitianOperator<T>, context: &str) -> Result<Vec<T>> {
    Ok(hermitian_eigen(h.to_dense(), context)?.values)
}

/// Bloch fiber `h_α(k)`, a `ν × ν` Hermitian matrix. A cell edge `(u, v, n)`
/// contributes `−½ e^{i(α(e) + ⟨n, k⟩)}` at `(u, v)` and the conjugate at
/// `(v, u)`.
pub fn fiber_operator<T: Real>(
    g: &PeriodicGraph,
    alpha: &StaticMagneticPotential,
    p: &StaticElectricPotential,
    k: &[f64],
) -> Result<DMatrix<C<T>>> {
    if k.len() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "quasimomentum has {} components, graph dimension is {}",
            k.len(),
            g.dim()
        )));
    }
    let a = alpha.periodic(g)?;
    let pot = p.periodic(g)?;
    let nu = g.cell_size();
    let mut m = DMatrix::from_element(nu, nu, czero::<T>());
    for u in 0..nu {
        m[(u, u)] = C::new(lit::<T>(g.degrees()[u] as f64 / 2.0 + pot[u]), T::zero());
    }
    let half = lit::<T>(-0.5);
    for (e, edge) in g.cell_edges().iter().enumerate() {
        let nk: f64 = edge.offset.iter().zip(k).map(|(&n, &kk)| n as f64 * kk).sum();
        let z = cis(lit::<T>(a[e] + nk)) * half;
        m[(edge.from, edge.to)] += z;
        m[(edge.to, edge.from)] += z.conj();
    }
    Ok(m)
}

/// Uniform grid on the torus, `n_k` points per axis, `k_j = 2πj/n_k`,
/// lexicographic with the first axis most significant.
pub fn k_grid(dim: usize, n_k: usize) -> Vec<Vec<f64>> {
    let total = n_k.pow(dim as u32);
    (0..total)
        .map(|mut i| {
            let mut k = vec![0.0; dim];
            for a in (0..dim).rev() {
                k[a] = 2.0 * std::f64::consts::PI * (i % n_k) as f64 / n_k as f64;
                i /= n_k;
            }
            k
        })
        .collect()
}

/// Flat-band flag of one sheet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatFlag {
    pub flat: bool,
    /// Mean value of the sheet when flagged.
    pub value: Option<f64>,
}

/// Eigenvalue sheets over a uniform quasimomentum grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandStructure {
    pub dimension: usize,
    pub n_k: usize,
    pub k_grid: Vec<Vec<f64>>,
    /// `sheets[i][j]` is `λ_{j+1}` at grid point `i`.
    pub sheets: Vec<Vec<f64>>,
    pub band_intervals: Vec<(f64, f64)>,
    pub flat_flags: Vec<FlatFlag>,
    /// Union of the band intervals, merged.
    pub spectrum: Vec<(f64, f64)>,
}

/// Diagonalizes the fiber on the `n_k^d` grid.
pub fn band_structure<T: Real>(
    g: &PeriodicGraph,
    alpha: &StaticMagneticPotential,
    p: &StaticElectricPotential,
    n_k: usize,
) -> Result<BandStructure> {
    if n_k < 2 {
        return Err(Error::ConfigInvalid(format!("n_k must be at least 2, got {n_k}")));
    }
    let grid = k_grid(g.dim(), n_k);
    let sheets = grid
        .par_iter()
        .map(|k| {
            let ctx = format!("fiber at k = {k:?}");
            let m = fiber_operator::<T>(g, alpha, p, k)?;
            let eig = hermitian_eigen(m, &ctx)?;
            Ok(eig.values.into_iter().map(to_f64).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let nu = g.cell_size();
    let band_intervals: Vec<(f64, f64)> = (0..nu)
        .map(|j| {
            sheets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s[j]), hi.max(s[j]))
            })
        })
        .collect();
    let spectrum = merge_intervals(band_intervals.clone(), 0.0);
    let mut b = BandStructure {
        dimension: g.dim(),
        n_k,
        k_grid: grid,
        sheets,
        band_intervals,
        flat_flags: Vec::new(),
        spectrum,
    };
    b.flat_flags = detect_flat_bands(&b, DEFAULT_FLAT_TOL)?;
    Ok(b)
}

pub const DEFAULT_FLAT_TOL: f64 = 1e-9;

/// Sheet `j` is flat iff its range over the grid is at most `tol`.
pub fn detect_flat_bands(b: &BandStructure, tol: f64) -> Result<Vec<FlatFlag>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::ConfigInvalid(format!("flat-band tolerance must be positive, got {tol}")));
    }
    Ok(b.band_intervals
        .iter()
        .enumerate()
        .map(|(j, &(lo, hi))| {
            if hi - lo <= tol {
                let mean = b.sheets.iter().map(|s| s[j]).sum::<f64>() / b.sheets.len() as f64;
                FlatFlag {
                    flat: true,
                    value: Some(mean),
                }
            } else {
                FlatFlag {
                    flat: false,
                    value: None,
                }
            }
        })
        .collect())
}

/// Sorts and merges intervals that overlap or lie within `gap` of each other.
pub fn merge_intervals(mut v: Vec<(f64, f64)>, gap: f64) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (lo, hi) in v {
        match out.last_mut() {
            Some(last) if lo <= last.1 + gap => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

impl BandStructure {
    /// CSV with columns `k_1..k_d, lambda_1..lambda_ν`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let nu = self.band_intervals.len();
        let header: Vec<String> = (1..=self.dimension)
            .map(|i| format!("k_{i}"))
            .chain((1..=nu).map(|j| format!("lambda_{j}")))
            .collect();
        wr.write_record(&header)?;
        for (k, s) in self.k_grid.iter().zip(&self.sheets) {
            let row: Vec<String> = k.iter().chain(s).map(|x| format!("{x:.15e}")).collect();
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> BandSummary {
        BandSummary {
            dimension: self.dimension,
            n_k: self.n_k,
            band_intervals: self.band_intervals.clone(),
            flat_flags: self.flat_flags.clone(),
            spectrum: self.spectrum.clone(),
        }
    }
}

/// JSON summary of a band computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandSummary {
    pub dimension: usize,
    pub n_k: usize,
    pub band_intervals: Vec<(f64, f64)>,
    pub flat_flags: Vec<FlatFlag>,
    pub spectrum: Vec<(f64, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CellEdge;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn z(d: usize) -> PeriodicGraph {
        PeriodicGraph::hypercubic(d)
    }

    fn diamond_chain() -> PeriodicGraph {
        let e = |from, to, n| CellEdge {
            from,
            to,
            offset: vec![n],
        };
        PeriodicGraph::new(
            1,
            vec!["a".into(), "b".into(), "c".into()],
            vec![e(0, 1, 0), e(0, 2, 0), e(1, 0, 1), e(2, 0, 1)],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn path_of_three_sites() {
        let lat = FiniteLattice::new(&z(1), 1).unwrap();
        let h = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::zero(lat.graph())).unwrap();
        let m = h.to_dense();
        for (i, d) in [0.5, 1.0, 0.5].iter().enumerate() {
            assert_eq!(m[(i, i)].re, *d);
        }
        assert_eq!(m[(0, 1)].re, -0.5);
        assert_eq!(m[(1, 2)].re, -0.5);
        assert_eq!(m[(0, 2)].norm(), 0.0);
    }

    #[test]
    fn constant_phase_is_gauge_trivial() {
        let lat = FiniteLattice::new(&z(1), 10).unwrap();
        let phi = 0.7;
        let h0 = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::zero(lat.graph())).unwrap();
        let h = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::Periodic(vec![phi])).unwrap();
        // U h U* with U_x = e^{iφx} removes the phase
        let mut m = h.to_dense();
        for x in 0..lat.len() {
            for y in 0..lat.len() {
                let (px, py) = (lat.cell_of(x)[0] as f64, lat.cell_of(y)[0] as f64);
                m[(x, y)] *= cis(phi * (px - py));
            }
        }
        assert!((m - h0.to_dense()).iter().all(|z| z.norm() < 1e-14));
        let (a, b) = (eigenvalues(&h, "a").unwrap(), eigenvalues(&h0, "b").unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let lat = FiniteLattice::new(&z(1), 6).unwrap();
        let a = StaticMagneticPotential::zero(lat.graph());
        let h0 = schrodinger::<f64>(&lat, &a, &StaticElectricPotential::zero(lat.graph())).unwrap();
        assert_eq!(h0.max_abs_diff(&magnetic_laplacian(&lat, &a).unwrap()), 0.0);
        let h = schrodinger::<f64>(&lat, &a, &StaticElectricPotential::Periodic(vec![1.25])).unwrap();
        let (e0, e) = (eigenvalues(&h0, "").unwrap(), eigenvalues(&h, "").unwrap());
        assert!(e0.iter().zip(&e).all(|(x, y)| (y - x - 1.25).abs() < 1e-12));
    }

    #[test]
    fn strong_defect_splits_off_one_eigenvalue() {
        let lat = FiniteLattice::new(&z(1), 50).unwrap();
        let mut p = vec![0.0; lat.len()];
        p[lat.index_of(&[0], 0).unwrap()] = 5.0;
        let h = schrodinger::<f64>(&lat, &StaticMagneticPotential::zero(lat.graph()), &StaticElectricPotential::Sites(p))
            .unwrap();
        let e = eigenvalues(&h, "").unwrap();
        assert_eq!(e.iter().filter(|&&x| !(-1e-10..=2.0 + 1e-10).contains(&x)).count(), 1);
        // bound state r^|x| gives E = 1 + sqrt(V² + 1)
        let v: f64 = 5.0;
        let exact = 1.0 + (v * v + 1.0).sqrt();
        assert!((e[e.len() - 1] - exact).abs() < 1e-10, "{} vs {exact}", e[e.len() - 1]);
    }

    #[test]
    fn z1_fiber_is_one_minus_cos() {
        let g = z(1);
        for k in [0.0, 0.3, PI, 4.0] {
            let m = fiber_operator::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), &[k])
                .unwrap();
            assert!((m[(0, 0)].re - (1.0 - k.cos())).abs() < 1e-15);
        }
    }

    #[test]
    fn zd_fiber_at_origin_annihilates_constants() {
        let g = z(3);
        let m = fiber_operator::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), &[0.0; 3])
            .unwrap();
        assert!(m[(0, 0)].norm() < 1e-15);
    }

    /// One-cell matrix from the oriented-edge enumeration, row by row.
    fn twisted_cell(g: &PeriodicGraph, alpha: &[f64], p: &[f64], k: &[f64]) -> DMatrix<C<f64>> {
        let nu = g.cell_size();
        let mut m = DMatrix::from_element(nu, nu, C::new(0.0, 0.0));
        for e in g.oriented_edges() {
            let nk: f64 = e.offset.iter().zip(k).map(|(&n, kk)| n as f64 * kk).sum();
            let a = f64::from(e.sign) * alpha[e.cell_edge];
            m[(e.from, e.from)] += C::new(0.5, 0.0);
            m[(e.from, e.to)] -= C::from_polar(0.5, a + nk);
        }
        for u in 0..nu {
            m[(u, u)] += C::new(p[u], 0.0);
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fiber_matches_twisted_cell(
            a in prop::collection::vec(-PI..PI, 3),
            p in prop::collection::vec(-1.0..1.0f64, 2),
            k in prop::collection::vec(0.0..2.0 * PI, 2),
        ) {
            let g = PeriodicGraph::hexagonal();
            let alpha = StaticMagneticPotential::Periodic(a.clone());
            let pot = StaticElectricPotential::Periodic(p.clone());
            let m = fiber_operator::<f64>(&g, &alpha, &pot, &k).unwrap();
            let oracle = twisted_cell(&g, &a, &p, &k);
            prop_assert!((&m - &oracle).iter().all(|z| z.norm() < 1e-14));
            prop_assert!((&m - m.adjoint()).iter().all(|z| z.norm() == 0.0));
        }

        #[test]
        fn truncated_spectrum_within_kappa(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = PeriodicGraph::hexagonal();
            let lat = FiniteLattice::new(&g, 2).unwrap();
            let phases = (0..lat.edges().len()).map(|_| rng.gen_range(-PI..PI)).collect();
            let h = magnetic_laplacian::<f64>(&lat, &StaticMagneticPotential::Edges(phases)).unwrap();
            prop_assert!(h.hermiticity_defect() <= 1e-14);
            let e = eigenvalues(&h, "").unwrap();
            prop_assert!(e[0] >= -1e-10 && e[e.len() - 1] <= 3.0 + 1e-10);
        }
    }

    #[test]
    fn rational_k_appears_in_ring_spectrum() {
        // M-site periodic ring built independently
        let g = z(1);
        for m_sites in [4usize, 7, 16] {
            let mut ring = DMatrix::from_element(m_sites, m_sites, C::new(0.0, 0.0));
            for i in 0..m_sites {
                let j = (i + 1) % m_sites;
                ring[(i, i)] += C::new(1.0, 0.0);
                ring[(i, j)] -= C::new(0.5, 0.0);
                ring[(j, i)] -= C::new(0.5, 0.0);
            }
            let spec = hermitian_eigen(ring, "ring").unwrap().values;
            for m in 0..m_sites {
                let k = 2.0 * PI * m as f64 / m_sites as f64;
                let f = fiber_operator::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), &[k])
                    .unwrap();
                let lam = f[(0, 0)].re;
                assert!(spec.iter().any(|s| (s - lam).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn z1_and_z2_bands_are_exact() {
        for d in [1, 2] {
            let g = z(d);
            let b = band_structure::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), 16)
                .unwrap();
            assert_eq!(b.spectrum.len(), 1);
            let (lo, hi) = b.spectrum[0];
            assert!(lo.abs() <= 1e-12 && (hi - 2.0 * d as f64).abs() <= 1e-12);
            assert!(!b.flat_flags[0].flat);
        }
    }

    #[test]
    fn band_intervals_converge_with_grid() {
        let g = z(1);
        let (a, p) = (StaticMagneticPotential::Periodic(vec![0.4]), StaticElectricPotential::zero(&g));
        let b1 = band_structure::<f64>(&g, &a, &p, 15).unwrap();
        let b2 = band_structure::<f64>(&g, &a, &p, 30).unwrap();
        let d = (b1.band_intervals[0].0 - b2.band_intervals[0].0).abs() + (b1.band_intervals[0].1 - b2.band_intervals[0].1).abs();
        assert!(d < 10.0 / (15.0f64 * 15.0));
    }

    #[test]
    fn shifted_potential_shifts_bands() {
        let g = PeriodicGraph::hexagonal();
        let a = StaticMagneticPotential::zero(&g);
        let b0 = band_structure::<f64>(&g, &a, &StaticElectricPotential::zero(&g), 8).unwrap();
        let b1 = band_structure::<f64>(&g, &a, &StaticElectricPotential::Periodic(vec![0.5, 0.5]), 8).unwrap();
        for (x, y) in b0.band_intervals.iter().zip(&b1.band_intervals) {
            assert!((y.0 - x.0 - 0.5).abs() < 1e-12 && (y.1 - x.1 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn diamond_chain_has_flat_band_at_one() {
        let g = diamond_chain();
        let b = band_structure::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), 64)
            .unwrap();
        let flat: Vec<_> = b.flat_flags.iter().filter(|f| f.flat).collect();
        assert_eq!(flat.len(), 1);
        // hand-built 3x3 fiber: a has degree 4, b and c degree 2
        let mut oracle = Vec::new();
        for k in k_grid(1, 64) {
            let w = C::new(1.0, 0.0) + C::from_polar(1.0, -k[0]);
            let m = DMatrix::from_row_slice(
                3,
                3,
                &[
                    C::new(2.0, 0.0),
                    -w * 0.5,
                    -w * 0.5,
                    -w.conj() * 0.5,
                    C::new(1.0, 0.0),
                    C::new(0.0, 0.0),
                    -w.conj() * 0.5,
                    C::new(0.0, 0.0),
                    C::new(1.0, 0.0),
                ],
            );
            oracle.push(hermitian_eigen(m, "").unwrap().values);
        }
        let j = b.flat_flags.iter().position(|f| f.flat).unwrap();
        let lam = flat[0].value.unwrap();
        assert!(oracle.iter().all(|s| s.iter().any(|x| (x - lam).abs() < 1e-12)));
        assert!((lam - 1.0).abs() < 1e-12);
        assert!(b.sheets.iter().all(|s| (s[j] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn flat_tolerance_semantics() {
        let g = z(1);
        let mut b = band_structure::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), 8)
            .unwrap();
        assert!(!detect_flat_bands(&b, 1e-8).unwrap()[0].flat);
        b.flat_flags = detect_flat_bands(&b, 3.0).unwrap();
        assert!(b.flat_flags[0].flat);
        assert!(detect_flat_bands(&b, 0.0).is_err());
    }

    #[test]
    fn fiber_rejects_site_potential() {
        let g = z(1);
        let r = fiber_operator::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::Sites(vec![0.0]), &[0.0]);
        assert!(matches!(r, Err(Error::PotentialShapeMismatch(_))));
    }

    #[test]
    fn csv_layout() {
        let g = z(2);
        let b = band_structure::<f64>(&g, &StaticMagneticPotential::zero(&g), &StaticElectricPotential::zero(&g), 2)
            .unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k_1,k_2,lambda_1"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn single_precision_assembly() {
        let lat = FiniteLattice::new(&z(1), 3).unwrap();
        let h = magnetic_laplacian::<f32>(&lat, &StaticMagneticPotential::Periodic(vec![0.3])).unwrap();
        let e = eigenvalues(&h, "").unwrap();
        assert!(e[0] >= -1e-5 && e[e.len() - 1] <= 2.0 + 1e-5);
    }
}
