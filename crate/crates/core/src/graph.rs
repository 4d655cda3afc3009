//! Periodic graphs, their Dirichlet truncations and lattice state vectors.
//!
//! A [`PeriodicGraph`] is stored as its fundamental cell: `ν` labelled
//! vertices plus oriented cell edges `(u, v, n)` meaning "vertex `u` of cell
//! `c` is joined to vertex `v` of cell `c + n`". Every cell edge stands for
//! both orientations; reversal maps `(u, v, n)` to `(v, u, −n)`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{czero, from_usize, lit, norm2, Real, C};

/// One oriented edge of the fundamental cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEdge {
    pub from: usize,
    pub to: usize,
    pub offset: Vec<i64>,
}

/// An edge of the symmetrized enumeration: a cell edge traversed forward
/// (`sign = +1`) or reversed (`sign = −1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientedEdge {
    pub from: usize,
    pub to: usize,
    pub offset: Vec<i64>,
    pub cell_edge: usize,
    pub sign: i8,
}

/// Graph specification document (TOML).
///
/// ```toml
/// dimension = 2
/// periods = [[1.0, 0.0], [0.0, 1.0]]   # optional, standard basis by default
/// vertices = ["a", "b"]
/// positions = [[0.0, 0.0], [0.5, 0.0]] # optional, cell origin by default
/// edges = [["a", "b", [0, 0]], ["b", "a", [1, 0]]]
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpecDocument {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<Vec<f64>>>,
    pub vertices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    pub edges: Vec<(String, String, Vec<i64>)>,
}

impl GraphSpecDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.context(format!("graph spec {}", path.display())))
    }
}

/// Locally finite Γ-periodic graph given by its fundamental cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGraph {
    dim: usize,
    periods: Vec<Vec<f64>>,
    labels: Vec<String>,
    positions: Vec<Vec<f64>>,
    edges: Vec<CellEdge>,
    degrees: Vec<usize>,
}

impl PeriodicGraph {
    pub fn new(
        dim: usize,
        labels: Vec<String>,
        edges: Vec<CellEdge>,
        periods: Option<Vec<Vec<f64>>>,
        positions: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedSpec("dimension must be at least 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::MalformedSpec("at least one vertex is required".into()));
        }
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if seen.insert(l.clone(), i).is_some() {
                return Err(Error::MalformedSpec(format!("duplicate vertex label `{l}`")));
            }
        }
        let periods = match periods {
            Some(p) => {
                if p.len() != dim || p.iter().any(|a| a.len() != dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "periods must be {dim} vectors of length {dim}"
                    )));
                }
                p
            }
            None => (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        };
        let positions = match positions {
            Some(p) => {
                if p.len() != labels.len() || p.iter().any(|x| x.len() != dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "positions must be {} vectors of length {dim}",
                        labels.len()
                    )));
                }
                p
            }
            None => vec![vec![0.0; dim]; labels.len()],
        };
        let nu = labels.len();
        let mut degrees = vec![0usize; nu];
        for (k, e) in edges.iter().enumerate() {
            if e.offset.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "edge {k} has offset of length {}, expected {dim}",
                    e.offset.len()
                )));
            }
            if e.from >= nu || e.to >= nu {
                return Err(Error::MalformedSpec(format!("edge {k} references a missing vertex")));
            }
            if e.from == e.to && e.offset.iter().all(|&o| o == 0) {
                return Err(Error::MalformedSpec(format!("edge {k} is a loop inside one cell")));
            }
            degrees[e.from] += 1;
            degrees[e.to] += 1;
        }
        if let Some(u) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::IsolatedVertex(labels[u].clone()));
        }
        Ok(Self {
            dim,
            periods,
            labels,
            positions,
            edges,
            degrees,
        })
    }

    pub fn from_document(doc: &GraphSpecDocument) -> Result<Self> {
        let index: HashMap<&str, usize> = doc
            .vertices
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let lookup = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| Error::MalformedSpec(format!("edge references unknown vertex `{l}`")))
        };
        let edges = doc
            .edges
            .iter()
            .map(|(a, b, n)| {
                Ok(CellEdge {
                    from: lookup(a)?,
                    to: lookup(b)?,
                    offset: n.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            doc.dimension,
            doc.vertices.clone(),
            edges,
            doc.periods.clone(),
            doc.positions.clone(),
        )
    }

    pub fn to_document(&self) -> GraphSpecDocument {
        GraphSpecDocument {
            dimension: self.dim,
            periods: Some(self.periods.clone()),
            vertices: self.labels.clone(),
            positions: Some(self.positions.clone()),
            edges: self
                .edges
                .iter()
                .map(|e| (self.labels[e.from].clone(), self.labels[e.to].clone(), e.offset.clone()))
                .collect(),
        }
    }

    /// The hypercubic lattice `Z^d`.
    pub fn hypercubic(dim: usize) -> Self {
        let edges = (0..dim)
            .map(|i| CellEdge {
                from: 0,
                to: 0,
                offset: (0..dim).map(|j| i64::from(i == j)).collect(),
            })
            .collect();
        Self::new(dim, vec!["o".into()], edges, None, None).expect("Z^d is well formed")
    }

    /// Honeycomb lattice, two vertices per cell.
    pub fn hexagonal() -> Self {
        let s = 3f64.sqrt() / 2.0;
        let edges = [[0, 0], [-1, 0], [0, -1]]
            .iter()
            .map(|n| CellEdge {
                from: 0,
                to: 1,
                offset: n.to_vec(),
            })
            .collect();
        Self::new(
            2,
            vec!["a".into(), "b".into()],
            edges,
            Some(vec![vec![1.5, s], vec![1.5, -s]]),
            Some(vec![vec![0.0, 0.0], vec![1.0, 0.0]]),
        )
        .expect("honeycomb is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ν`, the number of vertices in the fundamental cell.
    pub fn cell_size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn periods(&self) -> &[Vec<f64>] {
        &self.periods
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn cell_edges(&self) -> &[CellEdge] {
        &self.edges
    }

    /// Degree `κ_u` of each cell vertex in the infinite graph.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `κ_+ = max_u κ_u`.
    pub fn kappa_plus(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Both orientations of every cell edge.
    pub fn oriented_edges(&self) -> impl Iterator<Item = OrientedEdge> + '_ {
        self.edges.iter().enumerate().flat_map(|(k, e)| {
            [
                OrientedEdge {
                    from: e.from,
                    to: e.to,
                    offset: e.offset.clone(),
                    cell_edge: k,
                    sign: 1,
                },
                OrientedEdge {
                    from: e.to,
                    to: e.from,
                    offset: e.offset.iter().map(|o| -o).collect(),
                    cell_edge: k,
                    sign: -1,
                },
            ]
        })
    }

    /// Cartesian position of vertex `label` in the cell with offset `cell`.
    pub fn position(&self, cell: &[i64], label: usize) -> Vec<f64> {
        let mut x = self.positions[label].clone();
        for (n, a) in cell.iter().zip(&self.periods) {
            for (xi, ai) in x.iter_mut().zip(a) {
                *xi += *n as f64 * ai;
            }
        }
        x
    }
}

/// Undirected edge of a truncation, stored in the orientation of its cell
/// edge: `x` lies in the cell of the edge's origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeEdge {
    pub x: usize,
    pub y: usize,
    pub cell_edge: usize,
}

/// Dirichlet truncation of a periodic graph to the cells `[−L, L]^d`.
///
/// Vertices are ordered lexicographically in (cell offset, label), first
/// coordinate most significant.
#[derive(Clone, Debug)]
pub struct FiniteLattice {
    graph: PeriodicGraph,
    radius: usize,
    side: usize,
    edges: Vec<LatticeEdge>,
    degrees: Vec<usize>,
    positions: Vec<Vec<f64>>,
}

impl FiniteLattice {
    pub fn new(graph: &PeriodicGraph, radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::MalformedSpec("truncation radius L must be at least 1".into()));
        }
        let side = 2 * radius + 1;
        let nu = graph.cell_size();
        let n_cells = side.pow(graph.dim() as u32);
        let mut lat = Self {
            graph: graph.clone(),
            radius,
            side,
            edges: Vec::new(),
            degrees: vec![0; n_cells * nu],
            positions: Vec::with_capacity(n_cells * nu),
        };
        let mut edges = Vec::new();
        for c in 0..n_cells {
            let cell = lat.cell_coords(c);
            for u in 0..nu {
                lat.positions.push(graph.position(&cell, u));
            }
            for (k, e) in graph.cell_edges().iter().enumerate() {
                let target: Vec<i64> = cell.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
                if let Some(y) = lat.index_of(&target, e.to) {
                    let x = c * nu + e.from;
                    edges.push(LatticeEdge { x, y, cell_edge: k });
                }
            }
        }
        for e in &edges {
            lat.degrees[e.x] += 1;
            lat.degrees[e.y] += 1;
        }
        lat.edges = edges;
        Ok(lat)
    }

    pub fn graph(&self) -> &PeriodicGraph {
        &self.graph
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// `N = ν (2L+1)^d`.
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn edges(&self) -> &[LatticeEdge] {
        &self.edges
    }

    /// Degree of each retained vertex counting only retained edges.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    fn cell_coords(&self, mut c: usize) -> Vec<i64> {
        let d = self.graph.dim();
        let mut out = vec![0i64; d];
        for i in (0..d).rev() {
            out[i] = (c % self.side) as i64 - self.radius as i64;
            c /= self.side;
        }
        out
    }

    /// Cell offset of vertex `x`.
    pub fn cell_of(&self, x: usize) -> Vec<i64> {
        self.cell_coords(x / self.graph.cell_size())
    }

    pub fn label_of(&self, x: usize) -> usize {
        x % self.graph.cell_size()
    }

    /// Index of `(cell, label)` if the cell is retained.
    pub fn index_of(&self, cell: &[i64], label: usize) -> Option<usize> {
        let r = self.radius as i64;
        let mut c = 0usize;
        for &n in cell {
            if n < -r || n > r {
                return None;
            }
            c = c * self.side + (n + r) as usize;
        }
        Some(c * self.graph.cell_size() + label)
    }

    /// Sup-norm of the cell offset of `x`.
    pub fn sup_norm(&self, x: usize) -> usize {
        self.cell_of(x).iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn position(&self, x: usize) -> &[f64] {
        &self.positions[x]
    }

    /// Euclidean norm `|x|` of the vertex position.
    pub fn abs_position(&self, x: usize) -> f64 {
        self.positions[x].iter().map(|p| p * p).sum::<f64>().sqrt()
    }

    /// `Σ |f_x|²` over vertices whose cell has sup-norm `> L − shell`.
    pub fn boundary_mass<T: Real>(&self, f: &StateVector<T>, shell: usize) -> Result<T> {
        if shell > self.radius {
            return Err(Error::MalformedSpec(format!(
                "boundary shell {shell} exceeds truncation radius {}",
                self.radius
            )));
        }
        self.check_len(f)?;
        let cut = self.radius - shell;
        Ok(f.values
            .iter()
            .enumerate()
            .filter(|(x, _)| self.sup_norm(*x) > cut)
            .fold(T::zero(), |acc, (_, z)| acc + z.norm_sqr()))
    }

    pub fn check_len<T: Real>(&self, f: &StateVector<T>) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, lattice has {}",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Complex amplitude per vertex of a [`FiniteLattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    pub values: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(values: Vec<C<T>>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![czero(); n],
        }
    }

    /// Unit vector at vertex `x`.
    pub fn delta(n: usize, x: usize) -> Self {
        let mut f = Self::zeros(n);
        f.values[x] = C::new(T::one(), T::zero());
        f
    }

    /// Constant vector of unit norm.
    pub fn uniform(n: usize) -> Self {
        let a = T::one() / from_usize::<T>(n).sqrt();
        Self {
            values: vec![C::new(a, T::zero()); n],
        }
    }

    /// Normalized Gaussian packet `exp(−|x−x₀|²/(4σ²) + i⟨k, x−x₀⟩)` over
    /// vertex positions.
    pub fn gaussian_packet(lat: &FiniteLattice, center: &[f64], momentum: &[f64], width: f64) -> Result<Self> {
        let d = lat.graph().dim();
        if center.len() != d || momentum.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "packet center/momentum must have length {d}"
            )));
        }
        let values = (0..lat.len())
            .map(|x| {
                let p = lat.position(x);
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for i in 0..d {
                    let dx = p[i] - center[i];
                    r2 += dx * dx;
                    phase += momentum[i] * dx;
                }
                let amp = lit::<T>((-r2 / (4.0 * width * width)).exp());
                let ph = lit::<T>(phase);
                C::new(amp * ph.cos(), amp * ph.sin())
            })
            .collect();
        let mut f = Self { values };
        f.normalize();
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ℓ² norm.
    pub fn norm(&self) -> T {
        norm2(&self.values)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > T::zero() {
            for z in &mut self.values {
                *z /= n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEX: &str = r#"
dimension = 2
vertices = ["a", "b"]
edges = [["a", "b", [0, 0]], ["a", "b", [-1, 0]], ["a", "b", [0, -1]]]
"#;

    #[test]
    fn z1_spec_has_kappa_two() {
        let doc = GraphSpecDocument::parse("dimension = 1\nvertices = [\"o\"]\nedges = [[\"o\", \"o\", [1]]]\n").unwrap();
        let g = PeriodicGraph::from_document(&doc).unwrap();
        assert_eq!(g.kappa_plus(), 2);
    }

    #[test]
    fn zd_has_kappa_2d() {
        for d in 1..=4 {
            assert_eq!(PeriodicGraph::hypercubic(d).kappa_plus(), 2 * d);
        }
    }

    #[test]
    fn hexagonal_spec_has_kappa_three() {
        let g = PeriodicGraph::from_document(&GraphSpecDocument::parse(HEX).unwrap()).unwrap();
        assert_eq!(g.kappa_plus(), 3);
        assert_eq!(g.degrees(), &[3, 3]);
    }

    #[test]
    fn rejects_isolated_vertex_and_bad_offsets() {
        let doc = GraphSpecDocument::parse(
            "dimension = 1\nvertices = [\"a\", \"b\"]\nedges = [[\"a\", \"a\", [1]]]\n",
        )
        .unwrap();
        assert!(matches!(PeriodicGraph::from_document(&doc), Err(Error::IsolatedVertex(l)) if l == "b"));
        let doc = GraphSpecDocument::parse("dimension = 2\nvertices = [\"a\"]\nedges = [[\"a\", \"a\", [1]]]\n").unwrap();
        assert!(matches!(PeriodicGraph::from_document(&doc), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn parser_rejects_unknown_keys() {
        let err = GraphSpecDocument::parse("dimension = 1\nvertices = [\"o\"]\nedges = []\ncolour = 3\n");
        assert!(matches!(err, Err(Error::MalformedSpec(_))));
    }

    #[test]
    fn truncation_counts() {
        let z1 = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 2).unwrap();
        assert_eq!((z1.len(), z1.edges().len()), (5, 4));
        let z2 = FiniteLattice::new(&PeriodicGraph::hypercubic(2), 1).unwrap();
        assert_eq!((z2.len(), z2.edges().len()), (9, 12));
        let hex = FiniteLattice::new(&PeriodicGraph::hexagonal(), 1).unwrap();
        assert_eq!(hex.len(), 2 * 3 * 3);
    }

    #[test]
    fn hexagonal_truncation_by_enumeration() {
        // Count edges by brute force over all vertex pairs.
        let g = PeriodicGraph::hexagonal();
        let lat = FiniteLattice::new(&g, 1).unwrap();
        let mut count = 0;
        for x in 0..lat.len() {
            for y in 0..lat.len() {
                let (cx, cy) = (lat.cell_of(x), lat.cell_of(y));
                let diff = [cy[0] - cx[0], cy[1] - cx[1]];
                for e in g.cell_edges() {
                    if e.from == lat.label_of(x) && e.to == lat.label_of(y) && e.offset == diff {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, lat.edges().len());
        assert!(lat.degrees().iter().all(|&k| k <= g.kappa_plus()));
    }

    #[test]
    fn ordering_is_lexicographic() {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(2), 1).unwrap();
        assert_eq!(lat.cell_of(0), vec![-1, -1]);
        assert_eq!(lat.cell_of(1), vec![-1, 0]);
        assert_eq!(lat.cell_of(3), vec![0, -1]);
        assert_eq!(lat.index_of(&[0, 0], 0), Some(4));
    }

    #[test]
    fn boundary_mass_examples() {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 4).unwrap();
        let origin = lat.index_of(&[0], 0).unwrap();
        let f = StateVector::<f64>::delta(lat.len(), origin);
        assert_eq!(lat.boundary_mass(&f, 1).unwrap(), 0.0);

        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 2).unwrap();
        let u = StateVector::<f64>::uniform(lat.len());
        assert!((lat.boundary_mass(&u, 1).unwrap() - 0.4).abs() < 1e-15);
        assert!(lat.boundary_mass(&u, 3).is_err());
    }

    #[test]
    fn truncation_is_monotone() {
        let g = PeriodicGraph::hexagonal();
        let small = FiniteLattice::new(&g, 1).unwrap();
        let big = FiniteLattice::new(&g, 2).unwrap();
        let embed = |x: usize| big.index_of(&small.cell_of(x), small.label_of(x)).unwrap();
        let big_edges: std::collections::HashSet<(usize, usize, usize)> =
            big.edges().iter().map(|e| (e.x, e.y, e.cell_edge)).collect();
        for e in small.edges() {
            assert!(big_edges.contains(&(embed(e.x), embed(e.y), e.cell_edge)));
        }
        // induced: big edges between embedded vertices come from small edges
        let image: std::collections::HashMap<usize, usize> = (0..small.len()).map(|x| (embed(x), x)).collect();
        let induced = big
            .edges()
            .iter()
            .filter(|e| image.contains_key(&e.x) && image.contains_key(&e.y))
            .count();
        assert_eq!(induced, small.edges().len());
    }

    #[test]
    fn reversed_edges_negate_offsets() {
        let g = PeriodicGraph::hexagonal();
        let all: Vec<_> = g.oriented_edges().collect();
        assert_eq!(all.len(), 2 * g.cell_edges().len());
        for pair in all.chunks(2) {
            assert_eq!(pair[0].from, pair[1].to);
            assert_eq!(pair[0].offset.iter().map(|o| -o).collect::<Vec<_>>(), pair[1].offset);
        }
    }
}
