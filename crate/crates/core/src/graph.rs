//! Weighted connectivity graphs and their spectra.
//!
//! A [`NetworkGraph`] holds the live links between UEs (direct D2D links and
//! cascaded RIS-aided links). Its combinatorial Laplacian `L = A diag(w) Aᵀ`
//! drives everything else: the algebraic connectivity λ2, the Fiedler vector
//! used to rank candidate links, and the per-node reliability obtained by
//! deleting one vertex at a time.
//!
//! Eigenproblems are solved densely. Graphs here have at most a few dozen
//! vertices, so a full symmetric eigendecomposition is both cheap and exact
//! to machine precision.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two eigenvalues closer than this are treated as a repeated eigenvalue.
pub const SIMPLICITY_TOLERANCE: f64 = 1e-8;

const SIGN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "d2d")]
    D2d,
    #[serde(rename = "ris")]
    RisAided,
}

impl EdgeKind {
    fn label(self) -> &'static str {
        match self {
            EdgeKind::D2d => "d2d",
            EdgeKind::RisAided => "ris",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    pub kind: EdgeKind,
}

impl Edge {
    fn joins(&self, a: usize, b: usize) -> bool {
        (self.u == a && self.v == b) || (self.u == b && self.v == a)
    }

    fn touches(&self, x: usize) -> bool {
        self.u == x || self.v == x
    }
}

/// Undirected weighted graph over UE vertices `0..vertex_count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct NetworkGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
}

/// On-disk form: `{"vertices": V, "edges": [{"u", "v", "w", "kind"}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: usize,
    pub edges: Vec<Edge>,
}

impl TryFrom<GraphFile> for NetworkGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        NetworkGraph::with_edges(file.vertices, file.edges)
    }
}

impl From<NetworkGraph> for GraphFile {
    fn from(g: NetworkGraph) -> Self {
        GraphFile { vertices: g.vertex_count, edges: g.edges }
    }
}

impl NetworkGraph {
    /// Edgeless graph on `vertex_count` vertices.
    pub fn new(vertex_count: usize) -> Self {
        Self { vertex_count, edges: Vec::new() }
    }

    pub fn with_edges(vertex_count: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Self::new(vertex_count);
        for e in edges {
            g.add_edge(e.u, e.v, e.w, e.kind)?;
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: f64, kind: EdgeKind) -> Result<()> {
        for x in [u, v] {
            if x >= self.vertex_count {
                return Err(Error::VertexOutOfRange { vertex: x, count: self.vertex_count });
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if w.is_nan() || w < 0.0 {
            return Err(Error::NegativeWeight { u, v, weight: w });
        }
        if !w.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite weight on edge ({u}, {v})")));
        }
        if self.edges.iter().any(|e| e.kind == kind && e.joins(u, v)) {
            return Err(Error::DuplicateEdge { u, v, kind: kind.label() });
        }
        self.edges.push(Edge { u, v, w, kind });
        Ok(())
    }

    /// True if any edge (of either kind) joins `u` and `v`.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.iter().any(|e| e.joins(u, v))
    }

    pub fn has_edge_of_kind(&self, u: usize, v: usize, kind: EdgeKind) -> bool {
        self.edges.iter().any(|e| e.kind == kind && e.joins(u, v))
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Drops every edge of the given kind.
    pub fn without_kind(&self, kind: EdgeKind) -> Self {
        Self {
            vertex_count: self.vertex_count,
            edges: self.edges.iter().copied().filter(|e| e.kind != kind).collect(),
        }
    }

    /// The subgraph with `vertex` and its incident edges removed. Remaining
    /// vertices are relabelled to stay contiguous.
    pub fn remove_vertex(&self, vertex: usize) -> Result<Self> {
        if vertex >= self.vertex_count {
            return Err(Error::VertexOutOfRange { vertex, count: self.vertex_count });
        }
        let relabel = |x: usize| if x > vertex { x - 1 } else { x };
        let edges = self
            .edges
            .iter()
            .filter(|e| !e.touches(vertex))
            .map(|e| Edge { u: relabel(e.u), v: relabel(e.v), ..*e })
            .collect();
        Ok(Self { vertex_count: self.vertex_count - 1, edges })
    }

    /// Component label per vertex, counting only edges with positive weight.
    pub fn components(&self) -> Vec<usize> {
        let mut adjacency = vec![Vec::new(); self.vertex_count];
        for e in self.edges.iter().filter(|e| e.w > 0.0) {
            adjacency[e.u].push(e.v);
            adjacency[e.v].push(e.u);
        }
        label_components(&adjacency)
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count > 0 && self.components().iter().all(|&c| c == 0)
    }
}

fn label_components(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(x) = stack.pop() {
            for &y in &adjacency[x] {
                if label[y] == usize::MAX {
                    label[y] = next;
                    stack.push(y);
                }
            }
        }
        next += 1;
    }
    label
}

/// Symmetric V×V combinatorial Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
}

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    /// Component labels read off the nonzero off-diagonal pattern.
    pub fn components(&self) -> Vec<usize> {
        let n = self.dimension();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if self.matrix[(i, j)] != 0.0 {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        label_components(&adjacency)
    }

    /// All eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut values: Vec<f64> =
            SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

pub fn build_laplacian(g: &NetworkGraph) -> Result<Laplacian> {
    let n = g.vertex_count;
    let mut matrix = DMatrix::zeros(n, n);
    for e in &g.edges {
        if e.u == e.v {
            return Err(Error::SelfLoop(e.u));
        }
        if e.w.is_nan() || e.w < 0.0 {
            return Err(Error::NegativeWeight { u: e.u, v: e.v, weight: e.w });
        }
        matrix[(e.u, e.u)] += e.w;
        matrix[(e.v, e.v)] += e.w;
        matrix[(e.u, e.v)] -= e.w;
        matrix[(e.v, e.u)] -= e.w;
    }
    Ok(Laplacian { matrix })
}

/// λ2 together with its unit eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct FiedlerResult {
    pub lambda2: f64,
    /// Unit norm, orthogonal to the all-ones vector, first significant entry positive.
    pub vector: Vec<f64>,
    /// `λ3 − λ2 > SIMPLICITY_TOLERANCE`.
    pub simple: bool,
}

/// Second-smallest Laplacian eigenvalue and its eigenvector.
///
/// Disconnected graphs report λ2 = 0 exactly. Their Fiedler vector is the
/// nullspace vector that is constant on each component, positive on the
/// component of vertex 0 and negative elsewhere, so candidate scores
/// `(v_u − v_r)²` vanish inside a component and peak across the cut.
///
/// For connected graphs the all-ones eigenvector is deflated by adding
/// `s·11ᵀ/V` with `s` above the spectral radius; the smallest eigenpair of
/// the shifted matrix is then (λ2, v) with v ⊥ 1.
pub fn algebraic_connectivity(laplacian: &Laplacian) -> Result<FiedlerResult> {
    let n = laplacian.dimension();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "algebraic connectivity needs at least 2 vertices, got {n}"
        )));
    }

    let labels = laplacian.components();
    let component_count = labels.iter().max().map_or(0, |&m| m + 1);
    if component_count > 1 {
        let spectrum = laplacian.spectrum();
        let lambda3 = if component_count > 2 { 0.0 } else { spectrum.get(2).map_or(f64::INFINITY, |l| l.max(0.0)) };
        let first = labels.iter().filter(|&&c| c == 0).count() as f64;
        let rest = n as f64 - first;
        let mut vector: Vec<f64> =
            labels.iter().map(|&c| if c == 0 { 1.0 / first } else { -1.0 / rest }).collect();
        normalize(&mut vector);
        return Ok(FiedlerResult { lambda2: 0.0, vector, simple: lambda3 > SIMPLICITY_TOLERANCE });
    }

    let m = laplacian.matrix();
    let max_degree = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
    let shift = 2.0 * max_degree + 1.0;
    let deflated = m.add_scalar(shift / n as f64);
    let eig = SymmetricEigen::new(deflated);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda3 = if n > 2 { eig.eigenvalues[order[1]] } else { f64::INFINITY };

    let mut vector: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let mean = vector.iter().sum::<f64>() / n as f64;
    vector.iter_mut().for_each(|x| *x -= mean);
    normalize(&mut vector);
    let lambda2 = rayleigh_quotient(m, &vector);

    Ok(FiedlerResult { lambda2, vector, simple: lambda3 - lambda2 > SIMPLICITY_TOLERANCE })
}

/// `Σ w_ij (v_i − v_j)²` for a unit vector. Every term is non-negative, so
/// this stays accurate relative to λ2 even when edge weights span many
/// orders of magnitude, unlike the raw eigenvalue of the shifted matrix.
fn rayleigh_quotient(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = v[i] - v[j];
            sum += -m[(i, j)] * d * d;
        }
    }
    sum.max(0.0)
}

fn normalize(vector: &mut [f64]) {
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        vector.iter_mut().for_each(|x| *x /= norm);
    }
    if let Some(first) = vector.iter().find(|x| x.abs() > SIGN_TOLERANCE) {
        if *first < 0.0 {
            vector.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// λ2 of the graph's Laplacian.
pub fn lambda2(g: &NetworkGraph) -> Result<f64> {
    Ok(algebraic_connectivity(&build_laplacian(g)?)?.lambda2)
}

/// Per-vertex reliability: λ2 of the graph with that vertex deleted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityMap(pub Vec<f64>);

impl ReliabilityMap {
    pub fn get(&self, vertex: usize) -> f64 {
        self.0[vertex]
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn node_reliability(g: &NetworkGraph) -> Result<ReliabilityMap> {
    if g.vertex_count < 3 {
        return Err(Error::InvalidInput(format!(
            "node reliability needs at least 3 vertices, got {}",
            g.vertex_count
        )));
    }
    (0..g.vertex_count)
        .map(|v| lambda2(&g.remove_vertex(v)?))
        .collect::<Result<Vec<_>>>()
        .map(ReliabilityMap)
}

/// First-order sensitivity dλ2/dw_uv = (v_u − v_v)².
///
/// Fails with [`Error::GradientUndefined`] when λ2 is repeated; callers then
/// fall back to finite differences.
pub fn lambda2_weight_gradient(g: &NetworkGraph, edge: (usize, usize)) -> Result<f64> {
    let (u, v) = edge;
    for x in [u, v] {
        if x >= g.vertex_count {
            return Err(Error::VertexOutOfRange { vertex: x, count: g.vertex_count });
        }
    }
    let fiedler = algebraic_connectivity(&build_laplacian(g)?)?;
    if !fiedler.simple {
        return Err(Error::GradientUndefined);
    }
    let d = fiedler.vector[u] - fiedler.vector[v];
    Ok(d * d)
}
