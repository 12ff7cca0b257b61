//! Weighted undirected graphs, colorings, and model matrices.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REGULAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    degree: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
    is_regular: bool,
}

impl Graph {
    /// Builds a graph, summing the weights of repeated pairs.
    ///
    /// Errors carry the 1-based position of the offending entry in `edges`.
    pub fn from_weighted_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Graph> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, (u, v, w)) in edges.into_iter().enumerate() {
            let (u, v) = check_entry(i + 1, n, u, v, w)?;
            *merged.entry((u, v)).or_insert(0.0) += w;
        }
        Ok(Self::from_sorted(n, merged))
    }

    /// Like [`Graph::from_weighted_edges`] but rejects repeated pairs.
    pub fn from_weighted_edges_strict(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Graph> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, (u, v, w)) in edges.into_iter().enumerate() {
            let (u, v) = check_entry(i + 1, n, u, v, w)?;
            if merged.insert((u, v), w).is_some() {
                return Err(Error::DuplicateEdge { line: i + 1, u, v });
            }
        }
        Ok(Self::from_sorted(n, merged))
    }

    /// Unit-weight graph; repeated pairs are collapsed rather than summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            let (u, v) = check_entry(i + 1, n, u, v, 1.0)?;
            merged.insert((u, v), 1.0);
        }
        Ok(Self::from_sorted(n, merged))
    }

    pub(crate) fn from_sorted(n: usize, merged: BTreeMap<(usize, usize), f64>) -> Graph {
        let mut degree = vec![0.0; n];
        let mut adj = vec![Vec::new(); n];
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v), w)| {
                degree[u] += w;
                degree[v] += w;
                adj[u].push((v, w));
                adj[v].push((u, w));
                Edge { u, v, w }
            })
            .collect();
        for list in &mut adj {
            list.sort_by_key(|&(y, _)| y);
        }
        let is_regular = regular(&degree);
        Graph { n, edges, degree, adj, is_regular }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges sorted lexicographically with `u < v`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[x]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search_by_key(&v, |&(y, _)| y).is_ok()
    }

    pub fn is_regular(&self) -> bool {
        self.is_regular
    }

    pub fn max_degree(&self) -> f64 {
        self.degree.iter().cloned().fold(0.0, f64::max)
    }

    pub fn average_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.degree.iter().sum::<f64>() / self.n as f64
        }
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.u, e.v)] = e.w;
            a[(e.v, e.u)] = e.w;
        }
        a
    }

    /// Component id per vertex, numbered by smallest member.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &self.adj[x] {
                    if comp[y] == usize::MAX {
                        comp[y] = next;
                        queue.push_back(y);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Disjoint union; vertices of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let shift = self.n;
        let edges = self
            .edges
            .iter()
            .map(|e| (e.u, e.v, e.w))
            .chain(other.edges.iter().map(|e| (e.u + shift, e.v + shift, e.w)));
        Graph::from_weighted_edges(self.n + other.n, edges).expect("union of valid graphs")
    }

    /// Subgraph keeping the edges for which `keep` is true.
    pub fn filter_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> Graph {
        let mut merged = BTreeMap::new();
        for e in self.edges.iter().filter(|e| keep(e)) {
            merged.insert((e.u, e.v), e.w);
        }
        Self::from_sorted(self.n, merged)
    }

    /// Returns the first edge with both endpoints in `set`, if any.
    pub fn edge_inside(&self, set: &[usize]) -> Option<(usize, usize)> {
        let mut member = vec![false; self.n];
        for &x in set {
            member[x] = true;
        }
        self.edges.iter().find(|e| member[e.u] && member[e.v]).map(|e| (e.u, e.v))
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        self.edge_inside(set).is_none()
    }
}

pub(crate) fn check_entry(line: usize, n: usize, u: usize, v: usize, w: f64) -> Result<(usize, usize)> {
    if u == v {
        return Err(Error::SelfLoop { line, vertex: u });
    }
    if w.is_nan() || w <= 0.0 || w.is_infinite() {
        return Err(Error::NonPositiveWeight { line, weight: w });
    }
    for x in [u, v] {
        if x >= n {
            return Err(Error::VertexOutOfRange { vertex: x, n });
        }
    }
    Ok((u.min(v), u.max(v)))
}

fn regular(degree: &[f64]) -> bool {
    let max = degree.iter().cloned().fold(f64::MIN, f64::max);
    let min = degree.iter().cloned().fold(f64::MAX, f64::min);
    if degree.is_empty() {
        return true;
    }
    if min <= 0.0 {
        return max <= 0.0;
    }
    max / min <= 1.0 + REGULAR_TOL
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct Partition {
    chi: Vec<usize>,
    k: usize,
    class_sizes: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    k: usize,
    chi: Vec<usize>,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Partition> {
        Partition::new(r.chi, r.k)
    }
}

impl From<Partition> for PartitionRepr {
    fn from(p: Partition) -> Self {
        PartitionRepr { k: p.k, chi: p.chi }
    }
}

impl Partition {
    pub fn new(chi: Vec<usize>, k: usize) -> Result<Partition> {
        let mut class_sizes = vec![0; k];
        for (vertex, &color) in chi.iter().enumerate() {
            if color >= k {
                return Err(Error::ColorOutOfRange { vertex, color, k });
            }
            class_sizes[color] += 1;
        }
        Ok(Partition { chi, k, class_sizes })
    }

    /// Uses `max color + 1` classes.
    pub fn from_labels(chi: Vec<usize>) -> Partition {
        let k = chi.iter().max().map_or(1, |&m| m + 1);
        Partition::new(chi, k).expect("k covers all labels")
    }

    pub fn n(&self) -> usize {
        self.chi.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn chi(&self) -> &[usize] {
        &self.chi
    }

    pub fn color(&self, x: usize) -> usize {
        self.chi[x]
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (x, &c) in self.chi.iter().enumerate() {
            out[c].push(x);
        }
        out
    }

    pub fn first_empty_class(&self) -> Option<usize> {
        self.class_sizes.iter().position(|&s| s == 0)
    }

    /// n×k indicator matrix Z with Z[x][χ(x)] = 1.
    pub fn indicator(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n(), self.k);
        for (x, &c) in self.chi.iter().enumerate() {
            z[(x, c)] = 1.0;
        }
        z
    }

    /// Relabels colors by order of first appearance; equal outputs mean equal up to permutation.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let chi = self
            .chi
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        Partition::new(chi, self.k).expect("relabeling stays below k")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMatrix {
    #[serde(with = "matrix_rows")]
    pub entries: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<f64>>,
}

impl ModelMatrix {
    pub fn new(entries: DMatrix<f64>) -> ModelMatrix {
        ModelMatrix { entries, stationary: None }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<ModelMatrix> {
        Ok(ModelMatrix::new(matrix_rows::from_rows(rows)?))
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[(a, b)]
    }

    pub fn row(&self, a: usize) -> Vec<f64> {
        self.entries.row(a).iter().cloned().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|a| self.row(a)).collect()
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        (0..self.k()).all(|a| {
            let row = self.entries.row(a);
            row.iter().all(|&x| x >= -tol) && (row.sum() - 1.0).abs() <= tol
        })
    }

    pub fn has_zero_diagonal(&self, tol: f64) -> bool {
        (0..self.k()).all(|a| self.entries[(a, a)].abs() <= tol)
    }

    pub fn is_reversible(&self, pi: &[f64], tol: f64) -> bool {
        let k = self.k();
        (0..k).all(|a| (0..k).all(|b| (pi[a] * self.entries[(a, b)] - pi[b] * self.entries[(b, a)]).abs() <= tol))
    }

    pub fn max_distance(&self, other: &ModelMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

/// Serializes a dense matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::error::{Error, Result};

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if let Some(bad) = rows.iter().find(|x| x.len() != c) {
            return Err(Error::SizeMismatch { expected: c, got: bad.len() });
        }
        Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// D^{-1/2} A D^{-1/2}.
pub fn normalized_adjacency(g: &Graph) -> Result<DMatrix<f64>> {
    if let Some(v) = g.degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedVertex(v));
    }
    let s: Vec<f64> = g.degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut a = DMatrix::zeros(g.n, g.n);
    for e in &g.edges {
        let x = e.w * s[e.u] * s[e.v];
        a[(e.u, e.v)] = x;
        a[(e.v, e.u)] = x;
    }
    Ok(a)
}

/// Per-vertex class masses D_x^b = Σ_{y: χ(y)=b} Ã_xy, as an n×k matrix.
pub fn class_masses(a: &DMatrix<f64>, p: &Partition) -> DMatrix<f64> {
    let n = a.nrows();
    let mut d = DMatrix::zeros(n, p.k());
    for x in 0..n {
        for y in 0..n {
            let w = a[(x, y)];
            if w != 0.0 {
                d[(x, p.color(y))] += w;
            }
        }
    }
    d
}

/// The model M(Ã, χ): row a holds the class-a average of D_x^b.
pub fn model_matrix(a: &DMatrix<f64>, p: &Partition) -> Result<ModelMatrix> {
    if a.nrows() != p.n() {
        return Err(Error::SizeMismatch { expected: a.nrows(), got: p.n() });
    }
    if let Some(c) = p.first_empty_class() {
        return Err(Error::EmptyClass(c));
    }
    let d = class_masses(a, p);
    let k = p.k();
    let mut m = DMatrix::zeros(k, k);
    for x in 0..p.n() {
        for b in 0..k {
            m[(p.color(x), b)] += d[(x, b)];
        }
    }
    for a in 0..k {
        let size = p.class_sizes()[a] as f64;
        for b in 0..k {
            m[(a, b)] /= size;
        }
    }
    Ok(ModelMatrix::new(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoringQuality {
    pub delta_vertex_cover: f64,
    /// Same cover measured by degree mass instead of vertex count.
    pub delta_degree_weighted: f64,
    pub model_distance: Option<f64>,
    pub per_pair_variance: Vec<Vec<f64>>,
    pub model: Vec<Vec<f64>>,
    pub monochromatic_edges: usize,
}

/// Var_{x ∈ χ⁻¹(a)} D_x^b for every class pair, with `model` = M(a, χ).
pub fn per_pair_variance(a: &DMatrix<f64>, p: &Partition, model: &ModelMatrix) -> Vec<Vec<f64>> {
    let d = class_masses(a, p);
    let k = p.k();
    let mut var = vec![vec![0.0; k]; k];
    for x in 0..p.n() {
        let c = p.color(x);
        for b in 0..k {
            let dev = d[(x, b)] - model.get(c, b);
            var[c][b] += dev * dev;
        }
    }
    for (c, row) in var.iter_mut().enumerate() {
        let size = p.class_sizes()[c] as f64;
        for v in row.iter_mut() {
            *v /= size;
        }
    }
    var
}

/// Vertex cover of the edges passing `keep`, taken as both endpoints of a greedy maximal matching.
pub fn maximal_matching_cover(g: &Graph, mut keep: impl FnMut(&Edge) -> bool) -> Vec<usize> {
    let mut matched = vec![false; g.n()];
    for e in g.edges() {
        if keep(e) && !matched[e.u] && !matched[e.v] {
            matched[e.u] = true;
            matched[e.v] = true;
        }
    }
    (0..g.n()).filter(|&x| matched[x]).collect()
}

pub fn coloring_quality(g: &Graph, p: &Partition, target: Option<&ModelMatrix>) -> Result<ColoringQuality> {
    if g.n() != p.n() {
        return Err(Error::SizeMismatch { expected: g.n(), got: p.n() });
    }
    let a = normalized_adjacency(g)?;
    let model = model_matrix(&a, p)?;
    let var = per_pair_variance(&a, p, &model);
    let k = p.k();
    let monochromatic_edges = g.edges().iter().filter(|e| p.color(e.u) == p.color(e.v)).count();
    let cover = maximal_matching_cover(g, |e| p.color(e.u) == p.color(e.v));
    let total: f64 = g.degree().iter().sum();
    let cover_mass: f64 = cover.iter().map(|&x| g.degree()[x]).sum();
    if let Some(t) = target {
        if t.k() != k {
            return Err(Error::SizeMismatch { expected: k, got: t.k() });
        }
    }
    Ok(ColoringQuality {
        delta_vertex_cover: cover.len() as f64 / g.n() as f64,
        delta_degree_weighted: if total > 0.0 { cover_mass / total } else { 0.0 },
        model_distance: target.map(|t| t.max_distance(&model)),
        per_pair_variance: var,
        model: model.rows(),
        monochromatic_edges,
    })
}

/// Returns δ = 1 − Σ|sets|/n for a list of disjoint independent sets.
pub fn check_k_delta_coloring(g: &Graph, sets: &[Vec<usize>]) -> Result<f64> {
    let mut seen = vec![false; g.n()];
    for set in sets {
        for &x in set {
            if x >= g.n() {
                return Err(Error::VertexOutOfRange { vertex: x, n: g.n() });
            }
            if seen[x] {
                return Err(Error::OverlappingSets(x));
            }
            seen[x] = true;
        }
    }
    for (i, set) in sets.iter().enumerate() {
        if let Some((u, v)) = g.edge_inside(set) {
            return Err(Error::NotIndependent { set: i, u, v });
        }
    }
    let covered: usize = sets.iter().map(|s| s.len()).sum();
    Ok(1.0 - covered as f64 / g.n() as f64)
}
