//! Randomly planted colorings: planting, list recovery, and the repair
//! pipeline (uncolor, safe recolor, brute force on small free components).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{model_matrix, per_pair_variance, Graph, ModelMatrix, Partition};
use crate::instances::rng_for;
use crate::io;
use crate::recovery::{recover_partitions, CandidateList, RecoveryParams};
use crate::spectral::eigenvalues_sym;

/// Smallest host degree the full pipeline is tuned for (d/(6k) ≥ 2 at k = 3, with slack).
pub const DEFAULT_MIN_DEGREE: f64 = 48.0;

/// Eigenvalue cutoff under the planting normalization. The bulk of a planted
/// random d-regular graph reaches about 2√(2/3·d)·3/(2d) ≈ 0.32 at k = 3, d = 60.
pub const DEFAULT_PLANTED_LAMBDA: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub host: Graph,
    pub planted: Partition,
    /// Host minus the monochromatic edges.
    pub graph: Graph,
    /// Host degree, used for normalization.
    pub d: f64,
    pub seed: u64,
}

impl PlantedInstance {
    pub fn k(&self) -> usize {
        self.planted.k()
    }
}

/// Plants χ ~ Unif([k])ⁿ (stream 0 of `seed`) and removes monochromatic edges.
pub fn plant_k_coloring(h: &Graph, k: usize, seed: u64) -> Result<PlantedInstance> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    let mut rng = rng_for(seed, 0);
    let chi: Vec<usize> = (0..h.n()).map(|_| rng.random_range(0..k)).collect();
    let mut inst = plant_with(h, Partition::new(chi, k)?)?;
    inst.seed = seed;
    Ok(inst)
}

/// Plants a given coloring.
pub fn plant_with(h: &Graph, planted: Partition) -> Result<PlantedInstance> {
    if planted.n() != h.n() {
        return Err(Error::SizeMismatch { expected: h.n(), got: planted.n() });
    }
    let graph = h.filter_edges(|e| planted.color(e.u) != planted.color(e.v));
    Ok(PlantedInstance { host: h.clone(), graph, d: h.max_degree(), planted, seed: 0 })
}

/// k/((k−1)d)·A.
pub fn planting_adjacency(g: &Graph, d: f64, k: usize) -> Result<DMatrix<f64>> {
    if !(d > 0.0) || k < 2 {
        return Err(Error::InvalidParameter(format!("need d > 0 and k ≥ 2, got d = {d}, k = {k}")));
    }
    Ok(g.adjacency_matrix() * (k as f64 / ((k - 1) as f64 * d)))
}

/// Candidate k-colorings of a planted graph, from the planting normalization.
pub fn recover_partial_list(g: &Graph, d: f64, k: usize, params: &RecoveryParams) -> Result<CandidateList> {
    recover_partitions(&planting_adjacency(g, d, k)?, k, params)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialColoring {
    /// `None` marks a free vertex.
    pub colors: Vec<Option<usize>>,
    pub k: usize,
}

impl PartialColoring {
    pub fn from_partition(p: &Partition) -> PartialColoring {
        PartialColoring { colors: p.chi().iter().map(|&c| Some(c)).collect(), k: p.k() }
    }

    pub fn free_set(&self) -> Vec<usize> {
        (0..self.colors.len()).filter(|&x| self.colors[x].is_none()).collect()
    }

    pub fn free_fraction(&self) -> f64 {
        if self.colors.is_empty() {
            return 0.0;
        }
        self.free_set().len() as f64 / self.colors.len() as f64
    }

    /// First edge joining two vertices of the same color.
    pub fn conflict(&self, g: &Graph) -> Option<(usize, usize)> {
        g.edges()
            .iter()
            .find(|e| self.colors[e.u].is_some() && self.colors[e.u] == self.colors[e.v])
            .map(|e| (e.u, e.v))
    }
}

fn assert_proper(g: &Graph, pc: &PartialColoring, stage: &str) {
    if let Some((u, v)) = pc.conflict(g) {
        panic!("{stage} left edge {{{u}, {v}}} monochromatic");
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncolorReport {
    pub coloring: PartialColoring,
    pub passes: usize,
    /// Vertices freed because they still had a same-colored neighbour at the fixpoint.
    pub conflicts_cleared: usize,
}

/// Repeatedly frees any colored vertex with fewer than d/(6k) colored
/// neighbours in some other color (ascending ids, one sweep per pass). If a
/// monochromatic edge survives the fixpoint, both endpoints are freed and the
/// loop resumes, so the result is always proper on colored vertices.
pub fn uncolor(g: &Graph, chi_hat: &Partition, d: f64, k: usize) -> Result<UncolorReport> {
    if chi_hat.n() != g.n() {
        return Err(Error::SizeMismatch { expected: g.n(), got: chi_hat.n() });
    }
    if chi_hat.k() > k {
        return Err(Error::InvalidParameter(format!("candidate uses {} colors, k = {k}", chi_hat.k())));
    }
    let n = g.n();
    let threshold = d / (6.0 * k as f64);
    let mut pc = PartialColoring { colors: chi_hat.chi().iter().map(|&c| Some(c)).collect(), k };
    let mut counts = vec![vec![0usize; k]; n];
    for e in g.edges() {
        counts[e.u][chi_hat.color(e.v)] += 1;
        counts[e.v][chi_hat.color(e.u)] += 1;
    }
    let free = |x: usize, pc: &mut PartialColoring, counts: &mut Vec<Vec<usize>>| {
        if let Some(c) = pc.colors[x].take() {
            for &(y, _) in g.neighbors(x) {
                counts[y][c] -= 1;
            }
        }
    };
    let mut passes = 0;
    let mut conflicts_cleared = 0;
    loop {
        loop {
            passes += 1;
            let mut changed = false;
            for x in 0..n {
                if let Some(c) = pc.colors[x] {
                    if (0..k).any(|b| b != c && (counts[x][b] as f64) < threshold) {
                        free(x, &mut pc, &mut counts);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut cleared = false;
        for e in g.edges() {
            if pc.colors[e.u].is_some() && pc.colors[e.u] == pc.colors[e.v] {
                free(e.u, &mut pc, &mut counts);
                free(e.v, &mut pc, &mut counts);
                conflicts_cleared += 2;
                cleared = true;
            }
        }
        if !cleared {
            break;
        }
    }
    assert_proper(g, &pc, "uncolor");
    Ok(UncolorReport { coloring: pc, passes, conflicts_cleared })
}

/// Repeatedly colors any free vertex whose colored neighbours use exactly
/// k−1 colors with the missing one.
pub fn safe_recolor(g: &Graph, pc: &PartialColoring) -> Result<PartialColoring> {
    if pc.colors.len() != g.n() {
        return Err(Error::SizeMismatch { expected: g.n(), got: pc.colors.len() });
    }
    if let Some((u, v)) = pc.conflict(g) {
        return Err(Error::InvalidParameter(format!("partial coloring is improper on edge {{{u}, {v}}}")));
    }
    let k = pc.k;
    let mut out = pc.clone();
    let mut used = vec![false; k];
    loop {
        let mut changed = false;
        for x in 0..g.n() {
            if out.colors[x].is_some() {
                continue;
            }
            used.iter_mut().for_each(|u| *u = false);
            for &(y, _) in g.neighbors(x) {
                if let Some(c) = out.colors[y] {
                    used[c] = true;
                }
            }
            if used.iter().filter(|&&u| u).count() + 1 == k {
                out.colors[x] = used.iter().position(|&u| !u);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    assert_proper(g, &out, "safe_recolor");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FinishFailure {
    Oversized { component: Vec<usize>, limit: usize },
    Unextendable { component: Vec<usize> },
}

/// ⌈ln n⌉, at least 1.
pub fn default_size_limit(n: usize) -> usize {
    ((n.max(1) as f64).ln().ceil() as usize).max(1)
}

/// Components of the free vertices, ordered by smallest vertex.
pub fn free_components(g: &Graph, pc: &PartialColoring) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] || pc.colors[s].is_some() {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            for &(y, _) in g.neighbors(comp[i]) {
                if !seen[y] && pc.colors[y].is_none() {
                    seen[y] = true;
                    comp.push(y);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Lexicographically first coloring of `comp` compatible with `colors`.
fn extend_component(g: &Graph, comp: &[usize], colors: &mut [Option<usize>], k: usize) -> bool {
    fn go(g: &Graph, comp: &[usize], i: usize, colors: &mut [Option<usize>], k: usize) -> bool {
        if i == comp.len() {
            return true;
        }
        let x = comp[i];
        for c in 0..k {
            if g.neighbors(x).iter().any(|&(y, _)| colors[y] == Some(c)) {
                continue;
            }
            colors[x] = Some(c);
            if go(g, comp, i + 1, colors, k) {
                return true;
            }
        }
        colors[x] = None;
        false
    }
    go(g, comp, 0, colors, k)
}

/// Brute-forces every free component of size ≤ `size_limit`; fails on the first
/// component that is too large or has no proper completion.
pub fn finish_by_components(
    g: &Graph,
    pc: &PartialColoring,
    size_limit: usize,
) -> std::result::Result<Partition, FinishFailure> {
    assert_proper(g, pc, "finish_by_components input");
    let mut colors = pc.colors.clone();
    for comp in free_components(g, pc) {
        if comp.len() > size_limit {
            return Err(FinishFailure::Oversized { component: comp, limit: size_limit });
        }
        if !extend_component(g, &comp, &mut colors, pc.k) {
            return Err(FinishFailure::Unextendable { component: comp });
        }
    }
    let chi: Vec<usize> = colors.into_iter().map(|c| c.expect("every vertex colored")).collect();
    let p = Partition::new(chi, pc.k).expect("colors below k");
    debug_assert!(g.edges().iter().all(|e| p.color(e.u) != p.color(e.v)));
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FullRecoveryParams {
    pub recovery: RecoveryParams,
    /// Free-component size limit; ⌈ln n⌉ when absent.
    pub size_limit: Option<usize>,
}

impl Default for FullRecoveryParams {
    fn default() -> Self {
        FullRecoveryParams { recovery: RecoveryParams { lambda: DEFAULT_PLANTED_LAMBDA, ..Default::default() }, size_limit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDiagnostics {
    pub index: usize,
    pub uncolored: usize,
    pub conflicts_cleared: usize,
    pub recolored: usize,
    pub free_after_recolor: usize,
    pub components: usize,
    pub largest_component: usize,
    pub failure: Option<FinishFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRecovery {
    pub partition: Option<Partition>,
    pub candidate_index: Option<usize>,
    pub candidates: usize,
    pub host_lambda2: Option<f64>,
    pub diagnostics: Vec<CandidateDiagnostics>,
    pub warnings: Vec<String>,
}

fn repair_candidate(
    g: &Graph,
    chi_hat: &Partition,
    d: f64,
    k: usize,
    limit: usize,
    index: usize,
) -> Result<(Option<Partition>, CandidateDiagnostics)> {
    let un = uncolor(g, chi_hat, d, k)?;
    let free_before = un.coloring.free_set().len();
    let re = safe_recolor(g, &un.coloring)?;
    let free_after = re.free_set().len();
    let comps = free_components(g, &re);
    let result = finish_by_components(g, &re, limit);
    let diag = CandidateDiagnostics {
        index,
        uncolored: free_before,
        conflicts_cleared: un.conflicts_cleared,
        recolored: free_before - free_after,
        free_after_recolor: free_after,
        components: comps.len(),
        largest_component: comps.iter().map(|c| c.len()).max().unwrap_or(0),
        failure: result.as_ref().err().cloned(),
    };
    Ok((result.ok(), diag))
}

/// List recovery followed by uncolor → safe_recolor → finish_by_components on
/// every candidate; returns the first candidate (by index) that completes.
/// Only the graph, d and k of `inst` are used; the planted coloring is not read.
pub fn recover_full(inst: &PlantedInstance, params: &FullRecoveryParams) -> Result<FullRecovery> {
    let k = inst.k();
    let g = &inst.graph;
    let mut warnings = Vec::new();
    let host_lambda2 = match eigenvalues_sym(&(inst.host.adjacency_matrix() / inst.d)) {
        Ok(ev) => ev.get(1).copied(),
        Err(_) => None,
    };
    let wanted = 1.0 / (16.0 * (k * k) as f64);
    if let Some(l2) = host_lambda2 {
        if l2 >= wanted {
            warnings.push(format!("host λ₂ = {l2:.4} is not below 1/(16k²) = {wanted:.4}"));
        }
    }
    if inst.d < DEFAULT_MIN_DEGREE {
        warnings.push(format!("host degree {} is below {DEFAULT_MIN_DEGREE}", inst.d));
    }
    let list = recover_partial_list(g, inst.d, k, &params.recovery)?;
    let limit = params.size_limit.unwrap_or_else(|| default_size_limit(g.n()));
    let results: Vec<(Option<Partition>, CandidateDiagnostics)> = list
        .partitions
        .par_iter()
        .enumerate()
        .map(|(i, chi_hat)| repair_candidate(g, chi_hat, inst.d, k, limit, i))
        .collect::<Result<_>>()?;
    let mut partition = None;
    let mut candidate_index = None;
    let mut diagnostics = Vec::with_capacity(results.len());
    for (p, diag) in results {
        if partition.is_none() && p.is_some() {
            candidate_index = Some(diag.index);
            partition = p;
        }
        diagnostics.push(diag);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FullRecovery { partition, candidate_index, candidates: list.len(), host_lambda2, diagnostics, warnings })
}

/// Vertices with fewer than d/(2k) neighbours in some other planted class.
pub fn statistically_bad(inst: &PlantedInstance) -> Vec<usize> {
    let k = inst.k();
    let threshold = inst.d / (2.0 * k as f64);
    let mut counts = vec![0usize; k];
    (0..inst.graph.n())
        .filter(|&x| {
            counts.iter_mut().for_each(|c| *c = 0);
            for &(y, _) in inst.graph.neighbors(x) {
                counts[inst.planted.color(y)] += 1;
            }
            let own = inst.planted.color(x);
            (0..k).any(|c| c != own && (counts[c] as f64) < threshold)
        })
        .collect()
}

/// Largest |class size − n/k| of the planted coloring.
pub fn class_deviation(p: &Partition) -> f64 {
    let mean = p.n() as f64 / p.k() as f64;
    p.class_sizes().iter().map(|&s| (s as f64 - mean).abs()).fold(0.0, f64::max)
}

/// M(k/((k−1)d)·A_G, χ) for the planted χ.
pub fn planted_model(inst: &PlantedInstance) -> Result<ModelMatrix> {
    model_matrix(&planting_adjacency(&inst.graph, inst.d, inst.k())?, &inst.planted)
}

/// Per-pair variance of D_x^b under the planting normalization.
pub fn planted_variance(inst: &PlantedInstance) -> Result<Vec<Vec<f64>>> {
    let a = planting_adjacency(&inst.graph, inst.d, inst.k())?;
    let model = model_matrix(&a, &inst.planted)?;
    Ok(per_pair_variance(&a, &inst.planted, &model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankKeptCheck {
    pub r1: f64,
    pub r2: f64,
    pub t1: usize,
    pub t2: usize,
    pub bottom: usize,
    pub top: usize,
    pub holds: bool,
}

/// Compares threshold ranks of A_H/c and A_G/c: rank_{≤−(r1+r2)}(G) ≤ k t1 + t2
/// and rank_{≥r1+r2}(G) ≤ t1 + k t2, where t1 = max(1, rank_{≥r1}(H)) and
/// t2 = max(1, rank_{≤−r2}(H)).
pub fn threshold_rank_kept(inst: &PlantedInstance, c: f64, r1: f64, r2: f64) -> Result<RankKeptCheck> {
    const SLACK: f64 = crate::spectral::EIG_SLACK;
    let k = inst.k();
    let h = eigenvalues_sym(&(inst.host.adjacency_matrix() / c))?;
    let g = eigenvalues_sym(&(inst.graph.adjacency_matrix() / c))?;
    let t1 = h.iter().filter(|&&x| x >= r1 - SLACK).count().max(1);
    let t2 = h.iter().filter(|&&x| x <= -r2 + SLACK).count().max(1);
    let bottom = g.iter().filter(|&&x| x <= -(r1 + r2) - SLACK).count();
    let top = g.iter().filter(|&&x| x >= r1 + r2 + SLACK).count();
    Ok(RankKeptCheck { r1, r2, t1, t2, bottom, top, holds: bottom <= k * t1 + t2 && top <= t1 + k * t2 })
}

/// (|E(G_S)|, (d|S|/2)(|S|/n + c)).
pub fn edge_density_bound(g: &Graph, d: f64, c: f64, s: &[usize]) -> (usize, f64) {
    let mut member = vec![false; g.n()];
    for &x in s {
        member[x] = true;
    }
    let inside = g.edges().iter().filter(|e| member[e.u] && member[e.v]).count();
    let sz = s.len() as f64;
    (inside, d * sz / 2.0 * (sz / g.n() as f64 + c))
}

/// (|N(S)∖S|, (1/(c + √α) − 1)|S|) with α = |S|/n.
pub fn vertex_expansion_bound(g: &Graph, c: f64, s: &[usize]) -> (usize, f64) {
    let mut member = vec![false; g.n()];
    for &x in s {
        member[x] = true;
    }
    let mut boundary = vec![false; g.n()];
    for &x in s {
        for &(y, _) in g.neighbors(x) {
            if !member[y] {
                boundary[y] = true;
            }
        }
    }
    let alpha = s.len() as f64 / g.n() as f64;
    (boundary.iter().filter(|&&b| b).count(), (1.0 / (c + alpha.sqrt()) - 1.0) * s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedManifest {
    pub k: usize,
    pub d: f64,
    pub seed: u64,
    pub n: usize,
    pub host_edges: usize,
    pub removed_edges: usize,
}

impl PlantedManifest {
    pub fn parse(text: &str) -> Result<PlantedManifest> {
        let m: PlantedManifest = serde_json::from_str(text)?;
        if m.k < 2 || !(m.d > 0.0) || m.removed_edges > m.host_edges {
            return Err(Error::InvalidParameter("inconsistent planted manifest".into()));
        }
        Ok(m)
    }
}

pub const HOST_FILE: &str = "host.el";
pub const PLANTED_FILE: &str = "planted.part";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes host edge list, planted partition and manifest into `dir`.
pub fn save_planted(inst: &PlantedInstance, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    io::save_graph(&inst.host, dir.join(HOST_FILE))?;
    io::save_partition(&inst.planted, dir.join(PLANTED_FILE))?;
    let manifest = PlantedManifest {
        k: inst.k(),
        d: inst.d,
        seed: inst.seed,
        n: inst.host.n(),
        host_edges: inst.host.num_edges(),
        removed_edges: inst.host.num_edges() - inst.graph.num_edges(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a directory written by [`save_planted`] and re-derives the planted graph.
pub fn load_planted(dir: impl AsRef<Path>) -> Result<PlantedInstance> {
    let dir = dir.as_ref();
    let manifest = PlantedManifest::parse(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let host = io::load_graph(dir.join(HOST_FILE))?;
    let planted = io::load_partition(dir.join(PLANTED_FILE))?;
    if planted.k() != manifest.k {
        return Err(Error::SizeMismatch { expected: manifest.k, got: planted.k() });
    }
    let mut inst = plant_with(&host, planted)?;
    if inst.host.num_edges() - inst.graph.num_edges() != manifest.removed_edges {
        return Err(Error::InvalidParameter("removed edge count disagrees with manifest".into()));
    }
    inst.d = manifest.d;
    inst.seed = manifest.seed;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::permutation_match;
    use rand::Rng;
    use crate::instances::random_regular;
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn rainbow_triangle_keeps_all_edges() {
        let inst = plant_with(&triangle(), Partition::new(vec![0, 1, 2], 3).unwrap()).unwrap();
        assert_eq!(inst.graph.num_edges(), 3);
    }

    #[test]
    fn single_monochromatic_edge_removed() {
        let inst = plant_with(&triangle(), Partition::new(vec![0, 0, 1], 3).unwrap()).unwrap();
        assert_eq!(inst.graph.num_edges(), 2);
        assert!(!inst.graph.has_edge(0, 1));
    }

    #[test]
    fn k22_removes_exactly_the_monochromatic_crossing_edges() {
        // Parts {0,1} and {2,3}.
        let h = Graph::from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        for code in 0..16usize {
            let chi: Vec<usize> = (0..4).map(|i| (code >> i) & 1).collect();
            let inst = plant_with(&h, Partition::new(chi.clone(), 2).unwrap()).unwrap();
            for &(u, v) in &[(0, 2), (0, 3), (1, 2), (1, 3)] {
                assert_eq!(inst.graph.has_edge(u, v), chi[u] != chi[v]);
            }
        }
    }

    #[test]
    fn planting_is_deterministic() {
        let h = random_regular(60, 6, 1).unwrap();
        assert_eq!(plant_k_coloring(&h, 3, 5).unwrap(), plant_k_coloring(&h, 3, 5).unwrap());
        assert!(plant_k_coloring(&h, 1, 5).is_err());
    }

    #[test]
    fn exact_bipartite_instance_recovers_exactly() {
        // Host = only crossing edges of a 2-coloring, so planting χ removes nothing.
        let h = crate::instances::biregular_random(50, 50, 10, 3).unwrap();
        let chi: Vec<usize> = (0..100).map(|x| usize::from(x >= 50)).collect();
        let inst = plant_with(&h, Partition::new(chi, 2).unwrap()).unwrap();
        assert_eq!(inst.graph.num_edges(), h.num_edges());
        // Scaled spectrum is ±2 on the planted side and at most 1.2 in bulk.
        let params = RecoveryParams { lambda: 1.5, ..Default::default() };
        let list = recover_partial_list(&inst.graph, 10.0, 2, &params).unwrap();
        let best = list
            .partitions
            .iter()
            .map(|p| permutation_match(&inst.planted, &p.labels()).unwrap().1)
            .fold(0.0, f64::max);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn partial_list_on_random_regular_host() {
        let h = random_regular(600, 50, 1).unwrap();
        let inst = plant_k_coloring(&h, 3, 1).unwrap();
        let params = RecoveryParams { lambda: 0.4, ..Default::default() };
        let list = recover_partial_list(&inst.graph, 50.0, 3, &params).unwrap();
        let best = list
            .partitions
            .iter()
            .map(|p| permutation_match(&inst.planted, &p.labels()).unwrap().1)
            .fold(0.0, f64::max);
        assert!(best >= 0.98, "best agreement {best}");
    }

    fn complete_bipartite(half: usize) -> Graph {
        let edges: Vec<(usize, usize)> =
            (0..half).flat_map(|u| (half..2 * half).map(move |v| (u, v))).collect();
        Graph::from_edges(2 * half, &edges).unwrap()
    }

    #[test]
    fn partial_list_on_complete_bipartite_host() {
        let h = complete_bipartite(100);
        let inst = plant_k_coloring(&h, 2, 0).unwrap();
        let list = recover_partial_list(&inst.graph, 100.0, 2, &RecoveryParams::default()).unwrap();
        let best = list
            .partitions
            .iter()
            .map(|p| permutation_match(&inst.planted, &p.labels()).unwrap().1)
            .fold(0.0, f64::max);
        assert!(best >= 0.95, "best agreement {best}");
    }

    #[test]
    fn complete_tripartite_host_has_no_bad_vertices() {
        // Classes of 20, d = 40: each vertex has 20 neighbours per other class, threshold 40/6.
        let mut edges = Vec::new();
        for u in 0..60usize {
            for v in u + 1..60 {
                if u / 20 != v / 20 {
                    edges.push((u, v));
                }
            }
        }
        let h = Graph::from_edges(60, &edges).unwrap();
        let inst = plant_with(&h, Partition::new((0..60).map(|x| x / 20).collect(), 3).unwrap()).unwrap();
        assert_eq!(inst.graph.num_edges(), h.num_edges());
        assert!(statistically_bad(&inst).is_empty());
    }

    #[test]
    fn exact_coloring_without_bad_vertices_is_a_fixpoint() {
        let h = crate::instances::biregular_random(40, 40, 20, 0).unwrap();
        let p = Partition::new((0..80).map(|x| usize::from(x >= 40)).collect(), 2).unwrap();
        let inst = plant_with(&h, p.clone()).unwrap();
        assert!(statistically_bad(&inst).is_empty());
        let out = uncolor(&inst.graph, &p, 20.0, 2).unwrap();
        assert_eq!(out.coloring, PartialColoring::from_partition(&p));
    }

    #[test]
    fn vertex_missing_a_color_is_uncolored() {
        // Vertex 0 colored 0 with neighbours colored only 1; k = 3, d = 30.
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let p = Partition::new(vec![0, 1, 1, 1], 3).unwrap();
        let out = uncolor(&g, &p, 30.0, 3).unwrap();
        assert_eq!(out.coloring.colors[0], None);
    }

    #[test]
    fn safe_recolor_forced_and_unforced_moves() {
        let g = Graph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let pc = PartialColoring { colors: vec![None, Some(0), Some(1)], k: 3 };
        assert_eq!(safe_recolor(&g, &pc).unwrap().colors[0], Some(2));
        let pc = PartialColoring { colors: vec![None, Some(0), Some(0)], k: 3 };
        assert_eq!(safe_recolor(&g, &pc).unwrap().colors[0], None);
    }

    #[test]
    fn safe_recolor_cascades_along_a_path() {
        // Path 0-1-2-…-9 with pendant anchors: vertex i also sees an anchor colored i mod 2,
        // so once its predecessor is colored it has k−1 = 2 colors around it.
        let len = 10;
        let mut edges: Vec<(usize, usize)> = (0..len - 1).map(|i| (i, i + 1)).collect();
        let mut colors = vec![None; 2 * len];
        for i in 0..len {
            edges.push((i, len + i));
            colors[len + i] = Some(2);
        }
        colors[0] = Some(0);
        let g = Graph::from_edges(2 * len, &edges).unwrap();
        let out = safe_recolor(&g, &PartialColoring { colors, k: 3 }).unwrap();
        assert!(out.free_set().is_empty());
        assert!(out.conflict(&g).is_none());
    }

    #[test]
    fn finish_completes_singletons_and_triangles() {
        let g = Graph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let pc = PartialColoring { colors: vec![None, Some(0), Some(1)], k: 3 };
        assert_eq!(finish_by_components(&g, &pc, 3).unwrap().chi(), &[2, 0, 1]);
        let pc = PartialColoring { colors: vec![None; 3], k: 3 };
        assert_eq!(finish_by_components(&triangle(), &pc, 3).unwrap().chi(), &[0, 1, 2]);
    }

    #[test]
    fn finish_reports_oversized_components() {
        let edges: Vec<(usize, usize)> = (0..29).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(30, &edges).unwrap();
        let pc = PartialColoring { colors: vec![None; 30], k: 3 };
        match finish_by_components(&g, &pc, 10) {
            Err(FinishFailure::Oversized { component, limit }) => {
                assert_eq!(component.len(), 30);
                assert_eq!(limit, 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn finish_reports_unextendable_components() {
        // Free vertex 0 sees all three colors.
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let pc = PartialColoring { colors: vec![None, Some(0), Some(1), Some(2)], k: 3 };
        assert_eq!(finish_by_components(&g, &pc, 5), Err(FinishFailure::Unextendable { component: vec![0] }));
    }

    #[test]
    fn statistically_bad_threshold() {
        // d = 6, k = 3: vertex 0 has no neighbour of color 2.
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let inst = PlantedInstance {
            host: g.clone(),
            planted: Partition::new(vec![0, 1, 1, 1], 3).unwrap(),
            graph: g,
            d: 6.0,
            seed: 0,
        };
        assert!(statistically_bad(&inst).contains(&0));
    }

    #[test]
    fn statistically_bad_is_rare_on_random_hosts() {
        let h = random_regular(600, 50, 2).unwrap();
        let inst = plant_k_coloring(&h, 3, 2).unwrap();
        assert!(statistically_bad(&inst).len() as f64 / 600.0 <= 0.02);
    }

    #[test]
    fn uncolor_cleans_up_flipped_colors() {
        let h = random_regular(600, 50, 3).unwrap();
        let inst = plant_k_coloring(&h, 3, 3).unwrap();
        let mut chi = inst.planted.chi().to_vec();
        for x in (0..600).step_by(100) {
            chi[x] = (chi[x] + 1) % 3;
        }
        let out = uncolor(&inst.graph, &Partition::new(chi, 3).unwrap(), 50.0, 3).unwrap();
        assert!(out.coloring.conflict(&inst.graph).is_none());
        assert!(out.coloring.free_fraction() <= 0.04);
    }

    #[test]
    fn full_recovery_on_complete_bipartite_host() {
        let h = complete_bipartite(50);
        let inst = plant_k_coloring(&h, 2, 0).unwrap();
        let out = recover_full(&inst, &FullRecoveryParams::default()).unwrap();
        let p = out.partition.expect("full coloring");
        assert!(inst.graph.edges().iter().all(|e| p.color(e.u) != p.color(e.v)));
    }

    #[test]
    fn disconnected_host_warns() {
        let a = random_regular(60, 10, 1).unwrap();
        let h = a.disjoint_union(&random_regular(60, 10, 2).unwrap());
        let inst = plant_k_coloring(&h, 3, 0).unwrap();
        let params = FullRecoveryParams::default();
        if let Ok(out) = recover_full(&inst, &params) {
            assert!(!out.warnings.is_empty());
        }
    }

    #[test]
    fn planted_directory_round_trips() {
        let h = random_regular(40, 4, 1).unwrap();
        let inst = plant_k_coloring(&h, 3, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_planted(&inst, dir.path()).unwrap();
        assert_eq!(load_planted(dir.path()).unwrap(), inst);
    }

    #[test]
    fn rank_kept_on_a_planted_instance() {
        let h = random_regular(200, 20, 4).unwrap();
        let inst = plant_k_coloring(&h, 3, 4).unwrap();
        for r in [0.1, 0.2, 0.3, 0.45] {
            assert!(threshold_rank_kept(&inst, 20.0, r, r).unwrap().holds);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn plant_removes_exactly_monochromatic_edges(seed in any::<u64>(), k in 2usize..5) {
            let h = random_regular(30, 4, seed % 7).unwrap();
            let inst = plant_k_coloring(&h, k, seed).unwrap();
            let mono = h.edges().iter().filter(|e| inst.planted.color(e.u) == inst.planted.color(e.v)).count();
            prop_assert_eq!(inst.graph.num_edges() + mono, h.num_edges());
            prop_assert!(inst.graph.edges().iter().all(|e| inst.planted.color(e.u) != inst.planted.color(e.v)));
        }

        #[test]
        fn repair_pipeline_stays_proper(seed in any::<u64>(), flips in 0usize..40) {
            let h = random_regular(80, 12, seed % 5).unwrap();
            let inst = plant_k_coloring(&h, 3, seed).unwrap();
            let mut rng = rng_for(seed, 7);
            let mut chi = inst.planted.chi().to_vec();
            for _ in 0..flips {
                let x = rng.random_range(0..80);
                chi[x] = rng.random_range(0..3);
            }
            let un = uncolor(&inst.graph, &Partition::new(chi, 3).unwrap(), 12.0, 3).unwrap();
            prop_assert!(un.coloring.conflict(&inst.graph).is_none());
            let re = safe_recolor(&inst.graph, &un.coloring).unwrap();
            prop_assert!(re.conflict(&inst.graph).is_none());
            prop_assert!(re.free_set().len() <= un.coloring.free_set().len());
            if let Ok(p) = finish_by_components(&inst.graph, &re, 80) {
                prop_assert!(inst.graph.edges().iter().all(|e| p.color(e.u) != p.color(e.v)));
            }
        }

        #[test]
        fn planted_graph_never_gains_threshold_rank_beyond_the_bound(seed in any::<u64>(), r in 0.05f64..0.6) {
            let h = random_regular(60, 8, seed % 3).unwrap();
            let inst = plant_k_coloring(&h, 3, seed).unwrap();
            prop_assert!(threshold_rank_kept(&inst, 8.0, r, r).unwrap().holds);
        }
    }
}
