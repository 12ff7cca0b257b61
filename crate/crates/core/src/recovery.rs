//! Recovering hidden partitions from the extreme eigenspaces of a matrix.
//!
//! The pipeline nets the unit sphere of the span of eigenvectors whose
//! eigenvalues are large in magnitude, groups at most `k` net vectors, and
//! clusters vertices by their coordinates in those vectors.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ModelMatrix, Partition};
use crate::spectral::{eig_sym, SpectralDecomposition};

const NET_SAMPLING_CONSTANT: f64 = 3.0;
const ALL_SUBSETS_LIMIT: usize = 20;
const GREEDY_SEEDS: usize = 16;
const KMEANS_RESTARTS: usize = 4;
const KMEANS_ITERS: usize = 100;
const GRID_COARSENING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    /// Enumerates class centers on the resolution grid.
    Exhaustive,
    /// Lloyd iterations from quantile and random seedings.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryParams {
    pub lambda: f64,
    pub eta: f64,
    pub net_resolution: f64,
    pub rank_cap: usize,
    pub separation_alpha: f64,
    pub min_class_fraction: f64,
    pub norm_bound: f64,
    pub max_candidates: usize,
    pub seed: u64,
    pub mode: ClusterMode,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            lambda: 0.3,
            eta: 0.1,
            net_resolution: 1.0,
            rank_cap: 8,
            separation_alpha: 0.5,
            min_class_fraction: 0.1,
            norm_bound: 1.0,
            max_candidates: 20_000,
            seed: 0,
            mode: ClusterMode::Heuristic,
        }
    }
}

impl RecoveryParams {
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.net_resolution > 0.0 && self.net_resolution <= 1.0) {
            return bad("net_resolution must lie in (0, 1]");
        }
        if self.rank_cap < 1 {
            return bad("rank_cap must be at least 1");
        }
        if !(self.separation_alpha > 0.0) {
            return bad("separation_alpha must be positive");
        }
        if !(self.min_class_fraction > 0.0 && self.min_class_fraction <= 1.0 / k.max(1) as f64 + 1e-12) {
            return bad("min_class_fraction must lie in (0, 1/k]");
        }
        if self.max_candidates < 1 {
            return bad("max_candidates must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Indices into the vector list that fed the clustering.
    pub vectors: Vec<usize>,
    pub mode: ClusterMode,
    /// Grid spacing for exhaustive mode, restart index for heuristic mode.
    pub grid_resolution: Option<f64>,
    pub restart: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vectors: Vec<Vec<f64>>,
    pub partitions: Vec<Partition>,
    pub provenance: Vec<Provenance>,
    /// Eigenvalues spanning the enumerated subspace.
    #[serde(default)]
    pub eigenvalues: Vec<f64>,
    /// Size of the ε-net that the clustering drew from.
    #[serde(default)]
    pub net_size: usize,
    pub capped: bool,
    pub max_candidates: usize,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    fn push_unique(&mut self, seen: &mut HashSet<Vec<usize>>, p: Partition, prov: Provenance) -> bool {
        if self.partitions.len() >= self.max_candidates {
            self.capped = true;
            return false;
        }
        if seen.insert(p.canonical().chi().to_vec()) {
            self.partitions.push(p);
            self.provenance.push(prov);
        }
        true
    }
}

fn net_count(dim: usize, resolution: f64) -> f64 {
    let m = (4.0 / resolution).powi(dim as i32);
    (NET_SAMPLING_CONSTANT * m * m.ln()).ceil() + 2.0 * dim as f64
}

/// Random unit vectors covering the sphere in `dim` dimensions at the given resolution,
/// preceded by the signed basis vectors.
pub fn epsilon_net(dim: usize, resolution: f64, seed: u64, max_candidates: usize) -> Result<Vec<DVector<f64>>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("net dimension must be at least 1".into()));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidParameter(format!("net resolution must lie in (0, 1], got {resolution}")));
    }
    let total = net_count(dim, resolution);
    if !(total <= max_candidates as f64) {
        return Err(Error::NetTooLarge { projected: total, cap: max_candidates });
    }
    let random = total as usize - 2 * dim;
    let mut out = Vec::with_capacity(total as usize);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = sign;
            out.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < 2 * dim + random {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EigenspaceNet {
    pub eigenvalues: Vec<f64>,
    /// n × dim orthonormal basis of the subspace.
    pub basis: DMatrix<f64>,
    /// Net points lifted to unit n-vectors.
    pub vectors: Vec<DVector<f64>>,
}

pub fn eigenspace_net(spec: &SpectralDecomposition, params: &RecoveryParams) -> Result<EigenspaceNet> {
    let idx = spec.extreme_indices(params.lambda);
    if idx.is_empty() {
        return Err(Error::EmptyEigenspace);
    }
    if idx.len() > params.rank_cap {
        return Err(Error::RankCapExceeded { dim: idx.len(), cap: params.rank_cap });
    }
    let n = spec.n();
    let mut basis = DMatrix::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        basis.set_column(j, &spec.eigenvectors.column(i));
    }
    let net = epsilon_net(idx.len(), params.net_resolution, params.seed, params.max_candidates)?;
    let vectors = net.iter().map(|c| &basis * c).collect();
    Ok(EigenspaceNet { eigenvalues: idx.iter().map(|&i| spec.eigenvalues[i]).collect(), basis, vectors })
}

/// ε-net of the unit sphere of the span of eigenvectors of `a` with |eigenvalue| ≥ λ.
pub fn eigenspace_candidates(a: &DMatrix<f64>, params: &RecoveryParams) -> Result<EigenspaceNet> {
    eigenspace_net(&eig_sym(a)?, params)
}

fn argmin_class(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (a, c) in centers.iter().enumerate() {
        let d: f64 = point.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
        if d < best_d {
            best_d = d;
            best = a;
        }
    }
    best
}

fn embedding(hat_us: &[DVector<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = hat_us[0].len();
    if let Some(bad) = hat_us.iter().find(|u| u.len() != n) {
        return Err(Error::SizeMismatch { expected: n, got: bad.len() });
    }
    Ok((0..n).map(|x| hat_us.iter().map(|u| u[x]).collect()).collect())
}

fn combinations(m: usize, k: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !visit(&idx) {
            return;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(m: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

fn exhaustive_cluster(
    points: &[Vec<f64>],
    k: usize,
    params: &RecoveryParams,
    out: &mut CandidateList,
    seen: &mut HashSet<Vec<usize>>,
    source: &[usize],
) {
    let n = points.len() as f64;
    let bound = 1.0 / (params.min_class_fraction * n).sqrt();
    let mut h = params.separation_alpha / (12.0 * k as f64 * n).sqrt();
    let cells = loop {
        let top = (2.0 * bound / h).floor() as i64;
        let mut cells: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        for p in points {
            let key = p.iter().map(|&v| (((v.clamp(-bound, bound) + bound) / h).floor() as i64).min(top)).collect();
            *cells.entry(key).or_insert(0) += 1;
        }
        let budget = out.max_candidates.saturating_sub(out.partitions.len()).max(1) as f64;
        if binomial(cells.len(), k.min(cells.len())) <= budget || cells.len() <= k {
            break cells;
        }
        h *= GRID_COARSENING;
    };
    let centers: Vec<Vec<f64>> = cells
        .keys()
        .map(|key| key.iter().map(|&i| ((i as f64 + 0.5) * h - bound).min(bound)).collect())
        .collect();
    let pick = k.min(centers.len());
    combinations(centers.len(), pick, |combo| {
        let chosen: Vec<Vec<f64>> = combo.iter().map(|&i| centers[i].clone()).collect();
        let chi = points.iter().map(|p| argmin_class(p, &chosen)).collect();
        let p = Partition::new(chi, k).expect("labels below k");
        out.push_unique(
            seen,
            p,
            Provenance { vectors: source.to_vec(), mode: ClusterMode::Exhaustive, grid_resolution: Some(h), restart: None },
        )
    });
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Vec<usize> {
    let dim = points[0].len();
    let mut assign: Vec<usize> = points.iter().map(|p| argmin_class(p, &centers)).collect();
    for _ in 0..KMEANS_ITERS {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (a, c) in centers.iter_mut().enumerate() {
            if counts[a] > 0 {
                for (ci, s) in c.iter_mut().zip(&sums[a]) {
                    *ci = s / counts[a] as f64;
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| argmin_class(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            centers.push(points[rng.random_range(0..points.len())].clone());
            continue;
        }
        let mut r = rng.random::<f64>() * total;
        let mut chosen = points.len() - 1;
        for (i, w) in d.iter().enumerate() {
            if r < *w {
                chosen = i;
                break;
            }
            r -= w;
        }
        centers.push(points[chosen].clone());
    }
    centers
}

fn heuristic_cluster(
    points: &[Vec<f64>],
    k: usize,
    params: &RecoveryParams,
    out: &mut CandidateList,
    seen: &mut HashSet<Vec<usize>>,
    source: &[usize],
) {
    let dim = points[0].len();
    let n = points.len();
    let mut inits = Vec::new();
    for j in 0..dim {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| points[a][j].total_cmp(&points[b][j]).then(a.cmp(&b)));
        let centers = (0..k).map(|a| points[order[((2 * a + 1) * n / (2 * k)).min(n - 1)]].clone()).collect();
        inits.push(centers);
    }
    let salt = source.iter().fold(params.seed, |h, &i| h.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(salt);
    for _ in 0..KMEANS_RESTARTS {
        inits.push(plus_plus_seeds(points, k, &mut rng));
    }
    for (restart, centers) in inits.into_iter().enumerate() {
        let chi = lloyd(points, centers);
        let p = Partition::new(chi, k).expect("labels below k");
        let prov = Provenance { vectors: source.to_vec(), mode: ClusterMode::Heuristic, grid_resolution: None, restart: Some(restart) };
        if !out.push_unique(seen, p, prov) {
            return;
        }
    }
}

/// Clusters vertices by their coordinates in `hat_us`, one partition per center guess.
pub fn spectral_cluster(hat_us: &[DVector<f64>], k: usize, params: &RecoveryParams) -> Result<CandidateList> {
    if hat_us.is_empty() {
        return Err(Error::InvalidParameter("spectral_cluster needs at least one vector".into()));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("spectral_cluster needs k ≥ 2".into()));
    }
    if hat_us.len() > k {
        return Err(Error::InvalidParameter(format!("at most k = {k} vectors, got {}", hat_us.len())));
    }
    let mut out = CandidateList {
        vectors: hat_us.iter().map(|u| u.iter().cloned().collect()).collect(),
        max_candidates: params.max_candidates,
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let source: Vec<usize> = (0..hat_us.len()).collect();
    cluster_into(&embedding(hat_us)?, k, params, &mut out, &mut seen, &source);
    Ok(out)
}

fn cluster_into(
    points: &[Vec<f64>],
    k: usize,
    params: &RecoveryParams,
    out: &mut CandidateList,
    seen: &mut HashSet<Vec<usize>>,
    source: &[usize],
) {
    if points.is_empty() {
        return;
    }
    match params.mode {
        ClusterMode::Exhaustive => exhaustive_cluster(points, k, params, out, seen, source),
        ClusterMode::Heuristic => heuristic_cluster(points, k, params, out, seen, source),
    }
}

/// Index subsets of `vectors` to feed the clustering: every subset of size ≤ `size`
/// for short lists, otherwise greedy near-orthogonal groups grown from the first vectors.
pub fn candidate_subsets(vectors: &[DVector<f64>], size: usize) -> Vec<Vec<usize>> {
    let m = vectors.len();
    let size = size.min(m);
    let mut out = Vec::new();
    if m <= ALL_SUBSETS_LIMIT {
        for s in 1..=size {
            combinations(m, s, |c| {
                out.push(c.to_vec());
                true
            });
        }
        return out;
    }
    let mut seen = HashSet::new();
    for seed in 0..GREEDY_SEEDS.min(m) {
        let mut chosen = vec![seed];
        while chosen.len() < size {
            let next = (0..m)
                .filter(|j| !chosen.contains(j))
                .map(|j| {
                    let overlap = chosen.iter().map(|&c| vectors[j].dot(&vectors[c]).abs()).fold(0.0, f64::max);
                    (j, overlap)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            match next {
                Some((j, _)) => chosen.push(j),
                None => break,
            }
        }
        let mut key = chosen.clone();
        key.sort_unstable();
        if seen.insert(key) {
            out.push(chosen);
        }
    }
    out
}

pub fn recover_partitions_with(spec: &SpectralDecomposition, k: usize, params: &RecoveryParams) -> Result<CandidateList> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    params.validate(k)?;
    let net = eigenspace_net(spec, params)?;
    let dim = net.eigenvalues.len();
    let mut out = CandidateList {
        eigenvalues: net.eigenvalues.clone(),
        net_size: net.vectors.len(),
        max_candidates: params.max_candidates,
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let n = spec.n();
    // Net coordinates are enough for grouping since the basis is orthonormal.
    let coords: Vec<DVector<f64>> = net.vectors.iter().map(|v| net.basis.transpose() * v).collect();
    for subset in candidate_subsets(&coords, k.min(dim)) {
        let points: Vec<Vec<f64>> = (0..n).map(|x| subset.iter().map(|&i| net.vectors[i][x]).collect()).collect();
        cluster_into(&points, k, params, &mut out, &mut seen, &subset);
        if out.capped {
            log::warn!("candidate list capped at {} partitions", params.max_candidates);
            break;
        }
    }
    Ok(out)
}

/// Candidate k-partitions of the vertices from the extreme eigenspace of `a`.
pub fn recover_partitions(a: &DMatrix<f64>, k: usize, params: &RecoveryParams) -> Result<CandidateList> {
    recover_partitions_with(&eig_sym(a)?, k, params)
}

/// Minimum Euclidean distance between two rows of `m`.
pub fn row_separation(m: &ModelMatrix) -> f64 {
    let k = m.k();
    let mut best = f64::INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            best = best.min((m.entries.row(a) - m.entries.row(b)).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};
    use proptest::prelude::*;
    use rand::Rng;

    fn unit(v: DVector<f64>) -> DVector<f64> {
        let n = v.norm();
        v / n
    }

    fn lift(chi: &[usize], v: &[f64]) -> DVector<f64> {
        unit(DVector::from_iterator(chi.len(), chi.iter().map(|&c| v[c])))
    }

    fn k22() -> DMatrix<f64> {
        normalized_adjacency(&Graph::from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap()).unwrap()
    }

    fn tripartite(s: usize) -> DMatrix<f64> {
        let n = 3 * s;
        let edges: Vec<_> =
            (0..n).flat_map(|u| (u + 1..n).filter(move |v| u / s != v / s).map(move |v| (u, v))).collect();
        normalized_adjacency(&Graph::from_edges(n, &edges).unwrap()).unwrap()
    }

    #[test]
    fn net_in_one_dimension() {
        let net = epsilon_net(1, 0.5, 0, 1000).unwrap();
        assert_eq!(net.len(), 2 + 50);
        assert!(net.iter().any(|v| v[0] == 1.0) && net.iter().any(|v| v[0] == -1.0));
        for s in [-1.0, 1.0] {
            assert!(net.iter().any(|v| (v[0] - s).abs() <= 0.5));
        }
    }

    #[test]
    fn net_covers_circle() {
        let net = epsilon_net(2, 0.3, 7, 100_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let p = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            assert!(net.iter().any(|v| (v - &p).norm() <= 0.3));
        }
    }

    #[test]
    fn net_cap_enforced() {
        assert!(matches!(epsilon_net(10, 0.01, 0, 20_000), Err(Error::NetTooLarge { .. })));
    }

    #[test]
    fn eigenspace_dimensions() {
        let p = RecoveryParams { lambda: 0.9, ..Default::default() };
        let net = eigenspace_candidates(&k22(), &p).unwrap();
        assert_eq!(net.eigenvalues.len(), 2);
        assert!(net.vectors.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let p = RecoveryParams { lambda: 0.4, ..Default::default() };
        assert_eq!(eigenspace_candidates(&tripartite(3), &p).unwrap().eigenvalues.len(), 3);
        let p = RecoveryParams { lambda: 0.9, rank_cap: 1, ..Default::default() };
        assert!(matches!(eigenspace_candidates(&k22(), &p), Err(Error::RankCapExceeded { dim: 2, cap: 1 })));
    }

    fn exhaustive(alpha: f64, c: f64) -> RecoveryParams {
        RecoveryParams { mode: ClusterMode::Exhaustive, separation_alpha: alpha, min_class_fraction: c, ..Default::default() }
    }

    fn contains(list: &CandidateList, chi: &[usize], k: usize) -> bool {
        let target = Partition::new(chi.to_vec(), k).unwrap().canonical();
        list.partitions.iter().any(|p| p.canonical() == target)
    }

    #[test]
    fn noiseless_two_classes() {
        let chi = [0, 0, 1, 1];
        let u = lift(&chi, &[1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]);
        for params in [exhaustive(0.5, 0.5), RecoveryParams::default()] {
            let list = spectral_cluster(&[u.clone()], 2, &params).unwrap();
            assert!(contains(&list, &chi, 2));
        }
    }

    #[test]
    fn noiseless_three_classes() {
        let chi = [0, 0, 1, 1, 2, 2];
        let us = [lift(&chi, &[1.0, -1.0, 0.0]), lift(&chi, &[1.0, 1.0, -2.0])];
        let list = spectral_cluster(&us, 3, &exhaustive(0.5, 1.0 / 3.0)).unwrap();
        assert!(contains(&list, &chi, 3));
    }

    #[test]
    fn perturbed_coordinate_costs_at_most_one_vertex() {
        let chi = [0, 0, 1, 1];
        let mut u = lift(&chi, &[1.0, -1.0]);
        u[0] -= 0.9 / 2.0;
        let list = spectral_cluster(&[u], 2, &exhaustive(0.5, 0.5)).unwrap();
        let best = list
            .partitions
            .iter()
            .map(|p| crate::eval::permutation_match(&Partition::new(chi.to_vec(), 2).unwrap(), &p.labels()).unwrap().1)
            .fold(0.0, f64::max);
        assert!(best >= 0.75);
    }

    #[test]
    fn cluster_input_errors() {
        let u = DVector::from_vec(vec![1.0, 0.0]);
        assert!(spectral_cluster(&[], 2, &RecoveryParams::default()).is_err());
        assert!(spectral_cluster(&[u.clone()], 1, &RecoveryParams::default()).is_err());
        assert!(spectral_cluster(&[u.clone(), u.clone(), u], 2, &RecoveryParams::default()).is_err());
    }

    #[test]
    fn exact_block_structures_recovered() {
        let chi: Vec<usize> = (0..9).map(|x| x / 3).collect();
        for mode in [ClusterMode::Exhaustive, ClusterMode::Heuristic] {
            let p = RecoveryParams { lambda: 0.4, mode, min_class_fraction: 1.0 / 3.0, ..Default::default() };
            let list = recover_partitions(&tripartite(3), 3, &p).unwrap();
            assert!(contains(&list, &chi, 3), "{mode:?}");
            assert!(list.len() <= p.max_candidates);
            let p = RecoveryParams { lambda: 0.9, mode, min_class_fraction: 0.5, ..Default::default() };
            let list = recover_partitions(&k22(), 2, &p).unwrap();
            assert!(contains(&list, &[0, 0, 1, 1], 2), "{mode:?}");
        }
    }

    #[test]
    fn candidate_cap_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = unit(DVector::from_fn(30, |_, _| rng.random::<f64>() - 0.5));
        let p = RecoveryParams { max_candidates: 3, mode: ClusterMode::Exhaustive, min_class_fraction: 0.3, ..Default::default() };
        let list = spectral_cluster(&[u], 3, &p).unwrap();
        assert!(!list.is_empty() && list.len() <= 3);
        let p = RecoveryParams { lambda: 0.4, max_candidates: 3, ..Default::default() };
        assert!(matches!(recover_partitions(&tripartite(3), 3, &p), Err(Error::NetTooLarge { .. })));
    }

    #[test]
    fn row_separation_examples() {
        let m = |r: &[Vec<f64>]| ModelMatrix::from_rows(r).unwrap();
        let degenerate = m(&[vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        assert_eq!(row_separation(&degenerate), 0.0);
        let balanced = m(&[vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.5, 0.5, 0.0]]);
        assert!((row_separation(&balanced) - 0.5f64.sqrt()).abs() < 1e-15);
        let two = m(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!((row_separation(&two) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn greedy_subsets_for_long_lists() {
        let vs: Vec<DVector<f64>> = epsilon_net(3, 1.0, 1, 10_000).unwrap();
        let subsets = candidate_subsets(&vs, 3);
        assert!(!subsets.is_empty() && subsets.len() <= GREEDY_SEEDS);
        assert!(subsets.iter().all(|s| s.len() == 3));
        // The first subset grows from +e1 and picks the next signed basis vectors.
        assert_eq!(subsets[0], vec![0, 2, 4]);
        assert_eq!(candidate_subsets(&vs[..4], 2).len(), 4 + 6);
    }

    proptest! {
        #[test]
        fn eigenspace_closeness(seed in 0u64..500, k in 1usize..4, scale in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 10;
            let sym = |rng: &mut ChaCha8Rng, s: f64| {
                let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                (&m + m.transpose()) * (0.5 * s)
            };
            let x = sym(&mut rng, 1.0);
            let y = &x + sym(&mut rng, scale);
            let sx = eig_sym(&x).unwrap();
            let sy = eig_sym(&y).unwrap();
            let idx = sx.extreme_indices(0.0);
            let chosen: Vec<usize> = idx[..k].to_vec();
            let lam = chosen.iter().map(|&i| sx.eigenvalues[i].abs()).fold(f64::INFINITY, f64::min);
            let eta = lam * 0.5;
            let mut p = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                if sy.eigenvalues[i].abs() < lam - eta {
                    let v = sy.eigenvectors.column(i);
                    p += &v * v.transpose();
                }
            }
            // A random rotation of the chosen eigenvectors as the orthonormal basis.
            let mut basis = DMatrix::zeros(n, k);
            for (j, &i) in chosen.iter().enumerate() {
                basis.set_column(j, &sx.eigenvectors.column(i));
            }
            let r = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() - 0.5);
            let q = (r.qr()).q();
            let us = &basis * q;
            let lhs: f64 = (0..k).map(|i| (&p * us.column(i)).norm_squared()).sum();
            let rhs: f64 = (0..k).map(|i| ((&x - &y) * us.column(i)).norm_squared()).sum::<f64>() / (eta * eta);
            prop_assert!(lhs <= rhs + 1e-8, "{} > {}", lhs, rhs);
        }

        #[test]
        fn eigenvector_non_uniformity(seed in 0u64..500, k in 2usize..6, lam_frac in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let m = (&m + m.transpose()) * 0.5;
            let d: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
            let c = d.iter().cloned().fold(0.0, f64::max);
            let s = eig_sym(&m).unwrap();
            let zeta = s.spectral_norm();
            let lam = lam_frac * zeta;
            let mut alpha_sq = f64::INFINITY;
            for x in 0..k {
                for y in x + 1..k {
                    let diff = m.column(x) * d[x] - m.column(y) * d[y];
                    alpha_sq = alpha_sq.min(diff.norm_squared());
                }
            }
            prop_assume!(alpha_sq >= 2.0 * c * c * lam * lam);
            let bound = ((alpha_sq - 2.0 * c * c * lam * lam) / (k as f64 * (zeta * zeta - lam * lam))).sqrt();
            let big: Vec<usize> = (0..k).filter(|&r| s.eigenvalues[r].abs() > lam).collect();
            for x in 0..k {
                for y in x + 1..k {
                    let sep = big
                        .iter()
                        .map(|&r| (d[x] * s.eigenvectors[(x, r)] - d[y] * s.eigenvectors[(y, r)]).abs())
                        .fold(0.0, f64::max);
                    prop_assert!(sep >= bound - 1e-9, "{} < {}", sep, bound);
                }
            }
        }

        #[test]
        fn recovered_partitions_are_valid(seed in 0u64..50, cap in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 24;
            let mut edges = Vec::new();
            for u in 0..n {
                edges.push((u, (u + 1) % n));
                for v in u + 2..n {
                    if rng.random_bool(0.25) {
                        edges.push((u, v));
                    }
                }
            }
            let a = normalized_adjacency(&Graph::from_edges(n, &edges).unwrap()).unwrap();
            let p = RecoveryParams { lambda: 0.35, max_candidates: cap.max(20), rank_cap: 24, ..Default::default() };
            if let Ok(list) = recover_partitions(&a, 3, &p) {
                prop_assert!(list.len() <= p.max_candidates);
                prop_assert_eq!(list.partitions.len(), list.provenance.len());
                for part in &list.partitions {
                    prop_assert_eq!(part.n(), n);
                    prop_assert_eq!(part.k(), 3);
                }
            }
        }
    }
}
