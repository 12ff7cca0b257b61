//! Colorings and independent sets from recovered partitions, and model-matrix analytics.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{coloring_quality, maximal_matching_cover, normalized_adjacency, Graph, ModelMatrix, Partition};
use crate::recovery::{epsilon_net, recover_partitions_with, CandidateList, RecoveryParams};
use crate::spectral::{eig_sym, SpectralDecomposition};

pub const STATIONARY_TOL: f64 = 1e-9;
pub const DEFAULT_ROW_TOL: f64 = 0.1;
/// Multiplier c in the independent-set net resolution c·√(γ/(1−λ)).
pub const NET_CONSTANT: f64 = 1.0;
/// Finest resolution used when γ is tiny.
pub const MIN_NET_RESOLUTION: f64 = 0.05;
/// σ used to bound the bottom rank by the top rank when reporting.
const RANK_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColoringProvenance {
    pub k_prime: Option<usize>,
    pub candidate_index: Option<usize>,
    pub candidates: usize,
    pub lambda2: Option<f64>,
    pub subspace_dim: Option<usize>,
    /// Bound s/σ² on rank_{≤−√(τ(1−σ)+σ)} from the top rank s at τ = λ.
    pub bottom_rank_bound: Option<f64>,
    pub bottom_rank_measured: Option<usize>,
    pub params: Option<RecoveryParams>,
    pub variance: Option<Vec<Vec<f64>>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoringResult {
    pub independent_sets: Vec<Vec<usize>>,
    pub covered_fraction: f64,
    pub k_effective: usize,
    pub provenance: ColoringProvenance,
}

impl ColoringResult {
    fn from_sets(n: usize, sets: Vec<Vec<usize>>) -> ColoringResult {
        let covered: usize = sets.iter().map(|s| s.len()).sum();
        ColoringResult {
            k_effective: sets.iter().filter(|s| !s.is_empty()).count(),
            covered_fraction: if n == 0 { 1.0 } else { covered as f64 / n as f64 },
            independent_sets: sets,
            provenance: ColoringProvenance::default(),
        }
    }

    pub fn labels(&self, n: usize) -> Vec<Option<usize>> {
        crate::eval::labels_from_sets(n, &self.independent_sets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowGrouping {
    pub groups: Vec<Vec<usize>>,
    pub representatives: Vec<usize>,
    pub p: Vec<f64>,
}

/// π with π_a M_ab = π_b M_ba, found by chaining ratios along a spanning tree.
pub fn stationary_distribution(m: &ModelMatrix) -> Result<Vec<f64>> {
    let k = m.k();
    if k == 0 {
        return Err(Error::InvalidParameter("empty model matrix".into()));
    }
    if !m.is_row_stochastic(STATIONARY_TOL) {
        return Err(Error::InvalidParameter("model matrix is not row-stochastic".into()));
    }
    let mut pi = vec![0.0; k];
    pi[0] = 1.0;
    let mut seen = vec![false; k];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(a) = queue.pop_front() {
        for b in 0..k {
            if seen[b] || a == b {
                continue;
            }
            let (ab, ba) = (m.get(a, b), m.get(b, a));
            if ab <= 0.0 && ba <= 0.0 {
                continue;
            }
            if ab <= 0.0 || ba <= 0.0 {
                return Err(Error::NotReversible { a, b });
            }
            pi[b] = pi[a] * ab / ba;
            seen[b] = true;
            queue.push_back(b);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::DisconnectedModel);
    }
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    for a in 0..k {
        for b in a + 1..k {
            if (pi[a] * m.get(a, b) - pi[b] * m.get(b, a)).abs() > STATIONARY_TOL {
                return Err(Error::NotReversible { a, b });
            }
        }
    }
    Ok(pi)
}

/// The reversible zero-diagonal 3×3 model with stationary distribution π.
pub fn model_3_from_pi(pi: &[f64]) -> Result<ModelMatrix> {
    if pi.len() != 3 {
        return Err(Error::SizeMismatch { expected: 3, got: pi.len() });
    }
    if pi.iter().any(|&p| !(p > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > STATIONARY_TOL {
        return Err(Error::InvalidParameter("π must be positive and sum to 1".into()));
    }
    let mut m = DMatrix::zeros(3, 3);
    for a in 0..3 {
        for b in 0..3 {
            if a == b {
                continue;
            }
            let value = (2.0 * pi[a] + 2.0 * pi[b] - 1.0) / (2.0 * pi[a]);
            if value < -1e-12 {
                return Err(Error::NegativeModelEntry { a, b, value });
            }
            m[(a, b)] = value.max(0.0);
        }
    }
    Ok(ModelMatrix { entries: m, stationary: Some(pi.to_vec()) })
}

/// Groups rows of `m` equal within `row_tol` (max norm, closed transitively) and
/// returns α = Σ_a min(π_a, Σ_{b≠a in a's group} π_b) with per-group p_i.
pub fn alpha_uncovered_bound(m: &ModelMatrix, row_tol: f64) -> Result<(RowGrouping, f64)> {
    let pi = match &m.stationary {
        Some(pi) => pi.clone(),
        None => stationary_distribution(m)?,
    };
    let k = m.k();
    let mut group_of = vec![usize::MAX; k];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..k {
        if group_of[s] != usize::MAX {
            continue;
        }
        let g = groups.len();
        group_of[s] = g;
        let mut members = vec![s];
        let mut i = 0;
        while i < members.len() {
            let a = members[i];
            for b in 0..k {
                if group_of[b] == usize::MAX && (m.entries.row(a) - m.entries.row(b)).amax() <= row_tol {
                    group_of[b] = g;
                    members.push(b);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        groups.push(members);
    }
    let mut alpha = 0.0;
    for a in 0..k {
        let others: f64 = groups[group_of[a]].iter().filter(|&&b| b != a).map(|&b| pi[b]).sum();
        alpha += pi[a].min(others);
    }
    let mut representatives = Vec::new();
    let mut p = Vec::new();
    for g in &groups {
        let star = *g.iter().max_by(|&&a, &&b| pi[a].total_cmp(&pi[b]).then(b.cmp(&a))).expect("nonempty group");
        let rest: f64 = g.iter().filter(|&&b| b != star).map(|&b| pi[b]).sum();
        representatives.push(star);
        p.push((pi[star] - rest).max(0.0));
    }
    let identity_gap = (1.0 - p.iter().sum::<f64>() - alpha).abs();
    assert!(identity_gap <= 1e-9, "1 − Σp and α differ by {identity_gap}");
    Ok((RowGrouping { groups, representatives, p }, alpha))
}

/// S minus both endpoints of a greedy maximal matching of the edges inside S.
pub fn round_independent_set(g: &Graph, s: &[usize]) -> Vec<usize> {
    let mut member = vec![false; g.n()];
    for &x in s {
        member[x] = true;
    }
    let cover = maximal_matching_cover(g, |e| member[e.u] && member[e.v]);
    for x in cover {
        member[x] = false;
    }
    (0..g.n()).filter(|&x| member[x]).collect()
}

pub fn round_coloring(g: &Graph, p: &Partition) -> ColoringResult {
    let sets = p.classes().iter().map(|class| round_independent_set(g, class)).collect();
    ColoringResult::from_sets(g.n(), sets)
}

fn check_sets(g: &Graph, sets: &[Vec<usize>]) {
    for s in sets {
        assert!(g.is_independent(s), "rounded set is not independent");
    }
}

struct Best {
    result: ColoringResult,
    k_prime: usize,
    index: usize,
    partition: Partition,
}

fn better(a: &ColoringResult, b: &ColoringResult) -> bool {
    a.covered_fraction > b.covered_fraction
        || (a.covered_fraction == b.covered_fraction && a.k_effective < b.k_effective)
}

fn best_of(g: &Graph, list: &CandidateList, k_prime: usize, best: &mut Option<Best>) {
    let rounded: Vec<ColoringResult> = list.partitions.par_iter().map(|p| round_coloring(g, p)).collect();
    for (index, r) in rounded.into_iter().enumerate() {
        if best.as_ref().is_none_or(|b| better(&r, &b.result)) {
            *best = Some(Best { result: r, k_prime, index, partition: list.partitions[index].clone() });
        }
    }
}

fn finish(g: &Graph, spec: &SpectralDecomposition, params: &RecoveryParams, best: Option<Best>, candidates: usize) -> ColoringResult {
    let trivial = ColoringResult::from_sets(g.n(), vec![round_independent_set(g, &(0..g.n()).collect::<Vec<_>>())]);
    let mut warnings = Vec::new();
    let (mut result, k_prime, index, variance) = match best {
        Some(b) => {
            let variance = coloring_quality(g, &b.partition, None).ok().map(|q| q.per_pair_variance);
            (b.result, Some(b.k_prime), Some(b.index), variance)
        }
        None => {
            warnings.push("no candidate partitions were produced".to_string());
            (trivial.clone(), None, None, None)
        }
    };
    if k_prime.is_some() && !better(&result, &trivial) {
        warnings.push("no candidate improves on the trivial single independent set".to_string());
        if better(&trivial, &result) {
            result = trivial;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let s = spec.top_rank(params.lambda);
    let threshold = (params.lambda * (1.0 - RANK_SIGMA) + RANK_SIGMA).sqrt();
    result.provenance = ColoringProvenance {
        k_prime,
        candidate_index: index,
        candidates,
        lambda2: spec.lambda(2),
        subspace_dim: Some(spec.extreme_indices(params.lambda).len()),
        bottom_rank_bound: Some(s as f64 / (RANK_SIGMA * RANK_SIGMA)),
        bottom_rank_measured: Some(spec.bottom_rank(threshold)),
        params: Some(params.clone()),
        variance,
        warnings,
    };
    check_sets(g, &result.independent_sets);
    result
}

/// Colors a one-sided expander by recovering candidate partitions for k′ = k, …, 2
/// and keeping the rounding that covers the most vertices.
pub fn color_expander(g: &Graph, k: usize, params: &RecoveryParams) -> Result<ColoringResult> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let spec = eig_sym(&normalized_adjacency(g)?)?;
    let mut best = None;
    let mut candidates = 0;
    for k_prime in (2..=k).rev() {
        let sweep = RecoveryParams { min_class_fraction: params.min_class_fraction.min(1.0 / k_prime as f64), ..params.clone() };
        let list = recover_partitions_with(&spec, k_prime, &sweep)?;
        candidates += list.len();
        best_of(g, &list, k_prime, &mut best);
    }
    Ok(finish(g, &spec, params, best, candidates))
}

/// Three-coloring of a regular one-sided expander whose largest class has at most (½ − γ)n vertices.
pub fn color_3_expander(g: &Graph, gamma: f64, params: &RecoveryParams) -> Result<ColoringResult> {
    if !g.is_regular() {
        return Err(Error::NonRegular);
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    let params = RecoveryParams {
        separation_alpha: gamma,
        min_class_fraction: params.min_class_fraction.min(1.0 / 3.0),
        ..params.clone()
    };
    let spec = eig_sym(&normalized_adjacency(g)?)?;
    let list = recover_partitions_with(&spec, 3, &params)?;
    let mut best = None;
    best_of(g, &list, 3, &mut best);
    let mut result = finish(g, &spec, &params, best, list.len());
    result.independent_sets.resize(3, Vec::new());
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentSetResult {
    pub set: Vec<usize>,
    pub bottom_rank: usize,
    pub net_resolution: f64,
    pub candidates: usize,
    pub candidate_index: usize,
}

/// Independent set from sign patterns of vectors in the bottom eigenspace.
pub fn find_independent_set(
    g: &Graph,
    gamma: f64,
    lam: f64,
    rank_cap: usize,
    params: &RecoveryParams,
) -> Result<IndependentSetResult> {
    if !g.is_regular() {
        return Err(Error::NonRegular);
    }
    if !(0.0..0.25).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1/4), got {gamma}")));
    }
    if !(lam > 0.0 && lam < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1), got {lam}")));
    }
    let spec = eig_sym(&normalized_adjacency(g)?)?;
    let t = spec.bottom_rank(lam);
    if t > rank_cap {
        return Err(Error::RankCapExceeded { dim: t, cap: rank_cap });
    }
    if t == 0 {
        return Err(Error::EmptyEigenspace);
    }
    let resolution = (NET_CONSTANT * (gamma / (1.0 - lam)).sqrt()).clamp(MIN_NET_RESOLUTION, 1.0);
    let net = epsilon_net(t, resolution, params.seed, params.max_candidates)?;
    let basis = spec.bottom_vectors(t);
    let sets: Vec<Vec<usize>> = net
        .par_iter()
        .map(|c| {
            let u = &basis * c;
            let s: Vec<usize> = (0..g.n()).filter(|&x| u[x] >= 0.0).collect();
            round_independent_set(g, &s)
        })
        .collect();
    let mut index = 0;
    for (i, s) in sets.iter().enumerate() {
        if s.len() > sets[index].len() {
            index = i;
        }
    }
    let set = sets[index].clone();
    assert!(g.is_independent(&set), "rounded set is not independent");
    Ok(IndependentSetResult { set, bottom_rank: t, net_resolution: resolution, candidates: net.len(), candidate_index: index })
}
