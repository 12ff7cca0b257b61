//! Instance generators: random regular and biregular graphs, block models
//! realizing a target model matrix, planted independent sets, and the
//! blow-up and λ₃ constructions used as adversarial inputs.
//!
//! Every generator is a pure function of its arguments and a 64-bit seed.
//! Regenerations after a failed spectral check use stream `attempt` of the
//! same ChaCha8 seed; nested specs derive their seed with [`derive_seed`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coloring::{alpha_uncovered_bound, stationary_distribution, DEFAULT_ROW_TOL};
use crate::error::{Error, Result};
use crate::graph::{model_matrix, normalized_adjacency, Graph, ModelMatrix, Partition};
use crate::spectral::eigenvalues_sym;

/// Regenerations allowed when a spectral acceptance test fails.
pub const SPECTRAL_RETRIES: u64 = 10;
/// Additive slack over the Ramanujan-type bounds.
pub const SPECTRAL_SLACK: f64 = 0.1;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for the `tag`-th nested generator of a run seeded with `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    rng_for(seed, 1 << 32 | tag).next_u64()
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

fn stubs(degrees: &[usize]) -> Vec<usize> {
    degrees.iter().enumerate().flat_map(|(v, &d)| std::iter::repeat_n(v, d)).collect()
}

fn bump(count: &mut HashMap<(usize, usize), usize>, e: (usize, usize), up: bool) {
    if up {
        *count.entry(e).or_default() += 1;
    } else if let Some(c) = count.get_mut(&e) {
        *c -= 1;
        if *c == 0 {
            count.remove(&e);
        }
    }
}

/// Splits `total` into `parts` integers differing by at most one. The larger
/// parts start at `*offset` (cyclically), which then advances past them, so
/// repeated calls on one class keep per-vertex totals balanced.
pub fn spread(total: usize, parts: usize, offset: &mut usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let mut out = vec![total / parts; parts];
    let extra = total % parts;
    for i in 0..extra {
        out[(*offset + i) % parts] += 1;
    }
    *offset = (*offset + extra) % parts;
    out
}

/// Simple graph with the given degree sequence: configuration-model pairing
/// followed by double-edge switches that remove loops and repeated edges.
/// Sequences denser than half of all pairs are built as complements.
pub fn random_graph_degrees<R: Rng>(degrees: &[usize], rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let n = degrees.len();
    let total: usize = degrees.iter().sum();
    if total % 2 == 1 {
        return Err(Error::Infeasible("degree sum is odd".into()));
    }
    if let Some(v) = degrees.iter().position(|&d| d + 1 > n) {
        return Err(Error::Infeasible(format!("vertex {v} has degree {} ≥ n = {n}", degrees[v])));
    }
    if 2 * total > n * (n - 1) {
        let comp: Vec<usize> = degrees.iter().map(|&d| n - 1 - d).collect();
        let present: HashSet<(usize, usize)> = pair_and_repair(&comp, rng)?.into_iter().collect();
        let mut out = Vec::with_capacity(total / 2);
        for u in 0..n {
            for v in u + 1..n {
                if !present.contains(&(u, v)) {
                    out.push((u, v));
                }
            }
        }
        return Ok(out);
    }
    pair_and_repair(degrees, rng)
}

fn pair_and_repair<R: Rng>(degrees: &[usize], rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let mut s = stubs(degrees);
    s.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = s.chunks_exact(2).map(|c| ordered(c[0], c[1])).collect();
    let mut count = HashMap::new();
    for &e in &edges {
        bump(&mut count, e, true);
    }
    let bad = |e: (usize, usize), count: &HashMap<(usize, usize), usize>| e.0 == e.1 || count[&e] > 1;
    let mut queue: Vec<usize> = (0..edges.len()).filter(|&i| bad(edges[i], &count)).collect();
    let mut budget = 200 * edges.len() + 10_000;
    while let Some(&i) = queue.last() {
        if !bad(edges[i], &count) {
            queue.pop();
            continue;
        }
        if budget == 0 {
            return Err(Error::RetryBudget(format!("{} loops or repeated edges left after switching", queue.len())));
        }
        budget -= 1;
        let j = rng.random_range(0..edges.len());
        if j == i {
            continue;
        }
        let ((a, b), (c, d)) = (edges[i], edges[j]);
        let (e1, e2) = if rng.random::<bool>() {
            (ordered(a, c), ordered(b, d))
        } else {
            (ordered(a, d), ordered(b, c))
        };
        if e1.0 == e1.1 || e2.0 == e2.1 || e1 == e2 || count.contains_key(&e1) || count.contains_key(&e2) {
            continue;
        }
        bump(&mut count, edges[i], false);
        bump(&mut count, edges[j], false);
        bump(&mut count, e1, true);
        bump(&mut count, e2, true);
        edges[i] = e1;
        edges[j] = e2;
        queue.pop();
    }
    Ok(edges)
}

/// Simple bipartite graph with the given side degrees; edges are (left, right)
/// pairs in local indices.
pub fn random_bipartite_degrees<R: Rng>(left: &[usize], right: &[usize], rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let (n1, n2) = (left.len(), right.len());
    let total: usize = left.iter().sum();
    if total != right.iter().sum::<usize>() {
        return Err(Error::Infeasible("bipartite degree sums differ".into()));
    }
    if left.iter().any(|&d| d > n2) || right.iter().any(|&d| d > n1) {
        return Err(Error::Infeasible("bipartite degree exceeds the opposite side".into()));
    }
    if 2 * total > n1 * n2 {
        let cl: Vec<usize> = left.iter().map(|&d| n2 - d).collect();
        let cr: Vec<usize> = right.iter().map(|&d| n1 - d).collect();
        let present: HashSet<(usize, usize)> = pair_bipartite(&cl, &cr, rng)?.into_iter().collect();
        let mut out = Vec::with_capacity(total);
        for u in 0..n1 {
            for v in 0..n2 {
                if !present.contains(&(u, v)) {
                    out.push((u, v));
                }
            }
        }
        return Ok(out);
    }
    pair_bipartite(left, right, rng)
}

fn pair_bipartite<R: Rng>(left: &[usize], right: &[usize], rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let ls = stubs(left);
    let mut rs = stubs(right);
    rs.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = ls.into_iter().zip(rs).collect();
    let mut count = HashMap::new();
    for &e in &edges {
        bump(&mut count, e, true);
    }
    let mut queue: Vec<usize> = (0..edges.len()).filter(|&i| count[&edges[i]] > 1).collect();
    let mut budget = 200 * edges.len() + 10_000;
    while let Some(&i) = queue.last() {
        if count[&edges[i]] <= 1 {
            queue.pop();
            continue;
        }
        if budget == 0 {
            return Err(Error::RetryBudget(format!("{} repeated edges left after switching", queue.len())));
        }
        budget -= 1;
        let j = rng.random_range(0..edges.len());
        let ((a, b), (c, d)) = (edges[i], edges[j]);
        let (e1, e2) = ((a, d), (c, b));
        if a == c || b == d || count.contains_key(&e1) || count.contains_key(&e2) {
            continue;
        }
        bump(&mut count, edges[i], false);
        bump(&mut count, edges[j], false);
        bump(&mut count, e1, true);
        bump(&mut count, e2, true);
        edges[i] = e1;
        edges[j] = e2;
        queue.pop();
    }
    Ok(edges)
}

/// Eigenvalues of the normalized adjacency, descending.
pub fn normalized_spectrum(g: &Graph) -> Result<Vec<f64>> {
    eigenvalues_sym(&normalized_adjacency(g)?)
}

/// λ₂ of the normalized adjacency (−∞ on graphs with one vertex).
pub fn second_eigenvalue(g: &Graph) -> Result<f64> {
    Ok(normalized_spectrum(g)?.get(1).copied().unwrap_or(f64::NEG_INFINITY))
}

/// Acceptance bound 2√(d−1)/d + slack for d-regular graphs.
pub fn regular_bound(d: usize) -> f64 {
    2.0 * ((d as f64) - 1.0).max(0.0).sqrt() / d as f64 + SPECTRAL_SLACK
}

/// Acceptance bound 2/√min(d1,d2) + slack for biregular graphs.
pub fn biregular_bound(d1: usize, d2: usize) -> f64 {
    2.0 / (d1.min(d2) as f64).sqrt() + SPECTRAL_SLACK
}

/// Random simple d-regular graph. For d ≥ 3 the graph must be connected with
/// λ₂(Ã) within [`regular_bound`]; failures regenerate up to [`SPECTRAL_RETRIES`] times.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= n.max(1) {
        return Err(Error::Infeasible(format!("degree {d} needs more than {n} vertices")));
    }
    if n * d % 2 == 1 {
        return Err(Error::Infeasible(format!("n·d = {} is odd", n * d)));
    }
    let degrees = vec![d; n];
    let mut last = f64::NAN;
    for attempt in 0..SPECTRAL_RETRIES {
        let mut rng = rng_for(seed, attempt);
        let g = Graph::from_edges(n, &random_graph_degrees(&degrees, &mut rng)?)?;
        if d < 3 {
            return Ok(g);
        }
        if g.is_connected() {
            last = second_eigenvalue(&g)?;
            if last <= regular_bound(d) {
                return Ok(g);
            }
        }
        log::debug!("random_regular n={n} d={d} attempt {attempt} rejected (λ₂ = {last})");
    }
    Err(Error::RetryBudget(format!("no {d}-regular expander on {n} vertices in {SPECTRAL_RETRIES} attempts (last λ₂ = {last})")))
}

/// G(n, p) conditioned on having no isolated vertex.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    for attempt in 0..SPECTRAL_RETRIES {
        let mut rng = rng_for(seed, attempt);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(n, &edges)?;
        if g.degree().iter().all(|&d| d > 0.0) {
            return Ok(g);
        }
    }
    Err(Error::RetryBudget(format!("G({n}, {p}) kept isolated vertices")))
}

fn biregular_degrees(n1: usize, n2: usize, d1: usize) -> Result<usize> {
    if n2 == 0 || n1 * d1 % n2 != 0 {
        return Err(Error::Infeasible(format!("{n1}·{d1} is not divisible by {n2}")));
    }
    let d2 = n1 * d1 / n2;
    if d1 > n2 || d2 > n1 {
        return Err(Error::Infeasible(format!("degrees ({d1}, {d2}) exceed side sizes ({n2}, {n1})")));
    }
    Ok(d2)
}

/// Second singular value of the normalized biadjacency, i.e. λ₂ of the
/// bipartite graph's normalized adjacency.
fn bipartite_lambda2(n1: usize, n2: usize, d1: usize, d2: usize, edges: &[(usize, usize)]) -> f64 {
    if n1.min(n2) < 2 {
        return 0.0;
    }
    let scale = 1.0 / ((d1 * d2) as f64).sqrt();
    let mut b = DMatrix::zeros(n1, n2);
    for &(u, v) in edges {
        b[(u, v)] = scale;
    }
    let mut sv: Vec<f64> = b.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv[1]
}

/// Random (d1, d2)-biregular bipartite graph; left vertices are 0..n1.
/// λ₂(Ã) must be within [`biregular_bound`], regenerating otherwise.
pub fn biregular_random(n1: usize, n2: usize, d1: usize, seed: u64) -> Result<Graph> {
    let d2 = biregular_degrees(n1, n2, d1)?;
    let (left, right) = (vec![d1; n1], vec![d2; n2]);
    let bound = biregular_bound(d1, d2);
    let mut last = f64::NAN;
    for attempt in 0..SPECTRAL_RETRIES {
        let mut rng = rng_for(seed, attempt);
        let edges = random_bipartite_degrees(&left, &right, &mut rng)?;
        last = bipartite_lambda2(n1, n2, d1, d2, &edges);
        if d1 == 0 || last <= bound {
            let global: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (u, n1 + v)).collect();
            return Graph::from_edges(n1 + n2, &global);
        }
    }
    Err(Error::RetryBudget(format!("biregular ({n1},{n2},{d1}) kept λ₂ = {last} above {bound}")))
}

/// Class sizes ⌊π_a n⌉ by largest remainder, summing to n exactly.
pub fn class_sizes_for(pi: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = pi.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n.saturating_sub(sizes.iter().sum());
    for &a in order.iter().cycle().take(short) {
        sizes[a] += 1;
    }
    sizes
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmInstance {
    pub graph: Graph,
    pub partition: Partition,
    /// Edge counts per class pair; the diagonal counts edges inside a class.
    pub block_edges: Vec<Vec<usize>>,
    /// ‖M − M(Ã, χ)‖_max.
    pub model_distance: f64,
}

/// Block-model graph whose class pairs are random near-biregular blocks
/// with round((n_a d M_ab + n_b d M_ba)/2) edges. Class labels are shuffled.
pub fn sbm_from_model(m: &ModelMatrix, n: usize, d: usize, seed: u64) -> Result<SbmInstance> {
    let k = m.k();
    for a in 0..k {
        for b in 0..k {
            if m.get(a, b) < 0.0 {
                return Err(Error::NegativeModelEntry { a, b, value: m.get(a, b) });
            }
        }
    }
    let pi = stationary_distribution(m)?;
    let sizes = class_sizes_for(&pi, n);
    if let Some(a) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyClass(a));
    }
    let mut rng = rng_for(seed, 0);
    let mut chi: Vec<usize> = sizes.iter().enumerate().flat_map(|(a, &s)| std::iter::repeat_n(a, s)).collect();
    chi.shuffle(&mut rng);
    let partition = Partition::new(chi, k)?;
    let members = partition.classes();
    let mut offsets = vec![0; k];
    let mut edges = Vec::new();
    let mut block_edges = vec![vec![0; k]; k];
    let df = d as f64;
    for a in 0..k {
        for b in a..k {
            let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
            if a == b {
                let count = (na * df * m.get(a, a) / 2.0).round() as usize;
                let degs = spread(2 * count, sizes[a], &mut offsets[a]);
                for (u, v) in random_graph_degrees(&degs, &mut rng)? {
                    edges.push((members[a][u], members[a][v]));
                }
                block_edges[a][a] = count;
            } else {
                let count = ((na * df * m.get(a, b) + nb * df * m.get(b, a)) / 2.0).round() as usize;
                let left = spread(count, sizes[a], &mut offsets[a]);
                let right = spread(count, sizes[b], &mut offsets[b]);
                for (u, v) in random_bipartite_degrees(&left, &right, &mut rng)? {
                    edges.push((members[a][u], members[b][v]));
                }
                block_edges[a][b] = count;
                block_edges[b][a] = count;
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    let model_distance = model_matrix(&normalized_adjacency(&graph)?, &partition)?.max_distance(m);
    Ok(SbmInstance { graph, partition, block_edges, model_distance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSetInstance {
    pub graph: Graph,
    /// The planted independent set I, sorted.
    pub set: Vec<usize>,
}

/// d-regular graph with an independent set I of size round((½−γ)n): every
/// vertex of I has all d neighbours in J = V∖I, and J carries a random
/// regular graph making up its remaining degree.
pub fn planted_independent_set(n: usize, gamma: f64, d: usize, seed: u64) -> Result<PlantedSetInstance> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("γ = {gamma} outside [0, ½)")));
    }
    let i = ((0.5 - gamma) * n as f64).round() as usize;
    let j = n - i;
    if i == 0 || i * d % j != 0 {
        return Err(Error::Infeasible(format!("|I|·d = {i}·{d} is not divisible by |J| = {j}")));
    }
    let dji = i * d / j;
    let inner = d.checked_sub(dji).ok_or_else(|| Error::Infeasible("J needs more than d edges into I".into()))?;
    if d > j || j * inner % 2 == 1 || (inner > 0 && inner >= j) {
        return Err(Error::Infeasible(format!("no {inner}-regular graph on the {j} vertices outside I")));
    }
    let mut rng = rng_for(seed, 0);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let (iv, jv) = perm.split_at(i);
    let mut edges = Vec::new();
    for (u, v) in random_bipartite_degrees(&vec![d; i], &vec![dji; j], &mut rng)? {
        edges.push((iv[u], jv[v]));
    }
    for (u, v) in random_graph_degrees(&vec![inner; j], &mut rng)? {
        edges.push((jv[u], jv[v]));
    }
    let mut set = iv.to_vec();
    set.sort_unstable();
    Ok(PlantedSetInstance { graph: Graph::from_edges(n, &edges)?, set })
}

/// Random graph on n vertices with about n·d/2 edges in which two disjoint
/// sets of size round(fraction·n) are independent. Labels: 0 and 1 for the
/// two sets, 2 for the rest (present only when the rest is nonempty).
pub fn two_set_base(n: usize, fraction: f64, d: usize, seed: u64) -> Result<(Graph, Partition)> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("set fraction {fraction} outside [0, ½]")));
    }
    let a = (fraction * n as f64).round() as usize;
    let rest = n - 2 * a;
    let allowed = a * a + 2 * a * rest + rest * rest.saturating_sub(1) / 2;
    let target = n * d / 2;
    if target > allowed / 2 {
        return Err(Error::Infeasible(format!("{target} edges do not fit sparsely between the sets")));
    }
    let mut rng = rng_for(seed, 0);
    let mut chi: Vec<usize> = std::iter::repeat_n(0, a).chain(std::iter::repeat_n(1, a)).chain(std::iter::repeat_n(2, rest)).collect();
    chi.shuffle(&mut rng);
    let mut present = HashSet::new();
    while present.len() < target {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u == v || (chi[u] == chi[v] && chi[u] < 2) {
            continue;
        }
        present.insert(ordered(u, v));
    }
    let mut edges: Vec<(usize, usize)> = present.into_iter().collect();
    edges.sort_unstable();
    let k = if rest > 0 { 3 } else { 2 };
    Ok((Graph::from_edges(n, &edges)?, Partition::new(chi, k)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupParams {
    pub eps: f64,
    pub gamma: f64,
    /// Largest multiplier r_a searched.
    pub max_multiplier: usize,
    /// Largest allowed (max base degree)/n, with 2n base vertices.
    pub max_degree_ratio: f64,
    pub row_tol: f64,
}

impl Default for BlowupParams {
    fn default() -> Self {
        BlowupParams { eps: 0.1, gamma: 0.1, max_multiplier: 64, max_degree_ratio: 0.5, row_tol: DEFAULT_ROW_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupInstance {
    pub graph: Graph,
    pub groups: Vec<Vec<usize>>,
    /// Even multipliers r_a.
    pub multipliers: Vec<usize>,
    pub pi_hat: Vec<f64>,
    pub model_hat: ModelMatrix,
    /// Half the base size.
    pub unit: usize,
    pub group_vertices: Vec<Vec<usize>>,
    /// `copies[c][x]` is the vertex of base vertex x in copy c.
    pub copies: Vec<Vec<usize>>,
    /// Isolated padding vertices per group.
    pub padding: Vec<usize>,
    /// The coloring induced by the base's two independent sets, when given.
    pub partition: Option<Partition>,
    pub base_degree_ratio: f64,
    pub lambda2: f64,
}

fn first_argmax(idx: &[usize], w: &[f64]) -> usize {
    *idx.iter().max_by(|&&a, &&b| w[a].total_cmp(&w[b]).then(b.cmp(&a))).expect("nonempty group")
}

/// Smallest even multipliers r (by Σr, then by error) with ‖π̂ − π‖_∞ ≤ tol
/// and the same within-group argmax, searched over r_a = 2·round(π_a h).
pub fn blowup_multipliers(pi: &[f64], groups: &[Vec<usize>], tol: f64, max_multiplier: usize) -> Result<Vec<usize>> {
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut h = 1usize;
    loop {
        let r: Vec<usize> = pi.iter().map(|p| 2 * ((p * h as f64).round() as usize).max(1)).collect();
        if r.iter().any(|&x| x > max_multiplier) {
            break;
        }
        let total: usize = r.iter().sum();
        let hat: Vec<f64> = r.iter().map(|&x| x as f64 / total as f64).collect();
        let err = hat.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let same_argmax = groups.iter().all(|g| first_argmax(g, pi) == first_argmax(g, &hat));
        if err <= tol && same_argmax && best.as_ref().is_none_or(|b| (total, err) < (b.0, b.1)) {
            best = Some((total, err, r));
        }
        h += 1;
    }
    best.map(|b| b.2).ok_or_else(|| {
        Error::Infeasible(format!("no even multipliers ≤ {max_multiplier} approximate π within {tol}"))
    })
}

/// The blow-up construction: per group of identical rows, copies of the base
/// graph (plus isolated padding when one class dominates its group), joined
/// across groups by random near-biregular blocks whose degrees follow M̂.
/// `base_sets` labels base vertices 0/1 for its two independent sets (other
/// labels are leftovers) and yields the planted coloring of the output.
pub fn blowup_instance(
    m: &ModelMatrix,
    base: &Graph,
    base_sets: Option<&Partition>,
    params: &BlowupParams,
    seed: u64,
) -> Result<BlowupInstance> {
    if base.n() % 2 == 1 || base.n() == 0 {
        return Err(Error::InvalidParameter(format!("base needs an even positive vertex count, got {}", base.n())));
    }
    if let Some(p) = base_sets {
        if p.n() != base.n() {
            return Err(Error::SizeMismatch { expected: base.n(), got: p.n() });
        }
    }
    if !m.has_zero_diagonal(1e-12) {
        return Err(Error::InvalidParameter("model needs a zero diagonal".into()));
    }
    let unit = base.n() / 2;
    let base_degree_ratio = base.max_degree() / unit as f64;
    if base_degree_ratio > params.max_degree_ratio {
        return Err(Error::InvalidParameter(format!(
            "base degree ratio {base_degree_ratio} exceeds {}",
            params.max_degree_ratio
        )));
    }
    let pi = stationary_distribution(m)?;
    let (grouping, _) = alpha_uncovered_bound(m, params.row_tol)?;
    let groups = grouping.groups;
    let k = m.k();
    let min_pi = pi.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = (params.gamma / (2.0 * k as f64)).min(params.eps / 2.0 * min_pi);
    let r = blowup_multipliers(&pi, &groups, tol, params.max_multiplier)?;
    let total: usize = r.iter().sum();
    let pi_hat: Vec<f64> = r.iter().map(|&x| x as f64 / total as f64).collect();
    let model_hat = ModelMatrix::new(DMatrix::from_fn(k, k, |a, b| pi_hat[b] / pi[b] * m.get(a, b)));

    let mut edges = Vec::new();
    let mut copies = Vec::new();
    let mut padding = Vec::new();
    let mut group_vertices = Vec::new();
    let mut chi = vec![0usize; 0];
    let mut next = 0usize;
    for g in &groups {
        let star = first_argmax(g, &pi_hat);
        let others: Vec<usize> = g.iter().copied().filter(|&a| a != star).collect();
        let rest: usize = others.iter().map(|&a| r[a]).sum();
        let (count, pad, halves): (usize, usize, Vec<(usize, usize)>) = if r[star] <= rest {
            let count = g.iter().map(|&a| r[a]).sum::<usize>() / 2;
            let list: Vec<usize> =
                std::iter::once(star).chain(others.iter().copied()).flat_map(|a| std::iter::repeat_n(a, r[a])).collect();
            (count, 0, (0..count).map(|c| (list[c], list[c + count])).collect())
        } else {
            let list: Vec<usize> = others.iter().flat_map(|&a| std::iter::repeat_n(a, r[a])).collect();
            (rest, (r[star] - rest) * unit, list.iter().map(|&b| (star, b)).collect())
        };
        let start = next;
        for &(ca, cb) in &halves {
            let map: Vec<usize> = (next..next + base.n()).collect();
            for e in base.edges() {
                edges.push((map[e.u], map[e.v]));
            }
            if let Some(p) = base_sets {
                chi.extend(p.chi().iter().map(|&l| if l == 1 { cb } else { ca }));
            }
            next += base.n();
            copies.push(map);
        }
        if base_sets.is_some() {
            chi.extend(std::iter::repeat_n(star, pad));
        }
        debug_assert_eq!(halves.len(), count);
        next += pad;
        padding.push(pad);
        group_vertices.push((start..next).collect::<Vec<usize>>());
    }
    for (i, gv) in group_vertices.iter().enumerate() {
        assert_eq!(gv.len(), unit * groups[i].iter().map(|&a| r[a]).sum::<usize>());
    }

    let mut rng = rng_for(seed, 0);
    let mut offsets = vec![0usize; groups.len()];
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let fi = groups[i][0];
            let mass: f64 = groups[j].iter().map(|&b| model_hat.get(fi, b)).sum();
            let count = (group_vertices[i].len() as f64 * unit as f64 * mass).round() as usize;
            if count == 0 {
                continue;
            }
            let left = spread(count, group_vertices[i].len(), &mut offsets[i]);
            let right = spread(count, group_vertices[j].len(), &mut offsets[j]);
            for (u, v) in random_bipartite_degrees(&left, &right, &mut rng)? {
                edges.push((group_vertices[i][u], group_vertices[j][v]));
            }
        }
    }
    let graph = Graph::from_edges(next, &edges)?;
    let lambda2 = second_eigenvalue(&graph)?;
    let partition = match base_sets {
        Some(_) => Some(Partition::new(chi, k)?),
        None => None,
    };
    Ok(BlowupInstance {
        graph,
        groups,
        multipliers: r,
        pi_hat,
        model_hat,
        unit,
        group_vertices,
        copies,
        padding,
        partition,
        base_degree_ratio,
        lambda2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda3Instance {
    pub graph: Graph,
    /// Vertices 0..base_n are the base, then S, then the three sides of G″.
    pub base_n: usize,
    pub s: usize,
    /// Size of the third side of G″.
    pub third_side: usize,
    /// Base edges dropped so that |S|(n − |S|) equals the base degree sum.
    pub removed_base_edges: Vec<(usize, usize)>,
    /// Common degree, equal to |S|.
    pub degree: usize,
    pub lambda3: f64,
}

/// |S| under the rounding policy: the smallest integer s ≥ (n + √(n² − 4·2|E|))/2
/// with s(n − s) ≤ 2|E| and 2|E| − s(n − s) even.
pub fn lambda3_size(n: usize, degree_sum: usize) -> Result<usize> {
    let disc = (n * n) as f64 - 4.0 * degree_sum as f64;
    if disc < 0.0 {
        return Err(Error::Infeasible(format!("average degree {} exceeds n/4", degree_sum as f64 / n as f64)));
    }
    let mut s = ((n as f64 + disc.sqrt()) / 2.0 - 1e-9).ceil().max(0.0) as usize;
    while s <= n {
        let prod = s * (n - s);
        if prod <= degree_sum && (degree_sum - prod) % 2 == 0 {
            return Ok(s);
        }
        s += 1;
    }
    Err(Error::Infeasible("no admissible |S|".into()))
}

/// The λ₃ construction: base ∪ S with the complete bipartite graph between
/// them minus a degree-correcting H′, plus a disjoint |S|-regular tripartite
/// G″ with sides |S|, |S| and round((½−ε)n). The output is exactly |S|-regular.
pub fn lambda3_instance(base: &Graph, eps: f64, seed: u64) -> Result<Lambda3Instance> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::InvalidParameter(format!("ε = {eps} outside [0, ½)")));
    }
    let n = base.n();
    if n == 0 {
        return Err(Error::InvalidParameter("empty base graph".into()));
    }
    let degree_sum = 2 * base.num_edges();
    let s = lambda3_size(n, degree_sum)?;
    let mut rng = rng_for(seed, 0);
    let mut base_edges: Vec<(usize, usize)> = base.edges().iter().map(|e| (e.u, e.v)).collect();
    base_edges.shuffle(&mut rng);
    let removed_count = (degree_sum - s * (n - s)) / 2;
    let mut removed_base_edges: Vec<(usize, usize)> = base_edges.drain(..removed_count).collect();
    removed_base_edges.sort_unstable();
    base_edges.sort_unstable();
    let mut deg = vec![0usize; n];
    for &(u, v) in &base_edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    if let Some(x) = deg.iter().position(|&d| d > s) {
        return Err(Error::Infeasible(format!("base vertex {x} has degree above |S| = {s}")));
    }
    let h_prime: HashSet<(usize, usize)> =
        random_bipartite_degrees(&deg, &vec![n - s; s], &mut rng)?.into_iter().collect();
    let mut edges = base_edges;
    for x in 0..n {
        for y in 0..s {
            if !h_prime.contains(&(x, y)) {
                edges.push((x, n + y));
            }
        }
    }

    let mut m = ((0.5 - eps) * n as f64).round() as usize;
    if m * s % 2 == 1 {
        m -= 1;
    }
    let (p0, q0, t0) = (n + s, n + 2 * s, n + 3 * s);
    let half = m * s / 2;
    let to_t = spread(half, s, &mut 0);
    let t_to_p = spread(half, m, &mut 0);
    let t_to_q: Vec<usize> = t_to_p.iter().map(|&x| s - x).collect();
    let pq: Vec<usize> = to_t.iter().map(|&x| s - x).collect();
    for (u, v) in random_bipartite_degrees(&to_t, &t_to_p, &mut rng)? {
        edges.push((p0 + u, t0 + v));
    }
    for (u, v) in random_bipartite_degrees(&to_t, &t_to_q, &mut rng)? {
        edges.push((q0 + u, t0 + v));
    }
    for (u, v) in random_bipartite_degrees(&pq, &pq, &mut rng)? {
        edges.push((p0 + u, q0 + v));
    }
    let total = t0 + m;
    let graph = Graph::from_edges(total, &edges)?;
    if let Some(x) = graph.degree().iter().position(|&d| d != s as f64) {
        return Err(Error::Infeasible(format!("vertex {x} has degree {} instead of {s}", graph.degree()[x])));
    }
    let spectrum = normalized_spectrum(&graph)?;
    Ok(Lambda3Instance {
        graph,
        base_n: n,
        s,
        third_side: m,
        removed_base_edges,
        degree: s,
        lambda3: spectrum.get(2).copied().unwrap_or(f64::NEG_INFINITY),
    })
}

/// A generator configuration, read from JSON with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Regular {
        n: usize,
        d: usize,
    },
    ErdosRenyi {
        n: usize,
        p: f64,
    },
    Sbm {
        model: Vec<Vec<f64>>,
        n: usize,
        d: usize,
    },
    Biregular {
        n1: usize,
        n2: usize,
        d1: usize,
    },
    PlantedIndependentSet {
        n: usize,
        gamma: f64,
        d: usize,
    },
    TwoSetBase {
        n: usize,
        fraction: f64,
        d: usize,
    },
    Blowup {
        model: Vec<Vec<f64>>,
        base: Box<GeneratorSpec>,
        #[serde(default)]
        params: BlowupParams,
    },
    Lambda3 {
        base: Box<GeneratorSpec>,
        eps: f64,
    },
    DisjointUnion {
        parts: Vec<GeneratorSpec>,
    },
    EdgeList {
        path: PathBuf,
    },
}

impl GeneratorSpec {
    /// Cheap consistency checks; generators repeat them with full context.
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Regular { n, d } => {
                if d >= n || n * d % 2 == 1 {
                    return Err(Error::Infeasible(format!("no {d}-regular graph on {n} vertices")));
                }
            }
            GeneratorSpec::ErdosRenyi { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
                }
            }
            GeneratorSpec::Sbm { model, .. } => {
                ModelMatrix::from_rows(model)?;
            }
            GeneratorSpec::Biregular { n1, n2, d1 } => {
                biregular_degrees(*n1, *n2, *d1)?;
            }
            GeneratorSpec::PlantedIndependentSet { gamma, .. } => {
                if !(0.0..0.5).contains(gamma) {
                    return Err(Error::InvalidParameter(format!("γ = {gamma} outside [0, ½)")));
                }
            }
            GeneratorSpec::TwoSetBase { fraction, .. } => {
                if !(0.0..=0.5).contains(fraction) {
                    return Err(Error::InvalidParameter(format!("set fraction {fraction} outside [0, ½]")));
                }
            }
            GeneratorSpec::Blowup { model, base, .. } => {
                ModelMatrix::from_rows(model)?;
                base.validate()?;
            }
            GeneratorSpec::Lambda3 { base, eps } => {
                if !(0.0..0.5).contains(eps) {
                    return Err(Error::InvalidParameter(format!("ε = {eps} outside [0, ½)")));
                }
                base.validate()?;
            }
            GeneratorSpec::DisjointUnion { parts } => {
                for p in parts {
                    p.validate()?;
                }
            }
            GeneratorSpec::EdgeList { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub graph: Graph,
    pub partition: Option<Partition>,
    /// A planted vertex set (the independent set), when the generator has one.
    pub marked: Option<Vec<usize>>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl GeneratedInstance {
    fn plain(graph: Graph) -> GeneratedInstance {
        GeneratedInstance { graph, partition: None, marked: None, diagnostics: BTreeMap::new() }
    }
}

/// Runs a generator spec. Nested specs use `derive_seed(seed, index)`.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<GeneratedInstance> {
    spec.validate()?;
    Ok(match spec {
        GeneratorSpec::Regular { n, d } => GeneratedInstance::plain(random_regular(*n, *d, seed)?),
        GeneratorSpec::ErdosRenyi { n, p } => GeneratedInstance::plain(erdos_renyi(*n, *p, seed)?),
        GeneratorSpec::Sbm { model, n, d } => {
            let inst = sbm_from_model(&ModelMatrix::from_rows(model)?, *n, *d, seed)?;
            let mut out = GeneratedInstance::plain(inst.graph);
            out.partition = Some(inst.partition);
            out.diagnostics.insert("model_distance".into(), inst.model_distance);
            out
        }
        GeneratorSpec::Biregular { n1, n2, d1 } => {
            let g = biregular_random(*n1, *n2, *d1, seed)?;
            let mut out = GeneratedInstance::plain(g);
            out.partition = Some(Partition::new((0..n1 + n2).map(|x| usize::from(x >= *n1)).collect(), 2)?);
            out
        }
        GeneratorSpec::PlantedIndependentSet { n, gamma, d } => {
            let inst = planted_independent_set(*n, *gamma, *d, seed)?;
            let mut out = GeneratedInstance::plain(inst.graph);
            out.marked = Some(inst.set);
            out
        }
        GeneratorSpec::TwoSetBase { n, fraction, d } => {
            let (g, p) = two_set_base(*n, *fraction, *d, seed)?;
            let mut out = GeneratedInstance::plain(g);
            out.partition = Some(p);
            out
        }
        GeneratorSpec::Blowup { model, base, params } => {
            let b = generate(base, derive_seed(seed, 0))?;
            let inst = blowup_instance(&ModelMatrix::from_rows(model)?, &b.graph, b.partition.as_ref(), params, seed)?;
            let mut out = GeneratedInstance::plain(inst.graph);
            out.partition = inst.partition;
            out.diagnostics.insert("lambda2".into(), inst.lambda2);
            out.diagnostics.insert("base_degree_ratio".into(), inst.base_degree_ratio);
            out
        }
        GeneratorSpec::Lambda3 { base, eps } => {
            let b = generate(base, derive_seed(seed, 0))?;
            let inst = lambda3_instance(&b.graph, *eps, seed)?;
            let mut out = GeneratedInstance::plain(inst.graph);
            out.diagnostics.insert("lambda3".into(), inst.lambda3);
            out.diagnostics.insert("degree".into(), inst.degree as f64);
            out
        }
        GeneratorSpec::DisjointUnion { parts } => {
            let mut g = Graph::from_edges(0, &[])?;
            for (i, p) in parts.iter().enumerate() {
                g = g.disjoint_union(&generate(p, derive_seed(seed, i as u64))?.graph);
            }
            GeneratedInstance::plain(g)
        }
        GeneratorSpec::EdgeList { path } => GeneratedInstance::plain(crate::io::load_graph(path)?),
    })
}

/// Sidecar describing how an emitted instance was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub spec: GeneratorSpec,
    pub seed: u64,
    pub n: usize,
    pub edges: usize,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(spec: &GeneratorSpec, seed: u64, inst: &GeneratedInstance) -> Manifest {
        Manifest {
            spec: spec.clone(),
            seed,
            n: inst.graph.n(),
            edges: inst.graph.num_edges(),
            diagnostics: inst.diagnostics.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(text)?;
        m.spec.validate()?;
        Ok(m)
    }
}

pub fn parse_generator_spec(text: &str) -> Result<GeneratorSpec> {
    let spec: GeneratorSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}
