//! Symmetric eigendecomposition, threshold ranks, and the bottom/top rank inequality.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive slack for eigenvalue threshold comparisons.
pub const EIG_SLACK: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-8;
const ZERO_ROW: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column i is the unit eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
}

pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::SizeMismatch { expected: m.nrows(), got: m.ncols() });
    }
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::Asymmetric { i, j });
            }
        }
    }
    Ok(())
}

pub fn eig_sym(m: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition { eigenvalues: vec![], eigenvectors: DMatrix::zeros(0, 0) });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    Ok(SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vectors,
    })
}

/// Eigenvalues only, sorted descending.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of eigenvalues ≥ x − slack. `x` may be negative.
    pub fn count_at_least(&self, x: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l >= x - EIG_SLACK).count()
    }

    /// Number of eigenvalues ≤ x + slack.
    pub fn count_at_most(&self, x: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l <= x + EIG_SLACK).count()
    }

    pub fn top_rank(&self, tau: f64) -> usize {
        self.count_at_least(tau)
    }

    pub fn bottom_rank(&self, tau: f64) -> usize {
        self.count_at_most(-tau)
    }

    /// λ_i with 1-based index, if present.
    pub fn lambda(&self, i: usize) -> Option<f64> {
        self.eigenvalues.get(i.checked_sub(1)?).copied()
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// The `t` eigenvectors with the smallest eigenvalues, most negative first.
    pub fn bottom_vectors(&self, t: usize) -> DMatrix<f64> {
        let n = self.n();
        let mut u = DMatrix::zeros(n, t);
        for j in 0..t {
            u.set_column(j, &self.eigenvectors.column(n - 1 - j));
        }
        u
    }

    /// Columns of eigenvectors whose eigenvalue has magnitude ≥ `lambda` − slack, by decreasing magnitude.
    pub fn extreme_indices(&self, lambda: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).filter(|&i| self.eigenvalues[i].abs() >= lambda - EIG_SLACK).collect();
        idx.sort_by(|&a, &b| self.eigenvalues[b].abs().total_cmp(&self.eigenvalues[a].abs()).then(a.cmp(&b)));
        idx
    }
}

pub fn threshold_rank(spec: &SpectralDecomposition, tau: f64, side: Side) -> usize {
    match side {
        Side::Top => spec.top_rank(tau),
        Side::Bottom => spec.bottom_rank(tau),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub t: usize,
    pub lam: f64,
    /// ⟨A, VᵀV⟩
    pub inner_product: f64,
    /// ‖VᵀV‖²_F
    pub frobenius_sq: f64,
    pub trace: f64,
    pub inner_ok: bool,
    pub frobenius_ok: bool,
    pub trace_ok: bool,
}

impl WitnessReport {
    pub fn holds(&self) -> bool {
        self.inner_ok && self.frobenius_ok && self.trace_ok
    }
}

fn scaled_bottom(spec: &SpectralDecomposition, lam: f64, t: usize) -> Result<DMatrix<f64>> {
    let available = spec.bottom_rank(lam);
    if t == 0 || available < t {
        return Err(Error::InsufficientRank { available, required: t.max(1) });
    }
    Ok(spec.bottom_vectors(t) / (t as f64).sqrt())
}

fn witness_report(a: &DMatrix<f64>, m: &DMatrix<f64>, lam: f64, t: usize) -> WitnessReport {
    let inner = a.component_mul(m).sum();
    let frob = m.norm_squared();
    let trace = m.trace();
    WitnessReport {
        t,
        lam,
        inner_product: inner,
        frobenius_sq: frob,
        trace,
        inner_ok: inner >= lam * lam - WITNESS_TOL,
        frobenius_ok: frob <= 1.0 / t as f64 + WITNESS_TOL,
        trace_ok: (trace - 1.0).abs() <= WITNESS_TOL,
    }
}

/// Builds the t²×n witness V from the t most negative eigenvectors of `a`
/// and checks ⟨A,VᵀV⟩ ≥ λ², ‖VᵀV‖²_F ≤ 1/t and Tr(VᵀV) = 1.
pub fn witness_matrix(
    a: &DMatrix<f64>,
    spec: &SpectralDecomposition,
    lam: f64,
    t: usize,
) -> Result<(DMatrix<f64>, WitnessReport)> {
    let u = scaled_bottom(spec, lam, t)?;
    let n = u.nrows();
    let mut v = DMatrix::zeros(t * t, n);
    for i in 0..n {
        let w = u.row(i);
        let norm = w.norm();
        if norm < ZERO_ROW {
            continue;
        }
        for p in 0..t {
            for q in 0..t {
                v[(p * t + q, i)] = w[p] * w[q] / norm;
            }
        }
    }
    let m = v.transpose() * &v;
    let report = witness_report(a, &m, lam, t);
    Ok((v, report))
}

/// VᵀV for the witness of [`witness_matrix`], computed from ⟨v_i,v_j⟩ = ⟨w_i,w_j⟩²/(‖w_i‖‖w_j‖).
pub fn witness_gram(spec: &SpectralDecomposition, lam: f64, t: usize) -> Result<DMatrix<f64>> {
    let u = scaled_bottom(spec, lam, t)?;
    let g = &u * u.transpose();
    let n = g.nrows();
    let norms: Vec<f64> = (0..n).map(|i| g[(i, i)].max(0.0).sqrt()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if norms[i] < ZERO_ROW || norms[j] < ZERO_ROW {
            0.0
        } else {
            g[(i, j)] * g[(i, j)] / (norms[i] * norms[j])
        }
    }))
}

/// Numeric form of the rank-from-correlation lemma applied to the witness:
/// with ε = 1 − ⟨A,M⟩, r = 1/‖M‖²_F and C = 1/(1−σ), rank_{≥1−Cε} ≥ (1−1/C)²·r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub inner_product: f64,
    pub frobenius_sq: f64,
    pub trace: f64,
    pub threshold: f64,
    pub rank: usize,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub tau: f64,
    pub sigma: f64,
    pub tau_prime: f64,
    pub bottom_rank: usize,
    pub top_rank: usize,
    /// σ²·bottom_rank, the required lower bound on `top_rank`.
    pub lhs: f64,
    pub holds: bool,
    pub nonnegative_entries: bool,
    pub norm_bounded: bool,
    pub chain: Option<ChainCheck>,
}

pub fn verify_rank_inequality(
    a: &DMatrix<f64>,
    spec: &SpectralDecomposition,
    tau: f64,
    sigma: f64,
) -> Result<RankReport> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let t = spec.bottom_rank(tau);
    let tau_prime = (tau * tau - sigma) / (1.0 - sigma);
    let top = spec.count_at_least(tau_prime);
    let lhs = sigma * sigma * t as f64;
    let nonnegative = a.iter().all(|&x| x >= -1e-12);
    let norm_bounded = spec.spectral_norm() <= 1.0 + EIG_SLACK;
    let chain = if t > 0 && nonnegative && norm_bounded {
        let m = witness_gram(spec, tau, t)?;
        let inner = a.component_mul(&m).sum();
        let frob = m.norm_squared();
        let c = 1.0 / (1.0 - sigma);
        let threshold = 1.0 - c * (1.0 - inner);
        let bound = (1.0 - 1.0 / c).powi(2) / frob;
        let rank = spec.count_at_least(threshold);
        Some(ChainCheck {
            inner_product: inner,
            frobenius_sq: frob,
            trace: m.trace(),
            threshold,
            rank,
            bound,
            holds: rank as f64 >= bound - 1e-9,
        })
    } else {
        None
    };
    Ok(RankReport {
        tau,
        sigma,
        tau_prime,
        bottom_rank: t,
        top_rank: top,
        lhs,
        holds: top as f64 >= lhs - 1e-12,
        nonnegative_entries: nonnegative,
        norm_bounded,
        chain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};
    use proptest::prelude::*;

    fn norm_adj(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
        normalized_adjacency(&Graph::from_edges(n, edges).unwrap()).unwrap()
    }

    fn c4() -> DMatrix<f64> {
        norm_adj(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])
    }

    fn triangle() -> DMatrix<f64> {
        norm_adj(3, &[(0, 1), (1, 2), (0, 2)])
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn known_spectra() {
        assert!(close(&eig_sym(&DMatrix::identity(3, 3)).unwrap().eigenvalues, &[1.0, 1.0, 1.0]));
        assert!(close(&eig_sym(&c4()).unwrap().eigenvalues, &[1.0, 0.0, 0.0, -1.0]));
        assert!(close(&eig_sym(&triangle()).unwrap().eigenvalues, &[1.0, -0.5, -0.5]));
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(eig_sym(&m), Err(Error::Asymmetric { i: 0, j: 1 })));
    }

    #[test]
    fn threshold_ranks() {
        let s = eig_sym(&c4()).unwrap();
        assert_eq!(threshold_rank(&s, 0.9, Side::Bottom), 1);
        assert_eq!(threshold_rank(&s, 0.9, Side::Top), 1);
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])
            .unwrap()
            .disjoint_union(&Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        let s = eig_sym(&normalized_adjacency(&g).unwrap()).unwrap();
        assert_eq!(threshold_rank(&s, 1.0, Side::Top), 2);
        assert_eq!(threshold_rank(&s, 1.0, Side::Bottom), 1);
    }

    #[test]
    fn hoffman_on_k22() {
        let s = eig_sym(&c4()).unwrap();
        let mu: f64 = 0.5;
        assert!(s.min_eigenvalue().unwrap() <= -mu / (1.0 - mu) + 1e-12);
    }

    #[test]
    fn witness_c4() {
        let a = c4();
        let s = eig_sym(&a).unwrap();
        let (v, r) = witness_matrix(&a, &s, 1.0, 1).unwrap();
        assert_eq!(v.shape(), (1, 4));
        assert!((r.inner_product - 1.0).abs() < 1e-12);
        assert!((r.frobenius_sq - 1.0).abs() < 1e-12);
        assert!((r.trace - 1.0).abs() < 1e-12);
        assert!(r.holds());
    }

    #[test]
    fn witness_k33() {
        let edges: Vec<_> = (0..3).flat_map(|u| (3..6).map(move |v| (u, v))).collect();
        let a = norm_adj(6, &edges);
        let s = eig_sym(&a).unwrap();
        let (_, r) = witness_matrix(&a, &s, 1.0, 1).unwrap();
        // Every v_i = |u_i| = 1/√6, so VᵀV = J/6 and ⟨Ã, J/6⟩ = (row sums of Ã)·n/6 = 1.
        assert!((r.inner_product - 1.0).abs() < 1e-12);
        assert!((r.frobenius_sq - 1.0).abs() < 1e-12);
        assert!(r.holds());
    }

    #[test]
    fn witness_triangle_two_vectors() {
        let a = triangle();
        let s = eig_sym(&a).unwrap();
        let (v, r) = witness_matrix(&a, &s, 0.4, 2).unwrap();
        assert_eq!(v.shape(), (4, 3));
        // UUᵀ = (I − J/3)/2 gives M_ii = 1/3, M_ij = 1/12.
        assert!((r.inner_product - 0.25).abs() < 1e-12);
        assert!((r.frobenius_sq - 0.375).abs() < 1e-12);
        assert!((r.trace - 1.0).abs() < 1e-12);
        assert!(r.holds());
        assert!(matches!(
            witness_matrix(&a, &s, 0.6, 1),
            Err(Error::InsufficientRank { available: 0, required: 1 })
        ));
    }

    #[test]
    fn rank_report_examples() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])
            .unwrap()
            .disjoint_union(&Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        let a = normalized_adjacency(&g).unwrap();
        let s = eig_sym(&a).unwrap();
        let r = verify_rank_inequality(&a, &s, 0.9, 0.5).unwrap();
        assert_eq!(r.bottom_rank, 1);
        assert!((r.tau_prime - 0.62).abs() < 1e-12);
        assert_eq!(r.top_rank, 2);
        assert!((r.lhs - 0.25).abs() < 1e-15);
        assert!(r.holds && r.chain.as_ref().unwrap().holds);

        let a = c4();
        let s = eig_sym(&a).unwrap();
        let r = verify_rank_inequality(&a, &s, 1.0, 0.5).unwrap();
        assert_eq!((r.bottom_rank, r.top_rank), (1, 1));
        assert!((r.tau_prime - 1.0).abs() < 1e-15);
        assert!(r.holds);
        assert!(verify_rank_inequality(&a, &s, 1.0, 1.0).is_err());
        assert!(verify_rank_inequality(&a, &s, 1.0, 0.0).is_err());
    }

    #[test]
    fn precondition_flags() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, -2.0, 0.0]);
        let s = eig_sym(&m).unwrap();
        let r = verify_rank_inequality(&m, &s, 0.5, 0.5).unwrap();
        assert!(!r.nonnegative_entries && !r.norm_bounded && r.chain.is_none());
    }

    fn arb_symmetric() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
                let m = DMatrix::from_vec(n, n, v);
                (&m + m.transpose()) * 0.5
            })
        })
    }

    proptest! {
        #[test]
        fn decomposition_invariants(m in arb_symmetric()) {
            let s = eig_sym(&m).unwrap();
            let n = m.nrows();
            let q = &s.eigenvectors;
            let orth = q.transpose() * q - DMatrix::<f64>::identity(n, n);
            prop_assert!(orth.amax() <= 1e-8);
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.eigenvalues.clone()));
            prop_assert!((&m * q - q * lam).amax() <= 1e-7);
            prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(eig_sym(&m).unwrap(), s.clone());
            prop_assert!(threshold_rank(&s, 0.0, Side::Top) + threshold_rank(&s, 0.0, Side::Bottom) >= n);
            for eps in [1e-6, 0.1, 1.0] {
                let gap = s.eigenvalues.iter().filter(|&&l| l < -EIG_SLACK && l > -eps + EIG_SLACK).count();
                prop_assert!(threshold_rank(&s, 0.0, Side::Top) + threshold_rank(&s, eps, Side::Bottom) + gap >= n);
            }
        }

        #[test]
        fn gram_matches_explicit_witness(seed in 0u64..200, lam in 0.05f64..0.9) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let mut edges = Vec::new();
            for u in 0..n {
                edges.push((u, (u + 1) % n));
                for v in u + 2..n {
                    if rng.random_bool(0.3) {
                        edges.push((u, v));
                    }
                }
            }
            let a = norm_adj(n, &edges);
            let s = eig_sym(&a).unwrap();
            let t = s.bottom_rank(lam);
            prop_assume!(t > 0);
            let (v, r) = witness_matrix(&a, &s, lam, t).unwrap();
            prop_assert!(r.holds(), "{:?}", r);
            let g = witness_gram(&s, lam, t).unwrap();
            prop_assert!((v.transpose() * &v - g).amax() <= 1e-12);
        }
    }
}
