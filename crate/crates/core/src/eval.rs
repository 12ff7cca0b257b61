//! Agreement between a reference coloring and a recovered one, up to relabeling.

use crate::error::{Error, Result};
use crate::graph::Partition;

const EXHAUSTIVE_LIMIT: usize = 8;

impl Partition {
    pub fn labels(&self) -> Vec<Option<usize>> {
        self.chi().iter().map(|&c| Some(c)).collect()
    }
}

/// Labels from disjoint sets; vertices outside every set are `None`.
pub fn labels_from_sets(n: usize, sets: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut out = vec![None; n];
    for (i, s) in sets.iter().enumerate() {
        for &x in s {
            out[x] = Some(i);
        }
    }
    out
}

fn permutations(k: usize, mut visit: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..k).collect();
    let mut c = vec![0; k];
    visit(&p);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            visit(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Best assignment of recovered labels to reference colors.
///
/// Returns, per recovered label, the reference color it maps to (if any) and
/// the fraction of vertices whose mapped label equals the reference color.
/// Unlabeled vertices count as mismatches.
pub fn permutation_match(chi: &Partition, hat: &[Option<usize>]) -> Result<(Vec<Option<usize>>, f64)> {
    let n = chi.n();
    if hat.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: hat.len() });
    }
    let k_hat = hat.iter().flatten().max().map_or(0, |&m| m + 1);
    let size = chi.k().max(k_hat);
    let mut conf = vec![vec![0usize; size]; size];
    for (x, h) in hat.iter().enumerate() {
        if let Some(h) = h {
            conf[*h][chi.color(x)] += 1;
        }
    }
    let mut best: Vec<usize> = (0..size).collect();
    let mut best_score = 0;
    if size <= EXHAUSTIVE_LIMIT {
        let mut first = true;
        permutations(size, |p| {
            let score = (0..size).map(|h| conf[h][p[h]]).sum();
            if first || score > best_score {
                first = false;
                best_score = score;
                best = p.to_vec();
            }
        });
    } else {
        let mut row_used = vec![false; size];
        let mut col_used = vec![false; size];
        for _ in 0..size {
            let mut pick = (0, 0, 0);
            let mut found = false;
            for (h, row) in conf.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if !row_used[h] && !col_used[c] && (!found || v > pick.2) {
                        pick = (h, c, v);
                        found = true;
                    }
                }
            }
            row_used[pick.0] = true;
            col_used[pick.1] = true;
            best[pick.0] = pick.1;
            best_score += pick.2;
        }
    }
    let mapping = (0..k_hat).map(|h| (best[h] < chi.k()).then_some(best[h])).collect();
    Ok((mapping, best_score as f64 / n.max(1) as f64))
}
