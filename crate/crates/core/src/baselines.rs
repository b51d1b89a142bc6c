//! Reference scorers: hypernetwork common neighbours (HCN), hypernetwork Katz
//! (HKatz), spectral hypergraph scoring on the transposed hypergraph (SHC)
//! and uniform random scores.
//!
//! HCN and HKatz average a pairwise graph index over the `m(m-1)/2` vertex
//! pairs of each candidate, on the unweighted graph where `i ~ j` iff the
//! training adjacency `A = S Sᵀ` is nonempty at `(i, j)`, `i ≠ j`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypermatrix::{project, IncidenceMatrix};
use crate::matching::ScoreVector;

/// Search grid for `β`.
pub const KATZ_BETA_GRID: [f64; 5] = [0.001, 0.005, 0.01, 0.1, 0.5];
/// Search grid for `ξ`.
pub const SHC_XI_GRID: [f64; 5] = [0.01, 0.1, 0.5, 0.99, 1.0];

/// Degree assigned to isolated vertices of the transposed hypergraph.
const SHC_DEGREE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatzConfig {
    pub beta: f64,
    pub max_path_length: usize,
}

impl Default for KatzConfig {
    fn default() -> Self {
        Self {
            beta: 0.01,
            max_path_length: 5,
        }
    }
}

impl KatzConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("katz beta must be finite and > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShcConfig {
    pub xi: f64,
}

impl Default for ShcConfig {
    fn default() -> Self {
        Self { xi: 0.5 }
    }
}

impl ShcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::InvalidConfig("shc xi must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

fn check_vertices(s: &IncidenceMatrix, u: &IncidenceMatrix) -> Result<()> {
    if s.num_vertices() != u.num_vertices() {
        return Err(Error::DimensionMismatch {
            left: s.num_vertices(),
            right: u.num_vertices(),
        });
    }
    Ok(())
}

/// Sorted neighbour lists of the unweighted training graph.
fn neighbours(s: &IncidenceMatrix) -> Vec<Vec<usize>> {
    let a = project(s);
    let mut adj = vec![Vec::new(); s.num_vertices()];
    for (i, j, _) in a.iter_off_diagonal() {
        adj[i].push(j);
        adj[j].push(i);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

fn sorted_intersection_len(x: &[usize], y: &[usize]) -> usize {
    let (mut p, mut q, mut n) = (0, 0, 0);
    while p < x.len() && q < y.len() {
        match x[p].cmp(&y[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                p += 1;
                q += 1;
            }
        }
    }
    n
}

/// Mean of `pair_score` over all vertex pairs of each candidate; candidates
/// with fewer than two vertices score 0.
fn mean_over_pairs<F>(u: &IncidenceMatrix, mut pair_score: F) -> ScoreVector
where
    F: FnMut(usize, usize) -> f64,
{
    let scores = u
        .columns()
        .iter()
        .enumerate()
        .map(|(c, col)| {
            if col.len() < 2 {
                log::warn!("candidate {c} has fewer than two vertices; scoring it 0");
                return 0.0;
            }
            let mut total = 0.0;
            for (p, &i) in col.iter().enumerate() {
                for &j in &col[p + 1..] {
                    total += pair_score(i, j);
                }
            }
            let m = col.len() as f64;
            total / (m * (m - 1.0) / 2.0)
        })
        .collect();
    ScoreVector::new(scores).expect("pair scores are finite")
}

pub fn score_hcn(s: &IncidenceMatrix, u: &IncidenceMatrix) -> Result<ScoreVector> {
    check_vertices(s, u)?;
    let adj = neighbours(s);
    Ok(mean_over_pairs(u, |i, j| {
        sorted_intersection_len(&adj[i], &adj[j]) as f64
    }))
}

/// Truncated Katz index `Σ_{l=1..L} β^l · walks_l(i, j)`, averaged per candidate.
pub fn score_hkatz(
    s: &IncidenceMatrix,
    u: &IncidenceMatrix,
    cfg: &KatzConfig,
) -> Result<ScoreVector> {
    check_vertices(s, u)?;
    if !(cfg.beta >= 0.0 && cfg.beta.is_finite()) {
        return Err(Error::InvalidConfig("katz beta must be finite and >= 0".into()));
    }
    let adj = neighbours(s);
    let m = s.num_vertices();
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
    let katz_row = |source: usize| -> Vec<f64> {
        let mut acc = vec![0.0; m];
        let mut walks = vec![0.0; m];
        walks[source] = 1.0;
        let mut weight = 1.0;
        for _ in 0..cfg.max_path_length {
            let mut next = vec![0.0; m];
            for (v, &count) in walks.iter().enumerate() {
                if count != 0.0 {
                    for &w in &adj[v] {
                        next[w] += count;
                    }
                }
            }
            walks = next;
            weight *= cfg.beta;
            for (a, &w) in acc.iter_mut().zip(&walks) {
                *a += weight * w;
            }
        }
        acc
    };
    Ok(mean_over_pairs(u, |i, j| {
        rows.entry(i).or_insert_with(|| katz_row(i))[j]
    }))
}

/// Spectral hypergraph scoring on the transposed hypergraph of `[S U]`.
///
/// The columns of `[S U]` become vertices and each original vertex becomes a
/// hyperedge joining the columns that contain it. With unit hyperedge weights
/// `Θ = Dv^{-1/2} H De^{-1} Hᵀ Dv^{-1/2}`, and `f = (I − ξΘ)^{-1} y` with
/// `y = 1` on training columns and `0` on candidates. Returns `f` on the
/// candidates. The system is solved by conjugate gradients; `ξ = 1` is
/// rejected because `Θ` always has eigenvalue one.
pub fn score_shc(s: &IncidenceMatrix, u: &IncidenceMatrix, cfg: &ShcConfig) -> Result<ScoreVector> {
    check_vertices(s, u)?;
    let xi = cfg.xi;
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidConfig("shc xi must lie in [0, 1]".into()));
    }
    if xi >= 1.0 {
        return Err(Error::SingularSystem { xi });
    }
    let all = s.concat(u)?;
    let n = all.num_columns();
    let inv_sqrt_dv: Vec<f64> = all
        .columns()
        .iter()
        .map(|col| 1.0 / (col.len() as f64).max(SHC_DEGREE_EPS).sqrt())
        .collect();
    let de = all.degrees();

    let theta = |x: &[f64], out: &mut [f64]| {
        let mut edge = vec![0.0; de.len()];
        for (c, col) in all.columns().iter().enumerate() {
            let t = x[c] * inv_sqrt_dv[c];
            for &v in col {
                edge[v] += t;
            }
        }
        for (e, &d) in edge.iter_mut().zip(&de) {
            if d > 0 {
                *e /= d as f64;
            }
        }
        for (c, col) in all.columns().iter().enumerate() {
            out[c] = col.iter().map(|&v| edge[v]).sum::<f64>() * inv_sqrt_dv[c];
        }
    };
    let operator = |x: &[f64], out: &mut [f64]| {
        theta(x, out);
        for (o, &xv) in out.iter_mut().zip(x) {
            *o = xv - xi * *o;
        }
    };

    let mut y = vec![0.0; n];
    y[..s.num_columns()].iter_mut().for_each(|v| *v = 1.0);
    let f = conjugate_gradient(operator, &y, 1e-12, 10 * n + 100).ok_or(Error::SingularSystem { xi })?;
    ScoreVector::new(f[s.num_columns()..].to_vec())
}

/// Solves `Op x = b` for symmetric positive definite `Op`, starting at `x = b`.
/// Returns `None` when the relative residual does not reach `rel_tol`.
fn conjugate_gradient<F>(op: F, b: &[f64], rel_tol: f64, max_iter: usize) -> Option<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Some(vec![0.0; n]);
    }
    let mut x = b.to_vec();
    let mut ax = vec![0.0; n];
    op(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for _ in 0..=max_iter {
        if rr.sqrt() <= rel_tol * b_norm {
            return Some(x);
        }
        op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    None
}

/// I.i.d. uniform scores in `[0, 1)`.
pub fn score_random(n_candidates: usize, seed: u64) -> ScoreVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScoreVector::new((0..n_candidates).map(|_| rng.gen::<f64>()).collect())
        .expect("uniform draws are finite")
}
