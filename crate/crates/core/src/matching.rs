//! Matching step: choose candidate hyperlinks whose adjacency footprint on
//! the empty entries of `A` best explains a predicted matrix `ΔÂ`.
//!
//! The relaxed problem is
//!
//! ```text
//! minimize  ‖[U Λ Uᵀ]_Ā − ΔÂ‖²_F + α Σ |λ_c|   subject to 0 ≤ λ_c ≤ 1
//! ```
//!
//! The Frobenius norm runs over both triangles of the symmetric matrices;
//! the diagonal is left out. Writing `P_c` for the empty off-diagonal pairs
//! covered by candidate `c`, the quadratic term is
//! `2 (λᵀGλ − 2bᵀλ + const)` with `G_cd = |P_c ∩ P_d|` and
//! `b_c = Σ_{p ∈ P_c} ΔÂ_p`. `G` and `b` are built once; each projected
//! gradient step then costs one sparse `Gλ` product.
//!
//! [`solve_ilsq_oracle`] solves the binary problem `λ ∈ {0,1}ⁿ` by exhaustive
//! enumeration for small pools.

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypermatrix::{AdjacencyMatrix, IncidenceMatrix};

/// Largest pool accepted by the exhaustive oracle.
pub const ORACLE_LIMIT: usize = 20;

/// One real score per candidate hyperlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some((c, &s)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(Error::NonFinite {
                row: c,
                col: 0,
                value: s,
            });
        }
        Ok(Self(scores))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// L1 weight `α`.
    pub l1_penalty: f64,
    pub max_steps: usize,
    /// Multiplier on `1/L`, where `L` bounds the Lipschitz constant of the
    /// quadratic term's gradient.
    pub step_size: f64,
    /// Stop once the objective changes by less than this between steps.
    pub tolerance: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            l1_penalty: 0.1,
            max_steps: 500,
            step_size: 1.0,
            tolerance: 1e-6,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1_penalty >= 0.0 && self.l1_penalty.is_finite()) {
            return Err(Error::InvalidConfig("l1_penalty must be finite and >= 0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step_size must be finite and > 0".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

fn check_inputs(u: &IncidenceMatrix, target: &AdjacencyMatrix, a: &AdjacencyMatrix) -> Result<()> {
    if u.num_vertices() != a.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: u.num_vertices(),
        });
    }
    if target.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: target.dim(),
        });
    }
    if let Some((i, j, v)) = target.iter().find(|(_, _, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i,
            col: j,
            value: v,
        });
    }
    Ok(())
}

/// Off-diagonal pairs `(i, j)`, `i < j`, of column `col` that are empty in `a`.
pub fn masked_pairs(col: &[usize], a: &AdjacencyMatrix) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (p, &i) in col.iter().enumerate() {
        for &j in &col[p + 1..] {
            if !a.is_nonempty(i, j) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// The quadratic model of the matching objective for a fixed `U`, `A` and target.
#[derive(Debug, Clone)]
pub struct MatchingProblem {
    /// Sparse rows of `G`.
    gram: Vec<Vec<(usize, f64)>>,
    linear: Vec<f64>,
    constant: f64,
    l1_penalty: f64,
}

impl MatchingProblem {
    pub fn new(
        u: &IncidenceMatrix,
        target: &AdjacencyMatrix,
        a: &AdjacencyMatrix,
        l1_penalty: f64,
    ) -> Result<Self> {
        check_inputs(u, target, a)?;
        let n = u.num_columns();
        let mut cover: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut linear = vec![0.0; n];
        for (c, col) in u.columns().iter().enumerate() {
            for pair in masked_pairs(col, a) {
                linear[c] += target.value(pair.0, pair.1);
                cover.entry(pair).or_default().push(c);
            }
        }
        let mut dense_rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for cands in cover.values() {
            for &c in cands {
                for &d in cands {
                    *dense_rows[c].entry(d).or_insert(0.0) += 1.0;
                }
            }
        }
        let gram = dense_rows
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect();
        let constant = target
            .iter_off_diagonal()
            .map(|(_, _, v)| v * v)
            .sum();
        Ok(Self {
            gram,
            linear,
            constant,
            l1_penalty,
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.linear.len()
    }

    /// `G_cd`.
    pub fn gram_entry(&self, c: usize, d: usize) -> f64 {
        self.gram[c]
            .iter()
            .find(|&&(k, _)| k == d)
            .map_or(0.0, |&(_, v)| v)
    }

    fn gram_times(&self, lambda: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.gram) {
            *o = row.iter().map(|&(d, g)| g * lambda[d]).sum();
        }
    }

    fn objective_with(&self, lambda: &[f64], g_lambda: &[f64]) -> f64 {
        let quad: f64 = lambda.iter().zip(g_lambda).map(|(l, g)| l * g).sum();
        let lin: f64 = lambda.iter().zip(&self.linear).map(|(l, b)| l * b).sum();
        let l1: f64 = lambda.iter().map(|l| l.abs()).sum();
        2.0 * (quad - 2.0 * lin + self.constant) + self.l1_penalty * l1
    }

    /// Full objective, penalty included.
    pub fn objective(&self, lambda: &[f64]) -> f64 {
        let mut g = vec![0.0; lambda.len()];
        self.gram_times(lambda, &mut g);
        self.objective_with(lambda, &g)
    }

    /// Gershgorin bound on the Lipschitz constant of the quadratic term's gradient.
    pub fn lipschitz_bound(&self) -> f64 {
        4.0 * self
            .gram
            .iter()
            .map(|row| row.iter().map(|(_, g)| g.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Projected subgradient descent from `λ = 0`, keeping the best iterate.
    /// Returns the best point and the best-so-far objective after each step
    /// (index 0 is the starting point).
    pub fn solve(&self, cfg: &MatchConfig) -> Result<(ScoreVector, Vec<f64>)> {
        cfg.validate()?;
        let n = self.num_candidates();
        let mut lambda = vec![0.0; n];
        let mut g_lambda = vec![0.0; n];
        let mut best = lambda.clone();
        let mut best_obj = self.objective_with(&lambda, &g_lambda);
        let mut history = vec![best_obj];

        let lipschitz = self.lipschitz_bound();
        if lipschitz == 0.0 {
            return Ok((ScoreVector(best), history));
        }
        let eta = cfg.step_size / lipschitz;
        let alpha = self.l1_penalty;
        let mut prev_obj = best_obj;
        for _ in 0..cfg.max_steps {
            for c in 0..n {
                // on the feasible box |λ| = λ, so α is a valid subgradient everywhere
                let grad = 4.0 * (g_lambda[c] - self.linear[c]) + alpha;
                lambda[c] = (lambda[c] - eta * grad).clamp(0.0, 1.0);
            }
            self.gram_times(&lambda, &mut g_lambda);
            let obj = self.objective_with(&lambda, &g_lambda);
            if obj < best_obj {
                best_obj = obj;
                best.copy_from_slice(&lambda);
            }
            history.push(best_obj);
            if (prev_obj - obj).abs() < cfg.tolerance {
                break;
            }
            prev_obj = obj;
        }
        Ok((ScoreVector(best), history))
    }
}

/// Box-constrained lasso relaxation of the matching problem.
pub fn solve_lasso(
    u: &IncidenceMatrix,
    delta_hat: &AdjacencyMatrix,
    a: &AdjacencyMatrix,
    cfg: &MatchConfig,
) -> Result<ScoreVector> {
    cfg.validate()?;
    let problem = MatchingProblem::new(u, delta_hat, a, cfg.l1_penalty)?;
    let (lambda, history) = problem.solve(cfg)?;
    log::debug!(
        "matching: {} candidates, {} steps, objective {:.6}",
        u.num_columns(),
        history.len() - 1,
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(lambda)
}

/// Result of the exhaustive binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct IlsqSolution {
    pub lambda: ScoreVector,
    pub residual: f64,
    /// Number of binary vectors whose residual equals the minimum.
    pub minimizers: usize,
}

/// Exhaustive minimisation of `‖[UΛUᵀ]_Ā − target‖²_F` over `λ ∈ {0,1}ⁿ`.
///
/// Residuals are evaluated directly on the covered pairs, independently of
/// the Gram-matrix route used by the lasso.
pub fn solve_ilsq_exhaustive(
    u: &IncidenceMatrix,
    target: &AdjacencyMatrix,
    a: &AdjacencyMatrix,
) -> Result<IlsqSolution> {
    check_inputs(u, target, a)?;
    let n = u.num_columns();
    if n > ORACLE_LIMIT {
        return Err(Error::OracleScale {
            candidates: n,
            limit: ORACLE_LIMIT,
        });
    }
    // pair -> (bitmask of covering candidates, target value); candidate c
    // owns bit n-1-c so that increasing codes are lexicographic in λ
    let mut pairs: BTreeMap<(usize, usize), (u32, f64)> = BTreeMap::new();
    for (c, col) in u.columns().iter().enumerate() {
        for pair in masked_pairs(col, a) {
            pairs.entry(pair).or_insert((0, 0.0)).0 |= 1 << (n - 1 - c);
        }
    }
    let mut fixed = 0.0;
    for (i, j, v) in target.iter_off_diagonal() {
        match pairs.get_mut(&(i, j)) {
            Some(entry) => entry.1 = v,
            None => fixed += 2.0 * v * v,
        }
    }
    let pairs: Vec<(u32, f64)> = pairs.into_values().collect();

    let residual = |code: u32| -> f64 {
        fixed
            + pairs
                .iter()
                .map(|&(mask, t)| {
                    let e = (mask & code).count_ones() as f64 - t;
                    2.0 * e * e
                })
                .sum::<f64>()
    };

    let total: u32 = if n == 0 { 1 } else { 1u32 << n };
    let mut best_code = 0u32;
    let mut best = residual(0);
    let mut minimizers = 1usize;
    for code in 1..total {
        let r = residual(code);
        if r < best {
            best = r;
            best_code = code;
            minimizers = 1;
        } else if r == best {
            minimizers += 1;
        }
    }
    let lambda = (0..n)
        .map(|c| f64::from((best_code >> (n - 1 - c)) & 1))
        .collect();
    Ok(IlsqSolution {
        lambda: ScoreVector(lambda),
        residual: best,
        minimizers,
    })
}

/// Binary minimiser of the matching residual, ties broken toward the
/// lexicographically smallest `λ`.
pub fn solve_ilsq_oracle(
    u: &IncidenceMatrix,
    target: &AdjacencyMatrix,
    a: &AdjacencyMatrix,
) -> Result<ScoreVector> {
    solve_ilsq_exhaustive(u, target, a).map(|s| s.lambda)
}

/// Candidate indices by descending score; equal scores keep ascending index.
pub fn rank_candidates(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypermatrix::{mask_off, project};

    fn base() -> AdjacencyMatrix {
        project(&IncidenceMatrix::new(6, vec![vec![0, 1], vec![2, 3]]).unwrap())
    }

    fn footprint(u: &IncidenceMatrix, cols: &[usize], a: &AdjacencyMatrix) -> AdjacencyMatrix {
        mask_off(&project(&u.select(cols)), a).unwrap()
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_candidates(&[0.2, 0.9, 0.5]), vec![1, 2, 0]);
        assert_eq!(rank_candidates(&[0.3; 4]), vec![0, 1, 2, 3]);
        assert_eq!(rank_candidates(&[0.0, 0.0, 1.0]), vec![2, 0, 1]);
        assert!(rank_candidates(&[]).is_empty());
    }

    #[test]
    fn lasso_single_candidate() {
        let a = base();
        let u = IncidenceMatrix::new(6, vec![vec![0, 4, 5], vec![1, 2], vec![3, 5]]).unwrap();
        let target = footprint(&u, &[0], &a);
        let cfg = MatchConfig {
            l1_penalty: 0.01,
            ..Default::default()
        };
        let lambda = solve_lasso(&u, &target, &a, &cfg).unwrap();
        assert!(lambda[0] >= 0.9, "{lambda:?}");
        assert!(lambda[1] <= 0.1 && lambda[2] <= 0.1, "{lambda:?}");
        assert_eq!(solve_ilsq_oracle(&u, &target, &a).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn lasso_empty_target_is_origin() {
        let a = base();
        let u = IncidenceMatrix::new(6, vec![vec![0, 4], vec![1, 5]]).unwrap();
        let lambda = solve_lasso(&u, &AdjacencyMatrix::new(6), &a, &MatchConfig::default()).unwrap();
        assert_eq!(lambda.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn lasso_two_disjoint_candidates() {
        let a = base();
        let u = IncidenceMatrix::new(6, vec![vec![0, 4], vec![1, 5], vec![2, 4, 5]]).unwrap();
        let target = footprint(&u, &[0, 1], &a);
        let sol = solve_ilsq_exhaustive(&u, &target, &a).unwrap();
        assert_eq!(sol.lambda.as_slice(), &[1.0, 1.0, 0.0]);
        assert_eq!(sol.minimizers, 1);
        let lambda = solve_lasso(&u, &target, &a, &MatchConfig::default()).unwrap();
        assert!(lambda[0] >= 0.9 && lambda[1] >= 0.9, "{lambda:?}");
    }

    #[test]
    fn oracle_examples() {
        let a = base();
        let u = IncidenceMatrix::new(6, vec![vec![0, 4]]).unwrap();
        let target = footprint(&u, &[0], &a);
        assert_eq!(solve_ilsq_oracle(&u, &target, &a).unwrap().as_slice(), &[1.0]);

        // every candidate covers only pairs already in A: all λ tie, pick zero
        let covered = IncidenceMatrix::new(6, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let sol = solve_ilsq_exhaustive(&covered, &AdjacencyMatrix::new(6), &a).unwrap();
        assert_eq!(sol.lambda.as_slice(), &[0.0, 0.0]);
        assert_eq!(sol.minimizers, 4);

        let big = IncidenceMatrix::new(6, vec![vec![0, 4]; ORACLE_LIMIT + 1]).unwrap();
        assert!(matches!(
            solve_ilsq_oracle(&big, &AdjacencyMatrix::new(6), &a),
            Err(Error::OracleScale { .. })
        ));
    }

    #[test]
    fn gram_objective_matches_direct_residual() {
        let a = base();
        let u = IncidenceMatrix::new(6, vec![vec![0, 4, 5], vec![1, 4], vec![3, 4, 5]]).unwrap();
        let target = AdjacencyMatrix::from_triplets(
            6,
            &[(0, 4, 0.7), (4, 5, 1.3), (1, 4, -0.2), (0, 1, 0.5), (2, 2, 9.0)],
        )
        .unwrap();
        let problem = MatchingProblem::new(&u, &target, &a, 0.0).unwrap();
        let lambda = [0.3, 0.8, 0.1];
        let mut direct = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    continue;
                }
                let fit: f64 = if a.is_nonempty(i, j) {
                    0.0
                } else {
                    (0..3)
                        .filter(|&c| u.column(c).contains(&i) && u.column(c).contains(&j))
                        .map(|c| lambda[c])
                        .sum()
                };
                let e = fit - target.value(i, j);
                direct += e * e;
            }
        }
        assert!((problem.objective(&lambda) - direct).abs() < 1e-12);
        assert_eq!(problem.gram_entry(0, 2), 1.0);
        assert_eq!(problem.gram_entry(0, 0), 3.0);
    }

    #[test]
    fn best_objective_is_monotone_and_feasible() {
        let a = base();
        let u = IncidenceMatrix::new(
            6,
            vec![vec![0, 4, 5], vec![1, 4], vec![3, 4, 5], vec![0, 2, 5]],
        )
        .unwrap();
        let target = AdjacencyMatrix::from_triplets(6, &[(0, 4, 2.0), (4, 5, 1.5), (2, 5, 0.4)]).unwrap();
        let problem = MatchingProblem::new(&u, &target, &a, 0.1).unwrap();
        let (lambda, history) = problem.solve(&MatchConfig::default()).unwrap();
        assert!(history.windows(2).all(|w| w[1] <= w[0]));
        assert!(lambda.iter().all(|&l| (0.0..=1.0).contains(&l)));
        assert!(problem.objective(&lambda) <= problem.objective(&[0.0; 4]));
    }

    #[test]
    fn input_errors() {
        let a = base();
        let u = IncidenceMatrix::new(5, vec![vec![0, 4]]).unwrap();
        assert!(matches!(
            solve_lasso(&u, &AdjacencyMatrix::new(6), &a, &MatchConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let u = IncidenceMatrix::new(6, vec![vec![0, 4]]).unwrap();
        assert!(solve_lasso(&u, &AdjacencyMatrix::new(7), &a, &MatchConfig::default()).is_err());
        assert!(ScoreVector::new(vec![0.0, f64::NAN]).is_err());
    }
}
