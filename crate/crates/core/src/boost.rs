//! The completion-matching fixed-point iteration.
//!
//! Starting from `Λ₀ = 0`, iteration `k` feeds the previous scores back into
//! the training adjacency, `A_k = A + [U Λ_{k-1} Uᵀ]_A`, completes `A_k`, and
//! matches the completion against the candidate pool to get `Λ_k`. The loop
//! stops as soon as the drift `‖Λ_k − Λ_{k-1}‖` fails to shrink (checked from
//! `k = 2`) or at the iteration cap. The output is the mean of
//! `Λ_1 … Λ_{k-2}`; when `k ≤ 2` the last computed scores are returned.

use serde::{Deserialize, Serialize};

use crate::completion::{self, CompletionConfig};
use crate::error::{Error, Result};
use crate::hypermatrix::{add_weighted_outer, project, IncidenceMatrix};
use crate::matching::{self, masked_pairs, MatchConfig, ScoreVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatBoostConfig {
    pub max_iterations: usize,
    pub completion: CompletionConfig,
    pub matching: MatchConfig,
}

impl Default for MatBoostConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            completion: CompletionConfig::default(),
            matching: MatchConfig::default(),
        }
    }
}

impl MatBoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        self.completion.validate()?;
        self.matching.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The drift stopped decreasing.
    Criterion,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `Λ_1 … Λ_k`.
    pub scores: Vec<ScoreVector>,
    /// `drifts[i] = ‖Λ_{i+1} − Λ_i‖`, with `Λ_0 = 0`.
    pub drifts: Vec<f64>,
    pub stop_reason: StopReason,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.scores.len()
    }
}

/// Euclidean distance between score vectors, i.e. the Frobenius distance of
/// the diagonal matrices they represent.
pub fn drift(prev: &[f64], cur: &[f64]) -> Result<f64> {
    if prev.len() != cur.len() {
        return Err(Error::LengthMismatch {
            expected: prev.len(),
            found: cur.len(),
        });
    }
    Ok(prev
        .iter()
        .zip(cur)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Mean of `Λ_1 … Λ_{k-2}`, or `Λ_k` when `k ≤ 2`.
pub fn ensemble_average(trace: &IterationTrace) -> ScoreVector {
    let k = trace.scores.len();
    if k <= 2 {
        return trace
            .scores
            .last()
            .cloned()
            .unwrap_or_else(|| ScoreVector::zeros(0));
    }
    let members = &trace.scores[..k - 2];
    let mut sum = vec![0.0; members[0].len()];
    for lambda in members {
        for (s, l) in sum.iter_mut().zip(lambda.iter()) {
            *s += l;
        }
    }
    let count = members.len() as f64;
    ScoreVector::new(sum.into_iter().map(|s| s / count).collect())
        .expect("mean of finite vectors is finite")
}

/// Runs the stopping rule and ensemble output around an arbitrary map
/// `Λ_{k-1} ↦ Λ_k`. `step` receives the iteration number `k` (from 1).
pub fn iterate_fixed_point<F>(
    num_candidates: usize,
    max_iterations: usize,
    mut step: F,
) -> Result<(ScoreVector, IterationTrace)>
where
    F: FnMut(usize, &ScoreVector) -> Result<ScoreVector>,
{
    if max_iterations == 0 {
        return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
    }
    let mut prev = ScoreVector::zeros(num_candidates);
    let mut scores = Vec::new();
    let mut drifts: Vec<f64> = Vec::new();
    let mut stop_reason = StopReason::IterationCap;
    for k in 1..=max_iterations {
        let cur = step(k, &prev)?;
        let d = drift(&prev, &cur)?;
        scores.push(cur.clone());
        drifts.push(d);
        if k >= 2 && d >= drifts[k - 2] {
            stop_reason = StopReason::Criterion;
            break;
        }
        prev = cur;
    }
    let trace = IterationTrace {
        scores,
        drifts,
        stop_reason,
    };
    log::debug!(
        "fixed point: {} iterations, stop {:?}, drifts {:?}",
        trace.iterations(),
        trace.stop_reason,
        trace.drifts
    );
    Ok((ensemble_average(&trace), trace))
}

/// Scores every column of `u` as a candidate missing hyperlink of `s`.
pub fn run_matboost(
    s: &IncidenceMatrix,
    u: &IncidenceMatrix,
    cfg: &MatBoostConfig,
) -> Result<(ScoreVector, IterationTrace)> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::Degenerate("training incidence matrix has no columns".into()));
    }
    if u.is_empty() {
        return Err(Error::EmptyPool);
    }
    if s.num_vertices() != u.num_vertices() {
        return Err(Error::DimensionMismatch {
            left: s.num_vertices(),
            right: u.num_vertices(),
        });
    }
    let a = project(s);
    // only entries covered by some candidate affect the matching solution
    let mut candidate_pairs: Vec<(usize, usize)> = u
        .columns()
        .iter()
        .flat_map(|col| masked_pairs(col, &a))
        .collect();
    candidate_pairs.sort_unstable();
    candidate_pairs.dedup();

    iterate_fixed_point(u.num_columns(), cfg.max_iterations, |k, prev| {
        let a_k = add_weighted_outer(&a, u, prev, true)?;
        let completion_cfg = CompletionConfig {
            seed: cfg.completion.seed.wrapping_add(k as u64 - 1),
            ..cfg.completion.clone()
        };
        let model = completion::train(&a_k, &completion_cfg)?;
        let delta_hat =
            completion::predict_empty_on(&model, &a_k, candidate_pairs.iter().copied())?;
        matching::solve_lasso(u, &delta_hat, &a, &cfg.matching)
    })
}
