//! Evaluation protocol: random hyperlink deletion, ranking metrics,
//! cross-validated hyperparameter selection and synthetic hypergraphs.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, KatzConfig, ShcConfig, KATZ_BETA_GRID, SHC_XI_GRID};
use crate::boost::{run_matboost, MatBoostConfig};
use crate::error::{Error, Result};
use crate::hypermatrix::IncidenceMatrix;
use crate::matching::{rank_candidates, ScoreVector};

/// Number of folds used by [`cross_validate`].
pub const CV_FOLDS: usize = 5;

/// SplitMix64 finaliser, used to derive independent seed streams.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training network, candidate pool and candidate labels for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSplit {
    pub train: IncidenceMatrix,
    pub candidates: IncidenceMatrix,
    /// `true` for deleted (positive) hyperlinks.
    pub labels: Vec<bool>,
    /// Column of `full` behind each positive candidate, `None` for negatives.
    pub origin: Vec<Option<usize>>,
}

/// Deletes `missing_count` random columns of `full`; they join `neg_pool` as
/// the shuffled candidate set.
pub fn make_split(
    full: &IncidenceMatrix,
    neg_pool: &IncidenceMatrix,
    missing_count: usize,
    seed: u64,
) -> Result<TrialSplit> {
    if full.num_vertices() != neg_pool.num_vertices() {
        return Err(Error::DimensionMismatch {
            left: full.num_vertices(),
            right: neg_pool.num_vertices(),
        });
    }
    if missing_count >= full.num_columns() {
        return Err(Error::InvalidConfig(format!(
            "missing_count {missing_count} must be smaller than the number of hyperlinks ({})",
            full.num_columns()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..full.num_columns()).collect();
    order.shuffle(&mut rng);
    let (positives, rest) = order.split_at(missing_count);
    let mut rest = rest.to_vec();
    rest.sort_unstable();
    let train = full.select(&rest);

    let mut pool: Vec<(Vec<usize>, Option<usize>)> = positives
        .iter()
        .map(|&c| (full.column(c).to_vec(), Some(c)))
        .chain(neg_pool.columns().iter().map(|col| (col.clone(), None)))
        .collect();
    pool.shuffle(&mut rng);
    let labels = pool.iter().map(|(_, o)| o.is_some()).collect();
    let origin = pool.iter().map(|(_, o)| *o).collect();
    let candidates =
        IncidenceMatrix::new(full.num_vertices(), pool.into_iter().map(|(c, _)| c).collect())?;
    Ok(TrialSplit {
        train,
        candidates,
        labels,
        origin,
    })
}

fn check_labels(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if let Some((i, &s)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFinite {
            row: i,
            col: 0,
            value: s,
        });
    }
    Ok(())
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann-Whitney statistic).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_labels(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (doubled, to stay integral) mid-ranks of the positives
    let mut pos_rank_sum2: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid2 = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        pos_rank_sum2 += mid2 * pos_in_group;
        start = end;
    }
    let n_pos = n_pos as u64;
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u64) as f64)
}

/// Positives among the top `n` candidates, `n` being the number of positives.
pub fn recovered_number(scores: &[f64], labels: &[bool]) -> Result<usize> {
    check_labels(scores, labels)?;
    let n = labels.iter().filter(|&&l| l).count();
    if n == 0 {
        return Err(Error::NoPositives);
    }
    Ok(rank_candidates(scores)
        .into_iter()
        .take(n)
        .filter(|&i| labels[i])
        .count())
}

/// Chooses the grid value with the best mean held-out AUC over
/// [`CV_FOLDS`] folds of the training columns. Ties go to the smaller value.
///
/// Each fold's positives are scored against a seeded subsample of `neg_pool`
/// of the same size. Grid values whose scorer fails are skipped.
pub fn cross_validate<F>(
    s: &IncidenceMatrix,
    neg_pool: &IncidenceMatrix,
    grid: &[f64],
    seed: u64,
    mut scorer: F,
) -> Result<f64>
where
    F: FnMut(&IncidenceMatrix, &IncidenceMatrix, f64) -> Result<ScoreVector>,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if s.num_columns() < CV_FOLDS {
        return Err(Error::Degenerate(format!(
            "cross-validation needs at least {CV_FOLDS} training hyperlinks, got {}",
            s.num_columns()
        )));
    }
    if neg_pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..s.num_columns()).collect();
    order.shuffle(&mut rng);

    let mut folds = Vec::with_capacity(CV_FOLDS);
    for f in 0..CV_FOLDS {
        let held: Vec<usize> = order.iter().skip(f).step_by(CV_FOLDS).copied().collect();
        let mut kept: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(p, _)| p % CV_FOLDS != f)
            .map(|(_, &c)| c)
            .collect();
        kept.sort_unstable();
        let mut negs: Vec<usize> = (0..neg_pool.num_columns()).collect();
        negs.shuffle(&mut rng);
        negs.truncate(held.len());
        let candidates = s.select(&held).concat(&neg_pool.select(&negs))?;
        let mut labels = vec![true; held.len()];
        labels.resize(candidates.num_columns(), false);
        folds.push((s.select(&kept), candidates, labels));
    }

    let mut best: Option<(f64, f64)> = None;
    for &value in grid {
        let mut total = 0.0;
        let mut failed = None;
        for (train, candidates, labels) in &folds {
            match scorer(train, candidates, value).and_then(|sc| auc(&sc, labels)) {
                Ok(a) => total += a,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            // ξ = 1 is on the SHC grid and always singular
            if matches!(e, Error::SingularSystem { .. }) {
                log::debug!("cross-validation: skipping grid value {value}: {e}");
            } else {
                log::warn!("cross-validation: skipping grid value {value}: {e}");
            }
            continue;
        }
        let mean = total / folds.len() as f64;
        best = match best {
            Some((bv, ba)) if ba > mean || (ba == mean && bv <= value) => Some((bv, ba)),
            _ => Some((value, mean)),
        };
    }
    best.map(|(v, _)| v)
        .ok_or_else(|| Error::Degenerate("every grid value failed during cross-validation".into()))
}

/// Probability that a synthetic hyperlink's vertex is drawn near its centre
/// rather than from all vertices.
const SYNTHETIC_COHESION: f64 = 0.9;
const SYNTHETIC_MAX_ATTEMPTS: usize = 1000;

fn check_synthetic_args(num_vertices: usize, cardinality: (usize, usize)) -> Result<()> {
    let (lo, hi) = cardinality;
    if lo < 2 || hi < lo || num_vertices < hi {
        return Err(Error::InvalidConfig(format!(
            "infeasible cardinality range ({lo}, {hi}) for {num_vertices} vertices"
        )));
    }
    Ok(())
}

/// Synthetic hypergraph with latent vertex geometry and preferential attachment.
///
/// Every vertex gets a random angle on a circle. Each hyperlink picks a random
/// centre angle and a size in `cardinality`, then draws distinct vertices with
/// weight `(degree + 1)^overlap_bias × exp(−d² / 2σ²)`, `d` being the angular
/// distance to the centre and `σ` the arc expected to hold `2 × max` vertices.
/// With probability 0.1 a vertex is drawn ignoring distance. Duplicate
/// hyperlinks are redrawn.
pub fn generate_synthetic(
    num_vertices: usize,
    num_hyperlinks: usize,
    cardinality: (usize, usize),
    overlap_bias: f64,
    seed: u64,
) -> Result<IncidenceMatrix> {
    check_synthetic_args(num_vertices, cardinality)?;
    if !overlap_bias.is_finite() {
        return Err(Error::InvalidConfig("overlap_bias must be finite".into()));
    }
    let mut generator = SyntheticGenerator::new(num_vertices, cardinality, overlap_bias, seed);
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(num_hyperlinks);
    while columns.len() < num_hyperlinks {
        let col = generator.draw_unique(|c| columns.contains(c))?;
        generator.record(&col);
        columns.push(col);
    }
    IncidenceMatrix::new(num_vertices, columns)
}

/// Negative candidates: hyperlinks from a generator with an independent seed
/// stream (and therefore unrelated vertex geometry), rejecting any column
/// equal to a column of `truth` or to an earlier negative.
pub fn generate_negative_pool(
    truth: &IncidenceMatrix,
    count: usize,
    cardinality: (usize, usize),
    overlap_bias: f64,
    seed: u64,
) -> Result<IncidenceMatrix> {
    let m = truth.num_vertices();
    check_synthetic_args(m, cardinality)?;
    let mut generator =
        SyntheticGenerator::new(m, cardinality, overlap_bias, mix_seed(seed, 0x6e65_6761_7469_7665));
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(count);
    while columns.len() < count {
        let col = generator.draw_unique(|c| {
            columns.contains(c) || truth.columns().iter().any(|t| t == c)
        })?;
        generator.record(&col);
        columns.push(col);
    }
    IncidenceMatrix::new(m, columns)
}

struct SyntheticGenerator {
    rng: ChaCha8Rng,
    angle: Vec<f64>,
    width: f64,
    degree: Vec<usize>,
    cardinality: (usize, usize),
    overlap_bias: f64,
}

impl SyntheticGenerator {
    fn new(num_vertices: usize, cardinality: (usize, usize), overlap_bias: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = (0..num_vertices)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        let width = std::f64::consts::PI * (2 * cardinality.1) as f64 / num_vertices as f64;
        Self {
            rng,
            angle,
            width,
            degree: vec![0; num_vertices],
            cardinality,
            overlap_bias,
        }
    }

    fn pick(&mut self, centre: Option<f64>, taken: &[usize]) -> usize {
        let weights: Vec<f64> = (0..self.degree.len())
            .map(|v| {
                if taken.contains(&v) {
                    return 0.0;
                }
                let pref = (self.degree[v] as f64 + 1.0).powf(self.overlap_bias);
                match centre {
                    Some(c) => {
                        let d = (self.angle[v] - c).abs();
                        let d = d.min(std::f64::consts::TAU - d);
                        pref * (-d * d / (2.0 * self.width * self.width)).exp()
                    }
                    None => pref,
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            // everything near the centre is taken
            return self.pick(None, taken);
        }
        let mut r = self.rng.gen::<f64>() * total;
        let mut last = 0;
        for (v, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last = v;
                r -= w;
                if r < 0.0 {
                    return v;
                }
            }
        }
        last
    }

    fn draw(&mut self) -> Vec<usize> {
        let (lo, hi) = self.cardinality;
        let size = self.rng.gen_range(lo..=hi);
        let centre = self.rng.gen_range(0.0..std::f64::consts::TAU);
        let mut col = Vec::with_capacity(size);
        while col.len() < size {
            let local = self.rng.gen::<f64>() < SYNTHETIC_COHESION;
            let v = self.pick(local.then_some(centre), &col);
            col.push(v);
        }
        col.sort_unstable();
        col
    }

    fn draw_unique<F: Fn(&Vec<usize>) -> bool>(&mut self, taken: F) -> Result<Vec<usize>> {
        for _ in 0..SYNTHETIC_MAX_ATTEMPTS {
            let col = self.draw();
            if !taken(&col) {
                return Ok(col);
            }
        }
        Err(Error::Degenerate(
            "could not draw a new distinct hyperlink; the requested hypergraph is too dense".into(),
        ))
    }

    fn record(&mut self, col: &[usize]) {
        for &v in col {
            self.degree[v] += 1;
        }
    }
}

/// A scoring method together with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    Matboost(MatBoostConfig),
    Hcn,
    Hkatz {
        config: KatzConfig,
        /// Select `β` from [`KATZ_BETA_GRID`] by cross-validation.
        tune: bool,
    },
    Shc {
        config: ShcConfig,
        /// Select `ξ` from [`SHC_XI_GRID`] by cross-validation.
        tune: bool,
    },
    Random,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Matboost(_) => "matboost",
            Algorithm::Hcn => "hcn",
            Algorithm::Hkatz { .. } => "hkatz",
            Algorithm::Shc { .. } => "shc",
            Algorithm::Random => "random",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Matboost(cfg) => cfg.validate(),
            Algorithm::Hkatz { config, .. } => config.validate(),
            Algorithm::Shc { config, .. } => config.validate(),
            Algorithm::Hcn | Algorithm::Random => Ok(()),
        }
    }

    /// Scores `candidates` against `train`. `neg_pool` supplies cross-validation
    /// negatives for tuned methods; `seed` drives every random choice.
    pub fn score(
        &self,
        train: &IncidenceMatrix,
        candidates: &IncidenceMatrix,
        neg_pool: &IncidenceMatrix,
        seed: u64,
    ) -> Result<ScoreVector> {
        match self {
            Algorithm::Matboost(cfg) => {
                let mut cfg = cfg.clone();
                cfg.completion.seed = seed;
                run_matboost(train, candidates, &cfg).map(|(scores, _)| scores)
            }
            Algorithm::Hcn => baselines::score_hcn(train, candidates),
            Algorithm::Hkatz { config, tune } => {
                let mut config = config.clone();
                if *tune {
                    config.beta = cross_validate(train, neg_pool, &KATZ_BETA_GRID, seed, |s, u, beta| {
                        baselines::score_hkatz(s, u, &KatzConfig { beta, ..config.clone() })
                    })?;
                    log::debug!("hkatz: selected beta = {}", config.beta);
                }
                baselines::score_hkatz(train, candidates, &config)
            }
            Algorithm::Shc { config, tune } => {
                let mut config = config.clone();
                if *tune {
                    config.xi = cross_validate(train, neg_pool, &SHC_XI_GRID, seed, |s, u, xi| {
                        baselines::score_shc(s, u, &ShcConfig { xi })
                    })?;
                    log::debug!("shc: selected xi = {}", config.xi);
                }
                baselines::score_shc(train, candidates, &config)
            }
            Algorithm::Random => Ok(baselines::score_random(candidates.num_columns(), seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub missing_counts: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
}

impl ExperimentSpec {
    pub fn validate(&self, num_hyperlinks: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.missing_counts.is_empty() {
            return Err(Error::InvalidConfig("no missing counts given".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms given".into()));
        }
        for &n in &self.missing_counts {
            if n == 0 || n >= num_hyperlinks {
                return Err(Error::InvalidConfig(format!(
                    "missing count {n} must lie in 1..{num_hyperlinks} for a dataset with {num_hyperlinks} hyperlinks"
                )));
            }
        }
        self.algorithms.iter().try_for_each(Algorithm::validate)
    }

    /// Seed of the deletion split for one cell; shared by all algorithms.
    pub fn split_seed(&self, missing_count: usize, trial: usize) -> u64 {
        mix_seed(mix_seed(self.seed, missing_count as u64), trial as u64)
    }
}

/// One (algorithm, missing count, trial) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: String,
    pub missing_count: usize,
    pub trial: usize,
    pub auc: f64,
    pub recovered: usize,
    pub runtime_s: f64,
}

/// Runs every algorithm on one paired split.
pub fn run_trial(
    spec: &ExperimentSpec,
    full: &IncidenceMatrix,
    neg_pool: &IncidenceMatrix,
    missing_count: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let split_seed = spec.split_seed(missing_count, trial);
    let split = make_split(full, neg_pool, missing_count, split_seed)?;
    spec.algorithms
        .iter()
        .enumerate()
        .map(|(a, alg)| {
            let start = Instant::now();
            let scores = alg.score(
                &split.train,
                &split.candidates,
                neg_pool,
                mix_seed(split_seed, a as u64 + 1),
            )?;
            let runtime_s = start.elapsed().as_secs_f64();
            Ok(TrialRecord {
                algorithm: alg.name().to_string(),
                missing_count,
                trial,
                auc: auc(&scores, &split.labels)?,
                recovered: recovered_number(&scores, &split.labels)?,
                runtime_s,
            })
        })
        .collect()
}

/// Mean and sample standard deviation over trials for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub missing_count: usize,
    pub trials: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub recovered_mean: f64,
    pub recovered_std: f64,
    pub runtime_mean_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Groups records by (algorithm, missing count), preserving first-seen order.
pub fn summarize(records: Vec<TrialRecord>) -> ExperimentResult {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in &records {
        let k = (r.algorithm.clone(), r.missing_count);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let summary = keys
        .into_iter()
        .map(|(algorithm, missing_count)| {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.algorithm == algorithm && r.missing_count == missing_count)
                .collect();
            let aucs: Vec<f64> = cell.iter().map(|r| r.auc).collect();
            let rec: Vec<f64> = cell.iter().map(|r| r.recovered as f64).collect();
            let rt: Vec<f64> = cell.iter().map(|r| r.runtime_s).collect();
            let (auc_mean, auc_std) = mean_std(&aucs);
            let (recovered_mean, recovered_std) = mean_std(&rec);
            SummaryRow {
                algorithm,
                missing_count,
                trials: cell.len(),
                auc_mean,
                auc_std,
                recovered_mean,
                recovered_std,
                runtime_mean_s: mean_std(&rt).0,
            }
        })
        .collect();
    ExperimentResult { records, summary }
}
