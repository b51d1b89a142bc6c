//! File formats and the runners behind the command-line subcommands.
//!
//! A vertex file holds one vertex name per line. A hyperlink file holds one
//! hyperlink per line as tab-separated vertex names. Empty lines and lines
//! starting with `#` are skipped in both.
//!
//! Every file written here starts with `#` lines recording the subcommand,
//! the seed and the full configuration as JSON.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    generate_negative_pool, generate_synthetic, mix_seed, run_trial, summarize, Algorithm,
    ExperimentResult, ExperimentSpec, TrialRecord,
};
use crate::hypermatrix::{mask_off, project, IncidenceMatrix};
use crate::matching::{rank_candidates, solve_ilsq_exhaustive, solve_lasso, MatchConfig};

pub const TRIALS_FILE: &str = "trials.tsv";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const VERTICES_FILE: &str = "vertices.txt";
pub const HYPERLINKS_FILE: &str = "hyperlinks.tsv";
pub const NEGATIVES_FILE: &str = "negatives.tsv";

/// Vertex names and their column-independent indices.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexIndex {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl VertexIndex {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate vertex name {name:?}")));
            }
        }
        Ok(Self { names, index })
    }

    /// Names `v0 … v{n-1}`.
    pub fn numbered(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("v{i}")).collect()).expect("numbered names are distinct")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

/// Non-comment lines with 1-based line numbers. Only truly empty lines are
/// skipped, so a line of bare tabs still reaches the parser.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_error(path: &str, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message,
    }
}

pub fn parse_vertices_str(text: &str, path: &str) -> Result<VertexIndex> {
    let mut names: Vec<String> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, raw) in content_lines(text) {
        let name = raw.trim();
        if name.is_empty() {
            return Err(parse_error(path, line, "blank vertex name".into()));
        }
        if let Some(first) = seen.insert(name.to_string(), line) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate vertex {name:?} (first on line {first})"),
            ));
        }
        names.push(name.to_string());
    }
    VertexIndex::new(names)
}

pub fn parse_vertices(path: &Path) -> Result<VertexIndex> {
    parse_vertices_str(&read_file(path)?, &path.display().to_string())
}

pub fn parse_incidence_str(text: &str, vertices: &VertexIndex, path: &str) -> Result<IncidenceMatrix> {
    let mut columns = Vec::new();
    for (line, raw) in content_lines(text) {
        let mut col: Vec<usize> = Vec::new();
        for name in raw.split('\t').map(str::trim).filter(|n| !n.is_empty()) {
            let v = vertices
                .get(name)
                .ok_or_else(|| parse_error(path, line, format!("unknown vertex {name:?}")))?;
            if col.contains(&v) {
                log::warn!("{path}:{line}: duplicate vertex {name:?} ignored");
            } else {
                col.push(v);
            }
        }
        if col.is_empty() {
            return Err(parse_error(path, line, "empty hyperlink".into()));
        }
        columns.push(col);
    }
    IncidenceMatrix::new(vertices.len(), columns)
}

pub fn parse_incidence(path: &Path, vertices: &VertexIndex) -> Result<IncidenceMatrix> {
    parse_incidence_str(&read_file(path)?, vertices, &path.display().to_string())
}

/// One line per column, vertex names in index order.
pub fn serialize_incidence(s: &IncidenceMatrix, vertices: &VertexIndex) -> String {
    let mut out = String::new();
    for col in s.columns() {
        let names: Vec<&str> = col.iter().map(|&v| vertices.name(v)).collect();
        out.push_str(&names.join("\t"));
        out.push('\n');
    }
    out
}

pub fn serialize_vertices(vertices: &VertexIndex) -> String {
    vertices.names().iter().map(|n| format!("{n}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFiles {
    pub vertices: PathBuf,
    pub hyperlinks: PathBuf,
    pub negatives: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vertices: VertexIndex,
    pub hyperlinks: IncidenceMatrix,
    pub negatives: Option<IncidenceMatrix>,
}

impl DatasetFiles {
    pub fn load(&self) -> Result<Dataset> {
        let vertices = parse_vertices(&self.vertices)?;
        let hyperlinks = parse_incidence(&self.hyperlinks, &vertices)?;
        let negatives = match &self.negatives {
            Some(p) => Some(parse_incidence(p, &vertices)?),
            None => None,
        };
        Ok(Dataset {
            vertices,
            hyperlinks,
            negatives,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetFiles,
    pub spec: ExperimentSpec,
    /// Size of the generated negative pool when the dataset has none.
    pub generated_negatives: usize,
    /// Preferential-attachment exponent for generated negatives.
    pub overlap_bias: f64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub vertices: PathBuf,
    pub network: PathBuf,
    pub pool: PathBuf,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub num_vertices: usize,
    pub num_hyperlinks: usize,
    pub cardinality: (usize, usize),
    pub overlap_bias: f64,
    pub negatives: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub num_vertices: usize,
    pub num_candidates: usize,
    pub instances: usize,
    pub matching: MatchConfig,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// Parameters of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Experiment(ExperimentConfig),
    Score(ScoreConfig),
    Generate(GenerateConfig),
    Oracle(OracleConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Experiment(_) => "experiment",
            RunConfig::Score(_) => "score",
            RunConfig::Generate(_) => "generate",
            RunConfig::Oracle(_) => "oracle",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Experiment(c) => c.spec.seed,
            RunConfig::Score(c) => c.seed,
            RunConfig::Generate(c) => c.seed,
            RunConfig::Oracle(c) => c.seed,
        }
    }

    /// Checks everything that does not need the input files.
    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Experiment(c) => {
                if c.dataset.negatives.is_none() && c.generated_negatives == 0 {
                    return Err(Error::InvalidConfig(
                        "no negatives file given and generated_negatives is 0".into(),
                    ));
                }
                if !c.overlap_bias.is_finite() {
                    return Err(Error::InvalidConfig("overlap_bias must be finite".into()));
                }
                c.spec.algorithms.iter().try_for_each(Algorithm::validate)
            }
            RunConfig::Score(c) => c.algorithm.validate(),
            RunConfig::Generate(c) => {
                let (lo, hi) = c.cardinality;
                if lo < 2 || hi < lo || c.num_vertices < hi {
                    return Err(Error::InvalidConfig(format!(
                        "infeasible cardinality range ({lo}, {hi}) for {} vertices",
                        c.num_vertices
                    )));
                }
                if !c.overlap_bias.is_finite() {
                    return Err(Error::InvalidConfig("overlap_bias must be finite".into()));
                }
                Ok(())
            }
            RunConfig::Oracle(c) => {
                if c.num_vertices < 3 {
                    return Err(Error::InvalidConfig("oracle needs at least 3 vertices".into()));
                }
                if c.num_candidates == 0 || c.num_candidates > 16 {
                    return Err(Error::InvalidConfig("oracle candidates must lie in 1..=16".into()));
                }
                if c.instances == 0 {
                    return Err(Error::InvalidConfig("instances must be at least 1".into()));
                }
                c.matching.validate()
            }
        }
    }

    /// Comment lines that open every output file.
    pub fn header(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        format!("# matboost {}\n# seed: {}\n# config: {json}\n", self.name(), self.seed())
    }
}

fn trials_table(header: &str, records: &[TrialRecord]) -> String {
    let mut out = String::from(header);
    out.push_str("algorithm\tmissing_count\ttrial\tauc\trecovered\truntime_s\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.6}",
            r.algorithm, r.missing_count, r.trial, r.auc, r.recovered, r.runtime_s
        );
    }
    out
}

fn summary_table(header: &str, result: &ExperimentResult) -> String {
    let mut out = String::from(header);
    out.push_str(
        "algorithm\tmissing_count\ttrials\tauc_mean\tauc_std\trecovered_mean\trecovered_std\truntime_mean_s\n",
    );
    for r in &result.summary {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            r.algorithm,
            r.missing_count,
            r.trials,
            r.auc_mean,
            r.auc_std,
            r.recovered_mean,
            r.recovered_std,
            r.runtime_mean_s
        );
    }
    out
}

/// Aligned plain-text summary for the terminal.
pub fn format_summary(result: &ExperimentResult) -> String {
    let mut out = format!(
        "{:<10} {:>7} {:>6} {:>15} {:>17}\n",
        "algorithm", "missing", "trials", "auc", "recovered"
    );
    for r in &result.summary {
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>6} {:>7.3} ± {:<5.3} {:>8.2} ± {:<6.2}",
            r.algorithm, r.missing_count, r.trials, r.auc_mean, r.auc_std, r.recovered_mean, r.recovered_std
        );
    }
    out
}

fn cardinality_range(s: &IncidenceMatrix) -> (usize, usize) {
    let sizes = s.columns().iter().map(Vec::len);
    let lo = sizes.clone().min().unwrap_or(2).max(2);
    let hi = sizes.max().unwrap_or(2).max(lo).min(s.num_vertices());
    (lo, hi)
}

/// Runs every (missing count, trial) cell in parallel and writes the
/// per-trial and summary tables from this thread. If a cell fails, the
/// records of the cells before it are still written.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    let RunConfig::Experiment(c) = cfg else {
        return Err(Error::InvalidConfig("expected an experiment configuration".into()));
    };
    cfg.validate()?;
    let data = c.dataset.load()?;
    c.spec.validate(data.hyperlinks.num_columns())?;
    let neg_pool = match data.negatives {
        Some(pool) => pool,
        None => generate_negative_pool(
            &data.hyperlinks,
            c.generated_negatives,
            cardinality_range(&data.hyperlinks),
            c.overlap_bias,
            c.spec.seed,
        )?,
    };
    if neg_pool.is_empty() {
        return Err(Error::EmptyPool);
    }

    fs::create_dir_all(&c.output_dir).map_err(|source| Error::File {
        path: c.output_dir.display().to_string(),
        source,
    })?;
    let cells: Vec<(usize, usize)> = c
        .spec
        .missing_counts
        .iter()
        .flat_map(|&n| (0..c.spec.trials).map(move |t| (n, t)))
        .collect();
    let outcomes: Vec<Result<Vec<TrialRecord>>> = cells
        .par_iter()
        .map(|&(n, t)| run_trial(&c.spec, &data.hyperlinks, &neg_pool, n, t))
        .collect();

    let header = cfg.header();
    let mut records = Vec::new();
    let mut failure = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.extend(r),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    write_file(&c.output_dir.join(TRIALS_FILE), &trials_table(&header, &records))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let result = summarize(records);
    write_file(&c.output_dir.join(SUMMARY_FILE), &summary_table(&header, &result))?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    /// Position of the hyperlink in the pool file, from 0.
    pub candidate: usize,
    pub score: f64,
}

/// Ranks a pool against a fixed network and writes `rank, candidate, score`
/// followed by the candidate's vertex names. Tuned baselines cross-validate
/// against the pool itself.
pub fn score_candidates(cfg: &RunConfig) -> Result<Vec<RankedCandidate>> {
    let RunConfig::Score(c) = cfg else {
        return Err(Error::InvalidConfig("expected a score configuration".into()));
    };
    cfg.validate()?;
    let vertices = parse_vertices(&c.vertices)?;
    let network = parse_incidence(&c.network, &vertices)?;
    let pool = parse_incidence(&c.pool, &vertices)?;
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let scores = c.algorithm.score(&network, &pool, &pool, c.seed)?;
    let ranked: Vec<RankedCandidate> = rank_candidates(&scores)
        .into_iter()
        .map(|i| RankedCandidate {
            candidate: i,
            score: scores[i],
        })
        .collect();

    let mut out = cfg.header();
    out.push_str("rank\tcandidate\tscore\tvertices\n");
    for (rank, r) in ranked.iter().enumerate() {
        let names: Vec<&str> = pool.column(r.candidate).iter().map(|&v| vertices.name(v)).collect();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", rank + 1, r.candidate, r.score, names.join("\t"));
    }
    if let Some(dir) = c.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    write_file(&c.output, &out)?;
    Ok(ranked)
}

/// Writes a synthetic vertex file, hyperlink file and (if requested) negative
/// pool, returning their paths.
pub fn generate(cfg: &RunConfig) -> Result<DatasetFiles> {
    let RunConfig::Generate(c) = cfg else {
        return Err(Error::InvalidConfig("expected a generate configuration".into()));
    };
    cfg.validate()?;
    let truth = generate_synthetic(c.num_vertices, c.num_hyperlinks, c.cardinality, c.overlap_bias, c.seed)?;
    let negatives = if c.negatives > 0 {
        Some(generate_negative_pool(&truth, c.negatives, c.cardinality, c.overlap_bias, c.seed)?)
    } else {
        None
    };
    let vertices = VertexIndex::numbered(c.num_vertices);
    fs::create_dir_all(&c.output_dir).map_err(|source| Error::File {
        path: c.output_dir.display().to_string(),
        source,
    })?;
    let header = cfg.header();
    let files = DatasetFiles {
        vertices: c.output_dir.join(VERTICES_FILE),
        hyperlinks: c.output_dir.join(HYPERLINKS_FILE),
        negatives: negatives.as_ref().map(|_| c.output_dir.join(NEGATIVES_FILE)),
    };
    write_file(&files.vertices, &(header.clone() + &serialize_vertices(&vertices)))?;
    write_file(&files.hyperlinks, &(header.clone() + &serialize_incidence(&truth, &vertices)))?;
    if let (Some(path), Some(neg)) = (&files.negatives, &negatives) {
        write_file(path, &(header + &serialize_incidence(neg, &vertices)))?;
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    /// Random draws discarded because the binary minimiser was not unique.
    pub rejected: usize,
    pub oracle_matches_planted: usize,
    pub lasso_matches_oracle: usize,
}

/// A small matching instance whose target is the footprint of a planted
/// candidate subset on the empty entries of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub train: IncidenceMatrix,
    pub pool: IncidenceMatrix,
    pub planted: Vec<bool>,
}

fn random_column(rng: &mut ChaCha8Rng, m: usize, max_size: usize) -> Vec<usize> {
    let size = rng.gen_range(2..=max_size.min(m));
    sample(rng, m, size).into_vec()
}

pub fn planted_instance(num_vertices: usize, num_candidates: usize, rng: &mut ChaCha8Rng) -> PlantedInstance {
    let m = num_vertices;
    let train_cols = (m / 3).max(1);
    let train: Vec<Vec<usize>> = (0..train_cols).map(|_| random_column(rng, m, 3)).collect();
    let pool: Vec<Vec<usize>> = (0..num_candidates).map(|_| random_column(rng, m, 4)).collect();
    let mut planted: Vec<bool> = (0..num_candidates).map(|_| rng.gen_bool(0.5)).collect();
    if !planted.iter().any(|&p| p) {
        planted[rng.gen_range(0..num_candidates)] = true;
    }
    PlantedInstance {
        train: IncidenceMatrix::new(m, train).expect("columns drawn in range"),
        pool: IncidenceMatrix::new(m, pool).expect("columns drawn in range"),
        planted,
    }
}

/// Compares the exhaustive binary solver and the rounded lasso on random
/// planted instances with a unique binary minimiser.
pub fn oracle(cfg: &RunConfig) -> Result<OracleReport> {
    let RunConfig::Oracle(c) = cfg else {
        return Err(Error::InvalidConfig("expected an oracle configuration".into()));
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(c.seed, 0x6f72_6163_6c65));
    let mut report = OracleReport {
        instances: 0,
        rejected: 0,
        oracle_matches_planted: 0,
        lasso_matches_oracle: 0,
    };
    let max_draws = 1000 * c.instances;
    while report.instances < c.instances {
        if report.instances + report.rejected >= max_draws {
            return Err(Error::Degenerate(format!(
                "only {} of {} instances had a unique minimiser after {max_draws} draws",
                report.instances, c.instances
            )));
        }
        let inst = planted_instance(c.num_vertices, c.num_candidates, &mut rng);
        let a = project(&inst.train);
        let chosen: Vec<usize> = (0..inst.planted.len()).filter(|&i| inst.planted[i]).collect();
        let target = mask_off(&project(&inst.pool.select(&chosen)), &a)?;
        let exact = solve_ilsq_exhaustive(&inst.pool, &target, &a)?;
        if exact.minimizers != 1 {
            report.rejected += 1;
            continue;
        }
        report.instances += 1;
        let oracle_support: Vec<bool> = exact.lambda.iter().map(|&l| l == 1.0).collect();
        if oracle_support == inst.planted {
            report.oracle_matches_planted += 1;
        }
        let lasso = solve_lasso(&inst.pool, &target, &a, &c.matching)?;
        if lasso.iter().map(|&l| l >= 0.5).eq(oracle_support.iter().copied()) {
            report.lasso_matches_oracle += 1;
        }
    }
    if let Some(path) = &c.output {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(path, &format!("{}{json}\n", cfg.header()))?;
    }
    Ok(report)
}
