use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use matboost::baselines::{KatzConfig, ShcConfig};
use matboost::boost::MatBoostConfig;
use matboost::cli::{
    self, DatasetFiles, ExperimentConfig, GenerateConfig, OracleConfig, RunConfig, ScoreConfig,
};
use matboost::completion::CompletionConfig;
use matboost::eval::{Algorithm, ExperimentSpec};
use matboost::matching::MatchConfig;

/// Hyperlink prediction: score candidate hyperlinks against a hypergraph.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Delete random hyperlinks and measure how well each method recovers them.
    Experiment(ExperimentArgs),
    /// Rank a candidate pool against a fixed network.
    Score(ScoreArgs),
    /// Write a synthetic hypergraph and negative pool.
    Generate(GenerateArgs),
    /// Check the lasso relaxation against exhaustive search on small instances.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Matboost,
    Hcn,
    Hkatz,
    Shc,
    Random,
}

#[derive(Args)]
struct MethodArgs {
    /// Fixed-point iteration cap.
    #[arg(long, default_value_t = 10)]
    max_iterations: usize,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    /// L2 penalty of the completion model.
    #[arg(long, default_value_t = 0.01)]
    reg: f64,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[command(flatten)]
    matching: MatchingArgs,
    #[arg(long, default_value_t = 0.01)]
    katz_beta: f64,
    #[arg(long, default_value_t = 5)]
    katz_length: usize,
    #[arg(long, default_value_t = 0.5)]
    shc_xi: f64,
    /// Pick the HKatz and SHC hyperparameters by five-fold cross-validation.
    #[arg(long)]
    tune: bool,
}

#[derive(Args)]
struct MatchingArgs {
    #[arg(long, default_value_t = 0.1)]
    l1_penalty: f64,
    #[arg(long, default_value_t = 500)]
    max_steps: usize,
    /// Multiplier on the inverse Lipschitz bound.
    #[arg(long, default_value_t = 1.0)]
    step_size: f64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

impl MatchingArgs {
    fn config(&self) -> MatchConfig {
        MatchConfig {
            l1_penalty: self.l1_penalty,
            max_steps: self.max_steps,
            step_size: self.step_size,
            tolerance: self.tolerance,
        }
    }
}

impl MethodArgs {
    fn algorithm(&self, method: Method) -> Algorithm {
        match method {
            Method::Matboost => Algorithm::Matboost(MatBoostConfig {
                max_iterations: self.max_iterations,
                completion: CompletionConfig {
                    latent_dim: self.latent_dim,
                    reg: self.reg,
                    learning_rate: self.learning_rate,
                    epochs: self.epochs,
                    seed: 0,
                },
                matching: self.matching.config(),
            }),
            Method::Hcn => Algorithm::Hcn,
            Method::Hkatz => Algorithm::Hkatz {
                config: KatzConfig {
                    beta: self.katz_beta,
                    max_path_length: self.katz_length,
                },
                tune: self.tune,
            },
            Method::Shc => Algorithm::Shc {
                config: ShcConfig { xi: self.shc_xi },
                tune: self.tune,
            },
            Method::Random => Algorithm::Random,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// One vertex name per line.
    #[arg(long)]
    vertices: PathBuf,
    /// One tab-separated hyperlink per line.
    #[arg(long)]
    hyperlinks: PathBuf,
    /// Negative candidates; generated when omitted.
    #[arg(long)]
    negatives: Option<PathBuf>,
    /// Number of negatives to generate when no file is given.
    #[arg(long, default_value_t = 100)]
    generated_negatives: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap_bias: f64,
    /// Comma-separated numbers of hyperlinks to delete.
    #[arg(long, value_delimiter = ',', required = true)]
    missing: Vec<usize>,
    #[arg(long, default_value_t = 12)]
    trials: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "matboost,hcn,hkatz,shc,random")]
    algorithms: Vec<Method>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "results")]
    output_dir: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    vertices: PathBuf,
    /// The known hyperlinks.
    #[arg(long)]
    network: PathBuf,
    /// Candidates to rank.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, value_enum, default_value = "matboost")]
    algorithm: Method,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "ranking.tsv")]
    output: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    num_vertices: usize,
    #[arg(long)]
    num_hyperlinks: usize,
    #[arg(long, default_value_t = 2)]
    min_cardinality: usize,
    #[arg(long, default_value_t = 4)]
    max_cardinality: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap_bias: f64,
    /// Size of the negative pool to write alongside.
    #[arg(long, default_value_t = 0)]
    negatives: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 10)]
    num_vertices: usize,
    #[arg(long, default_value_t = 8)]
    num_candidates: usize,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[command(flatten)]
    matching: MatchingArgs,
    #[arg(long)]
    seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment(a) => {
            let cfg = RunConfig::Experiment(ExperimentConfig {
                dataset: DatasetFiles {
                    vertices: a.vertices,
                    hyperlinks: a.hyperlinks,
                    negatives: a.negatives,
                },
                spec: ExperimentSpec {
                    dataset: a.output_dir.display().to_string(),
                    missing_counts: a.missing,
                    trials: a.trials,
                    seed: a.seed,
                    algorithms: a.algorithms.iter().map(|&m| a.method.algorithm(m)).collect(),
                },
                generated_negatives: a.generated_negatives,
                overlap_bias: a.overlap_bias,
                output_dir: a.output_dir.clone(),
            });
            let result = cli::run_experiment(&cfg).context("experiment failed")?;
            print!("{}", cli::format_summary(&result));
            println!("results written to {}", a.output_dir.display());
        }
        Command::Score(a) => {
            let cfg = RunConfig::Score(ScoreConfig {
                vertices: a.vertices,
                network: a.network,
                pool: a.pool,
                algorithm: a.method.algorithm(a.algorithm),
                seed: a.seed,
                output: a.output.clone(),
            });
            let ranked = cli::score_candidates(&cfg).context("scoring failed")?;
            println!("{} candidates ranked, written to {}", ranked.len(), a.output.display());
        }
        Command::Generate(a) => {
            let cfg = RunConfig::Generate(GenerateConfig {
                num_vertices: a.num_vertices,
                num_hyperlinks: a.num_hyperlinks,
                cardinality: (a.min_cardinality, a.max_cardinality),
                overlap_bias: a.overlap_bias,
                negatives: a.negatives,
                seed: a.seed,
                output_dir: a.output_dir,
            });
            let files = cli::generate(&cfg).context("generation failed")?;
            println!("wrote {} and {}", files.vertices.display(), files.hyperlinks.display());
            if let Some(n) = files.negatives {
                println!("wrote {}", n.display());
            }
        }
        Command::Oracle(a) => {
            let cfg = RunConfig::Oracle(OracleConfig {
                num_vertices: a.num_vertices,
                num_candidates: a.num_candidates,
                instances: a.instances,
                matching: a.matching.config(),
                seed: a.seed,
                output: a.output,
            });
            let r = cli::oracle(&cfg).context("oracle check failed")?;
            println!(
                "{} instances ({} non-unique draws rejected): oracle recovers planted subset in {}, rounded lasso matches oracle in {}",
                r.instances, r.rejected, r.oracle_matches_planted, r.lasso_matches_oracle
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
