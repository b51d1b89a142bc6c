//! Hyperlink prediction for hypergraphs.
//!
//! Scores candidate hyperlinks (columns of a pool `U`) as likely missing
//! members of a training hypergraph `S`. The main method alternates a
//! completion step on the vertex adjacency matrix `A = S Sᵀ` with a matching
//! step that selects candidates whose adjacency footprint fits the completed
//! entries, and averages the scores of successive iterations.
//!
//! | module | contents |
//! |--------|----------|
//! | [`hypermatrix`] | incidence/adjacency matrices, projection, masking |
//! | [`completion`] | latent-factor completion of empty adjacency entries |
//! | [`matching`] | box-constrained lasso and exhaustive binary oracle |
//! | [`boost`] | the iterative driver and ensemble output |
//! | [`baselines`] | HCN, HKatz, SHC and random scorers |
//! | [`eval`] | deletion protocol, AUC, recovered number, cross-validation, synthetic data |
//! | [`cli`] | file formats and the command-line runners |

pub mod baselines;
pub mod boost;
pub mod cli;
pub mod completion;
pub mod error;
pub mod eval;
pub mod hypermatrix;
pub mod matching;

pub use error::{Error, Result};
