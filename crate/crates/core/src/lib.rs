//! Classical mockup sampling for Gaussian boson sampling (GBS) with threshold
//! detectors.
//!
//! The crate is organised around the pipeline used to benchmark a GBS
//! experiment against its ideal (lossy but otherwise noiseless) model:
//!
//! * [`gaussian_state`] builds the output covariance matrix from the
//!   interferometer matrix and the squeezing parameters, and restricts it to
//!   subsets of modes.
//! * [`probability`] evaluates exact click-pattern probabilities through the
//!   Torontonian and whole marginal tables over small mode subsets.
//! * [`samplers`] contains the marginal-based mockup samplers: uniform,
//!   thermal, a mean-field (TAP) Boltzmann machine sampled with Gibbs sweeps
//!   and the greedy order-k heuristic, plus an exact maximum-entropy trainer
//!   for small systems.
//! * [`statistics`] scores sample sets against the ideal distribution: Ursell
//!   functions, total variation distance, KL divergence, cross-entropy, HOG
//!   rate and click-number moments.
//! * [`io`] reads and writes instances, sample files and metric reports.
//!
//! Mode indices are zero-based everywhere in the API and in the file formats.

pub mod error;
pub mod gaussian_state;
pub mod io;
mod linalg;
pub mod probability;
pub mod samplers;
pub mod seed;
pub mod statistics;
pub mod subsets;

pub use error::{Error, Result};
pub use gaussian_state::{GaussianState, GbsInstance, RandomInstance};
pub use probability::{ClickPattern, ExactDistribution, MarginalOracle, MarginalTable, StateOracle};
pub use samplers::{IsingModel, SampleSet};

