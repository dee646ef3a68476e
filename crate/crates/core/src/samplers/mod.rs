//! Mockup samplers reproducing ideal marginals up to a fixed order.
//!
//! | order | sampler |
//! |-------|---------|
//! | 0 | [`sample_uniform`] |
//! | 1 | [`sample_thermal`] |
//! | 2 | [`fit_tap`] + [`gibbs_sample`] |
//! | k | [`greedy_sample`] |
//!
//! [`train_exact_bm`] fits the maximum-entropy Boltzmann machine of a given
//! order by exhaustive enumeration; it only scales to a dozen modes and serves
//! as the reference the approximate samplers are compared with.

mod basic;
mod greedy;
mod ising;
mod maxent;
mod sample_set;

pub use basic::{decorrelate, sample_from_distribution, sample_thermal, sample_uniform};
pub use greedy::{greedy_sample, greedy_sample_iid, GreedyConfig};
pub use ising::{fit_tap, fit_tap_with, gibbs_sample, GibbsConfig, IsingModel, OnsagerTerm};
pub use maxent::{bm_exact_distribution, train_exact_bm, BoltzmannMachine, EnergyModel, TrainMethod, TrainSettings};
pub use sample_set::{Row, SampleMetadata, SampleSet};
