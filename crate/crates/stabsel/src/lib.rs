//! Extended stability selection: apply a base variable-selection method to
//! disjoint random subsamples of the observations and disjoint random subsets
//! of the covariates, rank covariates by how often they are selected, and
//! threshold. Ships with two base methods (coordinate-descent lasso with an
//! exact-count penalty search, and greedy conditional-mutual-information
//! maximization), closed-form false-positive/false-negative bounds for the
//! thresholded ensemble, an extreme-value score-model simulator motivating
//! covariate subsetting, synthetic design generators, and the experiment
//! drivers tying them together.
//!
//! Everything is deterministic given a seed: partition randomness is consumed
//! before any parallel dispatch and all aggregation is order-free, so runs
//! are bit-identical across thread counts (and with the `parallel` feature
//! disabled entirely).

pub mod basemethods;
pub mod bounds;
pub mod dataset;
pub mod engine;
pub mod harness;
pub mod partition;
pub mod scoremodel;
pub mod seeding;
pub mod synth;

mod par;

pub use basemethods::{BaseSelector, Cell, Selector, SelectorError};
pub use dataset::{Dataset, DatasetError, GroundTruth, ResponseColumn};
pub use engine::{rank, run, run_with, EngineConfig, EngineError, FrequencyTable, SelectionResult};
pub use synth::{DesignKind, DesignSpec, NoiseKind};
