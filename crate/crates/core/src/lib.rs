//! Continuous occupancy mapping with Fast Bayesian Hilbert Maps.
//!
//! * [`features`]: inducing-point basis and RBF projection
//! * [`model`]: mean-field variational training, prediction, model files
//! * [`fusion`]: conflation-based merging of independently trained maps
//! * [`gridmap`]: log-odds occupancy grid baseline
//! * [`eval`]: AUC, precision/recall, size accounting
//! * [`ingest`]: sample formats, beam sampling, synthetic environments
//! * [`simulate`]: multi-agent fusion experiments
//! * [`cli`]: the `fbhm` command-line front end

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod gridmap;
pub mod ingest;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
pub use features::{make_grid_basis, FeatureBasis, Point2};
pub use fusion::{conflate, fuse_maps, get_increment, Contribution, FilterPolicy, GaussianParam};
pub use model::{em_update, lambda_fn, predict, LabeledSample, TrainConfig, WeightPosterior};
