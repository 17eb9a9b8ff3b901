//! Redundancy and information-localization analysis for labeled embedding
//! vectors.
//!
//! The crate measures how much of a classification signal survives when an
//! embedding is compressed (PCA compression curves, variance-ratio
//! diagnostics) and how concentrated that signal is in individual
//! coordinates (single-neuron probes, greedy forward selection). All
//! accuracies are measured with a linear softmax probe.
//!
//! Every randomized operation takes an explicit [`Seed`]; results are pure
//! functions of their inputs.

pub mod analysis;
pub mod classifier;
pub mod dataset;
mod error;
pub mod io;
mod parallel;
pub mod pca;
pub mod report;
pub mod rng;
pub mod selection;
pub mod synth;

pub use classifier::{SoftmaxClassifier, TrainConfig};
pub use dataset::{DatasetSplit, EmbeddingDataset, Violation};
pub use error::{Error, Result};
pub use pca::{PcaModel, VarianceRatioReport};
pub use report::{AnalysisReport, Payload};
pub use rng::Seed;
pub use selection::{NeuronHistogram, SelectionResult};
pub use synth::{SynthConfig, Synthetic};
