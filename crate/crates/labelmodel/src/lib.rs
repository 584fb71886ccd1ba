//! Weak-supervision label modeling.
//!
//! Users encode supervision heuristics as labeling functions that vote
//! `-1`/`+1` or abstain on unlabeled examples. This crate learns a generative
//! model of those votes — per-function accuracies and coverages, optionally
//! with user-declared dependencies as a factor graph — and uses its posterior
//! over the latent class to produce denoised probabilistic training labels,
//! which a noise-aware logistic regression then consumes.

pub mod baselines;
pub mod data;
mod error;
pub mod factor;
pub mod independent;
pub mod io;
pub mod noise_aware;
pub mod synth;

mod numeric;

pub mod cli;
pub mod experiment;

pub use data::{
    compute_lf_stats, normalize_features, DependencyEdge, DependencyKind, FeatureMatrix, Label,
    LabelMatrix, LfStats,
};
pub use error::{Error, Result};
pub use factor::{FactorKind, FactorSpec, GibbsConfig, GibbsSampler, Theta};
pub use independent::{FeasibleBox, IndependentParams, NaturalParams, TrainConfig};
pub use noise_aware::{LinearModel, SoftLabels};
pub use experiment::{ExperimentConfig, ExperimentRow};
pub use synth::SynthConfig;
