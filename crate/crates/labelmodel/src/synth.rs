//! Synthetic benchmark generation: planted label models, features correlated
//! with the latent class, and dependent labeling functions.
//!
//! The stock configuration mirrors the synthetic setup used for parameter
//! recovery experiments: constant coverage 0.1, accuracies drawn uniformly
//! around 0.75, and 1000 normal features whose mean correlation with the
//! class is 0.5.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{
    normalize_features, DependencyEdge, DependencyKind, FeatureMatrix, LabelMatrix,
};
use crate::error::{Error, Result};
use crate::independent::IndependentParams;
use crate::numeric::derive_seed;

/// Knobs for the synthetic generator. Everything is seeded; a fixed config
/// reproduces the same dataset bit for bit.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub m_independent: usize,
    pub n: usize,
    /// Coverage shared by every independent labeling function.
    pub beta_const: f64,
    /// Accuracies are drawn uniformly from `mu_alpha +- alpha_halfwidth`.
    pub mu_alpha: f64,
    pub alpha_halfwidth: f64,
    pub d_features: usize,
    /// Target mean Pearson correlation between each feature and the class.
    pub feature_strength: f64,
    pub n_fixing: usize,
    pub n_reinforcing: usize,
    /// When a dependent function fires, it emits the true label with this
    /// probability.
    pub dep_accuracy: f64,
    /// Probability that a dependent function fires on an eligible row.
    pub dep_activation_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            m_independent: 20,
            n: 1000,
            beta_const: 0.1,
            mu_alpha: 0.75,
            alpha_halfwidth: 0.25,
            d_features: 1000,
            feature_strength: 0.5,
            n_fixing: 0,
            n_reinforcing: 0,
            dep_accuracy: 0.9,
            dep_activation_rate: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let lo = self.mu_alpha - self.alpha_halfwidth;
        let hi = self.mu_alpha + self.alpha_halfwidth;
        if !(self.alpha_halfwidth >= 0.0 && lo >= 0.5 && hi <= 1.0) {
            return Err(Error::Invalid(format!(
                "accuracy range [{lo}, {hi}] must lie within [0.5, 1]"
            )));
        }
        if !(self.beta_const > 0.0 && self.beta_const <= 1.0) {
            return Err(Error::Invalid(format!(
                "beta_const {} outside (0, 1]",
                self.beta_const
            )));
        }
        if !(0.0..1.0).contains(&self.feature_strength) {
            return Err(Error::Invalid(format!(
                "feature_strength {} outside [0, 1)",
                self.feature_strength
            )));
        }
        if !(0.0..=1.0).contains(&self.dep_accuracy)
            || !(0.0..=1.0).contains(&self.dep_activation_rate)
        {
            return Err(Error::Invalid(
                "dependent-LF accuracy and activation rate must lie in [0, 1]".into(),
            ));
        }
        if self.m_independent == 0 {
            return Err(Error::Invalid("m_independent must be positive".into()));
        }
        Ok(())
    }
}

// Accuracies are nudged strictly below 1 (and the uniform draw already
// excludes its upper endpoint) so downstream natural-form conversions stay
// finite.
const ALPHA_CEIL: f64 = 1.0 - 1e-9;

/// Draws the planted per-function parameters: constant coverage, accuracies
/// i.i.d. uniform on the configured interval.
pub fn gen_lf_params(cfg: &SynthConfig) -> Result<IndependentParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0x5f);
    let lo = cfg.mu_alpha - cfg.alpha_halfwidth;
    let hi = cfg.mu_alpha + cfg.alpha_halfwidth;
    let alpha: Vec<f64> = (0..cfg.m_independent)
        .map(|_| {
            if cfg.alpha_halfwidth == 0.0 {
                cfg.mu_alpha.min(ALPHA_CEIL)
            } else {
                rng.random_range(lo..hi).clamp(0.5, ALPHA_CEIL)
            }
        })
        .collect();
    let beta = vec![cfg.beta_const; cfg.m_independent];
    IndependentParams::new(alpha, beta)
}

/// Samples a full dataset: latent classes, votes from the planted model, and
/// features `f_j = c y + N(0,1)` scaled onto the unit ball.
///
/// The per-feature strength `c` comes from inverting the correlation of a
/// symmetric two-component normal mixture, `corr = c / sqrt(c^2 + 1)`, so
/// `c = r / sqrt(1 - r^2)` hits the target `r` for every feature. The later
/// row normalization divides by a nearly constant row norm, which perturbs
/// the realized correlations only slightly.
pub fn gen_dataset(
    cfg: &SynthConfig,
    params: &IndependentParams,
) -> Result<(LabelMatrix, FeatureMatrix, Vec<i8>)> {
    cfg.validate()?;
    let (labels, truth) = params.sample(cfg.n, cfg.seed);
    let r = cfg.feature_strength;
    let c = r / (1.0 - r * r).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut data = Vec::with_capacity(cfg.n * cfg.d_features);
    for &y in &truth {
        for _ in 0..cfg.d_features {
            let noise: f64 = rng.sample(StandardNormal);
            data.push(c * y as f64 + noise);
        }
    }
    let features = normalize_features(&FeatureMatrix::from_flat(cfg.n, cfg.d_features, data))?;
    Ok((labels, features, truth))
}

/// Appends one dependent labeling function as a new column.
///
/// The new function only ever labels where the base function did. For a
/// fixing dependency the eligible rows are those where the base was wrong;
/// for a reinforcing dependency, those where it was right. On an eligible
/// row it fires with probability `activation_rate` and then emits the true
/// label with probability `accuracy` (the false one otherwise). Returns the
/// widened matrix together with the matching dependency edge.
pub fn add_dependent_lf(
    labels: &LabelMatrix,
    truth: &[i8],
    kind: DependencyKind,
    base_lf: usize,
    accuracy: f64,
    activation_rate: f64,
    seed: u64,
) -> Result<(LabelMatrix, DependencyEdge)> {
    if truth.len() != labels.n() {
        return Err(Error::Dimension(format!(
            "truth has length {}, labels have n={}",
            truth.len(),
            labels.n()
        )));
    }
    if base_lf >= labels.m() {
        return Err(Error::Invalid(format!(
            "base_lf {base_lf} out of range (m={})",
            labels.m()
        )));
    }
    if !matches!(kind, DependencyKind::Fixing | DependencyKind::Reinforcing) {
        return Err(Error::Invalid(
            "dependent functions are generated only for fixing/reinforcing kinds".into(),
        ));
    }
    if !(0.0..=1.0).contains(&accuracy) || !(0.0..=1.0).contains(&activation_rate) {
        return Err(Error::Invalid(
            "accuracy and activation_rate must lie in [0, 1]".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut column = vec![0i8; labels.n()];
    for r in 0..labels.n() {
        let base = labels
            .row(r)
            .find(|&(c, _)| c == base_lf)
            .map(|(_, v)| v)
            .unwrap_or(0);
        if base == 0 {
            continue;
        }
        let eligible = match kind {
            DependencyKind::Fixing => base == -truth[r],
            DependencyKind::Reinforcing => base == truth[r],
            _ => unreachable!(),
        };
        if !eligible || rng.random::<f64>() >= activation_rate {
            continue;
        }
        column[r] = if rng.random::<f64>() < accuracy {
            truth[r]
        } else {
            -truth[r]
        };
    }
    let widened = labels.with_column(&column)?;
    let edge = DependencyEdge::new(kind, base_lf, labels.m())?;
    Ok((widened, edge))
}

/// Adds `n_fixing` fixing and `n_reinforcing` reinforcing functions, cycling
/// through the independent functions as bases.
pub fn augment_with_dependent_lfs(
    cfg: &SynthConfig,
    labels: &LabelMatrix,
    truth: &[i8],
) -> Result<(LabelMatrix, Vec<DependencyEdge>)> {
    let mut current = labels.clone();
    let mut edges = Vec::new();
    let kinds = std::iter::repeat(DependencyKind::Fixing)
        .take(cfg.n_fixing)
        .chain(std::iter::repeat(DependencyKind::Reinforcing).take(cfg.n_reinforcing));
    for (k, kind) in kinds.enumerate() {
        let base = k % cfg.m_independent;
        let (widened, edge) = add_dependent_lf(
            &current,
            truth,
            kind,
            base,
            cfg.dep_accuracy,
            cfg.dep_activation_rate,
            derive_seed(cfg.seed, 0xd3b0 + k as u64),
        )?;
        current = widened;
        edges.push(edge);
    }
    Ok((current, edges))
}
