//! End-to-end synthetic comparisons.
//!
//! For each run: plant a label model, sample train/test splits, produce soft
//! labels with each method (denoised posteriors, majority vote, if-then-return
//! orderings), train the noise-aware discriminative model on each label
//! source, and score it on held-out truth. When dependent labeling functions
//! are planted, the dependency-aware factor-graph fit joins the lineup
//! alongside the independent fit.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{
    itr_label, itr_soft_label, majority_vote, order_by_accuracy, random_itr_order,
};
use crate::data::{FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use crate::factor::{fit_sgd_gibbs, FactorSpec, GibbsConfig, ThetaBounds};
use crate::independent::{fit_sgd, FeasibleBox, TrainConfig};
use crate::noise_aware::{self, SoftLabels};
use crate::numeric::derive_seed;
use crate::synth::{augment_with_dependent_lfs, gen_dataset, gen_lf_params, SynthConfig};

/// Full experiment description; loadable from a TOML file.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    /// Held-out examples per run (the train split size is `synth.n`).
    pub n_test: usize,
    /// Number of independent runs, each with a derived seed.
    pub seeds: usize,
    pub rho: f64,
    /// Classification threshold for accuracy / F1.
    pub threshold: f64,
    /// Feasible box for the independent label-model fit.
    pub bounds: FeasibleBox,
    /// Weight box half-width for the factor-graph fit; agreement weights are
    /// bounded below by zero so the class posterior cannot come out inverted.
    pub theta_bound: f64,
    pub label_fit: TrainConfig,
    pub factor_fit: TrainConfig,
    pub gibbs: GibbsConfig,
    pub disc_fit: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            n_test: 1000,
            seeds: 20,
            rho: 1e-4,
            threshold: 0.5,
            bounds: FeasibleBox {
                alpha_min: 0.505,
                alpha_max: 0.995,
                beta_min: 0.01,
                beta_max: 0.995,
            },
            theta_bound: 6.0,
            label_fit: TrainConfig {
                step_size: 0.5,
                epochs: 300,
                ..TrainConfig::default()
            },
            factor_fit: TrainConfig {
                step_size: 0.1,
                epochs: 300,
                batch_size: 100,
                ..TrainConfig::default()
            },
            gibbs: GibbsConfig {
                burn_in: 200,
                thin: 2,
                chains: 1,
                seed: 0,
            },
            disc_fit: TrainConfig {
                step_size: 1.0,
                epochs: 200,
                ..TrainConfig::default()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.bounds.validate()?;
        self.label_fit.validate()?;
        self.factor_fit.validate()?;
        self.gibbs.validate()?;
        self.disc_fit.validate()?;
        if self.seeds == 0 {
            return Err(Error::Invalid("seeds must be positive".into()));
        }
        if self.n_test == 0 {
            return Err(Error::Invalid("n_test must be positive".into()));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::Invalid(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold)) {
            return Err(Error::Invalid(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if !(self.theta_bound.is_finite() && self.theta_bound > 0.0) {
            return Err(Error::Invalid(format!(
                "theta_bound must be positive, got {}",
                self.theta_bound
            )));
        }
        Ok(())
    }

    /// The methods this config will run, in output order.
    pub fn methods(&self) -> Vec<&'static str> {
        let mut methods = vec!["dp"];
        if self.synth.n_fixing + self.synth.n_reinforcing > 0 {
            methods.push("dp-aware");
        }
        methods.extend(["mv", "itr-random", "itr-oracle"]);
        methods
    }
}

/// One method's held-out scores for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub method: &'static str,
    pub run: usize,
    /// Discriminative test accuracy at the configured threshold.
    pub accuracy: f64,
    pub f1: f64,
    /// Discriminative test log-loss.
    pub log_loss: f64,
    /// Log-loss of the method's own soft labels on the test votes.
    pub label_log_loss: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.seeds * cfg.methods().len());
    for run in 0..cfg.seeds {
        rows.extend(run_once(cfg, run)?);
    }
    Ok(rows)
}

fn run_once(cfg: &ExperimentConfig, run: usize) -> Result<Vec<ExperimentRow>> {
    let seed = derive_seed(cfg.synth.seed, run as u64);
    let n_train = cfg.synth.n;
    let synth = SynthConfig {
        n: n_train + cfg.n_test,
        seed,
        ..cfg.synth.clone()
    };
    let planted = gen_lf_params(&synth)?;
    let (labels, features, truth) = gen_dataset(&synth, &planted)?;
    let (labels, edges) = augment_with_dependent_lfs(&synth, &labels, &truth)?;
    let m = labels.m();

    let (train_labels, test_labels) = split_matrix(&labels, n_train)?;
    let (train_features, test_features) = split_features(&features, n_train);
    let test_truth = &truth[n_train..];

    let mut out = Vec::new();
    for (k, method) in cfg.methods().into_iter().enumerate() {
        let (p_train, p_test) = match method {
            "dp" => {
                let fit_cfg = TrainConfig {
                    seed: derive_seed(seed, 101),
                    ..cfg.label_fit.clone()
                };
                let fit = fit_sgd(&train_labels, &cfg.bounds, &fit_cfg)?;
                let nat = fit.params.to_natural()?;
                (
                    posteriors_independent(&nat, &train_labels)?,
                    posteriors_independent(&nat, &test_labels)?,
                )
            }
            "dp-aware" => {
                let spec = FactorSpec::build(m, &edges, false)?;
                let bounds = ThetaBounds::nonnegative_agreement(&spec, cfg.theta_bound)?;
                let fit_cfg = TrainConfig {
                    seed: derive_seed(seed, 102),
                    ..cfg.factor_fit.clone()
                };
                let gibbs = GibbsConfig {
                    seed: derive_seed(seed, 103),
                    ..cfg.gibbs
                };
                let fit = fit_sgd_gibbs(&train_labels, &spec, &bounds, &fit_cfg, &gibbs)?;
                (
                    posteriors_factor(&spec, &fit.theta, &train_labels)?,
                    posteriors_factor(&spec, &fit.theta, &test_labels)?,
                )
            }
            "mv" => (
                (0..n_train)
                    .map(|r| majority_vote(&train_labels.row_dense(r)))
                    .collect(),
                (0..cfg.n_test)
                    .map(|r| majority_vote(&test_labels.row_dense(r)))
                    .collect(),
            ),
            "itr-random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 300));
                let order = random_itr_order(m, &mut rng);
                (
                    itr_soft(&order, &train_labels)?,
                    itr_soft(&order, &test_labels)?,
                )
            }
            "itr-oracle" => {
                // The planted accuracies are known; dependent functions carry
                // the configured emission accuracy.
                let mut alpha = planted.alpha().to_vec();
                alpha.extend(std::iter::repeat(synth.dep_accuracy).take(edges.len()));
                let order = order_by_accuracy(&alpha);
                (
                    itr_soft(&order, &train_labels)?,
                    itr_soft(&order, &test_labels)?,
                )
            }
            other => return Err(Error::Invalid(format!("unknown method '{other}'"))),
        };

        let disc_cfg = TrainConfig {
            seed: derive_seed(seed, 200 + k as u64),
            ..cfg.disc_fit.clone()
        };
        let soft = SoftLabels::new(p_train)?;
        let model = noise_aware::fit(&train_features, &soft, cfg.rho, &disc_cfg)?;
        let p_hat: Vec<f64> = (0..cfg.n_test)
            .map(|r| model.predict(test_features.row(r)))
            .collect::<Result<_>>()?;
        let (accuracy, f1, log_loss) = binary_metrics(&p_hat, test_truth, cfg.threshold);
        let (_, _, label_log_loss) = binary_metrics(&p_test, test_truth, cfg.threshold);
        out.push(ExperimentRow {
            method,
            run,
            accuracy,
            f1,
            log_loss,
            label_log_loss,
        });
    }
    Ok(out)
}

fn posteriors_independent(
    nat: &crate::independent::NaturalParams,
    labels: &LabelMatrix,
) -> Result<Vec<f64>> {
    (0..labels.n())
        .map(|r| nat.posterior(&labels.row_dense(r)))
        .collect()
}

fn posteriors_factor(
    spec: &FactorSpec,
    theta: &crate::factor::Theta,
    labels: &LabelMatrix,
) -> Result<Vec<f64>> {
    (0..labels.n())
        .map(|r| spec.posterior_y(theta, &labels.row_dense(r)))
        .collect()
}

fn itr_soft(order: &[usize], labels: &LabelMatrix) -> Result<Vec<f64>> {
    (0..labels.n())
        .map(|r| itr_label(order, &labels.row_dense(r)).map(itr_soft_label))
        .collect()
}

fn split_matrix(labels: &LabelMatrix, n_head: usize) -> Result<(LabelMatrix, LabelMatrix)> {
    let mut head = Vec::new();
    let mut tail = Vec::new();
    for (r, c, v) in labels.entries() {
        if r < n_head {
            head.push((r, c, v));
        } else {
            tail.push((r - n_head, c, v));
        }
    }
    Ok((
        LabelMatrix::from_entries(n_head, labels.m(), &head)?,
        LabelMatrix::from_entries(labels.n() - n_head, labels.m(), &tail)?,
    ))
}

fn split_features(features: &FeatureMatrix, n_head: usize) -> (FeatureMatrix, FeatureMatrix) {
    let head: Vec<Vec<f64>> = (0..n_head).map(|r| features.row(r).to_vec()).collect();
    let tail: Vec<Vec<f64>> = (n_head..features.n())
        .map(|r| features.row(r).to_vec())
        .collect();
    (
        FeatureMatrix::from_rows(features.d(), &head).expect("rows share d"),
        FeatureMatrix::from_rows(features.d(), &tail).expect("rows share d"),
    )
}

const LOG_LOSS_CLAMP: f64 = 1e-12;

/// Accuracy and positive-class F1 at the threshold, plus clamped log-loss.
pub fn binary_metrics(p_hat: &[f64], truth: &[i8], threshold: f64) -> (f64, f64, f64) {
    assert_eq!(p_hat.len(), truth.len());
    let n = truth.len();
    let (mut correct, mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    let mut log_loss = 0.0;
    for (&p, &y) in p_hat.iter().zip(truth) {
        let pred = if p >= threshold { 1i8 } else { -1 };
        if pred == y {
            correct += 1;
        }
        match (pred, y) {
            (1, 1) => tp += 1,
            (1, -1) => fp += 1,
            (-1, 1) => fn_ += 1,
            _ => {}
        }
        let q = p.clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP);
        log_loss -= if y == 1 { q.ln() } else { (1.0 - q).ln() };
    }
    let accuracy = correct as f64 / n as f64;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (accuracy, f1, log_loss / n as f64)
}

/// Writes the rows as a plot-ready CSV (one header line, then one data row
/// per method and run).
pub fn write_rows(rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let mut out = String::from("method,run,accuracy,f1,log_loss,label_log_loss\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.run, r.accuracy, r.f1, r.log_loss, r.label_log_loss
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Mean of one metric over the runs of one method.
pub fn mean_metric(
    rows: &[ExperimentRow],
    method: &str,
    metric: impl Fn(&ExperimentRow) -> f64,
) -> f64 {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(metric)
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}
