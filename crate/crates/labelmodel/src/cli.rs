//! Command-line interface: `stats`, `fit`, `label`, `train`, `predict`,
//! `synth`, `experiment`.
//!
//! All diagnostics go to stderr. Exit codes: 0 on success, 1 on usage, parse
//! or validation failures, 2 on numerical failures. Settings can come from a
//! TOML config file (`--config`); explicit flags win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::data::compute_lf_stats;
use crate::error::{Error, Result};
use crate::experiment::{mean_metric, run_experiment, write_rows, ExperimentConfig};
use crate::factor::{fit_sgd_gibbs, FactorSpec, GibbsConfig, ThetaBounds};
use crate::independent::{fit_sgd, FeasibleBox, TrainConfig};
use crate::io;
use crate::noise_aware::{self, SoftLabels};
use crate::synth::{augment_with_dependent_lfs, gen_dataset, gen_lf_params, SynthConfig};

#[derive(Parser)]
#[command(
    name = "labelmodel",
    version,
    about = "Weak-supervision label modeling: estimate labeling-function accuracies, denoise training labels, train noise-aware models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print coverage/overlap/conflict statistics of a label matrix.
    Stats {
        /// Label-matrix file.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Fit a label model: independent by default, factor graph when a
    /// dependency file is given.
    Fit {
        #[arg(long)]
        labels: PathBuf,
        /// Dependency-graph file (`kind,i,j` lines); switches to the
        /// dependency-aware factor model.
        #[arg(long)]
        deps: Option<PathBuf>,
        /// Output parameter file.
        #[arg(long)]
        out: PathBuf,
        /// TOML config file; the `[fit]` section supplies any flag below.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Accuracy lower bound (required for independent fits).
        #[arg(long)]
        alpha_min: Option<f64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long)]
        beta_min: Option<f64>,
        #[arg(long)]
        beta_max: Option<f64>,
        /// Weight box lower bound for factor fits (default -3).
        #[arg(long)]
        theta_min: Option<f64>,
        /// Weight box upper bound for factor fits (default 3).
        #[arg(long)]
        theta_max: Option<f64>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Mini-batch size (defaults: full batch independent, 25 factor).
        #[arg(long)]
        batch_size: Option<usize>,
        /// Derives the step size from the theory default for the target
        /// parameter error (independent fits only).
        #[arg(long)]
        target_eps: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Gibbs burn-in sweeps (factor fits).
        #[arg(long)]
        burn_in: Option<usize>,
        /// Gibbs sweeps between unconditional draws (factor fits).
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        /// Make the similar-dependency factor require both votes nonzero.
        #[arg(long)]
        similar_nonzero_only: bool,
        /// Also export natural parameters (independent fits).
        #[arg(long)]
        natural_out: Option<PathBuf>,
        /// Objective-trace file (default: `<out>.log`).
        #[arg(long)]
        fit_log: Option<PathBuf>,
    },
    /// Produce soft labels (posteriors of the positive class) for a matrix.
    Label {
        #[arg(long)]
        labels: PathBuf,
        /// Parameter file from `fit` (independent or factor).
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the noise-aware discriminative model on soft labels.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        soft_labels: PathBuf,
        /// L2 regularization strength.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit per-example probabilities from a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset from a planted label model.
    Synth {
        /// TOML config file with a `[synth]` section.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for labels.txt, features.txt, truth.txt, params.txt
        /// and (with dependent functions) deps.txt.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the synthetic method comparison and write a results table.
    Experiment {
        /// TOML config file with an `[experiment]` section.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the synthetic seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    fit: Option<FitSection>,
    train: Option<TrainSection>,
    synth: Option<SynthConfig>,
    experiment: Option<ExperimentConfig>,
}

#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitSection {
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    beta_min: Option<f64>,
    beta_max: Option<f64>,
    theta_min: Option<f64>,
    theta_max: Option<f64>,
    step_size: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    target_eps: Option<f64>,
    seed: Option<u64>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    chains: Option<usize>,
    similar_nonzero_only: Option<bool>,
}

#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    rho: Option<f64>,
    step_size: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    seed: Option<u64>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", p.display()),
                ))
            })?;
            toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))
        }
    }
}

/// Entry point used by `main`; parses the real process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parses `args` and executes; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Stats { labels } => cmd_stats(&labels),
        Command::Fit {
            labels,
            deps,
            out,
            config,
            alpha_min,
            alpha_max,
            beta_min,
            beta_max,
            theta_min,
            theta_max,
            step_size,
            epochs,
            batch_size,
            target_eps,
            seed,
            burn_in,
            thin,
            chains,
            similar_nonzero_only,
            natural_out,
            fit_log,
        } => {
            let file = load_file_config(config.as_deref())?;
            let mut section = file.fit.unwrap_or_default();
            // Flags win over the config file.
            section.alpha_min = alpha_min.or(section.alpha_min);
            section.alpha_max = alpha_max.or(section.alpha_max);
            section.beta_min = beta_min.or(section.beta_min);
            section.beta_max = beta_max.or(section.beta_max);
            section.theta_min = theta_min.or(section.theta_min);
            section.theta_max = theta_max.or(section.theta_max);
            section.step_size = step_size.or(section.step_size);
            section.epochs = epochs.or(section.epochs);
            section.batch_size = batch_size.or(section.batch_size);
            section.target_eps = target_eps.or(section.target_eps);
            section.seed = seed.or(section.seed);
            section.burn_in = burn_in.or(section.burn_in);
            section.thin = thin.or(section.thin);
            section.chains = chains.or(section.chains);
            if similar_nonzero_only {
                section.similar_nonzero_only = Some(true);
            }
            cmd_fit(
                &labels,
                deps.as_deref(),
                &out,
                section,
                natural_out.as_deref(),
                fit_log.as_deref(),
            )
        }
        Command::Label { labels, params, out } => cmd_label(&labels, &params, &out),
        Command::Train {
            features,
            soft_labels,
            rho,
            out,
            config,
            step_size,
            epochs,
            batch_size,
            seed,
        } => {
            let file = load_file_config(config.as_deref())?;
            let mut section = file.train.unwrap_or_default();
            section.rho = rho.or(section.rho);
            section.step_size = step_size.or(section.step_size);
            section.epochs = epochs.or(section.epochs);
            section.batch_size = batch_size.or(section.batch_size);
            section.seed = seed.or(section.seed);
            cmd_train(&features, &soft_labels, &out, section)
        }
        Command::Predict {
            model,
            features,
            out,
        } => cmd_predict(&model, &features, out.as_deref()),
        Command::Synth {
            config,
            seed,
            out_dir,
        } => {
            let file = load_file_config(Some(&config))?;
            let mut synth = file.synth.ok_or_else(|| {
                Error::Invalid(format!("{}: missing [synth] section", config.display()))
            })?;
            if let Some(s) = seed {
                synth.seed = s;
            }
            cmd_synth(&synth, &out_dir)
        }
        Command::Experiment { config, seed, out } => {
            let file = load_file_config(Some(&config))?;
            let mut exp = file.experiment.ok_or_else(|| {
                Error::Invalid(format!(
                    "{}: missing [experiment] section",
                    config.display()
                ))
            })?;
            if let Some(s) = seed {
                exp.synth.seed = s;
            }
            cmd_experiment(&exp, &out)
        }
    }
}

fn cmd_stats(labels: &Path) -> Result<()> {
    let matrix = io::load_label_matrix(labels)?;
    let stats = compute_lf_stats(&matrix);
    println!("n        {}", matrix.n());
    println!("m        {}", matrix.m());
    println!("coverage {:.4}", stats.coverage);
    println!("overlap  {:.4}", stats.overlap);
    println!("conflict {:.4}", stats.conflict);
    println!("per-lf coverage:");
    for (i, c) in stats.per_lf_coverage.iter().enumerate() {
        println!("  {i} {c:.4}");
    }
    println!();
    println!("n={}", matrix.n());
    println!("m={}", matrix.m());
    println!("coverage={}", stats.coverage);
    println!("overlap={}", stats.overlap);
    println!("conflict={}", stats.conflict);
    for (i, c) in stats.per_lf_coverage.iter().enumerate() {
        println!("lf_coverage_{i}={c}");
    }
    Ok(())
}

fn write_fit_log(path: &Path, trace: &[f64], note: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(n) = note {
        out.push_str(&format!("# {n}\n"));
    }
    out.push_str("epoch,log_likelihood\n");
    for (e, v) in trace.iter().enumerate() {
        out.push_str(&format!("{e},{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn cmd_fit(
    labels_path: &Path,
    deps: Option<&Path>,
    out: &Path,
    s: FitSection,
    natural_out: Option<&Path>,
    fit_log: Option<&Path>,
) -> Result<()> {
    let labels = io::load_label_matrix(labels_path)?;
    let log_path = fit_log
        .map(Path::to_path_buf)
        .unwrap_or_else(|| append_extension(out, "log"));

    match deps {
        None => {
            let bounds = match (s.alpha_min, s.alpha_max, s.beta_min, s.beta_max) {
                (Some(a0), Some(a1), Some(b0), Some(b1)) => FeasibleBox::new(a0, a1, b0, b1)?,
                _ => {
                    return Err(Error::Invalid(
                        "independent fits need explicit bounds: --alpha-min/--alpha-max/\
                         --beta-min/--beta-max (or a [fit] config section)"
                            .into(),
                    ))
                }
            };
            let cfg = TrainConfig {
                step_size: s.step_size.unwrap_or(0.5),
                epochs: s.epochs.unwrap_or(300),
                batch_size: s.batch_size.unwrap_or(usize::MAX),
                target_eps: s.target_eps,
                seed: s.seed.unwrap_or(0),
            };
            let fit = fit_sgd(&labels, &bounds, &cfg)?;
            io::store_independent_params(&fit.params, out)?;
            if let Some(nat_path) = natural_out {
                io::store_natural_params(&fit.params.to_natural()?, nat_path)?;
            }
            write_fit_log(&log_path, &fit.objective_trace, None)?;
        }
        Some(deps_path) => {
            let edges = io::load_dependencies(deps_path)?;
            let spec = FactorSpec::build(
                labels.m(),
                &edges,
                s.similar_nonzero_only.unwrap_or(false),
            )?;
            let bounds = ThetaBounds::uniform(
                s.theta_min.unwrap_or(-3.0),
                s.theta_max.unwrap_or(3.0),
                spec.len(),
            )?;
            let cfg = TrainConfig {
                step_size: s.step_size.unwrap_or(0.02),
                epochs: s.epochs.unwrap_or(30),
                batch_size: s.batch_size.unwrap_or(25),
                target_eps: None,
                seed: s.seed.unwrap_or(0),
            };
            let gibbs = GibbsConfig {
                burn_in: s.burn_in.unwrap_or(200),
                thin: s.thin.unwrap_or(2),
                chains: s.chains.unwrap_or(1),
                seed: s.seed.unwrap_or(0),
            };
            let fit = fit_sgd_gibbs(&labels, &spec, &bounds, &cfg, &gibbs)?;
            io::store_theta(&fit.theta, &spec, out)?;
            let note = if fit.objective_trace.is_empty() {
                Some("exact objective unavailable (m exceeds the enumeration guard)")
            } else {
                None
            };
            write_fit_log(&log_path, &fit.objective_trace, note)?;
        }
    }
    Ok(())
}

fn append_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_label(labels_path: &Path, params_path: &Path, out: &Path) -> Result<()> {
    let labels = io::load_label_matrix(labels_path)?;
    let head = fs::read_to_string(params_path)?
        .lines()
        .next()
        .unwrap_or_default()
        .to_string();
    let posteriors: Vec<f64> = if head.starts_with("M=") {
        let (theta, spec) = io::load_theta(params_path)?;
        if spec.m() != labels.m() {
            return Err(Error::Dimension(format!(
                "label matrix has m={}, factor model has m={}",
                labels.m(),
                spec.m()
            )));
        }
        (0..labels.n())
            .map(|r| spec.posterior_y(&theta, &labels.row_dense(r)))
            .collect::<Result<_>>()?
    } else {
        let params = io::load_independent_params(params_path)?;
        if params.m() != labels.m() {
            return Err(Error::Dimension(format!(
                "label matrix has m={}, params have m={}",
                labels.m(),
                params.m()
            )));
        }
        (0..labels.n())
            .map(|r| params.posterior(&labels.row_dense(r)))
            .collect::<Result<_>>()?
    };
    io::store_soft_labels(&posteriors, out)
}

fn cmd_train(features: &Path, soft_labels: &Path, out: &Path, s: TrainSection) -> Result<()> {
    let features = io::load_feature_matrix(features)?;
    let soft = SoftLabels::new(io::load_soft_labels(soft_labels)?)?;
    let rho = s
        .rho
        .ok_or_else(|| Error::Invalid("--rho is required (or a [train] config section)".into()))?;
    let cfg = TrainConfig {
        step_size: s.step_size.unwrap_or(1.0),
        epochs: s.epochs.unwrap_or(500),
        batch_size: s.batch_size.unwrap_or(usize::MAX),
        target_eps: None,
        seed: s.seed.unwrap_or(0),
    };
    let model = noise_aware::fit(&features, &soft, rho, &cfg)?;
    io::store_linear_model(&model, out)
}

fn cmd_predict(model: &Path, features: &Path, out: Option<&Path>) -> Result<()> {
    let model = io::load_linear_model(model)?;
    let features = io::load_feature_matrix(features)?;
    let probs: Vec<f64> = (0..features.n())
        .map(|r| model.predict(features.row(r)))
        .collect::<Result<_>>()?;
    match out {
        Some(path) => io::store_soft_labels(&probs, path),
        None => {
            for p in probs {
                println!("{p}");
            }
            Ok(())
        }
    }
}

fn cmd_synth(cfg: &SynthConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let params = gen_lf_params(cfg)?;
    let (labels, features, truth) = gen_dataset(cfg, &params)?;
    let (labels, edges) = augment_with_dependent_lfs(cfg, &labels, &truth)?;
    io::store_label_matrix(&labels, &out_dir.join("labels.txt"))?;
    io::store_feature_matrix(&features, &out_dir.join("features.txt"))?;
    io::store_truth(&truth, &out_dir.join("truth.txt"))?;
    io::store_independent_params(&params, &out_dir.join("params.txt"))?;
    if !edges.is_empty() {
        io::store_dependencies(&edges, &out_dir.join("deps.txt"))?;
    }
    Ok(())
}

fn cmd_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let rows = run_experiment(cfg)?;
    write_rows(&rows, out)?;
    for method in cfg.methods() {
        println!(
            "{method}: accuracy {:.4}  f1 {:.4}  log-loss {:.4}",
            mean_metric(&rows, method, |r| r.accuracy),
            mean_metric(&rows, method, |r| r.f1),
            mean_metric(&rows, method, |r| r.log_loss),
        );
    }
    Ok(())
}
