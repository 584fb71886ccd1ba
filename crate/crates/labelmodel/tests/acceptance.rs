//! Acceptance suite: one test per release criterion, each pinned to its
//! tolerance and runtime budget and printing a PASS line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::time::{Duration, Instant};

use labelmodel::baselines::{itr_label, itr_soft_label, majority_vote};
use labelmodel::data::{compute_lf_stats, DependencyEdge, DependencyKind, LabelMatrix};
use labelmodel::experiment::{mean_metric, run_experiment, ExperimentConfig};
use labelmodel::factor::{FactorSpec, GibbsConfig, GibbsSampler, Theta, ThetaBounds};
use labelmodel::independent::{fit_sgd, FeasibleBox, IndependentParams, TrainConfig};
use labelmodel::noise_aware::{self, noise_aware_loss, SoftLabels};
use labelmodel::synth::SynthConfig;
use labelmodel::FeatureMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn finish(criterion: u32, what: &str, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    assert!(
        elapsed < budget,
        "criterion {criterion} exceeded its {budget:?} budget: {elapsed:?}"
    );
    println!("criterion {criterion} ({what}): PASS in {elapsed:.2?}");
}

fn random_params(m: usize, rng: &mut impl Rng) -> IndependentParams {
    let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(0.55..0.95)).collect();
    let beta: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..0.9)).collect();
    IndependentParams::new(alpha, beta).unwrap()
}

fn random_lam(m: usize, rng: &mut impl Rng) -> Vec<i8> {
    (0..m).map(|_| rng.random_range(-1i8..=1)).collect()
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// Criterion 1: independent-model and factor-graph posteriors match
// brute-force enumeration Bayes posteriors to 1e-10, 1000 random instances
// each, within 10 seconds.
#[test]
fn criterion_1_posterior_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    for _ in 0..1000 {
        let m = rng.random_range(1..=10);
        let params = random_params(m, &mut rng);
        let lam = random_lam(m, &mut rng);
        let jp = params.joint_prob(&lam, 1).unwrap();
        let jm = params.joint_prob(&lam, -1).unwrap();
        let oracle = jp / (jp + jm);
        let got = params.posterior(&lam).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-10,
            "independent posterior {got} vs oracle {oracle} (m={m})"
        );
    }

    for _ in 0..100 {
        let m = rng.random_range(2..=6);
        let edges = vec![
            DependencyEdge::new(DependencyKind::Fixing, 0, 1).unwrap(),
            DependencyEdge::new(DependencyKind::Similar, 1, 0).unwrap(),
        ];
        let spec = FactorSpec::build(m, &edges, false).unwrap();
        let theta = Theta::new(
            (0..spec.len())
                .map(|_| rng.random_range(-1.2..1.2))
                .collect(),
        )
        .unwrap();
        let table = spec.exact_posterior_table(&theta).unwrap();
        for _ in 0..10 {
            let lam = random_lam(m, &mut rng);
            let got = spec.posterior_y(&theta, &lam).unwrap();
            let oracle = table.posterior_y(&lam);
            assert!(
                (got - oracle).abs() <= 1e-10,
                "factor posterior {got} vs enumeration {oracle} (m={m})"
            );
        }
    }

    finish(1, "posterior oracle equivalence", start, Duration::from_secs(10));
}

// Criterion 2: (a) the closed-form independent gradient matches central
// finite differences to 1e-6 relative for m <= 6; (b) the contrastive update
// direction averaged over 1e5 Gibbs/conditional sample pairs matches the
// exact conditional-minus-unconditional gradient within 1e-2 in the inf-norm
// at m = 4. Within 60 seconds.
#[test]
fn criterion_2_gradient_oracles() {
    let start = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..200 {
        let m = rng.random_range(1..=6);
        let nat = random_params(m, &mut rng).to_natural().unwrap();
        let lam = random_lam(m, &mut rng);
        let (g_psi, g_phi) = nat.marginal_grad(&lam).unwrap();
        let h = 1e-5;
        for i in 0..m {
            for which in 0..2 {
                let perturb = |delta: f64| {
                    let mut psi = nat.psi().to_vec();
                    let mut phi = nat.phi().to_vec();
                    if which == 0 {
                        psi[i] += delta;
                    } else {
                        phi[i] += delta;
                    }
                    labelmodel::NaturalParams::new(psi, phi)
                        .unwrap()
                        .log_marginal(&lam)
                        .unwrap()
                };
                let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
                let closed = if which == 0 { g_psi[i] } else { g_phi[i] };
                assert!(
                    (closed - fd).abs() / closed.abs().max(1.0) <= 1e-6,
                    "coordinate {i} kind {which}: closed {closed} vs fd {fd}"
                );
            }
        }
    }

    let edges = vec![
        DependencyEdge::new(DependencyKind::Fixing, 0, 1).unwrap(),
        DependencyEdge::new(DependencyKind::Similar, 2, 3).unwrap(),
    ];
    let spec = FactorSpec::build(4, &edges, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let theta = Theta::new(
        (0..spec.len())
            .map(|_| rng.random_range(-0.7..0.7))
            .collect(),
    )
    .unwrap();
    let lam = [1i8, -1, 0, 1];

    let expected_uncond = spec.expected_factors(&theta).unwrap();
    let p = spec.posterior_y(&theta, &lam).unwrap();
    let h_pos = spec.eval(&lam, 1).unwrap();
    let h_neg = spec.eval(&lam, -1).unwrap();
    let exact: Vec<f64> = (0..spec.len())
        .map(|f| p * h_pos[f] as f64 + (1.0 - p) * h_neg[f] as f64 - expected_uncond[f])
        .collect();

    let pairs = 100_000usize;
    let gibbs = GibbsConfig {
        burn_in: 500,
        thin: 5,
        chains: 2,
        seed: 204,
    };
    let mut sampler = GibbsSampler::new(&theta, &spec, &gibbs).unwrap();
    let mut cond_rng = ChaCha8Rng::seed_from_u64(205);
    let mut mean = vec![0.0; spec.len()];
    for _ in 0..pairs {
        let (ul, uy) = sampler.next_state();
        let ul = ul.to_vec();
        let h_unc = spec.eval(&ul, uy).unwrap();
        let y_bar = spec.conditional_sample_y(&theta, &lam, &mut cond_rng).unwrap();
        let h_cond = spec.eval(&lam, y_bar).unwrap();
        for f in 0..spec.len() {
            mean[f] += (h_cond[f] - h_unc[f]) as f64;
        }
    }
    let inf_norm = (0..spec.len())
        .map(|f| (mean[f] / pairs as f64 - exact[f]).abs())
        .fold(0.0, f64::max);
    assert!(
        inf_norm <= 1e-2,
        "averaged contrastive update off by {inf_norm} (inf-norm)"
    );

    finish(2, "gradient oracles", start, Duration::from_secs(60));
}

// Criterion 3: the forward sampler and the Gibbs sampler reproduce the
// sufficient-statistic moments E[lam_i y] = beta_i gamma_i, E[lam_i^2] =
// beta_i and zero cross-covariances within 4 standard errors at 1e5 samples,
// m = 6, within 30 seconds.
#[test]
fn criterion_3_sampler_moments() {
    let start = Instant::now();
    let alpha = [0.85, 0.6, 0.75, 0.9, 0.65, 0.7];
    let beta = [0.4, 0.3, 0.5, 0.35, 0.45, 0.3];
    let params = IndependentParams::new(alpha.to_vec(), beta.to_vec()).unwrap();
    let gamma: Vec<f64> = alpha.iter().map(|a| 2.0 * a - 1.0).collect();
    let m = 6;
    let n = 100_000usize;

    // Moment targets and standard errors shared by both samplers.
    let check = |name: &str, draws: &[(Vec<i8>, i8)]| {
        let nf = draws.len() as f64;
        for i in 0..m {
            let mean_agree: f64 = draws
                .iter()
                .map(|(lam, y)| (lam[i] * y) as f64)
                .sum::<f64>()
                / nf;
            let target = beta[i] * gamma[i];
            let se = ((beta[i] - target * target) / nf).sqrt();
            assert!(
                (mean_agree - target).abs() <= 4.0 * se,
                "{name}: E[lam_{i} y] = {mean_agree} vs {target} (se {se})"
            );

            let mean_fire: f64 = draws
                .iter()
                .map(|(lam, _)| (lam[i] * lam[i]) as f64)
                .sum::<f64>()
                / nf;
            let se = (beta[i] * (1.0 - beta[i]) / nf).sqrt();
            assert!(
                (mean_fire - beta[i]).abs() <= 4.0 * se,
                "{name}: E[lam_{i}^2] = {mean_fire} vs {} (se {se})",
                beta[i]
            );
        }
        for i in 0..m {
            for j in (i + 1)..m {
                // E[(lam_i y)(lam_j y)] = (b_i g_i)(b_j g_j) -- zero covariance.
                let mean: f64 = draws
                    .iter()
                    .map(|(lam, _)| (lam[i] * lam[j]) as f64)
                    .sum::<f64>()
                    / nf;
                let target = beta[i] * gamma[i] * beta[j] * gamma[j];
                let se = ((beta[i] * beta[j] - target * target) / nf).sqrt();
                assert!(
                    (mean - target).abs() <= 4.0 * se,
                    "{name}: E[lam_{i} lam_{j} y^2] = {mean} vs {target}"
                );

                // E[lam_i^2 lam_j^2] = b_i b_j -- zero covariance.
                let mean: f64 = draws
                    .iter()
                    .map(|(lam, _)| (lam[i] * lam[i] * lam[j] * lam[j]) as f64)
                    .sum::<f64>()
                    / nf;
                let target = beta[i] * beta[j];
                let se = ((target - target * target) / nf).sqrt();
                assert!(
                    (mean - target).abs() <= 4.0 * se,
                    "{name}: E[lam_{i}^2 lam_{j}^2] = {mean} vs {target}"
                );

                // E[(lam_i y) lam_j^2] = (b_i g_i) b_j -- zero covariance.
                let mean: f64 = draws
                    .iter()
                    .map(|(lam, y)| (lam[i] * y * lam[j] * lam[j]) as f64)
                    .sum::<f64>()
                    / nf;
                let target = beta[i] * gamma[i] * beta[j];
                let se = ((beta[i] * beta[j] - target * target) / nf).sqrt();
                assert!(
                    (mean - target).abs() <= 4.0 * se,
                    "{name}: E[lam_{i} y lam_{j}^2] = {mean} vs {target}"
                );
            }
        }
    };

    let (labels, truth) = params.sample(n, 301);
    let forward: Vec<(Vec<i8>, i8)> = (0..n).map(|r| (labels.row_dense(r), truth[r])).collect();
    check("forward sampler", &forward);

    let spec = FactorSpec::build(m, &[], false).unwrap();
    let theta = spec
        .independent_embedding(&params.to_natural().unwrap())
        .unwrap();
    let gibbs = GibbsConfig {
        burn_in: 500,
        thin: 8,
        chains: 4,
        seed: 302,
    };
    let sampler = GibbsSampler::new(&theta, &spec, &gibbs).unwrap();
    let chain: Vec<(Vec<i8>, i8)> = sampler.take(n).collect();
    check("gibbs sampler", &chain);

    finish(3, "sampler moments", start, Duration::from_secs(30));
}

// Criterion 4: planted-parameter recovery at desk scale. m = 20, n = 1e4,
// alpha ~ U(0.55, 0.95), beta ~ U(0.3, 0.5), wide box: median RMSE over 10
// seeds at most 0.05 for both parameter vectors, and the median error is
// non-increasing across n in {1e3, 4e3, 1.6e4}. Within 5 minutes.
#[test]
fn criterion_4_planted_recovery() {
    let start = Instant::now();
    let m = 20;
    let bounds = FeasibleBox::new(0.51, 0.99, 0.05, 0.95).unwrap();
    let fit_at = |n: usize| -> (f64, f64, f64) {
        let mut errs_a = Vec::new();
        let mut errs_b = Vec::new();
        let mut errs_all = Vec::new();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
            let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(0.55..0.95)).collect();
            let beta: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..0.5)).collect();
            let truth = IndependentParams::new(alpha, beta).unwrap();
            let (labels, _) = truth.sample(n, 440 + seed);
            let cfg = TrainConfig {
                step_size: 0.5,
                epochs: 300,
                seed,
                ..TrainConfig::default()
            };
            let fit = fit_sgd(&labels, &bounds, &cfg).unwrap();
            let ra = rmse(fit.params.alpha(), truth.alpha());
            let rb = rmse(fit.params.beta(), truth.beta());
            errs_a.push(ra);
            errs_b.push(rb);
            errs_all.push((0.5 * (ra * ra + rb * rb)).sqrt());
        }
        (median(&mut errs_a), median(&mut errs_b), median(&mut errs_all))
    };

    let (ra, rb, _) = fit_at(10_000);
    assert!(ra <= 0.05, "median RMSE(alpha) = {ra} at n=1e4");
    assert!(rb <= 0.05, "median RMSE(beta) = {rb} at n=1e4");

    let errors: Vec<f64> = [1000usize, 4000, 16_000]
        .iter()
        .map(|&n| fit_at(n).2)
        .collect();
    assert!(
        errors[0] >= errors[1] && errors[1] >= errors[2],
        "median error not non-increasing across n: {errors:?}"
    );

    finish(4, "planted-parameter recovery", start, Duration::from_secs(300));
}

// Criterion 5: with hard soft-labels the fitted noise-aware model's training
// loss is within 1e-3 of an independently implemented supervised logistic
// fit at the same rho, and every fitted model obeys ||w|| <= 1/(2 rho) + 1e-6.
#[test]
fn criterion_5_noise_aware_supervised_limit() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let n = 200;
    let d = 6;
    let w_true: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(-0.4..0.4)).collect();
        let z: f64 = row.iter().zip(&w_true).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-4.0 * z).exp());
        labels.push(if rng.random::<f64>() < p { 1i8 } else { -1 });
        rows.push(row);
    }
    let features = FeatureMatrix::from_rows(d, &rows).unwrap();
    let hard = SoftLabels::from_hard(&labels).unwrap();

    for &rho in &[0.01, 0.1, 1.0] {
        // Safe step for a 1/4-smooth data term plus the 2*rho ridge.
        let eta = 0.9 / (0.25 + 2.0 * rho);
        let cfg = TrainConfig {
            step_size: eta,
            epochs: 3000,
            ..TrainConfig::default()
        };
        let model = noise_aware::fit(&features, &hard, rho, &cfg).unwrap();
        let ours = noise_aware_loss(&model, &features, &hard).unwrap();

        // Supervised reference: plain gradient descent on the signed-label
        // logistic loss, written independently of the library path.
        let mut w = vec![0.0f64; d];
        for _ in 0..3000 {
            let mut g = vec![0.0f64; d];
            for (row, &y) in rows.iter().zip(&labels) {
                let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                let margin = z * y as f64;
                let sig = if margin >= 0.0 {
                    (-margin).exp() / (1.0 + (-margin).exp())
                } else {
                    1.0 / (1.0 + margin.exp())
                };
                for (gk, &x) in g.iter_mut().zip(row) {
                    *gk -= y as f64 * sig * x;
                }
            }
            for k in 0..d {
                w[k] -= eta * (g[k] / n as f64 + 2.0 * rho * w[k]);
            }
        }
        let mut supervised = 0.0;
        for (row, &y) in rows.iter().zip(&labels) {
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let margin = -z * y as f64;
            supervised += margin.max(0.0) + (-margin.abs()).exp().ln_1p();
        }
        supervised = supervised / n as f64 + rho * w.iter().map(|v| v * v).sum::<f64>();

        assert!(
            (ours - supervised).abs() <= 1e-3,
            "rho={rho}: noise-aware loss {ours} vs supervised {supervised}"
        );
        let norm: f64 = model.weights().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            norm <= 0.5 / rho + 1e-6,
            "rho={rho}: ||w|| = {norm} exceeds 1/(2 rho)"
        );
    }

    finish(5, "noise-aware supervised limit", start, Duration::from_secs(60));
}

// Criterion 6: end-to-end synthetic ordering. On the stock synthetic config
// (m=20, beta=0.1, mu_alpha=0.75, 1000 features) the denoised pipeline's mean
// test accuracy over 20 seeds is at least majority vote's and random-order
// ITR's; with planted fixing/reinforcing functions the dependency-aware fit's
// mean test log-loss is at most the independent fit's. Within 10 minutes.
// (Exact reference curves are not reproducible; ordering-level only.)
#[test]
fn criterion_6_end_to_end_ordering() {
    let start = Instant::now();

    let c2 = ExperimentConfig {
        synth: SynthConfig {
            m_independent: 20,
            n: 1000,
            beta_const: 0.1,
            mu_alpha: 0.75,
            alpha_halfwidth: 0.25,
            d_features: 1000,
            feature_strength: 0.5,
            seed: 601,
            ..SynthConfig::default()
        },
        n_test: 1000,
        seeds: 20,
        ..ExperimentConfig::default()
    };
    let rows = run_experiment(&c2).unwrap();
    let acc = |method: &str| mean_metric(&rows, method, |r| r.accuracy);
    println!(
        "  c2 accuracies: dp {:.4}, mv {:.4}, itr-random {:.4}, itr-oracle {:.4}",
        acc("dp"),
        acc("mv"),
        acc("itr-random"),
        acc("itr-oracle")
    );
    println!(
        "  c2 label log-losses: dp {:.4}, mv {:.4}, itr-random {:.4}",
        mean_metric(&rows, "dp", |r| r.label_log_loss),
        mean_metric(&rows, "mv", |r| r.label_log_loss),
        mean_metric(&rows, "itr-random", |r| r.label_log_loss),
    );
    assert!(
        acc("dp") >= acc("mv"),
        "dp accuracy {} below majority vote {}",
        acc("dp"),
        acc("mv")
    );
    assert!(
        acc("dp") >= acc("itr-random"),
        "dp accuracy {} below random-order ITR {}",
        acc("dp"),
        acc("itr-random")
    );

    let deps = ExperimentConfig {
        synth: SynthConfig {
            m_independent: 50,
            n: 1000,
            beta_const: 0.1,
            mu_alpha: 0.75,
            alpha_halfwidth: 0.25,
            d_features: 1000,
            feature_strength: 0.5,
            n_fixing: 5,
            n_reinforcing: 5,
            dep_accuracy: 0.95,
            dep_activation_rate: 0.9,
            seed: 602,
            ..SynthConfig::default()
        },
        n_test: 1000,
        seeds: 20,
        ..ExperimentConfig::default()
    };
    let rows = run_experiment(&deps).unwrap();
    let ll_aware = mean_metric(&rows, "dp-aware", |r| r.log_loss);
    let ll_ind = mean_metric(&rows, "dp", |r| r.log_loss);
    println!("  planted-deps test log-loss: aware {ll_aware:.4} vs independent {ll_ind:.4}");
    assert!(
        ll_aware <= ll_ind,
        "dependency-aware log-loss {ll_aware} above independent {ll_ind}"
    );

    finish(6, "end-to-end synthetic ordering", start, Duration::from_secs(600));
}

// Criterion 7: the real-corpus relation-extraction results are explicitly
// not reproducible here (the corpora, labeling functions and NLP pipelines
// are unavailable); the statistics definitions are instead validated against
// hand-counted micro-fixtures.
#[test]
fn criterion_7_stats_micro_fixtures() {
    let start = Instant::now();

    // Fixture 1 (hand count): 3 rows, 2 functions.
    // row0: (+1, .) -> covered; row1: (+1, -1) -> covered, overlapped,
    // conflicted; row2: empty.
    let lm = LabelMatrix::from_entries(3, 2, &[(0, 0, 1), (1, 0, 1), (1, 1, -1)]).unwrap();
    let s = compute_lf_stats(&lm);
    assert_eq!(s.coverage, 2.0 / 3.0);
    assert_eq!(s.overlap, 1.0 / 3.0);
    assert_eq!(s.conflict, 1.0 / 3.0);
    assert_eq!(s.per_lf_coverage, vec![2.0 / 3.0, 1.0 / 3.0]);

    // Fixture 2 (hand count): 5 rows, 3 functions.
    //   row0: (+1, +1, .)  covered, overlap, no conflict
    //   row1: (-1, ., +1)  covered, overlap, conflict
    //   row2: (., ., -1)   covered
    //   row3: empty
    //   row4: (+1, -1, -1) covered, overlap, conflict
    let lm = LabelMatrix::from_entries(
        5,
        3,
        &[
            (0, 0, 1),
            (0, 1, 1),
            (1, 0, -1),
            (1, 2, 1),
            (2, 2, -1),
            (4, 0, 1),
            (4, 1, -1),
            (4, 2, -1),
        ],
    )
    .unwrap();
    let s = compute_lf_stats(&lm);
    assert_eq!(s.coverage, 4.0 / 5.0);
    assert_eq!(s.overlap, 3.0 / 5.0);
    assert_eq!(s.conflict, 2.0 / 5.0);
    assert_eq!(s.per_lf_coverage, vec![3.0 / 5.0, 2.0 / 5.0, 3.0 / 5.0]);

    // Overlap counts agreeing pairs too: two agreeing votes per row.
    let lm = LabelMatrix::from_entries(2, 2, &[(0, 0, 1), (0, 1, 1), (1, 0, -1), (1, 1, -1)])
        .unwrap();
    let s = compute_lf_stats(&lm);
    assert_eq!((s.coverage, s.overlap, s.conflict), (1.0, 1.0, 0.0));

    // Baseline sanity on the same fixtures.
    assert_eq!(majority_vote(&[1, -1, -1]), 0.0);
    assert_eq!(itr_soft_label(itr_label(&[2, 0, 1], &[1, -1, 0]).unwrap()), 1.0);

    println!(
        "  note: published relation-extraction scores are out of desk-scale reach \
         (corpora and labeling functions unavailable); definitions validated on fixtures"
    );
    finish(7, "statistics micro-fixtures", start, Duration::from_secs(10));
}

// Criterion 8: every seeded CLI command produces byte-identical outputs
// across two consecutive runs.
#[test]
fn criterion_8_cli_determinism() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_labelmodel");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();

    let run_ok = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "command {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let read = |p: &std::path::Path| std::fs::read(p).unwrap();

    std::fs::write(
        path("synth.toml"),
        "[synth]\nm_independent = 8\nn = 300\nbeta_const = 0.3\nd_features = 6\n\
         n_fixing = 2\ndep_activation_rate = 0.9\nseed = 7\n",
    )
    .unwrap();

    // synth (seeded via config).
    run_ok(&["synth", "--config", &s(&path("synth.toml")), "--out-dir", &s(&path("a"))]);
    run_ok(&["synth", "--config", &s(&path("synth.toml")), "--out-dir", &s(&path("b"))]);
    for f in ["labels.txt", "features.txt", "truth.txt", "params.txt", "deps.txt"] {
        assert_eq!(
            read(&path("a").join(f)),
            read(&path("b").join(f)),
            "synth output {f} differs between runs"
        );
    }

    // stats (pure function of its input).
    let s1 = run_ok(&["stats", "--labels", &s(&path("a/labels.txt"))]);
    let s2 = run_ok(&["stats", "--labels", &s(&path("a/labels.txt"))]);
    assert_eq!(s1, s2);

    // independent fit, seeded.
    let fit_args = |out: &str| {
        [
            "fit",
            "--labels",
            Box::leak(s(&path("a/labels.txt")).into_boxed_str()),
            "--out",
            Box::leak(s(&path(out)).into_boxed_str()),
            "--alpha-min",
            "0.51",
            "--alpha-max",
            "0.99",
            "--beta-min",
            "0.05",
            "--beta-max",
            "0.95",
            "--epochs",
            "60",
            "--seed",
            "7",
        ]
        .to_vec()
    };
    run_ok(&fit_args("p1.txt"));
    run_ok(&fit_args("p2.txt"));
    assert_eq!(read(&path("p1.txt")), read(&path("p2.txt")));
    assert_eq!(read(&path("p1.txt.log")), read(&path("p2.txt.log")));

    // factor fit, seeded.
    let fit_deps = |out: &str| {
        [
            "fit",
            "--labels",
            Box::leak(s(&path("a/labels.txt")).into_boxed_str()),
            "--deps",
            Box::leak(s(&path("a/deps.txt")).into_boxed_str()),
            "--out",
            Box::leak(s(&path(out)).into_boxed_str()),
            "--epochs",
            "10",
            "--seed",
            "11",
        ]
        .to_vec()
    };
    run_ok(&fit_deps("t1.txt"));
    run_ok(&fit_deps("t2.txt"));
    assert_eq!(read(&path("t1.txt")), read(&path("t2.txt")));

    // label (deterministic given inputs).
    run_ok(&[
        "label",
        "--labels",
        &s(&path("a/labels.txt")),
        "--params",
        &s(&path("p1.txt")),
        "--out",
        &s(&path("soft1.txt")),
    ]);
    run_ok(&[
        "label",
        "--labels",
        &s(&path("a/labels.txt")),
        "--params",
        &s(&path("p1.txt")),
        "--out",
        &s(&path("soft2.txt")),
    ]);
    assert_eq!(read(&path("soft1.txt")), read(&path("soft2.txt")));

    // train, seeded.
    let train_args = |out: &str| {
        [
            "train",
            "--features",
            Box::leak(s(&path("a/features.txt")).into_boxed_str()),
            "--soft-labels",
            Box::leak(s(&path("soft1.txt")).into_boxed_str()),
            "--rho",
            "0.01",
            "--epochs",
            "80",
            "--seed",
            "3",
            "--out",
            Box::leak(s(&path(out)).into_boxed_str()),
        ]
        .to_vec()
    };
    run_ok(&train_args("m1.txt"));
    run_ok(&train_args("m2.txt"));
    assert_eq!(read(&path("m1.txt")), read(&path("m2.txt")));

    // predict.
    run_ok(&[
        "predict",
        "--model",
        &s(&path("m1.txt")),
        "--features",
        &s(&path("a/features.txt")),
        "--out",
        &s(&path("pred1.txt")),
    ]);
    run_ok(&[
        "predict",
        "--model",
        &s(&path("m1.txt")),
        "--features",
        &s(&path("a/features.txt")),
        "--out",
        &s(&path("pred2.txt")),
    ]);
    assert_eq!(read(&path("pred1.txt")), read(&path("pred2.txt")));

    // experiment, seeded via config.
    std::fs::write(
        path("exp.toml"),
        "[experiment]\nn_test = 40\nseeds = 2\n\
         [experiment.synth]\nm_independent = 5\nn = 60\nbeta_const = 0.4\nd_features = 6\nseed = 5\n\
         [experiment.label_fit]\nepochs = 30\n\
         [experiment.disc_fit]\nepochs = 30\n",
    )
    .unwrap();
    run_ok(&["experiment", "--config", &s(&path("exp.toml")), "--out", &s(&path("r1.csv"))]);
    run_ok(&["experiment", "--config", &s(&path("exp.toml")), "--out", &s(&path("r2.csv"))]);
    assert_eq!(read(&path("r1.csv")), read(&path("r2.csv")));

    finish(8, "CLI determinism", start, Duration::from_secs(120));
}
