//! Noise-aware discriminative training.
//!
//! Instead of hard labels, the logistic loss is taken in expectation over the
//! label model's posterior: with `p_x = P(Y = +1 | lam(x))` and
//! `z = w . f(x)`, each example contributes
//! `p_x log(1 + e^{-z}) + (1 - p_x) log(1 + e^{z})`, plus `rho ||w||^2`.
//! The expectation over the latent class reduces to this two-branch form
//! exactly, so no sampling is involved.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::independent::TrainConfig;
use crate::numeric::{sigmoid, softplus};

/// Per-example posterior probabilities of the positive class, used as the
/// denoised training signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabels {
    p: Vec<f64>,
}

impl SoftLabels {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!(
                    "soft label {v} at position {i} outside [0, 1]"
                )));
            }
        }
        Ok(SoftLabels { p })
    }

    /// Hard `{-1,+1}` labels mapped to probabilities 0 / 1.
    pub fn from_hard(labels: &[i8]) -> Result<Self> {
        labels
            .iter()
            .map(|&y| match y {
                1 => Ok(1.0),
                -1 => Ok(0.0),
                v => Err(Error::Invalid(format!("hard label must be +-1, got {v}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(|p| SoftLabels { p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }
}

/// Linear model over features with L2 regularization strength `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    rho: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, rho: f64) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Invalid(format!("non-finite weight {w}")));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::Invalid(format!("rho must be >= 0, got {rho}")));
        }
        Ok(LinearModel { weights, rho })
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `sigma(w . f(x))`.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "feature row has length {}, model has d={}",
                features.len(),
                self.weights.len()
            )));
        }
        Ok(sigmoid(dot(&self.weights, features)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(model: &LinearModel, features: &FeatureMatrix, soft: &SoftLabels) -> Result<()> {
    if features.d() != model.d() {
        return Err(Error::Dimension(format!(
            "features have d={}, model has d={}",
            features.d(),
            model.d()
        )));
    }
    if features.n() != soft.len() {
        return Err(Error::Dimension(format!(
            "features have n={}, soft labels have n={}",
            features.n(),
            soft.len()
        )));
    }
    Ok(())
}

/// Mean noise-aware loss plus the regularizer.
pub fn noise_aware_loss(
    model: &LinearModel,
    features: &FeatureMatrix,
    soft: &SoftLabels,
) -> Result<f64> {
    check_dims(model, features, soft)?;
    let n = features.n();
    if n == 0 {
        return Err(Error::Invalid("loss undefined on empty data".into()));
    }
    let mut total = 0.0;
    for (row, &p) in features.rows().zip(soft.values()) {
        let z = dot(model.weights(), row);
        total += p * softplus(-z) + (1.0 - p) * softplus(z);
    }
    let norm_sq: f64 = model.weights().iter().map(|w| w * w).sum();
    let loss = total / n as f64 + model.rho() * norm_sq;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {loss}")));
    }
    Ok(loss)
}

/// Gradient of the noise-aware loss: `mean (sigma(z) - p) f(x) + 2 rho w`.
pub fn loss_gradient(
    model: &LinearModel,
    features: &FeatureMatrix,
    soft: &SoftLabels,
) -> Result<Vec<f64>> {
    check_dims(model, features, soft)?;
    let n = features.n();
    if n == 0 {
        return Err(Error::Invalid("gradient undefined on empty data".into()));
    }
    let mut grad = vec![0.0; model.d()];
    for (row, &p) in features.rows().zip(soft.values()) {
        let z = dot(model.weights(), row);
        let r = sigmoid(z) - p;
        for (g, &x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
    }
    let inv = 1.0 / n as f64;
    for (g, &w) in grad.iter_mut().zip(model.weights()) {
        *g = *g * inv + 2.0 * model.rho() * w;
    }
    Ok(grad)
}

/// Minimizes the noise-aware loss by (mini-batch) gradient descent from
/// `w = 0`. With `rho > 0` every iterate is kept inside the ball
/// `||w|| <= 1/(2 rho)`, which contains the minimizer. Deterministic for a
/// fixed seed; the same data, config and seed give the same model.
pub fn fit(
    features: &FeatureMatrix,
    soft: &SoftLabels,
    rho: f64,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    fit_traced(features, soft, rho, cfg).map(|(model, _)| model)
}

/// Like [`fit`], also returning the full-data loss after each epoch.
pub fn fit_traced(
    features: &FeatureMatrix,
    soft: &SoftLabels,
    rho: f64,
    cfg: &TrainConfig,
) -> Result<(LinearModel, Vec<f64>)> {
    cfg.validate()?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Invalid(format!("rho must be >= 0, got {rho}")));
    }
    let n = features.n();
    if n == 0 {
        return Err(Error::Invalid("cannot fit on empty data".into()));
    }
    if soft.len() != n {
        return Err(Error::Dimension(format!(
            "features have n={n}, soft labels have n={}",
            soft.len()
        )));
    }

    let d = features.d();
    let mut w = vec![0.0; d];
    let batch = cfg.batch_size.min(n);
    let eta = cfg.step_size;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_norm = if rho > 0.0 { 0.5 / rho } else { f64::INFINITY };
    let mut grad = vec![0.0; d];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        if batch < n {
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        }
        for chunk in order.chunks(batch) {
            grad.fill(0.0);
            for &x in chunk {
                let row = features.row(x);
                let z = dot(&w, row);
                let r = sigmoid(z) - soft.values()[x];
                for (g, &v) in grad.iter_mut().zip(row) {
                    *g += r * v;
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            let mut norm_sq = 0.0;
            for (wi, g) in w.iter_mut().zip(&grad) {
                *wi -= eta * (g * inv + 2.0 * rho * *wi);
                norm_sq += *wi * *wi;
            }
            if !norm_sq.is_finite() {
                return Err(Error::Numerical(
                    "weights diverged to non-finite values; lower the step size".into(),
                ));
            }
            let norm = norm_sq.sqrt();
            if norm > max_norm {
                let scale = max_norm / norm;
                for wi in &mut w {
                    *wi *= scale;
                }
            }
        }
        let model = LinearModel {
            weights: w.clone(),
            rho,
        };
        trace.push(noise_aware_loss(&model, features, soft)?);
    }

    Ok((LinearModel { weights: w, rho }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn features(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows[0].len(), rows).unwrap()
    }

    #[test]
    fn soft_labels_validated() {
        assert!(SoftLabels::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(SoftLabels::new(vec![1.1]).is_err());
        assert!(SoftLabels::new(vec![f64::NAN]).is_err());
        let hard = SoftLabels::from_hard(&[1, -1, 1]).unwrap();
        assert_eq!(hard.values(), &[1.0, 0.0, 1.0]);
        assert!(SoftLabels::from_hard(&[0]).is_err());
    }

    #[test]
    fn zero_weights_loss_is_log_two() {
        let f = features(&[vec![0.3, -0.2], vec![0.9, 0.1]]);
        let p = SoftLabels::new(vec![0.2, 0.9]).unwrap();
        let model = LinearModel::new(vec![0.0, 0.0], 0.0).unwrap();
        let loss = noise_aware_loss(&model, &f, &p).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    // Scalar hand computation: z = 1, p = 0.5 gives
    // (log(1+e^{-1}) + log(1+e^{1})) / 2 = 0.8132616875182228...
    #[test]
    fn half_label_hand_value() {
        let f = features(&[vec![1.0]]);
        let p = SoftLabels::new(vec![0.5]).unwrap();
        let model = LinearModel::new(vec![1.0], 0.0).unwrap();
        let loss = noise_aware_loss(&model, &f, &p).unwrap();
        assert!((loss - 0.8132616875182228).abs() < 1e-12);
    }

    #[test]
    fn hard_labels_reduce_to_logistic_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<i8> = (0..20).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let f = features(&rows);
        let p = SoftLabels::from_hard(&y).unwrap();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = LinearModel::new(w.clone(), 0.1).unwrap();
        let got = noise_aware_loss(&model, &f, &p).unwrap();
        // Standard logistic loss on signed labels.
        let mut expect = 0.0;
        for (row, &yy) in rows.iter().zip(&y) {
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            expect += softplus(-(z * yy as f64));
        }
        expect = expect / 20.0 + 0.1 * w.iter().map(|v| v * v).sum::<f64>();
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn gradient_zero_at_uninformative_point() {
        let f = features(&[vec![0.4, 0.1], vec![-0.3, 0.8]]);
        let p = SoftLabels::new(vec![0.5, 0.5]).unwrap();
        let model = LinearModel::new(vec![0.0, 0.0], 0.0).unwrap();
        let g = loss_gradient(&model, &f, &p).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gradient_saturated_positive_case() {
        // p = 1 and a hugely positive z: the data term vanishes, leaving 2*rho*w.
        let f = features(&[vec![1.0]]);
        let p = SoftLabels::new(vec![1.0]).unwrap();
        let model = LinearModel::new(vec![40.0], 0.05).unwrap();
        let g = loss_gradient(&model, &f, &p).unwrap();
        assert!((g[0] - 2.0 * 0.05 * 40.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let d = rng.random_range(1..5);
            let n = rng.random_range(1..8);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let p =
                SoftLabels::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rho = rng.random_range(0.0..0.2);
            let f = features(&rows);
            let model = LinearModel::new(w.clone(), rho).unwrap();
            let g = loss_gradient(&model, &f, &p).unwrap();
            let h = 1e-6;
            for k in 0..d {
                let mut up = w.clone();
                let mut dn = w.clone();
                up[k] += h;
                dn[k] -= h;
                let lu =
                    noise_aware_loss(&LinearModel::new(up, rho).unwrap(), &f, &p).unwrap();
                let ld =
                    noise_aware_loss(&LinearModel::new(dn, rho).unwrap(), &f, &p).unwrap();
                let fd = (lu - ld) / (2.0 * h);
                assert!(
                    (g[k] - fd).abs() / g[k].abs().max(1.0) < 1e-6,
                    "coord {k}: {} vs fd {fd}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn convexity_midpoint_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let f = features(&rows);
        let p = SoftLabels::new((0..30).map(|_| rng.random::<f64>()).collect()).unwrap();
        for _ in 0..50 {
            let w1: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w2: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 0.5 * (a + b)).collect();
            let rho = 0.05;
            let l1 = noise_aware_loss(&LinearModel::new(w1, rho).unwrap(), &f, &p).unwrap();
            let l2 = noise_aware_loss(&LinearModel::new(w2, rho).unwrap(), &f, &p).unwrap();
            let lm = noise_aware_loss(&LinearModel::new(mid, rho).unwrap(), &f, &p).unwrap();
            assert!(lm <= 0.5 * (l1 + l2) + 1e-12);
        }
    }

    #[test]
    fn fit_loss_non_increasing_full_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..5).map(|_| rng.random_range(-0.4..0.4)).collect())
            .collect();
        let p = SoftLabels::new((0..100).map(|_| rng.random::<f64>()).collect()).unwrap();
        let f = features(&rows);
        let cfg = TrainConfig {
            step_size: 1.0,
            epochs: 100,
            ..TrainConfig::default()
        };
        let (_, trace) = fit_traced(&f, &p, 0.01, &cfg).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn huge_rho_shrinks_weights() {
        let f = features(&[vec![0.5, 0.5], vec![-0.5, -0.5]]);
        let p = SoftLabels::new(vec![1.0, 0.0]).unwrap();
        let cfg = TrainConfig {
            step_size: 1e-7,
            epochs: 50,
            ..TrainConfig::default()
        };
        let model = fit(&f, &p, 1e6, &cfg).unwrap();
        let norm: f64 = model.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm <= 1e-3, "norm {norm}");
    }

    #[test]
    fn fitted_norm_respects_solution_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &rho in &[0.01, 0.1, 1.0] {
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect())
                .collect();
            let p = SoftLabels::new((0..50).map(|_| rng.random::<f64>()).collect()).unwrap();
            let f = features(&rows);
            let cfg = TrainConfig {
                step_size: 1.0,
                epochs: 300,
                ..TrainConfig::default()
            };
            let model = fit(&f, &p, rho, &cfg).unwrap();
            let norm: f64 = model.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
            assert!(norm <= 0.5 / rho + 1e-6, "rho={rho}: norm {norm}");
        }
    }

    // Independent oracle: a plain supervised logistic regression implemented
    // here from scratch, compared on hard labels.
    #[test]
    fn matches_supervised_fit_on_hard_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 80;
        let d = 3;
        let w_true = [1.2, -0.8, 0.5];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let z: f64 = row.iter().zip(&w_true).map(|(a, b)| a * b).sum();
            y.push(if z > 0.0 { 1i8 } else { -1 });
            rows.push(row);
        }
        let f = features(&rows);
        let p = SoftLabels::from_hard(&y).unwrap();
        let rho = 0.05;
        let cfg = TrainConfig {
            step_size: 1.0,
            epochs: 2000,
            ..TrainConfig::default()
        };
        let model = fit(&f, &p, rho, &cfg).unwrap();
        let noise_aware = noise_aware_loss(&model, &f, &p).unwrap();

        // Supervised reference: gradient descent on the signed-label loss.
        let mut w = vec![0.0f64; d];
        for _ in 0..2000 {
            let mut g = vec![0.0f64; d];
            for (row, &yy) in rows.iter().zip(&y) {
                let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                let r = -(yy as f64) * sigmoid(-(z * yy as f64));
                for (gk, &x) in g.iter_mut().zip(row) {
                    *gk += r * x;
                }
            }
            for k in 0..d {
                w[k] -= 1.0 * (g[k] / n as f64 + 2.0 * rho * w[k]);
            }
        }
        let mut supervised = 0.0;
        for (row, &yy) in rows.iter().zip(&y) {
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            supervised += softplus(-(z * yy as f64));
        }
        supervised = supervised / n as f64 + rho * w.iter().map(|v| v * v).sum::<f64>();

        assert!(
            (noise_aware - supervised).abs() < 1e-3,
            "noise-aware {noise_aware} vs supervised {supervised}"
        );
    }

    #[test]
    fn predict_values() {
        let model = LinearModel::new(vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(model.predict(&[0.3, 0.4]).unwrap(), 0.5);
        let unit = LinearModel::new(vec![0.6, 0.8], 0.0).unwrap();
        let p = unit.predict(&[0.6, 0.8]).unwrap();
        assert!((p - sigmoid(1.0)).abs() < 1e-12);
        assert!((p - 0.7310585786300049).abs() < 1e-12);
        assert!(model.predict(&[1.0]).is_err());
    }

    #[test]
    fn predict_monotone_in_score() {
        let model = LinearModel::new(vec![1.0, -2.0], 0.0).unwrap();
        let mut prev = -1.0;
        for t in -10..10 {
            let x = t as f64 / 5.0;
            let p = model.predict(&[x, 0.0]).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn fit_rejects_divergence() {
        let f = features(&[vec![1.0]]);
        let p = SoftLabels::new(vec![1.0]).unwrap();
        let cfg = TrainConfig {
            step_size: 1e300,
            epochs: 10,
            ..TrainConfig::default()
        };
        let err = fit(&f, &p, 0.5, &cfg).unwrap_err();
        assert!(err.is_numerical());
    }
}
