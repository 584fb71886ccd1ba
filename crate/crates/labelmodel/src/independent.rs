//! The conditionally-independent generative label model.
//!
//! Each labeling function `i` labels an example with probability `beta_i`
//! (its coverage) and, when it labels, is correct with probability `alpha_i`
//! (its accuracy). With a uniform class prior the joint density of a vote
//! vector and the latent class is
//!
//! ```text
//! mu(lam, y) = 1/2 * prod_i [ b_i a_i   if lam_i == y
//!                           | b_i (1-a_i) if lam_i == -y
//!                           | 1 - b_i     if lam_i == 0 ]
//! ```
//!
//! The same family in exponential form uses natural parameters `psi` (accuracy
//! log-odds scale, `2a-1 = tanh(psi)`) and `phi` (coverage scale) with
//! sufficient statistics `lam_i * y` and `lam_i^2`. Fitting maximizes the
//! marginal likelihood of the observed votes by projected stochastic gradient
//! ascent in natural coordinates; the per-example gradient is the conditional
//! minus the unconditional expectation of the sufficient statistics, both of
//! which are available in closed form for this model.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::numeric::{ln_2cosh, log_sum_exp2, sigmoid, softplus};

/// Per-function accuracy/coverage parameters in mean form.
///
/// Accuracies live in `[0.5, 1)`; coverages in `[0, 1]`. A zero coverage
/// describes a function that never labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl IndependentParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::Dimension(format!(
                "alpha has length {}, beta has length {}",
                alpha.len(),
                beta.len()
            )));
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || !(0.5..1.0).contains(&a) {
                return Err(Error::Invalid(format!(
                    "alpha[{i}] = {a} outside [0.5, 1)"
                )));
            }
        }
        for (i, &b) in beta.iter().enumerate() {
            if !b.is_finite() || !(0.0..=1.0).contains(&b) {
                return Err(Error::Invalid(format!("beta[{i}] = {b} outside [0, 1]")));
            }
        }
        Ok(IndependentParams { alpha, beta })
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    fn check_lam(&self, lam: &[i8]) -> Result<()> {
        if lam.len() != self.m() {
            return Err(Error::Dimension(format!(
                "label vector has length {}, expected m={}",
                lam.len(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Joint density `mu(lam, y)` of a full vote vector and a class.
    pub fn joint_prob(&self, lam: &[i8], y: i8) -> Result<f64> {
        self.check_lam(lam)?;
        debug_assert!(y == 1 || y == -1);
        let mut p = 0.5;
        for i in 0..self.m() {
            let (a, b) = (self.alpha[i], self.beta[i]);
            p *= if lam[i] == 0 {
                1.0 - b
            } else if lam[i] == y {
                b * a
            } else {
                b * (1.0 - a)
            };
        }
        Ok(p)
    }

    /// Log-likelihood of the observed votes, `sum_x log sum_y mu(lam(x), y)`,
    /// computed per function rather than by enumerating vote vectors.
    pub fn marginal_log_likelihood(&self, labels: &LabelMatrix) -> Result<f64> {
        if labels.m() != self.m() {
            return Err(Error::Dimension(format!(
                "label matrix has m={}, params have m={}",
                labels.m(),
                self.m()
            )));
        }
        // log of the all-abstain product; add per-entry corrections per row.
        let ln_abstain: Vec<f64> = self.beta.iter().map(|b| (1.0 - b).ln()).collect();
        let base: f64 = ln_abstain.iter().sum();
        let mut total = 0.0;
        if base.is_finite() {
            for r in 0..labels.n() {
                let mut lp = base;
                let mut lm = base;
                for (c, v) in labels.row(r) {
                    let (a, b) = (self.alpha[c], self.beta[c]);
                    let (p_pos, p_neg) = if v == 1 {
                        (b * a, b * (1.0 - a))
                    } else {
                        (b * (1.0 - a), b * a)
                    };
                    lp += p_pos.ln() - ln_abstain[c];
                    lm += p_neg.ln() - ln_abstain[c];
                }
                total += log_sum_exp2(lp, lm) - std::f64::consts::LN_2;
            }
        } else {
            // Some beta == 1: walk every coordinate so 0-probability abstains
            // surface as -inf instead of NaN from inf - inf.
            for r in 0..labels.n() {
                let row = labels.row_dense(r);
                let lp = self.joint_prob(&row, 1)?.ln();
                let lm = self.joint_prob(&row, -1)?.ln();
                total += log_sum_exp2(lp, lm);
            }
        }
        Ok(total)
    }

    /// Exact Bayes posterior `P(Y = +1 | lam)` under the uniform class prior:
    /// `(1 + tanh(sum_i psi_i lam_i)) / 2` with `psi_i = artanh(2 alpha_i - 1)`.
    pub fn posterior(&self, lam: &[i8]) -> Result<f64> {
        self.check_lam(lam)?;
        let mut s = 0.0;
        for (i, &v) in lam.iter().enumerate() {
            if v != 0 {
                s += (2.0 * self.alpha[i] - 1.0).atanh() * v as f64;
            }
        }
        Ok(0.5 * (1.0 + s.tanh()))
    }

    /// Natural-parameter form. Fails for coverages of exactly 0 or 1, whose
    /// coverage-scale parameter is infinite.
    pub fn to_natural(&self) -> Result<NaturalParams> {
        let mut psi = Vec::with_capacity(self.m());
        let mut phi = Vec::with_capacity(self.m());
        for i in 0..self.m() {
            let p = (2.0 * self.alpha[i] - 1.0).atanh();
            let b = self.beta[i];
            let f = (b / (1.0 - b)).ln() - ln_2cosh(p);
            if !p.is_finite() || !f.is_finite() {
                return Err(Error::Numerical(format!(
                    "natural parameters non-finite for alpha={}, beta={}",
                    self.alpha[i], b
                )));
            }
            psi.push(p);
            phi.push(f);
        }
        Ok(NaturalParams { psi, phi })
    }

    /// Coordinate-wise clamp of the accuracies and coverages into the box
    /// (the orthogonal projection onto a box).
    pub fn project(&self, bounds: &FeasibleBox) -> IndependentParams {
        IndependentParams {
            alpha: self
                .alpha
                .iter()
                .map(|a| a.clamp(bounds.alpha_min, bounds.alpha_max))
                .collect(),
            beta: self
                .beta
                .iter()
                .map(|b| b.clamp(bounds.beta_min, bounds.beta_max))
                .collect(),
        }
    }

    /// Draws `n` i.i.d. examples: `Y` uniform on `{-1,+1}`, then each vote
    /// abstains w.p. `1-b_i`, agrees with `Y` w.p. `b_i a_i`, and opposes it
    /// w.p. `b_i (1-a_i)`. Deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> (LabelMatrix, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        let mut truth = Vec::with_capacity(n);
        for r in 0..n {
            let y: i8 = if rng.random::<f64>() < 0.5 { 1 } else { -1 };
            truth.push(y);
            for i in 0..self.m() {
                let u: f64 = rng.random();
                let b = self.beta[i];
                if u < b * self.alpha[i] {
                    entries.push((r, i, y));
                } else if u < b {
                    entries.push((r, i, -y));
                }
            }
        }
        let matrix = LabelMatrix::from_entries(n, self.m(), &entries)
            .expect("sampled entries are valid by construction");
        (matrix, truth)
    }
}

/// Natural (exponential-family) parameters: `psi` on the agreement statistics
/// `lam_i y`, `phi` on the coverage statistics `lam_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    psi: Vec<f64>,
    phi: Vec<f64>,
}

impl NaturalParams {
    pub fn new(psi: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if psi.len() != phi.len() {
            return Err(Error::Dimension(format!(
                "psi has length {}, phi has length {}",
                psi.len(),
                phi.len()
            )));
        }
        if let Some(v) = psi.iter().chain(&phi).find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite natural parameter {v}")));
        }
        Ok(NaturalParams { psi, phi })
    }

    pub fn m(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    fn check_lam(&self, lam: &[i8]) -> Result<()> {
        if lam.len() != self.m() {
            return Err(Error::Dimension(format!(
                "label vector has length {}, expected m={}",
                lam.len(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Mean-parameter form: `alpha = sigma(2 psi)`, `beta = sigma(phi + log 2cosh psi)`.
    pub fn to_mean(&self) -> Result<IndependentParams> {
        let (alpha, beta) = self.mean_raw();
        IndependentParams::new(alpha, beta)
    }

    fn mean_raw(&self) -> (Vec<f64>, Vec<f64>) {
        let alpha = self.psi.iter().map(|&p| sigmoid(2.0 * p)).collect();
        let beta = self
            .psi
            .iter()
            .zip(&self.phi)
            .map(|(&p, &f)| sigmoid(f + ln_2cosh(p)))
            .collect();
        (alpha, beta)
    }

    /// `P(Y = +1 | lam) = (1 + tanh(psi . lam)) / 2`; the coverage terms cancel.
    pub fn posterior(&self, lam: &[i8]) -> Result<f64> {
        self.check_lam(lam)?;
        Ok(0.5 * (1.0 + self.weighted_vote(lam).tanh()))
    }

    fn weighted_vote(&self, lam: &[i8]) -> f64 {
        lam.iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0)
            .map(|(i, &v)| self.psi[i] * v as f64)
            .sum()
    }

    /// `log P(Lam = lam)` for a single dense vote vector.
    pub fn log_marginal(&self, lam: &[i8]) -> Result<f64> {
        self.check_lam(lam)?;
        let mut out = ln_2cosh(self.weighted_vote(lam)) - self.log_partition();
        for (i, &v) in lam.iter().enumerate() {
            if v != 0 {
                out += self.phi[i];
            }
        }
        Ok(out)
    }

    /// log Z = log 2 + sum_i softplus(phi_i + log 2cosh psi_i).
    fn log_partition(&self) -> f64 {
        std::f64::consts::LN_2
            + self
                .psi
                .iter()
                .zip(&self.phi)
                .map(|(&p, &f)| softplus(f + ln_2cosh(p)))
                .sum::<f64>()
    }

    /// Unconditional moments of the sufficient statistics:
    /// `E[lam_i y] = beta_i gamma_i` and `E[lam_i^2] = beta_i`.
    pub fn sufficient_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let (_, beta) = self.mean_raw();
        let agree = self
            .psi
            .iter()
            .zip(&beta)
            .map(|(&p, &b)| b * p.tanh())
            .collect();
        (agree, beta)
    }

    /// Gradient of `log P(Lam = lam)` with respect to `(psi, phi)`: the
    /// conditional expectation of the sufficient statistics given the votes,
    /// minus their unconditional expectation.
    pub fn marginal_grad(&self, lam: &[i8]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_lam(lam)?;
        let t = self.weighted_vote(lam).tanh();
        let (mut g_psi, mut g_phi) = self.sufficient_moments();
        for i in 0..self.m() {
            g_psi[i] = -g_psi[i];
            g_phi[i] = -g_phi[i];
        }
        for (i, &v) in lam.iter().enumerate() {
            if v != 0 {
                g_psi[i] += v as f64 * t;
                g_phi[i] += 1.0;
            }
        }
        Ok((g_psi, g_phi))
    }
}

/// Box of feasible mean parameters for projected SGD.
///
/// The default is the range assumed for the theory (`alpha` in `[0.8, 0.9]`,
/// `beta` in `[0.3, 0.5]`); real labeling functions routinely fall outside
/// it, so the CLI demands explicit bounds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibleBox {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl FeasibleBox {
    pub fn new(alpha_min: f64, alpha_max: f64, beta_min: f64, beta_max: f64) -> Result<Self> {
        let b = FeasibleBox {
            alpha_min,
            alpha_max,
            beta_min,
            beta_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_alpha = 0.5 < self.alpha_min
            && self.alpha_min <= self.alpha_max
            && self.alpha_max < 1.0;
        let ok_beta =
            0.0 < self.beta_min && self.beta_min <= self.beta_max && self.beta_max <= 1.0;
        if !ok_alpha || !ok_beta {
            return Err(Error::Invalid(format!(
                "infeasible bounds: need 0.5 < alpha_min <= alpha_max < 1 and \
                 0 < beta_min <= beta_max <= 1, got alpha [{}, {}], beta [{}, {}]",
                self.alpha_min, self.alpha_max, self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }
}

impl Default for FeasibleBox {
    fn default() -> Self {
        FeasibleBox {
            alpha_min: 0.8,
            alpha_max: 0.9,
            beta_min: 0.3,
            beta_max: 0.5,
        }
    }
}

/// Settings for the stochastic-gradient fitting loops.
///
/// When `target_eps` is set, the step size follows the theory default
/// `eta = beta_min * eps^2 / 16` for the independent model; otherwise
/// `step_size` is used as given. `batch_size` is clamped to the dataset
/// size, so `usize::MAX` means full-batch gradients.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub step_size: f64,
    pub epochs: usize,
    pub target_eps: Option<f64>,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_size: 0.1,
            epochs: 200,
            target_eps: None,
            seed: 0,
            batch_size: usize::MAX,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Invalid(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be positive".into()));
        }
        if let Some(e) = self.target_eps {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::Invalid(format!(
                    "target_eps must be positive, got {e}"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_step_size(&self, beta_min: f64) -> f64 {
        match self.target_eps {
            Some(eps) => beta_min * eps * eps / 16.0,
            None => self.step_size,
        }
    }
}

/// Result of a marginal-likelihood fit: the projected parameters plus the
/// per-epoch objective trace.
#[derive(Debug, Clone)]
pub struct IndependentFit {
    pub params: IndependentParams,
    pub objective_trace: Vec<f64>,
}

// Coverages are kept strictly inside (0, 1) while optimizing so the natural
// coordinates stay finite, even if the box allows beta_max = 1.
const BETA_INTERIOR_MARGIN: f64 = 1e-9;

fn project_natural(psi: &mut [f64], phi: &mut [f64], bounds: &FeasibleBox) {
    let beta_hi = bounds.beta_max.min(1.0 - BETA_INTERIOR_MARGIN);
    let beta_lo = bounds.beta_min.min(beta_hi);
    for i in 0..psi.len() {
        let alpha = sigmoid(2.0 * psi[i]).clamp(bounds.alpha_min, bounds.alpha_max);
        let beta = sigmoid(phi[i] + ln_2cosh(psi[i])).clamp(beta_lo, beta_hi);
        psi[i] = (2.0 * alpha - 1.0).atanh();
        phi[i] = (beta / (1.0 - beta)).ln() - ln_2cosh(psi[i]);
    }
}

/// Fits the independent model by projected stochastic gradient ascent on the
/// marginal log-likelihood, in natural coordinates with the closed-form
/// conditional-minus-unconditional gradient, projecting onto the box in mean
/// coordinates after every step. Deterministic for a fixed seed.
pub fn fit_sgd(
    labels: &LabelMatrix,
    bounds: &FeasibleBox,
    cfg: &TrainConfig,
) -> Result<IndependentFit> {
    bounds.validate()?;
    cfg.validate()?;
    let n = labels.n();
    let m = labels.m();
    if n == 0 {
        return Err(Error::Invalid("cannot fit on an empty label matrix".into()));
    }

    // Start at the box-midpoint accuracy and the empirical per-function
    // coverage (the phi-gradient vanishes exactly there).
    let alpha0 = 0.5 * (bounds.alpha_min + bounds.alpha_max);
    let stats = crate::data::compute_lf_stats(labels);
    let beta_hi = bounds.beta_max.min(1.0 - BETA_INTERIOR_MARGIN);
    let mut psi = vec![(2.0 * alpha0 - 1.0).atanh(); m];
    let mut phi: Vec<f64> = stats
        .per_lf_coverage
        .iter()
        .map(|&c| {
            let b = c.clamp(bounds.beta_min.max(BETA_INTERIOR_MARGIN), beta_hi);
            (b / (1.0 - b)).ln() - ln_2cosh(psi[0])
        })
        .collect();
    project_natural(&mut psi, &mut phi, bounds);

    let eta = cfg.effective_step_size(bounds.beta_min);
    let batch = cfg.batch_size.min(n);
    let full_batch = batch == n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);

    let mut g_psi = vec![0.0; m];
    let mut g_phi = vec![0.0; m];
    for _ in 0..cfg.epochs {
        if !full_batch {
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        }
        for chunk in order.chunks(batch) {
            g_psi.fill(0.0);
            g_phi.fill(0.0);
            for &x in chunk {
                let mut s = 0.0;
                for (c, v) in labels.row(x) {
                    s += psi[c] * v as f64;
                }
                let t = s.tanh();
                for (c, v) in labels.row(x) {
                    g_psi[c] += v as f64 * t;
                    g_phi[c] += 1.0;
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for i in 0..m {
                let beta = sigmoid(phi[i] + ln_2cosh(psi[i]));
                let gamma = psi[i].tanh();
                psi[i] += eta * (g_psi[i] * inv - beta * gamma);
                phi[i] += eta * (g_phi[i] * inv - beta);
            }
            project_natural(&mut psi, &mut phi, bounds);
        }
        let nat = NaturalParams {
            psi: psi.clone(),
            phi: phi.clone(),
        };
        trace.push(log_marginal_data(&nat, labels)?);
    }

    let params = NaturalParams { psi, phi }.to_mean()?;
    Ok(IndependentFit {
        params,
        objective_trace: trace,
    })
}

/// Total `log P(data)` under natural parameters; O(nnz) over the matrix.
pub fn log_marginal_data(nat: &NaturalParams, labels: &LabelMatrix) -> Result<f64> {
    if labels.m() != nat.m() {
        return Err(Error::Dimension(format!(
            "label matrix has m={}, params have m={}",
            labels.m(),
            nat.m()
        )));
    }
    let log_z = nat.log_partition();
    let mut total = -(labels.n() as f64) * log_z;
    for r in 0..labels.n() {
        let mut s = 0.0;
        for (c, v) in labels.row(r) {
            s += nat.psi[c] * v as f64;
            total += nat.phi[c];
        }
        total += ln_2cosh(s);
    }
    Ok(total)
}
