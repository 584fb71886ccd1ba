//! Dependency-aware exponential-family label model.
//!
//! The density over a vote vector and the latent class is
//! `mu_theta(lam, y) = exp(theta . h(lam, y)) / Z_theta`, where each entry of
//! `h` is a `{-1,0,1}`-valued factor. The base factors (`y`, `lam_i y`,
//! `lam_i`, `lam_i^2 y`, `lam_i^2`) can express any model in which the votes
//! are independent given the class; user-declared dependency edges add pair
//! factors on top.
//!
//! Exact inference over `Y` given a full vote vector needs only two states.
//! Everything that needs unconditional expectations either enumerates (small
//! `m`) or Gibbs-samples.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DependencyEdge, DependencyKind, LabelMatrix};
use crate::error::{Error, Result};
use crate::independent::{NaturalParams, TrainConfig};
use crate::numeric::{log_sum_exp2, sigmoid};

/// Largest `m` for which exact enumeration over `2 * 3^m` states is allowed.
pub const ENUMERATION_GUARD_M: usize = 12;

/// One `{-1,0,1}`-valued factor of the joint density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// `y` — class bias.
    Class,
    /// `lam_i * y` — vote agrees with the class.
    Agree(usize),
    /// `lam_i` — raw vote sign.
    LabelSign(usize),
    /// `lam_i^2 * y` — fires jointly with the class.
    FiresClass(usize),
    /// `lam_i^2` — fires at all.
    Fires(usize),
    /// `1{lam_i == lam_j}`; with `nonzero_only` both must also fire.
    Similar {
        i: usize,
        j: usize,
        nonzero_only: bool,
    },
    /// `-1{lam_i == 0 && lam_j != 0}` — `j` labels only where `i` does.
    CoLabel { i: usize, j: usize },
    /// `1{lam_i == -y && lam_j == y}` — `j` corrects `i`'s errors.
    FixesError { i: usize, j: usize },
    /// `1{lam_i == y && lam_j == y}` — `j` confirms `i`'s correct labels.
    Reinforces { i: usize, j: usize },
    /// `-1{lam_i != 0 && lam_j != 0}` — the two rarely both fire.
    Excludes { i: usize, j: usize },
}

impl FactorKind {
    #[inline]
    pub fn eval(&self, lam: &[i8], y: i8) -> i8 {
        match *self {
            FactorKind::Class => y,
            FactorKind::Agree(i) => lam[i] * y,
            FactorKind::LabelSign(i) => lam[i],
            FactorKind::FiresClass(i) => {
                if lam[i] != 0 {
                    y
                } else {
                    0
                }
            }
            FactorKind::Fires(i) => lam[i] * lam[i],
            FactorKind::Similar { i, j, nonzero_only } => {
                let eq = lam[i] == lam[j] && (!nonzero_only || lam[i] != 0);
                eq as i8
            }
            FactorKind::CoLabel { i, j } => -((lam[i] == 0 && lam[j] != 0) as i8),
            FactorKind::FixesError { i, j } => ((lam[i] == -y && lam[j] == y)) as i8,
            FactorKind::Reinforces { i, j } => ((lam[i] == y && lam[j] == y)) as i8,
            FactorKind::Excludes { i, j } => -((lam[i] != 0 && lam[j] != 0) as i8),
        }
    }

    fn involves_site(&self, s: usize) -> bool {
        match *self {
            FactorKind::Class => false,
            FactorKind::Agree(i)
            | FactorKind::LabelSign(i)
            | FactorKind::FiresClass(i)
            | FactorKind::Fires(i) => i == s,
            FactorKind::Similar { i, j, .. }
            | FactorKind::CoLabel { i, j }
            | FactorKind::FixesError { i, j }
            | FactorKind::Reinforces { i, j }
            | FactorKind::Excludes { i, j } => i == s || j == s,
        }
    }

    fn involves_class(&self) -> bool {
        matches!(
            self,
            FactorKind::Class
                | FactorKind::Agree(_)
                | FactorKind::FiresClass(_)
                | FactorKind::FixesError { .. }
                | FactorKind::Reinforces { .. }
        )
    }

    /// Stable textual descriptor used in serialized weight files.
    pub fn descriptor(&self) -> String {
        match *self {
            FactorKind::Class => "class".into(),
            FactorKind::Agree(i) => format!("agree({i})"),
            FactorKind::LabelSign(i) => format!("label({i})"),
            FactorKind::FiresClass(i) => format!("fires_class({i})"),
            FactorKind::Fires(i) => format!("fires({i})"),
            FactorKind::Similar {
                i,
                j,
                nonzero_only: false,
            } => format!("similar({i},{j})"),
            FactorKind::Similar {
                i,
                j,
                nonzero_only: true,
            } => format!("similar_nonzero({i},{j})"),
            FactorKind::CoLabel { i, j } => format!("colabel({i},{j})"),
            FactorKind::FixesError { i, j } => format!("fixes({i},{j})"),
            FactorKind::Reinforces { i, j } => format!("reinforces({i},{j})"),
            FactorKind::Excludes { i, j } => format!("excludes({i},{j})"),
        }
    }

    pub fn parse_descriptor(s: &str) -> Result<FactorKind> {
        let bad = || Error::Invalid(format!("malformed factor descriptor '{s}'"));
        if s == "class" {
            return Ok(FactorKind::Class);
        }
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = &s[..open];
        let args: Vec<usize> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let one = || -> Result<usize> { args.first().copied().ok_or_else(bad) };
        let two = || -> Result<(usize, usize)> {
            if args.len() == 2 {
                Ok((args[0], args[1]))
            } else {
                Err(bad())
            }
        };
        match name {
            "agree" => Ok(FactorKind::Agree(one()?)),
            "label" => Ok(FactorKind::LabelSign(one()?)),
            "fires_class" => Ok(FactorKind::FiresClass(one()?)),
            "fires" => Ok(FactorKind::Fires(one()?)),
            "similar" => two().map(|(i, j)| FactorKind::Similar {
                i,
                j,
                nonzero_only: false,
            }),
            "similar_nonzero" => two().map(|(i, j)| FactorKind::Similar {
                i,
                j,
                nonzero_only: true,
            }),
            "colabel" => two().map(|(i, j)| FactorKind::CoLabel { i, j }),
            "fixes" => two().map(|(i, j)| FactorKind::FixesError { i, j }),
            "reinforces" => two().map(|(i, j)| FactorKind::Reinforces { i, j }),
            "excludes" => two().map(|(i, j)| FactorKind::Excludes { i, j }),
            _ => Err(bad()),
        }
    }
}

/// Weight vector of a factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    weights: Vec<f64>,
}

impl Theta {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Invalid(format!("non-finite weight {w}")));
        }
        Ok(Theta { weights })
    }

    pub fn zeros(len: usize) -> Self {
        Theta {
            weights: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Per-coordinate feasible box for the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ThetaBounds {
    pub fn uniform(lo: f64, hi: f64, len: usize) -> Result<Self> {
        Self::per_coordinate(vec![lo; len], vec![hi; len])
    }

    pub fn per_coordinate(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "bound vectors of lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (k, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::Invalid(format!(
                    "weight bounds [{l}, {h}] at coordinate {k}"
                )));
            }
        }
        Ok(ThetaBounds { lo, hi })
    }

    /// Default box of [-3, 3] per weight.
    pub fn default_for(len: usize) -> Self {
        ThetaBounds {
            lo: vec![-3.0; len],
            hi: vec![3.0; len],
        }
    }

    /// A `[-half_width, half_width]` box whose agreement weights are bounded
    /// below by zero instead.
    ///
    /// The marginal likelihood of the votes is invariant under negating every
    /// class-coupled weight, so an unanchored fit can land in the mode where
    /// the class posterior comes out inverted. Requiring nonnegative
    /// agreement weights pins the mode where labeling functions are
    /// better than chance, exactly as the accuracy box does for the
    /// independent model.
    pub fn nonnegative_agreement(spec: &FactorSpec, half_width: f64) -> Result<Self> {
        let lo = spec
            .kinds()
            .iter()
            .map(|k| match k {
                FactorKind::Agree(_) => 0.0,
                _ => -half_width,
            })
            .collect();
        Self::per_coordinate(lo, vec![half_width; spec.len()])
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    fn clamp_into(&self, w: &mut [f64]) {
        for (k, v) in w.iter_mut().enumerate() {
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }
}

/// Ordered factor list for `m` labeling functions plus dependency edges.
///
/// The first `4m + 1` factors are always the base family in the fixed order
/// class, agree, label, fires-class, fires; each edge then appends its pair
/// factors (two for fixing/reinforcing, one for similar/exclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    m: usize,
    kinds: Vec<FactorKind>,
}

impl FactorSpec {
    pub fn build(m: usize, edges: &[DependencyEdge], similar_nonzero_only: bool) -> Result<Self> {
        let mut kinds = Vec::with_capacity(4 * m + 1 + 2 * edges.len());
        kinds.push(FactorKind::Class);
        kinds.extend((0..m).map(FactorKind::Agree));
        kinds.extend((0..m).map(FactorKind::LabelSign));
        kinds.extend((0..m).map(FactorKind::FiresClass));
        kinds.extend((0..m).map(FactorKind::Fires));
        for edge in edges {
            edge.check_against(m)?;
            let (i, j) = (edge.i, edge.j);
            match edge.kind {
                DependencyKind::Similar => kinds.push(FactorKind::Similar {
                    i,
                    j,
                    nonzero_only: similar_nonzero_only,
                }),
                DependencyKind::Fixing => {
                    kinds.push(FactorKind::CoLabel { i, j });
                    kinds.push(FactorKind::FixesError { i, j });
                }
                DependencyKind::Reinforcing => {
                    kinds.push(FactorKind::CoLabel { i, j });
                    kinds.push(FactorKind::Reinforces { i, j });
                }
                DependencyKind::Exclusive => kinds.push(FactorKind::Excludes { i, j }),
            }
        }
        Ok(FactorSpec { m, kinds })
    }

    /// Reconstructs a spec from a serialized factor list, inferring `m`.
    pub fn from_kinds(kinds: Vec<FactorKind>) -> Result<Self> {
        let m = kinds
            .iter()
            .filter(|k| matches!(k, FactorKind::Agree(_)))
            .count();
        let max_index = kinds
            .iter()
            .filter_map(|k| match *k {
                FactorKind::Class => None,
                FactorKind::Agree(i)
                | FactorKind::LabelSign(i)
                | FactorKind::FiresClass(i)
                | FactorKind::Fires(i) => Some(i),
                FactorKind::Similar { i, j, .. }
                | FactorKind::CoLabel { i, j }
                | FactorKind::FixesError { i, j }
                | FactorKind::Reinforces { i, j }
                | FactorKind::Excludes { i, j } => Some(i.max(j)),
            })
            .max();
        if let Some(mx) = max_index {
            if mx >= m {
                return Err(Error::Invalid(format!(
                    "factor references function {mx} but only {m} agree factors present"
                )));
            }
        }
        Ok(FactorSpec { m, kinds })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total factor count `M`.
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[FactorKind] {
        &self.kinds
    }

    fn check_lam(&self, lam: &[i8]) -> Result<()> {
        if lam.len() != self.m {
            return Err(Error::Dimension(format!(
                "label vector has length {}, expected m={}",
                lam.len(),
                self.m
            )));
        }
        Ok(())
    }

    fn check_theta(&self, theta: &Theta) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::Dimension(format!(
                "theta has length {}, spec has M={}",
                theta.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Evaluates every factor at `(lam, y)`.
    pub fn eval(&self, lam: &[i8], y: i8) -> Result<Vec<i8>> {
        self.check_lam(lam)?;
        let mut out = vec![0i8; self.len()];
        self.eval_into(lam, y, &mut out);
        Ok(out)
    }

    fn eval_into(&self, lam: &[i8], y: i8, out: &mut [i8]) {
        for (k, kind) in self.kinds.iter().enumerate() {
            out[k] = kind.eval(lam, y);
        }
    }

    /// `theta . h(lam, y)`.
    pub fn score(&self, theta: &Theta, lam: &[i8], y: i8) -> f64 {
        self.kinds
            .iter()
            .zip(&theta.weights)
            .map(|(kind, w)| w * kind.eval(lam, y) as f64)
            .sum()
    }

    /// Exact `P(Y = +1 | lam)` via the two-state normalization; no
    /// enumeration over vote vectors is needed.
    pub fn posterior_y(&self, theta: &Theta, lam: &[i8]) -> Result<f64> {
        self.check_lam(lam)?;
        self.check_theta(theta)?;
        let s_pos = self.score(theta, lam, 1);
        let s_neg = self.score(theta, lam, -1);
        Ok(sigmoid(s_pos - s_neg))
    }

    /// Draws `Y` from its exact conditional given the full vote vector.
    pub fn conditional_sample_y(
        &self,
        theta: &Theta,
        lam: &[i8],
        rng: &mut impl Rng,
    ) -> Result<i8> {
        let p = self.posterior_y(theta, lam)?;
        Ok(if rng.random::<f64>() < p { 1 } else { -1 })
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.m > ENUMERATION_GUARD_M {
            return Err(Error::Invalid(format!(
                "m={} exceeds the enumeration guard of {ENUMERATION_GUARD_M}",
                self.m
            )));
        }
        Ok(())
    }

    /// Visits every state `(lam, y)` in a fixed order (guarded by `m`).
    pub fn for_each_state(&self, mut f: impl FnMut(&[i8], i8)) -> Result<()> {
        self.check_enumerable()?;
        let mut lam = vec![-1i8; self.m];
        for y in [-1i8, 1] {
            lam.fill(-1);
            'states: loop {
                f(&lam, y);
                let mut i = 0;
                loop {
                    if i == self.m {
                        break 'states;
                    }
                    if lam[i] < 1 {
                        lam[i] += 1;
                        break;
                    }
                    lam[i] = -1;
                    i += 1;
                }
            }
        }
        Ok(())
    }

    /// Full normalized table of `mu_theta` over all `2 * 3^m` states.
    pub fn exact_posterior_table(&self, theta: &Theta) -> Result<StateTable> {
        self.check_theta(theta)?;
        self.check_enumerable()?;
        let size = 2 * 3usize.pow(self.m as u32);
        let mut logs = Vec::with_capacity(size);
        let mut max = f64::NEG_INFINITY;
        self.for_each_state(|lam, y| {
            let s = self.score(theta, lam, y);
            max = max.max(s);
            logs.push(s);
        })?;
        let mut total = 0.0;
        let mut probs: Vec<f64> = logs.iter().map(|s| (s - max).exp()).collect();
        for p in &probs {
            total += p;
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(StateTable { m: self.m, probs })
    }

    /// `log Z_theta` by enumeration (guarded by `m`).
    pub fn log_partition(&self, theta: &Theta) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_enumerable()?;
        let mut max = f64::NEG_INFINITY;
        let mut scores = Vec::new();
        self.for_each_state(|lam, y| {
            let s = self.score(theta, lam, y);
            max = max.max(s);
            scores.push(s);
        })?;
        Ok(max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln())
    }

    /// Exact `E[h]` under `mu_theta` (guarded by `m`).
    pub fn expected_factors(&self, theta: &Theta) -> Result<Vec<f64>> {
        let table = self.exact_posterior_table(theta)?;
        Ok(table.expected_factors(self))
    }

    /// Exact data log-likelihood `sum_x log P(Lam = lam(x))` (guarded by `m`).
    pub fn log_marginal_data(&self, theta: &Theta, labels: &LabelMatrix) -> Result<f64> {
        if labels.m() != self.m {
            return Err(Error::Dimension(format!(
                "label matrix has m={}, spec has m={}",
                labels.m(),
                self.m
            )));
        }
        let log_z = self.log_partition(theta)?;
        let mut total = -(labels.n() as f64) * log_z;
        for r in 0..labels.n() {
            let lam = labels.row_dense(r);
            total += log_sum_exp2(
                self.score(theta, &lam, 1),
                self.score(theta, &lam, -1),
            );
        }
        Ok(total)
    }

    /// Weights that reproduce an independent model exactly: `psi_i` on the
    /// agree factors, `phi_i` on the fires factors, zero elsewhere.
    pub fn independent_embedding(&self, nat: &NaturalParams) -> Result<Theta> {
        if nat.m() != self.m {
            return Err(Error::Dimension(format!(
                "natural params have m={}, spec has m={}",
                nat.m(),
                self.m
            )));
        }
        let mut weights = vec![0.0; self.len()];
        for (k, kind) in self.kinds.iter().enumerate() {
            match *kind {
                FactorKind::Agree(i) => weights[k] = nat.psi()[i],
                FactorKind::Fires(i) => weights[k] = nat.phi()[i],
                _ => {}
            }
        }
        Theta::new(weights)
    }
}

/// Normalized probability table over all `(lam, y)` states for small `m`.
#[derive(Debug, Clone)]
pub struct StateTable {
    m: usize,
    probs: Vec<f64>,
}

impl StateTable {
    fn index(&self, lam: &[i8], y: i8) -> usize {
        debug_assert_eq!(lam.len(), self.m);
        let mut idx = 0usize;
        for &v in lam.iter().rev() {
            idx = idx * 3 + (v + 1) as usize;
        }
        let y_idx = if y == 1 { 1 } else { 0 };
        y_idx * 3usize.pow(self.m as u32) + idx
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn prob(&self, lam: &[i8], y: i8) -> f64 {
        self.probs[self.index(lam, y)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Conditional `P(Y = +1 | lam)` read off the table.
    pub fn posterior_y(&self, lam: &[i8]) -> f64 {
        let p = self.prob(lam, 1);
        let q = self.prob(lam, -1);
        p / (p + q)
    }

    /// `E[h]` under the tabulated distribution.
    pub fn expected_factors(&self, spec: &FactorSpec) -> Vec<f64> {
        let mut out = vec![0.0; spec.len()];
        spec.for_each_state(|lam, y| {
            let p = self.prob(lam, y);
            for (k, kind) in spec.kinds().iter().enumerate() {
                out[k] += p * kind.eval(lam, y) as f64;
            }
        })
        .expect("table exists, so m is within the enumeration guard");
        out
    }
}

/// Gibbs sampling settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            burn_in: 200,
            thin: 1,
            chains: 1,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Invalid("thin must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Invalid("chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which factors touch each vote site, and which touch the class; sweeping
/// only re-evaluates those.
struct SiteIndex {
    per_site: Vec<Vec<u32>>,
    class_factors: Vec<u32>,
}

impl SiteIndex {
    fn build(spec: &FactorSpec) -> SiteIndex {
        let per_site = (0..spec.m())
            .map(|s| {
                spec.kinds()
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| k.involves_site(s))
                    .map(|(f, _)| f as u32)
                    .collect()
            })
            .collect();
        let class_factors = spec
            .kinds()
            .iter()
            .enumerate()
            .filter(|(_, k)| k.involves_class())
            .map(|(f, _)| f as u32)
            .collect();
        SiteIndex {
            per_site,
            class_factors,
        }
    }
}

struct ChainState {
    lam: Vec<i8>,
    y: i8,
    rng: ChaCha8Rng,
}

impl ChainState {
    fn new(m: usize, seed: u64, stream: u64) -> ChainState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let lam = (0..m).map(|_| rng.random_range(-1i8..=1)).collect();
        let y = if rng.random::<f64>() < 0.5 { 1 } else { -1 };
        ChainState { lam, y, rng }
    }

    /// One systematic scan: each vote site from its 3-state conditional given
    /// the rest and the class, then the class from its 2-state conditional.
    fn sweep(&mut self, spec: &FactorSpec, theta: &Theta, idx: &SiteIndex) {
        for s in 0..spec.m() {
            let mut scores = [0.0f64; 3];
            for (slot, v) in [(0usize, -1i8), (1, 0), (2, 1)] {
                self.lam[s] = v;
                let mut acc = 0.0;
                for &f in &idx.per_site[s] {
                    acc += theta.weights()[f as usize]
                        * spec.kinds()[f as usize].eval(&self.lam, self.y) as f64;
                }
                scores[slot] = acc;
            }
            let max = scores[0].max(scores[1]).max(scores[2]);
            let w = [
                (scores[0] - max).exp(),
                (scores[1] - max).exp(),
                (scores[2] - max).exp(),
            ];
            let u: f64 = self.rng.random::<f64>() * (w[0] + w[1] + w[2]);
            self.lam[s] = if u < w[0] {
                -1
            } else if u < w[0] + w[1] {
                0
            } else {
                1
            };
        }
        let mut diff = 0.0;
        for &f in &idx.class_factors {
            let kind = &spec.kinds()[f as usize];
            let w = theta.weights()[f as usize];
            diff += w * (kind.eval(&self.lam, 1) - kind.eval(&self.lam, -1)) as f64;
        }
        self.y = if self.rng.random::<f64>() < sigmoid(diff) {
            1
        } else {
            -1
        };
    }
}

/// Systematic-scan Gibbs sampler over `mu_theta`.
///
/// Emits post-burn-in samples thinned by `thin` sweeps, round-robin across
/// chains; the stream is deterministic for a fixed seed.
pub struct GibbsSampler {
    spec: FactorSpec,
    theta: Theta,
    idx: SiteIndex,
    chains: Vec<ChainState>,
    thin: usize,
    next_chain: usize,
}

impl GibbsSampler {
    pub fn new(theta: &Theta, spec: &FactorSpec, cfg: &GibbsConfig) -> Result<Self> {
        spec.check_theta(theta)?;
        cfg.validate()?;
        let idx = SiteIndex::build(spec);
        let mut chains: Vec<ChainState> = (0..cfg.chains)
            .map(|c| ChainState::new(spec.m(), cfg.seed, c as u64))
            .collect();
        for chain in &mut chains {
            for _ in 0..cfg.burn_in {
                chain.sweep(spec, theta, &idx);
            }
        }
        Ok(GibbsSampler {
            spec: spec.clone(),
            theta: theta.clone(),
            idx,
            chains,
            thin: cfg.thin,
            next_chain: 0,
        })
    }

    /// Advances the next chain by `thin` sweeps and returns its state.
    pub fn next_state(&mut self) -> (&[i8], i8) {
        let c = self.next_chain;
        self.next_chain = (self.next_chain + 1) % self.chains.len();
        let chain = &mut self.chains[c];
        for _ in 0..self.thin {
            chain.sweep(&self.spec, &self.theta, &self.idx);
        }
        (&chain.lam, chain.y)
    }
}

impl Iterator for GibbsSampler {
    type Item = (Vec<i8>, i8);

    fn next(&mut self) -> Option<Self::Item> {
        let (lam, y) = self.next_state();
        Some((lam.to_vec(), y))
    }
}

/// Result of a contrastive fit: final weights plus the exact per-epoch data
/// log-likelihood when `m` is small enough to enumerate.
#[derive(Debug, Clone)]
pub struct FactorFit {
    pub theta: Theta,
    pub objective_trace: Vec<f64>,
}

// A single parameter step larger than this (inf-norm) invalidates the
// persistent chain, which is then re-burned.
const CHAIN_RESET_STEP: f64 = 0.5;

/// Maximum-marginal-likelihood fit by contrastive stochastic gradient ascent:
/// per example, the sufficient statistics of an exact conditional sample
/// (class drawn given the observed votes) minus those of an unconditional
/// Gibbs sample drive the update, and the weights are clamped to the box
/// after every step. The unconditional chain persists across steps, advancing
/// `thin` sweeps per draw. Deterministic for fixed seeds.
///
/// `cfg.target_eps` is ignored here: the theory step size for this model
/// depends on a strong-concavity constant that is not observable, so
/// `cfg.step_size` is always used.
pub fn fit_sgd_gibbs(
    labels: &LabelMatrix,
    spec: &FactorSpec,
    bounds: &ThetaBounds,
    cfg: &TrainConfig,
    gibbs: &GibbsConfig,
) -> Result<FactorFit> {
    cfg.validate()?;
    gibbs.validate()?;
    if labels.n() == 0 {
        return Err(Error::Invalid("cannot fit on an empty label matrix".into()));
    }
    if labels.m() != spec.m() {
        return Err(Error::Dimension(format!(
            "label matrix has m={}, spec has m={}",
            labels.m(),
            spec.m()
        )));
    }
    if bounds.len() != spec.len() {
        return Err(Error::Dimension(format!(
            "bounds cover {} weights, spec has M={}",
            bounds.len(),
            spec.len()
        )));
    }

    let n = labels.n();
    let total = spec.len();
    let idx = SiteIndex::build(spec);
    let mut theta = Theta::zeros(total);
    bounds.clamp_into(&mut theta.weights);

    let mut chain = ChainState::new(spec.m(), gibbs.seed, 0);
    for _ in 0..gibbs.burn_in {
        chain.sweep(spec, &theta, &idx);
    }

    let rows: Vec<Vec<i8>> = (0..n).map(|r| labels.row_dense(r)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let eta = cfg.step_size;
    let batch = cfg.batch_size.min(n);

    let mut h_cond = vec![0i8; total];
    let mut h_unc = vec![0i8; total];
    let mut accum = vec![0.0f64; total];
    let mut trace = Vec::new();
    let enumerable = spec.m() <= ENUMERATION_GUARD_M;

    for _ in 0..cfg.epochs {
        if batch < n {
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        }
        for chunk in order.chunks(batch) {
            accum.fill(0.0);
            for &x in chunk {
                for _ in 0..gibbs.thin {
                    chain.sweep(spec, &theta, &idx);
                }
                spec.eval_into(&chain.lam, chain.y, &mut h_unc);
                let y_bar = spec.conditional_sample_y(&theta, &rows[x], &mut rng)?;
                spec.eval_into(&rows[x], y_bar, &mut h_cond);
                for f in 0..total {
                    accum[f] += (h_cond[f] - h_unc[f]) as f64;
                }
            }
            let inv = eta / chunk.len() as f64;
            let mut max_step = 0.0f64;
            for f in 0..total {
                let step = inv * accum[f];
                theta.weights[f] += step;
                max_step = max_step.max(step.abs());
            }
            bounds.clamp_into(&mut theta.weights);
            if max_step > CHAIN_RESET_STEP {
                for _ in 0..gibbs.burn_in {
                    chain.sweep(spec, &theta, &idx);
                }
            }
        }
        if enumerable {
            trace.push(spec.log_marginal_data(&theta, labels)?);
        }
    }

    Ok(FactorFit {
        theta,
        objective_trace: trace,
    })
}
