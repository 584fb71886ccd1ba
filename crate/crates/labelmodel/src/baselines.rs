//! Baseline labelers: majority vote and the if-then-return (ITR) scheme,
//! which assigns each example the first nonzero vote in a fixed ordering of
//! the labeling functions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::independent::IndependentParams;

/// Soft majority vote over one vote vector: 1 if the vote sum is positive,
/// 0 if negative, 0.5 on ties (including total abstention).
pub fn majority_vote(lam: &[i8]) -> f64 {
    let s: i32 = lam.iter().map(|&v| v as i32).sum();
    match s.signum() {
        1 => 1.0,
        -1 => 0.0,
        _ => 0.5,
    }
}

/// First nonzero vote along `order`; 0 when every function abstains.
pub fn itr_label(order: &[usize], lam: &[i8]) -> Result<i8> {
    validate_permutation(order, lam.len())?;
    for &k in order {
        if lam[k] != 0 {
            return Ok(lam[k]);
        }
    }
    Ok(0)
}

fn validate_permutation(order: &[usize], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(Error::Invalid(format!(
            "order has length {}, expected m={m}",
            order.len()
        )));
    }
    let mut seen = vec![false; m];
    for &k in order {
        if k >= m || seen[k] {
            return Err(Error::Invalid(format!(
                "order is not a permutation of 0..{m}"
            )));
        }
        seen[k] = true;
    }
    Ok(())
}

/// ITR ordering by descending true accuracy, ties broken by ascending index.
/// Only meaningful where the true accuracies are known (synthetic data).
pub fn oracle_itr_order(params: &IndependentParams) -> Vec<usize> {
    order_by_accuracy(params.alpha())
}

/// Indices sorted by descending accuracy, ties broken by ascending index.
pub fn order_by_accuracy(alpha: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| {
        alpha[b]
            .partial_cmp(&alpha[a])
            .expect("accuracies are finite")
            .then(a.cmp(&b))
    });
    order
}

/// A uniformly random ITR ordering.
pub fn random_itr_order(m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], rng);
    order
}

/// Maps an ITR output to a soft label: +1 -> 1, -1 -> 0, abstain -> 0.5.
pub fn itr_soft_label(label: i8) -> f64 {
    match label {
        1 => 1.0,
        -1 => 0.0,
        _ => 0.5,
    }
}
