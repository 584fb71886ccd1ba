//! Small numerically-stable primitives shared across the models.

/// log(1 + e^x) without overflow: max(x,0) + log1p(e^{-|x|}).
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// 1 / (1 + e^{-x}).
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(2 cosh x) = |x| + log1p(e^{-2|x|}).
pub(crate) fn ln_2cosh(x: f64) -> f64 {
    x.abs() + (-2.0 * x.abs()).exp().ln_1p()
}

/// sech^2(x), evaluated without overflowing cosh for large |x|.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn sech2(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let s = 2.0 * e / (1.0 + e * e);
    s * s
}

/// Stable per-purpose seed derivation (splitmix64 of base xor a tag).
pub(crate) fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// log(e^a + e^b), tolerating -inf inputs.
pub(crate) fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
