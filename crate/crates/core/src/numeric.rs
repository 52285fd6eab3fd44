//! Numerically stable helpers shared across the crate.

use std::f64::consts::TAU;

/// Stable `log(sum(exp(x_i)))` via the shift-by-max trick.
///
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Two-term log-sum-exp.
///
/// Commutative bit-for-bit: the shifted sum is `exp(lo - hi) + 1.0`, which
/// does not depend on argument order. Pairwise-symmetric distributions stay
/// exactly symmetric under convolution because of this.
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(n!)` by direct accumulation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Binomial coefficient `C(n, k)`, saturating at `u128::MAX`.
///
/// Each intermediate product `C(n, i-1) * (n - k + i)` is divisible by `i`,
/// so the running value stays an exact integer.
pub fn binomial_saturating(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        match acc.checked_mul((n - k + i) as u128) {
            Some(v) => acc = v / i as u128,
            None => return u128::MAX,
        }
    }
    acc
}

/// Number of ways to place `n_atoms` indistinguishable atoms on `n_sites`
/// sites: `C(n_atoms + n_sites - 1, n_sites - 1)`. Saturating.
pub fn composition_count(n_atoms: u64, n_sites: u64) -> u128 {
    if n_sites == 0 {
        return if n_atoms == 0 { 1 } else { 0 };
    }
    binomial_saturating(n_atoms + n_sites - 1, n_sites - 1)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w == TAU {
        0.0
    } else {
        w
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Total-variation distance between two probability vectors on a shared grid.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a grid");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum() {
        let values: [f64; 3] = [-1.0, -2.0, -3.0];
        let direct = values.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&values) - direct).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_handles_extremes() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            logsumexp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        let shifted = logsumexp(&[-1000.0, -1001.0]);
        let expected = -1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((shifted - expected).abs() < 1e-12);
    }

    #[test]
    fn logsumexp2_is_order_independent() {
        let a = -3.25;
        let b = -17.5;
        assert_eq!(logsumexp2(a, b).to_bits(), logsumexp2(b, a).to_bits());
        assert_eq!(logsumexp2(f64::NEG_INFINITY, a), a);
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial_saturating(7, 3), 35);
        assert_eq!(binomial_saturating(4, 0), 1);
        assert_eq!(binomial_saturating(3, 5), 0);
        assert_eq!(composition_count(4, 4), 35);
        assert_eq!(composition_count(2, 2), 3);
    }

    #[test]
    fn angles_wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!(angle_distance(0.1, TAU - 0.1) - 0.2 < 1e-12);
    }
}
