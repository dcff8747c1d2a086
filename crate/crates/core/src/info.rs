//! Entropy and divergence primitives. All logarithms are natural (nats).

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub(crate) fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Binary entropy `H(p) = -p ln p - (1-p) ln(1-p)`.
pub fn entropy_bernoulli(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("Bernoulli frequency {p} outside [0, 1]")));
    }
    Ok(-(xlnx(p) + xlnx(1.0 - p)))
}

/// Shannon entropy of a discrete distribution.
pub fn entropy_discrete(w: &[f64]) -> Result<f64> {
    check_probability_vector(w)?;
    Ok(-w.iter().map(|&x| xlnx(x)).sum::<f64>())
}

/// Validates non-negativity and unit sum within [`PROB_SUM_TOL`].
pub fn check_probability_vector(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if let Some((i, &x)) = w.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("entry {i} is negative or NaN: {x}")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// KL divergence between `Bern(x)` and `Bern(y)`.
///
/// Total on the reals: `x` outside `[0, 1]` gives `+inf`, as does a nonzero
/// coefficient over a vanishing denominator. Terms whose coefficient is zero
/// contribute nothing.
pub fn kl_bernoulli(x: f64, y: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return f64::INFINITY;
    }
    fn term(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }
    // Rounding can make the sum dip a hair below zero when x == y.
    (term(x, y) + term(1.0 - x, 1.0 - y)).max(0.0)
}
