//! Right-hand sides of the concentration bounds and sample-size thresholds.
//!
//! Each bound has a direct form and a log-space form; the direct form falls
//! back to log space when a combinatorial prefactor overflows. Values of 1
//! or more are reported as vacuous rather than clamped.

use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::info::entropy_discrete;
use crate::measures::binomial;
use crate::model::BmmParams;
use crate::params::{beta_coefficient, AlgoParams};

const LN_2: f64 = std::f64::consts::LN_2;

/// `prefactor * exp(-rate)`, evaluated directly while the prefactor is
/// finite and in log space otherwise.
fn scaled_exp(prefactor: f64, ln_prefactor: f64, rate: f64) -> f64 {
    if prefactor.is_finite() {
        prefactor * (-rate).exp()
    } else {
        (ln_prefactor - rate).exp()
    }
}

fn pow2(d: usize) -> f64 {
    2f64.powi(d as i32 + 1)
}

/// `ln(2^{d+1} e^{-beta n})`.
pub fn ln_bound_mixture_low_tc(n: u64, d: usize, tau: f64) -> f64 {
    (d as f64 + 1.0) * LN_2 - beta_coefficient(tau, d) * n as f64
}

/// Probability bound on `D(Q) <= tau` for a non-pure `d`-column block:
/// `2^{d+1} e^{-beta n}`.
pub fn bound_mixture_low_tc(n: u64, d: usize, tau: f64) -> f64 {
    pow2(d) * (-beta_coefficient(tau, d) * n as f64).exp()
}

/// `ln(2^{d+1} e^{-beta d^2 n})`.
pub fn ln_bound_pure_high_tc(n: u64, d: usize, tau: f64) -> f64 {
    let d2 = (d * d) as f64;
    (d as f64 + 1.0) * LN_2 - beta_coefficient(tau, d) * d2 * n as f64
}

/// Probability bound on `D(Q) >= tau` for a single Bernoulli model:
/// `2^{d+1} e^{-beta d^2 n}`.
pub fn bound_pure_high_tc(n: u64, d: usize, tau: f64) -> f64 {
    pow2(d) * (-beta_coefficient(tau, d) * (d * d) as f64 * n as f64).exp()
}

fn mtc_mixture_rate(n: u64, l_sep: usize, d: usize, tau: f64) -> f64 {
    tau * tau * n as f64 * l_sep as f64 / ((d as f64).powi(5) * pow2(d))
}

/// `ln(4^l_sep exp(-tau^2 n l_sep / (d^5 2^{d+1})))`.
pub fn ln_bound_mtc_mixture(n: u64, l_sep: usize, d: usize, tau: f64) -> f64 {
    2.0 * LN_2 * l_sep as f64 - mtc_mixture_rate(n, l_sep, d, tau)
}

/// Probability bound on `D_max <= tau` for a mixture with `l_sep`
/// separated columns.
pub fn bound_mtc_mixture(n: u64, l_sep: usize, d: usize, tau: f64) -> f64 {
    let prefactor = 4f64.powi(l_sep.min(i32::MAX as usize) as i32);
    scaled_exp(prefactor, 2.0 * LN_2 * l_sep as f64, mtc_mixture_rate(n, l_sep, d, tau))
}

fn mtc_pure_rate(n: u64, d: usize, tau: f64) -> f64 {
    tau * tau * n as f64 / ((d * d) as f64 * pow2(d))
}

/// `ln(C(L,d) 2^{d+1} exp(-tau^2 n / (d^2 2^{d+1})))`.
pub fn ln_bound_mtc_pure(n: u64, l: usize, d: usize, tau: f64) -> f64 {
    ln_binomial(l as u64, d as u64) + (d as f64 + 1.0) * LN_2 - mtc_pure_rate(n, d, tau)
}

/// Probability bound on `D_max >= tau` for a single Bernoulli model over
/// `l` columns.
pub fn bound_mtc_pure(n: u64, l: usize, d: usize, tau: f64) -> f64 {
    let binom = binomial(l, d);
    let prefactor = if binom == u128::MAX { f64::INFINITY } else { binom as f64 * pow2(d) };
    let ln_prefactor = ln_binomial(l as u64, d as u64) + (d as f64 + 1.0) * LN_2;
    scaled_exp(prefactor, ln_prefactor, mtc_pure_rate(n, d, tau))
}

/// Probability bound on some cluster holding fewer than `n w_k / 2` rows:
/// `K e^{-n alpha^2 / 2}`.
pub fn bound_min_cluster(n: u64, k: usize, alpha: f64) -> f64 {
    k as f64 * (-(n as f64) * alpha * alpha / 2.0).exp()
}

pub fn ln_bound_min_cluster(n: u64, k: usize, alpha: f64) -> f64 {
    (k as f64).ln() - n as f64 * alpha * alpha / 2.0
}

/// Smallest `n` making [`bound_min_cluster`] at most `zeta / 3`:
/// `ceil((2 / alpha^2) ln(3K / zeta))`, floored at 0.
pub fn min_n_for_cluster_sizes(alpha: f64, k: usize, zeta: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(zeta > 0.0) {
        return Err(Error::Domain(format!("zeta = {zeta} must be > 0")));
    }
    if k == 0 {
        return Err(Error::Domain("K must be >= 1".into()));
    }
    let v = 2.0 / (alpha * alpha) * (3.0 * k as f64 / zeta).ln();
    Ok(v.ceil().max(0.0) as u64)
}

/// Lemma-style threshold with a known component count:
/// `(epsilon / 2)(1 + ln(K / epsilon))`.
pub fn lemma1_tau(epsilon: f64, k: usize) -> f64 {
    epsilon / 2.0 * (1.0 + (k as f64 / epsilon).ln())
}

/// Minimum separated-column count under which a `K`-component model meets
/// the low-correlation lemma's precondition: `(1 + ln(K/eps)) / ((1-eps) delta^2)`.
pub fn lemma1_min_l_sep(epsilon: f64, delta: f64, k: usize) -> f64 {
    (1.0 + (k as f64 / epsilon).ln()) / ((1.0 - epsilon) * delta * delta)
}

/// Lower bound `2 sum_l var(A_l) - H(w)` on the asymptotic total
/// correlation, where `A_l` takes value `p[k][l]` with probability `w[k]`.
pub fn asymptotic_lower_bound(model: &BmmParams) -> Result<f64> {
    let w = model.weights();
    let mean = model.mean_frequencies();
    let mut var_sum = 0.0;
    for (l, &mu) in mean.iter().enumerate() {
        var_sum += w
            .iter()
            .zip(model.frequencies())
            .map(|(&wk, row)| wk * (row[l] - mu).powi(2))
            .sum::<f64>();
    }
    Ok(2.0 * var_sum - entropy_discrete(w)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Thresholds {
    #[serde(with = "crate::real")]
    pub l_sep_min: f64,
    #[serde(with = "crate::real")]
    pub n_min: f64,
    #[serde(with = "crate::real")]
    pub b: f64,
    #[serde(with = "crate::real")]
    pub c: f64,
    pub note: &'static str,
}

pub const SYMBOLIC_CONSTANTS_NOTE: &str =
    "B and C are unspecified constants; values shown are for the supplied B and C only";

/// Separated-column and sample-size thresholds of the main guarantee for
/// caller-supplied constants `b` and `c`.
pub fn theorem1_thresholds(
    alpha: f64,
    delta: f64,
    epsilon: f64,
    zeta: f64,
    l: usize,
    b: f64,
    c: f64,
) -> Result<Theorem1Thresholds> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if !(zeta > 0.0) {
        return Err(Error::Domain(format!("zeta = {zeta} must be > 0")));
    }
    if l == 0 {
        return Err(Error::Domain("L must be >= 1".into()));
    }
    let exponent = 2.0 + (1.0 - alpha) / (2.0 * (alpha * delta).powi(2));
    let core = (1.0 / epsilon).ln().powi(3) / epsilon.powf(exponent);
    Ok(Theorem1Thresholds {
        l_sep_min: b * core,
        n_min: c * core * (l as f64 / zeta).ln(),
        b,
        c,
        note: SYMBOLIC_CONSTANTS_NOTE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    #[serde(with = "crate::real")]
    pub value: f64,
    #[serde(with = "crate::real")]
    pub ln_value: f64,
    pub vacuous: bool,
}

impl Bound {
    pub fn new(value: f64, ln_value: f64) -> Self {
        Bound {
            value,
            ln_value,
            vacuous: value >= 1.0,
        }
    }
}

/// Context for a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: u64,
    pub l: usize,
    /// Component count; `ceil(1/alpha)` when unknown.
    pub k: Option<usize>,
    pub zeta: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: u64,
    pub d: usize,
    pub l: usize,
    pub l_sep: usize,
    pub k: usize,
    #[serde(with = "crate::real")]
    pub alpha: f64,
    #[serde(with = "crate::real")]
    pub delta: f64,
    #[serde(with = "crate::real")]
    pub epsilon: f64,
    #[serde(with = "crate::real")]
    pub zeta: f64,
    #[serde(with = "crate::real")]
    pub tau: f64,
    #[serde(with = "crate::real")]
    pub beta: f64,
    pub mixture_low_tc: Bound,
    pub pure_high_tc: Bound,
    pub mtc_mixture: Bound,
    pub mtc_pure: Bound,
    pub min_cluster: Bound,
    pub min_n_for_cluster_sizes: u64,
    pub theorem1: Theorem1Thresholds,
}

pub fn bound_report(params: &AlgoParams, inputs: &BoundInputs) -> Result<BoundReport> {
    let k = inputs.k.unwrap_or_else(|| params.kappa_max());
    let (n, d, tau) = (inputs.n, params.d, params.tau);
    Ok(BoundReport {
        n,
        d,
        l: inputs.l,
        l_sep: params.l_sep,
        k,
        alpha: params.alpha,
        delta: params.delta,
        epsilon: params.epsilon,
        zeta: inputs.zeta,
        tau,
        beta: params.beta,
        mixture_low_tc: Bound::new(
            bound_mixture_low_tc(n, d, tau),
            ln_bound_mixture_low_tc(n, d, tau),
        ),
        pure_high_tc: Bound::new(bound_pure_high_tc(n, d, tau), ln_bound_pure_high_tc(n, d, tau)),
        mtc_mixture: Bound::new(
            bound_mtc_mixture(n, params.l_sep, d, tau),
            ln_bound_mtc_mixture(n, params.l_sep, d, tau),
        ),
        mtc_pure: Bound::new(
            bound_mtc_pure(n, inputs.l, d, tau),
            ln_bound_mtc_pure(n, inputs.l, d, tau),
        ),
        min_cluster: Bound::new(
            bound_min_cluster(n, k, params.alpha),
            ln_bound_min_cluster(n, k, params.alpha),
        ),
        min_n_for_cluster_sizes: min_n_for_cluster_sizes(params.alpha, k, inputs.zeta)?,
        theorem1: theorem1_thresholds(
            params.alpha,
            params.delta,
            params.epsilon,
            inputs.zeta,
            inputs.l,
            inputs.b,
            inputs.c,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_algo_params, DimCap};

    const TAU: f64 = 0.330259;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_samples() {
        assert_eq!(bound_mixture_low_tc(0, 3, 0.33), 16.0);
        assert_eq!(bound_pure_high_tc(0, 2, 0.7), 8.0);
        assert_eq!(bound_mtc_mixture(0, 2, 3, 0.33), 16.0);
    }

    #[test]
    fn direct_formula_examples() {
        let beta = TAU * TAU / (81.0 * 16.0);
        let want = 16.0 * (-beta * 1e6).exp();
        assert!(rel(bound_mixture_low_tc(1_000_000, 3, TAU), want) < 1e-10);
        assert!((want / 4.6e-36 - 1.0).abs() < 0.02);

        let want = 16.0 * (-9.0 * beta * 1e4).exp();
        assert!(rel(bound_pure_high_tc(10_000, 3, TAU), want) < 1e-10);
        assert!((want - 8.21e-3).abs() < 1e-4);

        let want = 28.0 * 8.0 * (-TAU * TAU * 1e4 / 32.0).exp();
        assert!(rel(bound_mtc_pure(10_000, 8, 2, TAU), want) < 1e-10);
        assert!((want / 3.5e-13 - 1.0).abs() < 0.05);
    }

    #[test]
    fn pure_over_mixture_ratio() {
        for n in [0u64, 10, 1000, 5000] {
            let beta = beta_coefficient(TAU, 3);
            let ratio = bound_pure_high_tc(n, 3, TAU) / bound_mixture_low_tc(n, 3, TAU);
            let want = (-beta * 8.0 * n as f64).exp();
            assert!((ratio - want).abs() <= 1e-12 * want.max(1e-300));
        }
    }

    #[test]
    fn pure_mtc_with_single_subset() {
        for n in [0u64, 7, 300] {
            let d = 3;
            let want = 16.0 * (-TAU * TAU * n as f64 / (9.0 * 16.0)).exp();
            assert!(rel(bound_mtc_pure(n, d, d, TAU), want) < 1e-12);
        }
    }

    #[test]
    fn log_space_matches_direct_evaluation() {
        // Compared wherever the direct product is a normal float.
        let close = |value: f64, ln_value: f64, direct: f64| {
            if direct.is_normal() {
                assert!(rel(value, direct) < 1e-10, "{value} vs {direct}");
                assert!(rel(ln_value.exp(), direct) < 1e-10, "{ln_value} vs {direct}");
            }
        };
        let mut compared = 0;
        for d in 1..=6usize {
            for l_sep in [1usize, 3, 10, 40] {
                for n in [0u64, 1, 50, 2000] {
                    let pow = 2f64.powi(d as i32 + 1);
                    let direct = 4f64.powi(l_sep as i32)
                        * (-TAU * TAU * n as f64 * l_sep as f64 / ((d as f64).powi(5) * pow)).exp();
                    close(
                        bound_mtc_mixture(n, l_sep, d, TAU),
                        ln_bound_mtc_mixture(n, l_sep, d, TAU),
                        direct,
                    );
                    let l = d + l_sep;
                    let binom = crate::measures::binomial(l, d) as f64;
                    let direct = binom * pow * (-TAU * TAU * n as f64 / ((d * d) as f64 * pow)).exp();
                    close(bound_mtc_pure(n, l, d, TAU), ln_bound_mtc_pure(n, l, d, TAU), direct);
                    let beta = TAU * TAU / ((d as f64).powi(4) * pow);
                    let direct = pow * (-beta * n as f64).exp();
                    close(bound_mixture_low_tc(n, d, TAU), ln_bound_mixture_low_tc(n, d, TAU), direct);
                    let direct = pow * (-beta * (d * d) as f64 * n as f64).exp();
                    close(bound_pure_high_tc(n, d, TAU), ln_bound_pure_high_tc(n, d, TAU), direct);
                    compared += 1;
                }
            }
        }
        assert_eq!(compared, 96);
    }

    #[test]
    fn huge_factors_stay_finite_in_log_space() {
        let ln = ln_bound_mtc_mixture(10, 2000, 2, TAU);
        assert!(ln.is_finite() && ln > 1000.0);
        assert_eq!(bound_mtc_mixture(10, 2000, 2, TAU), f64::INFINITY);
        assert!(ln_bound_mtc_pure(10, 5000, 20, TAU).is_finite());
    }

    #[test]
    fn strictly_decreasing_in_n() {
        for n in 0..200u64 {
            let m = n + 1;
            assert!(bound_mixture_low_tc(m, 3, TAU) < bound_mixture_low_tc(n, 3, TAU));
            assert!(bound_pure_high_tc(m, 3, TAU) < bound_pure_high_tc(n, 3, TAU));
            assert!(ln_bound_mtc_mixture(m, 4, 2, TAU) < ln_bound_mtc_mixture(n, 4, 2, TAU));
            assert!(ln_bound_mtc_pure(m, 8, 2, TAU) < ln_bound_mtc_pure(n, 8, 2, TAU));
            assert!(bound_min_cluster(m, 2, 0.5) < bound_min_cluster(n, 2, 0.5));
        }
    }

    #[test]
    fn cluster_size_threshold() {
        assert_eq!(min_n_for_cluster_sizes(0.5, 2, 0.1).unwrap(), 33);
        assert_eq!(min_n_for_cluster_sizes(1.0, 1, 3.0).unwrap(), 0);
        assert_eq!(min_n_for_cluster_sizes(1.0, 1, 30.0).unwrap(), 0);
        assert!(min_n_for_cluster_sizes(0.0, 1, 0.1).is_err());
        assert!(min_n_for_cluster_sizes(0.5, 1, 0.0).is_err());
        let mut prev = u64::MAX;
        for i in 1..50 {
            let zeta = i as f64 * 0.02;
            let v = min_n_for_cluster_sizes(0.4, 3, zeta).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = u64::MAX;
        for i in 1..=20 {
            let v = min_n_for_cluster_sizes(i as f64 * 0.05, 3, 0.1).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        // At the threshold the Hoeffding-style bound is at most zeta / 3.
        let n = min_n_for_cluster_sizes(0.5, 2, 0.1).unwrap();
        assert!(bound_min_cluster(n, 2, 0.5) <= 0.1 / 3.0);
        assert!(bound_min_cluster(n - 1, 2, 0.5) > 0.1 / 3.0);
    }

    #[test]
    fn theorem1_examples() {
        let t = theorem1_thresholds(0.5, 0.5, 0.2, 0.1, 100, 1.0, 1.0).unwrap();
        let independent = 5f64.ln().powi(3) / 0.2f64.powi(6);
        assert!(rel(t.l_sep_min, independent) < 1e-12);
        assert!((t.l_sep_min - 65130.0).abs() < 20.0);
        assert!(rel(t.n_min / t.l_sep_min, (100f64 / 0.1).ln()) < 1e-12);
        let t = theorem1_thresholds(0.5, 0.5, 0.2, 0.1, 100, 0.0, 2.0).unwrap();
        assert_eq!(t.l_sep_min, 0.0);
        assert!(theorem1_thresholds(0.5, 0.5, 0.0, 0.1, 100, 1.0, 1.0).is_err());
    }

    #[test]
    fn lemma1_constants() {
        assert!((lemma1_tau(0.2, 2) - 0.1 * (1.0 + 10f64.ln())).abs() < 1e-15);
        assert!((lemma1_min_l_sep(0.2, 0.9, 2) - (1.0 + 10f64.ln()) / (0.8 * 0.81)).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_lower_bound_values() {
        let m = BmmParams::new(vec![vec![0.1, 0.1], vec![0.9, 0.9]], vec![0.5, 0.5]).unwrap();
        let want = 2.0 * 2.0 * 0.16 - LN_2;
        assert!((asymptotic_lower_bound(&m).unwrap() - want).abs() < 1e-15);
        let single = BmmParams::single(vec![0.3, 0.6]).unwrap();
        assert_eq!(asymptotic_lower_bound(&single).unwrap(), 0.0);
    }

    #[test]
    fn report_flags_vacuous_bounds() {
        let p = derive_algo_params(0.5, 0.9, 0.2, 3, Some(3), DimCap::DEFAULT).unwrap();
        let inputs = BoundInputs {
            n: 500,
            l: 8,
            k: None,
            zeta: 0.1,
            b: 1.0,
            c: 1.0,
        };
        let r = bound_report(&p, &inputs).unwrap();
        assert_eq!(r.k, 2);
        assert!(r.mixture_low_tc.vacuous);
        assert!(r.mtc_mixture.vacuous);
        assert!(!r.min_cluster.vacuous);
        for b in [r.mixture_low_tc, r.pure_high_tc, r.mtc_mixture, r.mtc_pure, r.min_cluster] {
            assert!(b.value >= 0.0);
            assert_eq!(b.vacuous, b.value >= 1.0);
        }
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["theorem1"]["note"].as_str().unwrap().contains("constants"));
    }
}
