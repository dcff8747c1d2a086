use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the sub-dimension `d`, bounding joint tables at `2^20` cells.
pub const DEFAULT_DIM_CAP: usize = 20;
/// Environment variable that overrides [`DEFAULT_DIM_CAP`] in the CLI.
pub const DIM_CAP_ENV: &str = "BMM_MTC_DIM_CAP";
/// No cap may exceed this; a `2^32`-cell table is already 32 GiB of counts.
pub const MAX_DIM_CAP: usize = 32;

/// Upper limit on the width of empirical joint tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimCap(usize);

impl DimCap {
    pub const DEFAULT: DimCap = DimCap(DEFAULT_DIM_CAP);

    pub fn new(cap: usize) -> Result<Self> {
        if cap == 0 || cap > MAX_DIM_CAP {
            return Err(Error::Invalid(format!(
                "dimension cap must lie in 1..={MAX_DIM_CAP}, got {cap}"
            )));
        }
        Ok(DimCap(cap))
    }

    /// Reads [`DIM_CAP_ENV`], falling back to the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(DIM_CAP_ENV) {
            Ok(v) => {
                let cap = v.trim().parse().map_err(|_| {
                    Error::Invalid(format!("{DIM_CAP_ENV}={v:?} is not a positive integer"))
                })?;
                DimCap::new(cap)
            }
            Err(_) => Ok(DimCap::default()),
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn check(self, d: usize) -> Result<()> {
        if d > self.0 {
            Err(Error::InfeasibleDimension { d, cap: self.0 })
        } else {
            Ok(())
        }
    }
}

impl Default for DimCap {
    fn default() -> Self {
        DimCap(DEFAULT_DIM_CAP)
    }
}

/// User inputs of the clustering algorithm together with the derived
/// sub-dimension, pureness threshold and exponent coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    #[serde(with = "crate::real")]
    pub alpha: f64,
    #[serde(with = "crate::real")]
    pub delta: f64,
    #[serde(with = "crate::real")]
    pub epsilon: f64,
    pub l_sep: usize,
    pub d: usize,
    #[serde(with = "crate::real")]
    pub tau: f64,
    #[serde(with = "crate::real")]
    pub beta: f64,
}

/// Non-fatal conditions worth surfacing in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum ParamWarning {
    /// `d` is larger than the number of informative dimensions.
    DExceedsLSep { d: usize, l_sep: usize },
    /// `tau >= (d - 1) ln 2`, the largest possible total correlation, so the
    /// pureness test accepts everything.
    VacuousThreshold {
        #[serde(with = "crate::real")]
        tau: f64,
        #[serde(with = "crate::real")]
        max_total_correlation: f64,
    },
}

/// Real-valued sub-dimension `(1-α) / (2 (αδ)² (1-ε)) · (1 + ln(1/(αε)))`.
pub fn sub_dimension_real(alpha: f64, delta: f64, epsilon: f64) -> f64 {
    let ad = alpha * delta;
    (1.0 - alpha) / (2.0 * ad * ad * (1.0 - epsilon)) * (1.0 + (1.0 / (alpha * epsilon)).ln())
}

/// Pureness threshold `(ε/2)(1 + ln(1/(αε)))`.
pub fn pureness_threshold(alpha: f64, epsilon: f64) -> f64 {
    epsilon / 2.0 * (1.0 + (1.0 / (alpha * epsilon)).ln())
}

/// Exponent coefficient `τ² / (d⁴ 2^{d+1})`.
pub fn beta_coefficient(tau: f64, d: usize) -> f64 {
    let d = d as f64;
    tau * tau / (d.powi(4) * (d + 1.0).exp2())
}

pub fn derive_algo_params(
    alpha: f64,
    delta: f64,
    epsilon: f64,
    l_sep: usize,
    d_override: Option<usize>,
    cap: DimCap,
) -> Result<AlgoParams> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Invalid(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Invalid(format!("delta = {delta} must lie in (0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if l_sep == 0 {
        return Err(Error::Invalid("l_sep must be >= 1".into()));
    }
    let d = match d_override {
        Some(0) => return Err(Error::Invalid("d override must be >= 1".into())),
        Some(d) => d,
        // α = 1 zeroes the formula; a one-column sub-matrix is the smallest test.
        None => (sub_dimension_real(alpha, delta, epsilon).ceil() as usize).max(1),
    };
    cap.check(d)?;
    let tau = pureness_threshold(alpha, epsilon);
    let beta = beta_coefficient(tau, d);
    Ok(AlgoParams {
        alpha,
        delta,
        epsilon,
        l_sep,
        d,
        tau,
        beta,
    })
}

impl AlgoParams {
    /// `⌈1/α⌉`, the largest cluster count the algorithm tries.
    pub fn kappa_max(&self) -> usize {
        ((1.0 / self.alpha).ceil() as usize).max(1)
    }

    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        if self.d > self.l_sep {
            out.push(ParamWarning::DExceedsLSep {
                d: self.d,
                l_sep: self.l_sep,
            });
        }
        let max_tc = (self.d as f64 - 1.0) * std::f64::consts::LN_2;
        if self.tau >= max_tc {
            out.push(ParamWarning::VacuousThreshold {
                tau: self.tau,
                max_total_correlation: max_tc,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_examples() {
        let p = derive_algo_params(0.5, 0.5, 0.2, 20, None, DimCap::default()).unwrap();
        assert!((sub_dimension_real(0.5, 0.5, 0.2) - 16.512925).abs() < 1e-6);
        assert_eq!(p.d, 17);
        assert!((p.tau - 0.330259).abs() < 1e-6);

        let err = derive_algo_params(0.5, 0.4, 0.1, 40, None, DimCap::default()).unwrap_err();
        assert!((sub_dimension_real(0.5, 0.4, 0.1) - 27.748).abs() < 1e-3);
        assert!(matches!(err, Error::InfeasibleDimension { d: 28, cap: 20 }));

        let p = derive_algo_params(0.5, 0.5, 0.2, 20, Some(3), DimCap::default()).unwrap();
        assert_eq!(p.d, 3);
        assert!((p.tau - 0.330259).abs() < 1e-6);
        assert!((p.beta - p.tau * p.tau / (81.0 * 16.0)).abs() < 1e-18);
        assert!((p.beta / 8.417e-5 - 1.0).abs() < 5e-4);
    }

    #[test]
    fn input_validation() {
        let cap = DimCap::default();
        assert!(derive_algo_params(0.0, 0.5, 0.2, 1, None, cap).is_err());
        assert!(derive_algo_params(1.5, 0.5, 0.2, 1, None, cap).is_err());
        assert!(derive_algo_params(0.5, 0.0, 0.2, 1, None, cap).is_err());
        assert!(derive_algo_params(0.5, 0.5, 1.0, 1, None, cap).is_err());
        assert!(derive_algo_params(0.5, 0.5, 0.2, 0, None, cap).is_err());
        assert!(derive_algo_params(0.5, 0.5, 0.2, 1, Some(0), cap).is_err());
        assert!(derive_algo_params(f64::NAN, 0.5, 0.2, 1, None, cap).is_err());
        assert!(DimCap::new(0).is_err());
        assert!(DimCap::new(33).is_err());
    }

    #[test]
    fn alpha_one_gives_d_one() {
        let p = derive_algo_params(1.0, 0.5, 0.2, 4, None, DimCap::default()).unwrap();
        assert_eq!(p.d, 1);
        assert_eq!(p.kappa_max(), 1);
        assert!(p.warnings().iter().any(|w| matches!(w, ParamWarning::VacuousThreshold { .. })));
    }

    #[test]
    fn all_derived_values_positive() {
        for &a in &[0.1, 0.3, 0.5, 0.9] {
            for &dl in &[0.3, 0.6, 1.0] {
                for &e in &[0.05, 0.2, 0.5] {
                    let p = derive_algo_params(a, dl, e, 10, None, DimCap::new(32).unwrap());
                    if let Ok(p) = p {
                        assert!(p.d >= 1 && p.tau > 0.0 && p.beta > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn d_is_monotone_non_increasing() {
        let grid: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
        let d = |a: f64, dl: f64, e: f64| sub_dimension_real(a, dl, e).ceil();
        for &a in &grid {
            for &dl in &grid {
                for &e in &grid {
                    for w in grid.windows(2) {
                        let (x0, x1) = (w[0], w[1]);
                        if d(x1, dl, e) >= 1.0 {
                            assert!(d(x1, dl, e) <= d(x0, dl, e), "alpha {x0}->{x1}");
                        }
                        if d(a, x1, e) >= 1.0 {
                            assert!(d(a, x1, e) <= d(a, x0, e), "delta {x0}->{x1}");
                        }
                        // In epsilon the real-valued formula decreases only while
                        // eps (1 + ln(1/(alpha eps))) <= 1 - eps.
                        let decreasing = |x: f64| x * (1.0 + (1.0 / (a * x)).ln()) <= 1.0 - x;
                        if decreasing(x0) && decreasing(x1) && d(a, dl, x1) >= 1.0 {
                            assert!(d(a, dl, x1) <= d(a, dl, x0), "epsilon {x0}->{x1}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn d_can_increase_with_epsilon_for_small_alpha() {
        assert!(sub_dimension_real(0.05, 0.5, 0.2) > sub_dimension_real(0.05, 0.5, 0.15));
        assert!(sub_dimension_real(0.5, 0.5, 0.2) < sub_dimension_real(0.5, 0.5, 0.15));
    }

    #[test]
    fn json_keys_and_bit_exact_round_trip() {
        let p = derive_algo_params(0.37, 0.81, 0.13, 9, Some(4), DimCap::default()).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["alpha", "beta", "d", "delta", "epsilon", "l_sep", "tau"]);
        let back: AlgoParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back.tau.to_bits(), p.tau.to_bits());
        assert_eq!(back.beta.to_bits(), p.beta.to_bits());
        assert_eq!(back.alpha.to_bits(), p.alpha.to_bits());
        assert_eq!(back, p);
    }
}
