//! Monte Carlo checks of the concentration bounds.
//!
//! Each experiment draws `trials` independent datasets, evaluates a statistic
//! per trial, and counts trials where the bound's bad event occurs. Trial `t`
//! uses seed `derive_seed(master_seed, t)`, so outcomes do not depend on the
//! thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::evaluation::separability;
use crate::measures::{max_total_correlation, total_correlation};
use crate::model::BmmParams;
use crate::params::{pureness_threshold, DimCap};
use crate::rng::derive_seed;
use crate::sampler::{sample_bmm, sample_labels};
use crate::theory::{self, Bound};

/// Two-sided confidence level of the reported intervals.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// `D(Q) <= tau` on a mixture block.
    Lemma1,
    /// `D(Q) >= tau` on a single Bernoulli model.
    Lemma2,
    /// `D_max <= tau` on a mixture.
    Lemma3Mixture,
    /// `D_max >= tau` on a single Bernoulli model.
    Lemma3Pure,
    /// Some component receives fewer than `n w_k / 2` rows.
    MinCluster,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Lemma1 => "lemma1",
            Experiment::Lemma2 => "lemma2",
            Experiment::Lemma3Mixture => "lemma3_mixture",
            Experiment::Lemma3Pure => "lemma3_pure",
            Experiment::MinCluster => "min_cluster",
        }
    }
}

fn default_strict() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub model: BmmParams,
    /// Columns of the model to sample; all columns when absent.
    #[serde(default)]
    pub columns: Option<Vec<usize>>,
    #[serde(default, with = "crate::real::option")]
    pub epsilon: Option<f64>,
    #[serde(default, with = "crate::real::option")]
    pub delta: Option<f64>,
    #[serde(default, with = "crate::real::option")]
    pub alpha: Option<f64>,
    /// Overrides the experiment's default threshold.
    #[serde(default, with = "crate::real::option")]
    pub tau: Option<f64>,
    /// Sub-dimension of the MTC experiments.
    #[serde(default)]
    pub d: Option<usize>,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Reject configurations violating the bound's preconditions. When off,
    /// violations are reported and the bound comparison is skipped.
    #[serde(default = "default_strict")]
    pub strict: bool,
    #[serde(skip, default)]
    pub dim_cap: DimCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preconditions {
    pub satisfied: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    #[serde(with = "crate::real")]
    pub statistic: f64,
    pub bad_event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutcome {
    pub experiment: Experiment,
    pub n: usize,
    pub d: usize,
    #[serde(with = "crate::real::option")]
    pub tau: Option<f64>,
    pub hits: usize,
    pub trials: usize,
    #[serde(with = "crate::real")]
    pub frequency: f64,
    #[serde(with = "crate::real")]
    pub confidence: f64,
    #[serde(with = "crate::real")]
    pub cp_lower: f64,
    #[serde(with = "crate::real")]
    pub cp_upper: f64,
    pub bound: Bound,
    /// `cp_upper <= bound`; `None` when the bound is vacuous or its
    /// preconditions fail.
    pub pass: Option<bool>,
    pub preconditions: Preconditions,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl McOutcome {
    /// Binomial standard error of the frequency.
    pub fn standard_error(&self) -> f64 {
        let p = self.frequency;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Clopper-Pearson interval for `hits` successes in `trials` at two-sided
/// level `confidence`.
pub fn clopper_pearson(hits: usize, trials: usize, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || hits > trials {
        return Err(Error::Domain(format!("invalid binomial count {hits}/{trials}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence = {confidence} must lie in (0, 1)")));
    }
    let tail = (1.0 - confidence) / 2.0;
    let (x, n) = (hits as f64, trials as f64);
    let lower = if hits == 0 {
        0.0
    } else {
        beta_quantile(tail, x, n - x + 1.0)
    };
    let upper = if hits == trials {
        1.0
    } else {
        beta_quantile(1.0 - tail, x + 1.0, n - x)
    };
    Ok((lower, upper))
}

/// Inverse of the regularized incomplete beta function by bisection.
fn beta_quantile(q: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn need(value: Option<f64>, name: &str, experiment: Experiment) -> Result<f64> {
    value.ok_or_else(|| Error::Invalid(format!("{} requires `{name}`", experiment.name())))
}

struct Setup {
    model: BmmParams,
    d: usize,
    tau: Option<f64>,
    bound: Bound,
    preconditions: Preconditions,
}

fn check_common(config: &McConfig) -> Result<()> {
    if config.n == 0 {
        return Err(Error::Invalid("n must be >= 1".into()));
    }
    if config.trials == 0 {
        return Err(Error::Invalid("trials must be >= 1".into()));
    }
    if let Some(eps) = config.epsilon {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Invalid(format!("epsilon = {eps} must lie in (0, 1)")));
        }
    }
    if let Some(delta) = config.delta {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Invalid(format!("delta = {delta} must lie in (0, 1]")));
        }
    }
    if let Some(alpha) = config.alpha {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Invalid(format!("alpha = {alpha} must lie in (0, 1]")));
        }
    }
    if let Some(tau) = config.tau {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Invalid(format!("tau = {tau} must be finite and >= 0")));
        }
    }
    Ok(())
}

/// Violations of the mixture bounds' preconditions: at least two components,
/// every weight at most `1 - epsilon`, and more than
/// `(1 + ln(K/epsilon)) / ((1 - epsilon) delta^2)` separated columns.
fn mixture_violations(model: &BmmParams, epsilon: f64, delta: f64) -> Result<Vec<String>> {
    let k = model.k();
    let mut out = Vec::new();
    if k < 2 {
        out.push(format!("K = {k} but a mixture needs K >= 2"));
    }
    for (i, &w) in model.weights().iter().enumerate() {
        if w > 1.0 - epsilon {
            out.push(format!("w[{i}] = {w} > 1 - epsilon = {}", 1.0 - epsilon));
        }
    }
    let l_sep = separability(model.frequencies(), delta)?.l_sep;
    let need = theory::lemma1_min_l_sep(epsilon, delta, k);
    if !(l_sep as f64 > need) {
        out.push(format!(
            "l_sep = {l_sep} is not > (1 + ln(K/epsilon)) / ((1 - epsilon) delta^2) = {need}"
        ));
    }
    Ok(out)
}

fn single_component_violations(model: &BmmParams) -> Vec<String> {
    match model.k() {
        1 => Vec::new(),
        k => vec![format!("K = {k} but a single Bernoulli model needs K = 1")],
    }
}

fn resolve_preconditions(config: &McConfig, violations: Vec<String>) -> Result<Preconditions> {
    if config.strict && !violations.is_empty() {
        return Err(Error::Precondition(violations.join("; ")));
    }
    Ok(Preconditions {
        satisfied: violations.is_empty(),
        violations,
    })
}

/// Threshold for the pure-model experiments: explicit `tau`, else the
/// clusterer's threshold from `alpha`, else the known-`K` threshold.
fn pure_tau(config: &McConfig, experiment: Experiment) -> Result<f64> {
    if let Some(tau) = config.tau {
        return Ok(tau);
    }
    let eps = need(config.epsilon, "epsilon or tau", experiment)?;
    Ok(match config.alpha {
        Some(alpha) => pureness_threshold(alpha, eps),
        None => theory::lemma1_tau(eps, config.model.k()),
    })
}

fn setup(experiment: Experiment, config: &McConfig) -> Result<Setup> {
    check_common(config)?;
    let model = match &config.columns {
        Some(cols) => config.model.restrict(cols)?,
        None => config.model.clone(),
    };
    let n = config.n as u64;
    let l = model.l();
    let mtc_d = || -> Result<usize> {
        let d = config
            .d
            .ok_or_else(|| Error::Invalid(format!("{} requires `d`", experiment.name())))?;
        config.dim_cap.check(d)?;
        if d == 0 || d > l {
            return Err(Error::DimensionExceedsColumns { d, l });
        }
        Ok(d)
    };
    match experiment {
        Experiment::Lemma1 => {
            let eps = need(config.epsilon, "epsilon", experiment)?;
            let delta = need(config.delta, "delta", experiment)?;
            config.dim_cap.check(l)?;
            let tau = config.tau.unwrap_or_else(|| theory::lemma1_tau(eps, model.k()));
            let preconditions = resolve_preconditions(config, mixture_violations(&model, eps, delta)?)?;
            Ok(Setup {
                bound: Bound::new(theory::bound_mixture_low_tc(n, l, tau), theory::ln_bound_mixture_low_tc(n, l, tau)),
                model,
                d: l,
                tau: Some(tau),
                preconditions,
            })
        }
        Experiment::Lemma2 => {
            config.dim_cap.check(l)?;
            let tau = pure_tau(config, experiment)?;
            let preconditions = resolve_preconditions(config, single_component_violations(&model))?;
            Ok(Setup {
                bound: Bound::new(theory::bound_pure_high_tc(n, l, tau), theory::ln_bound_pure_high_tc(n, l, tau)),
                model,
                d: l,
                tau: Some(tau),
                preconditions,
            })
        }
        Experiment::Lemma3Mixture => {
            let eps = need(config.epsilon, "epsilon", experiment)?;
            let delta = need(config.delta, "delta", experiment)?;
            let d = mtc_d()?;
            let tau = config.tau.unwrap_or_else(|| theory::lemma1_tau(eps, model.k()));
            let preconditions = resolve_preconditions(config, mixture_violations(&model, eps, delta)?)?;
            let l_sep = separability(model.frequencies(), delta)?.l_sep;
            Ok(Setup {
                bound: Bound::new(theory::bound_mtc_mixture(n, l_sep, d, tau), theory::ln_bound_mtc_mixture(n, l_sep, d, tau)),
                model,
                d,
                tau: Some(tau),
                preconditions,
            })
        }
        Experiment::Lemma3Pure => {
            let d = mtc_d()?;
            let tau = pure_tau(config, experiment)?;
            let preconditions = resolve_preconditions(config, single_component_violations(&model))?;
            Ok(Setup {
                bound: Bound::new(theory::bound_mtc_pure(n, l, d, tau), theory::ln_bound_mtc_pure(n, l, d, tau)),
                model,
                d,
                tau: Some(tau),
                preconditions,
            })
        }
        Experiment::MinCluster => {
            let w = model.weights();
            let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
            let alpha = config.alpha.unwrap_or(min_w);
            let mut violations = Vec::new();
            if min_w < alpha {
                violations.push(format!("min weight {min_w} < alpha = {alpha}"));
            }
            let preconditions = resolve_preconditions(config, violations)?;
            Ok(Setup {
                bound: Bound::new(
                    theory::bound_min_cluster(n, model.k(), alpha),
                    theory::ln_bound_min_cluster(n, model.k(), alpha),
                ),
                model,
                d: 0,
                tau: None,
                preconditions,
            })
        }
    }
}

/// Smallest `count_k / (n w_k)` over components with positive weight; the
/// bad event is this ratio falling below one half.
fn min_cluster_ratio(labels: &[u32], w: &[f64]) -> f64 {
    let mut counts = vec![0usize; w.len()];
    for &z in labels {
        counts[z as usize - 1] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .zip(w)
        .filter(|(_, &wk)| wk > 0.0)
        .map(|(&c, &wk)| c as f64 / (n * wk))
        .fold(f64::INFINITY, f64::min)
}

fn run_trial(experiment: Experiment, s: &Setup, config: &McConfig, trial: usize) -> Result<TrialRecord> {
    let seed = derive_seed(config.master_seed, trial as u64);
    let (statistic, bad_event) = match experiment {
        Experiment::MinCluster => {
            let labels = sample_labels(s.model.weights(), config.n, seed);
            let r = min_cluster_ratio(&labels, s.model.weights());
            (r, r < 0.5)
        }
        _ => {
            let data = sample_bmm(&s.model, config.n, seed)?.data;
            let tau = s.tau.expect("correlation experiments carry a threshold");
            match experiment {
                Experiment::Lemma1 => {
                    let v = total_correlation(&data, config.dim_cap)?;
                    (v, v <= tau)
                }
                Experiment::Lemma2 => {
                    let v = total_correlation(&data, config.dim_cap)?;
                    (v, v >= tau)
                }
                Experiment::Lemma3Mixture => {
                    let v = max_total_correlation(&data, s.d, None, 0, config.dim_cap)?.value;
                    (v, v <= tau)
                }
                Experiment::Lemma3Pure => {
                    let v = max_total_correlation(&data, s.d, None, 0, config.dim_cap)?.value;
                    (v, v >= tau)
                }
                Experiment::MinCluster => unreachable!(),
            }
        }
    };
    Ok(TrialRecord {
        trial,
        statistic,
        bad_event,
    })
}

/// Runs `experiment` under `config`. A config naming a different experiment
/// is rejected.
pub fn run_experiment(experiment: Experiment, config: &McConfig) -> Result<McOutcome> {
    if let Some(named) = config.experiment {
        if named != experiment {
            return Err(Error::Invalid(format!(
                "config names experiment `{}` but `{}` was requested",
                named.name(),
                experiment.name()
            )));
        }
    }
    let s = setup(experiment, config)?;
    let records = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(experiment, &s, config, t))
        .collect::<Result<Vec<_>>>()?;
    let hits = records.iter().filter(|r| r.bad_event).count();
    let (cp_lower, cp_upper) = clopper_pearson(hits, config.trials, CONFIDENCE)?;
    let pass = (s.preconditions.satisfied && !s.bound.vacuous).then_some(cp_upper <= s.bound.value);
    Ok(McOutcome {
        experiment,
        n: config.n,
        d: s.d,
        tau: s.tau,
        hits,
        trials: config.trials,
        frequency: hits as f64 / config.trials as f64,
        confidence: CONFIDENCE,
        cp_lower,
        cp_upper,
        bound: s.bound,
        pass,
        preconditions: s.preconditions,
        records,
    })
}

pub fn mc_lemma1(config: &McConfig) -> Result<McOutcome> {
    run_experiment(Experiment::Lemma1, config)
}

pub fn mc_lemma2(config: &McConfig) -> Result<McOutcome> {
    run_experiment(Experiment::Lemma2, config)
}

/// Mixture variant when `mixture` is set, pure variant otherwise.
pub fn mc_lemma3(config: &McConfig, mixture: bool) -> Result<McOutcome> {
    let e = if mixture {
        Experiment::Lemma3Mixture
    } else {
        Experiment::Lemma3Pure
    };
    run_experiment(e, config)
}

pub fn mc_min_cluster(config: &McConfig) -> Result<McOutcome> {
    run_experiment(Experiment::MinCluster, config)
}

/// Writes `trial,statistic,bad_event` rows.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["trial", "statistic", "bad_event"]).map_err(fmt)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            crate::real::fmt17(r.statistic),
            u8::from(r.bad_event).to_string(),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
