//! Empirical total correlation of binary sub-matrices and its maximum over
//! column subsets.
//!
//! Outcomes of a `d`-column selection are indexed by reading the selected
//! bits as an integer, the first selected column being the least significant
//! bit. Marginal frequencies are normalized by the row count of the
//! sub-matrix itself.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_columns, Dataset};
use crate::error::{Error, Result};
use crate::info::{entropy_bernoulli, xlnx};
use crate::model::BmmParams;
use crate::params::DimCap;
use crate::rng::Substream;

/// Counts of every outcome of a `d`-column binary sub-matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalJoint {
    d: usize,
    m: u64,
    counts: Vec<u64>,
}

/// Column frequencies of a sub-matrix, kept with their integer numerators.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalFreqs {
    pub m: u64,
    pub ones: Vec<u64>,
    pub p_hat: Vec<f64>,
}

impl EmpiricalJoint {
    /// Joint counts of the rows of `y` restricted to `columns`.
    pub fn from_columns(y: &Dataset, columns: &[usize], cap: DimCap) -> Result<Self> {
        cap.check(columns.len())?;
        check_columns(columns, y.l())?;
        Ok(Self::count(y, columns))
    }

    /// Joint counts over all columns of `q`.
    pub fn from_matrix(q: &Dataset, cap: DimCap) -> Result<Self> {
        let all: Vec<usize> = (0..q.l()).collect();
        Self::from_columns(q, &all, cap)
    }

    fn count(y: &Dataset, columns: &[usize]) -> Self {
        let d = columns.len();
        let mut counts = vec![0u64; 1 << d];
        for i in 0..y.n() {
            counts[y.outcome_index(i, columns)] += 1;
        }
        EmpiricalJoint {
            d,
            m: y.n() as u64,
            counts,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.m as f64;
        self.counts.iter().map(|&c| c as f64 / m).collect()
    }

    pub fn marginals(&self) -> MarginalFreqs {
        let mut ones = vec![0u64; self.d];
        for (x, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (l, o) in ones.iter_mut().enumerate() {
                if (x >> l) & 1 == 1 {
                    *o += c;
                }
            }
        }
        let m = self.m as f64;
        let p_hat = ones.iter().map(|&o| o as f64 / m).collect();
        MarginalFreqs {
            m: self.m,
            ones,
            p_hat,
        }
    }

    /// Shannon entropy of the empirical joint distribution.
    pub fn entropy(&self) -> f64 {
        let m = self.m as f64;
        -self.counts.iter().map(|&c| xlnx(c as f64 / m)).sum::<f64>()
    }

    /// KL divergence from the empirical joint to the product of its
    /// marginals.
    ///
    /// Each term is evaluated as `ln c_x + (d-1) ln m - sum_l ln s_l(x)`
    /// with `s_l(x)` the integer count of rows agreeing with `x` on column
    /// `l`; `s_l(x) > 0` whenever `c_x > 0`, so every term is finite.
    pub fn total_correlation(&self) -> f64 {
        let marg = self.marginals();
        let m = self.m as f64;
        let ln_m = m.ln();
        let ln_one: Vec<f64> = marg.ones.iter().map(|&o| (o as f64).ln()).collect();
        let ln_zero: Vec<f64> = marg.ones.iter().map(|&o| ((self.m - o) as f64).ln()).collect();
        let mut total = 0.0;
        for (x, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut log_ratio = (c as f64).ln() + (self.d as f64 - 1.0) * ln_m;
            for l in 0..self.d {
                log_ratio -= if (x >> l) & 1 == 1 { ln_one[l] } else { ln_zero[l] };
            }
            total += c as f64 / m * log_ratio;
        }
        total.max(0.0)
    }

    /// The same quantity as `sum_l H(p_l) - H(joint)`.
    pub fn total_correlation_via_entropies(&self) -> f64 {
        let marginal: f64 = self
            .marginals()
            .p_hat
            .iter()
            .map(|&p| entropy_bernoulli(p).expect("empirical frequency lies in [0, 1]"))
            .sum();
        (marginal - self.entropy()).max(0.0)
    }
}

pub fn empirical_joint(q: &Dataset, cap: DimCap) -> Result<EmpiricalJoint> {
    EmpiricalJoint::from_matrix(q, cap)
}

/// Total correlation `D(Q)` of all columns of `q`, in nats.
pub fn total_correlation(q: &Dataset, cap: DimCap) -> Result<f64> {
    Ok(EmpiricalJoint::from_matrix(q, cap)?.total_correlation())
}

/// `D(Q)` for the sub-matrix of `y` formed by `columns`.
pub fn total_correlation_of(y: &Dataset, columns: &[usize], cap: DimCap) -> Result<f64> {
    Ok(EmpiricalJoint::from_columns(y, columns, cap)?.total_correlation())
}

/// `D(Q)` computed as marginal entropies minus joint entropy; an independent
/// route to the same value.
pub fn total_correlation_via_entropies(q: &Dataset, cap: DimCap) -> Result<f64> {
    Ok(EmpiricalJoint::from_matrix(q, cap)?.total_correlation_via_entropies())
}

/// Maximum of `D(Q)` over column subsets of size `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtcResult {
    #[serde(with = "crate::real")]
    pub value: f64,
    pub argmax_columns: Vec<usize>,
    pub subsets_examined: u128,
    pub exhaustive: bool,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The `rank`-th `d`-subset of `0..l` in lexicographic order.
pub fn unrank_combination(mut rank: u128, l: usize, d: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(d);
    let mut start = 0;
    for slot in 0..d {
        let remaining = d - slot - 1;
        let mut c = start;
        loop {
            let block = binomial(l - c - 1, remaining);
            if rank < block {
                break;
            }
            rank -= block;
            c += 1;
        }
        out.push(c);
        start = c + 1;
    }
    out
}

/// Advances `comb` to the next `d`-subset of `0..l` in lexicographic order.
pub fn next_combination(comb: &mut [usize], l: usize) -> bool {
    let d = comb.len();
    let Some(i) = (0..d).rev().find(|&i| comb[i] < l - d + i) else {
        return false;
    };
    comb[i] += 1;
    for j in i + 1..d {
        comb[j] = comb[j - 1] + 1;
    }
    true
}

fn check_subset_dim(y: &Dataset, d: usize, cap: DimCap) -> Result<()> {
    cap.check(d)?;
    if d == 0 || d > y.l() {
        return Err(Error::Invalid(format!(
            "sub-dimension d = {d} must lie in 1..={} (the column count)",
            y.l()
        )));
    }
    Ok(())
}

/// Best of a run of subsets: larger value wins, equal values keep the lower
/// rank.
#[derive(Clone)]
struct Best {
    value: f64,
    rank: u128,
    columns: Vec<usize>,
}

impl Best {
    fn merge(self, other: Best) -> Best {
        if other.value > self.value || (other.value == self.value && other.rank < self.rank) {
            other
        } else {
            self
        }
    }
}

const PAR_CHUNK: u128 = 256;

fn scan_ranks(y: &Dataset, l: usize, d: usize, from: u128, to: u128) -> Best {
    let mut comb = unrank_combination(from, l, d);
    let mut best = Best {
        value: f64::NEG_INFINITY,
        rank: from,
        columns: comb.clone(),
    };
    let mut rank = from;
    loop {
        let v = EmpiricalJoint::count(y, &comb).total_correlation();
        if v > best.value {
            best = Best {
                value: v,
                rank,
                columns: comb.clone(),
            };
        }
        rank += 1;
        if rank == to || !next_combination(&mut comb, l) {
            break;
        }
    }
    best
}

/// Maximal total correlation of `y` over its `d`-column subsets.
///
/// Without a budget every subset is examined in lexicographic order and the
/// first maximizer is reported. With a budget `b` smaller than `C(L, d)`,
/// `b` distinct subsets are drawn from substream `(seed, 0)` and examined in
/// lexicographic order. Results never depend on the thread count.
pub fn max_total_correlation(
    y: &Dataset,
    d: usize,
    budget: Option<u128>,
    seed: u64,
    cap: DimCap,
) -> Result<MtcResult> {
    check_subset_dim(y, d, cap)?;
    let l = y.l();
    let total = binomial(l, d);
    if let Some(b) = budget {
        if b == 0 {
            return Err(Error::Invalid("MTC budget must be >= 1".into()));
        }
        if b < total {
            return Ok(budgeted_mtc(y, d, b, seed, total));
        }
    }
    if total == u128::MAX {
        return Err(Error::Invalid(format!("C({l}, {d}) overflows; use a budget")));
    }
    let work = total.saturating_mul(y.n() as u128);
    let best = if work < 1 << 16 || total <= PAR_CHUNK {
        scan_ranks(y, l, d, 0, total)
    } else {
        let chunks = total.div_ceil(PAR_CHUNK);
        (0..chunks as u64)
            .into_par_iter()
            .map(|c| {
                let from = c as u128 * PAR_CHUNK;
                scan_ranks(y, l, d, from, (from + PAR_CHUNK).min(total))
            })
            .reduce_with(Best::merge)
            .expect("at least one chunk")
    };
    Ok(MtcResult {
        value: best.value,
        argmax_columns: best.columns,
        subsets_examined: total,
        exhaustive: true,
    })
}

fn uniform_below(rng: &mut Substream, bound: u128) -> u128 {
    // Rejection sampling on the smallest covering power of two.
    let bits = 128 - (bound - 1).leading_zeros();
    loop {
        let raw = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        let v = if bits == 128 { raw } else { raw & ((1u128 << bits) - 1) };
        if v < bound {
            return v;
        }
    }
}

fn budgeted_mtc(y: &Dataset, d: usize, budget: u128, seed: u64, total: u128) -> MtcResult {
    // Floyd's algorithm: `budget` distinct ranks from 0..total.
    let mut rng = Substream::new(seed, 0);
    let mut chosen: HashSet<u128> = HashSet::with_capacity(budget as usize);
    for j in total - budget..total {
        let t = uniform_below(&mut rng, j + 1);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut ranks: Vec<u128> = chosen.into_iter().collect();
    ranks.sort_unstable();
    let best = ranks
        .par_iter()
        .map(|&r| {
            let columns = unrank_combination(r, y.l(), d);
            let value = EmpiricalJoint::count(y, &columns).total_correlation();
            Best {
                value,
                rank: r,
                columns,
            }
        })
        .reduce_with(Best::merge)
        .expect("budget >= 1");
    MtcResult {
        value: best.value,
        argmax_columns: best.columns,
        subsets_examined: budget,
        exhaustive: false,
    }
}

/// Outcome of a thresholded MTC scan.
#[derive(Debug, Clone, PartialEq)]
pub enum MtcTest {
    /// Some subset has total correlation above the threshold; the scan
    /// stopped there.
    Exceeds { columns: Vec<usize>, value: f64 },
    /// Every subset was examined and none exceeded the threshold.
    Within(MtcResult),
}

/// Exhaustive MTC scan that stops at the first subset with `D > tau`.
pub fn mtc_within(y: &Dataset, d: usize, tau: f64, cap: DimCap) -> Result<MtcTest> {
    check_subset_dim(y, d, cap)?;
    let l = y.l();
    let mut comb: Vec<usize> = (0..d).collect();
    let mut best = Best {
        value: f64::NEG_INFINITY,
        rank: 0,
        columns: comb.clone(),
    };
    let mut examined: u128 = 0;
    loop {
        let v = EmpiricalJoint::count(y, &comb).total_correlation();
        if v > tau {
            return Ok(MtcTest::Exceeds {
                columns: comb,
                value: v,
            });
        }
        if v > best.value {
            best = Best {
                value: v,
                rank: examined,
                columns: comb.clone(),
            };
        }
        examined += 1;
        if !next_combination(&mut comb, l) {
            break;
        }
    }
    Ok(MtcTest::Within(MtcResult {
        value: best.value,
        argmax_columns: best.columns,
        subsets_examined: examined,
        exhaustive: true,
    }))
}

/// Limit of `D(Q)` for rows drawn from `model` restricted to `columns`:
/// the KL divergence from the mixture to the product of its mean
/// frequencies, by enumeration of all `2^d` outcomes.
pub fn asymptotic_total_correlation(
    model: &BmmParams,
    columns: &[usize],
    cap: DimCap,
) -> Result<f64> {
    cap.check(columns.len())?;
    check_columns(columns, model.l())?;
    let sub = model.restrict(columns)?;
    let d = columns.len();
    let mean = sub.mean_frequencies();
    let mut total = 0.0;
    for x in 0..1usize << d {
        let prob = |p: &[f64]| -> f64 {
            p.iter()
                .enumerate()
                .map(|(l, &pl)| if (x >> l) & 1 == 1 { pl } else { 1.0 - pl })
                .product()
        };
        let mix: f64 = sub
            .frequencies()
            .iter()
            .zip(sub.weights())
            .map(|(p, &w)| w * prob(p))
            .sum();
        if mix > 0.0 {
            total += mix * (mix / prob(&mean)).ln();
        }
    }
    Ok(total.max(0.0))
}
