//! Exhaustive search over constrained clusterings with an MTC purity test.
//!
//! Cluster counts `kappa = 1, 2, ..., ceil(1/alpha)` are tried in turn. For
//! each count every set partition whose blocks hold at least
//! `ceil(alpha n / 2)` rows is tested in restricted-growth-string order, and
//! the first partition whose blocks all have MTC at most `tau` is accepted.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Labeling};
use crate::error::{Error, Result};
use crate::measures::{max_total_correlation, mtc_within, MtcResult, MtcTest};
use crate::params::{AlgoParams, DimCap};
use crate::partitions::PartitionConstraints;

/// Default limit on the number of candidate partitions.
pub const DEFAULT_SEARCH_CAP: u128 = 10_000_000;

/// Partitions evaluated speculatively per parallel batch.
const BATCH: usize = 512;

#[derive(Debug, Clone, Copy)]
pub struct ClusterOptions {
    pub search_cap: u128,
    pub dim_cap: DimCap,
    /// Subsets examined per MTC evaluation; `None` scans all of them.
    pub mtc_budget: Option<u128>,
    /// Seed of the subset draws when `mtc_budget` is set.
    pub mtc_seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            search_cap: DEFAULT_SEARCH_CAP,
            dim_cap: DimCap::default(),
            mtc_budget: None,
            mtc_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRun {
    #[serde(serialize_with = "ser_labels")]
    pub result: Option<Labeling>,
    pub accepted_kappa: Option<usize>,
    pub partitions_tested: u64,
    pub mtc_evaluations: u64,
    /// MTC of each block of the accepted partition, in label order.
    pub per_cluster_mtc: Vec<MtcResult>,
}

fn ser_labels<S: serde::Serializer>(z: &Option<Labeling>, s: S) -> Result<S::Ok, S::Error> {
    match z {
        Some(z) => s.collect_seq(z.as_slice()),
        None => s.serialize_none(),
    }
}

/// Rows of `x` grouped by label; block `k` holds the rows labeled `k + 1`
/// in their original order.
pub fn split_by_labeling(x: &Dataset, z: &Labeling) -> Result<Vec<Dataset>> {
    if z.len() != x.n() {
        return Err(Error::LengthMismatch {
            expected: x.n(),
            actual: z.len(),
        });
    }
    let kappa = z.num_clusters();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); kappa];
    for (i, &lab) in z.as_slice().iter().enumerate() {
        let k = lab as usize;
        if k > kappa {
            return Err(Error::Invalid(format!(
                "label {lab} at row {i} is out of range 1..={kappa}"
            )));
        }
        rows[k - 1].push(i);
    }
    rows.iter().map(|r| x.select_rows(r)).collect()
}

/// Outcome of testing one partition.
struct Verdict {
    accepted: Option<Vec<MtcResult>>,
    evaluations: u64,
}

fn test_block(block: &Dataset, params: &AlgoParams, opts: &ClusterOptions) -> Result<Option<MtcResult>> {
    match opts.mtc_budget {
        None => Ok(match mtc_within(block, params.d, params.tau, opts.dim_cap)? {
            MtcTest::Within(r) => Some(r),
            MtcTest::Exceeds { .. } => None,
        }),
        Some(b) => {
            let r = max_total_correlation(block, params.d, Some(b), opts.mtc_seed, opts.dim_cap)?;
            Ok((r.value <= params.tau).then_some(r))
        }
    }
}

fn test_partition(
    x: &Dataset,
    z: &Labeling,
    params: &AlgoParams,
    opts: &ClusterOptions,
) -> Result<Verdict> {
    let mut results = Vec::new();
    let mut evaluations = 0;
    for block in split_by_labeling(x, z)? {
        evaluations += 1;
        match test_block(&block, params, opts)? {
            Some(r) => results.push(r),
            None => {
                return Ok(Verdict {
                    accepted: None,
                    evaluations,
                })
            }
        }
    }
    Ok(Verdict {
        accepted: Some(results),
        evaluations,
    })
}

/// Runs the search. Results, including counters, are identical for any
/// thread count: batches are evaluated in parallel and committed in order.
pub fn cluster_algorithm1(
    x: &Dataset,
    params: &AlgoParams,
    opts: &ClusterOptions,
) -> Result<ClusterRun> {
    opts.dim_cap.check(params.d)?;
    if params.d > x.l() {
        return Err(Error::DimensionExceedsColumns {
            d: params.d,
            l: x.l(),
        });
    }
    if opts.mtc_budget == Some(0) {
        return Err(Error::Invalid("MTC budget must be >= 1".into()));
    }
    let constraints = PartitionConstraints::from_alpha(x.n(), params.alpha)?;
    let total = constraints.total();
    if total > opts.search_cap {
        return Err(Error::SearchCapExceeded {
            partitions: total,
            cap: opts.search_cap,
        });
    }

    let mut run = ClusterRun {
        result: None,
        accepted_kappa: None,
        partitions_tested: 0,
        mtc_evaluations: 0,
        per_cluster_mtc: Vec::new(),
    };
    for kappa in 1..=constraints.kappa_max {
        let mut iter = constraints.partitions(kappa);
        loop {
            let batch: Vec<Labeling> = iter.by_ref().take(BATCH).collect();
            if batch.is_empty() {
                break;
            }
            let verdicts: Vec<Result<Verdict>> = if batch.len() > 1 {
                batch.par_iter().map(|z| test_partition(x, z, params, opts)).collect()
            } else {
                vec![test_partition(x, &batch[0], params, opts)]
            };
            for (z, verdict) in batch.into_iter().zip(verdicts) {
                let verdict = verdict?;
                run.partitions_tested += 1;
                run.mtc_evaluations += verdict.evaluations;
                if let Some(per_cluster) = verdict.accepted {
                    run.result = Some(z);
                    run.accepted_kappa = Some(kappa);
                    run.per_cluster_mtc = per_cluster;
                    return Ok(run);
                }
            }
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::max_total_correlation;
    use crate::params::derive_algo_params;

    fn params(alpha: f64, delta: f64, eps: f64, d: usize) -> AlgoParams {
        derive_algo_params(alpha, delta, eps, 4, Some(d), DimCap::default()).unwrap()
    }

    #[test]
    fn split_examples() {
        let x = Dataset::from_rows(&[[0u8, 1], [1, 1], [0, 0], [1, 0]]).unwrap();
        let parts = split_by_labeling(&x, &Labeling::new(vec![1, 1, 2, 2]).unwrap()).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0], x.select_rows(&[0, 1]).unwrap());
        assert_eq!(parts[1], x.select_rows(&[2, 3]).unwrap());

        let x3 = x.select_rows(&[0, 1, 2]).unwrap();
        let parts = split_by_labeling(&x3, &Labeling::new(vec![1, 2, 1]).unwrap()).unwrap();
        assert_eq!(parts[0], x3.select_rows(&[0, 2]).unwrap());
        assert_eq!(parts[1], x3.select_rows(&[1]).unwrap());

        let parts = split_by_labeling(&x, &Labeling::new(vec![1; 4]).unwrap()).unwrap();
        assert_eq!(parts, vec![x.clone()]);

        assert!(split_by_labeling(&x, &Labeling::new(vec![1, 3, 1, 1]).unwrap()).is_err());
        assert!(split_by_labeling(&x, &Labeling::new(vec![1, 1]).unwrap()).is_err());
    }

    #[test]
    fn constant_data_accepted_at_one_cluster() {
        let x = Dataset::zeros(6, 8).unwrap();
        let run = cluster_algorithm1(&x, &params(0.5, 0.9, 0.2, 2), &ClusterOptions::default()).unwrap();
        assert_eq!(run.result.unwrap().as_slice(), &[1; 6]);
        assert_eq!(run.accepted_kappa, Some(1));
        assert_eq!(run.partitions_tested, 1);
        assert_eq!(run.mtc_evaluations, 1);
        assert_eq!(run.per_cluster_mtc[0].value, 0.0);
    }

    #[test]
    fn two_blocks_recovered() {
        let x = Dataset::from_rows(&[[0u8; 4], [0; 4], [0; 4], [1; 4], [1; 4], [1; 4]]).unwrap();
        let p = params(0.5, 0.9, 0.2, 2);
        assert!((p.tau - 0.330259).abs() < 1e-6);
        // The whole matrix has D = ln 2 on every column pair.
        let whole = max_total_correlation(&x, 2, None, 0, DimCap::default()).unwrap();
        assert!((whole.value - std::f64::consts::LN_2).abs() < 1e-15);
        let run = cluster_algorithm1(&x, &p, &ClusterOptions::default()).unwrap();
        assert_eq!(run.accepted_kappa, Some(2));
        assert_eq!(run.result.unwrap().as_slice(), &[1, 1, 1, 2, 2, 2]);
        assert!(run.per_cluster_mtc.iter().all(|r| r.value <= p.tau));
    }

    #[test]
    fn null_clustering_counts_every_partition() {
        // Columns 0,1 repeat (0,1,0,1) and columns 2,3 repeat (0,1,1,0): every
        // block of two or more rows has a column pair with D >= H(1/3) > tau.
        let x = Dataset::from_rows(&[[0u8, 0, 0, 0], [1, 1, 1, 1], [0, 0, 1, 1], [1, 1, 0, 0]]).unwrap();
        let p = params(0.5, 0.9, 0.2, 2);
        let run = cluster_algorithm1(&x, &p, &ClusterOptions::default()).unwrap();
        assert_eq!(run.result, None);
        assert_eq!(run.accepted_kappa, None);
        // One partition at kappa = 1 plus S(4, 2) = 7 at kappa = 2.
        assert_eq!(run.partitions_tested, 8);
        assert!(run.per_cluster_mtc.is_empty());
    }

    #[test]
    fn infeasible_inputs() {
        let x = Dataset::zeros(6, 3).unwrap();
        let err = cluster_algorithm1(&x, &params(0.5, 0.9, 0.2, 4), &ClusterOptions::default());
        assert!(matches!(err, Err(Error::DimensionExceedsColumns { d: 4, l: 3 })));
        let opts = ClusterOptions {
            dim_cap: DimCap::new(1).unwrap(),
            ..Default::default()
        };
        let err = cluster_algorithm1(&x, &params(0.5, 0.9, 0.2, 2), &opts);
        assert!(matches!(err, Err(Error::InfeasibleDimension { d: 2, cap: 1 })));
        let opts = ClusterOptions {
            search_cap: 10,
            ..Default::default()
        };
        let big = Dataset::zeros(12, 3).unwrap();
        let err = cluster_algorithm1(&big, &params(0.25, 0.9, 0.2, 2), &opts);
        assert!(matches!(err, Err(Error::SearchCapExceeded { .. })));
    }
}
