//! Comparison against ground truth and separability diagnostics.

use serde::Serialize;

use crate::data::Labeling;
use crate::error::{Error, Result};

/// Slack toward acceptance at exact purity boundaries.
pub const PURITY_SLACK: f64 = 1e-12;

/// Slack toward counting a column as separated, so that frequencies entered
/// as decimals (`0.95 - 0.05`) meet `delta = 0.9`.
pub const SEPARATION_SLACK: f64 = 1e-12;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Invalid(format!("epsilon = {epsilon} must lie in [0, 1)")));
    }
    Ok(())
}

/// Size of the largest group of rows sharing one truth label.
fn majority_count(rows: &[usize], truth: &Labeling) -> Result<usize> {
    let t = truth.as_slice();
    let mut labels = Vec::with_capacity(rows.len());
    for &i in rows {
        let lab = *t.get(i).ok_or_else(|| {
            Error::Invalid(format!("row {i} out of range for truth of length {}", t.len()))
        })?;
        labels.push(lab);
    }
    labels.sort_unstable();
    Ok(labels
        .chunk_by(|a, b| a == b)
        .map(|run| run.len())
        .max()
        .unwrap_or(0))
}

fn purity_holds(majority: usize, size: usize, epsilon: f64) -> bool {
    let size = size as f64;
    majority as f64 >= size - epsilon * size - PURITY_SLACK
}

/// Whether some truth label covers at least a `1 - epsilon` fraction of
/// `cluster_rows` (inclusive).
pub fn is_eps_pure(cluster_rows: &[usize], truth: &Labeling, epsilon: f64) -> Result<bool> {
    check_epsilon(epsilon)?;
    if cluster_rows.is_empty() {
        return Err(Error::Invalid("cluster is empty".into()));
    }
    let majority = majority_count(cluster_rows, truth)?;
    Ok(purity_holds(majority, cluster_rows.len(), epsilon))
}

fn check_lengths(z: &Labeling, truth: &Labeling) -> Result<()> {
    if z.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: z.len(),
        });
    }
    Ok(())
}

/// Whether every output cluster of `z` is `epsilon`-pure under `truth`.
pub fn is_eps_correct(z: &Labeling, truth: &Labeling, epsilon: f64) -> Result<bool> {
    check_lengths(z, truth)?;
    check_epsilon(epsilon)?;
    for (_, rows) in z.clusters() {
        if !is_eps_pure(&rows, truth, epsilon)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest impurity `1 - majority / size` over the output clusters.
pub fn misclustering_rate(z: &Labeling, truth: &Labeling) -> Result<f64> {
    check_lengths(z, truth)?;
    let mut worst: f64 = 0.0;
    for (_, rows) in z.clusters() {
        let majority = majority_count(&rows, truth)?;
        worst = worst.max(1.0 - majority as f64 / rows.len() as f64);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCount {
    pub rows: (usize, usize),
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    #[serde(with = "crate::real")]
    pub delta: f64,
    pub per_pair_counts: Vec<PairCount>,
    pub l_sep: usize,
    /// Set when `P` has a single row and `l_sep = L` by convention.
    pub single_component: bool,
}

/// For each row pair of `p`, the number of columns differing by at least
/// `delta` (within [`SEPARATION_SLACK`]); `l_sep` is the minimum over pairs.
pub fn separability(p: &[Vec<f64>], delta: f64) -> Result<SeparabilityReport> {
    if p.is_empty() || p[0].is_empty() {
        return Err(Error::Invalid("frequency matrix must be at least 1x1".into()));
    }
    let l = p[0].len();
    if p.iter().any(|r| r.len() != l) {
        return Err(Error::Invalid("frequency matrix rows differ in length".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Invalid(format!("delta = {delta} must be >= 0")));
    }
    let mut per_pair_counts = Vec::new();
    for a in 0..p.len() {
        for b in a + 1..p.len() {
            let count = p[a]
                .iter()
                .zip(&p[b])
                .filter(|(x, y)| (*x - *y).abs() >= delta - SEPARATION_SLACK)
                .count();
            per_pair_counts.push(PairCount { rows: (a, b), count });
        }
    }
    let single_component = p.len() == 1;
    let l_sep = per_pair_counts.iter().map(|c| c.count).min().unwrap_or(l);
    Ok(SeparabilityReport {
        delta,
        per_pair_counts,
        l_sep,
        single_component,
    })
}

/// Per-threshold correctness plus summary statistics for a predicted
/// labeling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub eps_correct: Vec<EpsCorrect>,
    #[serde(with = "crate::real")]
    pub misclustering_rate: f64,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsCorrect {
    #[serde(with = "crate::real")]
    pub epsilon: f64,
    pub correct: bool,
}

pub fn evaluate(z: &Labeling, truth: &Labeling, epsilons: &[f64]) -> Result<EvalReport> {
    let eps_correct = epsilons
        .iter()
        .map(|&epsilon| {
            Ok(EpsCorrect {
                epsilon,
                correct: is_eps_correct(z, truth, epsilon)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        eps_correct,
        misclustering_rate: misclustering_rate(z, truth)?,
        cluster_sizes: z.clusters().into_iter().map(|(_, rows)| rows.len()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Substream;

    fn lab(z: &[u32]) -> Labeling {
        Labeling::new(z.to_vec()).unwrap()
    }

    #[test]
    fn purity_examples() {
        let truth = lab(&[1, 1, 1, 2]);
        assert!(is_eps_pure(&[0, 1, 2, 3], &truth, 0.25).unwrap());
        assert!(!is_eps_pure(&[0, 1, 2, 3], &truth, 0.2).unwrap());
        assert!(is_eps_pure(&[3], &truth, 0.0).unwrap());
        assert!(is_eps_pure(&[], &truth, 0.1).is_err());
        assert!(is_eps_pure(&[0], &truth, 1.0).is_err());
        assert!(is_eps_pure(&[9], &truth, 0.1).is_err());
    }

    #[test]
    fn correctness_examples() {
        let truth = lab(&[1, 1, 2, 2, 3]);
        assert!(is_eps_correct(&truth, &truth, 0.0).unwrap());
        let singletons = lab(&[1, 2, 3, 4, 5]);
        assert!(is_eps_correct(&singletons, &truth, 0.0).unwrap());
        assert_eq!(misclustering_rate(&singletons, &truth).unwrap(), 0.0);
        assert!(!is_eps_correct(&lab(&[1, 1, 1, 1]), &lab(&[1, 1, 2, 2]), 0.1).unwrap());
        assert!(is_eps_correct(&lab(&[1, 1]), &truth, 0.1).is_err());
        assert_eq!(misclustering_rate(&truth, &truth).unwrap(), 0.0);
        assert_eq!(misclustering_rate(&lab(&[1, 1, 1, 1]), &lab(&[1, 1, 1, 2])).unwrap(), 0.25);
    }

    #[test]
    fn boundary_accepts_at_exactly_one_minus_epsilon() {
        // 8 of 10 share a label: exactly 0.2-pure.
        let truth = lab(&[1, 1, 1, 1, 1, 1, 1, 1, 2, 2]);
        let z = lab(&[1; 10]);
        assert!(is_eps_correct(&z, &truth, 0.2).unwrap());
        assert!(!is_eps_correct(&z, &truth, 0.19).unwrap());
    }

    #[test]
    fn correctness_agrees_with_rate_and_ignores_relabeling() {
        let mut rng = Substream::new(41, 0);
        let eps_grid = [0.0, 0.1, 0.2, 0.25, 0.3, 1.0 / 3.0, 0.5, 0.75];
        for _ in 0..500 {
            let n = 1 + (rng.next_u64() % 12) as usize;
            let kz = 1 + rng.next_u64() % 4;
            let kt = 1 + rng.next_u64() % 3;
            let z = lab(&(0..n).map(|_| 1 + (rng.next_u64() % kz) as u32).collect::<Vec<_>>());
            let t = lab(&(0..n).map(|_| 1 + (rng.next_u64() % kt) as u32).collect::<Vec<_>>());
            let rate = misclustering_rate(&z, &t).unwrap();
            let permuted = lab(&t.as_slice().iter().map(|&x| (x % kt as u32) + 1).collect::<Vec<_>>());
            for &eps in &eps_grid {
                let c = is_eps_correct(&z, &t, eps).unwrap();
                assert_eq!(c, rate <= eps + PURITY_SLACK, "rate {rate} eps {eps}");
                assert_eq!(c, is_eps_correct(&z, &permuted, eps).unwrap());
            }
        }
    }

    #[test]
    fn separability_examples() {
        let r = separability(&[vec![0.1, 0.1, 0.5], vec![0.9, 0.9, 0.5]], 0.4).unwrap();
        assert_eq!(r.per_pair_counts[0].count, 2);
        assert_eq!(r.l_sep, 2);
        let r = separability(&[vec![0.3, 0.7], vec![0.3, 0.7]], 0.01).unwrap();
        assert_eq!(r.l_sep, 0);
        let r = separability(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1.0).unwrap();
        assert_eq!(r.l_sep, 2);
        let r = separability(&[vec![0.05, 0.95], vec![0.95, 0.05]], 0.9).unwrap();
        assert_eq!(r.l_sep, 2);
        let r = separability(&[vec![0.05, 0.95], vec![0.95, 0.05]], 0.9 + 1e-9).unwrap();
        assert_eq!(r.l_sep, 0);
        let r = separability(&[vec![0.2, 0.4, 0.9]], 0.5).unwrap();
        assert!(r.single_component);
        assert_eq!(r.l_sep, 3);
    }

    #[test]
    fn separability_symmetries_and_monotonicity() {
        let mut rng = Substream::new(77, 0);
        for _ in 0..100 {
            let k = 2 + (rng.next_u64() % 3) as usize;
            let l = 1 + (rng.next_u64() % 7) as usize;
            let p: Vec<Vec<f64>> = (0..k).map(|_| (0..l).map(|_| rng.uniform()).collect()).collect();
            let delta = rng.uniform();
            let base = separability(&p, delta).unwrap().l_sep;
            let mut rev = p.clone();
            rev.reverse();
            assert_eq!(separability(&rev, delta).unwrap().l_sep, base);
            let rotated: Vec<Vec<f64>> = p
                .iter()
                .map(|r| r.iter().cycle().skip(1).take(l).copied().collect())
                .collect();
            assert_eq!(separability(&rotated, delta).unwrap().l_sep, base);
            assert!(separability(&p, delta + 0.1).unwrap().l_sep <= base);
        }
    }
}
