//! Set partitions with a fixed block count and a minimum block size,
//! enumerated as restricted growth strings in lexicographic order.

use crate::data::Labeling;
use crate::error::{Error, Result};

/// Search-space limits for a dataset of `n` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConstraints {
    pub n: usize,
    pub kappa_max: usize,
    pub min_block: usize,
}

impl PartitionConstraints {
    pub fn new(n: usize, kappa_max: usize, min_block: usize) -> Result<Self> {
        if n == 0 || kappa_max == 0 || min_block == 0 {
            return Err(Error::Invalid(format!(
                "partition constraints need n, kappa_max, min_block >= 1 (got {n}, {kappa_max}, {min_block})"
            )));
        }
        Ok(PartitionConstraints {
            n,
            kappa_max,
            min_block,
        })
    }

    /// `kappa_max = ceil(1/alpha)`, `min_block = ceil(alpha n / 2)`.
    pub fn from_alpha(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Invalid(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        let kappa_max = ((1.0 / alpha).ceil() as usize).max(1);
        let min_block = ((alpha * n as f64 / 2.0).ceil() as usize).max(1);
        Self::new(n, kappa_max, min_block)
    }

    /// Number of partitions into exactly `kappa` blocks of size `>= min_block`.
    pub fn count(&self, kappa: usize) -> u128 {
        count_partitions(self.n, kappa, self.min_block)
    }

    /// Total over `kappa = 1..=kappa_max`, saturating.
    pub fn total(&self) -> u128 {
        (1..=self.kappa_max).fold(0u128, |acc, k| acc.saturating_add(self.count(k)))
    }

    pub fn partitions(&self, kappa: usize) -> PartitionIter {
        enumerate_partitions(self, kappa)
    }
}

/// Partitions of `n` items into `k` blocks each of size `>= min_block`,
/// saturating at `u128::MAX`. Counts by the size of the block holding the
/// first item.
pub fn count_partitions(n: usize, k: usize, min_block: usize) -> u128 {
    let m = min_block.max(1);
    // table[i][j]: partitions of i items into j blocks.
    let mut table = vec![vec![0u128; k + 1]; n + 1];
    table[0][0] = 1;
    let binom = binomial_table(n);
    for i in 1..=n {
        for j in 1..=k.min(i) {
            let mut acc: u128 = 0;
            for s in m..=i {
                let rest = table[i - s][j - 1];
                if rest == 0 {
                    continue;
                }
                acc = acc.saturating_add(binom[i - 1][s - 1].saturating_mul(rest));
            }
            table[i][j] = acc;
        }
    }
    table[n][k]
}

fn binomial_table(n: usize) -> Vec<Vec<u128>> {
    let mut t = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        t[i][0] = 1;
        for j in 1..=i {
            t[i][j] = t[i - 1][j - 1].saturating_add(if j < i { t[i - 1][j] } else { 0 });
        }
    }
    t
}

/// Iterator over canonical labelings (values `1..=kappa`, first-occurrence
/// order), each partition exactly once, in lexicographic order.
#[derive(Debug, Clone)]
pub struct PartitionIter {
    n: usize,
    k: usize,
    min_block: usize,
    rgs: Vec<u32>,
    sizes: Vec<usize>,
    state: IterState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IterState {
    Fresh,
    Running,
    Done,
}

pub fn enumerate_partitions(constraints: &PartitionConstraints, kappa: usize) -> PartitionIter {
    let feasible = kappa >= 1 && kappa <= constraints.n && kappa * constraints.min_block <= constraints.n;
    PartitionIter {
        n: constraints.n,
        k: kappa,
        min_block: constraints.min_block,
        rgs: vec![0; constraints.n],
        sizes: vec![0; kappa],
        state: if feasible { IterState::Fresh } else { IterState::Done },
    }
}

impl PartitionIter {
    /// Number of blocks opened by the prefix.
    fn used(&self) -> usize {
        self.sizes.iter().take_while(|&&s| s > 0).count()
    }

    /// Whether the first `filled` positions can still be completed.
    fn completable(&self, filled: usize) -> bool {
        let used = self.used();
        let deficit: usize = self.sizes[..used]
            .iter()
            .map(|&s| self.min_block.saturating_sub(s))
            .sum::<usize>()
            + (self.k - used) * self.min_block;
        deficit <= self.n - filled
    }

    /// Fills positions `from..n` with the smallest feasible values.
    fn fill_from(&mut self, from: usize) {
        for pos in from..self.n {
            let limit = self.used().min(self.k - 1);
            let mut placed = false;
            for v in 0..=limit {
                self.sizes[v] += 1;
                if self.completable(pos + 1) {
                    self.rgs[pos] = v as u32;
                    placed = true;
                    break;
                }
                self.sizes[v] -= 1;
            }
            debug_assert!(placed, "a completable prefix always extends");
        }
    }

    fn advance(&mut self) -> bool {
        for pos in (1..self.n).rev() {
            let cur = self.rgs[pos] as usize;
            self.sizes[cur] -= 1;
            let limit = self.used().min(self.k - 1);
            for v in cur + 1..=limit {
                self.sizes[v] += 1;
                if self.completable(pos + 1) {
                    self.rgs[pos] = v as u32;
                    self.fill_from(pos + 1);
                    return true;
                }
                self.sizes[v] -= 1;
            }
        }
        false
    }

    fn current(&self) -> Labeling {
        Labeling::new(self.rgs.iter().map(|&v| v + 1).collect()).expect("labels are >= 1")
    }
}

impl Iterator for PartitionIter {
    type Item = Labeling;

    fn next(&mut self) -> Option<Labeling> {
        match self.state {
            IterState::Done => None,
            IterState::Fresh => {
                self.sizes[0] = 1;
                self.rgs[0] = 0;
                self.fill_from(1);
                self.state = IterState::Running;
                Some(self.current())
            }
            IterState::Running => {
                if self.advance() {
                    Some(self.current())
                } else {
                    self.state = IterState::Done;
                    None
                }
            }
        }
    }
}
