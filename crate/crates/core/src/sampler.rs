//! Seeded i.i.d. sampling from a Bernoulli mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Labeling};
use crate::error::{Error, Result};
use crate::model::BmmParams;
use crate::rng::Substream;

/// A sample matrix together with the component that generated each row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Dataset,
    pub truth: Labeling,
    pub seed: u64,
    pub params_digest: String,
}

/// Sidecar manifest written next to generated datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub seed: u64,
    pub params_digest: String,
    pub n: usize,
    pub l: usize,
}

impl LabeledDataset {
    pub fn manifest(&self) -> SampleManifest {
        SampleManifest {
            seed: self.seed,
            params_digest: self.params_digest.clone(),
            n: self.data.n(),
            l: self.data.l(),
        }
    }
}

/// Draws row `row` of a sample: the component by inverse CDF on `w`, then `L`
/// independent bits. Uses substream `(seed, row)` only.
fn sample_row(model: &BmmParams, seed: u64, row: usize, words: &mut [u64]) -> u32 {
    let mut rng = Substream::new(seed, row as u64);
    let k = rng.categorical(model.weights());
    for (j, &p) in model.component(k).iter().enumerate() {
        if rng.bernoulli(p) {
            words[j / 64] |= 1 << (j % 64);
        }
    }
    k as u32 + 1
}

/// Draws `n` rows. Output depends only on `(model, n, seed)`, never on the
/// thread count.
pub fn sample_bmm(model: &BmmParams, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::Invalid("sample size n must be >= 1".into()));
    }
    let mut data = Dataset::zeros(n, model.l())?;
    let words_per_row = model.l().div_ceil(64);
    let mut truth = vec![0u32; n];
    let body = |(row, (words, label)): (usize, (&mut [u64], &mut u32))| {
        *label = sample_row(model, seed, row, words);
    };
    let rows = data.words_mut();
    if n * model.l() >= 1 << 14 {
        rows.par_chunks_mut(words_per_row)
            .zip(truth.par_iter_mut())
            .enumerate()
            .for_each(body);
    } else {
        rows.chunks_mut(words_per_row)
            .zip(truth.iter_mut())
            .enumerate()
            .for_each(body);
    }
    Ok(LabeledDataset {
        data,
        truth: Labeling::new(truth)?,
        seed,
        params_digest: model.digest(),
    })
}

/// Draws `n` component labels only (no bits), with the same per-row
/// substreams as [`sample_bmm`].
pub fn sample_labels(w: &[f64], n: usize, seed: u64) -> Vec<u32> {
    (0..n)
        .map(|row| Substream::new(seed, row as u64).categorical(w) as u32 + 1)
        .collect()
}

/// `ln P(x)` under the mixture, via log-sum-exp over components. Returns
/// `-inf` for impossible vectors.
pub fn bmm_log_likelihood(model: &BmmParams, x: &[u8]) -> Result<f64> {
    if x.len() != model.l() {
        return Err(Error::LengthMismatch {
            expected: model.l(),
            actual: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|&&v| v > 1) {
        return Err(Error::Invalid(format!("observation entry {v} is not 0 or 1")));
    }
    let logs: Vec<f64> = model
        .frequencies()
        .iter()
        .zip(model.weights())
        .map(|(p, &w)| {
            let mut acc = w.ln();
            for (&pj, &xj) in p.iter().zip(x) {
                acc += if xj == 1 { pj.ln() } else { (1.0 - pj).ln() };
            }
            acc
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(max + logs.iter().map(|&v| (v - max).exp()).sum::<f64>().ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_frequencies() {
        let m = BmmParams::single(vec![0.0; 3]).unwrap();
        let s = sample_bmm(&m, 4, 99).unwrap();
        assert_eq!((s.data.n(), s.data.l()), (4, 3));
        assert!((0..4).all(|i| s.data.row(i) == vec![0, 0, 0]));
        assert_eq!(s.truth.as_slice(), &[1, 1, 1, 1]);

        let m = BmmParams::single(vec![1.0; 2]).unwrap();
        let s = sample_bmm(&m, 2, 12345).unwrap();
        assert!((0..2).all(|i| s.data.row(i) == vec![1, 1]));
    }

    #[test]
    fn rejects_empty_sample() {
        let m = BmmParams::single(vec![0.5]).unwrap();
        assert!(sample_bmm(&m, 0, 1).is_err());
    }

    #[test]
    fn column_frequencies_near_half() {
        let m = BmmParams::new(vec![vec![0.1; 16], vec![0.9; 16]], vec![0.5, 0.5]).unwrap();
        let s = sample_bmm(&m, 10_000, 7).unwrap();
        for j in 0..16 {
            let f = s.data.column_count(j) as f64 / 10_000.0;
            assert!((f - 0.5).abs() <= 0.02, "column {j}: {f}");
        }
    }

    #[test]
    fn rows_do_not_depend_on_n() {
        let m = BmmParams::new(vec![vec![0.3; 70], vec![0.8; 70]], vec![0.4, 0.6]).unwrap();
        let small = sample_bmm(&m, 10, 5).unwrap();
        let large = sample_bmm(&m, 500, 5).unwrap();
        for i in 0..10 {
            assert_eq!(small.data.row(i), large.data.row(i));
            assert_eq!(small.truth.as_slice()[i], large.truth.as_slice()[i]);
        }
        assert_eq!(&sample_labels(m.weights(), 500, 5)[..], large.truth.as_slice());
    }

    #[test]
    fn log_likelihood_examples() {
        let m = BmmParams::single(vec![0.5, 0.5]).unwrap();
        assert!((bmm_log_likelihood(&m, &[0, 1]).unwrap() - 0.25f64.ln()).abs() < 1e-15);
        let m = BmmParams::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert!((bmm_log_likelihood(&m, &[1]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let m = BmmParams::single(vec![0.0]).unwrap();
        assert_eq!(bmm_log_likelihood(&m, &[1]).unwrap(), f64::NEG_INFINITY);
        assert!(bmm_log_likelihood(&m, &[1, 0]).is_err());
    }

    #[test]
    fn log_likelihood_normalizes() {
        let mut s = Substream::new(2024, 0);
        for l in [1usize, 3, 7, 12] {
            for k in 1..=3 {
                let p: Vec<Vec<f64>> = (0..k).map(|_| (0..l).map(|_| s.uniform()).collect()).collect();
                let raw: Vec<f64> = (0..k).map(|_| s.uniform() + 0.01).collect();
                let tot: f64 = raw.iter().sum();
                let mut w: Vec<f64> = raw.iter().map(|x| x / tot).collect();
                let adj: f64 = w.iter().sum();
                w[0] += 1.0 - adj;
                let m = BmmParams::new(p, w).unwrap();
                let mut total = 0.0;
                for code in 0..(1usize << l) {
                    let x: Vec<u8> = (0..l).map(|j| ((code >> j) & 1) as u8).collect();
                    total += bmm_log_likelihood(&m, &x).unwrap().exp();
                }
                assert!((total - 1.0).abs() < 1e-10, "L={l} K={k}: {total}");
            }
        }
    }
}
