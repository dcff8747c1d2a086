use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::info::check_probability_vector;

/// Ground-truth Bernoulli mixture: `K` components over `L` binary coordinates.
///
/// Row `k` of `p` holds the coordinate frequencies of component `k`, and
/// `w[k]` its mixing weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct BmmParams {
    p: Vec<Vec<f64>>,
    w: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    #[serde(with = "crate::real::matrix")]
    p: Vec<Vec<f64>>,
    #[serde(with = "crate::real::vec")]
    w: Vec<f64>,
}

impl TryFrom<RawParams> for BmmParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        BmmParams::new(raw.p, raw.w)
    }
}

impl From<BmmParams> for RawParams {
    fn from(m: BmmParams) -> Self {
        RawParams { p: m.p, w: m.w }
    }
}

impl BmmParams {
    pub fn new(p: Vec<Vec<f64>>, w: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Invalid("frequency matrix has no rows (K must be >= 1)".into()));
        }
        let l = p[0].len();
        if l == 0 {
            return Err(Error::Invalid("frequency matrix has no columns (L must be >= 1)".into()));
        }
        for (k, row) in p.iter().enumerate() {
            if row.len() != l {
                return Err(Error::Invalid(format!(
                    "row {k} of the frequency matrix has {} columns, expected {l}",
                    row.len()
                )));
            }
            if let Some((j, x)) = row.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
                return Err(Error::Invalid(format!("P[{k}][{j}] = {x} is outside [0, 1]")));
            }
        }
        if w.len() != p.len() {
            return Err(Error::LengthMismatch {
                expected: p.len(),
                actual: w.len(),
            });
        }
        check_probability_vector(&w).map_err(|e| Error::Invalid(format!("weights: {e}")))?;
        Ok(BmmParams { p, w })
    }

    /// A single Bernoulli model (`K = 1`).
    pub fn single(p: Vec<f64>) -> Result<Self> {
        Self::new(vec![p], vec![1.0])
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn l(&self) -> usize {
        self.p[0].len()
    }

    pub fn frequencies(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.p[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Weighted mean frequency vector `sum_k w_k p^(k)`.
    pub fn mean_frequencies(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.l()];
        for (row, &wk) in self.p.iter().zip(&self.w) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += wk * x;
            }
        }
        mean
    }

    /// The same mixture restricted to a subset of columns.
    pub fn restrict(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Invalid("empty column selection".into()));
        }
        if let Some(&c) = columns.iter().find(|&&c| c >= self.l()) {
            return Err(Error::Invalid(format!("column {c} out of range for L = {}", self.l())));
        }
        let p = self
            .p
            .iter()
            .map(|row| columns.iter().map(|&c| row[c]).collect())
            .collect();
        Ok(BmmParams {
            p,
            w: self.w.clone(),
        })
    }

    /// SHA-256 over `K`, `L`, then `P` row-major and `w`, all little-endian.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.k() as u64).to_le_bytes());
        h.update((self.l() as u64).to_le_bytes());
        for row in &self.p {
            for x in row {
                h.update(x.to_le_bytes());
            }
        }
        for x in &self.w {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(BmmParams::new(vec![], vec![]).is_err());
        assert!(BmmParams::new(vec![vec![]], vec![1.0]).is_err());
        assert!(BmmParams::new(vec![vec![0.5], vec![0.5, 0.1]], vec![0.5, 0.5]).is_err());
        assert!(BmmParams::new(vec![vec![1.2]], vec![1.0]).is_err());
        assert!(BmmParams::new(vec![vec![0.2]], vec![0.9]).is_err());
        assert!(BmmParams::new(vec![vec![0.2], vec![0.3]], vec![1.0]).is_err());
        assert!(BmmParams::new(vec![vec![0.2], vec![0.3]], vec![1.5, -0.5]).is_err());
        let m = BmmParams::new(vec![vec![0.1, 0.2], vec![0.9, 0.8]], vec![0.25, 0.75]).unwrap();
        assert_eq!((m.k(), m.l()), (2, 2));
        let mean = m.mean_frequencies();
        assert!((mean[0] - 0.7).abs() < 1e-15);
        assert!((mean[1] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn digest_depends_on_content() {
        let a = BmmParams::new(vec![vec![0.1, 0.2]], vec![1.0]).unwrap();
        let b = BmmParams::new(vec![vec![0.1, 0.3]], vec![1.0]).unwrap();
        assert_eq!(a.digest(), a.clone().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn json_round_trip_rejects_invalid() {
        let m = BmmParams::new(vec![vec![0.1, 1.0 / 3.0], vec![0.9, 0.5]], vec![0.3, 0.7]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: BmmParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<BmmParams>(r#"{"p":[[1.5]],"w":[1.0]}"#).is_err());
    }
}
