use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation sequence, stored row-major as `len × dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    dim: usize,
    obs: Vec<f64>,
}

impl Sequence {
    pub fn new(dim: usize, obs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("observation dimension must be positive"));
        }
        if obs.is_empty() || !obs.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "sequence buffer of length {} is not a positive multiple of dim {dim}",
                obs.len()
            )));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observations must be finite"));
        }
        Ok(Self { dim, obs })
    }

    /// A univariate sequence.
    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn len(&self) -> usize {
        self.obs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.obs[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.obs.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.obs
    }
}

/// Empirical moments of a dataset, used to seed priors and initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSummary {
    pub dim: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    /// Row-major d×d covariance.
    pub cov: Vec<f64>,
}

impl DataSummary {
    pub fn from_sequences(seqs: &[Sequence]) -> Result<Self> {
        let first = seqs
            .first()
            .ok_or_else(|| Error::invalid("dataset must contain at least one sequence"))?;
        let d = first.dim();
        let mut count = 0usize;
        let mut mean = vec![0.0; d];
        for s in seqs {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.dim(),
                    context: "sequence dimension within dataset",
                });
            }
            for y in s.rows() {
                count += 1;
                mean.iter_mut().zip(y).for_each(|(m, v)| *m += v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut cov = vec![0.0; d * d];
        for y in seqs.iter().flat_map(|s| s.rows()) {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (y[i] - mean[i]) * (y[j] - mean[j]);
                }
            }
        }
        let denom = (count.max(2) - 1) as f64;
        cov.iter_mut().for_each(|c| *c /= denom);
        Ok(Self {
            dim: d,
            count,
            mean,
            cov,
        })
    }

    pub fn std(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.cov[i * self.dim + i].max(0.0).sqrt())
            .collect()
    }
}
