//! Batches of training vectors.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A set of `count` data vectors of dimension `n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBatch {
    n: usize,
    values: Vec<f64>,
}

impl DataBatch {
    pub fn empty(n: usize) -> Self {
        DataBatch {
            n,
            values: Vec::new(),
        }
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() % n != 0 {
            return Err(Error::InvalidInput(format!(
                "value buffer of length {} is not a multiple of n = {n}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data batch values"));
        }
        Ok(DataBatch { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn case(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn cases(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn push_case(&mut self, case: &[f64]) -> Result<()> {
        if case.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: case.len(),
            });
        }
        self.values.extend_from_slice(case);
        Ok(())
    }

    /// Uniform sample of `size` cases with replacement.
    pub fn sample_with_replacement(&self, size: usize, rng: &mut RngStream) -> DataBatch {
        let mut out = DataBatch::empty(self.n);
        for _ in 0..size {
            let i = rng.below(self.count());
            out.values.extend_from_slice(self.case(i));
        }
        out
    }
}
