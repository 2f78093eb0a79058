//! Nearest-class-mean streaming baseline: one running-mean prototype per
//! class, with compensated summation so the streaming mean matches the
//! batch mean tightly.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid label {0}: class labels must be positive")]
    InvalidLabel(i64),
    #[error("predict on an empty model")]
    EmptyModel,
}

/// Running per-class sum with Kahan compensation.
#[derive(Debug, Clone)]
pub struct ClassMean {
    sum: Vec<f64>,
    compensation: Vec<f64>,
    count: u64,
}

impl ClassMean {
    fn new(dimension: usize) -> Self {
        Self {
            sum: vec![0.0; dimension],
            compensation: vec![0.0; dimension],
            count: 0,
        }
    }

    fn absorb(&mut self, x: &[f64]) {
        for i in 0..self.sum.len() {
            let y = x[i] as f64 - self.compensation[i];
            let t = self.sum[i] + y;
            self.compensation[i] = (t - self.sum[i]) - y;
            self.sum[i] = t;
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Arithmetic mean of absorbed samples.
    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct NcmModel {
    dimension: usize,
    means: BTreeMap<i64, ClassMean>,
}

impl NcmModel {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            means: BTreeMap::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn class_mean(&self, label: i64) -> Option<&ClassMean> {
        self.means.get(&label)
    }

    pub fn train_step(&mut self, x: &[f64], y: i64) -> Result<(), BaselineError> {
        if x.len() != self.dimension {
            return Err(BaselineError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if y < 1 {
            return Err(BaselineError::InvalidLabel(y));
        }
        self.means
            .entry(y)
            .or_insert_with(|| ClassMean::new(self.dimension))
            .absorb(x);
        Ok(())
    }

    /// Nearest class by dot product against the normalized mean; ties go
    /// to the lowest label.
    pub fn predict(&self, x: &[f64]) -> Result<i64, BaselineError> {
        if x.len() != self.dimension {
            return Err(BaselineError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        let mut best: Option<(i64, f64)> = None;
        for (&label, cm) in &self.means {
            let mean = cm.mean();
            let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
            let sim = if norm > 1e-12 {
                mean.iter().zip(x).map(|(m, &xi)| m / norm * xi as f64).sum()
            } else {
                f64::NEG_INFINITY
            };
            // strict comparison keeps the lowest label on ties
            if best.map_or(true, |(_, s)| sim > s) {
                best = Some((label, sim));
            }
        }
        best.map(|(l, _)| l).ok_or(BaselineError::EmptyModel)
    }
}
