use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FEATURE_DIM};
use crate::error::{Error, Result};

/// Standard deviations below this are replaced by it when normalising.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-column mean and (population) standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / max(std, 1e-8)` for one matrix of any row count.
    pub fn normalize(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::Shape(format!("stats width {} vs data width {}", self.dim(), data.ncols())));
        }
        let mean = Array1::from(self.mean.clone());
        let scale = Array1::from_iter(self.std.iter().map(|s| 1.0 / s.max(STD_FLOOR)));
        Ok((data - &mean) * &scale)
    }

    /// Inverse of [`normalize`](Self::normalize).
    pub fn denormalize(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::Shape(format!("stats width {} vs data width {}", self.dim(), data.ncols())));
        }
        let mean = Array1::from(self.mean.clone());
        let scale = Array1::from_iter(self.std.iter().map(|s| s.max(STD_FLOOR)));
        Ok(data * &scale + &mean)
    }
}

pub fn fit_stats(train: &[FeatureMatrix]) -> Result<FeatureStats> {
    let rows: usize = train.iter().map(FeatureMatrix::rows).sum();
    if rows == 0 {
        return Err(Error::validation("cannot fit feature statistics on an empty set"));
    }
    let mut sum = Array1::<f64>::zeros(FEATURE_DIM);
    for m in train {
        sum += &m.data().sum_axis(Axis(0));
    }
    let mean = sum / rows as f64;
    let mut sq = Array1::<f64>::zeros(FEATURE_DIM);
    for m in train {
        let centered = m.data() - &mean;
        sq += &(&centered * &centered).sum_axis(Axis(0));
    }
    let std = (sq / rows as f64).mapv(f64::sqrt);
    Ok(FeatureStats { mean: mean.to_vec(), std: std.to_vec() })
}

/// Z-normalise a feature matrix with previously fitted statistics. Not
/// idempotent: applying it twice normalises the already-normalised values.
pub fn apply_z(m: &FeatureMatrix, stats: &FeatureStats) -> Result<FeatureMatrix> {
    let mut out = m.clone();
    out.data = stats.normalize(m.data())?;
    Ok(out)
}
