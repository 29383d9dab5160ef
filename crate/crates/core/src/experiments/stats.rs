use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// z-value of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Summary of replicate values for one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Aggregate {
    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Min, max, mean and a normal-approximation 95% interval
/// `mean ± 1.96 · s / √n`, with `s` the sample standard deviation.
///
/// Values are summed in sorted order, so the result does not depend on the
/// order of the input.
pub fn aggregate(values: &[f64]) -> Result<Aggregate, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    let max = sorted[n - 1];
    let mean = (sorted.iter().sum::<f64>() / n as f64).clamp(min, max);
    if n == 1 {
        return Ok(Aggregate {
            n,
            min,
            max,
            mean,
            ci_low: mean,
            ci_high: mean,
        });
    }
    let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let variance = sq.iter().sum::<f64>() / (n - 1) as f64;
    let half = Z_95 * variance.sqrt() / (n as f64).sqrt();
    Ok(Aggregate {
        n,
        min,
        max,
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}
