//! Marginal two-sample t ranking and the label-blind standard-deviation screen.
//!
//! The marginal comparator is the plain pooled two-sample t statistic, not
//! SAM's resampled d-statistic with a fudge factor.

use crate::data::LabeledMatrix;
use crate::error::{Error, Result};
use crate::stats::TwoSampleSummary;

/// Variables sorted by `|t|` descending; ties keep index order.
pub fn rank_marginal(summary: &TwoSampleSummary) -> Vec<usize> {
    let t = summary.t();
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].abs().total_cmp(&t[a].abs()).then(a.cmp(&b)));
    order
}

/// Overall sample standard deviation (divisor `n - 1`) of every column.
pub fn column_sd(data: &LabeledMatrix) -> Vec<f64> {
    let n = data.n() as f64;
    (0..data.d())
        .map(|j| {
            let col = data.column(j);
            let mean = col.iter().sum::<f64>() / n;
            (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect()
}

/// Keeps the columns whose overall standard deviation is strictly above
/// `threshold`. Returns the reduced matrix and, for each kept column, its
/// index in `data`.
pub fn prescreen_by_sd(data: &LabeledMatrix, threshold: f64) -> Result<(LabeledMatrix, Vec<usize>)> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sd threshold must be non-negative, got {threshold}"
        )));
    }
    let kept: Vec<usize> = column_sd(data)
        .iter()
        .enumerate()
        .filter(|(_, &sd)| sd > threshold)
        .map(|(j, _)| j)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterPrescreen { threshold });
    }
    Ok((data.select_columns(&kept)?, kept))
}
