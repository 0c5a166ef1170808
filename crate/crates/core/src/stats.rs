//! Two-sample summaries and the two-variable Mahalanobis statistic.
//!
//! The full `d x d` pooled covariance is never formed. Each variable is
//! stored centered at its own class mean, and any 2x2 block is a pair of
//! dot products over those columns, which keeps memory at `O(n * d)`.

use serde::{Deserialize, Serialize};

use crate::data::{Class, LabeledMatrix};
use crate::error::{Error, Result};

/// Relative determinant below which a 2x2 block counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;
/// Ridge added to the diagonal of a singular block, relative to its mean variance.
pub const RIDGE_SCALE: f64 = 1e-8;

/// Squared Mahalanobis distance between class means on one or two variables.
///
/// For a single variable `j == i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub i: usize,
    pub j: usize,
    pub m: f64,
}

impl PairStat {
    pub fn is_single(&self) -> bool {
        self.i == self.j
    }
}

/// Class mean difference, pooled variances and t statistics, plus the
/// class-centered columns needed for on-demand covariance blocks.
#[derive(Debug, Clone)]
pub struct TwoSampleSummary {
    n1: usize,
    n2: usize,
    delta: Vec<f64>,
    pooled_var: Vec<f64>,
    t: Vec<f64>,
    /// Variable-major, `d` runs of length `n`.
    centered: Vec<f64>,
}

/// Computes the summary of `data`; the pooled divisor is `n - 2`.
pub fn summarize(data: &LabeledMatrix) -> Result<TwoSampleSummary> {
    let (n, d) = (data.n(), data.d());
    let (n1, n2) = (data.n1(), data.n2());
    if n1 < 2 || n2 < 2 {
        return Err(Error::IllPosed(format!(
            "each class needs at least 2 samples (got n1 = {n1}, n2 = {n2})"
        )));
    }
    let labels = data.labels();
    let dof = (n - 2) as f64;
    let scale = (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();

    let mut delta = Vec::with_capacity(d);
    let mut pooled_var = Vec::with_capacity(d);
    let mut t = Vec::with_capacity(d);
    let mut centered = Vec::with_capacity(n * d);
    for j in 0..d {
        let col = data.column(j);
        let (mut s1, mut s2) = (0.0, 0.0);
        for (&x, &c) in col.iter().zip(labels) {
            match c {
                Class::Positive => s1 += x,
                Class::Negative => s2 += x,
            }
        }
        let (mean1, mean2) = (s1 / n1 as f64, s2 / n2 as f64);
        let mut ss = 0.0;
        for (&x, &c) in col.iter().zip(labels) {
            let r = match c {
                Class::Positive => x - mean1,
                Class::Negative => x - mean2,
            };
            ss += r * r;
            centered.push(r);
        }
        let dj = mean1 - mean2;
        let var = ss / dof;
        delta.push(dj);
        pooled_var.push(var);
        t.push(t_statistic(dj, var, scale));
    }
    Ok(TwoSampleSummary {
        n1,
        n2,
        delta,
        pooled_var,
        t,
        centered,
    })
}

fn t_statistic(delta: f64, var: f64, scale: f64) -> f64 {
    if var > 0.0 {
        delta / (var.sqrt() * scale)
    } else if delta == 0.0 {
        0.0
    } else {
        delta.signum() * f64::INFINITY
    }
}

impl TwoSampleSummary {
    pub fn d(&self) -> usize {
        self.delta.len()
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Class-1 mean minus class-2 mean, per variable.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn pooled_var(&self) -> &[f64] {
        &self.pooled_var
    }

    /// Two-sample t statistics `delta / sqrt(var * (1/n1 + 1/n2))`.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    fn centered(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.centered[j * n..(j + 1) * n]
    }

    /// Pooled within-class covariance of variables `i` and `j`.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.pooled_var[i];
        }
        let dot: f64 = self
            .centered(i)
            .iter()
            .zip(self.centered(j))
            .map(|(a, b)| a * b)
            .sum();
        dot / (self.n() - 2) as f64
    }
}

/// `delta' S^{-1} delta` for a 2x2 covariance `[[s_ii, s_ij], [s_ij, s_jj]]`,
/// via the closed-form inverse.
///
/// A block with `det <= 1e-12 * s_ii * s_jj` gets a ridge of
/// `1e-8 * (s_ii + s_jj) / 2` on its diagonal first. Returns `None` if the
/// result is still not finite.
pub fn mahalanobis_2x2(di: f64, dj: f64, s_ii: f64, s_jj: f64, s_ij: f64) -> Option<f64> {
    let (mut a, mut b) = (s_ii, s_jj);
    let mut det = a * b - s_ij * s_ij;
    if det <= SINGULAR_RTOL * a * b {
        let ridge = RIDGE_SCALE * (a + b) / 2.0;
        a += ridge;
        b += ridge;
        det = a * b - s_ij * s_ij;
    }
    let m = (di * di * b - 2.0 * di * dj * s_ij + dj * dj * a) / det;
    m.is_finite().then_some(m)
}

/// Squared Mahalanobis distance between the class means on variables `i`, `j`.
pub fn mahalanobis_pair(summary: &TwoSampleSummary, i: usize, j: usize) -> Result<PairStat> {
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "mahalanobis_pair needs two distinct variables, got ({i}, {i})"
        )));
    }
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let d = summary.delta();
    let m = mahalanobis_2x2(
        d[lo],
        d[hi],
        summary.pooled_var[lo],
        summary.pooled_var[hi],
        summary.cov(lo, hi),
    )
    .ok_or_else(|| Error::Numerical {
        i: lo,
        j: hi,
        detail: "singular covariance block".into(),
    })?;
    Ok(PairStat { i: lo, j: hi, m })
}

/// Univariate analogue `delta_i^2 / var_i`, used for the odd leftover variable.
pub fn mahalanobis_single(summary: &TwoSampleSummary, i: usize) -> Result<PairStat> {
    let m = single_stat(summary.delta[i], summary.pooled_var[i]).ok_or_else(|| Error::Numerical {
        i,
        j: i,
        detail: "zero pooled variance".into(),
    })?;
    Ok(PairStat { i, j: i, m })
}

pub(crate) fn single_stat(delta: f64, var: f64) -> Option<f64> {
    if var > 0.0 {
        let m = delta * delta / var;
        m.is_finite().then_some(m)
    } else {
        None
    }
}
