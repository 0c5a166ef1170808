//! Permutation-based FDR estimate for the partitioned pairs.
//!
//! For each cutoff `c` the number of observed pair statistics above `c` is
//! compared with the median and 90th percentile (nearest rank) of the same
//! count over the permutations, scaled by an estimate of the null proportion
//! `pi0`. Only two-variable units enter; the odd leftover single is excluded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::{median, PermutationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrRow {
    pub cutoff: f64,
    /// Observed pairs with statistic strictly above the cutoff.
    pub n_called: usize,
    /// Median over permutations of the pairs called, before `pi0` scaling.
    pub median_null_called: usize,
    pub p90_null_called: usize,
    /// `pi0 * median_null_called / n_called`, `0` when nothing is called.
    pub fdr_median_raw: f64,
    pub fdr_p90_raw: f64,
}

impl FdrRow {
    pub fn fdr_median(&self) -> f64 {
        self.fdr_median_raw.min(1.0)
    }

    pub fn fdr_p90(&self) -> f64 {
        self.fdr_p90_raw.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrTable {
    pub pi0: f64,
    pub rows: Vec<FdrRow>,
}

/// Nearest-rank percentile of non-empty `sorted`: element `ceil(q * n)` (1-based).
pub fn nearest_rank(sorted: &[usize], q: f64) -> usize {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// `#{observed < q50} / (0.5 * pairs)`, truncated at 1, where `q50` is the
/// median of all permuted statistics.
pub fn estimate_pi0(observed: &[f64], null: &[f64]) -> Result<f64> {
    if observed.is_empty() || null.is_empty() {
        return Err(Error::InvalidArgument(
            "pi0 needs observed and permuted statistics".into(),
        ));
    }
    let q50 = median(null);
    let below = observed.iter().filter(|&&m| m < q50).count();
    Ok((below as f64 / (0.5 * observed.len() as f64)).min(1.0))
}

/// Sorted unique observed pair statistics, the default cutoff grid.
pub fn default_cutoffs(result: &PermutationResult) -> Vec<f64> {
    let mut c = result.observed_pair_stats();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Number of entries of ascending `sorted` strictly greater than `c`.
fn count_above(sorted: &[f64], c: f64) -> usize {
    sorted.len() - sorted.partition_point(|&x| x <= c)
}

/// FDR table at the given cutoffs, or at [`default_cutoffs`] when `None`.
pub fn estimate_fdr(result: &PermutationResult, cutoffs: Option<&[f64]>) -> Result<FdrTable> {
    let observed = result.observed_pair_stats();
    if observed.is_empty() {
        return Err(Error::InvalidArgument("no pairs to estimate FDR for".into()));
    }
    let defaults;
    let cutoffs = match cutoffs {
        Some(c) => c,
        None => {
            defaults = default_cutoffs(result);
            &defaults
        }
    };
    if cutoffs.is_empty() {
        return Err(Error::InvalidArgument("empty cutoff list".into()));
    }

    let mut rows = result.null_pair_rows();
    for r in &mut rows {
        r.sort_by(f64::total_cmp);
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let pi0 = estimate_pi0(&observed, &flat)?;

    let mut sorted_obs = observed;
    sorted_obs.sort_by(f64::total_cmp);
    let rows = cutoffs
        .iter()
        .map(|&c| {
            let n_called = count_above(&sorted_obs, c);
            let mut counts: Vec<usize> = rows.iter().map(|r| count_above(r, c)).collect();
            counts.sort_unstable();
            let median_null_called = nearest_rank(&counts, 0.5);
            let p90_null_called = nearest_rank(&counts, 0.9);
            let ratio = |k: usize| {
                if n_called == 0 {
                    0.0
                } else {
                    pi0 * k as f64 / n_called as f64
                }
            };
            FdrRow {
                cutoff: c,
                n_called,
                median_null_called,
                p90_null_called,
                fdr_median_raw: ratio(median_null_called),
                fdr_p90_raw: ratio(p90_null_called),
            }
        })
        .collect();
    Ok(FdrTable { pi0, rows })
}
