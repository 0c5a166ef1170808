//! Greedy disjoint pairing of variables by descending Mahalanobis statistic.
//!
//! Two strategies produce a [`Partition`]:
//!
//! * [`partition_exhaustive`] evaluates all `d(d-1)/2` pairs and repeatedly
//!   promotes the remaining pair with the largest statistic.
//! * [`partition_fast`] assumes the best pair of any subset lies among its
//!   top `d0` variables by `|t|`. It keeps an active set of pairs over `d0`
//!   variables, promotes the best one, drops every pair touching the promoted
//!   variables, and refills from a waiting list ordered by `|t|`. Only
//!   `O(d0 * d)` pairs are evaluated and at most `d0(d0-1)/2` are held.
//!
//! Ties are broken towards the lexicographically smallest `(i, j)`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mahalanobis_pair, PairStat, TwoSampleSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionMode {
    Exhaustive,
    Fast { d0: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Pairs in promotion order, each with `i < j`.
    pub pairs: Vec<PairStat>,
    /// The unpaired variable when `d` is odd.
    pub leftover: Option<usize>,
    pub mode: PartitionMode,
    /// Number of pair statistics evaluated while building the partition.
    pub evaluations: usize,
    /// Largest number of pair statistics held at once.
    pub peak_active_pairs: usize,
}

impl Partition {
    pub fn d(&self) -> usize {
        2 * self.pairs.len() + usize::from(self.leftover.is_some())
    }

    /// Variables in promotion order, pair members adjacent, leftover last.
    pub fn flattened(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.pairs.iter().flat_map(|p| [p.i, p.j]).collect();
        out.extend(self.leftover);
        out
    }
}

/// Orders `a` before `b` when it has the larger statistic, then the smaller `(i, j)`.
fn ranks_before(a: &PairStat, b: &PairStat) -> Ordering {
    b.m.total_cmp(&a.m).then_with(|| (a.i, a.j).cmp(&(b.i, b.j)))
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Exhaustive greedy partition using the pooled two-sample statistics.
pub fn partition_exhaustive(summary: &TwoSampleSummary) -> Result<Partition> {
    exhaustive_from_fn(summary.d(), |i, j| mahalanobis_pair(summary, i, j).map(|p| p.m))
}

/// Exhaustive greedy partition over an arbitrary symmetric statistic `stat(i, j)`, `i < j`.
///
/// All pairs are evaluated in parallel before the sequential selection.
pub fn exhaustive_from_fn<F>(d: usize, stat: F) -> Result<Partition>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "partition needs at least 2 variables, got {d}"
        )));
    }
    let rows: Vec<Vec<PairStat>> = (0..d)
        .into_par_iter()
        .map(|i| {
            (i + 1..d)
                .map(|j| stat(i, j).map(|m| PairStat { i, j, m }))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<PairStat> = rows.into_iter().flatten().collect();
    let evaluations = all.len();
    all.par_sort_unstable_by(ranks_before);

    // Scanning the sorted list and keeping every pair whose variables are
    // both unused is the same as repeatedly taking the maximum of what is left.
    let mut used = vec![false; d];
    let mut pairs = Vec::with_capacity(d / 2);
    for p in all {
        if !used[p.i] && !used[p.j] {
            used[p.i] = true;
            used[p.j] = true;
            pairs.push(p);
            if pairs.len() == d / 2 {
                break;
            }
        }
    }
    let leftover = used.iter().position(|u| !u);
    Ok(Partition {
        pairs,
        leftover,
        mode: PartitionMode::Exhaustive,
        evaluations,
        peak_active_pairs: evaluations,
    })
}

/// Variables ordered by `|t|` descending, ties by index.
pub fn waiting_list(summary: &TwoSampleSummary) -> Vec<usize> {
    let t = summary.t();
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].abs().total_cmp(&t[a].abs()).then(a.cmp(&b)));
    order
}

/// Resolves the requested active-set size: clamps to `d`, rounds odd values up.
pub fn effective_d0(d: usize, d0: usize) -> Result<usize> {
    if d0 < 2 {
        return Err(Error::InvalidArgument(format!("d0 must be at least 2, got {d0}")));
    }
    if d0 > d {
        log::warn!("d0 = {d0} exceeds the number of variables; using d0 = {d}");
        return Ok(d);
    }
    Ok(if d0 % 2 == 1 { (d0 + 1).min(d) } else { d0 })
}

/// Fast active-set partition; `d0` is clamped and rounded per [`effective_d0`].
pub fn partition_fast(summary: &TwoSampleSummary, d0: usize) -> Result<Partition> {
    let order = waiting_list(summary);
    let d0 = effective_d0(order.len(), d0)?;
    fast_from_fn(&order, d0, |i, j| mahalanobis_pair(summary, i, j).map(|p| p.m))
}

/// Fast active-set partition over a given waiting list and statistic.
///
/// `order` must be a permutation of `0..d`; `stat` is called with `i < j`.
pub fn fast_from_fn<F>(order: &[usize], d0: usize, mut stat: F) -> Result<Partition>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let d = order.len();
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "partition needs at least 2 variables, got {d}"
        )));
    }
    if !(2..=d).contains(&d0) {
        return Err(Error::InvalidArgument(format!("d0 = {d0} outside 2..={d}")));
    }
    let mut evaluations = 0usize;
    let mut eval = |u: usize, v: usize| -> Result<PairStat> {
        let (i, j) = ordered(u, v);
        evaluations += 1;
        stat(i, j).map(|m| PairStat { i, j, m })
    };

    let mut vars: Vec<usize> = order[..d0].to_vec();
    let mut active = Vec::with_capacity(d0 * (d0 - 1) / 2);
    for (k, &u) in vars.iter().enumerate() {
        for &v in &vars[k + 1..] {
            active.push(eval(u, v)?);
        }
    }
    let mut peak = active.len();
    let mut next = d0;
    let mut pairs = Vec::with_capacity(d / 2);

    while let Some(best) = active.iter().min_by(|a, b| ranks_before(a, b)).copied() {
        pairs.push(best);
        active.retain(|p| p.i != best.i && p.i != best.j && p.j != best.i && p.j != best.j);
        vars.retain(|&v| v != best.i && v != best.j);

        let take = (d - next).min(2);
        for &v in &order[next..next + take] {
            for &u in &vars {
                active.push(eval(u, v)?);
            }
            vars.push(v);
        }
        next += take;
        peak = peak.max(active.len());
    }
    debug_assert!(vars.len() <= 1 && next == d);

    Ok(Partition {
        pairs,
        leftover: vars.first().copied(),
        mode: PartitionMode::Fast { d0 },
        evaluations,
        peak_active_pairs: peak,
    })
}

/// Pair evaluations performed by the fast strategy:
/// `d0(d0-1)/2 + (1 + 2(d0-2)) * floor((d-d0)/2)`, plus `d0 - 2` for the
/// final single-variable refill when `d - d0` is odd.
pub fn pair_count_fast(d: usize, d0: usize) -> usize {
    assert!((2..=d).contains(&d0), "pair_count_fast needs 2 <= d0 <= d");
    let base = d0 * (d0 - 1) / 2 + (1 + 2 * (d0 - 2)) * ((d - d0) / 2);
    if (d - d0) % 2 == 1 {
        base + (d0 - 2)
    } else {
        base
    }
}
