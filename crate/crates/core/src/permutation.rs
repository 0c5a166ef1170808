//! Label-permutation null distributions for the partitioned pairs.
//!
//! Only the pairs of the given partition are re-evaluated on permuted data;
//! the data is never re-partitioned. Every permutation draws its shuffle from
//! its own ChaCha stream keyed by `(seed, permutation index)`, so results do
//! not depend on how permutations are spread over workers.
//!
//! The pooled within-class scatter of a pair equals its total scatter (which
//! does not depend on the labels) minus the between-class scatter. A
//! permutation therefore only needs the class-1 column sums, `O(n1 * d)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Class, LabeledMatrix};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::stats::{mahalanobis_2x2, mahalanobis_single, single_stat, PairStat, TwoSampleSummary};

/// Scale making the MAD consistent for the standard deviation under normality.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Empirical,
    Gaussian,
    #[serde(alias = "robust")]
    RobustGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub permutations: usize,
    pub method: PValueMethod,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default. Never affects results.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            permutations: 1000,
            method: PValueMethod::Empirical,
            seed: 0,
            workers: 0,
        }
    }
}

/// Location and scale of one pair's null sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub mean: f64,
    /// Sample standard deviation (divisor `P - 1`).
    pub std: f64,
    pub median: f64,
    /// Median absolute deviation scaled by [`MAD_SCALE`].
    pub mad: f64,
}

impl NullSummary {
    pub fn of(sample: &[f64]) -> NullSummary {
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let std = if sample.len() > 1 {
            (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let median = median(sample);
        let dev: Vec<f64> = sample.iter().map(|x| (x - median).abs()).collect();
        NullSummary {
            mean,
            std,
            median,
            mad: MAD_SCALE * median_of(dev),
        }
    }
}

/// Sample median; the mean of the two middle values for even lengths.
pub fn median(sample: &[f64]) -> f64 {
    median_of(sample.to_vec())
}

fn median_of(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of an empty sample");
    let mid = v.len() / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if v.len() % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().max_by(f64::total_cmp).unwrap();
        (lo + hi) / 2.0
    }
}

/// A p-value and whether a Gaussian fit had to fall back to the empirical estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    pub fallback: bool,
}

/// Fraction of null draws strictly greater than `observed`.
pub fn pvalue_empirical(observed: f64, null: &[f64]) -> f64 {
    assert!(!null.is_empty(), "empty null sample");
    null.iter().filter(|&&x| x > observed).count() as f64 / null.len() as f64
}

/// Upper tail `1 - Phi(z)` of the standard normal.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Normal-approximation p-value `1 - Phi((observed - center) / scale)`.
///
/// Center and scale are the null mean and standard deviation, or with
/// `robust` the median and scaled MAD. A zero scale (or fewer than two draws)
/// falls back to [`pvalue_empirical`].
pub fn pvalue_gaussian(observed: f64, null: &[f64], robust: bool) -> PValue {
    let s = NullSummary::of(null);
    let (center, scale) = if robust { (s.median, s.mad) } else { (s.mean, s.std) };
    if null.len() < 2 || !(scale > 0.0) {
        return PValue {
            value: pvalue_empirical(observed, null),
            fallback: true,
        };
    }
    PValue {
        value: normal_upper_tail((observed - center) / scale),
        fallback: false,
    }
}

fn pvalue(method: PValueMethod, observed: f64, null: &[f64]) -> PValue {
    match method {
        PValueMethod::Empirical => PValue {
            value: pvalue_empirical(observed, null),
            fallback: false,
        },
        PValueMethod::Gaussian => pvalue_gaussian(observed, null, false),
        PValueMethod::RobustGaussian => pvalue_gaussian(observed, null, true),
    }
}

/// Observed statistic, p-value and null summary of one partition unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub stat: PairStat,
    pub p_value: f64,
    pub fallback: bool,
    pub null: NullSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationResult {
    /// Partition pairs in promotion order, then the leftover single if any.
    pub tests: Vec<PairTest>,
    pub permutations: usize,
    pub method: PValueMethod,
    /// Unit-major null statistics, `tests.len()` runs of `permutations`.
    null: Vec<f64>,
}

impl PermutationResult {
    pub fn null_sample(&self, unit: usize) -> &[f64] {
        &self.null[unit * self.permutations..(unit + 1) * self.permutations]
    }

    /// Number of two-variable units (excludes the leftover single).
    pub fn pair_count(&self) -> usize {
        self.tests.iter().filter(|t| !t.stat.is_single()).count()
    }

    /// Observed statistics of the two-variable units.
    pub fn observed_pair_stats(&self) -> Vec<f64> {
        self.tests
            .iter()
            .filter(|t| !t.stat.is_single())
            .map(|t| t.stat.m)
            .collect()
    }

    /// Null statistics of the two-variable units, one row of length
    /// [`Self::pair_count`] per permutation.
    pub fn null_pair_rows(&self) -> Vec<Vec<f64>> {
        let units: Vec<usize> = (0..self.tests.len())
            .filter(|&u| !self.tests[u].stat.is_single())
            .collect();
        (0..self.permutations)
            .map(|p| units.iter().map(|&u| self.null_sample(u)[p]).collect())
            .collect()
    }

    /// Recomputes every p-value with another method.
    pub fn with_method(&self, method: PValueMethod) -> PermutationResult {
        let mut out = self.clone();
        for (u, t) in out.tests.iter_mut().enumerate() {
            let p = pvalue(method, t.stat.m, self.null_sample(u));
            t.p_value = p.value;
            t.fallback = p.fallback;
        }
        out.method = method;
        out
    }
}

/// Label-invariant pieces of a unit: total scatter about the grand mean.
#[derive(Clone, Copy)]
enum Unit {
    Pair { i: usize, j: usize, tii: f64, tjj: f64, tij: f64 },
    Single { i: usize, tii: f64 },
}

struct Engine<'a> {
    data: &'a LabeledMatrix,
    units: Vec<Unit>,
    /// Per-variable grand mean.
    grand: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(data: &'a LabeledMatrix, partition: &Partition) -> Engine<'a> {
        let n = data.n() as f64;
        let grand: Vec<f64> = (0..data.d())
            .map(|j| data.column(j).iter().sum::<f64>() / n)
            .collect();
        let scatter = |a: usize, b: usize| -> f64 {
            let (ga, gb) = (grand[a], grand[b]);
            data.column(a)
                .iter()
                .zip(data.column(b))
                .map(|(x, y)| (x - ga) * (y - gb))
                .sum()
        };
        let mut units: Vec<Unit> = partition
            .pairs
            .iter()
            .map(|p| Unit::Pair {
                i: p.i,
                j: p.j,
                tii: scatter(p.i, p.i),
                tjj: scatter(p.j, p.j),
                tij: scatter(p.i, p.j),
            })
            .collect();
        if let Some(i) = partition.leftover {
            units.push(Unit::Single { i, tii: scatter(i, i) });
        }
        Engine { data, units, grand }
    }

    /// Statistics of every unit under one label assignment.
    fn evaluate(&self, labels: &[Class]) -> Result<Vec<f64>> {
        let data = self.data;
        let (n1, n2) = (data.n1() as f64, data.n2() as f64);
        let dof = (data.n() - 2) as f64;
        let positives: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == Class::Positive)
            .map(|(k, _)| k)
            .collect();
        // Class means relative to the grand mean, and the mean difference.
        let shift = |v: usize| -> (f64, f64, f64) {
            let col = data.column(v);
            let g = self.grand[v];
            let s1: f64 = positives.iter().map(|&k| col[k] - g).sum();
            let total: f64 = col.iter().map(|x| x - g).sum();
            let (m1, m2) = (s1 / n1, (total - s1) / n2);
            (m1, m2, m1 - m2)
        };
        self.units
            .iter()
            .map(|unit| match *unit {
                Unit::Pair { i, j, tii, tjj, tij } => {
                    let (a1, a2, da) = shift(i);
                    let (b1, b2, db) = shift(j);
                    let sii = (tii - n1 * a1 * a1 - n2 * a2 * a2) / dof;
                    let sjj = (tjj - n1 * b1 * b1 - n2 * b2 * b2) / dof;
                    let sij = (tij - n1 * a1 * b1 - n2 * a2 * b2) / dof;
                    mahalanobis_2x2(da, db, sii, sjj, sij).ok_or_else(|| Error::Numerical {
                        i,
                        j,
                        detail: "singular covariance block under permutation".into(),
                    })
                }
                Unit::Single { i, tii } => {
                    let (a1, a2, da) = shift(i);
                    let sii = (tii - n1 * a1 * a1 - n2 * a2 * a2) / dof;
                    single_stat(da, sii).ok_or_else(|| Error::Numerical {
                        i,
                        j: i,
                        detail: "zero variance under permutation".into(),
                    })
                }
            })
            .collect()
    }
}

/// Shuffled labels for permutation `index`; depends only on `(seed, index)`.
pub fn permuted_labels(labels: &[Class], seed: u64, index: u64) -> Vec<Class> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut out = labels.to_vec();
    out.shuffle(&mut rng);
    out
}

/// Runs the permutation test for every unit of `partition`.
///
/// `summary` must come from `data`; it supplies the observed statistic of
/// the leftover single.
pub fn run_permutations(
    data: &LabeledMatrix,
    summary: &TwoSampleSummary,
    partition: &Partition,
    config: &PermutationConfig,
) -> Result<PermutationResult> {
    if config.permutations == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    if partition.d() != data.d() || summary.d() != data.d() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} variables, data has {}",
            partition.d(),
            data.d()
        )));
    }
    let engine = Engine::new(data, partition);
    let big_p = config.permutations;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<Vec<f64>> = pool.install(|| {
        (0..big_p)
            .into_par_iter()
            .map(|p| engine.evaluate(&permuted_labels(data.labels(), config.seed, p as u64)))
            .collect::<Result<_>>()
    })?;

    let units = engine.units.len();
    let mut null = vec![0.0; units * big_p];
    for (p, row) in rows.iter().enumerate() {
        for (u, &v) in row.iter().enumerate() {
            null[u * big_p + p] = v;
        }
    }

    let mut observed: Vec<PairStat> = partition.pairs.clone();
    if let Some(i) = partition.leftover {
        observed.push(mahalanobis_single(summary, i)?);
    }
    let tests = observed
        .into_iter()
        .enumerate()
        .map(|(u, stat)| {
            let sample = &null[u * big_p..(u + 1) * big_p];
            let p = pvalue(config.method, stat.m, sample);
            if p.fallback {
                log::warn!(
                    "zero-scale null for ({}, {}); using the empirical p-value",
                    stat.i,
                    stat.j
                );
            }
            PairTest {
                stat,
                p_value: p.value,
                fallback: p.fallback,
                null: NullSummary::of(sample),
            }
        })
        .collect();

    Ok(PermutationResult {
        tests,
        permutations: big_p,
        method: config.method,
        null,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub rank: usize,
    pub i: usize,
    pub j: usize,
    pub m: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub pairs: Vec<RankedPair>,
    /// Variables of each ranked unit in order; a single contributes one entry.
    pub variables: Vec<usize>,
}

/// Sorts units by p-value ascending, then statistic descending, then `(i, j)`.
pub fn rank_pairs(result: &PermutationResult) -> RankedList {
    let mut tests: Vec<&PairTest> = result.tests.iter().collect();
    tests.sort_by(|a, b| {
        a.p_value
            .total_cmp(&b.p_value)
            .then(b.stat.m.total_cmp(&a.stat.m))
            .then((a.stat.i, a.stat.j).cmp(&(b.stat.i, b.stat.j)))
    });
    let mut variables = Vec::with_capacity(2 * tests.len());
    let pairs = tests
        .iter()
        .enumerate()
        .map(|(k, t)| {
            variables.push(t.stat.i);
            if !t.stat.is_single() {
                variables.push(t.stat.j);
            }
            RankedPair {
                rank: k + 1,
                i: t.stat.i,
                j: t.stat.j,
                m: t.stat.m,
                p_value: t.p_value,
            }
        })
        .collect();
    RankedList { pairs, variables }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partition_exhaustive;
    use crate::stats::{mahalanobis_pair, summarize};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn fake_result(entries: &[(usize, usize, f64, f64)]) -> PermutationResult {
        let tests = entries
            .iter()
            .map(|&(i, j, m, p)| PairTest {
                stat: PairStat { i, j, m },
                p_value: p,
                fallback: false,
                null: NullSummary::of(&[0.0]),
            })
            .collect::<Vec<_>>();
        PermutationResult {
            null: vec![0.0; tests.len()],
            tests,
            permutations: 1,
            method: PValueMethod::Empirical,
        }
    }

    fn random_data(seed: u64, n1: usize, n2: usize, d: usize) -> LabeledMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n1 + n2;
        let vals: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut labels = vec![Class::Positive; n1];
        labels.extend(std::iter::repeat_n(Class::Negative, n2));
        LabeledMatrix::new(DMatrix::from_vec(n, d, vals), labels).unwrap()
    }

    #[test]
    fn empirical_examples() {
        let null = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pvalue_empirical(5.0, &null), 0.0);
        assert_eq!(pvalue_empirical(2.5, &null), 0.5);
        // ties do not count
        assert_eq!(pvalue_empirical(2.0, &null), 0.5);
        assert_eq!(pvalue_empirical(0.0, &null), 1.0);
        assert_eq!(pvalue_empirical(3.0, &[1.0]), 0.0);
    }

    #[test]
    fn gaussian_examples() {
        let null = [1.0, 2.0, 3.0, 4.0, 5.0];
        let s = NullSummary::of(&null);
        let p = pvalue_gaussian(s.mean, &null, false);
        assert_eq!(p.value, 0.5);
        assert!(!p.fallback);
        let p = pvalue_gaussian(s.mean + 1.6449 * s.std, &null, false);
        assert!((p.value - 0.05).abs() < 1e-4, "{}", p.value);
    }

    #[test]
    fn robust_gaussian_ignores_outlier() {
        let null = [1.0, 1.0, 1.0, 100.0];
        // median 1, MAD 0: the fit is undefined and falls back
        let p = pvalue_gaussian(1.0, &null, true);
        assert!(p.fallback);
        let null = [0.5, 1.0, 1.0, 1.5, 100.0];
        let p = pvalue_gaussian(1.0, &null, true);
        assert_eq!(p.value, 0.5);
        assert!(!p.fallback);
    }

    #[test]
    fn zero_scale_falls_back() {
        let p = pvalue_gaussian(3.0, &[2.0, 2.0, 2.0], false);
        assert!(p.fallback);
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn upper_tail_reference_values() {
        // standard normal table
        let got = normal_upper_tail(1.6448536269514722);
        assert!((got - 0.05).abs() < 1e-12, "{got:e}");
        assert!((normal_upper_tail(-1.959963984540054) - 0.975).abs() < 1e-12);
        assert_eq!(normal_upper_tail(0.0), 0.5);
    }

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        let s = NullSummary::of(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!(s.median, 3.0);
        assert!((s.mad - MAD_SCALE).abs() < 1e-15);
    }

    #[test]
    fn rank_tie_break_by_statistic() {
        let r = rank_pairs(&fake_result(&[(0, 1, 4.0, 0.0), (2, 3, 9.0, 0.0)]));
        assert_eq!((r.pairs[0].i, r.pairs[0].j), (2, 3));
        assert_eq!(r.variables, vec![2, 3, 0, 1]);
        let r = rank_pairs(&fake_result(&[(0, 1, 4.0, 0.2)]));
        assert_eq!(r.pairs.len(), 1);
    }

    #[test]
    fn rank_includes_single_once() {
        let r = rank_pairs(&fake_result(&[(0, 1, 4.0, 0.3), (2, 2, 9.0, 0.1)]));
        assert_eq!(r.variables, vec![2, 0, 1]);
    }

    #[test]
    fn permuted_labels_preserve_class_sizes() {
        let data = random_data(1, 5, 8, 2);
        for p in 0..20 {
            let l = permuted_labels(data.labels(), 9, p);
            assert_eq!(l.iter().filter(|&&c| c == Class::Positive).count(), 5);
        }
        assert_ne!(permuted_labels(data.labels(), 9, 0), permuted_labels(data.labels(), 9, 1));
        assert_eq!(permuted_labels(data.labels(), 9, 3), permuted_labels(data.labels(), 9, 3));
    }

    #[test]
    fn engine_matches_direct_recomputation() {
        let data = random_data(7, 9, 11, 7);
        let summary = summarize(&data).unwrap();
        let partition = partition_exhaustive(&summary).unwrap();
        let engine = Engine::new(&data, &partition);
        for p in 0..5 {
            let labels = permuted_labels(data.labels(), 3, p);
            let fast = engine.evaluate(&labels).unwrap();
            let direct = summarize(&data.relabel(labels).unwrap()).unwrap();
            for (u, pair) in partition.pairs.iter().enumerate() {
                let m = mahalanobis_pair(&direct, pair.i, pair.j).unwrap().m;
                assert!((fast[u] - m).abs() <= 1e-9 * m.max(1.0), "{} vs {}", fast[u], m);
            }
            let single = partition.leftover.unwrap();
            let m = mahalanobis_single(&direct, single).unwrap().m;
            assert!((fast[partition.pairs.len()] - m).abs() <= 1e-9 * m.max(1.0));
        }
        // the identity labelling reproduces the observed statistics
        let same = engine.evaluate(data.labels()).unwrap();
        for (u, pair) in partition.pairs.iter().enumerate() {
            assert!((same[u] - pair.m).abs() <= 1e-9 * pair.m.max(1.0));
        }
    }

    #[test]
    fn result_shape_and_pvalue_grid() {
        let data = random_data(11, 10, 10, 9);
        let summary = summarize(&data).unwrap();
        let partition = partition_exhaustive(&summary).unwrap();
        let config = PermutationConfig {
            permutations: 40,
            seed: 5,
            ..Default::default()
        };
        let r = run_permutations(&data, &summary, &partition, &config).unwrap();
        assert_eq!(r.tests.len(), 5);
        assert_eq!(r.pair_count(), 4);
        for (u, t) in r.tests.iter().enumerate() {
            assert_eq!(r.null_sample(u).len(), 40);
            let k = t.p_value * 40.0;
            assert_eq!(k, k.round());
            assert!((0.0..=1.0).contains(&t.p_value));
        }
        assert_eq!(r.null_pair_rows().len(), 40);
        assert_eq!(r.null_pair_rows()[0].len(), 4);
        let robust = r.with_method(PValueMethod::RobustGaussian);
        assert_eq!(robust.method, PValueMethod::RobustGaussian);
    }

    #[test]
    fn deterministic_across_workers() {
        let data = random_data(21, 12, 14, 16);
        let summary = summarize(&data).unwrap();
        let partition = partition_exhaustive(&summary).unwrap();
        let run = |workers| {
            let config = PermutationConfig {
                permutations: 64,
                seed: 99,
                workers,
                ..Default::default()
            };
            run_permutations(&data, &summary, &partition, &config).unwrap()
        };
        let one = run(1);
        for w in [2, 8] {
            let other = run(w);
            let bits = |r: &PermutationResult| -> Vec<u64> { r.null.iter().map(|x| x.to_bits()).collect() };
            assert_eq!(bits(&one), bits(&other));
            assert_eq!(one, other);
        }
    }

    #[test]
    fn rejects_zero_permutations() {
        let data = random_data(2, 4, 4, 2);
        let summary = summarize(&data).unwrap();
        let partition = partition_exhaustive(&summary).unwrap();
        let config = PermutationConfig {
            permutations: 0,
            ..Default::default()
        };
        assert!(run_permutations(&data, &summary, &partition, &config).is_err());
    }

    proptest! {
        #[test]
        fn ranking_sorts_a_permutation_of_input(ps in proptest::collection::vec((0u32..20, 0.0f64..10.0), 1..40)) {
            let entries: Vec<_> = ps.iter().enumerate()
                .map(|(k, &(p, m))| (2 * k, 2 * k + 1, m, f64::from(p) / 20.0)).collect();
            let r = rank_pairs(&fake_result(&entries));
            prop_assert!(r.pairs.windows(2).all(|w| w[0].p_value <= w[1].p_value));
            let mut reference: Vec<_> = entries.clone();
            reference.sort_by(|a, b| a.3.partial_cmp(&b.3).unwrap()
                .then(b.2.partial_cmp(&a.2).unwrap()).then((a.0, a.1).cmp(&(b.0, b.1))));
            let got: Vec<_> = r.pairs.iter().map(|p| (p.i, p.j)).collect();
            let want: Vec<_> = reference.iter().map(|e| (e.0, e.1)).collect();
            prop_assert_eq!(got, want);
        }
    }
}
