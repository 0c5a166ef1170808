//! End-to-end analysis: prescreen, partition, permutation test, ranking,
//! FDR table and the marginal comparison, plus the report files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::LabeledMatrix;
use crate::error::{Error, Result};
use crate::fdr::{estimate_fdr, FdrTable};
use crate::marginal::{prescreen_by_sd, rank_marginal};
use crate::partition::{partition_exhaustive, partition_fast, Partition, PartitionMode};
use crate::permutation::{rank_pairs, run_permutations, PValueMethod, PermutationConfig, PermutationResult, RankedList};
use crate::stats::{summarize, TwoSampleSummary};

pub const RANKED_PAIRS_FILE: &str = "ranked_pairs.csv";
pub const VARIABLE_RANKING_FILE: &str = "variable_ranking.csv";
pub const FDR_FILE: &str = "fdr.csv";
pub const MARGINAL_FILE: &str = "marginal_ranking.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Every setting that affects results. Worker count is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub permutations: usize,
    pub pvalue: PValueMethod,
    pub d0: usize,
    /// Largest dimension partitioned exhaustively; above it the fast strategy is used.
    pub exhaustive_limit: usize,
    /// Columns with overall sd at or below this are dropped; 0 disables screening.
    pub sd_threshold: f64,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            permutations: 1000,
            pvalue: PValueMethod::Empirical,
            d0: 200,
            exhaustive_limit: 1000,
            sd_threshold: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    /// Original column index of each analyzed variable.
    pub kept: Vec<usize>,
    /// Names of the analyzed variables.
    pub names: Vec<String>,
    pub d_input: usize,
    pub summary: TwoSampleSummary,
    pub partition: Partition,
    pub permutation: PermutationResult,
    pub ranked: RankedList,
    pub fdr: FdrTable,
    /// Analyzed-variable indices by `|t|`.
    pub marginal: Vec<usize>,
}

/// Runs the full procedure on `data` with `workers` permutation threads
/// (0 = rayon default).
pub fn analyze(data: &LabeledMatrix, config: &AnalysisConfig, workers: usize) -> Result<Analysis> {
    let (reduced, kept) = if config.sd_threshold > 0.0 {
        prescreen_by_sd(data, config.sd_threshold).map_err(|e| e.in_stage("prescreen"))?
    } else {
        (data.clone(), (0..data.d()).collect())
    };
    let d = reduced.d();
    if d < 2 {
        return Err(Error::IllPosed(format!("need at least 2 variables, have {d}")).in_stage("partition"));
    }
    let summary = summarize(&reduced).map_err(|e| e.in_stage("summarize"))?;
    let partition = if d <= config.exhaustive_limit {
        partition_exhaustive(&summary)
    } else {
        partition_fast(&summary, config.d0)
    }
    .map_err(|e| e.in_stage("partition"))?;
    let perm_config = PermutationConfig {
        permutations: config.permutations,
        method: config.pvalue,
        seed: config.seed,
        workers,
    };
    let permutation =
        run_permutations(&reduced, &summary, &partition, &perm_config).map_err(|e| e.in_stage("permutation"))?;
    let ranked = rank_pairs(&permutation);
    let fdr = if permutation.pair_count() > 0 {
        estimate_fdr(&permutation, None).map_err(|e| e.in_stage("fdr"))?
    } else {
        FdrTable { pi0: 1.0, rows: vec![] }
    };
    let marginal = rank_marginal(&summary);
    Ok(Analysis {
        kept,
        names: reduced.names().to_vec(),
        d_input: data.d(),
        summary,
        partition,
        permutation,
        ranked,
        fdr,
        marginal,
    })
}

impl Analysis {
    /// Flattened SigJEff variable ranking in original column indices.
    pub fn sigjeff_variables(&self) -> Vec<usize> {
        self.ranked.variables.iter().map(|&v| self.kept[v]).collect()
    }

    /// Marginal `|t|` ranking in original column indices.
    pub fn marginal_variables(&self) -> Vec<usize> {
        self.marginal.iter().map(|&v| self.kept[v]).collect()
    }

    fn index(&self, v: usize) -> usize {
        self.kept[v] + 1
    }

    pub fn ranked_pairs_csv(&self) -> String {
        let mut s = String::from("rank,var_i,var_j,name_i,name_j,m,p_value\n");
        for p in &self.ranked.pairs {
            let (j, name_j) = if p.i == p.j {
                (String::new(), String::new())
            } else {
                (self.index(p.j).to_string(), csv_field(&self.names[p.j]))
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.rank,
                self.index(p.i),
                j,
                csv_field(&self.names[p.i]),
                name_j,
                p.m,
                p.p_value
            );
        }
        s
    }

    pub fn variable_ranking_csv(&self) -> String {
        let mut s = String::from("rank,var,name,pair_rank\n");
        let mut rank = 0;
        for p in &self.ranked.pairs {
            let members: &[usize] = if p.i == p.j { &[p.i] } else { &[p.i, p.j] };
            for &v in members {
                rank += 1;
                let _ = writeln!(s, "{},{},{},{}", rank, self.index(v), csv_field(&self.names[v]), p.rank);
            }
        }
        s
    }

    pub fn fdr_csv(&self) -> String {
        fdr_csv(&self.fdr)
    }

    pub fn marginal_csv(&self) -> String {
        let mut s = String::from("rank,var,name,t\n");
        for (k, &v) in self.marginal.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", k + 1, self.index(v), csv_field(&self.names[v]), self.summary.t()[v]);
        }
        s
    }

    pub fn run_summary(&self) -> RunSummary {
        RunSummary {
            n: self.summary.n(),
            n1: self.summary.n1(),
            n2: self.summary.n2(),
            d_input: self.d_input,
            d_analyzed: self.kept.len(),
            partition_mode: self.partition.mode,
            pair_evaluations: self.partition.evaluations,
            peak_active_pairs: self.partition.peak_active_pairs,
            pairs: self.partition.pairs.len(),
            singleton: self.partition.leftover.map(|v| self.index(v)),
            pi0: self.fdr.pi0,
            gaussian_fallbacks: self.permutation.tests.iter().filter(|t| t.fallback).count(),
        }
    }

    /// All report files, in a fixed order, as `(file name, contents)`.
    pub fn bundle(&self, input: Option<InputSpec>, config: &AnalysisConfig) -> Vec<(String, String)> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input,
            analysis: config.clone(),
            run: Some(self.run_summary()),
        };
        vec![
            (RANKED_PAIRS_FILE.into(), self.ranked_pairs_csv()),
            (VARIABLE_RANKING_FILE.into(), self.variable_ranking_csv()),
            (FDR_FILE.into(), self.fdr_csv()),
            (MARGINAL_FILE.into(), self.marginal_csv()),
            (MANIFEST_FILE.into(), manifest.to_json()),
        ]
    }
}

pub fn fdr_csv(table: &FdrTable) -> String {
    let mut s = String::from("cutoff,n_called,median_null_called,p90_null_called,pi0,fdr_median,fdr_p90\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.cutoff,
            r.n_called,
            r.median_null_called,
            r.p90_null_called,
            table.pi0,
            r.fdr_median(),
            r.fdr_p90()
        );
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Where the data came from, as given on the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub d_input: usize,
    pub d_analyzed: usize,
    pub partition_mode: PartitionMode,
    pub pair_evaluations: usize,
    pub peak_active_pairs: usize,
    pub pairs: usize,
    /// 1-based index of the unpaired variable, if any.
    pub singleton: Option<usize>,
    pub pi0: f64,
    pub gaussian_fallbacks: usize,
}

/// Run record; `input` and `analysis` are enough to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    #[serde(default)]
    pub input: Option<InputSpec>,
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub run: Option<RunSummary>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.analysis.permutations == 0 {
            return Err(Error::InvalidArgument("manifest has zero permutations".into()));
        }
        if !(m.analysis.sd_threshold >= 0.0) {
            return Err(Error::InvalidArgument("manifest has a negative sd threshold".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simdata::{generate, Design, SimSpec};

    fn small_config() -> AnalysisConfig {
        AnalysisConfig {
            permutations: 50,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn odd_dimension_records_singleton() {
        let sim = generate(&SimSpec::new(Design::Independent, 51, 10, 1)).unwrap();
        let a = analyze(&sim.data, &small_config(), 1).unwrap();
        let run = a.run_summary();
        assert_eq!(run.pairs, 25);
        assert!(run.singleton.is_some());
        assert_eq!(a.sigjeff_variables().len(), 51);
        let manifest = Manifest::from_json(&a.bundle(None, &small_config())[4].1).unwrap();
        assert_eq!(manifest.run.unwrap().singleton, run.singleton);
    }

    #[test]
    fn fast_mode_above_limit() {
        let sim = generate(&SimSpec::new(Design::Independent, 60, 10, 2)).unwrap();
        let config = AnalysisConfig {
            exhaustive_limit: 40,
            d0: 10,
            ..small_config()
        };
        let a = analyze(&sim.data, &config, 1).unwrap();
        assert_eq!(a.partition.mode, PartitionMode::Fast { d0: 10 });
        assert_eq!(a.partition.evaluations, crate::partition::pair_count_fast(60, 10));
    }

    #[test]
    fn prescreen_maps_back_to_original_indices() {
        let sim = generate(&SimSpec::new(Design::Independent, 50, 10, 3)).unwrap();
        let mut values = sim.data.values().clone();
        for r in 0..values.nrows() {
            values[(r, 4)] = 1.0;
        }
        let data = LabeledMatrix::new(values, sim.data.labels().to_vec()).unwrap();
        let config = AnalysisConfig {
            sd_threshold: 1e-9,
            ..small_config()
        };
        let a = analyze(&data, &config, 1).unwrap();
        assert_eq!(a.kept.len(), 49);
        let vars = a.sigjeff_variables();
        assert!(!vars.contains(&4));
        assert!(vars.contains(&49));
        assert!(!a.variable_ranking_csv().contains(",5,V5,"));
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            tool: "sigjeff".into(),
            version: "0.1.0".into(),
            input: Some(InputSpec {
                path: "x.csv".into(),
                label_column: Some("y".into()),
                label_file: None,
                label_map: None,
            }),
            analysis: small_config(),
            run: None,
        };
        assert_eq!(Manifest::from_json(&m.to_json()).unwrap(), m);
        assert!(Manifest::from_json("{}").is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
