use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sigjeff::eval::{fdp_curve, lda_error, true_nonnull_curve};
use sigjeff::fdr::estimate_fdr;
use sigjeff::io::{load_csv, truth_from_json, truth_to_json, write_csv, LabelMap, LabelSource};
use sigjeff::pipeline::{analyze, fdr_csv, AnalysisConfig, InputSpec, Manifest, FDR_FILE, MANIFEST_FILE};
use sigjeff::simdata::{generate, Design, SimSpec};
use sigjeff::{LabeledMatrix, PValueMethod};

#[derive(Parser)]
#[command(name = "sigjeff", version, about = "Permutation tests for joint effects of variable pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a labeled data set and write the report bundle.
    Run(RunArgs),
    /// Generate a simulated data set with its truth file.
    Simulate(SimulateArgs),
    /// Compare the pair ranking with the marginal ranking against known truth.
    Compare(CompareArgs),
    /// Write the FDR table for chosen statistic cutoffs.
    Fdr(FdrArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PValueArg {
    Empirical,
    Gaussian,
    Robust,
}

impl From<PValueArg> for PValueMethod {
    fn from(a: PValueArg) -> Self {
        match a {
            PValueArg::Empirical => PValueMethod::Empirical,
            PValueArg::Gaussian => PValueMethod::Gaussian,
            PValueArg::Robust => PValueMethod::RobustGaussian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Ar1,
    Block,
    Independent,
}

impl From<DesignArg> for Design {
    fn from(a: DesignArg) -> Self {
        match a {
            DesignArg::Ar1 => Design::Ar1,
            DesignArg::Block => Design::BlockDiagonal,
            DesignArg::Independent => Design::Independent,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Data CSV with a header row of variable names.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Name of the label column in the input.
    #[arg(long, default_value = "label", conflicts_with = "label_file")]
    labels: String,
    /// Separate one-column label CSV, one row per sample.
    #[arg(long)]
    label_file: Option<PathBuf>,
    /// Label mapping such as "mutant=+1,wildtype=-1". Defaults to 1/+1/-1.
    #[arg(long)]
    label_map: Option<String>,
}

#[derive(Args)]
struct AnalysisArgs {
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, value_enum, default_value = "empirical")]
    pvalue: PValueArg,
    /// Active-set size of the fast partition.
    #[arg(long, default_value_t = 200)]
    d0: usize,
    /// Largest dimension partitioned exhaustively.
    #[arg(long, default_value_t = 1000)]
    exhaustive_limit: usize,
    /// Drop columns with sd at or below this value; 0 keeps all.
    #[arg(long, default_value_t = 0.0)]
    sd_threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permutation threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl AnalysisArgs {
    fn config(&self) -> Result<AnalysisConfig> {
        if self.permutations == 0 {
            bail!("--permutations must be positive");
        }
        if !(self.sd_threshold >= 0.0) {
            bail!("--sd-threshold must be non-negative");
        }
        Ok(AnalysisConfig {
            permutations: self.permutations,
            pvalue: self.pvalue.into(),
            d0: self.d0,
            exhaustive_limit: self.exhaustive_limit,
            sd_threshold: self.sd_threshold,
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Repeat the run recorded in a manifest; input and analysis flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    #[arg(long, default_value_t = 500)]
    d: usize,
    #[arg(long, default_value_t = 50)]
    n_per_class: usize,
    /// Lag-one correlation of the AR(1) design.
    #[arg(long, default_value_t = -0.8, allow_hyphen_values = true)]
    rho: f64,
    /// Mahalanobis distance between the class means.
    #[arg(long, default_value_t = 2.5)]
    signal: f64,
    /// Treat --signal as the squared distance.
    #[arg(long)]
    squared_signal: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// JSON array of 1-based non-null variable indices.
    #[arg(long)]
    truth: PathBuf,
    /// Optional test set for LDA misclassification on the top-k variables.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    max_k: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FdrArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Comma-separated statistic cutoffs; defaults to the observed statistics.
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: PathBuf,
}

impl InputArgs {
    fn spec(&self) -> Result<InputSpec> {
        let path = self.input.as_ref().context("--input is required")?;
        Ok(InputSpec {
            path: path.display().to_string(),
            label_column: self.label_file.is_none().then(|| self.labels.clone()),
            label_file: self.label_file.as_ref().map(|p| p.display().to_string()),
            label_map: self.label_map.clone(),
        })
    }
}

fn load(spec: &InputSpec) -> Result<LabeledMatrix> {
    let map = match &spec.label_map {
        Some(s) => s.parse::<LabelMap>().context("invalid --label-map")?,
        None => LabelMap::default(),
    };
    let label_file = spec.label_file.as_ref().map(PathBuf::from);
    let source = match (&label_file, &spec.label_column) {
        (Some(f), _) => LabelSource::File(f),
        (None, Some(c)) => LabelSource::Column(c),
        (None, None) => LabelSource::Column("label"),
    };
    load_csv(Path::new(&spec.path), source, &map).with_context(|| format!("stage load: reading {}", spec.path))
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let (spec, config) = match &args.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let manifest = Manifest::from_json(&text).context("invalid manifest")?;
            let spec = manifest.input.context("manifest has no input section")?;
            (spec, manifest.analysis)
        }
        None => (args.input.spec()?, args.analysis.config()?),
    };
    let data = load(&spec)?;
    let analysis = analyze(&data, &config, args.analysis.workers)?;
    write_files(&args.out_dir, &analysis.bundle(Some(spec), &config))?;
    let run = analysis.run_summary();
    log::info!(
        "{} pairs from {} variables, {} pair evaluations, pi0 {:.3}",
        run.pairs,
        run.d_analyzed,
        run.pair_evaluations,
        run.pi0
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = SimSpec {
        design: args.design.into(),
        d: args.d,
        n_per_class: args.n_per_class,
        rho: args.rho,
        signal: args.signal,
        signal_is_squared: args.squared_signal,
        seed: args.seed,
    };
    let sim = generate(&spec).context("stage simulate")?;
    let mut csv = Vec::new();
    write_csv(&sim.data, &mut csv)?;
    let mut truth = truth_to_json(&sim.truth);
    truth.push('\n');
    write_files(
        &args.out_dir,
        &[("data.csv".into(), String::from_utf8(csv)?), ("truth.json".into(), truth)],
    )
}

fn compare(args: CompareArgs) -> Result<()> {
    let spec = args.input.spec()?;
    let config = args.analysis.config()?;
    let data = load(&spec)?;
    let text = fs::read_to_string(&args.truth).with_context(|| format!("reading {}", args.truth.display()))?;
    let truth = truth_from_json(&text, data.d()).context("stage compare: invalid truth file")?;
    let test = match &args.test {
        Some(p) => Some(load(&InputSpec { path: p.display().to_string(), ..spec.clone() })?),
        None => None,
    };
    let analysis = analyze(&data, &config, args.analysis.workers)?;
    let pair_rank = analysis.sigjeff_variables();
    let marg_rank = analysis.marginal_variables();
    let max_k = args.max_k.min(pair_rank.len());
    let pair_hits = true_nonnull_curve(&pair_rank, &truth, max_k);
    let marg_hits = true_nonnull_curve(&marg_rank, &truth, max_k);
    let pair_fdp = fdp_curve(&pair_rank, &truth, max_k);
    let marg_fdp = fdp_curve(&marg_rank, &truth, max_k);
    let mut out = String::from("k,sigjeff_true_nonnull,marginal_true_nonnull,sigjeff_fdp,marginal_fdp");
    if test.is_some() {
        out.push_str(",sigjeff_lda_error,marginal_lda_error");
    }
    out.push('\n');
    for k in 0..max_k {
        let _ = write!(out, "{},{},{},{},{}", k + 1, pair_hits[k], marg_hits[k], pair_fdp[k], marg_fdp[k]);
        if let Some(test) = &test {
            let e1 = lda_error(&data, test, &pair_rank[..=k]).context("stage compare")?;
            let e2 = lda_error(&data, test, &marg_rank[..=k]).context("stage compare")?;
            let _ = write!(out, ",{e1},{e2}");
        }
        out.push('\n');
    }
    write_files(&args.out_dir, &[("comparison.csv".into(), out)])
}

fn fdr(args: FdrArgs) -> Result<()> {
    let spec = args.input.spec()?;
    let config = args.analysis.config()?;
    let data = load(&spec)?;
    let analysis = analyze(&data, &config, args.analysis.workers)?;
    let table = match &args.cutoffs {
        Some(c) => {
            if c.iter().any(|x| !x.is_finite()) {
                bail!("--cutoffs must be finite numbers");
            }
            estimate_fdr(&analysis.permutation, Some(c)).context("stage fdr")?
        }
        None => analysis.fdr.clone(),
    };
    let manifest = Manifest {
        tool: "sigjeff".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: Some(spec),
        analysis: config,
        run: Some(analysis.run_summary()),
    };
    write_files(
        &args.out_dir,
        &[(FDR_FILE.into(), fdr_csv(&table)), (MANIFEST_FILE.into(), manifest.to_json())],
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Fdr(a) => fdr(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
