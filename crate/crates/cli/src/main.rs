use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use embedscope::analysis::Scenario;
use embedscope::classifier::Optimizer;
use embedscope::{Error, TrainConfig};

mod commands;

const FORMATS: &str = "\
Input formats:
  *.csv   header row, numeric feature columns and one label column
          (see --label-column); labels are mapped to 0..C-1 in order of
          first appearance and the map is recorded in reports
  other   binary dataset file (magic EMBD, little-endian; see README)

Reports are JSON files and are only written to the paths given with
--out/--report. Text summaries go to standard output.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.";

#[derive(Parser)]
#[command(
    name = "embedscope",
    version,
    about = "Redundancy analysis for labeled embedding vectors",
    after_help = FORMATS,
    propagate_version = true
)]
struct Cli {
    /// Leave the creation timestamp out of reports.
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Label column name for CSV inputs.
    #[arg(long, global = true, default_value = "label", value_name = "NAME")]
    label_column: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-mixture dataset, or a pretrained/finetuned-like pair.
    #[command(after_help = FORMATS)]
    Synth(SynthArgs),
    /// Stratified train/test split.
    #[command(after_help = FORMATS)]
    Split(SplitArgs),
    /// Fit PCA and save the model.
    #[command(after_help = FORMATS)]
    PcaFit(PcaFitArgs),
    /// Probe accuracy against the number of kept dimensions.
    #[command(after_help = FORMATS)]
    Curve(CurveArgs),
    /// Per-component ratio of explained variance between two corpora.
    #[command(after_help = FORMATS)]
    VarianceRatio(VarianceRatioArgs),
    /// Salient-neuron table: chance, all dims, best-1, best-n and natural subset.
    #[command(after_help = FORMATS)]
    Salient(SalientArgs),
    /// Histogram of one-dimension probe accuracies.
    #[command(after_help = FORMATS)]
    Histogram(HistogramArgs),
    /// PCA probe accuracy as the PCA fitting sample grows.
    #[command(after_help = FORMATS)]
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ProbeArgs {
    /// L2 penalty on probe weights.
    #[arg(long, default_value_t = 1e-4, value_name = "LAMBDA")]
    l2: f64,
    /// Maximum optimizer iterations per probe.
    #[arg(long, default_value_t = 2000, value_name = "N")]
    max_iter: usize,
    /// Stop once a step lowers the loss by less than this.
    #[arg(long, default_value_t = 1e-8, value_name = "TOL")]
    tol: f64,
    /// Initial step size.
    #[arg(long, default_value_t = 0.5, value_name = "RATE")]
    learning_rate: f64,
    /// Probe optimizer.
    #[arg(long, value_enum, default_value_t = OptimizerArg::Lbfgs)]
    optimizer: OptimizerArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Lbfgs,
    Gd,
}

impl ProbeArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            max_iterations: self.max_iter,
            loss_tolerance: self.tol,
            l2_penalty: self.l2,
            optimizer: match self.optimizer {
                OptimizerArg::Lbfgs => Optimizer::Lbfgs,
                OptimizerArg::Gd => Optimizer::GradientDescent,
            },
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset output path (the pretrained-like half when --finetuned-out is set).
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Also write a finetuned-like companion with amplified signal.
    #[arg(long, value_name = "PATH")]
    finetuned_out: Option<PathBuf>,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Rows.
    #[arg(long, default_value_t = 4000)]
    n: usize,
    /// Dimensions.
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// Number of classes.
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Dimensions of the class-informative subspace.
    #[arg(long, default_value_t = 4)]
    signal_dims: usize,
    /// Distance scale between class centroids.
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    /// Isotropic noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Keep the signal subspace axis-aligned.
    #[arg(long)]
    no_rotate: bool,
    /// Norm of a random per-class centroid offset.
    #[arg(long, default_value_t = 0.0)]
    domain_shift: f64,
    /// Signal variance factor of the finetuned-like companion.
    #[arg(long, default_value_t = 4.0)]
    amplification: f64,
    /// Noise draw index; equal seeds with different draws share geometry.
    #[arg(long, default_value_t = 0)]
    draw: u64,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SplitArgs {
    /// Input dataset.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Fraction of each class held out.
    #[arg(long, default_value_t = 0.2, value_name = "FRACTION")]
    test_fraction: f64,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training split output path.
    #[arg(long, value_name = "PATH")]
    train_out: PathBuf,
    /// Test split output path.
    #[arg(long, value_name = "PATH")]
    test_out: PathBuf,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PcaFitArgs {
    /// Input dataset.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Components to keep [default: min(rows, dims)].
    #[arg(long)]
    k: Option<usize>,
    /// Model output path (PCAM binary).
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    /// Training dataset.
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Test dataset.
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    /// Scenario: pca-in-domain, pca-external or random. Repeatable
    /// [default: pca-in-domain and random, plus pca-external with --pca-source].
    #[arg(long = "scenario", value_parser = parse_scenario, value_name = "NAME")]
    scenarios: Vec<Scenario>,
    /// Comma-separated, strictly increasing dimension counts [default: 1,2,4,…,D].
    #[arg(long, value_delimiter = ',', value_name = "K,K,…")]
    ks: Vec<usize>,
    /// Corpus for the external PCA scenario.
    #[arg(long, value_name = "PATH")]
    pca_source: Option<PathBuf>,
    /// Random subsets per k in the random scenario.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write the curves as CSV (scenario,k,mean,std).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeArgs,
}

fn parse_scenario(text: &str) -> Result<Scenario, String> {
    text.parse::<Scenario>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct VarianceRatioArgs {
    /// Finetuned-like corpus (numerator).
    #[arg(long, value_name = "PATH")]
    a: PathBuf,
    /// Pretrained-like corpus (denominator).
    #[arg(long, value_name = "PATH")]
    b: PathBuf,
    /// Number of leading components compared.
    #[arg(long, default_value_t = 20, value_name = "N")]
    top: usize,
    /// Task class count, printed next to the crossover.
    #[arg(long)]
    classes: Option<usize>,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SalientArgs {
    /// Training dataset.
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Test dataset.
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    /// Size of the "best n" subset.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Random seed for the fold assignment.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeArgs,
}

#[derive(Args)]
struct HistogramArgs {
    /// Training dataset.
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Test dataset.
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    /// Number of histogram bins.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Corpus PCA is fitted on.
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Training dataset.
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Test dataset.
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    /// Components kept.
    #[arg(long)]
    k: usize,
    /// Comma-separated, strictly increasing subsample sizes.
    #[arg(long, value_delimiter = ',', required = true, value_name = "N,N,…")]
    sizes: Vec<usize>,
    /// Random seed for subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeArgs,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 1,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
