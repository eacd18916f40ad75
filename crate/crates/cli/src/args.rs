use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "demd", version, about = "Multiscale diffusion embeddings and Diffusion EMD between distributions on a graph")]
pub struct Cli {
    /// Worker threads; defaults to DEMD_WORKERS or the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// key=value file supplying defaults for any long flag (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed the labelled distributions of a point CSV.
    Embed(EmbedArgs),
    /// All-pairs Diffusion EMD from a stored embedding.
    Distances(DistancesArgs),
    /// Nearest distributions of every distribution in a stored embedding.
    Knn(KnnArgs),
    /// Reference experiments against exact transport.
    #[command(subcommand)]
    Benchmark(BenchmarkCommand),
    /// Analytic gradient against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct GraphArgs {
    /// Neighbors per node for the adaptive kNN kernel (default 10).
    #[arg(long)]
    pub knn: Option<usize>,
    /// Bandwidth of a dense Gaussian kernel; replaces the kNN kernel.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Drop dense-kernel entries below this value.
    #[arg(long)]
    pub truncate: Option<f64>,
    /// Neighbor fraction defining the adaptive kNN bandwidth.
    #[arg(long)]
    pub percentile: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct EngineArgs {
    /// exact | chebyshev | id
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_scale: Option<usize>,
    #[arg(long)]
    pub cheb_order: Option<usize>,
    /// Rank precision for the ID engine and subsampling.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Basis size below which the ID engine compresses (default n/10).
    #[arg(long)]
    pub gamma: Option<usize>,
    /// Scales kept by subsampling.
    #[arg(long)]
    pub n_scales: Option<usize>,
    /// Subsample centers after embedding.
    #[arg(long)]
    pub subsample: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output prefix; writes PREFIX.demd, PREFIX.meta and PREFIX.manifest.json.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    /// Embedding prefix written by `embed`.
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BenchmarkCommand {
    /// Point mass at the midpoint of a line graph against every grid indicator.
    Line(LineArgs),
    /// Gaussian blobs on a swiss roll against exact EMD on the unrolled sheet.
    SwissRoll(SwissRollArgs),
}

#[derive(Debug, Args)]
pub struct LineArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_scale: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Every STRIDE-th point enters the pairwise comparison.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SwissRollArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub per: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Comma-separated engines to compare.
    #[arg(long)]
    pub methods: Option<String>,
    /// Allow more than 50,000 points.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub epsilon: f64,
    /// First distribution id.
    #[arg(long)]
    pub i: usize,
    /// Second distribution id.
    #[arg(long)]
    pub j: usize,
    /// Node to differentiate against; all nodes when omitted.
    #[arg(long)]
    pub node: Option<usize>,
    #[arg(long)]
    pub max_scale: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub output: PathBuf,
}
