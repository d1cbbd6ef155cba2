use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subgraph_gcn::{Error, Result, SamplerConfig, SamplerKind};

#[derive(Debug, Parser)]
#[command(name = "sgcn", version, about = "Graph-sampling minibatch GCN training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for sampling and Monte-Carlo runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Force single-threaded execution.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Run in single precision.
    #[arg(long, global = true)]
    pub f32: bool,
}

impl Cli {
    pub fn threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.threads.max(1)
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Draw subgraphs and write them to a cache file.
    Sample(SampleArgs),
    /// Estimate normalization coefficients from presampled subgraphs.
    Estimate(EstimateArgs),
    /// Train a GCN with sampled minibatches.
    Train(TrainArgs),
    /// Score a checkpoint on the validation and test splits.
    Eval(EvalArgs),
    /// Compare optimal and topology-only edge probabilities.
    VarianceCheck(VarianceArgs),
    /// Time sampling and training iterations.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,

    /// Add a self-loop to every node when building the graph.
    #[arg(long)]
    pub self_loops: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerName {
    Node,
    Edge,
    EdgeIndep,
    Rw,
    Mrw,
    Full,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value = "edge")]
    pub sampler: SamplerName,

    /// Node budget (node and mrw samplers).
    #[arg(long)]
    pub n: Option<usize>,

    /// Edge budget (edge samplers).
    #[arg(long)]
    pub m: Option<usize>,

    /// Walk roots (rw) or frontier size (mrw).
    #[arg(long)]
    pub r: Option<usize>,

    /// Walk length (rw).
    #[arg(long)]
    pub h: Option<usize>,

    /// Keep only the sampled edges instead of inducing on the sampled nodes.
    #[arg(long)]
    pub no_induce: bool,
}

impl SamplerArgs {
    pub fn config(&self, seed: u64) -> Result<SamplerConfig> {
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| Error::InvalidConfig(format!("--sampler {:?} requires --{flag}", self.sampler)))
        };
        let kind = match self.sampler {
            SamplerName::Node => SamplerKind::Node { n: need(self.n, "n")? },
            SamplerName::Edge => SamplerKind::Edge { m: need(self.m, "m")? },
            SamplerName::EdgeIndep => SamplerKind::EdgeIndependent { m: need(self.m, "m")? },
            SamplerName::Rw => SamplerKind::RandomWalk {
                r: need(self.r, "r")?,
                h: need(self.h, "h")?,
            },
            SamplerName::Mrw => SamplerKind::MultiWalk {
                n: need(self.n, "n")?,
                r: need(self.r, "r")?,
            },
            SamplerName::Full => SamplerKind::Full,
        };
        let mut cfg = SamplerConfig::new(kind, seed);
        if self.no_induce {
            cfg = cfg.without_induction();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Stochastic block model with one-hot-plus-noise features.
    Sbm {
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        #[arg(long, default_value_t = 500)]
        nodes_per_block: usize,
        #[arg(long, default_value_t = 0.05)]
        p_intra: f64,
        #[arg(long, default_value_t = 0.005)]
        p_inter: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Erdős–Rényi graph with random features and labels.
    Er {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 8)]
        features: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
    },
    /// Random regular graph with random features and labels.
    Regular {
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 8)]
        features: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
    },
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 100)]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Presampled subgraph count; defaults to 50·|V| / mean subgraph size.
    #[arg(long)]
    pub presample: Option<usize>,
    /// Use closed-form coefficients (independent edge sampler).
    #[arg(long)]
    pub analytic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoeffName {
    Empirical,
    Analytic,
    Unit,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Number of graph convolution layers.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Minibatches per epoch; defaults to |V| / mean subgraph size.
    #[arg(long)]
    pub minibatches: Option<usize>,
    /// Validate every this many epochs (0: only at the end).
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    #[arg(long)]
    pub presample: Option<usize>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub coeffs: CoeffName,
    /// Coefficient cache written by `estimate`; replaces pre-processing.
    #[arg(long)]
    pub coeff_cache: Option<PathBuf>,
    /// Subgraph cache written by `estimate`, reused as the first minibatches.
    #[arg(long)]
    pub subgraph_cache: Option<PathBuf>,
    /// Divide the batch loss by the number of contributing nodes.
    #[arg(long)]
    pub mean_loss: bool,
    /// Continue from a checkpoint written by a previous run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub queue_capacity: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Expected number of sampled edges.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Layers of the random model whose activations define the aggregates.
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Output width of every layer; defaults to the class count.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Subgraphs drawn per timing run.
    #[arg(long, default_value_t = 200)]
    pub count: u64,
    /// Training iterations timed.
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
