use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "polar", version, about = "Interpretable polar-opposite word embeddings")]
pub struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project embeddings onto polar dimensions and save them.
    Transform(TransformArgs),
    /// Choose K polar dimensions with one strategy and write the selection TSV.
    Select(SelectCmdArgs),
    /// Evaluate every strategy over a list of dimension counts.
    Sweep(SweepArgs),
    /// Run an evaluation task.
    Eval(EvalArgs),
    /// Print a word's strongest polar dimensions.
    Inspect(InspectArgs),
    /// Report the conditioning of the direction matrix.
    Condition(ConditionArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FormatArg {
    #[value(name = "word2vec-bin")]
    #[serde(rename = "word2vec-bin")]
    Word2VecBin,
    #[value(name = "glove-txt")]
    #[serde(rename = "glove-txt")]
    GloveTxt,
}

impl From<FormatArg> for polar::EmbeddingFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Word2VecBin => polar::EmbeddingFormat::Word2VecBinary,
            FormatArg::GloveTxt => polar::EmbeddingFormat::GloveText,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize)]
pub enum StrategyArg {
    Rand,
    Var,
    Orth,
}

impl From<StrategyArg> for polar::Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Rand => polar::Strategy::Random,
            StrategyArg::Var => polar::Strategy::Variance,
            StrategyArg::Orth => polar::Strategy::Orthogonality,
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EmbeddingArgs {
    /// Pre-trained embedding file.
    #[arg(long)]
    pub embeddings: PathBuf,

    #[arg(long, value_enum, default_value = "glove-txt")]
    pub format: FormatArg,

    /// Use vectors as stored instead of scaling rows to unit length.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PolarArgs {
    /// Polar pair list: `positive<TAB>negative` per line.
    #[arg(long)]
    pub pairs: Option<PathBuf>,

    /// Selection TSV restricting (and ordering) the pairs used.
    #[arg(long)]
    pub pairs_subset: Option<PathBuf>,

    /// Scale direction vectors to unit length before inversion.
    #[arg(long)]
    pub normalize_directions: bool,

    /// Relative singular-value cutoff for the pseudoinverse.
    #[arg(long, default_value_t = polar::polar::DEFAULT_RANK_TOLERANCE)]
    pub rank_tol: f64,

    /// Condition number above which the transform is flagged unreliable.
    #[arg(long, default_value_t = polar::polar::DEFAULT_WARN_THRESHOLD)]
    pub cond_warn: f64,

    /// Fail instead of warning when the transform is unreliable.
    #[arg(long)]
    pub strict_cond: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct StrategyArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,

    /// Number of polar dimensions to keep.
    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Score orthogonality with the signed mean cosine.
    #[arg(long)]
    pub signed_orth: bool,

    /// Restrict variance scoring to the first N vocabulary words.
    #[arg(long)]
    pub topn_vocab: Option<usize>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TransformArgs {
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub polar: PolarArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,

    /// Output embeddings (GloVe text). Dimension names go to `<out>.dims.tsv`,
    /// skipped pairs to `<out>.skipped.tsv`.
    #[arg(long)]
    pub out: PathBuf,

    /// Conditioning report path (default `<out>.condition.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Digits after the decimal point in the output file.
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SelectCmdArgs {
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub polar: PolarArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,

    /// Selection TSV: `rank<TAB>positive<TAB>negative<TAB>score`.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum TaskArg {
    Similarity,
    Analogy,
    Discrim,
    Classify,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TaskOptions {
    /// Dataset file (similarity / analogy / discrim).
    #[arg(long)]
    pub dataset: Option<PathBuf>,

    /// Directory with train.tsv, valid.tsv, test.tsv (classify).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,

    /// Restrict analogy queries and candidates to the first N words.
    #[arg(long)]
    pub analogy_topn: Option<usize>,

    /// Match analogy words case-sensitively.
    #[arg(long)]
    pub strict_case: bool,

    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,

    #[arg(long, default_value_t = 0.99)]
    pub lr_decay: f64,

    #[arg(long, default_value_t = 200)]
    pub epochs: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,

    /// Seed for classifier initialization.
    #[arg(long, default_value_t = 42)]
    pub train_seed: u64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub polar: PolarArgs,

    /// Comma-separated dimension counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k_list: Vec<usize>,

    /// Strategies to run (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategies: Vec<StrategyArg>,

    #[arg(long, value_enum)]
    pub task: TaskArg,

    #[command(flatten)]
    pub task_options: TaskOptions,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Random selections averaged per k (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub random_runs: usize,

    #[arg(long)]
    pub signed_orth: bool,

    /// Restrict variance scoring to the first N vocabulary words.
    #[arg(long)]
    pub topn_vocab: Option<usize>,

    /// Refuse k with |k - d| below this width.
    #[arg(long, default_value_t = 30)]
    pub critical_band: usize,

    /// Run k values inside the critical band anyway.
    #[arg(long)]
    pub allow_critical: bool,

    /// JSON-lines output (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub task: TaskArg,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    /// With --pairs, evaluate the polar transform of the embeddings.
    #[command(flatten)]
    pub polar: PolarArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[command(flatten)]
    pub task_options: TaskOptions,

    /// Save the trained classifier (classify).
    #[arg(long)]
    pub model_out: Option<PathBuf>,

    /// JSON report path (default stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct InspectArgs {
    /// Polar embeddings saved by `transform`, or raw embeddings with --pairs.
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub polar: PolarArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,

    /// Dimension-name file (default `<embeddings>.dims.tsv`).
    #[arg(long)]
    pub dims: Option<PathBuf>,

    #[arg(long)]
    pub word: String,

    /// Number of dimensions to print.
    #[arg(long, default_value_t = 5)]
    pub top: usize,

    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ConditionArgs {
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
    #[command(flatten)]
    pub polar: PolarArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,

    #[arg(long)]
    pub report: Option<PathBuf>,
}
