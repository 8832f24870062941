//! `sga`: command-line front end for the syntax-aware graph attention
//! encoder.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for a run whose verification checks did not all pass.
pub const EXIT_VERIFY_FAILED: u8 = 1;
/// Exit status for usage, configuration, parse and I/O errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "sga", version, about = "Syntax graphs, relation encodings and relation-aware attention over CoNLL-U parses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one syntax graph (DOT or JSON) per sentence.
    Graph(GraphArgs),
    /// Run the encoder and write attention maps, embeddings and relation encodings.
    Encode(EncodeArgs),
    /// Run an invariant suite and print a JSON report. Exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Fit the encoder and a linear readout to per-character pseudo-targets.
    Toytrain(ToytrainArgs),
    /// Dump the shortest relation path of every word pair as TSV.
    Paths(PathsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// CoNLL-U input.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
    pub format: GraphFormat,
    /// Directory receiving one file per sentence.
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Model configuration shared by `encode` and `toytrain`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set d_model=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Use the small test dimensions for every key not set explicitly.
    #[arg(long)]
    pub toy: bool,
    /// Random seed. Falls back to the config file's `seed`, then to `SGA_SEED`, then to 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum sentence length in characters.
    #[arg(long, default_value_t = sga_core::parse::DEFAULT_MAX_CHARS)]
    pub max_chars: usize,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// CoNLL-U input.
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Load parameters from an SGA1 file.
    #[arg(long, conflicts_with = "random_init", required_unless_present = "random_init")]
    pub params: Option<PathBuf>,
    /// Initialise parameters from the seed instead of loading them.
    #[arg(long)]
    pub random_init: bool,
    /// Feed all-zero relation encodings to attention.
    #[arg(long, conflicts_with = "baseline")]
    pub zero_relations: bool,
    /// Plain self-attention without any relation term.
    #[arg(long)]
    pub baseline: bool,
    /// Also write the pre-softmax score matrices.
    #[arg(long)]
    pub dump_scores: bool,
    /// Write the parameters actually used to this SGA1 file.
    #[arg(long)]
    pub save_params: Option<PathBuf>,
    #[arg(short, long, default_value = "encoded")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Algebra,
    Graph,
    Gradcheck,
    Dedup,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: SuiteArg,
    /// Random seed. Falls back to `SGA_SEED`, then to 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToytrainArgs {
    /// CoNLL-U corpus.
    pub corpus: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Fixed Adam learning rate.
    #[arg(long, default_value_t = 0.003)]
    pub lr: f64,
    /// Use the warmup schedule with this many warmup steps instead of a fixed rate.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Scale factor of the warmup schedule.
    #[arg(long, default_value_t = 1.0, requires = "warmup")]
    pub warmup_factor: f64,
    /// Width of the per-character regression targets.
    #[arg(long, default_value_t = 2)]
    pub target_dim: usize,
    /// Per-epoch loss CSV.
    #[arg(short, long, default_value = "loss.csv")]
    pub out: PathBuf,
    /// Write the trained parameters to this SGA1 file.
    #[arg(long)]
    pub save_params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    /// CoNLL-U input.
    pub input: PathBuf,
    /// Write the TSV here instead of standard output.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
