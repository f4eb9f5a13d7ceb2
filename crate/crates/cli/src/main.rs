mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::{Format, Rationals, Render};

#[derive(Parser)]
#[command(name = "circwords", version, about = "Exact word-level computations for odometer-based and circular systems")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Rationals::Fraction, global = true)]
    rationals: Rationals,
    /// Digits after the point in decimal mode.
    #[arg(long, default_value_t = 12, global = true)]
    precision: usize,
    /// Seed for commands that sample.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Circular,
    Odometer,
}

#[derive(Args)]
pub struct DocArgs {
    /// Construction-sequence document (JSON).
    #[arg(long)]
    doc: PathBuf,
    /// Overrides the kind stored in the document (default: circular).
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient table q, p, p^-1, K, A for levels 0..levels-1.
    Derive {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<u64>,
        #[arg(long)]
        levels: usize,
    },
    /// Words of one level (lengths only when too long to materialize).
    Build {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        index: Option<usize>,
    },
    /// Symbols of a word by position, without materializing it.
    #[command(name = "symbol_at", alias = "symbol-at")]
    SymbolAt {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Comma-separated positions (arbitrary size).
        #[arg(long, value_delimiter = ',')]
        pos: Vec<String>,
        /// Also sample this many positions with the seed.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
    /// Parse a window into level-n occurrences.
    Parse {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        word: String,
        #[arg(long)]
        level: usize,
        /// Position of the first symbol of the window.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        start: i64,
        /// Start of a block of level >= `level` (odometer windows).
        #[arg(long, allow_hyphen_values = true)]
        anchor: Option<i64>,
        /// Also locate the principal blocks of the origin up to this level.
        #[arg(long)]
        principal: Option<usize>,
    },
    /// Empirical distribution of sub-level words in one word.
    Empdist {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        sub: usize,
    },
    /// Alignment of a level-(n+1) word with a reversed level-(n+1) word.
    Align {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        sub: usize,
        #[arg(long, default_value_t = 0)]
        word: usize,
        #[arg(long, default_value_t = 0)]
        other: usize,
    },
    /// Slippage of n-blocks in the paired level-m word.
    Slippage {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long, default_value_t = 0)]
        u: usize,
        #[arg(long, default_value_t = 0)]
        v: usize,
    },
    /// Move cylinder weights between the odometer and circular sides.
    Transfer {
        #[command(flatten)]
        doc: DocArgs,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Inline weights: `0=1/2,1=1/2`, or `0:1=1/4,...` with --joining.
        #[arg(long, conflicts_with = "table_file")]
        table: Option<String>,
        /// A previously emitted transfer report, used as input.
        #[arg(long)]
        table_file: Option<PathBuf>,
        /// Pair cylinders (u, rev v) instead of single words.
        #[arg(long)]
        joining: bool,
    },
    /// Perfect-match analysis and improvement of a match problem.
    Match {
        #[command(flatten)]
        doc: DocArgs,
        /// Match problem (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Overrides the shift in the problem.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<i64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let render = Render { format: cli.format, rationals: cli.rationals, precision: cli.precision };
    let result = commands::run(cli.command, cli.seed).and_then(|report| {
        let stdout = std::io::stdout();
        render.emit(report, &mut stdout.lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
