use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sentry_core::executor::Limits;
use sentry_core::SearchConfig;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "sentry",
    version,
    about = "Static vulnerability detection for MiniSol contracts, refined by multi-objective search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Static detection only (no execution); `--mode search` behaves like `search`.
    Analyze(RunArgs),
    /// Static detection refined by NSGA-II search over contract inputs.
    Search(RunArgs),
    /// Per-type detection metrics over a labeled corpus directory.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Static,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct SearchFlags {
    /// Population size N.
    #[arg(long, default_value_t = SearchConfig::default().pop_size)]
    pub pop_size: usize,
    /// Maximum number of generations T.
    #[arg(long, default_value_t = SearchConfig::default().max_iters)]
    pub max_iters: usize,
    /// Mating pool size K.
    #[arg(long, default_value_t = SearchConfig::default().select_k)]
    pub select_k: usize,
    /// Crossover rate.
    #[arg(long, default_value_t = SearchConfig::default().pc)]
    pub pc: f64,
    /// Mutation rate.
    #[arg(long, default_value_t = SearchConfig::default().pm)]
    pub pm: f64,
    /// Random seed.
    #[arg(long, env = "SENTRY_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Generations without improvement before stopping; 0 disables.
    #[arg(long, default_value_t = SearchConfig::default().stagnation_window)]
    pub stagnation: usize,
}

impl SearchFlags {
    pub fn config(&self) -> SearchConfig {
        SearchConfig {
            pop_size: self.pop_size,
            max_iters: self.max_iters,
            select_k: self.select_k,
            pc: self.pc,
            pm: self.pm,
            seed: self.seed,
            stagnation_window: self.stagnation,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LimitFlags {
    /// Iterations per loop and frame before the loop exit is forced.
    #[arg(long, default_value_t = Limits::default().loop_cap)]
    pub loop_cap: u32,
    /// Maximum call depth.
    #[arg(long, default_value_t = Limits::default().depth_limit)]
    pub depth_limit: usize,
    /// Re-entries allowed per transaction.
    #[arg(long, default_value_t = Limits::default().reentry_count)]
    pub reentry_count: u32,
}

impl LimitFlags {
    pub fn limits(&self) -> Limits {
        Limits {
            loop_cap: self.loop_cap,
            depth_limit: self.depth_limit,
            reentry_count: self.reentry_count,
            ..Limits::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputFlags {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for parallel evaluation; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Report `wall_time_ms` as null so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// MiniSol source file.
    pub path: PathBuf,
    /// Labels file; entries whose path is a suffix of PATH apply.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[command(flatten)]
    pub search: SearchFlags,
    #[command(flatten)]
    pub limits: LimitFlags,
    #[command(flatten)]
    pub output: OutputFlags,
    /// Print the SSA IR of every function to stderr.
    #[arg(long)]
    pub dump_ir: bool,
    /// Print the data-dependency graph (Graphviz) to stderr.
    #[arg(long)]
    pub dump_deps: bool,
    /// Print control-flow graphs (Graphviz) and the call graph (JSON) to stderr.
    #[arg(long)]
    pub dump_graphs: bool,
    /// Print execution traces (JSON lines) to stderr.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Corpus directory.
    pub dir: PathBuf,
    /// Labels file; defaults to `labels.json` inside DIR when present.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Search)]
    pub mode: Mode,
    /// Count a finding for a label even when the label names another function.
    #[arg(long)]
    pub type_only: bool,
    #[command(flatten)]
    pub search: SearchFlags,
    #[command(flatten)]
    pub limits: LimitFlags,
    #[command(flatten)]
    pub output: OutputFlags,
}
