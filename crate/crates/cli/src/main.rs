//! `noisestab`: batch front end. Every command writes JSON-lines records;
//! exit status is 0 on success, 2 when a property check flags a violation,
//! and 1 on errors.

mod commands;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noisestab::McConfig;
use serde_json::{json, Value};

use output::{Format, Sink};

#[derive(Debug, Parser)]
#[command(name = "noisestab", version, about = "Gaussian and discrete noise stability estimators")]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count; scientific notation such as 1e6 is accepted.
    #[arg(long, global = true, default_value = "1000000", value_parser = parse_count)]
    pub samples: u64,
    /// Number of sample blocks (default: $NOISESTAB_WORKERS or 16).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write records to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a non-negative integer")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleName {
    Majority,
    Dictator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orthant probability of a correlated normal vector.
    Orthant(OrthantArgs),
    /// Pair noise stability of a Gaussian partition.
    Stability(StabilityArgs),
    /// Exchangeable-Gaussian isoperimetry check over random set families.
    EgtCheck(EgtArgs),
    /// Compare random balanced partitions against the standard simplex.
    SscProbe(SscArgs),
    /// Noise stability of a function on [q]^n.
    Fourier(FunctionArgs),
    /// Influences and low-degree influences of a function on [q]^n.
    Influence(FunctionArgs),
    /// Boolean-versus-Gaussian invariance gap.
    Invariance(InvarianceArgs),
    /// Probability of a unique Condorcet winner.
    Condorcet(VoteArgs),
    /// Cosmic coin agreement probability.
    Coin(CoinArgs),
    /// Noise stability of plurality and its simplex limit.
    Plurality(PluralityArgs),
    /// The MAX-q-CUT constant alpha_q.
    Alpha(AlphaArgs),
    /// Solve the MAX-q-CUT vector relaxation of a graph file.
    MaxqcutSolve(SolveArgs),
    /// Solve and round a graph file with the simplex partition.
    MaxqcutRound(RoundArgs),
    /// Approximation-ratio harness on random instances.
    MaxqcutBench(BenchArgs),
    /// Reduce a unique label cover instance to MAX-q-CUT.
    UlcReduce(UlcArgs),
    /// Run the quick built-in example checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct OrthantArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b: f64,
    /// Comma-separated thresholds for the k-variate exchangeable orthant.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionName {
    Simplex,
    Stack,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    /// Ambient dimension (default q - 1).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = PartitionName::Simplex)]
    pub partition: PartitionName,
    /// Cell measures of a half-space stack (default: balanced).
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<f64>>,
    /// Partition JSON document; overrides --partition.
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
    /// Skip closed forms and quadrature.
    #[arg(long)]
    pub force_mc: bool,
}

#[derive(Debug, Args)]
pub struct EgtArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    /// Dimension of the random sets.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub families: usize,
}

#[derive(Debug, Args)]
pub struct SscArgs {
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 200)]
    pub candidates: usize,
    /// Probe this partition JSON document instead of random candidates.
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuiltinFunction {
    Majority,
    Dictator,
    Plurality,
}

#[derive(Debug, Args)]
pub struct FunctionArgs {
    /// Function table JSON document.
    #[arg(long, conflicts_with = "f")]
    pub function: Option<PathBuf>,
    /// Built-in function (default majority).
    #[arg(long, value_enum)]
    pub f: Option<BuiltinFunction>,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub rho: f64,
    /// Degree cap for low-degree influences (default n).
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionalName {
    Clamp,
    Simplex,
}

#[derive(Debug, Args)]
pub struct InvarianceArgs {
    #[arg(long, value_enum, default_value_t = RuleName::Majority)]
    pub f: RuleName,
    #[arg(long, default_value_t = 101)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = FunctionalName::Clamp)]
    pub functional: FunctionalName,
    /// Truncation degree for majority.
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = RuleName::Majority)]
    pub f: RuleName,
    #[arg(long, default_value_t = 1001)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Mc)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct CoinArgs {
    #[command(flatten)]
    pub vote: VoteArgs,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct PluralityArgs {
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    #[arg(long, default_value_t = 999)]
    pub n: usize,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    #[arg(long)]
    pub q: usize,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Use the Monte Carlo path even where a closed form exists.
    #[arg(long)]
    pub force_mc: bool,
    /// Search [-1/(q-1), 1) instead of [-1/(q-1), 0].
    #[arg(long)]
    pub full_interval: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    /// Objective tolerance relative to total weight.
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Also compute the exact optimum by enumeration.
    #[arg(long)]
    pub brute: bool,
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long, default_value_t = 1000, value_parser = parse_count)]
    pub repeats: u64,
    /// Rounding partition JSON document with q cells (default: simplex in R^{q-1}).
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorName {
    Gnp,
    Bipartite,
    Complete,
    Petersen,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = GeneratorName::Gnp)]
    pub generator: GeneratorName,
    #[arg(long, default_value_t = 8)]
    pub vertices: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Unit weights instead of uniform [0, 1].
    #[arg(long)]
    pub unit: bool,
    #[arg(long, default_value_t = 1000, value_parser = parse_count)]
    pub repeats: u64,
    /// Reference constant; computed with `alpha` settings when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct UlcArgs {
    /// ULC JSON file to reduce.
    #[arg(long, required_unless_present = "random")]
    pub ulc: Option<PathBuf>,
    /// Generate a satisfiable instance instead: M,V,W,d.
    #[arg(long, value_delimiter = ',', conflicts_with = "ulc")]
    pub random: Option<Vec<usize>>,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    /// Write the reduced graph here, with metadata at `<graph>.meta.json`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Save a generated ULC instance here.
    #[arg(long)]
    pub save_ulc: Option<PathBuf>,
}

pub struct Ctx {
    pub mc: McConfig,
    pub sink: Sink,
}

impl Ctx {
    /// Seed, sample count and worker count echoed in every record.
    pub fn run_params(&self) -> Value {
        json!({ "seed": self.mc.seed, "samples": self.mc.samples, "workers": self.mc.workers })
    }

    pub fn emit(&mut self, v: Value) -> Result<(), String> {
        self.sink.emit(&v).map_err(|e| e.to_string())
    }
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    Violation,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut mc = McConfig::new(cli.samples, cli.seed);
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        mc = mc.with_workers(w);
    }
    let sink = match Sink::new(cli.out.as_deref(), cli.format) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot open output: {e}");
            return ExitCode::from(1);
        }
    };
    let mut ctx = Ctx { mc, sink };
    match commands::run(&cli.command, &mut ctx) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
