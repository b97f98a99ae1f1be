//! Argument parsing and dispatch for the `scalelaw` binary.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::constants::{ConstantSet, Preset};
use crate::error::{CliError, Result};
use crate::report::Format;

#[derive(Debug, Parser)]
#[command(name = "scalelaw", version, about = "Scaling laws for neural language models: count, fit, predict, plan")]
pub struct Cli {
    /// Constant preset.
    #[arg(long, global = true, value_enum, default_value_t = Preset::AppendixA)]
    pub preset: Preset,

    /// JSON file of constant overrides, merged over the preset by symbol.
    #[arg(long, global = true, value_name = "FILE")]
    pub constants: Option<PathBuf>,

    /// Output format. Defaults to a table on a terminal and JSON otherwise
    /// (CSV for `frontier` and `synth`).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the output here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameter and FLOP counts for a Transformer shape file.
    Count {
        /// JSON shape document.
        shape: PathBuf,
    },
    /// Fit scaling laws to a run log.
    Fit(FitArgs),
    /// Evaluate a law over a grid.
    Predict(PredictArgs),
    /// Compute-optimal allocation for a budget.
    Plan(PlanArgs),
    /// Sweep the compute-efficient frontier over a range of budgets.
    Frontier(FrontierArgs),
    /// Where the one-epoch data trend meets the compute trend.
    Intersect(IntersectArgs),
    /// Write a synthetic run log drawn from the selected constants.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum FitLaw {
    /// `L(N)` from final losses of converged unlimited-data runs.
    PowerN,
    /// `L(D)` from early-stopped losses of the largest model at each dataset size.
    PowerD,
    /// `L(N, D)` from early-stopped finite-data runs.
    Nd,
    /// `L(N, S_min)` from unlimited-data learning curves.
    Ns,
    /// `(S_min, E_min)` fronts at several target losses.
    Pareto,
    /// `B_crit(L)` from those fronts.
    Bcrit,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Run-log CSV.
    pub runs: PathBuf,

    /// Law to fit; repeat for several.
    #[arg(long = "law", value_enum, required = true)]
    pub laws: Vec<FitLaw>,

    /// Largest loss decrease per decade of steps for a run to count as converged.
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub convergence_tol: f64,

    /// Target losses for the Pareto fronts (nats). Chosen from the data if absent.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<f64>,

    /// Model size whose runs form the fronts. Defaults to the size with the most batch sizes.
    #[arg(long)]
    pub pareto_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictLaw {
    /// `L(N)`; needs `--n`.
    N,
    /// `L(D)`; needs `--d`.
    D,
    /// `L(C)` at fixed batch; needs `--c`.
    C,
    /// `L(C_min)`; needs `--c`.
    Cmin,
    /// `L(N, D)`; needs `--n` and `--d`.
    Nd,
    /// `L(N, S_min)`; needs `--n` and `--s`.
    Ns,
    /// `B_crit(L)`; needs `--loss`.
    Bcrit,
    /// Overfitting fraction and early-stopping bound; needs `--n` and `--d`.
    Overfit,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_enum)]
    pub law: PredictLaw,
    /// Model sizes: `a,b,c` or log-spaced `lo:hi:count`.
    #[arg(long)]
    pub n: Option<String>,
    /// Dataset sizes in tokens.
    #[arg(long)]
    pub d: Option<String>,
    /// Steps `S_min`.
    #[arg(long)]
    pub s: Option<String>,
    /// Compute in PF-days.
    #[arg(long)]
    pub c: Option<String>,
    /// Losses in nats.
    #[arg(long)]
    pub loss: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Closed forms from the three exponents.
    #[default]
    Derived,
    /// Fitted allocation trends; loss from `L(C_min)`.
    Empirical,
}

impl From<ModeArg> for scalelaw_core::frontier::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Derived => Self::Derived,
            ModeArg::Empirical => Self::Empirical,
        }
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Budget `C_min` in PF-days.
    #[arg(long, allow_negative_numbers = true)]
    pub budget: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Derived)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Smallest budget, PF-days.
    #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
    pub from: f64,
    /// Largest budget, PF-days.
    #[arg(long, default_value_t = 1e2, allow_negative_numbers = true)]
    pub to: f64,
    /// Log-spaced budgets, endpoints included.
    #[arg(long, default_value_t = 17)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Derived)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct IntersectArgs {
    /// Scale of `N_opt(C_min)`, parameters at one PF-day.
    #[arg(long, default_value_t = 1.3e9, allow_negative_numbers = true)]
    pub n_scale: f64,
    /// Exponent of `N_opt(C_min)`.
    #[arg(long, default_value_t = 0.73, allow_negative_numbers = true)]
    pub n_exponent: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Model sizes.
    #[arg(long, default_value = "1e5:1e9:5")]
    pub models: String,
    /// Batch sizes in tokens.
    #[arg(long, default_value = "524288")]
    pub batches: String,
    /// Dataset sizes in tokens; `inf` for unlimited data.
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    pub datasets: Vec<String>,
    #[arg(long, default_value_t = 250_000)]
    pub max_steps: u64,
    /// Logged evaluations per run.
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub warmup: u64,
    /// Relative log-normal noise on every loss.
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))
}

fn load_constants(cli: &Cli) -> Result<ConstantSet> {
    let mut set = ConstantSet::preset(cli.preset);
    if let Some(path) = &cli.constants {
        set.apply_overrides(&read_file(path)?)?;
    }
    Ok(set)
}

/// Runs one invocation, writing the report to `stdout` or `--out`.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stdout_is_tty: bool) -> Result<()> {
    let constants = load_constants(cli)?;
    let interactive = stdout_is_tty && cli.out.is_none();
    let pick = |machine: Format| match cli.format {
        Some(f) => f,
        None if interactive => Format::Table,
        None => machine,
    };

    let text = match &cli.command {
        Command::Count { shape } => commands::count(&read_file(shape)?)?.render(pick(Format::Json)),
        Command::Fit(args) => {
            let ingested = crate::runlog::read_runs(read_file(&args.runs)?.as_bytes())?;
            commands::fit(&ingested, args, &constants)?.render(pick(Format::Json))
        }
        Command::Predict(args) => commands::predict(args, &constants)?.render(pick(Format::Json)),
        Command::Plan(args) => commands::plan(args, &constants)?.render(pick(Format::Json)),
        Command::Frontier(args) => commands::frontier(args, &constants)?.render(pick(Format::Csv)),
        Command::Intersect(args) => commands::intersect(args, &constants)?.render(pick(Format::Json)),
        Command::Synth(args) => {
            let format = cli.format.unwrap_or(Format::Csv);
            if format != Format::Csv {
                return Err(CliError::new("unsupported_format", "synth writes run-log CSV only"));
            }
            commands::synth(args, &constants)?
        }
    };

    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display()))),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Parses `args` and runs. Returns the process exit status; errors go to
/// `stderr` as a single `ERROR <code>: <message>` line.
pub fn main_with(args: impl IntoIterator<Item = OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            let _ = writeln!(stderr, "ERROR usage: {first}");
            return 2;
        }
    };
    let tty = std::io::stdout().is_terminal();
    match run(&cli, stdout, tty) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.message.replace(['\n', '\r'], " ");
            let _ = writeln!(stderr, "ERROR {}: {message}", e.code);
            1
        }
    }
}
