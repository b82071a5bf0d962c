use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

use commands::{Outcome, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "dirmoment",
    version,
    about = "Hausdorff log-moment sequences: decide, recover, certify"
)]
struct Cli {
    #[command(flatten)]
    config: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Fit tolerance on the Euclidean residual.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Number of log-spaced nodes in the s grid (the node 0 is always added).
    #[arg(long, global = true, default_value_t = 200)]
    grid_size: usize,
    /// Largest node of the s grid.
    #[arg(long, global = true, default_value_t = 50.0)]
    grid_max: f64,
    /// Highest finite-difference order in the completely monotone tests.
    #[arg(long, global = true, default_value_t = dirmoment::logmoment::DEFAULT_MAX_ORDER)]
    max_order: usize,
    /// Largest index used by dual certificates.
    #[arg(long, global = true, default_value_t = 16)]
    index_cap: u64,
    /// Output format (json unless the command says otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for randomized starts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// First index of a sequence given as a bare JSON array.
    #[arg(long, global = true)]
    start_index: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// `(log n)^α` from the log-gamma density (α < 0, starts at n = 2).
    A,
    /// `1/(log n + α)` from the density `t^{α-1}` (α > 0).
    B,
    /// `α^{log n} = n^{log α}` from a point mass at α ∈ [0, 1].
    C,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether a sequence is a log-moment sequence (exit 0 member,
    /// 1 rejected, 2 inconclusive).
    Check {
        /// Sequence JSON (`-` for stdin).
        file: String,
    },
    /// Recover the atom at n = 1 and the measure on the half line.
    Recover { file: String },
    /// Certify a Dirichlet polynomial nonnegative on [0, ∞) (exit 0
    /// certified, 1 witness, 2 undecided).
    Certify {
        /// Polynomial JSON `{"coeffs": {"n": a_n}}` (`-` for stdin).
        file: String,
        /// Base step of the certification grid.
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
        /// Slack below zero that is still accepted.
        #[arg(long, default_value_t = dirmoment::dirichlet::DEFAULT_CERT_TOL)]
        cert_tol: f64,
    },
    /// Emit the moments of one of the example families.
    Examples {
        #[arg(value_enum)]
        family: Family,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Last index.
        #[arg(short = 'n', long = "count", default_value_t = 64)]
        count: u64,
        /// Use the quadrature discretization instead of the closed form.
        #[arg(long)]
        quadrature: bool,
        /// Quadrature nodes.
        #[arg(long, default_value_t = dirmoment::measure::DEFAULT_FAMILY_NODES)]
        nodes: usize,
    },
    /// Operator norms of Helson sections and the boundedness criteria.
    Helson {
        file: String,
        /// Section sizes.
        #[arg(long, value_delimiter = ',', default_values_t = vec![8, 16, 32, 64])]
        sizes: Vec<usize>,
        /// Constant `C` in both criteria.
        #[arg(long, default_value_t = 1.0)]
        constant: f64,
        /// Power iteration cap.
        #[arg(long, default_value_t = 2000)]
        iters: usize,
    },
    /// Fit the completely monotone generator `f` with `w_n = atom·[n = 1] + f(log n)`.
    Decompose { file: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.output);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, commands::CliError> {
    let g = cli.config;
    let config = RunConfig {
        tol: g.tol,
        grid_size: g.grid_size,
        grid_max: g.grid_max,
        max_order: g.max_order,
        index_cap: g.index_cap,
        seed: g.seed,
        start_index: g.start_index,
    };
    config.validate()?;
    let format = |default: Format| g.format.unwrap_or(default);
    match cli.command {
        Command::Check { file } => commands::check(&file, &config, format(Format::Json)),
        Command::Recover { file } => commands::recover(&file, &config, format(Format::Json)),
        Command::Certify {
            file,
            grid_step,
            cert_tol,
        } => commands::certify(&file, grid_step, cert_tol, format(Format::Json)),
        Command::Examples {
            family,
            alpha,
            count,
            quadrature,
            nodes,
        } => commands::examples(
            family,
            alpha,
            count,
            quadrature,
            nodes,
            format(Format::Json),
        ),
        Command::Helson {
            file,
            sizes,
            constant,
            iters,
        } => commands::helson(&file, &sizes, constant, iters, &config, format(Format::Csv)),
        Command::Decompose { file } => commands::decompose(&file, &config, format(Format::Json)),
    }
}
