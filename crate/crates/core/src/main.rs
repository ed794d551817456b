use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jumpoly::cli::{self, Bounds, Caps, Kind, Profile};
use jumpoly::Error;

#[derive(Parser)]
#[command(name = "jumpoly", version, about = "Jumping polynomials, quadratic transforms and monomialization descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Overrides the scenario's level bound.
    #[arg(long, global = true, env = "JUMPOLY_MAX_LEVEL")]
    max_level: Option<usize>,
    /// Overrides the scenario's series precision.
    #[arg(long, global = true, env = "JUMPOLY_PRECISION")]
    precision: Option<u32>,
    /// Overrides the scenario's descent step bound.
    #[arg(long, global = true, env = "JUMPOLY_STEP_BOUND")]
    step_bound: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Jumping polynomials, values and exponent rows of a spec.
    Genseq { input: PathBuf },
    /// Value of a polynomial under the spec's valuation.
    Value { input: PathBuf },
    /// Quadratic-transform chain with checkpoint factorizations.
    Transform { input: PathBuf },
    /// Exponent descent for u = x^t·δ, v = y.
    Monomialize { input: PathBuf },
    /// Runs a list of scenarios with their self-checks in parallel.
    Verify { input: PathBuf },
    /// Prints a reproducible random scenario.
    Generate {
        #[arg(long, value_enum, default_value_t = Profile::Genseq)]
        profile: Profile,
    },
}

fn read_input(path: &PathBuf) -> Result<String, Error> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut s).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

fn execute(cli: &Cli) -> Result<serde_json::Value, Error> {
    let (kind, input) = match &cli.command {
        Command::Generate { profile } => {
            let sc = cli::generate(cli.opts.seed, *profile, &Caps::default());
            return serde_json::to_value(sc).map_err(|e| Error::Parse(e.to_string()));
        }
        Command::Genseq { input } => (Kind::Genseq, input),
        Command::Value { input } => (Kind::Value, input),
        Command::Transform { input } => (Kind::Transform, input),
        Command::Monomialize { input } => (Kind::Monomialize, input),
        Command::Verify { input } => (Kind::Verify, input),
    };
    let mut sc = cli::load(&read_input(input)?, Some(kind))?;
    let o = &cli.opts;
    sc.bounds = Bounds {
        max_level: o.max_level.unwrap_or(sc.bounds.max_level),
        precision: o.precision.unwrap_or(sc.bounds.precision),
        step_bound: o.step_bound.unwrap_or(sc.bounds.step_bound),
    };
    let report = cli::run(&sc)?;
    if kind == Kind::Verify && report["failed"] != serde_json::json!(0) {
        emit(cli, &report)?;
        return Err(Error::VerificationFailed {
            identity: "verify".into(),
            detail: format!("{} of {} scenarios failed", report["failed"], report["total"]),
        });
    }
    Ok(report)
}

fn emit(cli: &Cli, report: &serde_json::Value) -> Result<(), Error> {
    let text = match cli.opts.format {
        Format::Json => serde_json::to_string_pretty(report).expect("serializable") + "\n",
        Format::Text => cli::render_text(report),
    };
    match &cli.opts.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Parse(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|r| emit(&cli, &r)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
