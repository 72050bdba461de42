use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use treekd::cli::{
    cmd_analyze, cmd_plan, cmd_run, cmd_sweep, flip_grid, load_spec, write_sweep, CliError,
    EXIT_ANALYSIS_FAILED, EXIT_CONFIG, EXIT_OK,
};

#[derive(Parser)]
#[command(
    name = "treekd",
    version,
    about = "Spanning-tree multiparty key distribution simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `param seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `param out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the minimum spanning security tree.
    Plan(Common),
    /// Run the configured number of blocks and write reports.
    Run(Common),
    /// Check the two-configuration property on a transcript.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Transcript log; defaults to `<out>/transcript.log`.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Abort and agreement rates across a range of flip probabilities.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        flip_min: f64,
        #[arg(long, default_value_t = 0.2)]
        flip_max: f64,
        #[arg(long, default_value_t = 5)]
        flip_steps: usize,
    },
}

fn load(c: &Common) -> Result<treekd::cli::RunSpec, CliError> {
    load_spec(&c.config, c.seed, c.out.as_deref())
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Plan(c) => {
            print!("{}", cmd_plan(&load(&c)?)?);
            Ok(EXIT_OK)
        }
        Command::Run(c) => {
            let spec = load(&c)?;
            let out = cmd_run(&spec)?;
            print!("{}", out.report);
            eprintln!("outputs written to {}", spec.out_dir.display());
            Ok(out.exit_code)
        }
        Command::Analyze { common, transcript } => {
            let spec = load(&common)?;
            let path = transcript.unwrap_or_else(|| spec.out_dir.join("transcript.log"));
            let report = cmd_analyze(&path, &spec.graph)?;
            print!("{report}");
            Ok(if report.passes() {
                EXIT_OK
            } else {
                EXIT_ANALYSIS_FAILED
            })
        }
        Command::Sweep {
            common,
            flip_min,
            flip_max,
            flip_steps,
        } => {
            let spec = load(&common)?;
            let flips = flip_grid(flip_min, flip_max, flip_steps)?;
            let rows = cmd_sweep(&spec, &flips)?;
            print!("{}", write_sweep(&spec, &rows)?);
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
