use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use eit_cli::{load_config, resolve_jobs, run, CliError, Command, RunOptions};

#[derive(Parser)]
#[command(name = "eit-localizer", version, about = "Dark-state addressing simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// fig5, fig6, fig9 or fig10.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Sectioned key = value file applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). EIT_LOCALIZER_THREADS overrides.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref(), cli.preset.as_deref())?;
    let opts = RunOptions {
        jobs: resolve_jobs(cli.jobs)?,
        out: cli.out.clone(),
    };
    let summary = run(cli.command, &cfg, &opts)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    for f in &summary.outputs {
        println!("{}", opts.out.join(f).display());
    }
    Ok(())
}
