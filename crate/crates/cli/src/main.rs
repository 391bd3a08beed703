use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sepsim_cli::{parse_config, run, validate, CliError, Command, OUT_ENV};

#[derive(Parser)]
#[command(name = "sepsim", version, about = "Exclusion processes in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample an environment and save it.
    GenEnv(Flags),
    /// Effective matrix from correctors, with an optional MSD cross-check.
    EstimateD(Flags),
    /// Run the exclusion process and export its trajectory.
    SimulateSep(Flags),
    /// Monte Carlo check of the one-point duality against the walk kernel.
    DualityTest(Flags),
    /// Pathwise kernel identity on small instances.
    NagyTest(Flags),
    /// Empirical density against the heat equation.
    Hydro(Flags),
    /// Print the diagnostics for a subcommand without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(value_parser = parse_command)]
        subcommand: Command,
    },
}

#[derive(clap::Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `$SEPSIM_OUT/<subcommand>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    strict: bool,
    /// Keep the files of a failed run.
    #[arg(long)]
    keep_partial: bool,
    #[arg(long, env = OUT_ENV, hide_env_values = true)]
    out_root: Option<PathBuf>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    [
        Command::GenEnv,
        Command::EstimateD,
        Command::SimulateSep,
        Command::DualityTest,
        Command::NagyTest,
        Command::Hydro,
    ]
    .into_iter()
    .find(|c| c.name() == s)
    .ok_or_else(|| format!("unknown subcommand `{s}`"))
}

fn read(path: &PathBuf) -> Result<sepsim_cli::ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn execute(cmd: Command, flags: Flags) -> Result<(), CliError> {
    let mut cfg = read(&flags.config)?;
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(w) = flags.workers {
        cfg.workers = Some(w);
    }
    cfg.strict |= flags.strict;
    if let Some(o) = flags.out {
        cfg.out = Some(o);
    }
    let out = match &cfg.out {
        Some(o) => o.clone(),
        None => flags.out_root.unwrap_or_else(|| PathBuf::from("sepsim-out")).join(cmd.name()),
    };
    if let Some(w) = cfg.workers.filter(|w| *w > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let summary = run(cmd, &cfg, &out, flags.keep_partial)?;
    println!(
        "{cmd}: wrote {} to {} in {:.2} s",
        summary.outputs.join(", "),
        out.display(),
        summary.wall_time_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::GenEnv(f) => execute(Command::GenEnv, f),
        Cmd::EstimateD(f) => execute(Command::EstimateD, f),
        Cmd::SimulateSep(f) => execute(Command::SimulateSep, f),
        Cmd::DualityTest(f) => execute(Command::DualityTest, f),
        Cmd::NagyTest(f) => execute(Command::NagyTest, f),
        Cmd::Hydro(f) => execute(Command::Hydro, f),
        Cmd::Validate { config, subcommand } => read(&config).and_then(|cfg| {
            let diagnostics = validate(&cfg, subcommand);
            if diagnostics.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(CliError::Validation(diagnostics))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
