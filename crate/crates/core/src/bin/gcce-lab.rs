use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gcce_lab::par;
use gcce_lab::scenario::{preset_by_name, run_scenario, RunFiles, RunOptions, RunReport, Scenario};
use gcce_lab::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 3;
const EXIT_CAPACITY: u8 = 4;
const EXIT_GUARD: u8 = 5;

#[derive(Parser)]
#[command(name = "gcce-lab", version, about = "Exact and cluster-expanded central spin dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write `<basename>.csv` and `<basename>.meta.json`.
    Run {
        scenario: PathBuf,
        /// Overrides `sampling.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores). Falls back to GCCE_LAB_THREADS.
        #[arg(long, env = "GCCE_LAB_THREADS")]
        threads: Option<usize>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the committed reproduction presets.
    Preset {
        name: PresetName,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "GCCE_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Parse and validate a scenario file, then print it with defaults filled in.
    Validate { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    Figure4,
    Figure5,
    Figure6,
}

impl PresetName {
    fn as_str(self) -> &'static str {
        match self {
            PresetName::Figure4 => "figure4",
            PresetName::Figure5 => "figure5",
            PresetName::Figure6 => "figure6",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Parse { .. } => EXIT_VALIDATION,
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::GuardSaturation(_) => EXIT_GUARD,
        _ => EXIT_FAILURE,
    }
}

fn report(report: &RunReport, files: &RunFiles) {
    eprintln!("wrote {} ({})", files.csv.display(), report.meta.columns.join(", "));
    eprintln!("wrote {}", files.meta.display());
    if let Some(c) = &files.coefficients {
        eprintln!("wrote {}", c.display());
    }
    if report.meta.guard_count > 0 {
        eprintln!("division guard held {} factors (see metadata)", report.meta.guard_count);
    }
    if let Some(w) = &report.meta.convergence_window {
        eprintln!("convergence window estimate: {:.4e} ms", w.time_ms);
    }
}

fn execute(scenario: &Scenario, opts: &RunOptions, threads: usize) -> Result<(), Error> {
    let (r, files) = par::with_threads(threads, || run_scenario(scenario, opts))?;
    report(&r, &files);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            threads,
            out,
        } => Scenario::from_path(&scenario).and_then(|s| execute(&s, &RunOptions { seed, out_dir: out }, threads.unwrap_or(0))),
        Command::Preset { name, out, threads } => preset_by_name(name.as_str()).and_then(|s| {
            let opts = RunOptions { seed: None, out_dir: out };
            execute(&s, &opts, threads.unwrap_or(0))
        }),
        Command::Validate { scenario } => Scenario::from_path(&scenario).map(|s| {
            println!("{}", serde_json::to_string_pretty(&s.materialized()).expect("scenario serializes"));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
