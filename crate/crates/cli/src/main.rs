use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ktplate_cli::check::{run_checks, Fault, Level};
use ktplate_cli::commands::{cmd_jets, cmd_simulate, cmd_spectrum, cmd_sweep, EXIT_CHECK, EXIT_CONFIG, EXIT_OK};
use ktplate_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "ktplate", version, about = "Thermoelastic plate simulator with Cattaneo heat flux")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads for data-parallel parts (1 keeps output bitwise reproducible).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Suppress progress messages on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-integrate a configured run; writes series.csv and summary.json.
    Simulate(RunArgs),
    /// Per-mode eigenvalues; writes spectrum.csv.
    Spectrum(RunArgs),
    /// Stability classification over (gamma, tau); writes sweep.csv.
    Sweep(RunArgs),
    /// Time-derivative jet of the initial data; writes jets.json.
    Jets(RunArgs),
    /// Run the built-in invariant suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: LevelArg,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn run(cli: Cli) -> i32 {
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_CONFIG;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return EXIT_CONFIG;
    }
    let quiet = cli.quiet;
    let (args, driver): (RunArgs, fn(&RunConfig, Option<&std::path::Path>, bool) -> _) = match cli.cmd {
        Cmd::Simulate(a) => (a, cmd_simulate),
        Cmd::Spectrum(a) => (a, cmd_spectrum),
        Cmd::Sweep(a) => (a, cmd_sweep),
        Cmd::Jets(a) => (a, cmd_jets),
        Cmd::Check(c) => return check(c),
    };
    let result = RunConfig::load(&args.config).and_then(|cfg| driver(&cfg, args.out.as_deref(), quiet));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn check(args: CheckArgs) -> i32 {
    let fault = match args.inject_fault.as_deref().map(|s| (s, Fault::parse(s))) {
        None => None,
        Some((_, Some(f))) => Some(f),
        Some((s, None)) => {
            eprintln!("error: unknown fault '{s}'");
            return EXIT_CONFIG;
        }
    };
    let level = match args.level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let results = run_checks(level, fault);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{} {:width$}  {:7.2}s  {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} of {} checks passed", results.len() - failed, results.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    ExitCode::from(run(cli) as u8)
}
