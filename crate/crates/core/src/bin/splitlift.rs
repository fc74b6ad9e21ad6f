use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use splitlift::harness::{
    exit_code, gen_diag, gen_no_rf, gen_process, gen_random_with, run_suite, RandomSpec, Scenario, Suite, SuiteOptions,
};
use splitlift::Error;

/// Exact finite-space liftings that split across products.
#[derive(Parser)]
#[command(name = "splitlift", version)]
struct Cli {
    /// Seed for generators, and for the process drawn by `modify-process`
    /// when the scenario has none.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on candidate families in exact searches.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    budget: u64,
    /// Also write the report or scenario to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a scenario and run every validator on it.
    Validate { file: PathBuf },
    /// Check the intersection condition.
    CheckIt { file: PathBuf },
    /// Liftings with the rectangle formula and the section property.
    SplitAc {
        file: PathBuf,
        /// Repair the rcp and the lifting of Y first.
        #[arg(long)]
        repair: bool,
    },
    /// Liftings with the section property for an arbitrary joint measure.
    SplitGeneral { file: PathBuf },
    /// Equivalent forms of the intersection condition and the exact
    /// rectangle-formula search.
    Prop27 { file: PathBuf },
    /// Modify the scenario's process through the split liftings.
    ModifyProcess { file: PathBuf },
    /// Re-derive every law with the independent oracle.
    Sweep { file: PathBuf },
    /// Generate a scenario.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Uniform mass on the diagonal of an n×n product.
    Diag { n: usize },
    /// A scenario where the rectangle formula is impossible.
    NoRf,
    /// Seeded random scenario.
    Random {
        #[arg(long, default_value_t = 3)]
        nx: usize,
        #[arg(long, default_value_t = 2)]
        ny: usize,
        #[arg(long, default_value_t = 1)]
        null_x: usize,
        #[arg(long, default_value_t = 1)]
        null_y: usize,
        /// Draw the conditional measures at null y freely.
        #[arg(long)]
        free_null_rcp: bool,
        /// Also draw a process.
        #[arg(long)]
        process: bool,
    },
}

fn input_code(e: &Error) -> u8 {
    if matches!(e, Error::BudgetExceeded { .. }) {
        3
    } else {
        2
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Error> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn generate(kind: GenKind, seed: u64) -> Result<Scenario, Error> {
    match kind {
        GenKind::Diag { n } => gen_diag(n),
        GenKind::NoRf => Ok(gen_no_rf()),
        GenKind::Random { nx, ny, null_x, null_y, free_null_rcp, process } => {
            let spec = RandomSpec { free_null_rcp, process, ..RandomSpec::new(nx, ny, null_x, null_y, seed) };
            gen_random_with(&spec, splitlift::harness::gen::MAX_POINTS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, file, repair) = match cli.cmd {
        Cmd::Gen { kind } => {
            let res = generate(kind, cli.seed.unwrap_or(0)).and_then(|s| emit(&s.to_json(), &cli.out));
            return match res {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(input_code(&e))
                }
            };
        }
        Cmd::Validate { file } => (Suite::Validate, file, false),
        Cmd::CheckIt { file } => (Suite::CheckIt, file, false),
        Cmd::SplitAc { file, repair } => (Suite::SplitAc, file, repair),
        Cmd::SplitGeneral { file } => (Suite::SplitGeneral, file, false),
        Cmd::Prop27 { file } => (Suite::Prop27, file, false),
        Cmd::ModifyProcess { file } => (Suite::ModifyProcess, file, false),
        Cmd::Sweep { file } => (Suite::OracleSweep, file, false),
    };
    let mut scenario = match Scenario::load(&file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(input_code(&e));
        }
    };
    if suite == Suite::ModifyProcess && scenario.process.is_none() {
        if let Some(seed) = cli.seed {
            let prod = scenario.product();
            scenario.process = Some(gen_process(prod.nx(), prod.ny(), seed));
        }
    }
    let opts = SuiteOptions { repair, budget: cli.budget as u128, ..SuiteOptions::default() };
    let start = Instant::now();
    let res = run_suite(&scenario, suite, &opts);
    let code = exit_code(&res);
    match &res {
        Ok(rep) => {
            let text = serde_json::to_string_pretty(rep).expect("plain data") + "\n";
            if let Err(e) = emit(&text, &cli.out) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    eprintln!("{}: {} in {} ms", suite.name(), if code == 0 { "pass" } else { "fail" }, start.elapsed().as_millis());
    ExitCode::from(code as u8)
}
