use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specrange::num_complex::Complex64;
use specrange::one_dim::propagate_normalized;
use specrange::par::Execution;
use specrange::report::{
    self, analyze, counterexample_scenario, expectation_error, grid, sweep, sweep_csv, write_atomic, write_outputs,
    Analysis, ErrorKind, Overrides, ReportError, RunOptions, Scenario,
};

#[derive(Parser)]
#[command(name = "specrange", version, about = "Spectra, numerical ranges and boundary eigenvalues of discrete Schrödinger operators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Relative boundary tolerance.
    #[arg(long, global = true)]
    tol_boundary: Option<f64>,
    /// Relative certification tolerance.
    #[arg(long, global = true)]
    tol_cert: Option<f64>,
    /// Number of support-function angles.
    #[arg(long, global = true)]
    angles: Option<usize>,
    /// Seed offset for random potentials.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dimension cap for assembled operators.
    #[arg(long, global = true, env = "SPECRANGE_MAX_DIM")]
    max_dim: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a scenario file and write its report, hull and spectrum.
    Run { file: PathBuf },
    /// Build a certified counterexample, emit its scenario and run it.
    Construct {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        /// Comma-separated zero sites of the eigenfunction.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        zeros: Vec<i64>,
        #[arg(long, default_value_t = 101)]
        n: usize,
    },
    /// Sweep one scalar of a scenario, given as a JSON pointer.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Evaluate only the absence criteria of a scenario.
    Criteria { file: PathBuf },
    /// Propagate a one-dimensional solution of (J - lambda)u = 0 and write it as CSV.
    Trace {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        re: f64,
        #[arg(long, allow_hyphen_values = true)]
        im: f64,
        #[arg(long, default_value_t = 50)]
        window: i64,
    },
}

impl Global {
    fn options(&self) -> RunOptions {
        RunOptions {
            overrides: Overrides {
                tol_boundary: self.tol_boundary,
                tol_cert: self.tol_cert,
                angles: self.angles,
                seed: self.seed,
                max_dim: self.max_dim,
            },
            exec: if self.sequential {
                Execution::Sequential
            } else {
                Execution::default()
            },
        }
    }
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run_scenario(scenario: &Scenario, global: &Global) -> Result<(), ReportError> {
    let outcome = analyze(scenario, &global.options())?;
    announce(&write_outputs(&outcome, &global.out)?);
    match expectation_error(&outcome) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn construct(a: f64, b: f64, zeros: &[i64], n: usize, global: &Global) -> Result<(), ReportError> {
    let scenario = counterexample_scenario(a, b, zeros, n, &global.options())?;
    let path = global.out.join(format!("{}.json", scenario.name));
    write_atomic(&path, &scenario.to_json())?;
    announce(&[path]);
    run_scenario(&scenario, global)
}

fn sweep_command(file: &Path, param: &str, from: f64, to: f64, steps: usize, global: &Global) -> Result<(), ReportError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| ReportError::new("cli_report::read", ErrorKind::Io, format!("{}: {e}", file.display())))?;
    let name = Scenario::from_json(&text)?.name;
    let rows = sweep(&text, param, &grid(from, to, steps), &global.options())?;
    let path = global.out.join(format!("{name}.sweep.csv"));
    write_atomic(&path, &sweep_csv(&rows))?;
    announce(&[path]);
    Ok(())
}

fn criteria(file: &Path, global: &Global) -> Result<(), ReportError> {
    let scenario = Scenario::from_path(file)?;
    let scenario = Scenario {
        analysis: vec![Analysis::Criteria],
        ..scenario
    };
    let outcome = analyze(&scenario, &global.options())?;
    let report = outcome.report.criteria.expect("criteria requested");
    let mut text = report::to_pretty_json(&report);
    text.push('\n');
    let path = global.out.join(format!("{}.criteria.json", scenario.name));
    write_atomic(&path, &text)?;
    announce(&[path]);
    Ok(())
}

fn trace(file: &Path, lambda: Complex64, window: i64, global: &Global) -> Result<(), ReportError> {
    let scenario = Scenario::from_path(file)?;
    let potential = match global.seed.or(scenario.params.seed) {
        Some(seed) => scenario.potential.with_seed_offset(seed),
        None => scenario.potential.clone(),
    };
    let one = Complex64::new(1.0, 0.0);
    let t = propagate_normalized(&potential, lambda, (Complex64::new(0.0, 0.0), one), 0, (-window, window))
        .map_err(|e| ReportError::new("one_dim::propagate", ErrorKind::Numerical, e))?;
    let path = global.out.join(format!("{}.trace.csv", scenario.name));
    write_atomic(&path, &t.to_csv())?;
    announce(&[path]);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Run { file } => Scenario::from_path(file).and_then(|s| run_scenario(&s, g)),
        Command::Construct { a, b, zeros, n } => construct(*a, *b, zeros, *n, g),
        Command::Sweep {
            file,
            param,
            from,
            to,
            steps,
        } => sweep_command(file, param, *from, *to, *steps, g),
        Command::Criteria { file } => criteria(file, g),
        Command::Trace { file, re, im, window } => trace(file, Complex64::new(*re, *im), *window, g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
