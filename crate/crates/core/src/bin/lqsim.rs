use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use lqsim::scenario::{
    error_document, run_text, Kind, Overrides, Report, EXIT_ERROR, EXIT_FAIL, EXIT_PASS,
};
use lqsim::Error;

/// Run simulation, modular and decomposition scenarios from JSON files.
///
/// Exit codes: 0 all checks passed, 2 a check failed or an expectation was
/// not met, 1 the scenario could not be executed.
#[derive(Parser)]
#[command(name = "lqsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the quantum model of a preparation and check reproduction.
    Simulate(RunArgs),
    /// Modular-theory checks on the GNS space of a state.
    VerifyModular(RunArgs),
    /// Decide decomposability of a map and emit a decomposition or witness.
    Decompose(RunArgs),
    /// CHSH value, non-signalling and locality of a behavior.
    Chsh(RunArgs),
    /// Decomposability table for the built-in map family.
    ZooReport(RunArgs),
    /// Run several scenario files concurrently; kinds come from the files.
    Batch(BatchArgs),
}

#[derive(Args)]
struct Common {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiply every check tolerance by this factor.
    #[arg(long = "tol", value_name = "X")]
    tol: Option<f64>,
    /// Override the decomposition iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            tol_multiplier: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; `-` reads stdin. Optional for zoo-report.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the behavior table as CSV (x,y,a,b,p).
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BatchArgs {
    /// Scenario files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Directory for `<stem>.report.json`; created if missing.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn read_input(path: Option<&Path>, kind: Kind) -> Result<Vec<u8>, Error> {
    match path {
        Some(p) if p == Path::new("-") => {
            let mut buf = Vec::new();
            io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| Error::Io(e.to_string()))?;
            Ok(buf)
        }
        Some(p) => fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None if kind == Kind::ZooReport => Ok(b"{}".to_vec()),
        None => Err(Error::Contract("--in FILE is required".into())),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))
            .map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

fn write_csv(report: &Report, path: &Path) -> Result<(), Error> {
    let b = report.behavior.as_ref().ok_or_else(|| {
        Error::Contract("--csv given but this scenario produced no behavior".into())
    })?;
    let f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    b.write_csv(io::BufWriter::new(f))
}

fn fail(kind: Option<Kind>, err: &Error, out: Option<&Path>) -> i32 {
    eprintln!("lqsim: error: {err}");
    if let Err(e) = write_text(out, &pretty(&error_document(kind, err))) {
        eprintln!("lqsim: error: {e}");
    }
    EXIT_ERROR
}

fn run_one(kind: Kind, args: &RunArgs) -> i32 {
    let out = args.out.as_deref();
    let text = match read_input(args.input.as_deref(), kind) {
        Ok(t) => t,
        Err(e) => return fail(Some(kind), &e, out),
    };
    let report = match run_text(&text, Some(kind), &args.common.overrides()) {
        Ok(r) => r,
        Err((k, e)) => return fail(k, &e, out),
    };
    if let Some(csv) = &args.csv {
        if let Err(e) = write_csv(&report, csv) {
            return fail(Some(kind), &e, out);
        }
    }
    if let Err(e) = write_text(out, &report.to_json_pretty()) {
        eprintln!("lqsim: error: {e}");
        return EXIT_ERROR;
    }
    if !report.pass {
        eprintln!("lqsim: {}: checks failed", kind.as_str());
    }
    report.exit_code()
}

fn run_batch(args: &BatchArgs) -> i32 {
    if let Err(e) = fs::create_dir_all(&args.out_dir) {
        eprintln!("lqsim: error: {}: {e}", args.out_dir.display());
        return EXIT_ERROR;
    }
    let overrides = args.common.overrides();
    let codes: Vec<i32> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .files
            .iter()
            .map(|file| {
                scope.spawn(move || {
                    let stem = file
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or("scenario");
                    let dest = args.out_dir.join(format!("{stem}.report.json"));
                    let text = fs::read(file)
                        .map_err(|e| (None, Error::Io(format!("{}: {e}", file.display()))));
                    let (code, doc) = match text.and_then(|t| run_text(&t, None, &overrides)) {
                        Ok(r) => (r.exit_code(), r.to_json_pretty()),
                        Err((k, e)) => (EXIT_ERROR, pretty(&error_document(k, &e))),
                    };
                    let code = match fs::write(&dest, format!("{doc}\n")) {
                        Ok(()) => code,
                        Err(_) => EXIT_ERROR,
                    };
                    eprintln!("{}: exit {code}", file.display());
                    code
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(EXIT_ERROR))
            .collect()
    });
    if codes.contains(&EXIT_ERROR) {
        EXIT_ERROR
    } else if codes.contains(&EXIT_FAIL) {
        EXIT_FAIL
    } else {
        EXIT_PASS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Simulate(a) => run_one(Kind::Simulate, a),
        Command::VerifyModular(a) => run_one(Kind::VerifyModular, a),
        Command::Decompose(a) => run_one(Kind::Decompose, a),
        Command::Chsh(a) => run_one(Kind::Chsh, a),
        Command::ZooReport(a) => run_one(Kind::ZooReport, a),
        Command::Batch(a) => run_batch(a),
    };
    ExitCode::from(code as u8)
}
