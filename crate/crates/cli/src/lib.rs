//! Command implementations behind the `safe-csv` binary.
//!
//! [`run`] takes the full argument list and returns the exit code together
//! with everything destined for stdout and stderr, so tests can drive the
//! tool in-process.
//!
//! Exit codes: 0 when nothing is wrong, 1 when the file loaded but has
//! structural or invariant failures, 2 for usage, schema and I/O problems.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use safe_csv::bench::{run_bench, BenchConfig};
use safe_csv::schema::{parse_schema, SchemaDocument, EXAMPLE_SCHEMA};
use safe_csv::{render_report, BackendKind, CsvType, Session};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "safe-csv", version, about = "Validate CSV files against a typed schema")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a CSV file against a schema and report every failure.
    Validate {
        csv: PathBuf,
        #[command(flatten)]
        load: LoadArgs,
    },
    /// Load a CSV file against a schema and write the typed data back out.
    Print {
        csv: PathBuf,
        #[command(flatten)]
        load: LoadArgs,
        /// Destination; must differ from the input.
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a CSV file taking column names from its first row.
    Infer {
        csv: PathBuf,
        /// Comma-separated column types, e.g. String,Int,Float,Bool.
        #[arg(long, value_delimiter = ',', value_parser = parse_type, required = true)]
        types: Vec<CsvType>,
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value = "native")]
        parser: BackendKind,
    },
    /// Time the parser backends on generated data.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct LoadArgs {
    /// Schema file describing settings, headers and invariants.
    #[arg(long)]
    schema: PathBuf,
    /// Discard the loaded data when anything fails.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value = "native")]
    parser: BackendKind,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Row counts to generate.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,35000")]
    rows: Vec<usize>,
    /// Backends to time; the naive baseline is always included.
    #[arg(long, value_delimiter = ',', default_value = "native,fast")]
    parsers: Vec<BackendKind>,
    /// Repetitions per measurement (at least 3).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Schema used to generate data; the built-in example by default.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Write the report as CSV to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_type(s: &str) -> Result<CsvType, String> {
    CsvType::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = CsvType::ALL.iter().map(|t| t.name()).collect();
        format!("unknown type `{s}` (expected one of {})", names.join(", "))
    })
}

/// Exit code and captured output of one invocation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(message: impl std::fmt::Display) -> Outcome {
        Outcome {
            code: EXIT_ERROR,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    code: EXIT_CLEAN,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => Outcome {
                    code: EXIT_ERROR,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    match cli.command {
        Command::Validate { csv, load } => validate(&csv, &load),
        Command::Print { csv, load, out } => print(&csv, &load, &out),
        Command::Infer {
            csv,
            types,
            strict,
            parser,
        } => infer(&csv, &types, strict, parser),
        Command::Bench(args) => bench(&args),
    }
}

fn read_schema(path: &Path) -> Result<SchemaDocument, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read schema {}: {e}", path.display()))?;
    parse_schema(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(csv: &Path, args: &LoadArgs) -> Result<Session, Outcome> {
    let schema = read_schema(&args.schema).map_err(Outcome::error)?;
    let mut session = Session::new().with_header_line(schema.has_header_line);
    session.load_csv(
        csv,
        args.parser,
        &schema.settings,
        &schema.headers(),
        &schema.suite(),
        args.strict,
    );
    match session.ferr() {
        Some(reason) => Err(Outcome::error(reason)),
        None => Ok(session),
    }
}

/// Report text and exit code for a loaded session.
fn report(csv: &Path, session: &Session) -> Outcome {
    let stdout = render_report(
        &csv.display().to_string(),
        session.structural_errors(),
        &session.invariant_failures(),
    );
    let mut stderr = String::new();
    if session.is_clean() {
        return Outcome {
            code: EXIT_CLEAN,
            stdout,
            stderr,
        };
    }
    if session.strict() {
        stderr.push_str("strict mode: loaded data discarded\n");
    }
    Outcome {
        code: EXIT_FAILURES,
        stdout,
        stderr,
    }
}

fn validate(csv: &Path, args: &LoadArgs) -> Outcome {
    match load(csv, args) {
        Ok(session) => report(csv, &session),
        Err(outcome) => outcome,
    }
}

fn print(csv: &Path, args: &LoadArgs, out: &Path) -> Outcome {
    let mut session = match load(csv, args) {
        Ok(session) => session,
        Err(outcome) => return outcome,
    };
    if !session.print_csv(out) {
        return Outcome::error(session.ferr().unwrap_or("write failed"));
    }
    report(csv, &session)
}

fn infer(csv: &Path, types: &[CsvType], strict: bool, parser: BackendKind) -> Outcome {
    let mut session = Session::new();
    session.load_simple_headers_csv(csv, parser, types, strict);
    if let Some(reason) = session.ferr() {
        return Outcome::error(reason);
    }
    let mut columns = String::new();
    if let Some(data) = session.data() {
        for (i, header) in data.headers().iter().enumerate() {
            columns.push_str(&format!("column {}: {} ({})\n", i + 1, header.name(), header.ty()));
        }
    }
    let mut outcome = report(csv, &session);
    outcome.stdout.insert_str(0, &columns);
    outcome
}

fn bench(args: &BenchArgs) -> Outcome {
    let schema = match &args.schema {
        Some(path) => match read_schema(path) {
            Ok(schema) => schema,
            Err(e) => return Outcome::error(e),
        },
        None => parse_schema(EXAMPLE_SCHEMA).expect("built-in schema parses"),
    };
    let work_dir = match tempfile::tempdir() {
        Ok(dir) => dir,
        Err(e) => return Outcome::error(format!("cannot create a work directory: {e}")),
    };
    let config = BenchConfig {
        row_counts: args.rows.clone(),
        backends: args.parsers.clone(),
        repetitions: args.reps,
        seed: args.seed,
        work_dir: work_dir.path().to_path_buf(),
    };
    let report = match run_bench(&config, &schema) {
        Ok(report) => report,
        Err(e) => return Outcome::error(e),
    };
    if let Some(out) = &args.out {
        if let Err(e) = fs::write(out, report.to_csv()) {
            return Outcome::error(format!("cannot write {}: {e}", out.display()));
        }
    }
    let code = if report.failures.is_empty() { EXIT_CLEAN } else { EXIT_FAILURES };
    Outcome {
        code,
        stdout: report.to_table(),
        stderr: String::new(),
    }
}
