//! Synthetic data and parse+load timing across backends.
//!
//! Each measurement parses a generated file, types every cell and runs the
//! implicit checks (row width, cell type). User invariants are left out so
//! that the numbers reflect parsing and loading. A naive line-splitting
//! reader with no quoting support is timed alongside the real backends as
//! a baseline.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{BackendKind, ParserBackend, RawField, Rows};
use crate::invariants::{csv_invariants_failed, BmiConsistency, InvariantSuite};
use crate::io::{write_csv, CsvIo};
use crate::model::{CsvSettings, Data, Headers};
use crate::schema::{CellRule, RowRule, SchemaDocument};
use crate::value::{approx_eq, CsvType, CsvValue, Reason};

/// Reference ratio printed next to measured speed-ups.
pub const REFERENCE_SPEEDUP: f64 = 1.5;
pub const BASELINE_NAME: &str = "naive-baseline";
pub const REPORT_COLUMNS: &str = "backend,rows,reps,median_ms,rows_per_sec";

const FIRST_NAMES: &[&str] = &[
    "Ada", "Alan", "Barbara", "Brian", "Claude", "Donald", "Edsger", "Frances", "Grace", "John",
    "Ken", "Leslie", "Margaret", "Niklaus", "Radia", "Tony",
];

/// Deterministic rows satisfying the schema's built-in cell, column and
/// row rules. File rules are not taken into account.
pub fn gen_data(row_count: usize, schema: &SchemaDocument, seed: u64) -> Data {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bmi = schema.row.as_ref().map(|RowRule::Bmi(b)| b.clone());
    let matrix = (0..row_count)
        .map(|i| {
            // BMI must land inside its own range, so resample until it does
            for _ in 0..1000 {
                let mut row: Vec<CsvValue> = schema
                    .headers
                    .iter()
                    .map(|h| gen_value(&mut rng, h.ty, h.cell.as_ref(), h.col.is_some(), i))
                    .collect();
                if let Some(b) = &bmi {
                    if !fill_bmi(&mut row, b, schema) {
                        continue;
                    }
                }
                return row;
            }
            panic!("could not generate a row satisfying the BMI rule")
        })
        .collect();
    Data::new(schema.settings.clone(), schema.headers(), matrix).expect("rows match the headers")
}

fn gen_value(rng: &mut ChaCha8Rng, ty: CsvType, cell: Option<&CellRule>, unique: bool, index: usize) -> CsvValue {
    let range = cell.map(|CellRule::Range(r)| (r.lo, r.hi));
    match ty {
        CsvType::String => {
            let first = FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())];
            if unique {
                CsvValue::Text(format!("{first}{index}"))
            } else {
                CsvValue::Text(first.to_owned())
            }
        }
        CsvType::Integer => {
            let (lo, hi) = range.map_or((0, 1000), |(lo, hi)| (lo.ceil() as i64, hi.floor() as i64));
            if unique {
                CsvValue::Int(lo + index as i64)
            } else {
                CsvValue::Int(rng.gen_range(lo..=hi.max(lo)))
            }
        }
        CsvType::Float => {
            // one decimal place keeps the text short and inside the range
            let (lo, hi) = range.map_or((0, 10_000), |(lo, hi)| ((lo * 10.0).ceil() as i64, (hi * 10.0).floor() as i64));
            let tenths = if unique { lo + index as i64 } else { rng.gen_range(lo..=hi.max(lo)) };
            CsvValue::Flt(tenths as f64 / 10.0)
        }
        CsvType::Boolean => CsvValue::Bool(rng.gen()),
    }
}

fn fill_bmi(row: &mut [CsvValue], rule: &BmiConsistency, schema: &SchemaDocument) -> bool {
    let (Some(weight), Some(height)) = (
        row[rule.weight_col - 1].as_f64(),
        row[rule.height_col - 1].as_f64(),
    ) else {
        return true;
    };
    let scale = 10f64.powi(rule.precision as i32);
    let expected = BmiConsistency::expected_bmi(weight, height);
    let bmi = (expected * scale).round() / scale;
    // a value halfway between two roundings can miss the tolerance by an ulp
    if !approx_eq(bmi, expected, rule.precision) {
        return false;
    }
    let header = &schema.headers[rule.bmi_col - 1];
    let value = match header.ty {
        CsvType::Float => CsvValue::Flt(bmi),
        _ => return true,
    };
    if let Some(CellRule::Range(r)) = &header.cell {
        if bmi < r.lo || bmi > r.hi {
            return false;
        }
    }
    row[rule.bmi_col - 1] = value;
    true
}

/// Writes `row_count` generated rows (plus the header line) to `path`.
pub fn gen_csv(path: &Path, row_count: usize, schema: &SchemaDocument, seed: u64) -> Result<PathBuf, String> {
    let data = gen_data(row_count, schema, seed);
    let result = File::create(path).and_then(|file| {
        let mut out = BufWriter::new(file);
        write_csv(&mut out, &data)?;
        out.flush()
    });
    result
        .map(|()| path.to_path_buf())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Splits lines on the delimiter; no quoting, trimming or comments.
#[derive(Debug, Clone)]
pub struct NaiveBaseline {
    settings: CsvSettings,
    last_error: Option<String>,
}

impl NaiveBaseline {
    pub fn new(settings: CsvSettings) -> NaiveBaseline {
        NaiveBaseline {
            settings,
            last_error: None,
        }
    }
}

impl ParserBackend for NaiveBaseline {
    fn parse<'a>(&'a mut self, input: Box<dyn Read + 'a>) -> Rows<'a> {
        self.last_error = None;
        let delimiter = self.settings.delimiter;
        let error = &mut self.last_error;
        let mut lines = BufReader::new(input).lines();
        Box::new(std::iter::from_fn(move || loop {
            match lines.next()? {
                Ok(line) => {
                    let line = line.strip_suffix('\r').unwrap_or(&line);
                    if line.is_empty() {
                        continue;
                    }
                    return Some(line.split(delimiter).map(RawField::unquoted).collect());
                }
                Err(e) => {
                    *error = Some(e.to_string());
                    return None;
                }
            }
        }))
    }

    fn last_error(&self) -> Reason {
        self.last_error.clone()
    }

    fn clear(&mut self) {
        self.last_error = None;
    }

    fn settings(&self) -> &CsvSettings {
        &self.settings
    }
}

/// Something that can be timed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Backend(BackendKind),
    NaiveBaseline,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Backend(kind) => kind.name(),
            Engine::NaiveBaseline => BASELINE_NAME,
        }
    }

    fn create(self, settings: CsvSettings) -> Box<dyn ParserBackend> {
        match self {
            Engine::Backend(kind) => kind.create(settings),
            Engine::NaiveBaseline => Box::new(NaiveBaseline::new(settings)),
        }
    }
}

/// One parse+load of `path`; returns the elapsed time.
pub fn measure_load(path: &Path, engine: Engine, settings: &CsvSettings, headers: &Headers) -> Result<Duration, String> {
    let start = Instant::now();
    let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let mut backend = engine.create(settings.clone());
    let mut io = CsvIo::new();
    let outcome = io.read_with(Box::new(file), backend.as_mut(), headers, true);
    if !outcome.success {
        return Err(io.last_error().unwrap_or_else(|| "read failed".to_owned()));
    }
    let failures = csv_invariants_failed(&outcome.data, &InvariantSuite::empty());
    let elapsed = start.elapsed();
    if !outcome.errors.is_empty() || !failures.is_empty() {
        return Err(format!(
            "generated data failed implicit checks ({} structural, {} cell)",
            outcome.errors.len(),
            failures.len()
        ));
    }
    Ok(elapsed)
}

pub fn median(samples: &mut [Duration]) -> Duration {
    samples.sort();
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub engine: String,
    pub rows: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub rows_per_sec: f64,
}

/// A measurement that could not be taken.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchFailure {
    pub engine: String,
    pub rows: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub failures: Vec<BenchFailure>,
}

impl BenchReport {
    pub fn get(&self, engine: &str, rows: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.engine == engine && r.rows == rows)
    }

    /// `baseline median / engine median` at the given size.
    pub fn speedup_vs_baseline(&self, engine: &str, rows: usize) -> Option<f64> {
        let base = self.get(BASELINE_NAME, rows)?;
        let other = self.get(engine, rows)?;
        Some(base.median_ms / other.median_ms)
    }

    /// CSV with columns `backend,rows,reps,median_ms,rows_per_sec`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.4},{:.1}", r.engine, r.rows, r.reps, r.median_ms, r.rows_per_sec);
        }
        out
    }

    /// Aligned table plus speed-up lines for every measured size.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8} {:>5} {:>12} {:>14}", "backend", "rows", "reps", "median_ms", "rows_per_sec");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>5} {:>12.3} {:>14.0}",
                r.engine, r.rows, r.reps, r.median_ms, r.rows_per_sec
            );
        }
        for f in &self.failures {
            let _ = writeln!(out, "{:<16} {:>8} failed: {}", f.engine, f.rows, f.reason);
        }
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.rows).collect();
        sizes.dedup();
        let engines: Vec<&str> = {
            let mut names: Vec<&str> = self.rows.iter().map(|r| r.engine.as_str()).collect();
            names.sort();
            names.dedup();
            names.into_iter().filter(|n| *n != BASELINE_NAME).collect()
        };
        for rows in sizes {
            for engine in &engines {
                if let Some(ratio) = self.speedup_vs_baseline(engine, rows) {
                    let _ = writeln!(
                        out,
                        "speed-up of {engine} over {BASELINE_NAME} at {rows} rows: {ratio:.2}x (reference ~{REFERENCE_SPEEDUP}x)"
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub row_counts: Vec<usize>,
    pub backends: Vec<BackendKind>,
    pub repetitions: usize,
    pub seed: u64,
    /// Where generated inputs are written.
    pub work_dir: PathBuf,
}

/// Times every backend plus the naive baseline at every size.
///
/// Each input is generated once per size. Every engine loads it once
/// untimed, then `repetitions` timed loads run round-robin across engines
/// and the median is kept. A failing engine records a [`BenchFailure`] for
/// that cell and the run continues.
pub fn run_bench(config: &BenchConfig, schema: &SchemaDocument) -> Result<BenchReport, String> {
    if config.repetitions < 3 {
        return Err(format!("at least 3 repetitions are required, got {}", config.repetitions));
    }
    if let Some(&0) = config.row_counts.iter().find(|&&n| n == 0) {
        return Err("row counts must be positive".to_owned());
    }
    let headers = schema.headers().without_invariants();
    let mut engines: Vec<Engine> = config.backends.iter().map(|&k| Engine::Backend(k)).collect();
    engines.push(Engine::NaiveBaseline);

    let mut report = BenchReport::default();
    for &rows in &config.row_counts {
        let path = config.work_dir.join(format!("bench_{rows}.csv"));
        gen_csv(&path, rows, schema, config.seed)?;
        // one untimed warm-up each, then round-robin so that machine drift
        // hits every engine alike
        let mut samples: Vec<Result<Vec<Duration>, String>> = engines
            .iter()
            .map(|&engine| measure_load(&path, engine, &schema.settings, &headers).map(|_| Vec::new()))
            .collect();
        for _ in 0..config.repetitions {
            for (&engine, slot) in engines.iter().zip(samples.iter_mut()) {
                if let Ok(times) = slot {
                    match measure_load(&path, engine, &schema.settings, &headers) {
                        Ok(t) => times.push(t),
                        Err(reason) => *slot = Err(reason),
                    }
                }
            }
        }
        for (engine, slot) in engines.iter().zip(samples) {
            match slot {
                Ok(mut times) => {
                    let mid = median(&mut times).max(Duration::from_nanos(1));
                    report.rows.push(BenchRow {
                        engine: engine.name().to_owned(),
                        rows,
                        reps: config.repetitions,
                        median_ms: mid.as_secs_f64() * 1000.0,
                        rows_per_sec: rows as f64 / mid.as_secs_f64(),
                    });
                }
                Err(reason) => report.failures.push(BenchFailure {
                    engine: engine.name().to_owned(),
                    rows,
                    reason,
                }),
            }
        }
    }
    Ok(report)
}
