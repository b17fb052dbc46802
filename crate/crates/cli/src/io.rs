//! CSV reading and writing with line-numbered diagnostics.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use votecount::estimate::ingest_error_matrix;
use votecount::{ErrorCountDistribution, ValidationSample};

/// Destination for CSV output: a file, or stdout when no path is given.
pub fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_source(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_string(&mut text).context("cannot read stdin")?;
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .with_context(|| format!("cannot read {}", path.display()))?;
    }
    Ok(text)
}

/// One non-empty CSV record with its 1-based line number.
pub struct Record {
    pub line: u64,
    pub fields: Vec<String>,
}

pub struct Table {
    pub path: PathBuf,
    pub header: Option<Vec<String>>,
    pub records: Vec<Record>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_source(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.with_context(|| format!("{}: malformed CSV", path.display()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.iter().all(str::is_empty) {
                continue;
            }
            records.push(Record {
                line,
                fields: rec.iter().map(str::to_owned).collect(),
            });
        }
        let header = match records.first() {
            Some(r) if r.fields[0].parse::<f64>().is_err() => {
                Some(records.remove(0).fields)
            }
            _ => None,
        };
        Ok(Self {
            path: path.to_owned(),
            header,
            records,
        })
    }

    pub fn err(&self, line: u64, msg: impl std::fmt::Display) -> anyhow::Error {
        anyhow!("{}:{line}: {msg}", self.path.display())
    }

    pub fn header_starts_with(&self, name: &str) -> bool {
        self.header
            .as_ref()
            .is_some_and(|h| h.first().is_some_and(|c| c.eq_ignore_ascii_case(name)))
    }
}

pub fn parse_field<T: std::str::FromStr>(table: &Table, rec: &Record, col: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .fields
        .get(col)
        .ok_or_else(|| table.err(rec.line, format!("missing column {} ({what})", col + 1)))?;
    raw.parse::<T>()
        .map_err(|e| table.err(rec.line, format!("bad {what} {raw:?}: {e}")))
}

fn expect_width(table: &Table, rec: &Record, width: usize) -> Result<()> {
    if rec.fields.len() != width {
        return Err(table.err(
            rec.line,
            format!("expected {width} columns, found {}", rec.fields.len()),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    /// `error_count,frequency` header means histogram, `example_id,...`
    /// means matrix; headerless two-column files are histograms.
    Auto,
    Matrix,
    Histogram,
}

/// `example_id,c0,c1,...`: one row per example, one 0/1 column per
/// classifier (1 = that classifier is wrong on the example).
pub fn read_matrix(table: &Table) -> Result<ValidationSample> {
    let width = table
        .header
        .as_ref()
        .map(Vec::len)
        .or_else(|| table.records.first().map(|r| r.fields.len()))
        .ok_or_else(|| anyhow!("{}: no examples", table.path.display()))?;
    if width < 2 {
        bail!("{}: matrix needs an id column and at least one classifier", table.path.display());
    }
    let mut rows = Vec::with_capacity(table.records.len());
    for rec in &table.records {
        expect_width(table, rec, width)?;
        let row = (1..width)
            .map(|c| match rec.fields[c].as_str() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(table.err(
                    rec.line,
                    format!("column {} is {other:?}, expected 0 or 1", c + 1),
                )),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    Ok(ingest_error_matrix(&rows)?)
}

/// `error_count,frequency` rows; counts may repeat and are summed.
pub fn read_histogram(table: &Table, m: usize) -> Result<ValidationSample> {
    let mut hist = Vec::with_capacity(table.records.len());
    for rec in &table.records {
        expect_width(table, rec, 2)?;
        let i: usize = parse_field(table, rec, 0, "error count")?;
        if i > m {
            return Err(table.err(rec.line, format!("error count {i} exceeds m={m}")));
        }
        let k: u64 = parse_field(table, rec, 1, "frequency")?;
        hist.push((i, k));
    }
    ValidationSample::from_histogram(m, &hist)
        .with_context(|| format!("{}: invalid histogram", table.path.display()))
}

pub fn read_sample(path: &Path, format: InputFormat, m: usize) -> Result<ValidationSample> {
    let table = Table::read(path)?;
    let format = match format {
        InputFormat::Auto if table.header_starts_with("error_count") => InputFormat::Histogram,
        InputFormat::Auto if table.header_starts_with("example_id") => InputFormat::Matrix,
        InputFormat::Auto => match table.records.first().map(|r| r.fields.len()) {
            Some(2) | None => InputFormat::Histogram,
            Some(_) => InputFormat::Matrix,
        },
        f => f,
    };
    match format {
        InputFormat::Matrix => read_matrix(&table),
        _ => read_histogram(&table, m),
    }
}

/// `i,w` or `vmin,i,w` rows; with three columns only the rows whose first
/// field equals `vmin` are kept. Missing indices up to `m` get weight 0.
pub fn read_weights(path: &Path, vmin: Option<usize>, m: Option<usize>) -> Result<ErrorCountDistribution> {
    let table = Table::read(path)?;
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for rec in &table.records {
        let (i_col, w_col) = match rec.fields.len() {
            2 => (0, 1),
            3 => {
                let key: usize = parse_field(&table, rec, 0, "vmin")?;
                let wanted = vmin.ok_or_else(|| {
                    table.err(rec.line, "file holds several distributions; pass --vmin")
                })?;
                if key != wanted {
                    continue;
                }
                (1, 2)
            }
            n => return Err(table.err(rec.line, format!("expected 2 or 3 columns, found {n}"))),
        };
        entries.push((
            parse_field(&table, rec, i_col, "error count")?,
            parse_field(&table, rec, w_col, "weight")?,
        ));
    }
    if entries.is_empty() {
        bail!("{}: no weights found", table.path.display());
    }
    let top = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let m = match m {
        Some(m) if m < top => bail!("{}: error count {top} exceeds m={m}", path.display()),
        Some(m) => m,
        None => top,
    };
    let mut w = vec![0.0; m + 1];
    for (i, x) in entries {
        w[i] += x;
    }
    ErrorCountDistribution::new(w).with_context(|| format!("{}: invalid distribution", path.display()))
}
