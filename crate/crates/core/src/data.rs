//! CSV profiling and reconciliation of a conceptual model against data.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ConceptualModel, MeasureKind, VariableKind};

/// Distinct values beyond this many are counted but not kept.
const MAX_KEPT_VALUES: usize = 1024;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: u64, reason: String },
    #[error("CSV file is empty")]
    EmptyFile,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeGuess {
    Integer,
    Numeric,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub observed_distinct: u64,
    pub observed_type_guess: TypeGuess,
    pub row_count: u64,
    pub missing_count: u64,
    /// Smallest numeric value, when the column is numeric.
    pub min: Option<f64>,
    /// Observed values, omitted when there are too many to keep.
    pub values: Option<BTreeSet<String>>,
}

struct ColumnAcc {
    seen: HashSet<String>,
    all_int: bool,
    all_num: bool,
    min: Option<f64>,
    missing: u64,
}

impl ColumnAcc {
    fn new() -> Self {
        ColumnAcc { seen: HashSet::new(), all_int: true, all_num: true, min: None, missing: 0 }
    }

    fn push(&mut self, cell: &str) {
        let cell = cell.trim();
        if cell.is_empty() || cell == "NA" {
            self.missing += 1;
            return;
        }
        if cell.parse::<i64>().is_err() {
            self.all_int = false;
        }
        match cell.parse::<f64>() {
            Ok(x) if x.is_finite() => self.min = Some(self.min.map_or(x, |m| m.min(x))),
            _ => self.all_num = false,
        }
        if !self.seen.contains(cell) {
            self.seen.insert(cell.to_string());
        }
    }

    fn finish(self, name: String, rows: u64) -> ColumnProfile {
        let non_missing = rows - self.missing;
        let guess = if non_missing == 0 || !self.all_num {
            TypeGuess::Text
        } else if self.all_int {
            TypeGuess::Integer
        } else {
            TypeGuess::Numeric
        };
        let observed_distinct = self.seen.len() as u64;
        let values = (self.seen.len() <= MAX_KEPT_VALUES).then(|| self.seen.into_iter().collect());
        ColumnProfile {
            name,
            observed_distinct,
            observed_type_guess: guess,
            row_count: rows,
            missing_count: self.missing,
            min: if guess == TypeGuess::Text { None } else { self.min },
            values,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum QuoteState {
    FieldStart,
    Unquoted,
    Quoted,
    QuoteInQuoted,
}

/// Watches the bytes the CSV reader consumes so that an unterminated
/// quoted field can be reported at the line where it opened.
struct QuoteTracker<R> {
    inner: R,
    state: QuoteState,
    line: u64,
    open_line: u64,
}

impl<R: Read> Read for QuoteTracker<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        for &b in &buf[..n] {
            use QuoteState::*;
            self.state = match (self.state, b) {
                (Quoted, b'"') => QuoteInQuoted,
                (Quoted, _) => Quoted,
                (QuoteInQuoted, b'"') => Quoted,
                (FieldStart, b'"') => {
                    self.open_line = self.line;
                    Quoted
                }
                (_, b',' | b'\n') => FieldStart,
                (_, b'\r') => self.state,
                _ => Unquoted,
            };
            if b == b'\n' {
                self.line += 1;
            }
        }
        Ok(n)
    }
}

pub fn profile_csv(path: impl AsRef<Path>) -> Result<Vec<ColumnProfile>, ProfileError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ProfileError::FileNotFound(path.display().to_string()),
        _ => ProfileError::Io(e),
    })?;
    profile_reader(BufReader::new(file))
}

pub fn profile_reader(reader: impl Read) -> Result<Vec<ColumnProfile>, ProfileError> {
    let tracker = QuoteTracker { inner: reader, state: QuoteState::FieldStart, line: 1, open_line: 1 };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(tracker);
    let malformed = |e: csv::Error| -> ProfileError {
        let line = e.position().map_or(1, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => ProfileError::Io(io),
            kind => ProfileError::MalformedCsv { line, reason: csv_reason(&kind) },
        }
    };

    let headers: Vec<String> = rdr.headers().map_err(malformed)?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(ProfileError::EmptyFile);
    }
    let mut cols: Vec<ColumnAcc> = headers.iter().map(|_| ColumnAcc::new()).collect();
    let mut rows = 0u64;
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(malformed(e)),
        }
        rows += 1;
        for (acc, cell) in cols.iter_mut().zip(record.iter()) {
            acc.push(cell);
        }
    }
    let tracker = rdr.into_inner();
    if tracker.state == QuoteState::Quoted {
        return Err(ProfileError::MalformedCsv { line: tracker.open_line, reason: "unterminated quoted field".into() });
    }
    Ok(headers.into_iter().zip(cols).map(|(name, acc)| acc.finish(name, rows)).collect())
}

fn csv_reason(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        other => format!("{other:?}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum DataError {
    #[error("no column named `{variable}` in the data")]
    MissingColumn { variable: String },
    #[error("`{variable}` is declared {declared} but its column holds {observed} values")]
    TypeMismatch { variable: String, declared: String, observed: String },
    #[error("counts measure `{variable}` has negative values")]
    NegativeCount { variable: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum DataWarning {
    CardinalityConflict { variable: String, declared: u64, observed: u64 },
    UndeclaredLevels { variable: String, levels: Vec<String> },
    MissingValues { variable: String, count: u64, rows: u64 },
}

impl std::fmt::Display for DataWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataWarning::CardinalityConflict { variable, declared, observed } => write!(
                f,
                "`{variable}` declares cardinality {declared} but the data has {observed} distinct values; keeping {declared}"
            ),
            DataWarning::UndeclaredLevels { variable, levels } => {
                write!(f, "`{variable}` has values not among its declared levels: {}", levels.join(", "))
            }
            DataWarning::MissingValues { variable, count, rows } => {
                write!(f, "`{variable}` is missing in {count} of {rows} rows")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconciled {
    pub model: ConceptualModel,
    pub warnings: Vec<DataWarning>,
}

/// Checks the declared schema against column profiles and fills in
/// cardinalities the program left out. Declared cardinalities are kept
/// even when the data disagree.
pub fn reconcile(cm: &ConceptualModel, profiles: &[ColumnProfile]) -> Result<Reconciled, Vec<DataError>> {
    let column = |name: &str| profiles.iter().find(|p| p.name == name);
    let mut model = cm.clone();
    let mut warnings = Vec::new();
    let mut errors = Vec::new();

    for var in &mut model.variables {
        let col_name = match &var.kind {
            VariableKind::Unit { id_column: Some(c) } => c.clone(),
            VariableKind::Unit { id_column: None } => continue,
            VariableKind::Measure { .. } => var.name.clone(),
        };
        let Some(p) = column(&col_name) else {
            errors.push(DataError::MissingColumn { variable: var.name.clone() });
            continue;
        };

        if let VariableKind::Measure { mtype, .. } = &var.kind {
            let mismatch = |declared: &str| DataError::TypeMismatch {
                variable: var.name.clone(),
                declared: declared.to_string(),
                observed: format!("{:?}", p.observed_type_guess).to_lowercase(),
            };
            match &mtype.kind {
                MeasureKind::Continuous if p.observed_type_guess == TypeGuess::Text && p.observed_distinct > 0 => {
                    errors.push(mismatch("continuous"));
                    continue;
                }
                MeasureKind::Counts if p.observed_distinct > 0 && p.observed_type_guess != TypeGuess::Integer => {
                    errors.push(mismatch("counts"));
                    continue;
                }
                MeasureKind::Counts if p.min.is_some_and(|m| m < 0.0) => {
                    errors.push(DataError::NegativeCount { variable: var.name.clone() });
                    continue;
                }
                MeasureKind::OrderedCategories { levels } | MeasureKind::UnorderedCategories { levels } => {
                    if let Some(values) = &p.values {
                        let extra: Vec<String> = values.iter().filter(|v| !levels.contains(v)).cloned().collect();
                        if !extra.is_empty() {
                            warnings.push(DataWarning::UndeclaredLevels { variable: var.name.clone(), levels: extra });
                        }
                    }
                }
                _ => {}
            }
            if p.missing_count > 0 {
                warnings.push(DataWarning::MissingValues {
                    variable: var.name.clone(),
                    count: p.missing_count,
                    rows: p.row_count,
                });
            }
        }

        match var.cardinality {
            None => var.cardinality = Some(p.observed_distinct),
            Some(declared) if declared != p.observed_distinct => warnings.push(DataWarning::CardinalityConflict {
                variable: var.name.clone(),
                declared,
                observed: p.observed_distinct,
            }),
            Some(_) => {}
        }
    }

    if errors.is_empty() {
        Ok(Reconciled { model, warnings })
    } else {
        Err(errors)
    }
}
