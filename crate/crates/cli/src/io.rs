//! Delimited-text file formats: predictions, elicitation samples, and
//! control totals. Header rows are required, values use a decimal point
//! with no thousands separators, and written predictions keep full
//! precision so a round trip reproduces identical numbers.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crossloss_core::blend::{ControlGroup, ControlSpec};
use crossloss_core::elicitation::ElicitationSample;
use crossloss_core::{Error as CoreError, PredictionSet};

/// Errors carrying their process exit code: 2 for parse/format trouble,
/// 3 for domain violations, 4 for numerical failures.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Core(CoreError),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Domain(_)
                | CoreError::Misaligned(_)
                | CoreError::InsufficientData(_) => 3,
                CoreError::RankDeficient(_) => 4,
                CoreError::InvalidConfig(_) => 2,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parsed predictions file: ids, actuals, and one column per named set.
#[derive(Debug, Clone)]
pub struct PredictionsFile {
    pub ids: Vec<String>,
    pub actuals: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PredictionsFile {
    pub fn prediction_sets(&self) -> CliResult<Vec<PredictionSet>> {
        self.columns
            .iter()
            .map(|(name, preds)| {
                PredictionSet::from_columns(name.clone(), &self.ids, &self.actuals, preds)
                    .map_err(CliError::from)
            })
            .collect()
    }

    pub fn prediction_set(&self, name: &str) -> CliResult<PredictionSet> {
        let (col_name, preds) = self
            .columns
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| {
                CliError::Parse(format!(
                    "no prediction column named {name}; available: {}",
                    self.columns
                        .iter()
                        .map(|(n, _)| n.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?;
        PredictionSet::from_columns(col_name.clone(), &self.ids, &self.actuals, preds)
            .map_err(CliError::from)
    }
}

fn parse_number(raw: &str, row: usize, column: &str) -> CliResult<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        CliError::Parse(format!(
            "row {row}, column {column}: cannot parse {raw:?} as a number"
        ))
    })
}

/// Reads a predictions file: header `id,actual,<set>...`, one row per area.
pub fn read_predictions(path: &Path) -> CliResult<PredictionsFile> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "actual" {
        return Err(CliError::Parse(format!(
            "{}: header must be `id,actual,<set name>...`, got {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let set_names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();

    let mut ids = Vec::new();
    let mut actuals = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> =
        set_names.iter().map(|n| (n.clone(), Vec::new())).collect();
    let mut seen = std::collections::HashSet::new();

    for (index, record) in reader.records().enumerate() {
        let row = index + 2; // header is row 1
        let record = record.map_err(|e| CliError::Parse(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::Parse(format!(
                "row {row}: expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(CliError::Parse(format!("row {row}: empty id")));
        }
        if !seen.insert(id.clone()) {
            return Err(CliError::Parse(format!("row {row}: duplicate id {id}")));
        }
        let actual = parse_number(&record[1], row, "actual")?;
        if !actual.is_finite() || actual <= 0.0 {
            return Err(CliError::Core(CoreError::Domain(format!(
                "row {row}: actual must be > 0, got {actual}"
            ))));
        }
        for (k, (name, column)) in columns.iter_mut().enumerate() {
            let value = parse_number(&record[k + 2], row, name)?;
            if !value.is_finite() || value < 0.0 {
                return Err(CliError::Core(CoreError::Domain(format!(
                    "row {row}, column {name}: prediction must be >= 0, got {value}"
                ))));
            }
            column.push(value);
        }
        ids.push(id);
        actuals.push(actual);
    }

    if ids.is_empty() {
        return Err(CliError::Parse(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    Ok(PredictionsFile {
        ids,
        actuals,
        columns,
    })
}

/// Writes a predictions file with full-precision numbers (the shortest
/// decimal form that parses back to the identical float).
pub fn write_predictions(
    path: &Path,
    ids: &[String],
    actuals: &[f64],
    columns: &[(String, Vec<f64>)],
) -> CliResult<()> {
    let mut out = File::create(path)?;
    let mut header = String::from("id,actual");
    for (name, _) in columns {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for i in 0..ids.len() {
        let mut line = format!("{},{}", ids[i], actuals[i]);
        for (_, column) in columns {
            line.push_str(&format!(",{}", column[i]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads an elicitation file: header `epsilon,actual,satisfaction`.
pub fn read_elicitation(path: &Path) -> CliResult<Vec<ElicitationSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() != 3
        || &headers[0] != "epsilon"
        || &headers[1] != "actual"
        || &headers[2] != "satisfaction"
    {
        return Err(CliError::Parse(format!(
            "{}: header must be `epsilon,actual,satisfaction`, got {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }

    let mut samples = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| CliError::Parse(format!("row {row}: {e}")))?;
        if record.len() != 3 {
            return Err(CliError::Parse(format!(
                "row {row}: expected 3 fields, got {}",
                record.len()
            )));
        }
        let epsilon = parse_number(&record[0], row, "epsilon")?;
        let actual = parse_number(&record[1], row, "actual")?;
        let satisfaction = parse_number(&record[2], row, "satisfaction")?;
        let sample = ElicitationSample::new(epsilon, actual, satisfaction)
            .map_err(|e| CliError::Core(CoreError::Domain(format!("row {row}: {e}"))))?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(CliError::Parse(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(samples)
}

/// Reads a controls file: header `id,group,total`, one row per id, the same
/// total repeated on every row of a group.
pub fn read_controls(path: &Path) -> CliResult<ControlSpec> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() != 3 || &headers[0] != "id" || &headers[1] != "group" || &headers[2] != "total"
    {
        return Err(CliError::Parse(format!(
            "{}: header must be `id,group,total`, got {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }

    // groups keep their first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, (Vec<String>, f64)> =
        std::collections::HashMap::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| CliError::Parse(format!("row {row}: {e}")))?;
        if record.len() != 3 {
            return Err(CliError::Parse(format!(
                "row {row}: expected 3 fields, got {}",
                record.len()
            )));
        }
        let id = record[0].to_string();
        let group = record[1].to_string();
        let total = parse_number(&record[2], row, "total")?;
        match groups.get_mut(&group) {
            Some((ids, existing)) => {
                if *existing != total {
                    return Err(CliError::Parse(format!(
                        "row {row}: group {group} listed with conflicting totals {existing} and {total}"
                    )));
                }
                ids.push(id);
            }
            None => {
                order.push(group.clone());
                groups.insert(group, (vec![id], total));
            }
        }
    }

    let control_groups: Vec<ControlGroup> = order
        .into_iter()
        .map(|name| {
            let (ids, total) = groups.remove(&name).expect("ordered key");
            ControlGroup { name, ids, total }
        })
        .collect();
    ControlSpec::new(control_groups).map_err(CliError::from)
}
