//! Parsers for the three input formats: inline number lists, two-arm count
//! files, and unit-level CSV.
//!
//! All parsers are pure functions of their input text, so they double as
//! fuzzing entry points. Line numbers in errors are 1-based.

use ordibound_core::data::UnitRecord;
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: malformed row: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("line {line}: outcome category must be a nonnegative integer, got {value:?}")]
    NonIntegerCategory { line: usize, value: String },
    #[error("missing required field {0:?}")]
    MissingColumn(String),
    #[error("treated and control have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("line {line}: counts cannot be negative")]
    NegativeCount { line: usize },
    #[error("input is empty")]
    EmptyInput,
}

/// Comma-separated floats, e.g. `0.2,0.3,0.5`.
pub fn parse_number_list(text: &str) -> Result<Vec<f64>, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    text.split(',')
        .map(|field| {
            let field = field.trim();
            field.parse::<f64>().map_err(|e| ParseError::MalformedRow {
                line: 1,
                detail: format!("{field:?}: {e}"),
            })
        })
        .collect()
}

fn parse_count_field(field: &str, line: usize) -> Result<u64, ParseError> {
    let field = field.trim();
    if let Some(rest) = field.strip_prefix('-') {
        if rest.chars().all(|c| c.is_ascii_digit()) && !rest.is_empty() {
            return Err(ParseError::NegativeCount { line });
        }
    }
    field.parse::<u64>().map_err(|e| ParseError::MalformedRow {
        line,
        detail: format!("{field:?}: {e}"),
    })
}

/// Comma-separated nonnegative integer counts.
pub fn parse_count_list(text: &str) -> Result<Vec<u64>, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    text.split(',').map(|field| parse_count_field(field, 1)).collect()
}

/// Two-arm count file: one `treated:` line and one `control:` line of
/// comma-separated counts. Blank lines and `#` comments are skipped.
pub fn parse_count_file(text: &str) -> Result<(Vec<u64>, Vec<u64>), ParseError> {
    let mut treated: Option<Vec<u64>> = None;
    let mut control: Option<Vec<u64>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((label, values)) = trimmed.split_once(':') else {
            return Err(ParseError::MalformedRow {
                line,
                detail: "expected `treated:` or `control:` followed by counts".into(),
            });
        };
        let counts = values
            .split(',')
            .map(|field| parse_count_field(field, line))
            .collect::<Result<Vec<u64>, _>>()?;
        let slot = match label.trim() {
            "treated" => &mut treated,
            "control" => &mut control,
            other => {
                return Err(ParseError::MalformedRow {
                    line,
                    detail: format!("unknown arm label {other:?}"),
                })
            }
        };
        if slot.is_some() {
            return Err(ParseError::MalformedRow {
                line,
                detail: format!("duplicate {} line", label.trim()),
            });
        }
        *slot = Some(counts);
    }
    let treated = treated.ok_or_else(|| ParseError::MissingColumn("treated".into()))?;
    let control = control.ok_or_else(|| ParseError::MissingColumn("control".into()))?;
    if treated.len() != control.len() {
        return Err(ParseError::LengthMismatch(treated.len(), control.len()));
    }
    if treated.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    Ok((treated, control))
}

/// Unit-level CSV with required columns `z` (treatment, 0 or 1) and `y`
/// (outcome category); every other column is a numeric covariate. Returns
/// the units plus the covariate column names in file order.
pub fn parse_unit_csv(input: impl Read) -> Result<(Vec<UnitRecord>, Vec<String>), ParseError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| ParseError::MalformedRow { line: 1, detail: e.to_string() })?
        .clone();
    let mut z_col = None;
    let mut y_col = None;
    let mut covariate_cols = Vec::new();
    let mut covariate_names = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        match name {
            "z" => z_col = Some(idx),
            "y" => y_col = Some(idx),
            other => {
                covariate_cols.push(idx);
                covariate_names.push(other.to_string());
            }
        }
    }
    let z_col = z_col.ok_or_else(|| ParseError::MissingColumn("z".into()))?;
    let y_col = y_col.ok_or_else(|| ParseError::MissingColumn("y".into()))?;

    let mut units = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record =
            record.map_err(|e| ParseError::MalformedRow { line, detail: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(ParseError::MalformedRow {
                line,
                detail: format!("{} fields, expected {}", record.len(), headers.len()),
            });
        }
        let z_raw = &record[z_col];
        let treatment = match z_raw {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(ParseError::MalformedRow {
                    line,
                    detail: format!("treatment must be 0 or 1, got {other:?}"),
                })
            }
        };
        let y_raw = &record[y_col];
        let outcome = y_raw.parse::<usize>().map_err(|_| ParseError::NonIntegerCategory {
            line,
            value: y_raw.to_string(),
        })?;
        let mut covariates = Vec::with_capacity(covariate_cols.len());
        for &col in &covariate_cols {
            let field = &record[col];
            let value = field.parse::<f64>().map_err(|e| ParseError::MalformedRow {
                line,
                detail: format!("covariate {:?}: {e}", headers[col].to_string()),
            })?;
            if !value.is_finite() {
                return Err(ParseError::MalformedRow {
                    line,
                    detail: format!("covariate {:?} is not finite", headers[col].to_string()),
                });
            }
            covariates.push(value);
        }
        units.push(UnitRecord { treatment, outcome, covariates });
    }
    if units.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    Ok((units, covariate_names))
}
