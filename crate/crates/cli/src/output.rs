//! Output formats and the mapping from library errors to exit codes.

use std::io::Write;
use std::path::PathBuf;

use resetsearch::Error;
use serde_json::Value;

#[derive(clap::ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// A failure with its process exit code: 2 for bad input, 3 for numeric
/// failures, 4 for an objective that is infinite everywhere.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    /// Partial result to emit before exiting, if any.
    pub payload: Option<Value>,
}

impl CliError {
    pub fn parse(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into(), payload: None }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError { code: 3, message: msg.into(), payload: None }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::DensityNotNormalized { .. }
            | Error::AtomAtOrigin
            | Error::OneSided { .. }
            | Error::InvalidConfig(_)
            | Error::TargetOutsideInterval { .. }
            | Error::Json(_) => 2,
            Error::NonFinite => 4,
            _ => 3,
        };
        CliError { code, message: e.to_string(), payload: None }
    }
}

/// Rows of a CSV table. Infinite values are spelled `inf`.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `f64` for CSV cells: shortest round-trip form, `inf` / `-inf` spelled out.
pub fn cell(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub struct Emitted {
    pub json: Value,
    pub table: Option<Table>,
}

pub fn emit(out: &Emitted, format: Format, path: Option<&PathBuf>) -> Result<(), CliError> {
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.json).map_err(|e| CliError::numeric(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => match &out.table {
            Some(t) => t.render(),
            None => return Err(CliError::parse("this subcommand has no CSV form, use --format json")),
        },
    };
    write_text(&text, path)
}

pub fn write_text(text: &str, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::parse(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::numeric(format!("cannot write output: {e}")))
        }
    }
}
