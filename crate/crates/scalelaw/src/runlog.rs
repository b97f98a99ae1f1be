//! Run logs as comma-separated text.
//!
//! The header names the [`RunRecord`] fields. Columns may come in any order;
//! `train_loss` and `dataset_tokens` may be omitted or left blank. Rows that
//! fail to parse or validate are collected in a rejection report and the rest
//! of the file is still read.

use std::io::{Read, Write};

use scalelaw_core::fit::RunRecord;

use crate::error::{CliError, Result};

pub const COLUMNS: [&str; 9] = [
    "run_id",
    "n_params",
    "n_layer",
    "batch_tokens",
    "step",
    "test_loss",
    "train_loss",
    "dataset_tokens",
    "warmup_steps",
];

const OPTIONAL: [&str; 2] = ["train_loss", "dataset_tokens"];

/// A row that was skipped, with its 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub records: Vec<RunRecord>,
    pub rejections: Vec<Rejection>,
}

/// Where each known column sits in the file.
struct Layout {
    index: [Option<usize>; COLUMNS.len()],
}

impl Layout {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let mut index = [None; COLUMNS.len()];
        for (pos, name) in header.iter().enumerate() {
            let name = name.trim();
            let Some(slot) = COLUMNS.iter().position(|c| *c == name) else {
                return Err(CliError::new("unknown_column", format!("unknown run-log column `{name}`")));
            };
            if index[slot].replace(pos).is_some() {
                return Err(CliError::new("duplicate_column", format!("run-log column `{name}` appears twice")));
            }
        }
        let missing: Vec<&str> = COLUMNS
            .iter()
            .zip(&index)
            .filter(|(name, i)| i.is_none() && !OPTIONAL.contains(name))
            .map(|(name, _)| *name)
            .collect();
        if !missing.is_empty() {
            return Err(CliError::new(
                "missing_column",
                format!("run log lacks mandatory column(s): {}", missing.join(", ")),
            ));
        }
        Ok(Self { index })
    }

    fn field<'r>(&self, row: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        let slot = COLUMNS.iter().position(|c| *c == name)?;
        self.index[slot].and_then(|i| row.get(i)).map(str::trim)
    }

    fn parse_row(&self, row: &csv::StringRecord) -> std::result::Result<RunRecord, String> {
        fn required<'r>(value: Option<&'r str>, name: &str) -> std::result::Result<&'r str, String> {
            match value {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(format!("{name} is empty")),
            }
        }
        fn float(value: &str, name: &str) -> std::result::Result<f64, String> {
            value.parse().map_err(|_| format!("{name} `{value}` is not a number"))
        }
        fn integer<T: std::str::FromStr>(value: &str, name: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("{name} `{value}` is not a non-negative integer"))
        }
        let optional = |name: &str| -> std::result::Result<Option<f64>, String> {
            match self.field(row, name) {
                None | Some("") => Ok(None),
                Some(v) => float(v, name).map(Some),
            }
        };

        let record = RunRecord {
            run_id: required(self.field(row, "run_id"), "run_id")?.to_string(),
            n_params: float(required(self.field(row, "n_params"), "n_params")?, "n_params")?,
            n_layer: integer(required(self.field(row, "n_layer"), "n_layer")?, "n_layer")?,
            batch_tokens: float(required(self.field(row, "batch_tokens"), "batch_tokens")?, "batch_tokens")?,
            step: integer(required(self.field(row, "step"), "step")?, "step")?,
            test_loss: float(required(self.field(row, "test_loss"), "test_loss")?, "test_loss")?,
            train_loss: optional("train_loss")?,
            dataset_tokens: optional("dataset_tokens")?,
            warmup_steps: integer(required(self.field(row, "warmup_steps"), "warmup_steps")?, "warmup_steps")?,
        };
        record.validate().map_err(|e| match e {
            scalelaw_core::Error::Degenerate(msg) => msg,
            other => other.to_string(),
        })?;
        Ok(record)
    }
}

/// Reads a run log. An empty input, or a header with no rows, gives an empty
/// list. A header that lacks a mandatory column is an error.
pub fn read_runs(input: impl Read) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Ingested::default()),
        Some(header) => header?,
    };
    let layout = Layout::from_header(&header)?;
    let width = header.len();

    let mut out = Ingested::default();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != width {
            out.rejections.push(Rejection {
                line,
                reason: format!("expected {width} fields, found {}", row.len()),
            });
            continue;
        }
        match layout.parse_row(&row) {
            Ok(record) => out.records.push(record),
            Err(reason) => out.rejections.push(Rejection { line, reason }),
        }
    }
    Ok(out)
}

/// Writes records with every column, floats in shortest round-trip form.
pub fn write_runs(output: impl Write, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(COLUMNS)?;
    for r in records {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writer.write_record([
            r.run_id.clone(),
            r.n_params.to_string(),
            r.n_layer.to_string(),
            r.batch_tokens.to_string(),
            r.step.to_string(),
            r.test_loss.to_string(),
            opt(r.train_loss),
            opt(r.dataset_tokens),
            r.warmup_steps.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "run_id,n_params,n_layer,batch_tokens,step,test_loss,train_loss,dataset_tokens,warmup_steps\n";

    #[test]
    fn empty_inputs() {
        assert_eq!(read_runs("".as_bytes()).unwrap(), Ingested::default());
        assert_eq!(read_runs(HEADER.as_bytes()).unwrap(), Ingested::default());
    }

    #[test]
    fn bad_rows_are_reported_not_fatal() {
        let text = format!(
            "{HEADER}a,1e6,2,512,10,4.5,,,0\na,1e6,2,512,20,-4.5,,,0\na,1e6,2,512,30,x,,,0\na,1e6\n"
        );
        let got = read_runs(text.as_bytes()).unwrap();
        assert_eq!(got.records.len(), 1);
        let lines: Vec<u64> = got.rejections.iter().map(|r| r.line).collect();
        assert_eq!(lines, [3, 4, 5]);
        assert!(got.rejections[0].reason.contains("test_loss"));
    }

    #[test]
    fn optional_columns_may_be_absent_and_order_is_free() {
        let text = "step,run_id,test_loss,n_params,n_layer,batch_tokens,warmup_steps\n5,r,3.25,2.5e7,4,1024,0\n";
        let got = read_runs(text.as_bytes()).unwrap();
        assert_eq!(got.records[0].step, 5);
        assert_eq!(got.records[0].n_params, 2.5e7);
        assert_eq!(got.records[0].dataset_tokens, None);
    }

    #[test]
    fn header_problems_are_errors() {
        assert_eq!(read_runs("run_id,step\n".as_bytes()).unwrap_err().code, "missing_column");
        let text = HEADER.replace("warmup_steps", "warmup");
        assert_eq!(read_runs(text.as_bytes()).unwrap_err().code, "unknown_column");
    }
}
