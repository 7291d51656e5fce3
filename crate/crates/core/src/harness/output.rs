use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One solver run of a sweep. `accuracy` and `objective` are empty on
/// failed rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub objective: Option<f64>,
    /// `objective / brute-force optimum`, for instances with `n ≤ 10`.
    pub oracle_ratio: Option<f64>,
    pub wall_ms: f64,
    pub iters: usize,
}

pub const CSV_HEADER: &str = "method,sweep_var,sweep_value,seed,accuracy,objective,oracle_ratio,wall_ms,iters";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(crate::error::Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Incremental writer: the header (or opening bracket) goes out on
/// creation, records as they are appended.
pub(crate) struct RecordSink {
    out: BufWriter<File>,
    format: OutputFormat,
    written: usize,
}

impl RecordSink {
    pub(crate) fn create(path: &Path, format: OutputFormat) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        match format {
            OutputFormat::Csv => writeln!(out, "{CSV_HEADER}")?,
            OutputFormat::Json => write!(out, "[")?,
        }
        Ok(Self { out, format, written: 0 })
    }

    pub(crate) fn append(&mut self, records: &[ResultRecord]) -> Result<()> {
        for r in records {
            match self.format {
                OutputFormat::Csv => {
                    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                    w.serialize(r)?;
                    let line = w.into_inner().map_err(|e| e.into_error())?;
                    self.out.write_all(&line)?;
                }
                OutputFormat::Json => {
                    if self.written > 0 {
                        write!(self.out, ",")?;
                    }
                    write!(self.out, "\n  ")?;
                    serde_json::to_writer(&mut self.out, r)?;
                }
            }
            self.written += 1;
        }
        self.out.flush()?;
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        if self.format == OutputFormat::Json {
            writeln!(self.out, "{}]", if self.written > 0 { "\n" } else { "" })?;
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Writes all records at once in the chosen format.
pub fn emit_results(records: &[ResultRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let mut sink = RecordSink::create(path, format)?;
    sink.append(records)?;
    sink.finish()
}

/// Reads a CSV written by [`emit_results`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Reads a JSON array written by [`emit_results`].
pub fn read_json(path: &Path) -> Result<Vec<ResultRecord>> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, failed: bool) -> ResultRecord {
        ResultRecord {
            method: "dpgm".into(),
            sweep_var: "sigma".into(),
            sweep_value: 0.5,
            seed,
            accuracy: (!failed).then_some(0.75),
            objective: (!failed).then_some(123.456),
            oracle_ratio: None,
            wall_ms: 1.5,
            iters: 17,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_results(&[], &path, OutputFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_has_one_row_per_record_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records: Vec<_> = (0..5).map(|s| record(s, s == 3)).collect();
        emit_results(&records, &path, OutputFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_csv(&path).unwrap(), records);
    }

    #[test]
    fn json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let records: Vec<_> = (0..3).map(|s| record(s, s == 1)).collect();
        emit_results(&records, &path, OutputFormat::Json).unwrap();
        assert_eq!(read_json(&path).unwrap(), records);
        let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let fields: Vec<&str> = value[0].as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected: Vec<&str> = CSV_HEADER.split(',').collect();
        expected.sort_unstable();
        let mut fields = fields;
        fields.sort_unstable();
        assert_eq!(fields, expected);

        emit_results(&[], &path, OutputFormat::Json).unwrap();
        assert!(read_json(&path).unwrap().is_empty());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = emit_results(&[], Path::new("/nonexistent-dir/x.csv"), OutputFormat::Csv).unwrap_err();
        assert!(matches!(err, crate::error::Error::Io(_)));
    }
}
