use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Db;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Sum of the per-iteration losses.
    pub loss: f64,
    pub lr: f64,
    pub start_tl: u32,
    pub iter_losses: Vec<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub step: u64,
    pub tl: u32,
    pub iter: usize,
    pub psnr: Db,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Step(StepRecord),
    Validation(ValidationRecord),
}

/// Append-only training history, optionally mirrored to an NDJSON file.
#[derive(Debug, Default)]
pub struct TrainLog {
    records: Vec<LogRecord>,
    sink: Option<BufWriter<File>>,
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mirrors every future record to `path`, appending to existing content.
    pub fn with_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { records: Vec::new(), sink: Some(BufWriter::new(file)) })
    }

    pub fn push(&mut self, record: LogRecord) -> Result<()> {
        if let Some(sink) = &mut self.sink {
            serde_json::to_writer(&mut *sink, &record)?;
            sink.write_all(b"\n").and_then(|_| sink.flush()).map_err(|e| Error::io("train log", e))?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Step(s) => Some(s),
            LogRecord::Validation(_) => None,
        })
    }

    pub fn validations(&self) -> impl Iterator<Item = &ValidationRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Validation(v) => Some(v),
            LogRecord::Step(_) => None,
        })
    }

    pub fn to_ndjson(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_ndjson(text: &str) -> Result<Vec<LogRecord>> {
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
    }
}
