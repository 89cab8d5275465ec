//! Result rows, mask files and embedding files.

use std::fs::{self, File, OpenOptions};
use std::path::Path;

use anyhow::Result;
use manimask_core::io::{fmt_f64, matrix_to_csv};
use manimask_core::{Embedding, Error as CoreError, EvalReport, Mask};
use serde::Serialize;

pub const RESULTS_HEADER: [&str; 10] = [
    "dataset", "algorithm", "m", "k", "l", "metric", "value", "trials", "stddev", "seed",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoreError + '_ {
    move |e| CoreError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(())
}

/// The single appender for a results CSV. Every row is flushed as it is
/// written so a later failure leaves the finished cells on disk.
pub struct ResultsWriter {
    inner: csv::Writer<File>,
}

impl ResultsWriter {
    pub fn open(path: &Path, append: bool) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        let fresh = !append || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = if append {
            OpenOptions::new().create(true).append(true).open(path)
        } else {
            File::create(path)
        }
        .map_err(io_err(path))?;
        let mut inner = csv::Writer::from_writer(file);
        if fresh {
            inner.write_record(RESULTS_HEADER)?;
            inner.flush().map_err(io_err(path))?;
        }
        Ok(Self { inner })
    }

    pub fn row(&mut self, r: &EvalReport) -> Result<()> {
        self.inner.write_record([
            r.dataset.clone(),
            r.algorithm.clone(),
            r.m.to_string(),
            r.k.to_string(),
            r.l.to_string(),
            r.metric.name().to_string(),
            fmt_f64(r.value),
            r.trials.to_string(),
            fmt_f64(r.stddev),
            r.seed.to_string(),
        ])?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_mask(dir: &Path, mask: &Mask, image_shape: Option<(usize, usize)>) -> Result<()> {
    ensure_dir(dir)?;
    let json = dir.join(format!("mask_{}.json", mask.len()));
    fs::write(&json, mask.to_json() + "\n").map_err(io_err(&json))?;
    if let Some((h, w)) = image_shape {
        let pgm = dir.join(format!("mask_{}.pgm", mask.len()));
        fs::write(&pgm, mask.to_pgm(h, w)?).map_err(io_err(&pgm))?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct EmbeddingInfo<'a> {
    pub dataset: &'a str,
    pub algorithm: &'a str,
    pub learner: &'a str,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub n: usize,
    /// Rows of the CSV as indices into the input dataset.
    pub points: &'a [usize],
    pub eigenvalues: &'a [f64],
    pub warnings: &'a [String],
}

/// Writes `<stem>.csv` (one row per point) and `<stem>.json` (metadata).
pub fn write_embedding(dir: &Path, stem: &str, y: &Embedding, info: &EmbeddingInfo) -> Result<()> {
    ensure_dir(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, matrix_to_csv(y.coords())).map_err(io_err(&csv_path))?;
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(info)? + "\n").map_err(io_err(&json_path))?;
    Ok(())
}
