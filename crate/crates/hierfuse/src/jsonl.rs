//! JSON-lines dataset files.
//!
//! Each file starts with a header record `{"d_t", "d_a", "d_v", "spec"}`
//! followed by one sample per line:
//! `{"id", "text", "audio", "visual", "labels": {"sentiment", "class7", "class2", "emotion"}}`.
//! A split directory holds `train.jsonl`, `val.jsonl` and `test.jsonl`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hierfuse_core::dataset::{DatasetHeader, DatasetSplit, LabelBundle, MultimodalSample};
use hierfuse_core::model::ModalityInputs;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "val.jsonl", "test.jsonl"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    id: String,
    text: Vec<f64>,
    audio: Vec<f64>,
    visual: Vec<f64>,
    labels: LabelBundle,
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Writes one file: header line, then one line per sample.
pub fn write_jsonl(path: &Path, header: &DatasetHeader, samples: &[MultimodalSample]) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, header).map_err(Error::json(path))?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    for s in samples {
        let row = Row {
            id: s.id.clone(),
            text: s.inputs.text.clone(),
            audio: s.inputs.audio.clone(),
            visual: s.inputs.visual.clone(),
            labels: s.labels,
        };
        serde_json::to_writer(&mut w, &row).map_err(Error::json(path))?;
        w.write_all(b"\n").map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Reads one file, rejecting malformed rows with their line number.
pub fn read_jsonl(path: &Path) -> Result<(DatasetHeader, Vec<MultimodalSample>)> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: DatasetHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(Error::io(path))?;
            serde_json::from_str(&line).map_err(|e| format_err(path, 1, format!("bad header: {e}")))?
        }
        None => return Err(format_err(path, 1, "missing header line")),
    };
    let mut samples = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| format_err(path, lineno, e.to_string()))?;
        let sample = MultimodalSample {
            id: row.id,
            inputs: ModalityInputs::new(row.text, row.audio, row.visual),
            labels: row.labels,
        };
        header
            .check_sample(&sample)
            .map_err(|e| format_err(path, lineno, format!("sample {}: {e}", sample.id)))?;
        if !sample.labels.is_consistent() {
            return Err(format_err(path, lineno, format!("sample {}: inconsistent labels", sample.id)));
        }
        samples.push(sample);
    }
    Ok((header, samples))
}

pub fn split_paths(dir: &Path) -> [PathBuf; 3] {
    SPLIT_FILES.map(|f| dir.join(f))
}

/// Writes `train.jsonl`, `val.jsonl` and `test.jsonl` into `dir`.
pub fn save_split(split: &DatasetSplit, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let [train, val, test] = split_paths(dir);
    write_jsonl(&train, &split.header, &split.train)?;
    write_jsonl(&val, &split.header, &split.val)?;
    write_jsonl(&test, &split.header, &split.test)
}

/// Loads the three split files of `dir`; headers must agree and the
/// validation split must be non-empty.
pub fn load_split(dir: &Path) -> Result<DatasetSplit> {
    let [train, val, test] = split_paths(dir);
    let (header, train_samples) = read_jsonl(&train)?;
    let mut parts = Vec::new();
    for path in [&val, &test] {
        let (h, s) = read_jsonl(path)?;
        if h != header {
            return Err(format_err(path, 1, "header differs from train.jsonl"));
        }
        parts.push(s);
    }
    let test_samples = parts.pop().unwrap_or_default();
    let val_samples = parts.pop().unwrap_or_default();
    if val_samples.is_empty() {
        return Err(format_err(&val, 1, "validation split is empty"));
    }
    let split = DatasetSplit { header, train: train_samples, val: val_samples, test: test_samples };
    split.validate()?;
    Ok(split)
}
