//! JSON and JSON Lines file formats.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so
//! every file round-trips bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassSet, ModelParams, Signal, WeakExample};

/// One dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(rename = "F")]
    pub freq_bins: usize,
    #[serde(rename = "T")]
    pub len: usize,
    pub signal: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

impl DatasetRecord {
    pub fn from_parts(id: impl Into<String>, signal: &Signal, labels: &ClassSet, cap: Option<usize>) -> Self {
        Self {
            id: id.into(),
            freq_bins: signal.freq_bins(),
            len: signal.len(),
            signal: signal.rows(),
            labels: labels.classes().to_vec(),
            cap,
        }
    }

    pub fn signal(&self) -> Result<Signal> {
        if self.signal.len() != self.freq_bins || self.signal.iter().any(|r| r.len() != self.len) {
            return Err(Error::InvalidExample {
                id: self.id.clone(),
                reason: format!("signal is not {}x{}", self.freq_bins, self.len),
            });
        }
        Signal::from_rows(&self.signal).map_err(|e| Error::InvalidExample {
            id: self.id.clone(),
            reason: e.to_string(),
        })
    }

    pub fn label_set(&self) -> Result<ClassSet> {
        ClassSet::new(self.labels.iter().copied()).map_err(|e| Error::InvalidExample {
            id: self.id.clone(),
            reason: e.to_string(),
        })
    }

    /// Builds the example, using the record's cap if present and `default_cap`
    /// otherwise.
    pub fn to_example(&self, default_cap: usize) -> Result<WeakExample> {
        WeakExample::new(
            self.id.clone(),
            self.signal()?,
            self.label_set()?,
            self.cap.unwrap_or(default_cap),
        )
    }
}

/// Model file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "C")]
    pub num_classes: usize,
    #[serde(rename = "F")]
    pub freq_bins: usize,
    #[serde(rename = "Tw")]
    pub window_len: usize,
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl From<&ModelParams> for ModelFile {
    fn from(p: &ModelParams) -> Self {
        Self {
            num_classes: p.num_classes(),
            freq_bins: p.freq_bins(),
            window_len: p.window_len(),
            w: (0..=p.num_classes()).map(|c| p.word(c).to_vec()).collect(),
            b: p.biases().to_vec(),
        }
    }
}

impl ModelFile {
    pub fn to_params(&self) -> Result<ModelParams> {
        if self.w.len() != self.num_classes + 1 {
            return Err(Error::Shape(format!(
                "model has {} words, expected {}",
                self.w.len(),
                self.num_classes + 1
            )));
        }
        ModelParams::new(
            self.num_classes,
            self.window_len,
            self.freq_bins,
            self.w.concat(),
            self.b.clone(),
        )
    }
}

/// Ground-truth instance labels for one signal, `y[t]` for `t = 0..T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub id: String,
    pub y: Vec<usize>,
}

/// Training trace sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub iteration: usize,
    pub loglik_trace: Vec<f64>,
}

/// One prediction line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    /// Argmax label for `t = 0..T`.
    pub instance_labels: Vec<usize>,
    pub union: Vec<usize>,
    pub map: Vec<usize>,
    /// Signal score for classes `1..=C`.
    pub scores: Vec<f64>,
    /// Prior probabilities of classes `1..=C` for every instance `u = 0..T'`,
    /// when requested. Row `u` is centered on `t = u - instance_offset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_probs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_offset: Option<usize>,
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    read_jsonl(path)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    read_json::<ModelFile>(path)?.to_params()
}

pub fn write_model(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    write_json(path, &ModelFile::from(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let vals = [0.1, 1.0 / 3.0, -2.2250738585072014e-308, 5e-324, 1.7976931348623157e308, 0.30000000000000004];
        let p = ModelParams::new(1, 3, 1, vals.to_vec(), vec![std::f64::consts::PI, -0.0]).unwrap();
        let s = serde_json::to_string(&ModelFile::from(&p)).unwrap();
        let back: ModelFile = serde_json::from_str(&s).unwrap();
        let q = back.to_params().unwrap();
        for (a, b) in p.words().iter().zip(q.words()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(p.biases()[0].to_bits(), q.biases()[0].to_bits());
    }

    #[test]
    fn record_without_cap_uses_default() {
        let line = r#"{"id":"a","F":1,"T":3,"signal":[[1,2,3]],"labels":[2]}"#;
        let r: DatasetRecord = serde_json::from_str(line).unwrap();
        let ex = r.to_example(4).unwrap();
        assert_eq!(ex.cap, 4);
        let bad = DatasetRecord { cap: Some(0), ..r };
        assert!(bad.to_example(4).is_err());
    }
}
