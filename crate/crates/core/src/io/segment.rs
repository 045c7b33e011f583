use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Recording;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Ied,
    Background,
    Unlabeled,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Ied => "IED",
            Label::Background => "BACKGROUND",
            Label::Unlabeled => "UNLABELED",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "IED" => Some(Label::Ied),
            "BACKGROUND" => Some(Label::Background),
            "UNLABELED" => Some(Label::Unlabeled),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One fixed-length window of a recording; `data` is channels × W.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub source_id: String,
    pub start_sample: usize,
    pub channels: Vec<String>,
    pub data: DMatrix<f64>,
    pub rate: f64,
    pub label: Label,
}

impl Segment {
    pub fn window(&self) -> usize {
        self.data.ncols()
    }

    /// `source_id:start_sample`, the key segments are stored under.
    pub fn id(&self) -> String {
        format!("{}:{}", self.source_id, self.start_sample)
    }

    pub fn to_recording(&self) -> Result<Recording> {
        Recording::new(self.channels.clone(), self.data.clone(), self.rate)
    }
}

/// Window length in samples: `round(rate * window_seconds)`.
pub fn window_len(rate: f64, window_seconds: f64) -> Result<usize> {
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(Error::Config(format!(
            "window length must be positive, got {window_seconds} s"
        )));
    }
    let w = (rate * window_seconds).round() as usize;
    if w < 2 {
        return Err(Error::Config(format!(
            "{window_seconds} s at {rate} Hz gives fewer than 2 samples"
        )));
    }
    Ok(w)
}

fn cut(rec: &Recording, source_id: &str, start: usize, w: usize, label: Label) -> Result<Segment> {
    if start + w > rec.len() {
        return Err(Error::Range {
            start_sample: start,
            message: format!(
                "window of {w} samples ends past the recording ({} samples)",
                rec.len()
            ),
        });
    }
    Ok(Segment {
        source_id: source_id.to_string(),
        start_sample: start,
        channels: rec.channels().to_vec(),
        data: rec.samples().columns(start, w).into_owned(),
        rate: rec.rate(),
        label,
    })
}

/// Cuts one segment per `(start_sample, label)` entry.
pub fn segment(
    rec: &Recording,
    source_id: &str,
    window_seconds: f64,
    labels: &[(usize, Label)],
) -> Result<Vec<Segment>> {
    let w = window_len(rec.rate(), window_seconds)?;
    labels
        .iter()
        .map(|&(start, label)| cut(rec, source_id, start, w, label))
        .collect()
}

/// Tiles the recording into `floor(T / W)` non-overlapping unlabeled windows.
pub fn tile(rec: &Recording, source_id: &str, window_seconds: f64) -> Result<Vec<Segment>> {
    let w = window_len(rec.rate(), window_seconds)?;
    (0..rec.len() / w)
        .map(|k| cut(rec, source_id, k * w, w, Label::Unlabeled))
        .collect()
}
