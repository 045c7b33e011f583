//! Recording ingestion: EDF and CSV readers, montages and segmentation.

mod csv_io;
mod edf;
mod montage;
mod segment;

pub use csv_io::{read_csv, read_labels, write_csv, write_labels, LabelEntry};
pub use edf::{parse_edf, read_edf, to_edf_bytes, write_edf};
pub use montage::{apply_montage, Montage, STANDARD_ELECTRODES};
pub use segment::{segment, tile, window_len, Label, Segment};

use nalgebra::DMatrix;

use crate::{Error, Result};

/// A multichannel recording: `samples` is channels × time.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channels: Vec<String>,
    samples: DMatrix<f64>,
    rate: f64,
}

impl Recording {
    pub fn new(channels: Vec<String>, samples: DMatrix<f64>, rate: f64) -> Result<Self> {
        if channels.len() != samples.nrows() {
            return Err(Error::Data(format!(
                "{} channel labels for {} signal rows",
                channels.len(),
                samples.nrows()
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Data(format!(
                "sampling rate must be positive, got {rate}"
            )));
        }
        if samples.ncols() < 2 {
            return Err(Error::InsufficientData(format!(
                "a recording needs at least 2 samples, got {}",
                samples.ncols()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % samples.nrows(), pos / samples.nrows());
            return Err(Error::Data(format!(
                "non-finite sample in channel {} at index {col}",
                channels[row]
            )));
        }
        Ok(Recording {
            channels,
            samples,
            rate,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    /// Channels × time sample matrix.
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.rate
    }

    /// Index of a channel label, matched case-insensitively after trimming.
    pub fn channel_index(&self, label: &str) -> Option<usize> {
        let wanted = label.trim();
        self.channels
            .iter()
            .position(|c| c.trim().eq_ignore_ascii_case(wanted))
    }

    pub fn into_parts(self) -> (Vec<String>, DMatrix<f64>, f64) {
        (self.channels, self.samples, self.rate)
    }
}
