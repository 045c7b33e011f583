//! Linear re-referencing of recordings.
//!
//! A [`Montage`] is a sparse weight matrix from named input electrodes to
//! named output channels. Montages are loaded from TOML files; three are
//! bundled (`bipolar`, `average`, `cz`) over the 27-electrode layout in
//! [`STANDARD_ELECTRODES`].
//!
//! File schema, selected by `kind`:
//!
//! ```toml
//! # pairwise differences
//! name = "bipolar"
//! kind = "bipolar"
//! pairs = [["Fp1", "F7"], ["F7", "T7"]]
//!
//! # subtract the mean of all listed electrodes
//! kind = "average"
//! electrodes = ["Fp1", "Fp2", "Cz"]
//!
//! # subtract one electrode; optionally emit "<implicit>-<reference>" = -reference
//! kind = "reference"
//! electrodes = ["Fp1", "Fp2", "Cz"]
//! reference = "Cz"
//! keep_reference = false
//! implicit_reference = "Ref"
//!
//! # explicit rows
//! kind = "weights"
//! [[channels]]
//! label = "Fp1-F7"
//! weights = { Fp1 = 1.0, F7 = -1.0 }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::Recording;
use crate::{Error, Result};

/// The 27-electrode scalp layout the bundled montages are defined over.
pub const STANDARD_ELECTRODES: [&str; 27] = [
    "Fp1", "Fpz", "Fp2", "F9", "F7", "F3", "Fz", "F4", "F8", "F10", "T9", "T7", "C3", "Cz", "C4",
    "T8", "T10", "P9", "P7", "P3", "Pz", "P4", "P8", "P10", "O1", "Oz", "O2",
];

const BIPOLAR: &str = include_str!("../../montages/bipolar.toml");
const AVERAGE: &str = include_str!("../../montages/average.toml");
const CZ_REFERENCE: &str = include_str!("../../montages/cz.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    name: String,
    inputs: Vec<String>,
    /// One sparse row per output channel: (input index, weight).
    weights: Vec<Vec<(usize, f64)>>,
    out_labels: Vec<String>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum MontageFile {
    Bipolar {
        name: String,
        pairs: Vec<(String, String)>,
    },
    Average {
        name: String,
        electrodes: Vec<String>,
    },
    Reference {
        name: String,
        electrodes: Vec<String>,
        reference: String,
        #[serde(default)]
        keep_reference: bool,
        implicit_reference: Option<String>,
    },
    Weights {
        name: String,
        channels: Vec<WeightRow>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightRow {
    label: String,
    weights: BTreeMap<String, f64>,
}

/// Collects input labels in first-seen order.
#[derive(Default)]
struct Inputs(Vec<String>);

impl Inputs {
    fn index(&mut self, label: &str) -> usize {
        match self.0.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                self.0.push(label.to_string());
                self.0.len() - 1
            }
        }
    }
}

impl Montage {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<String>,
        weights: Vec<Vec<(usize, f64)>>,
        out_labels: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if weights.len() != out_labels.len() {
            return Err(Error::Config(format!(
                "montage {name}: {} weight rows for {} output labels",
                weights.len(),
                out_labels.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::Config(format!(
                "montage {name} has no output channels"
            )));
        }
        for (row, label) in weights.iter().zip(&out_labels) {
            if !row.iter().any(|&(_, w)| w != 0.0) {
                return Err(Error::Config(format!(
                    "montage {name}: output {label} has no nonzero weight"
                )));
            }
            if let Some(&(i, _)) = row.iter().find(|&&(i, _)| i >= inputs.len()) {
                return Err(Error::Config(format!(
                    "montage {name}: output {label} references input {i} of {}",
                    inputs.len()
                )));
            }
            if row.iter().any(|(_, w)| !w.is_finite()) {
                return Err(Error::Config(format!(
                    "montage {name}: output {label} has a non-finite weight"
                )));
            }
        }
        Ok(Montage {
            name,
            inputs,
            weights,
            out_labels,
        })
    }

    /// Pairwise differences `first - second`, labeled `first-second`.
    pub fn bipolar<S: AsRef<str>>(name: &str, pairs: &[(S, S)]) -> Result<Self> {
        let mut inputs = Inputs::default();
        let mut weights = Vec::new();
        let mut labels = Vec::new();
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            weights.push(vec![(inputs.index(a), 1.0), (inputs.index(b), -1.0)]);
            labels.push(format!("{a}-{b}"));
        }
        Montage::new(name, inputs.0, weights, labels)
    }

    /// Each electrode minus the mean of all electrodes.
    pub fn average<S: AsRef<str>>(name: &str, electrodes: &[S]) -> Result<Self> {
        let n = electrodes.len();
        let inputs: Vec<String> = electrodes.iter().map(|e| e.as_ref().to_string()).collect();
        let share = 1.0 / n as f64;
        let weights = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (j, if i == j { 1.0 - share } else { -share }))
                    .collect()
            })
            .collect();
        let labels = inputs.iter().map(|e| format!("{e}-avg")).collect();
        Montage::new(name, inputs, weights, labels)
    }

    /// Each electrode minus `reference`.
    ///
    /// The reference row itself is identically zero and is emitted only
    /// with `keep_reference`. With `implicit_reference = Some(r)` an extra
    /// channel `r-<reference>` carries the original recording reference
    /// expressed against the new one, i.e. `-reference`.
    pub fn reference<S: AsRef<str>>(
        name: &str,
        electrodes: &[S],
        reference: &str,
        keep_reference: bool,
        implicit_reference: Option<&str>,
    ) -> Result<Self> {
        let inputs: Vec<String> = electrodes.iter().map(|e| e.as_ref().to_string()).collect();
        let r = inputs.iter().position(|e| e == reference).ok_or_else(|| {
            Error::Config(format!(
                "montage {name}: reference {reference} is not among its electrodes"
            ))
        })?;
        let mut weights = Vec::new();
        let mut labels = Vec::new();
        for (i, e) in inputs.iter().enumerate() {
            if i == r {
                if keep_reference {
                    // zero row: represented by canceling weights
                    weights.push(vec![(i, 1.0), (r, -1.0)]);
                    labels.push(format!("{e}-{reference}"));
                }
                continue;
            }
            weights.push(vec![(i, 1.0), (r, -1.0)]);
            labels.push(format!("{e}-{reference}"));
        }
        if let Some(implicit) = implicit_reference {
            weights.push(vec![(r, -1.0)]);
            labels.push(format!("{implicit}-{reference}"));
        }
        Montage::new(name, inputs, weights, labels)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MontageFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("montage file: {e}")))?;
        match file {
            MontageFile::Bipolar { name, pairs } => Montage::bipolar(&name, &pairs),
            MontageFile::Average { name, electrodes } => Montage::average(&name, &electrodes),
            MontageFile::Reference {
                name,
                electrodes,
                reference,
                keep_reference,
                implicit_reference,
            } => Montage::reference(
                &name,
                &electrodes,
                &reference,
                keep_reference,
                implicit_reference.as_deref(),
            ),
            MontageFile::Weights { name, channels } => {
                let mut inputs = Inputs::default();
                let mut weights = Vec::new();
                let mut labels = Vec::new();
                for row in channels {
                    weights.push(
                        row.weights
                            .iter()
                            .map(|(l, &w)| (inputs.index(l), w))
                            .collect(),
                    );
                    labels.push(row.label);
                }
                Montage::new(name, inputs.0, weights, labels)
            }
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Montage::from_toml(&text)
    }

    /// Bundled montage by name: `bipolar`, `average` or `cz`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "bipolar" => BIPOLAR,
            "average" => AVERAGE,
            "cz" | "reference" => CZ_REFERENCE,
            _ => return None,
        };
        Some(Montage::from_toml(text).expect("bundled montage files are valid"))
    }

    /// Bundled montage by name, or a montage file at that path.
    pub fn resolve(spec: &str) -> Result<Self> {
        match Montage::builtin(spec) {
            Some(m) => Ok(m),
            None => Montage::from_file(spec),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn out_labels(&self) -> &[String] {
        &self.out_labels
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    /// Dense output × input weight matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.out_labels.len(), self.inputs.len());
        for (r, row) in self.weights.iter().enumerate() {
            for &(c, w) in row {
                m[(r, c)] += w;
            }
        }
        m
    }
}

/// Re-references `rec` through `mon`. Input labels are matched against the
/// recording's channels case-insensitively.
pub fn apply_montage(rec: &Recording, mon: &Montage) -> Result<Recording> {
    let index: Vec<usize> = mon
        .inputs
        .iter()
        .map(|label| {
            rec.channel_index(label).ok_or_else(|| {
                Error::Config(format!(
                    "montage {} needs channel {label}, which the recording lacks",
                    mon.name
                ))
            })
        })
        .collect::<Result<_>>()?;
    let input = rec.samples();
    let mut out = DMatrix::zeros(mon.out_labels.len(), rec.len());
    for (r, row) in mon.weights.iter().enumerate() {
        for &(c, w) in row {
            for t in 0..rec.len() {
                out[(r, t)] += w * input[(index[c], t)];
            }
        }
    }
    Recording::new(mon.out_labels.clone(), out, rec.rate())
}
