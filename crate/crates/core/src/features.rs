//! The 40-value topological feature vector.
//!
//! For each dimension k ∈ {0, 1}, twenty values in this order:
//!
//! | # | name | value |
//! |---|------|-------|
//! | 0 | `hk_count` | number of finite pairs |
//! | 1 | `hk_life_mean` | mean lifetime d − b |
//! | 2 | `hk_life_std` | population std of lifetimes |
//! | 3 | `hk_life_max` | max lifetime |
//! | 4 | `hk_life_sum` | sum of lifetimes |
//! | 5 | `hk_life_entropy` | −Σ pᵢ ln pᵢ, pᵢ = lifetimeᵢ / Σ lifetimes |
//! | 6 | `hk_birth_mean` | mean birth |
//! | 7 | `hk_death_mean` | mean death |
//! | 8 | `hk_death_max` | max death |
//! | 9 | `hk_mid_mean` | mean of (b + d) / 2 |
//! | 10 | `hk_poly_b_life` | Σ b (d − b) |
//! | 11 | `hk_poly_dmax_life` | Σ (d_max − d)(d − b) |
//! | 12 | `hk_poly_b2_life4` | Σ b² (d − b)⁴ |
//! | 13 | `hk_poly_dmax2_life4` | Σ (d_max − d)² (d − b)⁴ |
//! | 14–17 | `hk_{l1,l2,sup,argmax}_lambda1` | norms of λ₁ |
//! | 18–19 | `hk_{l1,sup}_lambda2` | norms of λ₂ |
//!
//! `d_max` is the largest finite death of the dimension. Only finite pairs
//! count; a dimension without any is all zeros.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::homology::PersistenceDiagram;
use crate::io::Label;
use crate::landscape::{build_landscape, landscape_norms, PersistenceLandscape, DEFAULT_LEVELS};
use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 40;
pub const FEATURE_SCHEMA_VERSION: u32 = 1;
const PER_DIM: usize = 20;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "h0_count",
    "h0_life_mean",
    "h0_life_std",
    "h0_life_max",
    "h0_life_sum",
    "h0_life_entropy",
    "h0_birth_mean",
    "h0_death_mean",
    "h0_death_max",
    "h0_mid_mean",
    "h0_poly_b_life",
    "h0_poly_dmax_life",
    "h0_poly_b2_life4",
    "h0_poly_dmax2_life4",
    "h0_l1_lambda1",
    "h0_l2_lambda1",
    "h0_sup_lambda1",
    "h0_argmax_lambda1",
    "h0_l1_lambda2",
    "h0_sup_lambda2",
    "h1_count",
    "h1_life_mean",
    "h1_life_std",
    "h1_life_max",
    "h1_life_sum",
    "h1_life_entropy",
    "h1_birth_mean",
    "h1_death_mean",
    "h1_death_max",
    "h1_mid_mean",
    "h1_poly_b_life",
    "h1_poly_dmax_life",
    "h1_poly_b2_life4",
    "h1_poly_dmax2_life4",
    "h1_l1_lambda1",
    "h1_l2_lambda1",
    "h1_sup_lambda1",
    "h1_argmax_lambda1",
    "h1_l1_lambda2",
    "h1_sup_lambda2",
];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentRef {
    pub source_id: String,
    pub start_sample: usize,
}

impl std::fmt::Display for SegmentRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.source_id, self.start_sample)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub segment: Option<SegmentRef>,
    pub label: Label,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

fn dimension_block(
    diagram: &PersistenceDiagram,
    dim: u8,
    ls: &PersistenceLandscape,
) -> [f64; PER_DIM] {
    let mut out = [0.0; PER_DIM];
    let pairs: Vec<(f64, f64)> = diagram
        .in_dim(dim)
        .filter(|p| p.is_finite())
        .map(|p| (p.birth, p.death))
        .collect();
    if pairs.is_empty() {
        return out;
    }
    let n = pairs.len() as f64;
    let lives: Vec<f64> = pairs.iter().map(|&(b, d)| d - b).collect();
    let life_sum: f64 = lives.iter().sum();
    let life_mean = life_sum / n;
    let life_var = lives.iter().map(|l| (l - life_mean).powi(2)).sum::<f64>() / n;
    let entropy = if life_sum > 0.0 {
        -lives
            .iter()
            .map(|&l| l / life_sum)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    } else {
        0.0
    };
    let d_max = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    out[0] = n;
    out[1] = life_mean;
    out[2] = life_var.sqrt();
    out[3] = lives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out[4] = life_sum;
    out[5] = entropy.max(0.0);
    out[6] = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    out[7] = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    out[8] = d_max;
    out[9] = pairs.iter().map(|&(b, d)| 0.5 * (b + d)).sum::<f64>() / n;
    for (&(b, d), &l) in pairs.iter().zip(&lives) {
        let slack = d_max - d;
        out[10] += b * l;
        out[11] += slack * l;
        out[12] += b * b * l.powi(4);
        out[13] += slack * slack * l.powi(4);
    }
    let l1 = landscape_norms(ls, 1);
    let l2 = landscape_norms(ls, 2);
    out[14] = l1.l1;
    out[15] = l1.l2;
    out[16] = l1.sup;
    out[17] = l1.argmax;
    out[18] = l2.l1;
    out[19] = l2.sup;
    out
}

/// `landscapes[k]` must be the dimension-k landscape of `diagram`.
pub fn extract_features(
    diagram: &PersistenceDiagram,
    landscapes: &[PersistenceLandscape; 2],
) -> FeatureVector {
    let mut values = [0.0; FEATURE_COUNT];
    for dim in 0..2u8 {
        let block = dimension_block(diagram, dim, &landscapes[dim as usize]);
        let at = dim as usize * PER_DIM;
        values[at..at + PER_DIM].copy_from_slice(&block);
    }
    FeatureVector {
        values,
        segment: None,
        label: Label::Unlabeled,
    }
}

/// Builds both landscapes with the default level count, then extracts.
pub fn features_from_diagram(diagram: &PersistenceDiagram) -> FeatureVector {
    let landscapes = [
        build_landscape(diagram, 0, DEFAULT_LEVELS),
        build_landscape(diagram, 1, DEFAULT_LEVELS),
    ];
    extract_features(diagram, &landscapes)
}

/// Rows of labeled feature vectors, stored as CSV with columns
/// `source_id,start_sample,label` followed by the feature names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// S × 40.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), FEATURE_COUNT, |r, c| {
            self.rows[r].values[c]
        })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source_id,start_sample,label");
        for name in FEATURE_NAMES {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            let (id, start) = match &row.segment {
                Some(s) => (s.source_id.as_str(), s.start_sample.to_string()),
                None => ("", String::new()),
            };
            let _ = write!(out, "{id},{start},{}", row.label);
            for v in row.values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse("row 1", e.to_string()))?
            .clone();
        let expected: Vec<&str> = ["source_id", "start_sample", "label"]
            .into_iter()
            .chain(FEATURE_NAMES)
            .collect();
        if header.iter().ne(expected.iter().copied()) {
            return Err(Error::Data(format!(
                "feature header does not match schema version {FEATURE_SCHEMA_VERSION}"
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::parse(format!("row {row}"), e.to_string()))?;
            let segment = match (&record[0], &record[1]) {
                ("", "") => None,
                (id, start) => Some(SegmentRef {
                    source_id: id.to_string(),
                    start_sample: start.parse().map_err(|_| {
                        Error::parse(format!("row {row}, column 2"), "bad start_sample")
                    })?,
                }),
            };
            let label = Label::parse(&record[2])
                .ok_or_else(|| Error::parse(format!("row {row}, column 3"), "unknown label"))?;
            let mut values = [0.0; FEATURE_COUNT];
            for (c, v) in values.iter_mut().enumerate() {
                *v = record[c + 3].parse().map_err(|_| {
                    Error::parse(format!("row {row}, column {}", c + 4), "not a number")
                })?;
            }
            rows.push(FeatureVector {
                values,
                segment,
                label,
            });
        }
        Ok(FeatureMatrix { rows })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
