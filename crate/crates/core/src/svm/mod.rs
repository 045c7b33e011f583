//! Support vector classification of feature vectors.
//!
//! IED is the positive class. Features are z-scored with a scaler fitted on
//! the training rows; the model carries its scaler and applies it to raw
//! inputs.

mod cv;
mod smo;

pub use cv::{
    cross_validate, default_grid, scale_gamma, stratified_folds, stratified_split, CellResult,
    CvResult, GridCell,
};

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::io::Label;
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "eegtopo-svm";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }

    /// Symmetric kernel matrix between the rows of `x`.
    pub fn matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let s = x.nrows();
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let mut k = DMatrix::zeros(s, s);
        for i in 0..s {
            for j in 0..=i {
                let v = self.eval(&rows[i], &rows[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations, zeros replaced by 1.
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.means[c]) / self.stds[c]
        })
    }

    fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| (v - self.means[c]) / self.stds[c])
            .collect()
    }
}

pub fn fit_scaler(x: &DMatrix<f64>) -> Result<Scaler> {
    let s = x.nrows();
    if s < 2 {
        return Err(Error::InsufficientData(format!(
            "scaler needs at least 2 samples, got {s}"
        )));
    }
    let mut means = Vec::with_capacity(x.ncols());
    let mut stds = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let mean = col.sum() / s as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s as f64;
        let std = var.sqrt();
        means.push(mean);
        stds.push(if std > 0.0 && std.is_finite() {
            std
        } else {
            1.0
        });
    }
    Ok(Scaler { means, stds })
}

pub fn apply_scaler(scaler: &Scaler, x: &DMatrix<f64>) -> DMatrix<f64> {
    scaler.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// KKT tolerance on the maximal violation.
    pub tol: f64,
    /// Iteration cap is `max_passes` times the sample count.
    pub max_passes: usize,
    /// Drives tie-breaking in working-pair selection.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            tol: 1e-3,
            max_passes: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub format: String,
    pub version: u32,
    pub feature_schema: u32,
    pub feature_count: usize,
    pub kernel: Kernel,
    pub c: f64,
    pub scaler: Scaler,
    /// Scaled support vectors, one per row.
    pub support_vectors: Vec<Vec<f64>>,
    /// αᵢ yᵢ per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub kkt_gap: f64,
    /// Hash of the configuration that produced the model, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub(crate) fn sign_labels(y: &[Label]) -> Result<Vec<f64>> {
    y.iter()
        .map(|l| match l {
            Label::Ied => Ok(1.0),
            Label::Background => Ok(-1.0),
            Label::Unlabeled => Err(Error::Config("unlabeled sample in labeled set".into())),
        })
        .collect()
}

/// Trains on rows already scaled by `scaler`.
fn train_scaled(
    scaled: &DMatrix<f64>,
    signs: &[f64],
    kernel_matrix: &DMatrix<f64>,
    kernel: Kernel,
    c: f64,
    scaler: Scaler,
    opts: &TrainOptions,
) -> SvmModel {
    let s = signs.len();
    let sol = smo::solve(
        kernel_matrix,
        signs,
        c,
        opts.tol,
        opts.max_passes.saturating_mul(s.max(1)),
        opts.seed,
    );
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..s {
        if sol.alpha[t] > 0.0 {
            support_vectors.push(scaled.row(t).iter().copied().collect());
            dual_coef.push(sol.alpha[t] * signs[t]);
        }
    }
    SvmModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        feature_schema: crate::features::FEATURE_SCHEMA_VERSION,
        feature_count: scaled.ncols(),
        kernel,
        c,
        scaler,
        support_vectors,
        dual_coef,
        bias: -sol.rho,
        converged: sol.converged,
        iterations: sol.iterations,
        kkt_gap: sol.gap,
        config_hash: None,
    }
}

fn check_training_set(x: &DMatrix<f64>, y: &[Label], c: f64) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::Config(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    let signs = sign_labels(y)?;
    if !(signs.contains(&1.0) && signs.contains(&-1.0)) {
        return Err(Error::Config(
            "training data must contain both classes".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    Ok(signs)
}

pub fn train_svc(
    x: &DMatrix<f64>,
    y: &[Label],
    kernel: Kernel,
    c: f64,
    opts: &TrainOptions,
) -> Result<SvmModel> {
    let signs = check_training_set(x, y, c)?;
    if let Kernel::Rbf { gamma } = kernel {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!(
                "RBF gamma must be positive, got {gamma}"
            )));
        }
    }
    let scaler = fit_scaler(x)?;
    let scaled = scaler.apply(x);
    let k = kernel.matrix(&scaled);
    Ok(train_scaled(&scaled, &signs, &k, kernel, c, scaler, opts))
}

impl SvmModel {
    pub fn decision(&self, raw: &[f64]) -> f64 {
        let z = self.scaler.apply_row(raw);
        let mut f = 0.0;
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coef) {
            f += coef * self.kernel.eval(sv, &z);
        }
        f + self.bias
    }

    pub fn predict_row(&self, raw: &[f64]) -> Label {
        if self.decision(raw) > 0.0 {
            Label::Ied
        } else {
            Label::Background
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<Label>> {
        self.check_width(x.ncols())?;
        Ok(x.row_iter()
            .map(|r| {
                let row: Vec<f64> = r.iter().copied().collect();
                self.predict_row(&row)
            })
            .collect())
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.feature_count {
            return Err(Error::Data(format!(
                "model expects {} features, got {cols}",
                self.feature_count
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Parses a model and checks its format tag, version and width.
    pub fn from_json(text: &str, expected_features: usize) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::Unsupported(format!(
                "model format {} v{}",
                model.format, model.version
            )));
        }
        if model.feature_count != expected_features {
            return Err(Error::Data(format!(
                "model has {} features, expected {expected_features}",
                model.feature_count
            )));
        }
        let width_ok = model.scaler.means.len() == model.feature_count
            && model.scaler.stds.len() == model.feature_count
            && model
                .support_vectors
                .iter()
                .all(|sv| sv.len() == model.feature_count)
            && model.support_vectors.len() == model.dual_coef.len();
        if !width_ok {
            return Err(Error::Data(
                "model arrays disagree with its feature count".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, expected_features: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, expected_features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Rows are actual [BACKGROUND, IED], columns predicted.
    pub confusion: [[usize; 2]; 2],
    pub total: usize,
    /// Filled for cross-validation summaries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_accuracies: Vec<f64>,
}

impl EvalReport {
    pub fn from_predictions(actual: &[Label], predicted: &[Label]) -> Result<Self> {
        if actual.is_empty() {
            return Err(Error::InsufficientData("nothing to evaluate".into()));
        }
        let idx = |l: &Label| -> Result<usize> {
            match l {
                Label::Background => Ok(0),
                Label::Ied => Ok(1),
                Label::Unlabeled => Err(Error::Config("unlabeled sample in evaluation set".into())),
            }
        };
        let mut confusion = [[0usize; 2]; 2];
        for (a, p) in actual.iter().zip(predicted) {
            confusion[idx(a)?][idx(p)?] += 1;
        }
        let total = actual.len();
        Ok(EvalReport {
            accuracy: (confusion[0][0] + confusion[1][1]) as f64 / total as f64,
            confusion,
            total,
            fold_accuracies: Vec::new(),
        })
    }

    pub fn summary(&self) -> String {
        let c = &self.confusion;
        format!(
            "accuracy {:.4} ({} of {})\n                 pred BACKGROUND  pred IED\nBACKGROUND       {:>15}  {:>8}\nIED              {:>15}  {:>8}\n",
            self.accuracy,
            c[0][0] + c[1][1],
            self.total,
            c[0][0],
            c[0][1],
            c[1][0],
            c[1][1]
        )
    }
}

pub fn evaluate(model: &SvmModel, x: &DMatrix<f64>, y: &[Label]) -> Result<EvalReport> {
    if x.nrows() != y.len() {
        return Err(Error::Config(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let predicted = model.predict(x)?;
    EvalReport::from_predictions(y, &predicted)
}
