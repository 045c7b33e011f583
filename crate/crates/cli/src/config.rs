//! Pipeline configuration.
//!
//! Values come from, in increasing precedence: built-in defaults, the TOML
//! config file, the `EEGTOPO_OUT` environment variable (output directory
//! only) and command line overrides (`--set key=value` and the dedicated
//! flags). `eegtopo --print-config` echoes the resolved result, which is a
//! valid config file itself.

use std::path::Path;

use eegtopo::dimred::Method;
use eegtopo::features::FEATURE_SCHEMA_VERSION;
use eegtopo::pipeline::{ReduceOptions, TopoOptions};
use eegtopo::svm::{scale_gamma, GridCell, Kernel, TrainOptions};
use eegtopo::synth::CorpusSpec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUT_ENV: &str = "EEGTOPO_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Recordings or directories of recordings. `.edf` files are read as
    /// EDF, everything else as CSV. Empty: `run-all` ingests the synthetic
    /// corpus.
    pub inputs: Vec<String>,
    /// Label file (`source_id,start_sample,label`). Empty: every recording
    /// is tiled into unlabeled windows.
    pub labels: String,
    /// Sampling rate of CSV inputs, Hz.
    pub input_rate: f64,
    /// Bundled montage (`bipolar`, `average`, `cz`), a montage file, or
    /// `none` to keep the recorded channels.
    pub montage: String,
    pub window_seconds: f64,
    pub feature_schema_version: u32,
    pub seed: u64,
    pub output: String,
    /// Worker threads; 0 uses one per logical CPU.
    pub workers: usize,
    pub reduce: ReduceConfig,
    pub topo: TopoConfig,
    pub svm: SvmConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceConfig {
    pub method: Method,
    pub n: usize,
    /// Linear components of the DyCA model.
    pub m: usize,
    /// DyCA eigenvalue cutoff that must select exactly `m` components; 0
    /// disables the check.
    pub eig_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoConfig {
    /// Longest Rips edge; `inf` uses the full diameter.
    pub max_length: f64,
    /// Landscape levels written per dimension. Features always use the
    /// first two.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: Vec<f64>,
    /// `linear`, `rbf:<gamma>` or `rbf:scale` (γ = 1 / (d · mean scaled
    /// variance) of the training rows).
    pub kernels: Vec<String>,
    pub folds: usize,
    pub eval_fraction: f64,
    pub tol: f64,
    pub max_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub positives: usize,
    pub negatives: usize,
    pub rate: f64,
    pub seconds: f64,
    pub channels: usize,
    pub time_scale: f64,
    pub snr_db: f64,
    pub smoothing: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Vec::new(),
            labels: String::new(),
            input_rate: 128.0,
            montage: "average".into(),
            window_seconds: 1.0,
            feature_schema_version: FEATURE_SCHEMA_VERSION,
            seed: 42,
            output: "eegtopo-out".into(),
            workers: 0,
            reduce: ReduceConfig::default(),
            topo: TopoConfig::default(),
            svm: SvmConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig {
            method: Method::Dyca,
            n: 3,
            m: 2,
            eig_threshold: 0.0,
        }
    }
}

impl Default for TopoConfig {
    fn default() -> Self {
        TopoConfig {
            max_length: f64::INFINITY,
            levels: eegtopo::landscape::DEFAULT_LEVELS,
        }
    }
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: vec![0.1, 1.0, 10.0, 100.0],
            kernels: ["linear", "rbf:scale", "rbf:0.01", "rbf:0.1"]
                .map(String::from)
                .to_vec(),
            folds: 5,
            eval_fraction: 0.15,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        let c = CorpusSpec::default();
        SynthConfig {
            positives: 550,
            negatives: 550,
            rate: c.rate,
            seconds: c.seconds,
            channels: c.channels,
            time_scale: c.time_scale,
            snr_db: c.snr_db,
            smoothing: c.smoothing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum KernelSpec {
    Linear,
    RbfScale,
    Rbf(f64),
}

fn parse_kernel(text: &str) -> CliResult<KernelSpec> {
    match text {
        "linear" => Ok(KernelSpec::Linear),
        "rbf:scale" | "rbf" => Ok(KernelSpec::RbfScale),
        _ => text
            .strip_prefix("rbf:")
            .and_then(|g| g.parse::<f64>().ok())
            .filter(|g| *g > 0.0 && g.is_finite())
            .map(KernelSpec::Rbf)
            .ok_or_else(|| {
                CliError::config(format!(
                    "svm.kernels: {text:?} is not linear, rbf:scale or rbf:<positive gamma>"
                ))
            }),
    }
}

impl PipelineConfig {
    /// Reads the optional config file and applies the environment and
    /// `key=value` overrides, then validates.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        if let Ok(out) = std::env::var(OUT_ENV) {
            if !out.is_empty() {
                table.insert("output".into(), toml::Value::String(out));
            }
        }
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::config(msg));
        if !(self.input_rate > 0.0 && self.input_rate.is_finite()) {
            return fail(format!(
                "input_rate must be positive, got {}",
                self.input_rate
            ));
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return fail(format!(
                "window_seconds must be positive, got {}",
                self.window_seconds
            ));
        }
        if self.feature_schema_version != FEATURE_SCHEMA_VERSION {
            return Err(CliError::new(
                "unsupported",
                format!(
                    "feature schema version {} is not supported (this build writes version {FEATURE_SCHEMA_VERSION})",
                    self.feature_schema_version
                ),
            ));
        }
        if self.output.is_empty() {
            return fail("output directory is empty".into());
        }
        let r = &self.reduce;
        if r.n == 0 {
            return fail("reduce.n must be at least 1".into());
        }
        if r.method == Method::Dyca && r.m > r.n {
            return fail(format!("reduce.m = {} exceeds reduce.n = {}", r.m, r.n));
        }
        if !(r.eig_threshold >= 0.0 && r.eig_threshold.is_finite()) {
            return fail(format!(
                "reduce.eig_threshold must be finite and non-negative, got {}",
                r.eig_threshold
            ));
        }
        if !(self.topo.max_length > 0.0) {
            return fail(format!(
                "topo.max_length must be positive, got {}",
                self.topo.max_length
            ));
        }
        if self.topo.levels == 0 {
            return fail("topo.levels must be at least 1".into());
        }
        let s = &self.svm;
        if s.c.is_empty() || s.kernels.is_empty() {
            return fail("svm.c and svm.kernels must be nonempty".into());
        }
        if let Some(c) = s.c.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return fail(format!("svm.c values must be positive, got {c}"));
        }
        for k in &s.kernels {
            parse_kernel(k)?;
        }
        if s.folds < 2 {
            return fail(format!("svm.folds must be at least 2, got {}", s.folds));
        }
        if !(s.eval_fraction > 0.0 && s.eval_fraction < 1.0) {
            return fail(format!(
                "svm.eval_fraction must lie in (0, 1), got {}",
                s.eval_fraction
            ));
        }
        if !(s.tol > 0.0) || s.max_passes == 0 {
            return fail("svm.tol and svm.max_passes must be positive".into());
        }
        Ok(())
    }

    pub fn reduce_options(&self) -> ReduceOptions {
        ReduceOptions {
            method: self.reduce.method,
            n: self.reduce.n,
            m: self.reduce.m,
            eig_threshold: (self.reduce.eig_threshold > 0.0).then_some(self.reduce.eig_threshold),
        }
    }

    pub fn topo_options(&self) -> TopoOptions {
        TopoOptions {
            max_length: self
                .topo
                .max_length
                .is_finite()
                .then_some(self.topo.max_length),
            levels: self.topo.levels,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            tol: self.svm.tol,
            max_passes: self.svm.max_passes,
            seed: self.seed,
        }
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        let s = &self.synth;
        CorpusSpec {
            rate: s.rate,
            seconds: s.seconds,
            channels: s.channels,
            time_scale: s.time_scale,
            snr_db: s.snr_db,
            smoothing: s.smoothing,
        }
    }

    /// The search grid, C outer and kernels inner, with `rbf:scale`
    /// resolved against the training rows.
    pub fn grid(&self, x_train: &DMatrix<f64>) -> CliResult<Vec<GridCell>> {
        let mut kernels = Vec::new();
        for k in &self.svm.kernels {
            let kernel = match parse_kernel(k)? {
                KernelSpec::Linear => Kernel::Linear,
                KernelSpec::Rbf(gamma) => Kernel::Rbf { gamma },
                KernelSpec::RbfScale => Kernel::Rbf {
                    gamma: scale_gamma(x_train)?,
                },
            };
            if !kernels.contains(&kernel) {
                kernels.push(kernel);
            }
        }
        Ok(self
            .svm
            .c
            .iter()
            .flat_map(|&c| kernels.iter().map(move |&kernel| GridCell { kernel, c }))
            .collect())
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML value when it parses
/// as one and as a bare string otherwise.
fn apply_override(table: &mut toml::Table, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override {item:?} is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for part in path {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override {key:?}: {part} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_echo() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let text = c.to_toml();
        assert!(text.contains("max_length = inf"), "{text}");
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_parse_values() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "reduce.n=4").unwrap();
        apply_override(&mut t, "montage=bipolar").unwrap();
        apply_override(&mut t, "svm.c=[1, 2]").unwrap();
        let c: PipelineConfig = toml::Value::Table(t).try_into().unwrap();
        assert_eq!(c.reduce.n, 4);
        assert_eq!(c.montage, "bipolar");
        assert_eq!(c.svm.c, vec![1.0, 2.0]);
        assert_eq!(c.reduce.m, 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<PipelineConfig>("colour = 1").unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn kernel_specs() {
        assert_eq!(parse_kernel("rbf:0.5").unwrap(), KernelSpec::Rbf(0.5));
        assert_eq!(parse_kernel("rbf:scale").unwrap(), KernelSpec::RbfScale);
        assert!(parse_kernel("rbf:-1").is_err());
        assert!(parse_kernel("poly").is_err());
    }

    #[test]
    fn grid_order() {
        let mut c = PipelineConfig::default();
        c.svm.c = vec![1.0, 10.0];
        c.svm.kernels = vec!["linear".into(), "rbf:0.5".into()];
        let x = DMatrix::from_fn(4, 2, |r, k| (r * (k + 1)) as f64);
        let g = c.grid(&x).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(
            g[1],
            GridCell {
                kernel: Kernel::Rbf { gamma: 0.5 },
                c: 1.0
            }
        );
        assert_eq!(
            g[2],
            GridCell {
                kernel: Kernel::Linear,
                c: 10.0
            }
        );
    }

    #[test]
    fn invalid_values_named() {
        let mut c = PipelineConfig::default();
        c.reduce.m = 5;
        assert!(c.validate().unwrap_err().message.contains("reduce.m"));
        let mut c = PipelineConfig::default();
        c.feature_schema_version = 2;
        assert_eq!(c.validate().unwrap_err().category, "unsupported");
    }
}
