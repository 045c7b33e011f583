//! Synthetic multichannel recordings with known sources.
//!
//! A low-dimensional ODE is integrated with fixed-step RK4 at eight times
//! the output rate, decimated by striding, mixed into `channels` outputs by
//! a seeded Gaussian matrix and optionally corrupted by white noise at a
//! given SNR. Every output is a pure function of its `SynthSpec`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::io::{
    write_csv, write_labels, Label, LabelEntry, Recording, Segment, STANDARD_ELECTRODES,
};
use crate::{Error, Result};

const OVERSAMPLING: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "lowercase")]
pub enum System {
    /// ẋ₁ = ω x₂, ẋ₂ = −ω x₁ from (0, 1): x = (sin ωt, cos ωt).
    Harmonic { omega: f64 },
    /// ẋ = −y − z, ẏ = x + a y, ż = b + z (x − c), with model time running
    /// `time_scale` times faster than wall time. `transient` model-time
    /// units are integrated and discarded before recording starts.
    Rossler {
        a: f64,
        b: f64,
        c: f64,
        time_scale: f64,
        transient: f64,
    },
    /// Independent Gaussian channels of standard deviation `sigma`, low-pass
    /// filtered as AR(1) with coefficient `smoothing` (variance preserved).
    Noise { sigma: f64, smoothing: f64 },
}

impl System {
    pub fn rossler_default() -> Self {
        System::Rossler {
            a: 0.2,
            b: 0.2,
            c: 5.7,
            time_scale: 1.0,
            transient: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            System::Harmonic { .. } => 2,
            System::Rossler { .. } => 3,
            System::Noise { .. } => 0,
        }
    }

    fn default_state(&self) -> Vec<f64> {
        match self {
            System::Harmonic { .. } => vec![0.0, 1.0],
            System::Rossler { .. } => vec![1.0, 1.0, 1.0],
            System::Noise { .. } => vec![],
        }
    }

    /// Right-hand side in wall-clock time.
    fn rhs(&self, s: &[f64], out: &mut [f64]) {
        match *self {
            System::Harmonic { omega } => {
                out[0] = omega * s[1];
                out[1] = -omega * s[0];
            }
            System::Rossler {
                a,
                b,
                c,
                time_scale,
                ..
            } => {
                out[0] = time_scale * (-s[1] - s[2]);
                out[1] = time_scale * (s[0] + a * s[1]);
                out[2] = time_scale * (b + s[2] * (s[0] - c));
            }
            System::Noise { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixing {
    /// Sources copied to the first channels; requires channels = dimension.
    Identity,
    /// Standard Gaussian entries drawn from this seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub system: System,
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub rate: f64,
    pub channels: usize,
    pub mixing: Mixing,
    /// Channel noise level; `None` for noiseless output. Ignored by
    /// [`System::Noise`].
    pub snr_db: Option<f64>,
    /// Seed for channel noise.
    pub noise_seed: u64,
    /// Initial ODE state; `None` uses the system default.
    pub initial_state: Option<Vec<f64>>,
}

impl SynthSpec {
    pub fn new(system: System, duration: f64, rate: f64, channels: usize) -> Self {
        SynthSpec {
            system,
            duration,
            rate,
            channels,
            mixing: Mixing::Random { seed: 0 },
            snr_db: None,
            noise_seed: 0,
            initial_state: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Config(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        let d = self.system.dimension();
        if self.channels < d.max(1) {
            return Err(Error::Config(format!(
                "{} channels cannot carry a {d}-dimensional system",
                self.channels
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::Config("SNR must be finite".into()));
            }
        }
        if self.mixing == Mixing::Identity && self.channels != d {
            return Err(Error::Config(format!(
                "identity mixing needs exactly {d} channels, got {}",
                self.channels
            )));
        }
        if let Some(init) = &self.initial_state {
            if init.len() != d {
                return Err(Error::Config(format!(
                    "initial state has {} entries for a {d}-dimensional system",
                    init.len()
                )));
            }
        }
        Ok(())
    }

    fn samples(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }
}

/// A generated recording and its d × T source trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub recording: Recording,
    pub sources: DMatrix<f64>,
}

fn rk4_step(system: &System, state: &mut [f64], h: f64, scratch: &mut [Vec<f64>; 5]) {
    let n = state.len();
    let [k1, k2, k3, k4, tmp] = scratch;
    system.rhs(state, k1);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    system.rhs(tmp, k2);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    system.rhs(tmp, k3);
    for i in 0..n {
        tmp[i] = state[i] + h * k3[i];
    }
    system.rhs(tmp, k4);
    for i in 0..n {
        state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates the system and returns the d × T decimated source trajectory.
fn integrate(spec: &SynthSpec) -> Result<DMatrix<f64>> {
    let d = spec.system.dimension();
    let t = spec.samples();
    let mut state = spec
        .initial_state
        .clone()
        .unwrap_or_else(|| spec.system.default_state());
    let h = 1.0 / (spec.rate * OVERSAMPLING as f64);
    let mut scratch: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; d]);
    let mut step = 0usize;
    let mut advance = |state: &mut Vec<f64>| -> Result<()> {
        rk4_step(&spec.system, state, h, &mut scratch);
        step += 1;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Generation {
                step,
                message: format!("state became non-finite: {state:?}"),
            });
        }
        Ok(())
    };

    if let System::Rossler {
        time_scale,
        transient,
        ..
    } = spec.system
    {
        let burn_in = (transient / (time_scale * h)).round() as usize;
        for _ in 0..burn_in {
            advance(&mut state)?;
        }
    }

    let mut sources = DMatrix::zeros(d, t);
    for k in 0..t {
        if k > 0 {
            for _ in 0..OVERSAMPLING {
                advance(&mut state)?;
            }
        }
        for (i, &v) in state.iter().enumerate() {
            sources[(i, k)] = v;
        }
    }
    Ok(sources)
}

fn mixing_matrix(spec: &SynthSpec) -> DMatrix<f64> {
    let d = spec.system.dimension();
    match spec.mixing {
        Mixing::Identity => DMatrix::identity(d, d),
        Mixing::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            loop {
                let m = DMatrix::<f64>::from_fn(spec.channels, d, |_, _| {
                    StandardNormal.sample(&mut rng)
                });
                if m.rank(1e-9) == d {
                    return m;
                }
            }
        }
    }
}

pub fn channel_labels(channels: usize) -> Vec<String> {
    if channels == STANDARD_ELECTRODES.len() {
        STANDARD_ELECTRODES.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=channels).map(|i| format!("ch{i}")).collect()
    }
}

fn gaussian_noise(rows: usize, cols: usize, sigma: f64, smoothing: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = (1.0 - smoothing * smoothing).sqrt();
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let mut prev: f64 = StandardNormal.sample(&mut rng);
        for c in 0..cols {
            let e: f64 = StandardNormal.sample(&mut rng);
            let x = if c == 0 {
                prev
            } else {
                smoothing * prev + innovation * e
            };
            out[(r, c)] = sigma * x;
            prev = x;
        }
    }
    out
}

pub fn generate(spec: &SynthSpec) -> Result<Synthesized> {
    spec.validate()?;
    let t = spec.samples();
    let labels = channel_labels(spec.channels);

    if let System::Noise { sigma, smoothing } = spec.system {
        if !(sigma.is_finite() && sigma > 0.0) || !(0.0..1.0).contains(&smoothing) {
            return Err(Error::Config(format!(
                "noise needs sigma > 0 and smoothing in [0, 1), got {sigma}, {smoothing}"
            )));
        }
        let data = gaussian_noise(spec.channels, t, sigma, smoothing, spec.noise_seed);
        return Ok(Synthesized {
            recording: Recording::new(labels, data, spec.rate)?,
            sources: DMatrix::zeros(0, t),
        });
    }

    let sources = integrate(spec)?;
    let mut data = mixing_matrix(spec) * &sources;
    if let Some(snr) = spec.snr_db {
        let mean_var = data
            .row_iter()
            .map(|r| {
                let m = r.mean();
                r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64
            })
            .sum::<f64>()
            / spec.channels as f64;
        let sigma = (mean_var / 10f64.powf(snr / 10.0)).sqrt();
        data += gaussian_noise(spec.channels, t, sigma, 0.0, spec.noise_seed);
    }
    Ok(Synthesized {
        recording: Recording::new(labels, data, spec.rate)?,
        sources,
    })
}

/// Settings of the demo corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub rate: f64,
    pub seconds: f64,
    pub channels: usize,
    /// Rössler time scale of the positive class.
    pub time_scale: f64,
    /// Channel SNR of the positive class.
    pub snr_db: f64,
    /// AR(1) coefficient of the negative class.
    pub smoothing: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            rate: 128.0,
            seconds: 1.0,
            channels: STANDARD_ELECTRODES.len(),
            time_scale: 15.0,
            snr_db: 10.0,
            smoothing: 0.9,
        }
    }
}

/// Generates `n_pos` Rössler-driven segments labeled IED followed by
/// `n_neg` filtered-noise segments labeled BACKGROUND.
///
/// Each segment draws its own initial state, mixing and noise seeds from a
/// stream seeded by `seed`.
pub fn make_corpus(n_pos: usize, n_neg: usize, seed: u64) -> Result<Vec<Segment>> {
    make_corpus_with(&CorpusSpec::default(), n_pos, n_neg, seed)
}

pub fn make_corpus_with(
    corpus: &CorpusSpec,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<Vec<Segment>> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Config(
            "corpus needs at least one segment per class".into(),
        ));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::with_capacity(n_pos + n_neg);
    for k in 0..n_pos + n_neg {
        let mixing_seed = master.next_u64();
        let noise_seed = master.next_u64();
        let state_seed = master.next_u64();
        let positive = k < n_pos;
        let (system, label, initial_state, snr_db) = if positive {
            let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
            let mut uniform = |lo: f64, hi: f64| {
                lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
            };
            let init = vec![uniform(-5.0, 5.0), uniform(-5.0, 5.0), uniform(0.0, 1.0)];
            let system = System::Rossler {
                a: 0.2,
                b: 0.2,
                c: 5.7,
                time_scale: corpus.time_scale,
                transient: 50.0,
            };
            (system, Label::Ied, Some(init), Some(corpus.snr_db))
        } else {
            let system = System::Noise {
                sigma: 1.0,
                smoothing: corpus.smoothing,
            };
            (system, Label::Background, None, None)
        };
        let spec = SynthSpec {
            system,
            duration: corpus.seconds,
            rate: corpus.rate,
            channels: corpus.channels,
            mixing: Mixing::Random { seed: mixing_seed },
            snr_db,
            noise_seed,
            initial_state,
        };
        let rec = generate(&spec)?.recording;
        let (channels, data, rate) = rec.into_parts();
        segments.push(Segment {
            source_id: format!("syn{k:05}"),
            start_sample: 0,
            channels,
            data,
            rate,
            label,
        });
    }
    Ok(segments)
}

/// Writes each segment as `<source_id>.csv` plus a `labels.csv` label file,
/// the formats the ingestion path reads.
pub fn export_corpus(dir: impl AsRef<Path>, segments: &[Segment]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut labels = Vec::with_capacity(segments.len());
    for seg in segments {
        write_csv(
            dir.join(format!("{}.csv", seg.source_id)),
            &seg.to_recording()?,
        )?;
        labels.push(LabelEntry {
            source_id: seg.source_id.clone(),
            start_sample: seg.start_sample,
            label: seg.label,
        });
    }
    write_labels(dir.join("labels.csv"), &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_matches_closed_form() {
        let mut spec = SynthSpec::new(System::Harmonic { omega: 1.0 }, 1.0, 128.0, 2);
        spec.mixing = Mixing::Identity;
        let out = generate(&spec).unwrap();
        let data = out.recording.samples();
        let worst = (0..128)
            .map(|k| {
                let t = k as f64 / 128.0;
                (data[(0, k)] - t.sin())
                    .abs()
                    .max((data[(1, k)] - t.cos()).abs())
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let spec = SynthSpec::new(
            System::Noise {
                sigma: 2.0,
                smoothing: 0.0,
            },
            10_000.0 / 128.0,
            128.0,
            3,
        );
        let rec = generate(&spec).unwrap().recording;
        assert_eq!(rec.len(), 10_000);
        for row in rec.samples().row_iter() {
            let mean = row.mean();
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
            assert!((var - 4.0).abs() / 4.0 < 0.05, "{var}");
        }
    }

    #[test]
    fn rossler_stays_bounded() {
        let spec = SynthSpec::new(System::rossler_default(), 60.0, 128.0, 3);
        let out = generate(&spec).unwrap();
        assert!(out.sources.amax() < 30.0);
        assert_eq!(out.sources.ncols(), 60 * 128);
    }

    #[test]
    fn divergence_reports_step() {
        let system = System::Rossler {
            a: 0.2,
            b: 0.2,
            c: -50.0,
            time_scale: 1.0,
            transient: 0.0,
        };
        let mut spec = SynthSpec::new(system, 60.0, 128.0, 3);
        spec.initial_state = Some(vec![1.0, 1.0, 10.0]);
        match generate(&spec) {
            Err(Error::Generation { step, .. }) => assert!(step > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixing_has_full_rank() {
        let spec = SynthSpec::new(System::rossler_default(), 1.0, 128.0, 27);
        assert_eq!(mixing_matrix(&spec).rank(1e-9), 3);
    }

    #[test]
    fn spec_validation() {
        let spec = SynthSpec::new(System::rossler_default(), 1.0, 128.0, 2);
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
        let mut spec = SynthSpec::new(System::Harmonic { omega: 1.0 }, 1.0, 128.0, 3);
        spec.snr_db = Some(f64::INFINITY);
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn corpus_is_deterministic_and_counted() {
        let a = make_corpus(3, 2, 42).unwrap();
        let b = make_corpus(3, 2, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert_eq!(a.iter().filter(|s| s.label == Label::Ied).count(), 3);
        assert!(a.iter().all(|s| s.window() == 128 && s.data.nrows() == 27));
        let c = make_corpus(3, 2, 43).unwrap();
        assert_ne!(a[0].data, c[0].data);
    }
}
