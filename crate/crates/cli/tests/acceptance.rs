//! Acceptance suite. Runs every criterion in order, prints one line each and
//! exits nonzero if any fails.

#[path = "../../core/tests/support/landscape_oracle.rs"]
mod landscape_oracle;
#[path = "../../core/tests/support/rips_oracle.rs"]
mod rips_oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use eegtopo::dimred::{canonical_correlations, dyca, DycaOptions};
use eegtopo::features::{feature_index, FeatureMatrix, FEATURE_COUNT};
use eegtopo::homology::{rips_persistence, PersistenceDiagram, PersistencePair};
use eegtopo::io::{apply_montage, Label, Montage, Segment};
use eegtopo::landscape::build_landscape;
use eegtopo::pipeline::{analyze_segment, ReduceOptions, TopoOptions};
use eegtopo::svm::{train_svc, Kernel, TrainOptions};
use eegtopo::synth::{generate, make_corpus, Mixing, SynthSpec, System};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed < limit,
        format!("{detail}, {elapsed:.2?}"),
        format!("{detail}, but took {elapsed:.2?} (limit {limit:?})"),
    )
}

fn a1_homology() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..100 {
        let w = rng.random_range(1..=12);
        let pts = DMatrix::from_fn(w, 3, |_, _| rng.random_range(-1.0..1.0));
        let fast: Vec<(u8, f64, f64)> = rips_persistence(&pts, None)
            .map_err(|e| e.to_string())?
            .pairs()
            .iter()
            .map(|p| (p.dim, p.birth, p.death))
            .collect();
        let slow = rips_oracle::naive_persistence(&pts);
        if !rips_oracle::same_pairs(&fast, &slow, 1e-9) {
            return Err(format!("cloud {case} ({w} points): {fast:?} vs {slow:?}"));
        }
    }
    within(
        start.elapsed(),
        Duration::from_secs(10),
        "100 clouds match the naive reduction".into(),
    )
}

fn oscillator(seed: u64, snr_db: Option<f64>) -> DMatrix<f64> {
    let mut spec = SynthSpec::new(
        System::Harmonic {
            omega: 2.0 * PI * 8.0,
        },
        4.0,
        128.0,
        10,
    );
    spec.mixing = Mixing::Random { seed };
    spec.snr_db = snr_db;
    spec.noise_seed = seed.wrapping_add(1000);
    generate(&spec).unwrap().recording.samples().clone()
}

fn a2_dyca() -> Outcome {
    let start = Instant::now();
    let opts = DycaOptions {
        n: 2,
        m: 2,
        eig_threshold: None,
    };
    let mut worst = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for seed in 0..20 {
        let ev = dyca(&oscillator(seed, None), 128.0, &opts)
            .map_err(|e| e.to_string())?
            .eigenvalues;
        if ev[0] < 0.99 || ev[1] < 0.99 {
            return Err(format!("noiseless seed {seed}: {ev:?}"));
        }
        worst.0 = worst.0.min(ev[1]);
        let ev = dyca(&oscillator(seed, Some(20.0)), 128.0, &opts)
            .map_err(|e| e.to_string())?
            .eigenvalues;
        if ev[0] < 0.9 || ev[1] < 0.9 || ev[2..].iter().any(|&l| l >= 0.5) {
            return Err(format!("20 dB seed {seed}: {ev:?}"));
        }
        worst.1 = worst.1.min(ev[1]);
        worst.2 = worst.2.max(ev[2]);
    }
    within(
        start.elapsed(),
        Duration::from_secs(5),
        format!(
            "min noiseless λ2 {:.4}, 20 dB min λ2 {:.4}, max λ3 {:.4}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn run_all(out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_eegtopo"))
        .args(["--out"])
        .arg(out)
        .arg("run-all")
        .env_remove("EEGTOPO_OUT")
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!(
            "run-all failed: {}",
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    Ok(start.elapsed())
}

fn a3_end_to_end(out: &Path) -> Outcome {
    let elapsed = run_all(out)?;
    let fm =
        FeatureMatrix::read_csv(out.join("features/features.csv")).map_err(|e| e.to_string())?;
    if fm.len() != 1100 {
        return Err(format!("{} segments, expected 1100", fm.len()));
    }
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("report/report.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let accuracy = report["accuracy"]
        .as_f64()
        .ok_or("report has no accuracy")?;
    let total = report["total"].as_u64().unwrap_or(0);
    if accuracy < 0.90 {
        return Err(format!(
            "held-out accuracy {accuracy:.4} on {total} segments"
        ));
    }
    within(
        elapsed,
        Duration::from_secs(600),
        format!("1100 segments, held-out accuracy {accuracy:.4} on {total}"),
    )
}

fn a4_landscapes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..100 {
        let n = rng.random_range(1..=20);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let b: f64 = rng.random_range(0.0..2.0);
                (b, b + rng.random_range(0.01..1.5))
            })
            .collect();
        let diagram = PersistenceDiagram::from_pairs(
            pairs
                .iter()
                .map(|&(birth, death)| PersistencePair {
                    dim: 1,
                    birth,
                    death,
                })
                .collect(),
        );
        let ls = build_landscape(&diagram, 1, n);
        let hi = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
        for t in landscape_oracle::grid(-0.1, hi + 0.1, 2000) {
            for k in 1..=n + 1 {
                let want = landscape_oracle::kth_largest_tent(&pairs, k, t);
                let got = ls.eval(k, t);
                if (got - want).abs() > 1e-9 {
                    return Err(format!("diagram {case}, λ{k}({t}) = {got}, oracle {want}"));
                }
                if ls.eval(k, t) + 1e-12 < ls.eval(k + 1, t) {
                    return Err(format!("diagram {case}: λ{k} < λ{} at {t}", k + 1));
                }
            }
        }
        for (k, level) in ls.levels.iter().enumerate() {
            for w in level.vertices().windows(2) {
                let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                if t1 > t0 && (v1 - v0).abs() > (t1 - t0) * (1.0 + 1e-12) {
                    return Err(format!(
                        "diagram {case}: λ{} slope exceeds 1 at {t0}",
                        k + 1
                    ));
                }
            }
        }
    }
    Ok("100 diagrams match the grid oracle, ordered and 1-Lipschitz".into())
}

fn a5_montages(out: &Path) -> Outcome {
    let segment = make_corpus(1, 1, 42).map_err(|e| e.to_string())?.remove(0);
    let names = ["bipolar", "average", "cz"];
    let mut trajectories = Vec::new();
    for name in names {
        let montage = Montage::builtin(name).ok_or(format!("no montage {name}"))?;
        let rec = segment.to_recording().map_err(|e| e.to_string())?;
        let rec = apply_montage(&rec, &montage).map_err(|e| e.to_string())?;
        let reduced =
            eegtopo::pipeline::reduce(rec.samples(), rec.rate(), &ReduceOptions::default())
                .map_err(|e| e.to_string())?;
        trajectories.push(reduced.trajectory.points);
    }
    let mut min_cc = f64::INFINITY;
    for a in 0..3 {
        for b in a + 1..3 {
            let cc = canonical_correlations(&trajectories[a], &trajectories[b]);
            let lo = cc.iter().cloned().fold(f64::INFINITY, f64::min);
            if lo < 0.9 {
                return Err(format!(
                    "{} vs {}: canonical correlations {cc:?}",
                    names[a], names[b]
                ));
            }
            min_cc = min_cc.min(lo);
        }
    }

    let fm =
        FeatureMatrix::read_csv(out.join("features/features.csv")).map_err(|e| e.to_string())?;
    let k = feature_index("h1_life_max").unwrap();
    let class = |l: Label| -> Vec<f64> {
        fm.rows
            .iter()
            .filter(|r| r.label == l)
            .map(|r| r.values[k])
            .collect()
    };
    let (pos, neg) = (class(Label::Ied), class(Label::Background));
    let wins: usize = pos
        .iter()
        .map(|p| neg.iter().filter(|&n| p > n).count())
        .sum();
    let fraction = wins as f64 / (pos.len() * neg.len()) as f64;
    check(
        fraction >= 0.90,
        format!("min canonical correlation {min_cc:.4}, H1 max lifetime pos > neg for {fraction:.4} of pairs"),
        format!("H1 max lifetime pos > neg for only {fraction:.4} of pairs"),
    )
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn a6_determinism(first: &Path, second: &Path) -> Outcome {
    run_all(second)?;
    let (a, b) = (tree(first), tree(second));
    for name in ["features/features.csv", "model/model.json"] {
        if !a.contains_key(Path::new(name)) {
            return Err(format!("{name} missing"));
        }
    }
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    check(
        differing.is_empty(),
        format!("{} files byte-identical across runs", a.len()),
        format!("differing files: {differing:?}"),
    )
}

fn a7_scale() -> Outcome {
    let corpus = make_corpus(20, 20, 7).map_err(|e| e.to_string())?;
    let (ro, to) = (ReduceOptions::default(), TopoOptions::default());
    let analyses = corpus
        .iter()
        .map(|s| analyze_segment(s, &ro, &to))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let train = FeatureMatrix {
        rows: analyses.iter().map(|a| a.features.clone()).collect(),
    };
    let model = train_svc(
        &train.matrix(),
        &train.labels(),
        Kernel::Rbf {
            gamma: 1.0 / FEATURE_COUNT as f64,
        },
        1.0,
        &TrainOptions::default(),
    )
    .map_err(|e| e.to_string())?;

    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (k, seg) in [0, 5, 10, 20, 25, 30].into_iter().map(|k| (k, &corpus[k])) {
        let scaled_seg = Segment {
            data: &seg.data * 10.0,
            ..seg.clone()
        };
        let base = &analyses[k];
        let scaled = analyze_segment(&scaled_seg, &ro, &to).map_err(|e| e.to_string())?;
        let traj = (&base.reduction.trajectory.points - &scaled.reduction.trajectory.points).amax();
        let (pa, pb) = (
            base.topology.diagram.pairs(),
            scaled.topology.diagram.pairs(),
        );
        if pa.len() != pb.len() {
            return Err(format!("segment {k}: {} vs {} pairs", pa.len(), pb.len()));
        }
        let diag = pa
            .iter()
            .zip(pb)
            .map(|(p, q)| {
                let death = if p.death == q.death {
                    0.0
                } else {
                    (p.death - q.death).abs()
                };
                (p.birth - q.birth).abs().max(death)
            })
            .fold(0.0, f64::max);
        let (fa, fb) = (&base.features.values, &scaled.features.values);
        let feat = fa
            .iter()
            .zip(fb)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        let (ma, mb) = (
            DMatrix::from_row_slice(1, FEATURE_COUNT, fa),
            DMatrix::from_row_slice(1, FEATURE_COUNT, fb),
        );
        let std_feat = (model.scaler.apply(&ma) - model.scaler.apply(&mb)).amax();
        if traj > 1e-9 || diag > 1e-9 || feat > 1e-9 || std_feat > 1e-9 {
            return Err(format!(
                "segment {k}: trajectory {traj:e}, diagram {diag:e}, features {feat:e}, scaled features {std_feat:e}"
            ));
        }
        if model.predict_row(fa) != model.predict_row(fb) {
            return Err(format!("segment {k}: prediction changed"));
        }
        worst = (
            worst.0.max(traj),
            worst.1.max(diag),
            worst.2.max(feat.max(std_feat)),
        );
    }
    Ok(format!(
        "6 segments ×10: trajectory {:.1e}, diagram {:.1e}, features {:.1e}, predictions equal",
        worst.0, worst.1, worst.2
    ))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let first = scratch.path().join("run1");
    let second = scratch.path().join("run2");

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("A1 homology oracle", Box::new(a1_homology)),
        ("A2 DyCA recovery", Box::new(a2_dyca)),
        (
            "A3 end-to-end classification",
            Box::new(|| a3_end_to_end(&first)),
        ),
        ("A4 landscape correctness", Box::new(a4_landscapes)),
        ("A5 montage contrast", Box::new(|| a5_montages(&first))),
        (
            "A6 determinism",
            Box::new(|| a6_determinism(&first, &second)),
        ),
        ("A7 scale invariance", Box::new(a7_scale)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
