use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eegtopo::io::{read_csv, write_csv, write_edf, Label, Recording};
use eegtopo::svm::SvmModel;
use eegtopo::synth::{export_corpus, generate, make_corpus, SynthSpec, System};
use eegtopo_cli::store::{Manifest, Stage};
use nalgebra::DMatrix;

fn eegtopo(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegtopo"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("EEGTOPO_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        stdout(&o),
        stderr(&o)
    );
    o
}

/// Exit code and the category from the `error[category]: ...` line.
#[track_caller]
fn failure(o: &Output) -> (i32, String) {
    assert!(!o.status.success(), "unexpected success:\n{}", stdout(o));
    let err = stderr(o);
    let category = err
        .lines()
        .find_map(|l| {
            l.strip_prefix("error[")
                .and_then(|r| r.split_once(']'))
                .map(|(c, _)| c.to_string())
        })
        .unwrap_or_else(|| panic!("no error line in {err:?}"));
    (o.status.code().unwrap(), category)
}

fn manifest(out: &Path, stage: Stage) -> Manifest {
    let text = std::fs::read_to_string(out.join(stage.dir_name()).join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Small labeled corpus exported as CSV recordings plus labels.csv.
fn corpus_dir(root: &Path, n: usize) -> PathBuf {
    let dir = root.join("input");
    export_corpus(&dir, &make_corpus(n, n, 7).unwrap()).unwrap();
    dir
}

fn ingest_corpus(out: &Path, dir: &Path) {
    let labels = dir.join("labels.csv");
    ok(eegtopo(
        out,
        &[
            "ingest",
            dir.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
        ],
    ));
}

fn small_run(out: &Path, n: usize) -> Output {
    let n = n.to_string();
    eegtopo(
        out,
        &[
            "--set",
            &format!("synth.positives={n}"),
            "--set",
            &format!("synth.negatives={n}"),
            "run-all",
        ],
    )
}

#[test]
fn exported_corpus_ingests_to_identical_segments() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = make_corpus(4, 4, 3).unwrap();
    let dir = tmp.path().join("input");
    export_corpus(&dir, &corpus).unwrap();
    let out = tmp.path().join("out");
    let labels = dir.join("labels.csv");
    ok(eegtopo(
        &out,
        &[
            "ingest",
            dir.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--montage",
            "none",
        ],
    ));
    let m = manifest(&out, Stage::Segments);
    assert_eq!(m.entries.len(), corpus.len());
    for seg in &corpus {
        let e = m
            .entries
            .iter()
            .find(|e| e.source_id == seg.source_id)
            .unwrap();
        assert_eq!((e.start_sample, e.label), (seg.start_sample, seg.label));
        let rec = read_csv(out.join("segments").join(format!("{}.csv", e.key)), e.rate).unwrap();
        assert_eq!(rec.channels(), &seg.channels[..]);
        assert_eq!(rec.samples(), &seg.data);
    }
}

#[test]
fn missing_montage_channel_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = Recording::new(
        vec!["A".into(), "B".into()],
        DMatrix::from_fn(2, 256, |r, t| (r + t) as f64),
        128.0,
    )
    .unwrap();
    let file = tmp.path().join("rec.csv");
    write_csv(&file, &rec).unwrap();
    let o = eegtopo(
        &tmp.path().join("out"),
        &["ingest", file.to_str().unwrap(), "--montage", "average"],
    );
    let (code, category) = failure(&o);
    assert_eq!((code, category.as_str()), (3, "config"));
    assert!(stderr(&o).contains("Fp1"), "{}", stderr(&o));
}

#[test]
fn tiling_ten_seconds_gives_ten_segments() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SynthSpec::new(System::Harmonic { omega: 20.0 }, 10.0, 128.0, 4);
    spec.snr_db = Some(20.0);
    let file = tmp.path().join("long.csv");
    write_csv(&file, &generate(&spec).unwrap().recording).unwrap();
    let out = tmp.path().join("out");
    let o = ok(eegtopo(
        &out,
        &["ingest", file.to_str().unwrap(), "--montage", "none"],
    ));
    assert!(
        stdout(&o).contains("ingest: 10 segments from 1 recordings"),
        "{}",
        stdout(&o)
    );
    let m = manifest(&out, Stage::Segments);
    assert!(m.entries.iter().all(|e| e.label == Label::Unlabeled));
    let starts: Vec<usize> = m.entries.iter().map(|e| e.start_sample).collect();
    assert_eq!(starts, (0..10).map(|k| k * 128).collect::<Vec<_>>());
}

#[test]
fn edf_input_is_ingested() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SynthSpec::new(System::Harmonic { omega: 20.0 }, 3.0, 128.0, 27);
    spec.snr_db = Some(20.0);
    let file = tmp.path().join("rec.edf");
    write_edf(&file, &generate(&spec).unwrap().recording).unwrap();
    let out = tmp.path().join("out");
    let o = ok(eegtopo(
        &out,
        &["ingest", file.to_str().unwrap(), "--montage", "bipolar"],
    ));
    assert!(stdout(&o).contains("3 segments"), "{}", stdout(&o));
    let e = &manifest(&out, Stage::Segments).entries[0];
    let rec = read_csv(out.join("segments").join(format!("{}.csv", e.key)), e.rate).unwrap();
    assert_eq!(rec.channel_count(), 28);
}

#[test]
fn stages_are_idempotent_and_guard_their_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ingest_corpus(&out, &corpus_dir(tmp.path(), 3));

    let first = ok(eegtopo(&out, &["reduce"]));
    assert!(stdout(&first).starts_with("reduce: 6 trajectories"));
    let traj = out.join("trajectories");
    let stamp = |p: &Path| std::fs::metadata(p).unwrap().modified().unwrap();
    let m = manifest(&out, Stage::Trajectories);
    let file = traj.join(format!("{}.csv", m.entries[0].key));
    let before = stamp(&file);
    let again = ok(eegtopo(&out, &["reduce"]));
    assert!(stdout(&again).contains("up to date"), "{}", stdout(&again));
    assert_eq!(stamp(&file), before);

    // one eigenvalue spectrum per segment, tagged with the stage hash
    for e in &m.entries {
        let text =
            std::fs::read_to_string(traj.join(format!("{}.eigenvalues.csv", e.key))).unwrap();
        assert!(text.starts_with(&format!("# hash={}\nindex,value\n", m.hash)));
    }

    let o = eegtopo(&out, &["reduce", "-n", "4"]);
    assert_eq!(failure(&o), (12, "hash-mismatch".into()));
    assert!(stderr(&o).contains("--force"));
    ok(eegtopo(&out, &["reduce", "-n", "4", "--force"]));
    assert_ne!(manifest(&out, Stage::Trajectories).hash, m.hash);
}

#[test]
fn mixed_hash_chain_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let dir = corpus_dir(tmp.path(), 3);
    ingest_corpus(&out, &dir);
    ok(eegtopo(&out, &["reduce"]));
    let labels = dir.join("labels.csv");
    ok(eegtopo(
        &out,
        &[
            "ingest",
            dir.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--montage",
            "cz",
            "--force",
        ],
    ));
    let o = eegtopo(&out, &["topo"]);
    assert_eq!(failure(&o).1, "hash-mismatch");
    assert!(
        stderr(&o).contains("rerun `eegtopo reduce`"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn topo_writes_one_diagram_per_segment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ingest_corpus(&out, &corpus_dir(tmp.path(), 1));
    ok(eegtopo(&out, &["reduce"]));
    ok(eegtopo(&out, &["topo"]));
    let m = manifest(&out, Stage::Topology);
    let diagrams = std::fs::read_dir(out.join("topology"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".diagram.csv")
        })
        .count();
    assert_eq!(diagrams, m.entries.len());
    let text = std::fs::read_to_string(
        out.join("topology")
            .join(format!("{}.diagram.csv", m.entries[0].key)),
    )
    .unwrap();
    let h0 = text.lines().filter(|l| l.starts_with("0,")).count();
    assert_eq!(
        h0, 128,
        "128 points give 127 finite and one essential H0 pair"
    );
}

#[test]
fn single_class_training_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("input");
    let corpus: Vec<_> = make_corpus(6, 1, 5)
        .unwrap()
        .into_iter()
        .filter(|s| s.label == Label::Ied)
        .collect();
    export_corpus(&dir, &corpus).unwrap();
    let out = tmp.path().join("out");
    ingest_corpus(&out, &dir);
    for stage in ["reduce", "topo", "features"] {
        ok(eegtopo(&out, &[stage]));
    }
    let o = eegtopo(&out, &["train"]);
    assert_eq!(failure(&o), (3, "config".into()));
    assert!(stderr(&o).contains("0 BACKGROUND"), "{}", stderr(&o));
}

#[test]
fn model_bytes_fixed_by_seed_and_schema_guarded() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = ok(small_run(&a, 25));
    assert!(stdout(&o).contains("accuracy"), "{}", stdout(&o));
    ok(small_run(&b, 25));
    let model_a = std::fs::read(a.join("model/model.json")).unwrap();
    assert_eq!(model_a, std::fs::read(b.join("model/model.json")).unwrap());

    let mut model = SvmModel::from_json(std::str::from_utf8(&model_a).unwrap(), 40).unwrap();
    model.feature_schema += 1;
    let foreign = tmp.path().join("foreign.json");
    model.save(&foreign).unwrap();
    let o = eegtopo(&a, &["eval", "--model", foreign.to_str().unwrap()]);
    assert_eq!(failure(&o), (5, "unsupported".into()));
    assert!(stderr(&o).contains("schema"));

    let o = eegtopo(&a, &["--set", "feature_schema_version=2", "eval"]);
    assert_eq!(failure(&o).1, "unsupported");
}

#[test]
fn plot_data_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ingest_corpus(&out, &corpus_dir(tmp.path(), 1));
    let m = manifest(&out, Stage::Segments);
    let positive = m.entries.iter().find(|e| e.label == Label::Ied).unwrap();
    let o = ok(eegtopo(&out, &["plot-data", &positive.reference()]));
    assert_eq!(stdout(&o).lines().count(), 2);

    let traj = std::fs::read_to_string(
        out.join("plot")
            .join(format!("{}_trajectory.csv", positive.key)),
    )
    .unwrap();
    let mut lines = traj.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("t,x1,x2,x3"));
    assert_eq!(lines.count(), 128);

    let land = std::fs::read_to_string(
        out.join("plot")
            .join(format!("{}_landscape.csv", positive.key)),
    )
    .unwrap();
    let levels: std::collections::BTreeSet<&str> = land
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(levels.into_iter().collect::<Vec<_>>(), vec!["1", "2"]);

    let o = eegtopo(&out, &["plot-data", "nosuch:0"]);
    assert_eq!(failure(&o), (13, "not-found".into()));
}

#[test]
fn print_config_resolves_every_source() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("c.toml");
    std::fs::write(&file, "montage = \"bipolar\"\n[reduce]\nn = 4\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eegtopo"))
        .args([
            "--config",
            file.to_str().unwrap(),
            "--set",
            "svm.folds=7",
            "--print-config",
            "reduce",
            "-m",
            "1",
        ])
        .env("EEGTOPO_OUT", "/tmp/from-env")
        .output()
        .unwrap();
    let text = stdout(&ok(o));
    let c: eegtopo_cli::config::PipelineConfig = toml::from_str(&text).unwrap();
    assert_eq!(c.montage, "bipolar");
    assert_eq!((c.reduce.n, c.reduce.m), (4, 1));
    assert_eq!(c.svm.folds, 7);
    assert_eq!(c.output, "/tmp/from-env");
    assert_eq!(c.window_seconds, 1.0);
    assert!(text.contains("max_length = inf"));

    let o = Command::new(env!("CARGO_BIN_EXE_eegtopo"))
        .args(["--out", "/tmp/flag", "--print-config"])
        .env("EEGTOPO_OUT", "/tmp/from-env")
        .output()
        .unwrap();
    assert!(stdout(&ok(o)).contains("output = \"/tmp/flag\""));
}

#[test]
fn config_errors_exit_with_category() {
    let tmp = tempfile::tempdir().unwrap();
    let o = eegtopo(tmp.path(), &["--set", "svm.folds=1", "train"]);
    assert_eq!(failure(&o), (3, "config".into()));
    let o = eegtopo(tmp.path(), &["--set", "colour=1", "train"]);
    assert_eq!(failure(&o).1, "config");
    let o = eegtopo(tmp.path(), &["reduce"]);
    assert_eq!(failure(&o), (13, "not-found".into()));
    assert!(stderr(&o).contains("eegtopo ingest"));
}
