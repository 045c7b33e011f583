//! The pipeline stages. Each command reads the previous stage from the
//! store, skips itself when its outputs already match the configuration and
//! prints one status line.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use eegtopo::dimred::{Method, Trajectory};
use eegtopo::features::{
    features_from_diagram, FeatureMatrix, FeatureVector, SegmentRef, FEATURE_COUNT,
};
use eegtopo::homology::PersistenceDiagram;
use eegtopo::io::{
    apply_montage, read_csv, read_edf, read_labels, segment, tile, Label, Montage, Recording,
    Segment,
};
use eegtopo::pipeline;
use eegtopo::svm::{
    cross_validate, evaluate, stratified_split, train_svc, CvResult, EvalReport, Kernel, SvmModel,
};
use eegtopo::synth::{export_corpus, make_corpus_with};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Context as _};
use crate::store::{
    check_tag, hash_file, hash_value, read_json, read_tagged, segment_key, stage_hash, write_json,
    write_tagged, Manifest, Plan, SegmentEntry, Stage, Store,
};

pub struct Context {
    pub config: PipelineConfig,
    pub store: Store,
    /// Replace stages built with another configuration.
    pub force: bool,
}

impl Context {
    pub fn new(config: PipelineConfig, force: bool) -> Self {
        let store = Store::new(&config.output);
        Context {
            config,
            store,
            force,
        }
    }
}

/// Train/eval assignment written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub config_hash: String,
    pub train: Vec<String>,
    pub eval: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub config_hash: String,
    #[serde(flatten)]
    pub result: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub config_hash: String,
    pub model_config_hash: Option<String>,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub config_hash: String,
    pub positives: usize,
    pub negatives: usize,
}

fn manifest(
    stage: Stage,
    hash: &str,
    upstream: Option<&str>,
    settings: serde_json::Value,
    entries: Vec<SegmentEntry>,
) -> Manifest {
    Manifest {
        stage: stage.dir_name().into(),
        hash: hash.into(),
        upstream: upstream.map(String::from),
        settings,
        entries,
    }
}

fn up_to_date(command: &str, m: &Manifest) {
    println!(
        "{command}: up to date, {} segments (hash {})",
        m.entries.len(),
        m.hash
    );
}

pub fn kernel_name(k: &Kernel) -> String {
    match k {
        Kernel::Linear => "linear".into(),
        Kernel::Rbf { gamma } => format!("rbf(gamma={gamma})"),
    }
}

fn read_recording(path: &Path, rate: f64) -> eegtopo::Result<Recording> {
    let is_edf = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("edf"));
    if is_edf {
        read_edf(path)
    } else {
        read_csv(path, rate)
    }
}

/// Files named on the command line, with directories expanded to their
/// `.csv` and `.edf` files in name order. Label files are skipped.
fn expand_inputs(inputs: &[String], labels: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let label_path = labels.and_then(|p| p.canonicalize().ok());
    let mut files = Vec::new();
    for input in inputs {
        let path = PathBuf::from(input);
        if path.is_dir() {
            let mut found = Vec::new();
            for entry in std::fs::read_dir(&path).map_err(|e| CliError::io(&path, e))? {
                let p = entry.map_err(|e| CliError::io(&path, e))?.path();
                let ext = p
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(str::to_ascii_lowercase);
                let is_label_file = p.file_name().is_some_and(|n| n == "labels.csv")
                    || (label_path.is_some() && p.canonicalize().ok() == label_path);
                if matches!(ext.as_deref(), Some("csv" | "edf")) && !is_label_file {
                    found.push(p);
                }
            }
            found.sort();
            files.extend(found);
        } else if path.exists() {
            files.push(path);
        } else {
            return Err(CliError::not_found(format!("input {input} does not exist")));
        }
    }
    Ok(files)
}

fn resolve_montage(spec: &str) -> CliResult<(Option<Montage>, serde_json::Value)> {
    if spec == "none" {
        return Ok((None, serde_json::Value::Null));
    }
    if let Some(m) = Montage::builtin(spec) {
        return Ok((Some(m), json!(spec)));
    }
    let path = Path::new(spec);
    let m = Montage::from_file(path).context(format!("montage {spec}"))?;
    Ok((Some(m), json!({ "file_sha256": hash_file(path)? })))
}

fn segment_csv(seg: &Segment) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&seg.channels).expect("in-memory write");
    for col in seg.data.column_iter() {
        w.write_record(col.iter().map(|v| v.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn load_segment(store: &Store, hash: &str, e: &SegmentEntry) -> CliResult<Segment> {
    let path = store.path(Stage::Segments, &format!("{}.csv", e.key));
    check_tag(&path, hash)?;
    let (channels, data, rate) = read_csv(&path, e.rate)?.into_parts();
    Ok(Segment {
        source_id: e.source_id.clone(),
        start_sample: e.start_sample,
        channels,
        data,
        rate,
        label: e.label,
    })
}

pub fn ingest(ctx: &Context, inputs: &[String], labels: Option<&str>) -> CliResult<Manifest> {
    let cfg = &ctx.config;
    let inputs = if inputs.is_empty() {
        cfg.inputs.clone()
    } else {
        inputs.to_vec()
    };
    let labels = labels.unwrap_or(&cfg.labels);
    let label_path = (!labels.is_empty()).then(|| Path::new(labels));
    let files = expand_inputs(&inputs, label_path)?;
    if files.is_empty() {
        return Err(CliError::config(
            "no input recordings; pass files to `eegtopo ingest` or set `inputs` in the config",
        ));
    }
    let mut sources: Vec<(String, PathBuf)> = Vec::new();
    for f in files {
        let id = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some((_, other)) = sources.iter().find(|(s, _)| *s == id) {
            return Err(CliError::config(format!(
                "{} and {} share the source id {id:?}",
                other.display(),
                f.display()
            )));
        }
        sources.push((id, f));
    }
    let (montage, montage_desc) = resolve_montage(&cfg.montage)?;

    let file_hashes = sources
        .par_iter()
        .map(|(id, p)| Ok(json!({ "source_id": id, "sha256": hash_file(p)? })))
        .collect::<CliResult<Vec<_>>>()?;
    let settings = json!({
        "inputs": file_hashes,
        "labels": label_path.map(hash_file).transpose()?,
        "input_rate": cfg.input_rate,
        "montage": montage_desc,
        "window_seconds": cfg.window_seconds,
    });
    let hash = stage_hash(Stage::Segments, None, &settings);
    if let Plan::UpToDate(m) = ctx.store.plan(Stage::Segments, &hash, ctx.force)? {
        up_to_date("ingest", &m);
        return Ok(m);
    }

    let by_source = match label_path {
        Some(p) => {
            let mut map: BTreeMap<String, Vec<(usize, Label)>> = BTreeMap::new();
            for e in read_labels(p)? {
                if !sources.iter().any(|(s, _)| *s == e.source_id) {
                    return Err(CliError::config(format!(
                        "{} labels source {:?}, which is not among the inputs",
                        p.display(),
                        e.source_id
                    )));
                }
                map.entry(e.source_id)
                    .or_default()
                    .push((e.start_sample, e.label));
            }
            Some(map)
        }
        None => None,
    };

    let per_file = sources
        .par_iter()
        .map(|(id, path)| -> CliResult<Vec<Segment>> {
            let rec = read_recording(path, cfg.input_rate).context(path.display())?;
            let rec = match &montage {
                Some(m) => apply_montage(&rec, m).context(path.display())?,
                None => rec,
            };
            match &by_source {
                Some(map) => segment(&rec, id, cfg.window_seconds, map.get(id).map_or(&[], |v| v)),
                None => tile(&rec, id, cfg.window_seconds),
            }
            .context(path.display())
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut segments: Vec<Segment> = per_file.into_iter().flatten().collect();
    segments.sort_by(|a, b| (&a.source_id, a.start_sample).cmp(&(&b.source_id, b.start_sample)));

    let entries: Vec<SegmentEntry> = segments
        .iter()
        .map(|s| SegmentEntry {
            key: segment_key(&s.source_id, s.start_sample),
            source_id: s.source_id.clone(),
            start_sample: s.start_sample,
            label: s.label,
            rate: s.rate,
        })
        .collect();
    let mut keys: Vec<&str> = entries.iter().map(|e| e.key.as_str()).collect();
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::config(format!(
            "two segments map to the key {:?}",
            w[0]
        )));
    }
    segments.par_iter().zip(&entries).try_for_each(|(s, e)| {
        write_tagged(
            &ctx.store.path(Stage::Segments, &format!("{}.csv", e.key)),
            &hash,
            &segment_csv(s),
        )
    })?;
    let m = manifest(Stage::Segments, &hash, None, settings, entries);
    ctx.store.finish(Stage::Segments, &m)?;
    println!(
        "ingest: {} segments from {} recordings -> {} (hash {hash})",
        m.entries.len(),
        sources.len(),
        ctx.store.dir(Stage::Segments).display()
    );
    Ok(m)
}

fn reduce_settings(cfg: &PipelineConfig) -> serde_json::Value {
    let r = &cfg.reduce;
    match r.method {
        Method::Dyca => {
            json!({ "method": r.method, "n": r.n, "m": r.m, "eig_threshold": r.eig_threshold })
        }
        Method::Pca => json!({ "method": r.method, "n": r.n }),
    }
}

fn topo_settings(cfg: &PipelineConfig) -> serde_json::Value {
    let t = &cfg.topo;
    json!({
        "max_length": t.max_length.is_finite().then_some(t.max_length),
        "levels": t.levels,
    })
}

fn eigenvalue_csv(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{v}\n", i + 1));
    }
    out
}

pub fn reduce(ctx: &Context) -> CliResult<Manifest> {
    let upstream = ctx.store.load(Stage::Segments)?;
    let settings = reduce_settings(&ctx.config);
    let hash = stage_hash(Stage::Trajectories, Some(&upstream.hash), &settings);
    if let Plan::UpToDate(m) = ctx.store.plan(Stage::Trajectories, &hash, ctx.force)? {
        up_to_date("reduce", &m);
        return Ok(m);
    }
    let opts = ctx.config.reduce_options();
    upstream
        .entries
        .par_iter()
        .try_for_each(|e| -> CliResult<()> {
            let seg = load_segment(&ctx.store, &upstream.hash, e)?;
            let r = pipeline::reduce(&seg.data, seg.rate, &opts)
                .context(format!("segment {}", e.reference()))?;
            write_tagged(
                &ctx.store
                    .path(Stage::Trajectories, &format!("{}.csv", e.key)),
                &hash,
                &r.trajectory.to_csv(),
            )?;
            write_tagged(
                &ctx.store
                    .path(Stage::Trajectories, &format!("{}.eigenvalues.csv", e.key)),
                &hash,
                &eigenvalue_csv(&r.eigenvalues),
            )
        })?;
    let m = manifest(
        Stage::Trajectories,
        &hash,
        Some(&upstream.hash),
        settings,
        upstream.entries,
    );
    ctx.store.finish(Stage::Trajectories, &m)?;
    println!(
        "reduce: {} trajectories ({:?}, n = {}) -> {} (hash {hash})",
        m.entries.len(),
        opts.method,
        opts.n,
        ctx.store.dir(Stage::Trajectories).display()
    );
    Ok(m)
}

pub fn topo(ctx: &Context) -> CliResult<Manifest> {
    let upstream = ctx.store.load(Stage::Trajectories)?;
    let settings = topo_settings(&ctx.config);
    let hash = stage_hash(Stage::Topology, Some(&upstream.hash), &settings);
    if let Plan::UpToDate(m) = ctx.store.plan(Stage::Topology, &hash, ctx.force)? {
        up_to_date("topo", &m);
        return Ok(m);
    }
    let method: Method = serde_json::from_value(upstream.settings["method"].clone())
        .map_err(|e| CliError::new("parse", format!("trajectories manifest: {e}")))?;
    let opts = ctx.config.topo_options();
    upstream
        .entries
        .par_iter()
        .try_for_each(|e| -> CliResult<()> {
            let path = ctx
                .store
                .path(Stage::Trajectories, &format!("{}.csv", e.key));
            let text = read_tagged(&path, &upstream.hash)?;
            let traj = Trajectory::from_csv(&text, method, e.rate).context(path.display())?;
            let t =
                pipeline::topology(&traj, &opts).context(format!("segment {}", e.reference()))?;
            let file = |suffix: &str| {
                ctx.store
                    .path(Stage::Topology, &format!("{}.{suffix}", e.key))
            };
            write_tagged(&file("diagram.csv"), &hash, &t.diagram.to_csv())?;
            for (dim, ls) in t.landscapes.iter().enumerate() {
                write_tagged(&file(&format!("h{dim}.landscape.csv")), &hash, &ls.to_csv())?;
            }
            Ok(())
        })?;
    let m = manifest(
        Stage::Topology,
        &hash,
        Some(&upstream.hash),
        settings,
        upstream.entries,
    );
    ctx.store.finish(Stage::Topology, &m)?;
    println!(
        "topo: {} diagrams and landscapes -> {} (hash {hash})",
        m.entries.len(),
        ctx.store.dir(Stage::Topology).display()
    );
    Ok(m)
}

pub fn features(ctx: &Context) -> CliResult<Manifest> {
    let upstream = ctx.store.load(Stage::Topology)?;
    let settings = json!({ "schema": ctx.config.feature_schema_version });
    let hash = stage_hash(Stage::Features, Some(&upstream.hash), &settings);
    if let Plan::UpToDate(m) = ctx.store.plan(Stage::Features, &hash, ctx.force)? {
        up_to_date("features", &m);
        return Ok(m);
    }
    let rows = upstream
        .entries
        .par_iter()
        .map(|e| -> CliResult<FeatureVector> {
            let path = ctx
                .store
                .path(Stage::Topology, &format!("{}.diagram.csv", e.key));
            let diagram = PersistenceDiagram::from_csv(&read_tagged(&path, &upstream.hash)?)
                .context(path.display())?;
            let mut fv = features_from_diagram(&diagram);
            fv.segment = Some(SegmentRef {
                source_id: e.source_id.clone(),
                start_sample: e.start_sample,
            });
            fv.label = e.label;
            Ok(fv)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let fm = FeatureMatrix { rows };
    write_tagged(
        &ctx.store.path(Stage::Features, "features.csv"),
        &hash,
        &fm.to_csv(),
    )?;
    let m = manifest(
        Stage::Features,
        &hash,
        Some(&upstream.hash),
        settings,
        upstream.entries,
    );
    ctx.store.finish(Stage::Features, &m)?;
    println!(
        "features: {} x {FEATURE_COUNT} feature matrix -> {} (hash {hash})",
        fm.len(),
        ctx.store.path(Stage::Features, "features.csv").display()
    );
    Ok(m)
}

fn load_features(store: &Store, hash: &str) -> CliResult<FeatureMatrix> {
    let path = store.path(Stage::Features, "features.csv");
    FeatureMatrix::from_csv(&read_tagged(&path, hash)?).context(path.display())
}

fn reference(fv: &FeatureVector) -> String {
    fv.segment
        .as_ref()
        .map(ToString::to_string)
        .unwrap_or_default()
}

fn select(fm: &FeatureMatrix, idx: &[usize]) -> (DMatrix<f64>, Vec<Label>) {
    let x = DMatrix::from_fn(idx.len(), FEATURE_COUNT, |r, c| fm.rows[idx[r]].values[c]);
    (x, idx.iter().map(|&i| fm.rows[i].label).collect())
}

pub fn train(ctx: &Context) -> CliResult<Manifest> {
    let cfg = &ctx.config;
    let upstream = ctx.store.load(Stage::Features)?;
    let settings = json!({ "svm": cfg.svm, "seed": cfg.seed });
    let hash = stage_hash(Stage::Model, Some(&upstream.hash), &settings);
    if let Plan::UpToDate(m) = ctx.store.plan(Stage::Model, &hash, ctx.force)? {
        println!("train: up to date (hash {})", m.hash);
        return Ok(m);
    }
    let fm = load_features(&ctx.store, &upstream.hash)?;
    let labeled: Vec<usize> = (0..fm.len())
        .filter(|&i| fm.rows[i].label != Label::Unlabeled)
        .collect();
    let count = |l: Label| labeled.iter().filter(|&&i| fm.rows[i].label == l).count();
    let (n_ied, n_bg) = (count(Label::Ied), count(Label::Background));
    if n_ied == 0 || n_bg == 0 {
        return Err(CliError::config(format!(
            "training needs IED and BACKGROUND segments; the feature matrix has {n_ied} IED, {n_bg} BACKGROUND and {} unlabeled rows",
            fm.len() - labeled.len()
        )));
    }
    let y_all: Vec<Label> = labeled.iter().map(|&i| fm.rows[i].label).collect();
    let (train_pos, eval_pos) = stratified_split(&y_all, cfg.svm.eval_fraction, cfg.seed)?;
    let train_idx: Vec<usize> = train_pos.iter().map(|&p| labeled[p]).collect();
    let eval_idx: Vec<usize> = eval_pos.iter().map(|&p| labeled[p]).collect();
    let (x, y) = select(&fm, &train_idx);

    let opts = cfg.train_options();
    let grid = cfg.grid(&x)?;
    let cv = cross_validate(&x, &y, &grid, cfg.svm.folds, cfg.seed, &opts)?;
    let best = cv
        .cells
        .iter()
        .find(|c| c.cell == cv.best)
        .expect("best cell is in the grid");
    let mut model = train_svc(&x, &y, cv.best.kernel, cv.best.c, &opts)?;
    model.config_hash = Some(hash.clone());

    let refs = |idx: &[usize]| idx.iter().map(|&i| reference(&fm.rows[i])).collect();
    write_json(
        &ctx.store.path(Stage::Model, "split.json"),
        &SplitRecord {
            config_hash: hash.clone(),
            train: refs(&train_idx),
            eval: refs(&eval_idx),
        },
    )?;
    let mean_accuracy = best.mean_accuracy;
    write_json(
        &ctx.store.path(Stage::Model, "cv.json"),
        &CvRecord {
            config_hash: hash.clone(),
            result: cv.clone(),
        },
    )?;
    model.save(ctx.store.path(Stage::Model, "model.json"))?;
    let m = manifest(
        Stage::Model,
        &hash,
        Some(&upstream.hash),
        settings,
        Vec::new(),
    );
    ctx.store.finish(Stage::Model, &m)?;
    if !model.converged {
        eprintln!(
            "warning: the final model stopped at the iteration cap (KKT gap {:.3e})",
            model.kkt_gap
        );
    }
    println!(
        "train: best {} C = {} with cross-validated accuracy {mean_accuracy:.4} on {} rows; {} rows held out -> {} (hash {hash})",
        kernel_name(&cv.best.kernel),
        cv.best.c,
        train_idx.len(),
        eval_idx.len(),
        ctx.store.path(Stage::Model, "model.json").display()
    );
    Ok(m)
}

pub fn eval(ctx: &Context, model_path: Option<&Path>) -> CliResult<ReportRecord> {
    let cfg = &ctx.config;
    let upstream = ctx.store.load(Stage::Model)?;
    let features = ctx.store.load(Stage::Features)?;
    let path = model_path.map_or_else(
        || ctx.store.path(Stage::Model, "model.json"),
        Path::to_path_buf,
    );
    let model = SvmModel::load(&path, FEATURE_COUNT).context(path.display())?;
    if model.feature_schema != cfg.feature_schema_version {
        return Err(CliError::new(
            "unsupported",
            format!(
                "{} was trained on feature schema version {}, but the features use version {}",
                path.display(),
                model.feature_schema,
                cfg.feature_schema_version
            ),
        ));
    }
    if model.config_hash.as_deref() != Some(upstream.hash.as_str()) && !ctx.force {
        return Err(CliError::hash_mismatch(format!(
            "{} carries config hash {}, but the stored model stage has hash {}; pass --force to evaluate it anyway",
            path.display(),
            model.config_hash.as_deref().unwrap_or("none"),
            upstream.hash
        )));
    }
    let settings = json!({ "model_sha256": hash_file(&path)? });
    let hash = stage_hash(Stage::Report, Some(&upstream.hash), &settings);
    let report_path = ctx.store.path(Stage::Report, "report.json");
    if let Plan::UpToDate(_) = ctx.store.plan(Stage::Report, &hash, ctx.force)? {
        let record: ReportRecord = read_json(&report_path)?;
        println!("eval: up to date (hash {hash})");
        print!("{}", record.report.summary());
        return Ok(record);
    }

    let split: SplitRecord = read_json(&ctx.store.path(Stage::Model, "split.json"))?;
    if split.config_hash != upstream.hash {
        return Err(CliError::hash_mismatch(format!(
            "split.json has hash {}, expected {}",
            split.config_hash, upstream.hash
        )));
    }
    let cv: CvRecord = read_json(&ctx.store.path(Stage::Model, "cv.json"))?;
    let fm = load_features(&ctx.store, &features.hash)?;
    let index: HashMap<String, usize> =
        (0..fm.len()).map(|i| (reference(&fm.rows[i]), i)).collect();
    let idx = split
        .eval
        .iter()
        .map(|r| {
            index.get(r).copied().ok_or_else(|| {
                CliError::not_found(format!(
                    "evaluation segment {r} is not in the feature matrix"
                ))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (x, y) = select(&fm, &idx);
    let mut report = evaluate(&model, &x, &y)?;
    report.fold_accuracies = cv
        .result
        .cells
        .iter()
        .find(|c| c.cell == cv.result.best)
        .map(|c| c.fold_accuracies.clone())
        .unwrap_or_default();
    let record = ReportRecord {
        config_hash: hash.clone(),
        model_config_hash: model.config_hash.clone(),
        report,
    };
    write_json(&report_path, &record)?;
    write_tagged(
        &ctx.store.path(Stage::Report, "report.txt"),
        &hash,
        &record.report.summary(),
    )?;
    let m = manifest(
        Stage::Report,
        &hash,
        Some(&upstream.hash),
        settings,
        Vec::new(),
    );
    ctx.store.finish(Stage::Report, &m)?;
    println!(
        "eval: {} held-out segments -> {} (hash {hash})",
        record.report.total,
        report_path.display()
    );
    print!("{}", record.report.summary());
    Ok(record)
}

/// Writes the trajectory and the H1 landscape of one stored segment.
pub fn plot_data(
    ctx: &Context,
    reference: &str,
    dir: Option<&Path>,
) -> CliResult<(PathBuf, PathBuf)> {
    let segments = ctx.store.load(Stage::Segments)?;
    let entry = segments
        .entries
        .iter()
        .find(|e| e.reference() == reference || e.key == reference)
        .ok_or_else(|| {
            CliError::not_found(format!(
                "no segment {reference:?} in {}",
                ctx.store.dir(Stage::Segments).display()
            ))
        })?;
    let seg = load_segment(&ctx.store, &segments.hash, entry)?;
    let analysis = pipeline::analyze_segment(
        &seg,
        &ctx.config.reduce_options(),
        &ctx.config.topo_options(),
    )
    .context(format!("segment {reference}"))?;
    let hash = hash_value(&json!({
        "stage": "plot",
        "upstream": segments.hash,
        "reduce": reduce_settings(&ctx.config),
        "topo": topo_settings(&ctx.config),
    }));
    let dir = dir.map_or_else(|| ctx.store.root().join("plot"), Path::to_path_buf);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let traj_path = dir.join(format!("{}_trajectory.csv", entry.key));
    let land_path = dir.join(format!("{}_landscape.csv", entry.key));
    write_tagged(&traj_path, &hash, &analysis.reduction.trajectory.to_csv())?;
    write_tagged(&land_path, &hash, &analysis.topology.landscapes[1].to_csv())?;
    println!("plot-data: {}", traj_path.display());
    println!("plot-data: {}", land_path.display());
    Ok((traj_path, land_path))
}

/// Generates the labeled demo corpus as CSV recordings plus `labels.csv`.
pub fn synth(ctx: &Context, dir: Option<&Path>) -> CliResult<PathBuf> {
    let cfg = &ctx.config;
    let dir = dir.map_or_else(|| ctx.store.root().join("corpus"), Path::to_path_buf);
    let hash = hash_value(&json!({ "stage": "synth", "synth": cfg.synth, "seed": cfg.seed }));
    let record_path = dir.join("synth.json");
    if record_path.exists() {
        let old: SynthRecord = read_json(&record_path)?;
        if old.config_hash == hash {
            println!(
                "synth: up to date, {} segments in {} (hash {hash})",
                old.positives + old.negatives,
                dir.display()
            );
            return Ok(dir);
        }
        if !ctx.force {
            return Err(CliError::hash_mismatch(format!(
                "{} holds a corpus with config hash {}, but the current configuration hashes to {hash}; \
                 rerun with --force to replace it",
                dir.display(),
                old.config_hash
            )));
        }
        std::fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    }
    let (pos, neg) = (cfg.synth.positives, cfg.synth.negatives);
    let segments = make_corpus_with(&cfg.corpus_spec(), pos, neg, cfg.seed)?;
    export_corpus(&dir, &segments)?;
    write_json(
        &record_path,
        &SynthRecord {
            config_hash: hash.clone(),
            positives: pos,
            negatives: neg,
        },
    )?;
    println!(
        "synth: {} segments ({pos} IED, {neg} BACKGROUND) -> {} (hash {hash})",
        segments.len(),
        dir.display()
    );
    Ok(dir)
}

/// Every stage in order. Without configured inputs the synthetic corpus is
/// generated into `<output>/corpus` and ingested.
pub fn run_all(ctx: &Context) -> CliResult<ReportRecord> {
    if ctx.config.inputs.is_empty() {
        let dir = synth(ctx, None)?;
        let labels = dir.join("labels.csv");
        ingest(
            ctx,
            &[dir.to_string_lossy().into_owned()],
            Some(&labels.to_string_lossy()),
        )?;
    } else {
        ingest(ctx, &[], None)?;
    }
    reduce(ctx)?;
    topo(ctx)?;
    features(ctx)?;
    train(ctx)?;
    eval(ctx, None)
}
