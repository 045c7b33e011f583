//! On-disk store shared by the stage commands.
//!
//! Every stage writes into its own directory under the output directory and
//! finishes with a `manifest.json` naming its config hash and the hash of
//! the stage it was built from. A stage hash covers the stage's own
//! settings and its upstream hash, so it identifies the whole chain.
//! CSV artifacts start with a `# hash=<hash>` line and JSON artifacts carry
//! a `config_hash` field.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use eegtopo::io::Label;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Segments,
    Trajectories,
    Topology,
    Features,
    Model,
    Report,
}

impl Stage {
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Segments => "segments",
            Stage::Trajectories => "trajectories",
            Stage::Topology => "topology",
            Stage::Features => "features",
            Stage::Model => "model",
            Stage::Report => "report",
        }
    }

    pub fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Segments => None,
            Stage::Trajectories => Some(Stage::Segments),
            Stage::Topology => Some(Stage::Trajectories),
            Stage::Features => Some(Stage::Topology),
            Stage::Model => Some(Stage::Features),
            Stage::Report => Some(Stage::Model),
        }
    }

    /// The command that builds this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Segments => "ingest",
            Stage::Trajectories => "reduce",
            Stage::Topology => "topo",
            Stage::Features => "features",
            Stage::Model => "train",
            Stage::Report => "eval",
        }
    }
}

/// One stored segment; every per-segment stage lists the same entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    /// File stem of the segment's artifacts.
    pub key: String,
    pub source_id: String,
    pub start_sample: usize,
    pub label: Label,
    pub rate: f64,
}

impl SegmentEntry {
    /// `source_id:start_sample`.
    pub fn reference(&self) -> String {
        format!("{}:{}", self.source_id, self.start_sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub hash: String,
    pub upstream: Option<String>,
    /// Stage settings the hash was computed from.
    pub settings: serde_json::Value,
    pub entries: Vec<SegmentEntry>,
}

/// First 16 hex digits of the SHA-256 of the canonical JSON text.
pub fn hash_value(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    format!("{digest:x}")[..16].to_string()
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Stage hash of `settings` built on `upstream`.
pub fn stage_hash(stage: Stage, upstream: Option<&str>, settings: &serde_json::Value) -> String {
    hash_value(&serde_json::json!({
        "stage": stage.dir_name(),
        "upstream": upstream,
        "settings": settings,
    }))
}

/// File-system safe segment key.
pub fn segment_key(source_id: &str, start_sample: usize) -> String {
    let safe: String = source_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}_{start_sample}")
}

pub struct Store {
    root: PathBuf,
}

pub enum Plan {
    UpToDate(Manifest),
    Build,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir_name())
    }

    pub fn path(&self, stage: Stage, file: &str) -> PathBuf {
        self.dir(stage).join(file)
    }

    fn read_manifest(&self, stage: Stage) -> CliResult<Option<Manifest>> {
        let path = self.path(stage, "manifest.json");
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    /// Decides whether `stage` must be built for `hash`. An existing stage
    /// with another hash is only replaced under `force`; a stage directory
    /// without a manifest is an interrupted build and is replaced.
    pub fn plan(&self, stage: Stage, hash: &str, force: bool) -> CliResult<Plan> {
        if let Some(m) = self.read_manifest(stage)? {
            if m.hash == hash {
                return Ok(Plan::UpToDate(m));
            }
            if !force {
                return Err(CliError::hash_mismatch(format!(
                    "{} holds {} built with config hash {}, but the current configuration hashes to {hash}; \
                     rerun `eegtopo {}` with --force to replace it",
                    self.dir(stage).display(),
                    stage.dir_name(),
                    m.hash,
                    stage.command()
                )));
            }
        }
        let dir = self.dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Plan::Build)
    }

    pub fn finish(&self, stage: Stage, manifest: &Manifest) -> CliResult<()> {
        write_json(&self.path(stage, "manifest.json"), manifest)
    }

    /// Manifest of `stage` after checking that every stage below it still
    /// matches the hash it was built from.
    pub fn load(&self, stage: Stage) -> CliResult<Manifest> {
        let m = self.read_manifest(stage)?.ok_or_else(|| {
            CliError::not_found(format!(
                "no {} in {}; run `eegtopo {}` first",
                stage.dir_name(),
                self.root.display(),
                stage.command()
            ))
        })?;
        if let Some(up) = stage.upstream() {
            let upstream = self.load(up)?;
            if m.upstream.as_deref() != Some(upstream.hash.as_str()) {
                return Err(CliError::hash_mismatch(format!(
                    "{} were built from {} with hash {}, but the stored {} now have hash {}; \
                     rerun `eegtopo {}` with --force",
                    stage.dir_name(),
                    up.dir_name(),
                    m.upstream.as_deref().unwrap_or("none"),
                    up.dir_name(),
                    upstream.hash,
                    stage.command()
                )));
            }
        }
        Ok(m)
    }
}

pub fn write_tagged(path: &Path, hash: &str, body: &str) -> CliResult<()> {
    let mut text = String::with_capacity(body.len() + 32);
    text.push_str("# hash=");
    text.push_str(hash);
    text.push('\n');
    text.push_str(body);
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn tag_error(path: &Path, found: Option<&str>, hash: &str) -> CliError {
    CliError::hash_mismatch(format!(
        "{} carries hash {}, expected {hash}",
        path.display(),
        found.unwrap_or("none")
    ))
}

/// Text of a tagged file whose tag must equal `hash`.
pub fn read_tagged(path: &Path, hash: &str) -> CliResult<String> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text.lines().next().and_then(|l| l.strip_prefix("# hash="));
    if first != Some(hash) {
        return Err(tag_error(path, first, hash));
    }
    Ok(text)
}

/// Checks only the tag line, for files parsed by a path-based reader.
pub fn check_tag(path: &Path, hash: &str) -> CliResult<()> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| CliError::io(path, e))?;
    let found = line.trim_end().strip_prefix("# hash=");
    if found != Some(hash) {
        return Err(tag_error(path, found, hash));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("store records serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))
}
