//! Stage manifests, content hashes and the work-directory lock.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const LOCK_FILE: &str = ".lock";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Canonical hash of a serializable value (its compact JSON form).
pub fn value_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("config values serialize"))
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn file_hash(path: &Path) -> Result<String, PipelineError> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}

/// Hash of a directory tree: every file's relative path and content hash,
/// in sorted order.
pub fn dir_hash(root: &Path) -> Result<String, PipelineError> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, String)>) -> Result<(), PipelineError> {
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.is_dir() {
                walk(&path, root, out)?;
            } else {
                out.push((relative(root, &path), file_hash(&path)?));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, root, &mut files)?;
    files.sort();
    let listing: String = files.iter().map(|(p, h)| format!("{p} {h}\n")).collect();
    Ok(sha256_hex(listing.as_bytes()))
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Run record of one stage. Contains no timestamps so identical runs write
/// identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub stage: String,
    /// Hash of the config slice the stage depends on.
    pub config_hash: String,
    pub seed: Option<u64>,
    /// Stage-specific facts (horizon, split boundary, counts).
    pub params: serde_json::Value,
    /// Input name to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to the work directory) to content hash.
    pub outputs: BTreeMap<String, String>,
}

/// Stage artifacts under one work directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn manifest_path(&self, stage: &str) -> PathBuf {
        self.stage_dir(stage).join(MANIFEST_FILE)
    }

    pub fn relative(&self, path: &Path) -> String {
        relative(&self.root, path)
    }

    /// Read a stage manifest and check that its outputs are intact and that
    /// it was produced under `expected_config_hash`.
    pub fn require(&self, stage: &'static str, expected_config_hash: &str) -> Result<Manifest, PipelineError> {
        let path = self.manifest_path(stage);
        if !path.exists() {
            return Err(PipelineError::MissingUpstreamArtifact {
                step: stage,
                path,
            });
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::ConfigConflict {
            step: stage,
            detail: format!("unreadable manifest {}: {e}", path.display()),
        })?;
        if manifest.config_hash != expected_config_hash {
            return Err(PipelineError::ConfigConflict {
                step: stage,
                detail: "the step ran under a different configuration; rerun it".into(),
            });
        }
        for (rel, hash) in &manifest.outputs {
            let p = self.root.join(rel);
            if !p.exists() {
                return Err(PipelineError::MissingUpstreamArtifact { step: stage, path: p });
            }
            let actual = if p.is_dir() { dir_hash(&p)? } else { file_hash(&p)? };
            if &actual != hash {
                return Err(PipelineError::ConfigConflict {
                    step: stage,
                    detail: format!("{rel} changed since the step ran"),
                });
            }
        }
        Ok(manifest)
    }

    /// Hash of a manifest file as written.
    pub fn manifest_hash(&self, stage: &str) -> Result<String, PipelineError> {
        file_hash(&self.manifest_path(stage))
    }

    /// Take the work-directory lock for the lifetime of the guard.
    pub fn lock(&self) -> Result<LockGuard, PipelineError> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.root.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Collects a stage's outputs while they are written, then emits the
/// manifest.
#[derive(Debug)]
pub struct StageWriter<'a> {
    ws: &'a Workspace,
    stage: &'static str,
    outputs: BTreeMap<String, String>,
}

impl<'a> StageWriter<'a> {
    /// Start a stage, clearing its previous artifacts.
    pub fn begin(ws: &'a Workspace, stage: &'static str) -> Result<Self, PipelineError> {
        let dir = ws.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            ws,
            stage,
            outputs: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> PathBuf {
        self.ws.stage_dir(self.stage)
    }

    /// Write one file under the stage directory (`name` may contain `/`).
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let path = self.dir().join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.outputs.insert(self.ws.relative(&path), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Record an output produced elsewhere (a file or a directory tree).
    pub fn record(&mut self, path: &Path) -> Result<(), PipelineError> {
        let hash = if path.is_dir() { dir_hash(path)? } else { file_hash(path)? };
        self.outputs.insert(self.ws.relative(path), hash);
        Ok(())
    }

    pub fn finish(
        self,
        config_hash: String,
        seed: Option<u64>,
        params: serde_json::Value,
        inputs: BTreeMap<String, String>,
    ) -> Result<Manifest, PipelineError> {
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            stage: self.stage.to_string(),
            config_hash,
            seed,
            params,
            inputs,
            outputs: self.outputs,
        };
        let path = self.ws.manifest_path(self.stage);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(manifest)
    }
}
