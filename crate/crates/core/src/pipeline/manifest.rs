use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    /// Hash over the stage's named inputs and parameters.
    pub input_hash: String,
    pub inputs: BTreeMap<String, String>,
    /// Output file (relative to the run directory) to content hash.
    pub outputs: BTreeMap<String, String>,
    pub seconds: f64,
    /// Set when this run reused the recorded outputs.
    #[serde(default)]
    pub skipped: bool,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn all_done(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Done)
    }

    pub fn all_skipped(&self) -> bool {
        self.stages.iter().all(|s| s.skipped)
    }

    /// Output hashes of every stage, keyed `stage/file`.
    pub fn output_hashes(&self) -> BTreeMap<String, String> {
        self.stages
            .iter()
            .flat_map(|s| s.outputs.iter().map(move |(k, v)| (format!("{}/{k}", s.name), v.clone())))
            .collect()
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        crate::error::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hash_bytes(&bytes))
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    hash_bytes(serde_json::to_string(value).expect("serializable").as_bytes())
}

pub type Diagnostics = BTreeMap<String, Value>;

/// Runs named stages in order inside one output directory, persisting the
/// manifest after each and skipping stages whose inputs and outputs match
/// the previous run.
pub struct StageRunner {
    dir: PathBuf,
    previous: Option<RunManifest>,
    pub manifest: RunManifest,
}

impl StageRunner {
    pub fn new(dir: &Path, command: &str, seed: u64, config_hash: String) -> Result<StageRunner> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        let previous = if path.is_file() {
            RunManifest::load(&path).ok().filter(|m| m.command == command)
        } else {
            None
        };
        Ok(StageRunner {
            dir: dir.to_path_buf(),
            previous,
            manifest: RunManifest {
                command: command.to_string(),
                seed,
                config_hash,
                stages: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Hash of an earlier stage's output in this run.
    pub fn output_hash(&self, stage: &str, file: &str) -> String {
        self.manifest
            .stage(stage)
            .and_then(|s| s.outputs.get(file))
            .cloned()
            .unwrap_or_default()
    }

    fn reusable(&self, name: &str, input_hash: &str) -> Option<StageRecord> {
        let prev = self.previous.as_ref()?.stage(name)?;
        if prev.status != StageStatus::Done || prev.input_hash != input_hash {
            return None;
        }
        for (file, hash) in &prev.outputs {
            match hash_file(&self.dir.join(file)) {
                Ok(h) if &h == hash => {}
                _ => return None,
            }
        }
        Some(prev.clone())
    }

    /// `body` must write exactly the files listed in `outputs`, relative to
    /// the run directory.
    pub fn run(
        &mut self,
        name: &str,
        inputs: BTreeMap<String, String>,
        outputs: &[String],
        body: impl FnOnce(&Path) -> Result<Diagnostics>,
    ) -> Result<()> {
        let mut keyed = inputs.clone();
        keyed.insert("@outputs".into(), outputs.join(","));
        let input_hash = hash_json(&keyed);
        if let Some(mut rec) = self.reusable(name, &input_hash) {
            log::info!("stage {name}: inputs unchanged, skipping");
            rec.skipped = true;
            self.manifest.stages.push(rec);
            return self.persist();
        }
        log::info!("stage {name}: running");
        let start = Instant::now();
        let result = body(&self.dir);
        let seconds = start.elapsed().as_secs_f64();
        let mut rec = StageRecord {
            name: name.to_string(),
            status: StageStatus::Failed,
            input_hash,
            inputs,
            outputs: BTreeMap::new(),
            seconds,
            skipped: false,
            diagnostics: BTreeMap::new(),
            error: None,
        };
        match result {
            Ok(diag) => {
                rec.diagnostics = diag;
                for file in outputs {
                    rec.outputs.insert(file.clone(), hash_file(&self.dir.join(file))?);
                }
                rec.status = StageStatus::Done;
                self.manifest.stages.push(rec);
                self.persist()
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                self.manifest.stages.push(rec);
                self.persist()?;
                Err(Error::Stage {
                    stage: name.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }

    fn persist(&self) -> Result<()> {
        self.manifest.save(&self.dir.join(MANIFEST_FILE))
    }

    pub fn finish(self) -> RunManifest {
        self.manifest
    }
}
