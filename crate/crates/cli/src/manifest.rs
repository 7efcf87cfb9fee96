//! Run manifests written beside every command's outputs.
//!
//! `<command>.manifest.json` depends only on the config, the inputs and the
//! seeds, so re-running a command reproduces it byte for byte. Wall-clock
//! figures go to `<command>.timings.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use squeeze3d::fingerprint::{sha256_hex, Fingerprint};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the artifact root when the file lies inside it.
    pub path: String,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fingerprint: Option<Fingerprint>,
}

impl Artifact {
    pub fn of_file(
        root: &Path,
        path: &Path,
        fingerprint: Option<Fingerprint>,
    ) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: display_path(root, path),
            sha256: sha256_hex(&bytes),
            fingerprint,
        })
    }

    /// Every regular file directly inside `dir`, sorted by name.
    pub fn of_dir(
        root: &Path,
        dir: &Path,
        fingerprint: Option<Fingerprint>,
    ) -> Result<Vec<Self>, CliError> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && !is_manifest(p))
            .collect();
        files.sort();
        files
            .iter()
            .map(|p| Self::of_file(root, p, fingerprint))
            .collect()
    }
}

fn is_manifest(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".manifest.json") || n.ends_with(".timings.json"))
}

pub fn display_path(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub compress_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decompress_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub metrics: Value,
    #[serde(skip)]
    pub timings: Timings,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            metrics: Value::Null,
            timings: Timings::default(),
        }
    }

    pub fn manifest_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.manifest.json", self.command))
    }

    pub fn timings_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.timings.json", self.command))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        self.write_to(&self.manifest_path(dir), &self.timings_path(dir))
    }

    /// Writes `<file>.manifest.json` and `<file>.timings.json` next to a
    /// single output file.
    pub fn write_beside(&self, file: &Path) -> Result<(), CliError> {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let dir = file.parent().unwrap_or(Path::new("."));
        self.write_to(
            &dir.join(format!("{name}.manifest.json")),
            &dir.join(format!("{name}.timings.json")),
        )
    }

    fn write_to(&self, manifest: &Path, timings: &Path) -> Result<(), CliError> {
        if self.timings.total_ms < 0.0
            || self.timings.compress_ms.is_some_and(|t| t < 0.0)
            || self.timings.decompress_ms.is_some_and(|t| t < 0.0)
        {
            return Err(CliError::Numeric("negative timing".into()));
        }
        if let Some(dir) = manifest.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(manifest, serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::write(timings, serde_json::to_string_pretty(&self.timings)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
