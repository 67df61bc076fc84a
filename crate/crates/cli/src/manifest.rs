//! JSON-lines manifests tying instance ids to files, labels and participants.
//! Paths are stored relative to the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use kinetext::actions::ActionType;
use kinetext::{jsonl, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionRecord {
    pub id: String,
    pub participant: u32,
    pub action_type: ActionType,
    #[serde(default)]
    pub patterns: Vec<u8>,
    pub frames: usize,
    pub sample_rate: f64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub participant: u32,
    pub action_type: ActionType,
    pub frames: usize,
    pub path: String,
}

/// One annotated description: `{"id", "text", "action_type", "patterns"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub id: String,
    pub text: String,
    pub action_type: ActionType,
    #[serde(default)]
    pub patterns: Vec<u8>,
}

/// `{"id", "text"}` for metric inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub id: String,
    pub text: String,
}

pub fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::Validation(format!("{} does not exist", path.display())));
    }
    jsonl::read(path)
}

/// Resolve a manifest-relative path.
pub fn resolve(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}

pub fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("duplicate instance id '{id}'")));
        }
    }
    Ok(())
}
