//! Write-once store of the expensive choices behind a report: the density
//! bandwidth and every nested cross-validation, keyed by a digest of all
//! inputs that affect them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kde::BandwidthSelection;

use super::config::{ModelGrids, SelectionConfig};
use super::{ClassifierChoice, RegressorChoice};

const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub version: u32,
    pub fingerprint: String,
    pub seed: u64,
    pub runs: u64,
    pub ev_level: f64,
    pub selection: SelectionConfig,
    pub model_grids: ModelGrids,
}

impl CacheKey {
    pub fn new(
        fingerprint: &str,
        seed: u64,
        runs: u64,
        ev_level: f64,
        selection: SelectionConfig,
        model_grids: &ModelGrids,
    ) -> Self {
        Self {
            version: CACHE_VERSION,
            fingerprint: fingerprint.to_string(),
            seed,
            runs,
            ev_level,
            selection,
            model_grids: model_grids.clone(),
        }
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("cache key serializes");
        hex::encode(&Sha256::digest(&bytes)[..16])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CachedModels {
    pub key: CacheKey,
    pub bandwidth: Option<BandwidthSelection>,
    pub over_budget: ClassifierChoice,
    pub late: ClassifierChoice,
    pub final_cost: RegressorChoice,
    pub final_duration: RegressorChoice,
}

pub fn cache_path(dir: &Path, key: &CacheKey) -> PathBuf {
    dir.join(format!("models-{}.json", key.digest()))
}

/// Returns the stored entry for `key`, ignoring unreadable or mismatched
/// files.
pub fn load(dir: &Path, key: &CacheKey) -> Option<CachedModels> {
    let path = cache_path(dir, key);
    let text = std::fs::read_to_string(&path).ok()?;
    match serde_json::from_str::<CachedModels>(&text) {
        Ok(entry) if entry.key == *key => Some(entry),
        Ok(_) => {
            log::warn!("{} belongs to a different key; ignoring", path.display());
            None
        }
        Err(e) => {
            log::warn!("ignoring unreadable cache file {}: {e}", path.display());
            None
        }
    }
}

/// Stores `entry` unless a file for its key already exists. The file is
/// written under a temporary name and renamed into place.
pub fn store(dir: &Path, entry: &CachedModels) -> Result<()> {
    let path = cache_path(dir, &entry.key);
    if path.exists() {
        return Ok(());
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let text = serde_json::to_string(entry)?;
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}
