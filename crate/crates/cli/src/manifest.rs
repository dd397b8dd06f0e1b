//! Run manifest: a JSON record written next to each run's outputs so
//! results can be traced back to exact inputs and settings.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sentisarc_core::training::TrainConfig;

use crate::data::{Averaging, Dimensions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub unix_timestamp: u64,
    pub variant: String,
    pub dimensions: Dimensions,
    pub training: TrainConfig,
    pub folds: usize,
    pub averaging: String,
    pub jobs: usize,
    pub corpus_path: String,
    pub corpus_sha256: String,
    pub glove_path: String,
    pub glove_sha256: String,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[allow(clippy::too_many_arguments)]
pub fn build_manifest(
    variant: &str,
    dimensions: &Dimensions,
    training: &TrainConfig,
    folds: usize,
    averaging: Averaging,
    jobs: usize,
    corpus_path: &Path,
    glove_path: &Path,
) -> Result<RunManifest> {
    Ok(RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        unix_timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        variant: variant.to_string(),
        dimensions: dimensions.clone(),
        training: training.clone(),
        folds,
        averaging: averaging.to_string(),
        jobs,
        corpus_path: corpus_path.display().to_string(),
        corpus_sha256: file_sha256(corpus_path)?,
        glove_path: glove_path.display().to_string(),
        glove_sha256: file_sha256(glove_path)?,
    })
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}
