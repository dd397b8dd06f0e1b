//! Binary checkpoint format for trained models.
//!
//! Layout: 8-byte magic `SSCKPT1\n`, u64 little-endian JSON header length,
//! the JSON header, then each parameter's values as raw little-endian f64,
//! in header order. The header records the model configuration, parameter
//! metadata, the embedding vocabulary, and a SHA-256 digest of the
//! embedding table so predictions refuse to run against different vectors.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sentisarc_core::layers::EmbeddingTable;
use sentisarc_core::models::{Model, ModelConfig};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SSCKPT1\n";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub model_config: ModelConfig,
    pub params: Vec<ParamMeta>,
    /// Tokens covered by the embedding table used at training time.
    pub vocab: Vec<String>,
    /// SHA-256 over the table contents, hex-encoded; see [`vocab_hash`].
    pub vocab_sha256: String,
}

/// SHA-256 over the embedding table: for each entry in sorted token order,
/// the token bytes, a 0 separator, then each row value as little-endian f64.
pub fn vocab_hash(table: &EmbeddingTable) -> String {
    let mut hasher = Sha256::new();
    for (token, row) in table.iter() {
        hasher.update(token.as_bytes());
        hasher.update([0u8]);
        for v in row {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

pub fn save(path: &Path, model: &Model, table: &EmbeddingTable) -> Result<()> {
    let header = Header {
        model_config: model.config.clone(),
        params: model
            .params
            .iter()
            .map(|(_, p)| ParamMeta { name: p.name.clone(), shape: p.shape.clone() })
            .collect(),
        vocab: table.iter().map(|(t, _)| t.to_string()).collect(),
        vocab_sha256: vocab_hash(table),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let io = |e| Error::io(path, e);
    file.write_all(MAGIC).map_err(io)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes()).map_err(io)?;
    file.write_all(&header_bytes).map_err(io)?;
    for (_, p) in model.params.iter() {
        let mut buf = Vec::with_capacity(p.values.len() * 8);
        for v in &p.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

/// Restore a model from a checkpoint. The rebuilt model's parameters are
/// bitwise identical to the saved ones.
pub fn load(path: &Path) -> Result<(Model, Header)> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic {:?}, not a checkpoint file",
            path.display(),
            magic
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut model = Model::build(header.model_config.clone())?;
    if model.params.len() != header.params.len() {
        return Err(Error::Checkpoint(format!(
            "{}: header lists {} parameters, model has {}",
            path.display(),
            header.params.len(),
            model.params.len()
        )));
    }
    let ids: Vec<_> = model.params.iter().map(|(id, _)| id).collect();
    for (id, meta) in ids.into_iter().zip(&header.params) {
        let param = model.params.get_mut(id);
        if param.name != meta.name || param.shape != meta.shape {
            return Err(Error::Checkpoint(format!(
                "{}: parameter mismatch: saved {} {:?}, model expects {} {:?}",
                path.display(),
                meta.name,
                meta.shape,
                param.name,
                param.shape
            )));
        }
        let n = meta.shape.iter().product::<usize>();
        let mut buf = vec![0u8; n * 8];
        file.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        for (i, chunk) in buf.chunks_exact(8).enumerate() {
            param.values[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    let mut trailing = [0u8; 1];
    match file.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Checkpoint(format!(
                "{}: trailing bytes after parameter data",
                path.display()
            )))
        }
        Err(e) => return Err(Error::io(path, e)),
    }
    Ok((model, header))
}

/// Error unless `table` hashes to the digest recorded at save time.
pub fn verify_vocab(header: &Header, table: &EmbeddingTable) -> Result<()> {
    let actual = vocab_hash(table);
    if actual != header.vocab_sha256 {
        return Err(Error::VocabMismatch(format!(
            "embedding table hash {actual} does not match checkpoint {}",
            header.vocab_sha256
        )));
    }
    Ok(())
}
