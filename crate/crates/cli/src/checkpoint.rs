//! Model persistence: a single versioned JSON container holding the
//! parameters (with their config) and the vocabulary they were trained
//! against. Round trips are byte-identical.

use std::fs;
use std::path::Path;

use remerge_core::neural::ModelParams;
use remerge_core::tokenizer::Vocabulary;
use serde::{Deserialize, Serialize};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub params: ModelParams,
    pub vocab: Vocabulary,
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab: Vocabulary) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            params,
            vocab,
        }
    }
}

pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = serde_json::to_vec(ckpt).expect("checkpoint serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn from_bytes(bytes: &[u8]) -> anyhow::Result<Checkpoint> {
    let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
    if ckpt.version != CHECKPOINT_VERSION {
        anyhow::bail!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        );
    }
    if ckpt.vocab.size() != ckpt.params.config.vocab_size {
        anyhow::bail!(
            "checkpoint vocabulary size {} does not match model config {}",
            ckpt.vocab.size(),
            ckpt.params.config.vocab_size
        );
    }
    Ok(ckpt)
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> anyhow::Result<()> {
    fs::write(path, to_bytes(ckpt))?;
    Ok(())
}

pub fn load(path: &Path) -> anyhow::Result<Checkpoint> {
    let bytes = fs::read(path)
        .map_err(|e| anyhow::anyhow!("cannot read model {}: {e}", path.display()))?;
    from_bytes(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
