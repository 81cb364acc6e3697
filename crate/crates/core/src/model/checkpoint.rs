use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Model, ModelConfig, ModelError, ModelParams};
use crate::ingest::Vocabulary;
use crate::nncore::Parameters;

const MAGIC: &[u8; 4] = b"CRDL";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    code_vocab_sha256: String,
    desc_vocab_sha256: String,
}

/// A model whose parameters are exactly representable in f32, tied to the
/// two vocabularies it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    model: Model,
    code_vocab_sha256: String,
    desc_vocab_sha256: String,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::BadCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    /// Parameters are rounded to f32, the stored precision, so that a
    /// loaded checkpoint encodes exactly like this one.
    pub fn new(model: Model, code_vocab: &Vocabulary, desc_vocab: &Vocabulary) -> Self {
        Self::with_hashes(model, code_vocab.fingerprint(), desc_vocab.fingerprint())
    }

    pub fn with_hashes(mut model: Model, code_vocab_sha256: String, desc_vocab_sha256: String) -> Self {
        model.params.round_to_f32();
        Checkpoint { model, code_vocab_sha256, desc_vocab_sha256 }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn vocab_hashes(&self) -> (&str, &str) {
        (&self.code_vocab_sha256, &self.desc_vocab_sha256)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.model.config,
            code_vocab_sha256: self.code_vocab_sha256.clone(),
            desc_vocab_sha256: self.desc_vocab_sha256.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let tensors = self.model.params.tensors();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in &tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Parse without checking vocabularies.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ModelError::BadCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::BadCheckpoint(format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(n)?).map_err(|e| ModelError::BadCheckpoint(format!("header: {e}")))?;
        header.config.validate()?;
        let mut params = ModelParams::zeros(&header.config);
        let count = r.u32()? as usize;
        let mut slots = params.tensors_mut();
        if count != slots.len() {
            return Err(ModelError::BadCheckpoint(format!("expected {} tensors, found {count}", slots.len())));
        }
        for (want, slot) in slots.iter_mut() {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|_| ModelError::BadCheckpoint("tensor name".into()))?;
            if name != want {
                return Err(ModelError::BadCheckpoint(format!("expected tensor {want}, found {name}")));
            }
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            if dims != slot.shape() {
                return Err(ModelError::BadCheckpoint(format!("{name}: shape {dims:?}, expected {:?}", slot.shape())));
            }
            let payload = r.take(4 * slot.len())?;
            for (v, chunk) in slot.iter_mut().zip(payload.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
            }
        }
        drop(slots);
        if r.pos != bytes.len() {
            return Err(ModelError::BadCheckpoint("trailing bytes".into()));
        }
        if !params.all_finite() {
            return Err(ModelError::BadCheckpoint("non-finite parameter".into()));
        }
        Ok(Checkpoint {
            model: Model { config: header.config, params },
            code_vocab_sha256: header.code_vocab_sha256,
            desc_vocab_sha256: header.desc_vocab_sha256,
        })
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn verify_vocabularies(&self, code_vocab: &Vocabulary, desc_vocab: &Vocabulary) -> Result<(), ModelError> {
        for (which, want, got) in [
            ("code", &self.code_vocab_sha256, code_vocab.fingerprint()),
            ("description", &self.desc_vocab_sha256, desc_vocab.fingerprint()),
        ] {
            if *want != got {
                return Err(ModelError::VocabularyMismatch { which, expected: want.clone(), found: got });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| ModelError::io(path, e))
    }

    pub fn load_unverified(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Load and reject the file unless it was built for these vocabularies.
    pub fn load(path: &Path, code_vocab: &Vocabulary, desc_vocab: &Vocabulary) -> Result<Self, ModelError> {
        let ck = Self::load_unverified(path)?;
        ck.verify_vocabularies(code_vocab, desc_vocab)?;
        Ok(ck)
    }
}
