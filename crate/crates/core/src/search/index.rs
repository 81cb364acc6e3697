use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{Cursor, Read};
use std::path::Path;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::ingest::{tokenize_description, TokenizedQuery, Vocabulary};
use crate::model::{similarity, Checkpoint, CodeVector, QueryVector};
use crate::trainer::FeatureRecord;

const MAGIC: &[u8; 4] = b"CRDX";
pub const INDEX_VERSION: u32 = 1;

/// Code vectors of a corpus, tied to the checkpoint that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
    /// Fingerprint of the checkpoint.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub rank: usize,
    pub id: String,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: String,
    dim: usize,
    count: usize,
}

/// Encode every record's code with the checkpoint's model.
pub fn build_index(records: &[FeatureRecord], checkpoint: &Checkpoint) -> Result<Index, SearchError> {
    let mut seen = HashSet::new();
    if let Some(r) = records.iter().find(|r| !seen.insert(r.id.as_str())) {
        return Err(SearchError::DuplicateId(r.id.clone()));
    }
    let model = checkpoint.model();
    let mode = model.config.dependency_mode;
    let vectors = records
        .par_iter()
        .map(|r| model.encode_code(&r.tokens, &r.matrix(mode)).map(|v| v.iter().map(|&x| x as f32).collect()))
        .collect::<Result<Vec<Vec<f32>>, _>>()?;
    Ok(Index { ids: records.iter().map(|r| r.id.clone()).collect(), vectors, fingerprint: checkpoint.fingerprint() })
}

fn bad(msg: impl Into<String>) -> SearchError {
    SearchError::BadIndex(msg.into())
}

fn read_u32(c: &mut Cursor<&[u8]>) -> Result<u32, SearchError> {
    let mut b = [0u8; 4];
    c.read_exact(&mut b).map_err(|_| bad("truncated"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_bytes(c: &mut Cursor<&[u8]>, n: usize) -> Result<Vec<u8>, SearchError> {
    let remaining = c.get_ref().len() - c.position() as usize;
    if n > remaining {
        return Err(bad("truncated"));
    }
    let mut b = vec![0u8; n];
    c.read_exact(&mut b).map_err(|_| bad("truncated"))?;
    Ok(b)
}

impl Index {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header { fingerprint: self.fingerprint.clone(), dim: self.dim(), count: self.len() };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + self.len() * (self.dim() * 4 + 24));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SearchError> {
        let mut c = Cursor::new(bytes);
        if read_bytes(&mut c, 4)? != MAGIC {
            return Err(bad("not an index file"));
        }
        let version = read_u32(&mut c)?;
        if version != INDEX_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = read_u32(&mut c)? as usize;
        let header: Header =
            serde_json::from_slice(&read_bytes(&mut c, len)?).map_err(|e| bad(format!("header: {e}")))?;
        let mut ids = Vec::with_capacity(header.count.min(1 << 20));
        let mut vectors = Vec::with_capacity(header.count.min(1 << 20));
        for _ in 0..header.count {
            let n = read_u32(&mut c)? as usize;
            let id = String::from_utf8(read_bytes(&mut c, n)?).map_err(|_| bad("id is not UTF-8"))?;
            let raw = read_bytes(&mut c, header.dim * 4)?;
            vectors.push(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect());
            ids.push(id);
        }
        if (c.position() as usize) != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Index { ids, vectors, fingerprint: header.fingerprint })
    }

    pub fn save(&self, path: &Path) -> Result<(), SearchError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| SearchError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let bytes = std::fs::read(path).map_err(|e| SearchError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Reject an index that was built by a different checkpoint.
    pub fn verify(&self, checkpoint: &Checkpoint) -> Result<(), SearchError> {
        let expected = checkpoint.fingerprint();
        if self.fingerprint != expected {
            return Err(SearchError::FingerprintMismatch { expected, found: self.fingerprint.clone() });
        }
        Ok(())
    }

    /// The `k` best snippets for an encoded query; ties rank by id.
    pub fn search_vector(&self, query: &QueryVector, k: usize) -> Vec<SearchHit> {
        let mut scored: Vec<(f64, &str)> = self
            .vectors
            .par_iter()
            .zip(&self.ids)
            .map(|(v, id)| {
                let c: CodeVector = Array1::from_iter(v.iter().map(|&x| x as f64));
                (similarity(&c, query), id.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1)));
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (score, id))| SearchHit { rank: i + 1, id: id.to_string(), score })
            .collect()
    }
}

/// Tokenize free text as a description, capped to the model's length.
pub fn prepare_query(text: &str, desc_vocab: &Vocabulary, max_len: usize) -> Result<TokenizedQuery, SearchError> {
    let mut q = tokenize_description(text, desc_vocab).map_err(|_| SearchError::EmptyQuery)?;
    q.true_length = q.true_length.min(max_len);
    q.ids.resize(max_len, Vocabulary::PAD);
    q.ids[q.true_length..].fill(Vocabulary::PAD);
    Ok(q)
}

/// Rank the index against a natural-language query.
pub fn query(
    index: &Index,
    checkpoint: &Checkpoint,
    desc_vocab: &Vocabulary,
    text: &str,
    k: usize,
) -> Result<Vec<SearchHit>, SearchError> {
    index.verify(checkpoint)?;
    let found = desc_vocab.fingerprint();
    let expected = checkpoint.vocab_hashes().1;
    if found != expected {
        return Err(SearchError::VocabularyMismatch { expected: expected.to_string(), found });
    }
    let model = checkpoint.model();
    let q = prepare_query(text, desc_vocab, model.config.max_desc_len)?;
    let v = model.encode_description(&q)?;
    Ok(index.search_vector(&v, k))
}
