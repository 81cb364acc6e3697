use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainError;
use crate::ingest::{tokenize_code, tokenize_description, CorpusPair, Split, TokenizedCode, TokenizedQuery, Vocabulary};
use crate::pdg::{DependencyEdges, DependencyMatrix, DependencyMode};
use crate::pystmt::segment_with_id;

pub const FEATURE_STORE_VERSION: u32 = 1;

/// Model inputs for one pair. Data and control edges are kept apart so any
/// dependency mode can be assembled without re-parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub tokens: TokenizedCode,
    pub data: DependencyMatrix,
    pub control: DependencyMatrix,
    pub description: TokenizedQuery,
}

impl FeatureRecord {
    pub fn statement_count(&self) -> usize {
        self.data.true_statement_count()
    }

    pub fn matrix(&self, mode: DependencyMode) -> DependencyMatrix {
        match mode {
            DependencyMode::Full => self.data.or(&self.control).with_mode(mode),
            DependencyMode::DataOnly => self.data.clone(),
            DependencyMode::ControlOnly => self.control.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCaps {
    pub max_statements: usize,
    pub max_tokens: usize,
    pub max_desc_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub split: String,
    pub corpus_sha256: String,
    pub code_vocab_sha256: String,
    pub desc_vocab_sha256: String,
    pub caps: FeatureCaps,
    pub entries: Vec<ManifestEntry>,
    pub skipped: Vec<SkipRecord>,
    /// SHA-256 of the features file.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub records: Vec<FeatureRecord>,
    pub skipped: Vec<SkipRecord>,
    pub caps: FeatureCaps,
}

/// Hash of the pairs' ids, code and descriptions in order.
pub fn corpus_fingerprint(pairs: &[CorpusPair]) -> String {
    let mut h = Sha256::new();
    for p in pairs {
        for field in [&p.id, &p.code, &p.description] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn featurize(
    pair: &CorpusPair,
    code_vocab: &Vocabulary,
    desc_vocab: &Vocabulary,
    caps: FeatureCaps,
) -> Result<FeatureRecord, SkipRecord> {
    let skip = |reason: String| SkipRecord { id: pair.id.clone(), reason };
    let tree = segment_with_id(&pair.code, &pair.id).map_err(|e| skip(format!("parse: {e}")))?;
    let mut description = tokenize_description(&pair.description, desc_vocab).map_err(|e| skip(e.to_string()))?;
    description.true_length = description.true_length.min(caps.max_desc_len);
    description.ids.resize(caps.max_desc_len, Vocabulary::PAD);
    description.ids[description.true_length..].fill(Vocabulary::PAD);
    let tokens = tokenize_code(&tree, code_vocab, caps.max_statements, caps.max_tokens);
    let edges = DependencyEdges::of(&tree);
    Ok(FeatureRecord {
        id: pair.id.clone(),
        tokens,
        data: edges.matrix(DependencyMode::DataOnly, caps.max_statements),
        control: edges.matrix(DependencyMode::ControlOnly, caps.max_statements),
        description,
    })
}

/// Parse, tokenize and extract dependencies for every pair in parallel.
/// Failures are logged and recorded, never fatal.
pub fn precompute_features(
    pairs: &[CorpusPair],
    code_vocab: &Vocabulary,
    desc_vocab: &Vocabulary,
    caps: FeatureCaps,
) -> FeatureStore {
    let results: Vec<_> = pairs.par_iter().map(|p| featurize(p, code_vocab, desc_vocab, caps)).collect();
    let mut records = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(s) => {
                warn!("skipping {}: {}", s.id, s.reason);
                skipped.push(s);
            }
        }
    }
    FeatureStore { records, skipped, caps }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn encode_record(r: &FeatureRecord, caps: FeatureCaps) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, r.id.len());
    out.extend_from_slice(r.id.as_bytes());
    put_u32(&mut out, r.data.true_statement_count());
    put_u32(&mut out, r.tokens.length);
    for row in &r.tokens.ids[..r.tokens.length] {
        for &id in row {
            put_u32(&mut out, id as usize);
        }
    }
    out.extend_from_slice(&r.data.pack());
    out.extend_from_slice(&r.control.pack());
    put_u32(&mut out, r.description.true_length);
    for &id in &r.description.ids[..caps.max_desc_len] {
        put_u32(&mut out, id as usize);
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<usize> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?) as usize)
    }

    fn ids(&mut self, n: usize) -> Option<Vec<u32>> {
        (0..n).map(|_| self.u32().map(|v| v as u32)).collect()
    }
}

fn decode_record(bytes: &[u8], caps: FeatureCaps) -> Option<FeatureRecord> {
    let mut c = Cursor { bytes, pos: 0 };
    let id_len = c.u32()?;
    let id = String::from_utf8(c.take(id_len)?.to_vec()).ok()?;
    let l = c.u32()?;
    let length = c.u32()?;
    if length > caps.max_statements {
        return None;
    }
    let ids = (0..length).map(|_| c.ids(caps.max_tokens)).collect::<Option<Vec<_>>>()?;
    let packed = (caps.max_statements * caps.max_statements).div_ceil(8);
    let data = DependencyMatrix::unpack(c.take(packed)?, caps.max_statements, DependencyMode::DataOnly, l)?;
    let control = DependencyMatrix::unpack(c.take(packed)?, caps.max_statements, DependencyMode::ControlOnly, l)?;
    let true_length = c.u32()?;
    let desc = c.ids(caps.max_desc_len)?;
    if c.pos != bytes.len() || true_length == 0 || true_length > caps.max_desc_len {
        return None;
    }
    Some(FeatureRecord {
        id,
        tokens: TokenizedCode { ids, length },
        data,
        control,
        description: TokenizedQuery { ids: desc, true_length },
    })
}

fn paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    (dir.join(format!("{split}.features.bin")), dir.join(format!("{split}.manifest.json")))
}

impl FeatureStore {
    /// Serialized records and the manifest describing them.
    pub fn encode(&self, split: Split, corpus_sha256: &str, code_vocab: &Vocabulary, desc_vocab: &Vocabulary) -> (Vec<u8>, Manifest) {
        let mut bin = Vec::new();
        let mut entries = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let rec = encode_record(r, self.caps);
            entries.push(ManifestEntry { id: r.id.clone(), offset: bin.len() as u64, length: rec.len() as u64 });
            bin.extend_from_slice(&rec);
        }
        let manifest = Manifest {
            version: FEATURE_STORE_VERSION,
            split: split.to_string(),
            corpus_sha256: corpus_sha256.to_string(),
            code_vocab_sha256: code_vocab.fingerprint(),
            desc_vocab_sha256: desc_vocab.fingerprint(),
            caps: self.caps,
            entries,
            skipped: self.skipped.clone(),
            checksum: hex::encode(Sha256::digest(&bin)),
        };
        (bin, manifest)
    }

    pub fn save(
        &self,
        dir: &Path,
        split: Split,
        corpus_sha256: &str,
        code_vocab: &Vocabulary,
        desc_vocab: &Vocabulary,
    ) -> Result<Manifest, TrainError> {
        std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
        let (bin, manifest) = self.encode(split, corpus_sha256, code_vocab, desc_vocab);
        let (bin_path, man_path) = paths(dir, split);
        std::fs::write(&bin_path, &bin).map_err(|e| TrainError::io(&bin_path, e))?;
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&man_path, json).map_err(|e| TrainError::io(&man_path, e))?;
        Ok(manifest)
    }

    pub fn read_manifest(dir: &Path, split: Split) -> Result<Manifest, TrainError> {
        let (_, man_path) = paths(dir, split);
        let text = std::fs::read(&man_path).map_err(|e| TrainError::io(&man_path, e))?;
        serde_json::from_slice(&text).map_err(|e| TrainError::BadStore(format!("{}: {e}", man_path.display())))
    }

    /// Load a stored split, verifying the checksum and every record.
    pub fn load(dir: &Path, split: Split) -> Result<(Self, Manifest), TrainError> {
        let manifest = Self::read_manifest(dir, split)?;
        if manifest.version != FEATURE_STORE_VERSION {
            return Err(TrainError::BadStore(format!("unsupported store version {}", manifest.version)));
        }
        let (bin_path, _) = paths(dir, split);
        let bin = std::fs::read(&bin_path).map_err(|e| TrainError::io(&bin_path, e))?;
        if hex::encode(Sha256::digest(&bin)) != manifest.checksum {
            return Err(TrainError::BadStore(format!("{}: checksum mismatch", bin_path.display())));
        }
        let mut records = Vec::with_capacity(manifest.entries.len());
        for e in &manifest.entries {
            let slice = bin
                .get(e.offset as usize..(e.offset + e.length) as usize)
                .ok_or_else(|| TrainError::BadStore(format!("entry {} out of bounds", e.id)))?;
            let rec = decode_record(slice, manifest.caps)
                .filter(|r| r.id == e.id)
                .ok_or_else(|| TrainError::BadStore(format!("entry {} is corrupt", e.id)))?;
            records.push(rec);
        }
        let store = FeatureStore { records, skipped: manifest.skipped.clone(), caps: manifest.caps };
        Ok((store, manifest))
    }

    /// Reuse the stored split when it was built from the same corpus,
    /// vocabularies and caps; otherwise rebuild and save. The flag is true
    /// on reuse.
    pub fn open_or_build(
        dir: &Path,
        split: Split,
        pairs: &[CorpusPair],
        code_vocab: &Vocabulary,
        desc_vocab: &Vocabulary,
        caps: FeatureCaps,
    ) -> Result<(Self, bool), TrainError> {
        let corpus = corpus_fingerprint(pairs);
        if let Ok(m) = Self::read_manifest(dir, split) {
            let same = m.corpus_sha256 == corpus
                && m.code_vocab_sha256 == code_vocab.fingerprint()
                && m.desc_vocab_sha256 == desc_vocab.fingerprint()
                && m.caps == caps;
            if same {
                match Self::load(dir, split) {
                    Ok((store, _)) => {
                        info!("reusing {split} features ({} records)", store.records.len());
                        return Ok((store, true));
                    }
                    Err(e) => warn!("rebuilding {split} features: {e}"),
                }
            }
        }
        let store = precompute_features(pairs, code_vocab, desc_vocab, caps);
        store.save(dir, split, &corpus, code_vocab, desc_vocab)?;
        Ok((store, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_vocabulary, VocabKind};

    fn pair(id: &str, code: &str, desc: &str) -> CorpusPair {
        CorpusPair { id: id.into(), code: code.into(), description: desc.into() }
    }

    fn corpus() -> Vec<CorpusPair> {
        vec![
            pair("p0", "def add(a, b):\n    return a + b\n", "Add two numbers"),
            pair("p1", "def neg(x):\n    if x > 0:\n        return -x\n    return x\n", "Negate a positive number"),
            pair("p2", "def broken(:\n    pass\n", "This does not parse"),
            pair("p3", "def loop(n):\n    i = 0\n    while i < n:\n        i = i + 1\n    return i\n", "Count up to n"),
        ]
    }

    const CAPS: FeatureCaps = FeatureCaps { max_statements: 6, max_tokens: 3, max_desc_len: 8 };

    fn vocabs(pairs: &[CorpusPair]) -> (Vocabulary, Vocabulary) {
        (build_vocabulary(pairs, VocabKind::Code), build_vocabulary(pairs, VocabKind::Description))
    }

    #[test]
    fn unparseable_snippet_skipped() {
        let pairs = corpus();
        let (cv, dv) = vocabs(&pairs);
        let store = precompute_features(&pairs, &cv, &dv, CAPS);
        assert_eq!(store.records.len(), 3);
        assert_eq!(store.skipped.len(), 1);
        assert_eq!(store.skipped[0].id, "p2");
    }

    #[test]
    fn mode_matrices_recombine() {
        let pairs = corpus();
        let (cv, dv) = vocabs(&pairs);
        let store = precompute_features(&pairs, &cv, &dv, CAPS);
        let r = &store.records[2];
        let full = r.matrix(DependencyMode::Full);
        assert_eq!(full.mode(), DependencyMode::Full);
        assert_eq!(full.bits(), r.data.or(&r.control).bits());
        assert!(r.control.get(5, 4) && !r.data.get(5, 4));
        assert!(r.data.get(5, 3) && !r.control.get(5, 3));
        assert!(full.get(5, 4) && full.get(5, 3));
    }

    #[test]
    fn save_load_and_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = corpus();
        let (cv, dv) = vocabs(&pairs);
        let (built, reused) = FeatureStore::open_or_build(dir.path(), Split::Train, &pairs, &cv, &dv, CAPS).unwrap();
        assert!(!reused);
        let (again, reused) = FeatureStore::open_or_build(dir.path(), Split::Train, &pairs, &cv, &dv, CAPS).unwrap();
        assert!(reused);
        assert_eq!(again, built);
        let mut changed = pairs.clone();
        changed[0].description = "Sum two numbers".into();
        let (_, reused) = FeatureStore::open_or_build(dir.path(), Split::Train, &changed, &cv, &dv, CAPS).unwrap();
        assert!(!reused);
    }

    #[test]
    fn corrupt_store_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = corpus();
        let (cv, dv) = vocabs(&pairs);
        let store = precompute_features(&pairs, &cv, &dv, CAPS);
        store.save(dir.path(), Split::Valid, &corpus_fingerprint(&pairs), &cv, &dv).unwrap();
        let bin = dir.path().join("valid.features.bin");
        let mut bytes = std::fs::read(&bin).unwrap();
        bytes[5] ^= 0xff;
        std::fs::write(&bin, bytes).unwrap();
        assert!(matches!(FeatureStore::load(dir.path(), Split::Valid), Err(TrainError::BadStore(_))));
    }

    #[test]
    fn golden_checksum() {
        let pairs = corpus();
        let (cv, dv) = vocabs(&pairs);
        let store = precompute_features(&pairs, &cv, &dv, CAPS);
        let (_, manifest) = store.encode(Split::Train, &corpus_fingerprint(&pairs), &cv, &dv);
        // frozen from the first run; any change to the record encoding,
        // tokenization or dependency extraction shows up here
        assert_eq!(manifest.checksum, GOLDEN);
    }

    const GOLDEN: &str = "5ac8a88efb7eb560011b6473b6214b1c95d15a34211f94d7c93318d30b45568b";
}
