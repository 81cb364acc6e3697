use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{description_words, CorpusPair, IngestError, MAX_DESCRIPTION_LEN};
use crate::pystmt::{segment_with_id, statement_subtokens};

pub const MAX_VOCAB_WORDS: usize = 10_000;
/// Per-statement token cap used when counting code tokens.
pub const CODE_TOKEN_CAP: usize = 5;

const HEADER_PREFIX: &str = "CRDL-VOCAB v1 kind=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabKind {
    Code,
    Description,
}

impl fmt::Display for VocabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VocabKind::Code => "code",
            VocabKind::Description => "description",
        })
    }
}

/// Frequency-ranked token vocabulary with reserved PAD and UNK ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    kind: VocabKind,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    pub const PAD_TOKEN: &'static str = "<pad>";
    pub const UNK_TOKEN: &'static str = "<unk>";

    fn from_ranked(kind: VocabKind, ranked: Vec<String>) -> Self {
        let mut tokens = vec![Self::PAD_TOKEN.to_string(), Self::UNK_TOKEN.to_string()];
        tokens.extend(ranked);
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { kind, tokens, index }
    }

    /// Keep the `max_words` most frequent tokens; ties go to the
    /// lexicographically smaller token.
    pub fn from_counts(kind: VocabKind, counts: HashMap<String, u64>, max_words: usize) -> Self {
        let mut ranked: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, _)| t != Self::PAD_TOKEN && t != Self::UNK_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_words);
        Self::from_ranked(kind, ranked.into_iter().map(|(t, _)| t).collect())
    }

    pub fn from_tokens<I, S>(kind: VocabKind, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts = HashMap::new();
        for t in tokens {
            *counts.entry(t.as_ref().to_string()).or_insert(0u64) += 1;
        }
        Self::from_counts(kind, counts, MAX_VOCAB_WORDS)
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER_PREFIX}{}\n", self.kind);
        for (i, t) in self.tokens.iter().enumerate() {
            s.push_str(t);
            s.push('\t');
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(IngestError::BadVocabulary { line: 1, reason: "empty file".into() })?;
        let kind = match header.strip_prefix(HEADER_PREFIX) {
            Some("code") => VocabKind::Code,
            Some("description") => VocabKind::Description,
            _ => return Err(IngestError::BadVocabulary { line: 1, reason: format!("bad header {header:?}") }),
        };
        let mut tokens = Vec::new();
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or(IngestError::BadVocabulary { line: line_no, reason: "missing tab".into() })?;
            let id: usize = id
                .parse()
                .map_err(|_| IngestError::BadVocabulary { line: line_no, reason: format!("bad id {id:?}") })?;
            if id != tokens.len() {
                return Err(IngestError::BadVocabulary { line: line_no, reason: "ids must be dense and ordered".into() });
            }
            tokens.push(tok.to_string());
        }
        if tokens.len() < 2 || tokens[0] != Self::PAD_TOKEN || tokens[1] != Self::UNK_TOKEN {
            return Err(IngestError::BadVocabulary { line: 2, reason: "reserved ids missing".into() });
        }
        Ok(Self::from_ranked(kind, tokens.split_off(2)))
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        std::fs::write(path, self.to_text()).map_err(|e| IngestError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        Self::parse(&text)
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Tokens a pair contributes to the vocabulary of `kind`. Code that fails to
/// segment contributes nothing.
pub fn pair_tokens(pair: &CorpusPair, kind: VocabKind) -> Vec<String> {
    match kind {
        VocabKind::Description => {
            let mut words = description_words(&pair.description);
            words.truncate(MAX_DESCRIPTION_LEN);
            words
        }
        VocabKind::Code => match segment_with_id(&pair.code, &pair.id) {
            Ok(tree) => tree
                .statements
                .iter()
                .flat_map(|s| statement_subtokens(s, CODE_TOKEN_CAP))
                .collect(),
            Err(_) => Vec::new(),
        },
    }
}

/// Build the vocabulary of `kind` from training pairs.
pub fn build_vocabulary(pairs: &[CorpusPair], kind: VocabKind) -> Vocabulary {
    let counts = pairs
        .par_iter()
        .map(|p| {
            let mut local: HashMap<String, u64> = HashMap::new();
            for t in pair_tokens(p, kind) {
                *local.entry(t).or_insert(0) += 1;
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            for (t, c) in b {
                *a.entry(t).or_insert(0) += c;
            }
            a
        });
    Vocabulary::from_counts(kind, counts, MAX_VOCAB_WORDS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, code: &str, desc: &str) -> CorpusPair {
        CorpusPair { id: id.into(), code: code.into(), description: desc.into() }
    }

    #[test]
    fn three_distinct_tokens() {
        let pairs = [pair("a", "def f():\n    pass\n", "alpha beta gamma alpha")];
        let v = build_vocabulary(&pairs, VocabKind::Description);
        assert_eq!(v.len(), 3 + 2);
        assert_eq!(v.token(2), Some("alpha"));
        assert_eq!(v.id("beta"), 3);
        assert_eq!(v.id("delta"), Vocabulary::UNK);
    }

    #[test]
    fn code_vocabulary_uses_subtokens_without_keywords() {
        let pairs = [pair("a", "def binarySearch(arr):\n    while arr:\n        break\n", "x")];
        let v = build_vocabulary(&pairs, VocabKind::Code);
        let toks: Vec<_> = (2..v.len() as u32).map(|i| v.token(i).unwrap().to_string()).collect();
        assert_eq!(toks, ["arr", "binary", "search"]);
    }

    #[test]
    fn tie_at_cutoff_prefers_smaller_token() {
        let mut counts = HashMap::new();
        counts.insert("zeta".to_string(), 1);
        counts.insert("alpha".to_string(), 1);
        counts.insert("most".to_string(), 5);
        let v = Vocabulary::from_counts(VocabKind::Code, counts, 2);
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(2), Some("most"));
        assert_eq!(v.token(3), Some("alpha"));
    }

    #[test]
    fn cap_at_ten_thousand() {
        let words: Vec<String> = (0..10_050).map(|i| format!("w{i:05}")).collect();
        let v = Vocabulary::from_tokens(VocabKind::Description, &words);
        assert_eq!(v.len(), MAX_VOCAB_WORDS + 2);
        assert_eq!(v.token(2), Some("w00000"));
    }

    #[test]
    fn rebuild_is_byte_identical_and_round_trips() {
        let pairs = [
            pair("a", "def f(x):\n    return x\n", "return the value x"),
            pair("b", "def g(y):\n    y = y + 1\n    return y\n", "increment y value"),
        ];
        let a = build_vocabulary(&pairs, VocabKind::Description).to_text();
        let b = build_vocabulary(&pairs, VocabKind::Description).to_text();
        assert_eq!(a, b);
        assert!(a.starts_with("CRDL-VOCAB v1 kind=description\n<pad>\t0\n<unk>\t1\n"));
        let parsed = Vocabulary::parse(&a).unwrap();
        assert_eq!(parsed.to_text(), a);
        assert_eq!(parsed.kind(), VocabKind::Description);
    }

    #[test]
    fn malformed_vocabulary_files() {
        assert!(Vocabulary::parse("nope\n").is_err());
        assert!(Vocabulary::parse("CRDL-VOCAB v1 kind=code\n<pad>\t0\n<unk>\t2\n").is_err());
        assert!(Vocabulary::parse("CRDL-VOCAB v1 kind=code\n<pad>\t0\n").is_err());
    }
}
