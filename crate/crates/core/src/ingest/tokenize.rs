use serde::{Deserialize, Serialize};

use super::{IngestError, Vocabulary};
use crate::pystmt::{statement_tokens, StatementTree};

pub const MAX_DESCRIPTION_LEN: usize = 30;

/// Split an identifier into lowercase subtokens.
///
/// Boundaries are underscores, a lowercase letter or digit followed by an
/// uppercase letter (`binarySearch`), and the last capital of an uppercase
/// run that is followed by a lowercase letter (`HTTPServer` -> http, server).
pub fn split_identifier(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in name.split('_') {
        let chars: Vec<char> = part.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 && c.is_uppercase() {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                let boundary = prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower);
                if boundary && !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            cur.extend(c.to_lowercase());
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Description words: lowercased, split on runs of non-alphanumeric
/// characters, then identifier-split. Not truncated.
pub fn description_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .flat_map(split_identifier)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedQuery {
    /// Ids padded with PAD up to the maximum description length.
    pub ids: Vec<u32>,
    pub true_length: usize,
}

impl TokenizedQuery {
    pub fn tokens(&self) -> &[u32] {
        &self.ids[..self.true_length]
    }
}

/// Tokenize a description into at most 30 vocabulary ids.
pub fn tokenize_description(text: &str, vocab: &Vocabulary) -> Result<TokenizedQuery, IngestError> {
    let words = description_words(text);
    if words.is_empty() {
        return Err(IngestError::EmptyDescription);
    }
    let true_length = words.len().min(MAX_DESCRIPTION_LEN);
    let mut ids: Vec<u32> = words[..true_length].iter().map(|w| vocab.id(w)).collect();
    ids.resize(MAX_DESCRIPTION_LEN, Vocabulary::PAD);
    Ok(TokenizedQuery { ids, true_length })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedCode {
    /// One row per statement, each padded with PAD to the token cap.
    pub ids: Vec<Vec<u32>>,
    /// Statements the encoder reads (the function's statement count, capped).
    pub length: usize,
}

impl TokenizedCode {
    /// Real (non-PAD) tokens of statement row `i`.
    pub fn statement(&self, i: usize) -> impl Iterator<Item = u32> + '_ {
        self.ids[i].iter().copied().filter(|&id| id != Vocabulary::PAD)
    }
}

/// Token ids of the first `max_statements` statements, at most
/// `max_tokens` each.
pub fn tokenize_code(tree: &StatementTree, vocab: &Vocabulary, max_statements: usize, max_tokens: usize) -> TokenizedCode {
    let ids: Vec<Vec<u32>> = tree
        .statements
        .iter()
        .take(max_statements)
        .map(|s| {
            let mut row = statement_tokens(s, vocab, max_tokens);
            row.resize(max_tokens, Vocabulary::PAD);
            row
        })
        .collect();
    TokenizedCode { length: ids.len(), ids }
}
