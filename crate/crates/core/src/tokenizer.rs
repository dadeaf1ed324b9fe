//! Word-level vocabulary and fixed-length encoding with `[CLS]`/`[SEP]`/`[PAD]`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const RESERVED: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];
pub const DEFAULT_MAX_SEQ_LEN: usize = 128;

/// Lowercases, splits on whitespace, and emits each ASCII punctuation
/// character as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    for word in lower.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if ch.is_ascii_punctuation() {
                if !current.is_empty() {
                    tokens.push(core::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            } else {
                current.push(ch);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
    max_size: usize,
    min_freq: usize,
}

impl Vocabulary {
    /// Frequency-ordered vocabulary; ties go to the lexicographically smaller
    /// token. `max_size` includes the four reserved ids.
    pub fn build<S: AsRef<str>>(texts: &[S], max_size: usize, min_freq: usize) -> Result<Self> {
        if texts.is_empty() {
            return Err(CoreError::EmptyInput("vocabulary texts"));
        }
        if max_size < 5 {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "max_size must be at least 5, got {max_size}"
            )));
        }
        if min_freq == 0 {
            return Err(CoreError::InvalidConfig(
                "min_freq must be positive".to_string(),
            ));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text.as_ref()) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq && !RESERVED.contains(&t.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - RESERVED.len());
        Self::from_tokens(
            ranked.into_iter().map(|(t, _)| t).collect(),
            max_size,
            min_freq,
        )
    }

    /// Rebuilds a vocabulary from its non-reserved tokens in id order.
    pub fn from_tokens(tokens: Vec<String>, max_size: usize, min_freq: usize) -> Result<Self> {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut ids = BTreeMap::new();
        for (i, t) in all.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(CoreError::InvalidConfig(alloc::format!(
                    "invalid token {t:?}"
                )));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(CoreError::InvalidConfig(alloc::format!(
                    "duplicate token {t:?}"
                )));
            }
        }
        Ok(Self {
            tokens: all,
            ids,
            max_size,
            min_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-reserved tokens in id order (ids start at 4).
    pub fn learned_tokens(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    pub fn encode(&self, text: &str, max_seq_len: usize) -> TokenSequence {
        assert!(
            max_seq_len >= 2,
            "max_seq_len must leave room for [CLS] and [SEP]"
        );
        let mut ids = Vec::with_capacity(max_seq_len);
        ids.push(CLS);
        ids.extend(
            tokenize(text)
                .iter()
                .take(max_seq_len - 2)
                .map(|t| self.id(t).unwrap_or(UNK)),
        );
        ids.push(SEP);
        let used = ids.len();
        ids.resize(max_seq_len, PAD);
        let mut mask = vec![1u8; used];
        mask.resize(max_seq_len, 0);
        TokenSequence {
            ids,
            attention_mask: mask,
        }
    }

    /// Space-joined tokens with special ids removed; `[UNK]` is kept as a marker.
    pub fn decode(&self, seq: &TokenSequence) -> Result<String> {
        let mut words: Vec<&str> = Vec::new();
        for &id in &seq.ids {
            let tok = self.token(id).ok_or(CoreError::TokenIdOutOfRange {
                id,
                size: self.len(),
            })?;
            if matches!(id, PAD | CLS | SEP) {
                continue;
            }
            words.push(tok);
        }
        Ok(words.join(" "))
    }
}

/// Fixed-length encoded sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-PAD positions; PAD positions always form a suffix.
    pub fn active_len(&self) -> usize {
        self.attention_mask.iter().take_while(|&&m| m == 1).count()
    }
}
