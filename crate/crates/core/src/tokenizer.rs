//! Byte-pair-encoding subword tokenizer.
//!
//! The base alphabet is all 256 byte values, so any input can be encoded
//! without loss and `UNK` is unreachable for well-formed vocabularies.
//! Specials occupy the lowest indices. The `NEWLINE` token is structural:
//! it separates lines in an encoded stream and never participates in
//! merges, because downstream alignment needs line boundaries intact.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Token index type.
pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const NEWLINE: TokenId = 1;
pub const UNK: TokenId = 2;
const NUM_SPECIALS: u32 = 3;
const NUM_BASE: u32 = 256;

/// Default vocabulary size for desk-scale corpora.
pub const DEFAULT_VOCAB_SIZE: usize = 2000;

/// A trained BPE vocabulary: the learned merge rules in order, and the
/// derived token-string bijection.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Vocabulary {
    /// Merge rules in learned order; rule k produces token id
    /// `NUM_SPECIALS + NUM_BASE + k` from the concatenation of its parts.
    merges: Vec<(TokenId, TokenId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainError {
    EmptyCorpus,
    TargetTooSmall,
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::EmptyCorpus => write!(f, "cannot train a vocabulary on an empty corpus"),
            TrainError::TargetTooSmall => {
                write!(f, "target size must exceed the {} base symbols", NUM_SPECIALS + NUM_BASE)
            }
        }
    }
}

impl Vocabulary {
    /// The trivial vocabulary: specials plus raw bytes, no merges.
    pub fn byte_level() -> Self {
        Self { merges: Vec::new() }
    }

    pub fn size(&self) -> usize {
        (NUM_SPECIALS + NUM_BASE) as usize + self.merges.len()
    }

    pub fn merges(&self) -> &[(TokenId, TokenId)] {
        &self.merges
    }

    /// Greedy BPE training: repeatedly merge the most frequent adjacent
    /// token pair until `target_size` is reached or no pair repeats.
    /// Frequency ties break lexicographically on the pair, so training is
    /// deterministic.
    pub fn train<'a, I>(corpus: I, target_size: usize) -> Result<Self, TrainError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if target_size <= (NUM_SPECIALS + NUM_BASE) as usize {
            return Err(TrainError::TargetTooSmall);
        }
        // Token streams per line; NEWLINE never enters a stream, so merges
        // cannot cross line boundaries.
        let mut streams: Vec<Vec<TokenId>> = Vec::new();
        for text in corpus {
            for line in text.split('\n') {
                let stream: Vec<TokenId> = line
                    .as_bytes()
                    .iter()
                    .map(|&b| NUM_SPECIALS + b as u32)
                    .collect();
                if !stream.is_empty() {
                    streams.push(stream);
                }
            }
        }
        if streams.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }

        let mut vocab = Self { merges: Vec::new() };
        while vocab.size() < target_size {
            let mut counts: BTreeMap<(TokenId, TokenId), usize> = BTreeMap::new();
            for stream in &streams {
                for pair in stream.windows(2) {
                    *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
                }
            }
            // Highest frequency wins; ties go to the lexicographically
            // smallest pair (BTreeMap iteration order makes `<` strict).
            let best = counts
                .into_iter()
                .filter(|&(_, c)| c >= 2)
                .fold(None::<((TokenId, TokenId), usize)>, |acc, (pair, c)| match acc {
                    Some((_, best_c)) if best_c >= c => acc,
                    _ => Some((pair, c)),
                });
            let Some((pair, _)) = best else { break };
            let new_id = vocab.size() as TokenId;
            vocab.merges.push(pair);
            for stream in &mut streams {
                apply_merge(stream, pair, new_id);
            }
        }
        Ok(vocab)
    }

    /// The byte string a token expands to. Specials expand to nothing.
    pub fn token_bytes(&self, id: TokenId) -> Vec<u8> {
        let mut out = Vec::new();
        self.expand(id, &mut out);
        out
    }

    fn expand(&self, id: TokenId, out: &mut Vec<u8>) {
        if id < NUM_SPECIALS {
            return;
        }
        if id < NUM_SPECIALS + NUM_BASE {
            out.push((id - NUM_SPECIALS) as u8);
            return;
        }
        let (l, r) = self.merges[(id - NUM_SPECIALS - NUM_BASE) as usize];
        self.expand(l, out);
        self.expand(r, out);
    }

    /// Encodes text lines into token ids, inserting `NEWLINE` between
    /// consecutive lines.
    pub fn encode_lines<S: AsRef<str>>(&self, lines: &[S]) -> Vec<TokenId> {
        let mut out = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            if i > 0 {
                out.push(NEWLINE);
            }
            self.encode_line_into(line.as_ref(), &mut out);
        }
        out
    }

    fn encode_line_into(&self, line: &str, out: &mut Vec<TokenId>) {
        let mut stream: Vec<TokenId> = line
            .as_bytes()
            .iter()
            .map(|&b| NUM_SPECIALS + b as u32)
            .collect();
        for (k, &pair) in self.merges.iter().enumerate() {
            let new_id = NUM_SPECIALS + NUM_BASE + k as u32;
            apply_merge(&mut stream, pair, new_id);
        }
        out.extend_from_slice(&stream);
    }

    /// Inverse of [`encode_lines`]: token ids back to lines. `PAD` and
    /// `UNK` decode to nothing.
    pub fn decode_lines(&self, tokens: &[TokenId]) -> Vec<String> {
        let mut lines = Vec::new();
        let mut current: Vec<u8> = Vec::new();
        for &t in tokens {
            if t == NEWLINE {
                lines.push(String::from_utf8_lossy(&current).into_owned());
                current.clear();
            } else {
                self.expand(t, &mut current);
            }
        }
        lines.push(String::from_utf8_lossy(&current).into_owned());
        lines
    }
}

fn apply_merge(stream: &mut Vec<TokenId>, pair: (TokenId, TokenId), new_id: TokenId) {
    let mut write = 0;
    let mut read = 0;
    while read < stream.len() {
        if read + 1 < stream.len() && stream[read] == pair.0 && stream[read + 1] == pair.1 {
            stream[write] = new_id;
            read += 2;
        } else {
            stream[write] = stream[read];
            read += 1;
        }
        write += 1;
    }
    stream.truncate(write);
}
