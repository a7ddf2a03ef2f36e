//! Fixed 39-token vocabulary and greedy longest-match tokenizer.

use std::sync::OnceLock;

use sha2::{Digest, Sha256};

/// Vocabulary file shipped with the crate: one token per line, line number = id.
pub const VOCAB_FILE: &str = include_str!("../../data/vocab.txt");

/// SHA-256 of [`VOCAB_FILE`]; recorded in checkpoints and dataset manifests.
pub const VOCAB_SHA256: &str = "c7095b9d473d6145d379091f243107176b31736c63d1511be85cf39958741dfd";

pub const VOCAB_SIZE: usize = 39;
pub const PAD: u32 = 0;
pub const START: u32 = 1;
pub const END: u32 = 2;
pub const UNK: u32 = 3;

/// Longest surface form allowed for a sequence, in characters.
pub const MAX_SMILES_CHARS: usize = 110;
/// Token positions needed for the longest sequence plus START and END.
pub const MAX_TOKENS: usize = MAX_SMILES_CHARS + 2;

#[derive(Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn get() -> &'static Vocabulary {
        static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
        VOCAB.get_or_init(|| {
            let tokens: Vec<String> = VOCAB_FILE.lines().map(str::to_owned).collect();
            assert_eq!(tokens.len(), VOCAB_SIZE, "vocabulary file must hold {VOCAB_SIZE} tokens");
            Vocabulary { tokens }
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.tokens.iter().position(|t| t == token).map(|i| i as u32)
    }

    pub fn is_special(id: u32) -> bool {
        id <= UNK
    }

    /// Hex SHA-256 of the vocabulary text actually loaded.
    pub fn checksum(&self) -> String {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        hex_digest(text.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Token ids wrapped in START/END.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Greedy longest match: `Cl` and `Br` are single tokens, anything outside
/// the vocabulary becomes UNK.
pub fn tokenize(smiles: &str) -> TokenSequence {
    let vocab = Vocabulary::get();
    let mut ids = vec![START];
    let mut rest = smiles;
    while !rest.is_empty() {
        if rest.starts_with("Cl") || rest.starts_with("Br") {
            ids.push(vocab.id(&rest[..2]).expect("two-letter halogens in vocabulary"));
            rest = &rest[2..];
            continue;
        }
        let ch = rest.chars().next().expect("non-empty");
        let mut buf = [0u8; 4];
        let id = vocab.id(ch.encode_utf8(&mut buf)).filter(|&id| !Vocabulary::is_special(id));
        ids.push(id.unwrap_or(UNK));
        rest = &rest[ch.len_utf8()..];
    }
    ids.push(END);
    TokenSequence { ids }
}

/// Surface string with special tokens stripped. Stops at the first END.
pub fn detokenize(seq: &TokenSequence) -> String {
    detokenize_ids(&seq.ids)
}

pub fn detokenize_ids(ids: &[u32]) -> String {
    let vocab = Vocabulary::get();
    let mut out = String::new();
    for &id in ids {
        match id {
            END => break,
            PAD | START | UNK => {}
            _ => out.push_str(vocab.token(id).unwrap_or("")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(seq: &TokenSequence) -> Vec<&'static str> {
        seq.ids.iter().map(|&i| Vocabulary::get().token(i).unwrap()).collect()
    }

    #[test]
    fn shipped_file_matches_checksum() {
        assert_eq!(hex_digest(VOCAB_FILE.as_bytes()), VOCAB_SHA256);
        assert_eq!(Vocabulary::get().checksum(), VOCAB_SHA256);
        assert_eq!(Vocabulary::get().len(), 39);
    }

    #[test]
    fn two_letter_halogens_stay_whole() {
        assert_eq!(names(&tokenize("CCl")), ["<start>", "C", "Cl", "<end>"]);
        assert_eq!(names(&tokenize("BrCBr")), ["<start>", "Br", "C", "Br", "<end>"]);
    }

    #[test]
    fn empty_string() {
        assert_eq!(tokenize("").ids, vec![START, END]);
        assert_eq!(detokenize(&tokenize("")), "");
    }

    #[test]
    fn percent_ring_labels_split_into_digits() {
        let seq = tokenize("C%10CC%10");
        assert_eq!(names(&seq)[1..5], ["C", "%", "1", "0"]);
        assert_eq!(detokenize(&seq), "C%10CC%10");
    }

    #[test]
    fn unknown_characters_become_unk() {
        let seq = tokenize("C[Si]C");
        assert!(seq.ids.contains(&UNK));
        assert!(seq.ids.iter().all(|&i| (i as usize) < VOCAB_SIZE));
        assert_eq!(tokenize("<pad>").ids.iter().filter(|&&i| i == UNK).count(), 5);
    }

    #[test]
    fn round_trip_on_supported_alphabet() {
        for s in ["CCl", "c1ccccc1Br", "CC(=O)N#C", "c1cc[nH]c1", "C/C=C\\C", "C-C"] {
            assert_eq!(detokenize(&tokenize(s)), s);
        }
    }
}
