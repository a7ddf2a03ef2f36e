//! SMILES parsing, canonical writing and tokenization.

mod parser;
mod vocab;
mod writer;

pub use parser::{parse, parse_with, ParseMode};
pub use vocab::{
    detokenize, detokenize_ids, tokenize, TokenSequence, Vocabulary, END, MAX_SMILES_CHARS, MAX_TOKENS, PAD, START,
    UNK, VOCAB_FILE, VOCAB_SHA256, VOCAB_SIZE,
};
pub use writer::write;
pub(crate) use writer::write_unchecked;

use crate::error::Result;

/// `write(parse(s))`.
pub fn canonicalize(smiles: &str) -> Result<String> {
    write(&parse(smiles)?)
}
