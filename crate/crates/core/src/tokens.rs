//! The encoder output shared by every tokenizer, and the trait that lets the
//! metrics treat trained and pretrained tokenizers uniformly.

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, pretokenize, PretokenPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: u32,
    pub piece: String,
}

impl Token {
    pub fn new(id: u32, piece: impl Into<String>) -> Self {
        Self {
            id,
            piece: piece.into(),
        }
    }
}

/// Tokens of one word of the evaluation text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word_index: usize,
    pub token_start: usize,
    pub token_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub pieces: Vec<String>,
    pub word_spans: Vec<WordSpan>,
    /// Indices of words that were replaced by an unknown token.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unk_words: Vec<usize>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.word_spans.len()
    }

    pub fn has_unk(&self) -> bool {
        !self.unk_words.is_empty()
    }

    /// Token counts per word, in word order.
    pub fn tokens_per_word(&self) -> impl Iterator<Item = usize> + '_ {
        self.word_spans.iter().map(|s| s.token_count)
    }

    /// Build from per-word token counts (ids and pieces are synthetic).
    pub fn from_word_token_counts(counts: &[usize]) -> Self {
        let mut seq = TokenSeq::default();
        for (i, &n) in counts.iter().enumerate() {
            seq.word_spans.push(WordSpan {
                word_index: i,
                token_start: seq.ids.len(),
                token_count: n,
            });
            for _ in 0..n {
                seq.ids.push(0);
                seq.pieces.push(String::new());
            }
        }
        seq
    }

    /// Check the span invariants: ordered, contiguous, non-empty, covering.
    pub fn validate(&self) -> Result<()> {
        if self.ids.len() != self.pieces.len() {
            return Err(Error::InvalidArgument(
                "ids and pieces differ in length".into(),
            ));
        }
        let mut cursor = 0;
        for span in &self.word_spans {
            if span.token_count == 0 || span.token_start != cursor {
                return Err(Error::InvalidArgument(format!(
                    "malformed word span {span:?}"
                )));
            }
            cursor += span.token_count;
        }
        if cursor != self.ids.len() {
            return Err(Error::InvalidArgument(
                "word spans do not cover the token sequence".into(),
            ));
        }
        Ok(())
    }
}

/// Anything that turns a pre-tokenized word into tokens and back.
pub trait Tokenizer: Send + Sync {
    /// Append the tokens of one word to `out`. Returns `true` when the word
    /// was replaced by an unknown token.
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool>;

    fn decode(&self, ids: &[u32]) -> Result<String>;

    fn vocab_size(&self) -> usize;

    /// Token count for a whole line when the tokenizer's own segmentation may
    /// cross word boundaries. `None` means the per-word encoding is native.
    fn native_line_token_count(&self, _line: &str) -> Option<Result<usize>> {
        None
    }
}

/// Normalize and pre-tokenize `text` under `policy`, then encode word by word.
pub fn encode_text<T: Tokenizer + ?Sized>(
    tokenizer: &T,
    text: &str,
    policy: &PretokenPolicy,
) -> Result<TokenSeq> {
    let text = normalize(text, policy);
    let mut seq = TokenSeq::default();
    let mut buf = Vec::new();
    for (word_index, word) in pretokenize(&text, policy).into_iter().enumerate() {
        buf.clear();
        let unk = tokenizer.encode_word(word, &mut buf)?;
        if buf.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "tokenizer produced no tokens for {word:?}"
            )));
        }
        if unk {
            seq.unk_words.push(word_index);
        }
        seq.word_spans.push(WordSpan {
            word_index,
            token_start: seq.ids.len(),
            token_count: buf.len(),
        });
        for t in buf.drain(..) {
            seq.ids.push(t.id);
            seq.pieces.push(t.piece);
        }
    }
    Ok(seq)
}

/// Total tokens over the lines of `text` counted the tokenizer's own way.
pub fn native_token_count<T: Tokenizer + ?Sized>(
    tokenizer: &T,
    text: &str,
    policy: &PretokenPolicy,
    per_word: &TokenSeq,
) -> Result<usize> {
    let text = normalize(text, policy);
    let mut total = 0;
    for line in text.lines() {
        match tokenizer.native_line_token_count(line) {
            Some(n) => total += n?,
            None => return Ok(per_word.len()),
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct CharTok;

    impl Tokenizer for CharTok {
        fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool> {
            out.extend(word.chars().map(|c| Token::new(c as u32, c.to_string())));
            Ok(false)
        }

        fn decode(&self, ids: &[u32]) -> Result<String> {
            Ok(ids.iter().filter_map(|&i| char::from_u32(i)).collect())
        }

        fn vocab_size(&self) -> usize {
            0x110000
        }
    }

    #[test]
    fn spans_follow_words() {
        let seq = encode_text(&CharTok, "ab c", &PretokenPolicy::whitespace()).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(
            seq.word_spans,
            vec![
                WordSpan {
                    word_index: 0,
                    token_start: 0,
                    token_count: 2
                },
                WordSpan {
                    word_index: 1,
                    token_start: 2,
                    token_count: 1
                },
            ]
        );
        seq.validate().unwrap();
    }

    #[test]
    fn empty_text_is_empty_seq() {
        let seq = encode_text(&CharTok, "", &PretokenPolicy::whitespace()).unwrap();
        assert!(seq.is_empty());
        assert_eq!(seq.word_count(), 0);
    }

    #[test]
    fn synthetic_counts_validate() {
        let seq = TokenSeq::from_word_token_counts(&[1, 3, 2]);
        seq.validate().unwrap();
        assert_eq!(seq.len(), 6);
        assert_eq!(seq.tokens_per_word().collect::<Vec<_>>(), vec![1, 3, 2]);
    }
}
