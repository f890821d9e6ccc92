//! WordPiece: likelihood-scored merge training and greedy longest-match
//! encoding with continuation-prefixed pieces.

mod trainer;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::PretokenPolicy;
use crate::error::{Error, Result};
use crate::tokens::{encode_text, Token, TokenSeq, Tokenizer};
use crate::vocab::Vocab;

pub use trainer::{train_wordpiece, WordPieceConfig};

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";
pub const DEFAULT_UNK: &str = "[UNK]";
pub const DEFAULT_MAX_WORD_CHARS: usize = 100;

/// Header line that carries the model settings in a vocabulary file.
const HEADER_PREFIX: &str = "#! ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    continuation_prefix: String,
    unk_token: String,
    max_word_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPieceModel {
    vocab: Vocab,
    continuation_prefix: String,
    unk_token: String,
    max_word_chars: usize,
    unk_id: u32,
}

impl WordPieceModel {
    pub fn new(
        vocab: Vocab,
        continuation_prefix: impl Into<String>,
        unk_token: impl Into<String>,
        max_word_chars: usize,
    ) -> Result<Self> {
        let unk_token = unk_token.into();
        let unk_id = vocab.id(&unk_token).ok_or_else(|| {
            Error::InvalidArgument(format!("unk token {unk_token:?} is not in the vocabulary"))
        })?;
        Ok(Self {
            vocab,
            continuation_prefix: continuation_prefix.into(),
            unk_token,
            max_word_chars,
            unk_id,
        })
    }

    /// A model with default settings over `pieces`.
    pub fn from_pieces<I, S>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            Vocab::from_pieces(pieces)?,
            DEFAULT_CONTINUATION_PREFIX,
            DEFAULT_UNK,
            DEFAULT_MAX_WORD_CHARS,
        )
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn unk_token(&self) -> &str {
        &self.unk_token
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    pub fn encode(&self, text: &str, policy: &PretokenPolicy) -> Result<TokenSeq> {
        encode_wordpiece(self, text, policy)
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            let piece = self.vocab.piece_checked(id)?;
            out.push_str(
                piece
                    .strip_prefix(&*self.continuation_prefix)
                    .unwrap_or(piece),
            );
        }
        Ok(out)
    }

    /// Greedy longest-match pieces for one word, or `None` if some position
    /// has no matching piece.
    fn longest_match(&self, word: &str) -> Option<Vec<u32>> {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let mut ids = Vec::new();
        let mut candidate = String::with_capacity(word.len() + self.continuation_prefix.len());
        let mut start = 0;
        while start + 1 < bounds.len() {
            let mut found = None;
            for end in (start + 1..bounds.len()).rev() {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(&self.continuation_prefix);
                }
                candidate.push_str(&word[bounds[start]..bounds[end]]);
                if let Some(id) = self.vocab.id(&candidate) {
                    found = Some((id, end));
                    break;
                }
            }
            let (id, end) = found?;
            ids.push(id);
            start = end;
        }
        Some(ids)
    }

    /// Write the conventional one-piece-per-line file, with a leading `#!`
    /// header line carrying the settings.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            continuation_prefix: self.continuation_prefix.clone(),
            unk_token: self.unk_token.clone(),
            max_word_chars: self.max_word_chars,
        };
        let mut out = format!("{HEADER_PREFIX}{}\n", serde_json::to_string(&header)?);
        for piece in self.vocab.pieces() {
            if piece.contains(['\n', '\r']) {
                return Err(Error::InvalidArgument(format!(
                    "piece {piece:?} cannot be stored one per line"
                )));
            }
            out.push_str(piece);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Load a vocabulary file; the `#!` header is optional.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab_text(&text, &path.display().to_string())
    }

    pub fn from_vocab_text(text: &str, file: &str) -> Result<Self> {
        let mut lines: Vec<&str> = if text.is_empty() {
            Vec::new()
        } else {
            text.strip_suffix('\n')
                .unwrap_or(text)
                .split('\n')
                .collect()
        };
        let mut header = Header {
            continuation_prefix: DEFAULT_CONTINUATION_PREFIX.into(),
            unk_token: DEFAULT_UNK.into(),
            max_word_chars: DEFAULT_MAX_WORD_CHARS,
        };
        let mut first_line = 1;
        if let Some(json) = lines.first().and_then(|l| l.strip_prefix(HEADER_PREFIX)) {
            header = serde_json::from_str(json)
                .map_err(|e| Error::parse(file, 1, format!("bad header: {e}")))?;
            lines.remove(0);
            first_line = 2;
        }
        let mut vocab = Vocab::new();
        for (i, line) in lines.into_iter().enumerate() {
            if vocab.contains(line) {
                return Err(Error::parse(
                    file,
                    i + first_line,
                    format!("duplicate piece {line:?}"),
                ));
            }
            vocab.push(line);
        }
        Self::new(
            vocab,
            header.continuation_prefix,
            header.unk_token,
            header.max_word_chars,
        )
    }
}

impl Tokenizer for WordPieceModel {
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool> {
        let ids = if word.chars().count() > self.max_word_chars {
            None
        } else {
            self.longest_match(word)
        };
        match ids {
            Some(ids) => {
                out.extend(
                    ids.into_iter()
                        .map(|id| Token::new(id, self.vocab.piece(id).expect("id from vocab"))),
                );
                Ok(false)
            }
            None => {
                out.push(Token::new(self.unk_id, self.unk_token.clone()));
                Ok(true)
            }
        }
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        WordPieceModel::decode(self, ids)
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}

pub fn encode_wordpiece(
    model: &WordPieceModel,
    text: &str,
    policy: &PretokenPolicy,
) -> Result<TokenSeq> {
    encode_text(model, text, policy)
}
