//! Trained models of any algorithm, and the on-disk model directory.
//!
//! A model directory holds `model.json` (algorithm, pre-tokenization policy,
//! settings) next to the algorithm's own files: `vocab.json` and
//! `merges.txt` for BPE, `vocab.txt` for WordPiece, `unigram.tsv` for
//! Unigram.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bpe::{train_bpe, BpeConfig, BpeModel, BpeSettings};
use crate::corpus::{Corpus, PretokenPolicy, WordCounts};
use crate::error::{Error, Result};
use crate::tokens::{encode_text, Token, TokenSeq, Tokenizer};
use crate::unigram::{meta_space_line, train_unigram, UnigramConfig, UnigramModel};
use crate::wordpiece::{train_wordpiece, WordPieceConfig, WordPieceModel};

pub const MANIFEST_FILE: &str = "model.json";
const MANIFEST_FORMAT: &str = "subtok-model/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bpe,
    Wordpiece,
    Unigram,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Bpe, Algorithm::Wordpiece, Algorithm::Unigram];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bpe => "bpe",
            Algorithm::Wordpiece => "wordpiece",
            Algorithm::Unigram => "unigram",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpe" => Ok(Algorithm::Bpe),
            "wordpiece" => Ok(Algorithm::Wordpiece),
            "unigram" | "sentencepiece" => Ok(Algorithm::Unigram),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// What a Unigram model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingInput {
    /// Pre-tokenized words.
    #[default]
    Words,
    /// Whole lines with whitespace folded into a meta-space symbol.
    RawLines,
}

/// Per-algorithm training options.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub bpe: BpeConfig,
    pub wordpiece: WordPieceConfig,
    pub unigram: UnigramConfig,
    pub unigram_input: TrainingInput,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Bpe(BpeModel),
    Wordpiece(WordPieceModel),
    Unigram(UnigramModel),
}

impl AnyModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AnyModel::Bpe(_) => Algorithm::Bpe,
            AnyModel::Wordpiece(_) => Algorithm::Wordpiece,
            AnyModel::Unigram(_) => Algorithm::Unigram,
        }
    }

    fn inner(&self) -> &dyn Tokenizer {
        match self {
            AnyModel::Bpe(m) => m,
            AnyModel::Wordpiece(m) => m,
            AnyModel::Unigram(m) => m,
        }
    }
}

impl Tokenizer for AnyModel {
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool> {
        self.inner().encode_word(word, out)
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        self.inner().decode(ids)
    }

    fn vocab_size(&self) -> usize {
        self.inner().vocab_size()
    }

    fn native_line_token_count(&self, line: &str) -> Option<Result<usize>> {
        self.inner().native_line_token_count(line)
    }
}

/// Word counts to train `algorithm` on.
pub fn training_words(
    corpus: &Corpus,
    policy: &PretokenPolicy,
    algorithm: Algorithm,
    options: &TrainOptions,
) -> WordCounts {
    if algorithm == Algorithm::Unigram && options.unigram_input == TrainingInput::RawLines {
        let mut wc = WordCounts::new();
        for doc in &corpus.documents {
            if !doc.trim().is_empty() {
                wc.add(&meta_space_line(doc), 1);
            }
        }
        wc
    } else {
        corpus.word_counts(policy)
    }
}

pub fn train_model(
    algorithm: Algorithm,
    wc: &WordCounts,
    vocab_size: usize,
    options: &TrainOptions,
) -> Result<AnyModel> {
    Ok(match algorithm {
        Algorithm::Bpe => AnyModel::Bpe(train_bpe(wc, vocab_size, &options.bpe)?),
        Algorithm::Wordpiece => {
            AnyModel::Wordpiece(train_wordpiece(wc, vocab_size, &options.wordpiece)?)
        }
        Algorithm::Unigram => {
            let config = UnigramConfig {
                meta_space: options.unigram_input == TrainingInput::RawLines,
                ..options.unigram.clone()
            };
            AnyModel::Unigram(train_unigram(wc, vocab_size, &config)?)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    algorithm: Algorithm,
    policy: PretokenPolicy,
    vocab_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bpe: Option<BpeSettings>,
}

/// A model together with the pre-tokenization policy it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDir {
    pub model: AnyModel,
    pub policy: PretokenPolicy,
}

impl ModelDir {
    pub fn new(model: AnyModel, policy: PretokenPolicy) -> Self {
        Self { model, policy }
    }

    pub fn encode(&self, text: &str) -> Result<TokenSeq> {
        encode_text(&self.model, text, &self.policy)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            format: MANIFEST_FORMAT.to_string(),
            algorithm: self.model.algorithm(),
            policy: self.policy,
            vocab_size: self.model.vocab_size(),
            bpe: match &self.model {
                AnyModel::Bpe(m) => Some(m.settings().clone()),
                _ => None,
            },
        };
        match &self.model {
            AnyModel::Bpe(m) => m.save(&dir.join("vocab.json"), &dir.join("merges.txt"))?,
            AnyModel::Wordpiece(m) => m.save(&dir.join("vocab.txt"))?,
            AnyModel::Unigram(m) => m.save(&dir.join("unigram.tsv"))?,
        }
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&serde_json::to_value(&manifest)?)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                format!("unsupported model format {:?}", manifest.format),
            ));
        }
        let model = match manifest.algorithm {
            Algorithm::Bpe => AnyModel::Bpe(BpeModel::load(
                &dir.join("vocab.json"),
                &dir.join("merges.txt"),
                manifest.bpe.unwrap_or_default(),
            )?),
            Algorithm::Wordpiece => {
                AnyModel::Wordpiece(WordPieceModel::load(&dir.join("vocab.txt"))?)
            }
            Algorithm::Unigram => AnyModel::Unigram(UnigramModel::load(&dir.join("unigram.tsv"))?),
        };
        Ok(Self {
            model,
            policy: manifest.policy,
        })
    }
}
