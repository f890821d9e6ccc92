//! Corpus ingestion, normalization, pre-tokenization, and extraction of word
//! lists from marker-annotated segmentation datasets.

use std::borrow::Cow;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use unicode_normalization::{is_nfc, UnicodeNormalization};

use crate::error::{Error, Result};
use crate::pattern::SplitPattern;

/// Tibetan intersyllabic mark.
pub const TSHEG: char = '\u{0F0B}';

/// Annotation tokens in segmentation datasets that are not words.
pub const DATASET_MARKERS: [&str; 6] = ["beg", "end", "mid", "#", "*", "NUM"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretokenMode {
    /// Split on runs of whitespace.
    #[default]
    Whitespace,
    /// Split on whitespace and after every tsheg.
    TshegSyllable,
    /// GPT-2 regex split; whitespace is kept as part of the pieces.
    ByteLevelRegex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Nfc,
    None,
}

/// How raw text becomes words before any subword model sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PretokenPolicy {
    pub mode: PretokenMode,
    pub normalization: Normalization,
    #[serde(default)]
    pub lowercase: bool,
}

impl PretokenPolicy {
    pub fn new(mode: PretokenMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn whitespace() -> Self {
        Self::new(PretokenMode::Whitespace)
    }

    pub fn tsheg() -> Self {
        Self::new(PretokenMode::TshegSyllable)
    }

    pub fn byte_level() -> Self {
        Self::new(PretokenMode::ByteLevelRegex)
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// True when every character of the input ends up inside some word.
    pub fn is_covering(&self) -> bool {
        self.mode == PretokenMode::ByteLevelRegex
    }
}

impl FromStr for PretokenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(Self::Whitespace),
            "tsheg_syllable" | "tsheg" => Ok(Self::TshegSyllable),
            "byte_level_regex" | "byte_level" => Ok(Self::ByteLevelRegex),
            other => Err(Error::InvalidArgument(format!(
                "unknown pre-tokenization mode {other:?}"
            ))),
        }
    }
}

impl fmt::Display for PretokenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Whitespace => "whitespace",
            Self::TshegSyllable => "tsheg_syllable",
            Self::ByteLevelRegex => "byte_level_regex",
        })
    }
}

/// Apply the policy's normalization and case folding.
pub fn normalize<'a>(text: &'a str, policy: &PretokenPolicy) -> Cow<'a, str> {
    let mut out = Cow::Borrowed(text);
    if policy.normalization == Normalization::Nfc && !is_nfc(&out) {
        out = Cow::Owned(out.nfc().collect());
    }
    if policy.lowercase && out.chars().any(char::is_uppercase) {
        out = Cow::Owned(out.to_lowercase());
    }
    out
}

/// Byte ranges of the words of `text`. Whatever lies between consecutive
/// ranges (and before the first, after the last) is whitespace that the
/// policy treats as a delimiter.
pub fn pretokenize_spans(text: &str, policy: &PretokenPolicy) -> Vec<Range<usize>> {
    match policy.mode {
        PretokenMode::Whitespace => whitespace_spans(text).collect(),
        PretokenMode::TshegSyllable => {
            let mut spans = Vec::new();
            for chunk in whitespace_spans(text) {
                let mut start = chunk.start;
                for (i, c) in text[chunk.clone()].char_indices() {
                    if c == TSHEG {
                        let end = chunk.start + i + c.len_utf8();
                        spans.push(start..end);
                        start = end;
                    }
                }
                if start < chunk.end {
                    spans.push(start..chunk.end);
                }
            }
            spans
        }
        PretokenMode::ByteLevelRegex => SplitPattern::gpt2().split_spans(text),
    }
}

pub fn pretokenize<'a>(text: &'a str, policy: &PretokenPolicy) -> Vec<&'a str> {
    pretokenize_spans(text, policy)
        .into_iter()
        .map(|r| &text[r])
        .collect()
}

fn whitespace_spans(text: &str) -> impl Iterator<Item = Range<usize>> + '_ {
    let mut start = None;
    let mut iter = text.char_indices();
    std::iter::from_fn(move || loop {
        match iter.next() {
            Some((i, c)) if c.is_whitespace() => {
                if let Some(s) = start.take() {
                    return Some(s..i);
                }
            }
            Some((i, _)) => {
                start.get_or_insert(i);
            }
            None => return start.take().map(|s| s..text.len()),
        }
    })
}

/// A newline-delimited text corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<String>,
    pub char_count: usize,
    pub source_id: String,
    trailing_newline: bool,
}

impl Corpus {
    pub fn from_text(text: &str, policy: &PretokenPolicy, source_id: impl Into<String>) -> Self {
        let trailing_newline = text.ends_with('\n');
        let body = text.strip_suffix('\n').unwrap_or(text);
        let documents: Vec<String> = if text.is_empty() {
            Vec::new()
        } else {
            body.split('\n')
                .map(|line| normalize(line, policy).into_owned())
                .collect()
        };
        let char_count = documents.iter().map(|d| d.chars().count()).sum();
        Self {
            documents,
            char_count,
            source_id: source_id.into(),
            trailing_newline,
        }
    }

    /// The corpus written back out, newline-delimited.
    pub fn to_text(&self) -> String {
        let mut out = self.documents.join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }

    /// Word counts over every document under `policy`.
    pub fn word_counts(&self, policy: &PretokenPolicy) -> WordCounts {
        let mut wc = WordCounts::new();
        for doc in &self.documents {
            for word in pretokenize(doc, policy) {
                wc.add(word, 1);
            }
        }
        wc
    }
}

pub fn load_corpus(path: impl AsRef<Path>, policy: &PretokenPolicy) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = decode_utf8(&bytes)?;
    Ok(Corpus::from_text(text, policy, path.display().to_string()))
}

pub(crate) fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        offset: e.valid_up_to(),
    })
}

/// A multiset of words that remembers first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCounts {
    entries: IndexMap<String, u64>,
    total_words: u64,
}

impl WordCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str, count: u64) {
        if count == 0 {
            return;
        }
        match self.entries.get_mut(word) {
            Some(c) => *c += count,
            None => {
                self.entries.insert(word.to_string(), count);
            }
        }
        self.total_words += count;
    }

    pub fn get(&self, word: &str) -> u64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    pub fn distinct_words(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, u64)> + Clone {
        self.entries.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Every word kept once.
    pub fn deduped(&self) -> Self {
        self.iter().map(|(w, _)| (w, 1)).collect()
    }
}

impl<'a> FromIterator<(&'a str, u64)> for WordCounts {
    fn from_iter<I: IntoIterator<Item = (&'a str, u64)>>(iter: I) -> Self {
        let mut wc = WordCounts::new();
        for (w, c) in iter {
            wc.add(w, c);
        }
        wc
    }
}

pub fn is_marker(token: &str) -> bool {
    DATASET_MARKERS.contains(&token)
}

/// Drop annotation markers and count the remaining tokens.
pub fn extract_words<S: AsRef<str>>(dataset_tokens: &[S]) -> WordCounts {
    let mut wc = WordCounts::new();
    for token in dataset_tokens {
        let token = token.as_ref();
        if !is_marker(token) {
            wc.add(token, 1);
        }
    }
    wc
}

/// Tokens of a marker-annotated dataset file (ASCII-whitespace separated).
pub fn read_dataset(path: impl AsRef<Path>, policy: &PretokenPolicy) -> Result<Vec<String>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = decode_utf8(&bytes)?;
    Ok(text
        .split_ascii_whitespace()
        .map(|t| normalize(t, policy).into_owned())
        .collect())
}

/// Expand word counts into one space-separated string, first-seen order.
pub fn concat_words(wc: &WordCounts) -> String {
    let mut out = String::new();
    for (word, count) in wc.iter() {
        for _ in 0..count {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(word);
        }
    }
    out
}
