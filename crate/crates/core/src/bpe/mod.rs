//! Byte-Pair Encoding: an ordered merge table learned from word counts and
//! applied lowest-rank-first at encode time.

mod trainer;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytes;
use crate::corpus::PretokenPolicy;
use crate::error::{Error, Result};
use crate::tokens::{encode_text, Token, TokenSeq, Tokenizer};
use crate::vocab::Vocab;

pub use trainer::{train_bpe, BpeConfig};

/// What a word is split into before any merge applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSymbols {
    /// Unicode scalars.
    #[default]
    Chars,
    /// UTF-8 bytes, spelled in the printable byte alphabet.
    Bytes,
}

/// Ordered merges; index is rank, 0 learned first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
}

impl MergeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self {
            merges: pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    pub fn push(&mut self, left: impl Into<String>, right: impl Into<String>) {
        self.merges.push((left.into(), right.into()));
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.merges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.merges
    }

    /// One `left right` line per merge. Symbols that contain whitespace or
    /// start with a quote are written as JSON string literals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.merges {
            let _ = writeln!(out, "{} {}", escape_symbol(a), escape_symbol(b));
        }
        out
    }

    /// Parse a merges file. A leading `#version` line is skipped.
    pub fn from_text(text: &str, file: &str) -> Result<Self> {
        Ok(Self::from_pairs(
            parse_merge_lines(text, file)?
                .into_iter()
                .map(|(_, a, b)| (a, b)),
        ))
    }
}

/// Merge pairs with their 1-based line numbers.
pub(crate) fn parse_merge_lines(text: &str, file: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if (i == 0 && line.starts_with("#version")) || line.is_empty() {
            continue;
        }
        let (left, rest) =
            read_symbol(line).ok_or_else(|| Error::parse(file, i + 1, "bad left symbol"))?;
        let rest = rest
            .strip_prefix(' ')
            .ok_or_else(|| Error::parse(file, i + 1, "expected `left right`"))?;
        let (right, tail) =
            read_symbol(rest).ok_or_else(|| Error::parse(file, i + 1, "bad right symbol"))?;
        if !tail.is_empty() {
            return Err(Error::parse(file, i + 1, "trailing text after merge pair"));
        }
        out.push((i + 1, left, right));
    }
    Ok(out)
}

fn escape_symbol(s: &str) -> String {
    if s.is_empty() || s.starts_with('"') || s.chars().any(char::is_whitespace) {
        serde_json::to_string(s).expect("strings serialize")
    } else {
        s.to_string()
    }
}

fn read_symbol(s: &str) -> Option<(String, &str)> {
    if s.starts_with('"') {
        let mut it = serde_json::Deserializer::from_str(s).into_iter::<String>();
        let sym = it.next()?.ok()?;
        Some((sym, &s[it.byte_offset()..]))
    } else {
        let end = s.find(' ').unwrap_or(s.len());
        if end == 0 {
            return None;
        }
        Some((s[..end].to_string(), &s[end..]))
    }
}

/// Everything about a BPE model besides its vocabulary and merges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpeSettings {
    pub byte_fallback: bool,
    pub specials: Vec<String>,
    pub unk_token: Option<String>,
    pub base: BaseSymbols,
}

impl Default for BpeSettings {
    fn default() -> Self {
        Self {
            byte_fallback: true,
            specials: vec!["<unk>".to_string()],
            unk_token: Some("<unk>".to_string()),
            base: BaseSymbols::Chars,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpeModel {
    vocab: Vocab,
    merges: MergeTable,
    settings: BpeSettings,
    ranks: HashMap<(u32, u32), (u32, u32)>,
    byte_ids: Option<Box<[u32; 256]>>,
    unk_id: Option<u32>,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab && self.merges == other.merges && self.settings == other.settings
    }
}

impl BpeModel {
    /// Assemble and validate a model.
    pub fn from_parts(vocab: Vocab, merges: MergeTable, settings: BpeSettings) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        let mut produced: std::collections::HashSet<&str> = std::collections::HashSet::new();
        let merge_err = |rank: usize, msg: String| Error::parse("merges", rank + 1, msg);
        for (rank, (a, b)) in merges.pairs().iter().enumerate() {
            let id_of = |s: &str| {
                vocab.id(s).ok_or_else(|| {
                    merge_err(rank, format!("merge references unknown symbol {s:?}"))
                })
            };
            let (ia, ib) = (id_of(a)?, id_of(b)?);
            let merged = format!("{a}{b}");
            let im = id_of(&merged)?;
            for side in [a, b] {
                let base = side.chars().count() == 1;
                if !base && !produced.contains(side.as_str()) {
                    return Err(merge_err(
                        rank,
                        format!(
                            "{side:?} is neither a base symbol nor produced by an earlier merge"
                        ),
                    ));
                }
            }
            if ranks.insert((ia, ib), (rank as u32, im)).is_some() {
                return Err(merge_err(rank, format!("duplicate merge ({a:?}, {b:?})")));
            }
            produced.insert(merged_str(&vocab, im));
        }
        let byte_ids = if settings.byte_fallback && settings.base == BaseSymbols::Chars {
            let mut ids = Box::new([0u32; 256]);
            for b in 0..=255u8 {
                ids[b as usize] = vocab.id(&bytes::fallback_piece(b)).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "byte fallback piece {} missing",
                        bytes::fallback_piece(b)
                    ))
                })?;
            }
            Some(ids)
        } else {
            None
        };
        let unk_id = match &settings.unk_token {
            Some(unk) => Some(vocab.id(unk).ok_or_else(|| {
                Error::InvalidArgument(format!("unk token {unk:?} is not in the vocabulary"))
            })?),
            None => None,
        };
        Ok(Self {
            vocab,
            merges,
            settings,
            ranks,
            byte_ids,
            unk_id,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn merges(&self) -> &MergeTable {
        &self.merges
    }

    pub fn settings(&self) -> &BpeSettings {
        &self.settings
    }

    /// Merge ranks applied, in order, while encoding `word`.
    pub fn merge_trace(&self, word: &str) -> Result<Vec<u32>> {
        let mut trace = Vec::new();
        self.encode_symbols(word, Some(&mut trace))?;
        Ok(trace)
    }

    fn initial_symbols(&self, word: &str) -> Result<(Vec<u32>, bool)> {
        let mut ids = Vec::with_capacity(word.len());
        let mut unk = false;
        match self.settings.base {
            BaseSymbols::Bytes => {
                for &b in word.as_bytes() {
                    let c = bytes::byte_to_char(b);
                    let mut buf = [0u8; 4];
                    match self.vocab.id(c.encode_utf8(&mut buf)) {
                        Some(id) => ids.push(id),
                        None => match self.unk_id {
                            Some(u) => {
                                ids.push(u);
                                unk = true;
                            }
                            None => return Err(Error::UnknownSymbol(c.to_string())),
                        },
                    }
                }
            }
            BaseSymbols::Chars => {
                let mut buf = [0u8; 4];
                for c in word.chars() {
                    if let Some(id) = self.vocab.id(c.encode_utf8(&mut buf)) {
                        ids.push(id);
                    } else if let Some(byte_ids) = &self.byte_ids {
                        ids.extend(
                            c.encode_utf8(&mut buf)
                                .bytes()
                                .map(|b| byte_ids[b as usize]),
                        );
                    } else if let Some(u) = self.unk_id {
                        ids.push(u);
                        unk = true;
                    } else {
                        return Err(Error::UnknownSymbol(c.to_string()));
                    }
                }
            }
        }
        Ok((ids, unk))
    }

    fn encode_symbols(
        &self,
        word: &str,
        mut trace: Option<&mut Vec<u32>>,
    ) -> Result<(Vec<u32>, bool)> {
        let (mut symbols, unk) = self.initial_symbols(word)?;
        loop {
            let mut best: Option<(u32, usize, u32)> = None;
            for i in 0..symbols.len().saturating_sub(1) {
                if let Some(&(rank, merged)) = self.ranks.get(&(symbols[i], symbols[i + 1])) {
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, i, merged));
                    }
                }
            }
            let Some((rank, i, merged)) = best else { break };
            symbols[i] = merged;
            symbols.remove(i + 1);
            if let Some(t) = trace.as_deref_mut() {
                t.push(rank);
            }
        }
        Ok((symbols, unk))
    }

    pub fn encode(&self, text: &str, policy: &PretokenPolicy) -> Result<TokenSeq> {
        encode_bpe(self, text, policy)
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        decode_bpe(self, ids)
    }

    /// Write `vocab.json` (piece to id) and `merges.txt`.
    pub fn save(&self, vocab_path: &Path, merges_path: &Path) -> Result<()> {
        std::fs::write(vocab_path, self.vocab.to_json()).map_err(|e| Error::io(vocab_path, e))?;
        std::fs::write(merges_path, self.merges.to_text())
            .map_err(|e| Error::io(merges_path, e))?;
        Ok(())
    }

    pub fn load(vocab_path: &Path, merges_path: &Path, settings: BpeSettings) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let vocab = Vocab::from_json(&read(vocab_path)?, &vocab_path.display().to_string())?;
        let merges =
            MergeTable::from_text(&read(merges_path)?, &merges_path.display().to_string())?;
        Self::from_parts(vocab, merges, settings)
    }
}

fn merged_str(vocab: &Vocab, id: u32) -> &str {
    vocab.piece(id).unwrap_or_default()
}

impl Tokenizer for BpeModel {
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool> {
        let (symbols, unk) = self.encode_symbols(word, None)?;
        out.extend(
            symbols
                .into_iter()
                .map(|id| Token::new(id, merged_str(&self.vocab, id))),
        );
        Ok(unk)
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        decode_bpe(self, ids)
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}

pub fn encode_bpe(model: &BpeModel, text: &str, policy: &PretokenPolicy) -> Result<TokenSeq> {
    encode_text(model, text, policy)
}

pub fn decode_bpe(model: &BpeModel, ids: &[u32]) -> Result<String> {
    let mut buf = Vec::new();
    for &id in ids {
        let piece = model.vocab.piece_checked(id)?;
        match model.settings.base {
            BaseSymbols::Bytes => match bytes::printable_to_bytes(piece) {
                Some(b) => buf.extend(b),
                None => buf.extend_from_slice(piece.as_bytes()),
            },
            BaseSymbols::Chars => match bytes::parse_fallback_piece(piece) {
                Some(b) if model.byte_ids.is_some() => buf.push(b),
                _ => buf.extend_from_slice(piece.as_bytes()),
            },
        }
    }
    Ok(String::from_utf8(buf)
        .unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned()))
}
