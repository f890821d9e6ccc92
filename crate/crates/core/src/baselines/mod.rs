//! Loaders for pretrained tokenizers in their published file formats, so
//! trained tokenizers can be compared against them.

mod rank_file;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bpe::parse_merge_lines;
use crate::bytes;
use crate::corpus::PretokenPolicy;
use crate::error::{Error, Result};
use crate::pattern::{SplitPattern, O200K_PATTERN};
use crate::tokens::{encode_text, Token, TokenSeq, Tokenizer};
use crate::unigram::UnigramModel;
use crate::vocab::Vocab;

use rank_file::RankTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    VocabMergesBpe,
    RankFileBpe,
    UnigramTsv,
    /// One token per UTF-8 byte.
    PureBytes,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::VocabMergesBpe => "vocab_merges_bpe",
            BaselineKind::RankFileBpe => "rank_file_bpe",
            BaselineKind::UnigramTsv => "unigram_tsv",
            BaselineKind::PureBytes => "pure_bytes",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vocab_merges_bpe" | "vocab_merges" => Ok(BaselineKind::VocabMergesBpe),
            "rank_file_bpe" | "rank_file" => Ok(BaselineKind::RankFileBpe),
            "unigram_tsv" => Ok(BaselineKind::UnigramTsv),
            "pure_bytes" | "bytes" => Ok(BaselineKind::PureBytes),
            _ => Err(Error::InvalidArgument(format!(
                "unknown baseline kind {s:?}"
            ))),
        }
    }
}

/// Byte-level BPE over a piece-to-id vocabulary and a ranked merge list.
#[derive(Debug, Clone)]
struct VocabMerges {
    vocab: Vocab,
    ranks: HashMap<(String, String), u32>,
}

impl VocabMerges {
    /// Repeatedly merge every occurrence of the best-ranked adjacent pair.
    fn merge(&self, mut symbols: Vec<String>) -> Vec<String> {
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| {
                    self.ranks
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&r| (r, w))
                })
                .min_by_key(|&(r, _)| r)
                .map(|(_, w)| (w[0].clone(), w[1].clone()));
            let Some((first, second)) = best else {
                break;
            };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == first && symbols[i + 1] == second {
                    merged.push(format!("{first}{second}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }
}

#[derive(Debug, Clone)]
enum Inner {
    VocabMerges(VocabMerges),
    RankFile(RankTable),
    Unigram(UnigramModel),
    PureBytes,
}

/// A loaded pretrained tokenizer. Byte-level kinds encode any UTF-8 input
/// without unknown tokens.
#[derive(Clone)]
pub struct PretrainedEncoder {
    inner: Inner,
    pattern: Option<SplitPattern>,
}

impl fmt::Debug for PretrainedEncoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PretrainedEncoder")
            .field("kind", &self.kind())
            .field("vocab_size", &self.vocab_size())
            .field("pattern", &self.pattern.as_ref().map(SplitPattern::as_str))
            .finish()
    }
}

/// Load a `vocab.json` + `merges.txt` pair. Words are split with the GPT-2
/// rule unless another pattern is set.
pub fn load_vocab_merges(vocab_path: &Path, merges_path: &Path) -> Result<PretrainedEncoder> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    vocab_merges_from_text(
        &read(vocab_path)?,
        &vocab_path.display().to_string(),
        &read(merges_path)?,
        &merges_path.display().to_string(),
    )
}

pub fn vocab_merges_from_text(
    vocab_text: &str,
    vocab_file: &str,
    merges_text: &str,
    merges_file: &str,
) -> Result<PretrainedEncoder> {
    let vocab = Vocab::from_json(vocab_text, vocab_file)?;
    for b in 0..=255u8 {
        let sym = bytes::byte_to_char(b).to_string();
        if !vocab.contains(&sym) {
            return Err(Error::parse(
                vocab_file,
                0,
                format!("byte symbol {sym:?} for 0x{b:02X} is missing"),
            ));
        }
    }
    let mut ranks = HashMap::new();
    for (rank, (line, left, right)) in parse_merge_lines(merges_text, merges_file)?
        .into_iter()
        .enumerate()
    {
        for sym in [&left, &right, &format!("{left}{right}")] {
            if !vocab.contains(sym) {
                return Err(Error::parse(
                    merges_file,
                    line,
                    format!("merge references {sym:?}, which is not in the vocabulary"),
                ));
            }
        }
        ranks.entry((left, right)).or_insert(rank as u32);
    }
    Ok(PretrainedEncoder {
        inner: Inner::VocabMerges(VocabMerges { vocab, ranks }),
        pattern: Some(SplitPattern::gpt2().clone()),
    })
}

/// Load a `base64 rank` file. Words are split with the o200k rule unless
/// another pattern is set.
pub fn load_rank_file(path: &Path) -> Result<PretrainedEncoder> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    rank_file_from_text(&text, &path.display().to_string())
}

pub fn rank_file_from_text(text: &str, file: &str) -> Result<PretrainedEncoder> {
    Ok(PretrainedEncoder {
        inner: Inner::RankFile(RankTable::parse(text, file)?),
        pattern: Some(SplitPattern::new(O200K_PATTERN)?),
    })
}

pub fn load_unigram_tsv(path: &Path) -> Result<PretrainedEncoder> {
    Ok(PretrainedEncoder::from_unigram(UnigramModel::load(path)?))
}

impl PretrainedEncoder {
    pub fn pure_bytes() -> Self {
        Self {
            inner: Inner::PureBytes,
            pattern: None,
        }
    }

    pub fn from_unigram(model: UnigramModel) -> Self {
        Self {
            inner: Inner::Unigram(model),
            pattern: None,
        }
    }

    /// Replace the splitting rule applied inside each word; `None` encodes
    /// each word whole.
    pub fn with_pattern(mut self, pattern: Option<SplitPattern>) -> Self {
        self.pattern = pattern;
        self
    }

    pub fn pattern(&self) -> Option<&SplitPattern> {
        self.pattern.as_ref()
    }

    pub fn kind(&self) -> BaselineKind {
        match self.inner {
            Inner::VocabMerges(_) => BaselineKind::VocabMergesBpe,
            Inner::RankFile(_) => BaselineKind::RankFileBpe,
            Inner::Unigram(_) => BaselineKind::UnigramTsv,
            Inner::PureBytes => BaselineKind::PureBytes,
        }
    }

    pub fn is_byte_level(&self) -> bool {
        !matches!(self.inner, Inner::Unigram(_))
    }

    pub fn encode(&self, text: &str, policy: &PretokenPolicy) -> Result<TokenSeq> {
        encode_baseline(self, text, policy)
    }

    /// The bytes a token stands for, for byte-level kinds.
    pub fn token_bytes(&self, id: u32) -> Result<Vec<u8>> {
        let out = match &self.inner {
            Inner::VocabMerges(vm) => bytes::printable_to_bytes(vm.vocab.piece_checked(id)?),
            Inner::RankFile(t) => t.token_bytes(id).map(<[u8]>::to_vec),
            Inner::PureBytes => u8::try_from(id).ok().map(|b| vec![b]),
            Inner::Unigram(m) => m.piece(id).map(|p| p.as_bytes().to_vec()),
        };
        out.ok_or(Error::IdOutOfRange {
            id,
            size: self.vocab_size(),
        })
    }

    fn encode_chunk(&self, chunk: &str, out: &mut Vec<Token>) -> Result<bool> {
        match &self.inner {
            Inner::VocabMerges(vm) => {
                let symbols = chunk
                    .bytes()
                    .map(|b| bytes::byte_to_char(b).to_string())
                    .collect();
                for sym in vm.merge(symbols) {
                    let id = vm.vocab.id(&sym).expect("merge results are validated");
                    out.push(Token::new(id, sym));
                }
                Ok(false)
            }
            Inner::RankFile(t) => {
                let mut ids = Vec::new();
                t.encode_piece(chunk.as_bytes(), &mut ids);
                out.extend(ids.into_iter().map(|id| {
                    Token::new(
                        id,
                        bytes::bytes_to_printable(t.token_bytes(id).expect("known id")),
                    )
                }));
                Ok(false)
            }
            Inner::PureBytes => {
                out.extend(
                    chunk
                        .bytes()
                        .map(|b| Token::new(u32::from(b), bytes::byte_to_char(b).to_string())),
                );
                Ok(false)
            }
            Inner::Unigram(m) => m.encode_word(chunk, out),
        }
    }
}

impl Tokenizer for PretrainedEncoder {
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool> {
        match &self.pattern {
            Some(p) => {
                let mut unk = false;
                for chunk in p.split(word) {
                    unk |= self.encode_chunk(chunk, out)?;
                }
                Ok(unk)
            }
            None => self.encode_chunk(word, out),
        }
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        if let Inner::Unigram(m) = &self.inner {
            return m.decode(ids);
        }
        let mut buf = Vec::new();
        for &id in ids {
            buf.extend(self.token_bytes(id)?);
        }
        Ok(String::from_utf8(buf)
            .unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned()))
    }

    fn vocab_size(&self) -> usize {
        match &self.inner {
            Inner::VocabMerges(vm) => vm.vocab.len(),
            Inner::RankFile(t) => t.len(),
            Inner::Unigram(m) => m.vocab_size(),
            Inner::PureBytes => 256,
        }
    }

    fn native_line_token_count(&self, line: &str) -> Option<Result<usize>> {
        match &self.inner {
            Inner::Unigram(m) => m.native_line_token_count(line),
            _ => None,
        }
    }
}

pub fn encode_baseline(
    enc: &PretrainedEncoder,
    text: &str,
    policy: &PretokenPolicy,
) -> Result<TokenSeq> {
    encode_text(enc, text, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::{BaseSymbols, BpeModel, BpeSettings, MergeTable};
    use proptest::prelude::*;

    /// A vocab.json with every byte symbol plus `extra`.
    fn vocab_json(extra: &[&str]) -> String {
        let mut pieces: Vec<String> = (0..=255u8)
            .map(|b| bytes::byte_to_char(b).to_string())
            .collect();
        pieces.extend(extra.iter().map(|s| s.to_string()));
        Vocab::from_pieces(pieces).unwrap().to_json()
    }

    #[test]
    fn agrees_with_bpe_module_on_toy_table() {
        let vm = vocab_merges_from_text(
            &vocab_json(&["aa", "ab"]),
            "v",
            "#version: 0.2\na a\na b\n",
            "m",
        )
        .unwrap();
        let policy = PretokenPolicy::whitespace();
        let seq = vm.encode("aaab", &policy).unwrap();
        assert_eq!(seq.pieces, vec!["aa", "ab"]);

        let vocab = Vocab::from_json(&vocab_json(&["aa", "ab"]), "v").unwrap();
        let bpe = BpeModel::from_parts(
            vocab,
            MergeTable::from_pairs([("a", "a"), ("a", "b")]),
            BpeSettings {
                byte_fallback: false,
                specials: vec![],
                unk_token: None,
                base: BaseSymbols::Bytes,
            },
        )
        .unwrap();
        assert_eq!(bpe.encode("aaab", &policy).unwrap(), seq);
    }

    #[test]
    fn empty_merges_is_pure_bytes() {
        let vm = vocab_merges_from_text(&vocab_json(&[]), "v", "", "m").unwrap();
        let text = "ཀུན་ hello";
        let seq = vm.encode(text, &PretokenPolicy::whitespace()).unwrap();
        assert_eq!(seq.len(), "ཀུན་".len() + "hello".len());
        assert_eq!(seq.word_count(), 2);
    }

    #[test]
    fn mismatched_merges_report_the_line() {
        let err = vocab_merges_from_text(
            &vocab_json(&["aa"]),
            "v",
            "#version: 0.2\na a\na b\n",
            "m.txt",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(vocab_merges_from_text(r#"{"a": 0}"#, "v", "", "m").is_err());
    }

    #[test]
    fn rank_file_round_trip_ascii() {
        use base64::Engine as _;
        let enc = |b: &[u8]| base64::engine::general_purpose::STANDARD.encode(b);
        let text = format!("{} 0\n{} 1\n", enc(b"he"), enc(b"llo"));
        let rf = rank_file_from_text(&text, "r").unwrap();
        let seq = rf
            .encode("hello hello", &PretokenPolicy::whitespace())
            .unwrap();
        assert_eq!(seq.pieces, vec!["he", "l", "l", "o", "he", "l", "l", "o"]);
        assert_eq!(rf.decode(&seq.ids).unwrap(), "hellohello");
    }

    #[test]
    fn latin_ranks_leave_tibetan_as_bytes() {
        use base64::Engine as _;
        let enc = |b: &[u8]| base64::engine::general_purpose::STANDARD.encode(b);
        let lines: String = ["th", "he", "the", "in", "an"]
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{} {i}\n", enc(t.as_bytes())))
            .collect();
        let rf = rank_file_from_text(&lines, "r").unwrap();
        let policy = PretokenPolicy::tsheg();
        let text = "བཀྲ་ཤིས་བདེ་ལེགས།";
        let seq = rf.encode(text, &policy).unwrap();
        for (span, word) in seq
            .word_spans
            .iter()
            .zip(crate::corpus::pretokenize(text, &policy))
        {
            assert_eq!(span.token_count, word.len());
            assert!(span.token_count >= 3);
        }
    }

    #[test]
    fn pure_bytes_counts_bytes() {
        let pb = PretrainedEncoder::pure_bytes();
        let seq = pb.encode("ཀ a", &PretokenPolicy::whitespace()).unwrap();
        assert_eq!(seq.len(), 4);
        assert_eq!(pb.decode(&seq.ids).unwrap(), "ཀa");
    }

    #[test]
    fn unigram_baseline_passes_through() {
        let m = UnigramModel::new(
            vec![("a".into(), -0.5), ("ab".into(), -0.5), ("b".into(), -2.0)],
            None,
        )
        .unwrap();
        let enc = PretrainedEncoder::from_unigram(m.clone());
        let policy = PretokenPolicy::whitespace();
        assert_eq!(
            enc.encode("ab a", &policy).unwrap(),
            m.encode("ab a", &policy).unwrap()
        );
        assert!(!enc.is_byte_level());
    }

    #[test]
    fn kinds_parse_and_print() {
        for k in [
            BaselineKind::VocabMergesBpe,
            BaselineKind::RankFileBpe,
            BaselineKind::UnigramTsv,
            BaselineKind::PureBytes,
        ] {
            assert_eq!(k.to_string().parse::<BaselineKind>().unwrap(), k);
        }
    }

    proptest! {
        #[test]
        fn byte_level_kinds_are_total(text in "\\PC{0,40}") {
            let policy = PretokenPolicy::byte_level();
            let vm = vocab_merges_from_text(&vocab_json(&["Ġt", "Ġth"]), "v", "Ġ t\nĠt h\n", "m").unwrap();
            let rf = rank_file_from_text("dGg= 0\n", "r").unwrap();
            for enc in [vm, rf, PretrainedEncoder::pure_bytes()] {
                let seq = enc.encode(&text, &policy).unwrap();
                prop_assert!(!seq.has_unk());
                prop_assert_eq!(enc.decode(&seq.ids).unwrap(), crate::corpus::normalize(&text, &policy));
            }
        }
    }
}
