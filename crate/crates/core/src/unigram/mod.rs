//! Unigram language-model tokenizer: pieces with log-probabilities, Viterbi
//! decoding, and EM training with likelihood-loss pruning.

mod lattice;
mod trainer;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::corpus::PretokenPolicy;
use crate::error::{Error, Result};
use crate::tokens::{encode_text, Token, TokenSeq, Tokenizer};

pub use lattice::{Edge, Lattice, Path as LatticePath};
pub use trainer::{em_step, prune, seed_vocab, train_unigram, UnigramConfig};

pub const DEFAULT_UNK: &str = "<unk>";
/// Stands in for a space when whitespace is modelled as part of the pieces.
pub const META_SPACE: char = '\u{2581}';

const TSV_HEADER: &str = "#! unigram v1";
/// Score of the unknown edge relative to the least likely piece.
const UNK_PENALTY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    pieces: Vec<(String, f64)>,
    index: HashMap<String, u32>,
    required_chars: BTreeSet<String>,
    unk_token: Option<String>,
    meta_space: bool,
    max_piece_chars: usize,
    min_log_prob: f64,
}

impl UnigramModel {
    /// Every single-character piece is treated as required.
    pub fn new(pieces: Vec<(String, f64)>, unk_token: Option<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        let mut required_chars = BTreeSet::new();
        let mut max_piece_chars = 1;
        let mut min_log_prob = 0.0f64;
        for (id, (piece, lp)) in pieces.iter().enumerate() {
            if piece.is_empty() {
                return Err(Error::InvalidArgument("empty unigram piece".into()));
            }
            if lp.is_nan() || *lp > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "log probability {lp} of {piece:?} is not <= 0"
                )));
            }
            if Some(piece) == unk_token.as_ref() {
                return Err(Error::InvalidArgument(format!(
                    "unk token {piece:?} is also a piece"
                )));
            }
            if index.insert(piece.clone(), id as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate piece {piece:?}")));
            }
            let chars = piece.chars().count();
            if chars == 1 {
                required_chars.insert(piece.clone());
            }
            max_piece_chars = max_piece_chars.max(chars);
            min_log_prob = min_log_prob.min(*lp);
        }
        Ok(Self {
            pieces,
            index,
            required_chars,
            unk_token,
            meta_space: false,
            max_piece_chars,
            min_log_prob,
        })
    }

    /// Mark the model as trained on raw lines with whitespace folded into
    /// [`META_SPACE`].
    pub fn with_meta_space(mut self, meta_space: bool) -> Self {
        self.meta_space = meta_space;
        self
    }

    pub fn meta_space(&self) -> bool {
        self.meta_space
    }

    pub fn pieces(&self) -> &[(String, f64)] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(|(p, _)| p.as_str())
    }

    pub fn log_prob(&self, id: u32) -> f64 {
        self.pieces[id as usize].1
    }

    pub fn required_chars(&self) -> &BTreeSet<String> {
        &self.required_chars
    }

    pub fn unk_token(&self) -> Option<&str> {
        self.unk_token.as_deref()
    }

    /// The unknown token follows the pieces.
    pub fn unk_id(&self) -> Option<u32> {
        self.unk_token.as_ref().map(|_| self.pieces.len() as u32)
    }

    pub fn max_piece_chars(&self) -> usize {
        self.max_piece_chars
    }

    pub(crate) fn unk_log_prob(&self) -> f64 {
        self.min_log_prob - UNK_PENALTY
    }

    /// Maximum-likelihood segmentation of `word` and its log score.
    pub fn viterbi_segment(&self, word: &str) -> Result<(Vec<String>, f64)> {
        let lattice = Lattice::build(self, word);
        let path = lattice
            .viterbi(None)
            .ok_or_else(|| Error::Uncoverable(word.to_string()))?;
        let pieces = path
            .edges
            .iter()
            .map(|e| self.edge_piece(e).to_string())
            .collect();
        Ok((pieces, path.score))
    }

    fn edge_piece(&self, edge: &Edge) -> &str {
        match edge.piece {
            Some(id) => &self.pieces[id as usize].0,
            None => self
                .unk_token
                .as_deref()
                .expect("unk edge implies unk token"),
        }
    }

    fn edge_id(&self, edge: &Edge) -> u32 {
        edge.piece
            .unwrap_or_else(|| self.unk_id().expect("unk edge implies unk token"))
    }

    pub fn encode(&self, text: &str, policy: &PretokenPolicy) -> Result<TokenSeq> {
        encode_unigram(self, text, policy)
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            match self.piece(id) {
                Some(p) => out.push_str(p),
                None if Some(id) == self.unk_id() => out.push_str(self.unk_token().unwrap()),
                None => {
                    return Err(Error::IdOutOfRange {
                        id,
                        size: self.vocab_size(),
                    })
                }
            }
        }
        if self.meta_space {
            out = out.replace(META_SPACE, " ");
            if let Some(rest) = out.strip_prefix(' ') {
                out = rest.to_string();
            }
        }
        Ok(out)
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len() + usize::from(self.unk_token.is_some())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{TSV_HEADER}\n");
        if let Some(unk) = &self.unk_token {
            out.push_str(&format!("#! unk\t{}\n", escape_field(unk)));
        }
        if self.meta_space {
            out.push_str("#! meta_space\ttrue\n");
        }
        for (piece, lp) in &self.pieces {
            out.push_str(&format!("{}\t{lp}\n", escape_field(piece)));
        }
        out
    }

    pub fn from_tsv(text: &str, file: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, TSV_HEADER)) => {}
            _ => return Err(Error::parse(file, 1, format!("expected {TSV_HEADER:?}"))),
        }
        let mut unk_token = None;
        let mut meta_space = false;
        let mut pieces = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if let Some(meta) = line.strip_prefix("#! ") {
                let (key, value) = meta
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(file, line_no, "header without a tab"))?;
                match key {
                    "unk" => unk_token = Some(unescape_field(value, file, line_no)?),
                    "meta_space" => meta_space = value == "true",
                    _ => {
                        return Err(Error::parse(
                            file,
                            line_no,
                            format!("unknown header {key:?}"),
                        ))
                    }
                }
                continue;
            }
            let (piece, lp) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(file, line_no, "expected piece<TAB>log_prob"))?;
            let lp: f64 = lp
                .parse()
                .map_err(|e| Error::parse(file, line_no, format!("bad log probability: {e}")))?;
            pieces.push((unescape_field(piece, file, line_no)?, lp));
        }
        Ok(Self::new(pieces, unk_token)?.with_meta_space(meta_space))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, &path.display().to_string())
    }
}

/// Pieces that would break the line format are written as JSON strings.
fn escape_field(piece: &str) -> String {
    if piece.starts_with('"') || piece.starts_with("#!") || piece.contains(['\t', '\n', '\r']) {
        serde_json::to_string(piece).expect("string serializes")
    } else {
        piece.to_string()
    }
}

fn unescape_field(field: &str, file: &str, line: usize) -> Result<String> {
    if field.starts_with('"') {
        serde_json::from_str(field).map_err(|e| Error::parse(file, line, format!("bad piece: {e}")))
    } else {
        Ok(field.to_string())
    }
}

/// The raw-line form used with [`META_SPACE`] models: whitespace runs become
/// one meta-space and a leading one is added.
pub fn meta_space_line(line: &str) -> String {
    let mut out = String::with_capacity(line.len() + 3);
    for word in line.split_whitespace() {
        out.push(META_SPACE);
        out.push_str(word);
    }
    if out.is_empty() {
        out.push(META_SPACE);
    }
    out
}

impl Tokenizer for UnigramModel {
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) -> Result<bool> {
        let word = if self.meta_space {
            std::borrow::Cow::Owned(meta_space_line(word))
        } else {
            std::borrow::Cow::Borrowed(word)
        };
        let lattice = Lattice::build(self, &word);
        let path = lattice
            .viterbi(None)
            .ok_or_else(|| Error::Uncoverable(word.to_string()))?;
        out.extend(
            path.edges
                .iter()
                .map(|e| Token::new(self.edge_id(e), self.edge_piece(e))),
        );
        Ok(path.uses_unk())
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        UnigramModel::decode(self, ids)
    }

    fn vocab_size(&self) -> usize {
        UnigramModel::vocab_size(self)
    }

    fn native_line_token_count(&self, line: &str) -> Option<Result<usize>> {
        if !self.meta_space {
            return None;
        }
        if line.trim().is_empty() {
            return Some(Ok(0));
        }
        let line = meta_space_line(line);
        let lattice = Lattice::build(self, &line);
        Some(
            lattice
                .viterbi(None)
                .map(|p| p.edges.len())
                .ok_or(Error::Uncoverable(line)),
        )
    }
}

pub fn encode_unigram(
    model: &UnigramModel,
    text: &str,
    policy: &PretokenPolicy,
) -> Result<TokenSeq> {
    encode_text(model, text, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(pieces: &[(&str, f64)], unk: Option<&str>) -> UnigramModel {
        UnigramModel::new(
            pieces.iter().map(|&(p, lp)| (p.to_string(), lp)).collect(),
            unk.map(String::from),
        )
        .unwrap()
    }

    /// Best score over every segmentation, by brute force.
    fn exhaustive(m: &UnigramModel, chars: &[char]) -> Option<f64> {
        if chars.is_empty() {
            return Some(0.0);
        }
        let mut best: Option<f64> = None;
        for k in 1..=chars.len() {
            let head: String = chars[..k].iter().collect();
            if let Some(id) = m.id(&head) {
                if let Some(rest) = exhaustive(m, &chars[k..]) {
                    let s = m.log_prob(id) + rest;
                    best = Some(best.map_or(s, |b: f64| b.max(s)));
                }
            }
        }
        best
    }

    #[test]
    fn viterbi_picks_the_likely_split() {
        let m = model(
            &[("a", -3.0), ("b", -3.0), ("ab", -1.0), ("ba", -2.5)],
            None,
        );
        let (pieces, score) = m.viterbi_segment("abab").unwrap();
        assert_eq!(pieces, vec!["ab", "ab"]);
        assert_eq!(score, -2.0);
    }

    #[test]
    fn uncoverable_without_unk_is_an_error() {
        let m = model(&[("a", -1.0)], None);
        assert!(matches!(
            m.viterbi_segment("ax"),
            Err(Error::Uncoverable(_))
        ));
        assert!(m.encode("ax", &PretokenPolicy::whitespace()).is_err());
    }

    #[test]
    fn unknown_characters_map_to_unk() {
        let m = model(&[("a", -1.0)], Some("<unk>"));
        let seq = m.encode("a ax", &PretokenPolicy::whitespace()).unwrap();
        assert_eq!(seq.pieces, vec!["a", "a", "<unk>"]);
        assert_eq!(seq.ids, vec![0, 0, 1]);
        assert_eq!(seq.unk_words, vec![1]);
    }

    #[test]
    fn sentence_is_concatenation_of_words() {
        let m = model(&[("a", -2.0), ("b", -2.0), ("ab", -1.0)], None);
        let policy = PretokenPolicy::whitespace();
        let both = m.encode("ab ba", &policy).unwrap();
        let mut ids = m.encode("ab", &policy).unwrap().ids;
        ids.extend(m.encode("ba", &policy).unwrap().ids);
        assert_eq!(both.ids, ids);
        assert!(m.encode("", &policy).unwrap().is_empty());
    }

    #[test]
    fn tsv_round_trip() {
        let m = model(
            &[("ཀ", -0.5), ("\tx", -1.25), ("\"q", -2.0), ("#!a", -3.0)],
            Some("<unk>"),
        )
        .with_meta_space(true);
        let text = m.to_tsv();
        assert!(text.starts_with("#! unigram v1\n#! unk\t<unk>\n"));
        assert_eq!(UnigramModel::from_tsv(&text, "m").unwrap(), m);
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let err = UnigramModel::from_tsv("#! unigram v1\na\tnope\n", "m.tsv").unwrap_err();
        assert!(err.to_string().contains("m.tsv:2"), "{err}");
        assert!(UnigramModel::from_tsv("a\t-1\n", "m").is_err());
    }

    #[test]
    fn meta_space_mode() {
        let m = model(
            &[
                ("▁", -3.0),
                ("a", -3.0),
                ("b", -3.0),
                ("▁a", -1.0),
                ("▁a▁b", -1.0),
            ],
            None,
        )
        .with_meta_space(true);
        let seq = m.encode("a b", &PretokenPolicy::whitespace()).unwrap();
        assert_eq!(seq.pieces, vec!["▁a", "▁", "b"]);
        assert_eq!(m.decode(&seq.ids).unwrap(), "a b");
        assert_eq!(m.native_line_token_count("a b").unwrap().unwrap(), 1);
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(UnigramModel::new(vec![("a".into(), 0.5)], None).is_err());
        assert!(UnigramModel::new(vec![("a".into(), -1.0), ("a".into(), -1.0)], None).is_err());
        assert!(UnigramModel::new(vec![("a".into(), -1.0)], Some("a".into())).is_err());
    }

    proptest! {
        #[test]
        fn viterbi_matches_exhaustive(
            word in "[abc]{1,10}",
            lps in proptest::collection::vec(-8.0f64..-0.01, 12),
        ) {
            let pieces = ["a", "b", "c", "ab", "bc", "ca", "abc", "aa", "bb", "cab", "bca", "aab"];
            let m = UnigramModel::new(
                pieces.iter().zip(&lps).map(|(p, lp)| (p.to_string(), *lp)).collect(),
                None,
            ).unwrap();
            let (segs, score) = m.viterbi_segment(&word).unwrap();
            let chars: Vec<char> = word.chars().collect();
            let want = exhaustive(&m, &chars).unwrap();
            prop_assert!((score - want).abs() < 1e-9);
            prop_assert_eq!(segs.concat(), word);
        }
    }
}
