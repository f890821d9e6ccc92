use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{WordPieceModel, DEFAULT_CONTINUATION_PREFIX, DEFAULT_MAX_WORD_CHARS, DEFAULT_UNK};
use crate::corpus::WordCounts;
use crate::error::{Error, Result};
use crate::vocab::Vocab;

type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPieceConfig {
    pub continuation_prefix: String,
    pub unk_token: String,
    /// Reserved pieces placed after the unknown token.
    pub specials: Vec<String>,
    pub max_word_chars: usize,
    pub min_frequency: u64,
    /// Training stops once the best score falls below this.
    pub min_score: f64,
}

impl Default for WordPieceConfig {
    fn default() -> Self {
        Self {
            continuation_prefix: DEFAULT_CONTINUATION_PREFIX.into(),
            unk_token: DEFAULT_UNK.into(),
            specials: Vec::new(),
            max_word_chars: DEFAULT_MAX_WORD_CHARS,
            min_frequency: 1,
            min_score: 0.0,
        }
    }
}

/// `pair / (left * right)` kept as exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Score {
    pair: u64,
    left: u64,
    right: u64,
}

impl Score {
    fn cmp_value(&self, other: &Self) -> Ordering {
        let lhs = self.pair as u128 * (other.left as u128 * other.right as u128);
        let rhs = other.pair as u128 * (self.left as u128 * self.right as u128);
        lhs.cmp(&rhs)
    }

    fn as_f64(&self) -> f64 {
        self.pair as f64 / (self.left as f64 * self.right as f64)
    }
}

struct Candidate {
    score: Score,
    left: Rc<str>,
    right: Rc<str>,
    pair: Pair,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .cmp_value(&other.score)
            .then_with(|| self.score.pair.cmp(&other.score.pair))
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal && self.score == other.score
    }
}

impl Eq for Candidate {}

pub(crate) fn initial_symbols(word: &str, prefix: &str) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                c.to_string()
            } else {
                format!("{prefix}{c}")
            }
        })
        .collect()
}

pub(crate) fn merged_symbol(left: &str, right: &str, prefix: &str) -> String {
    format!("{left}{}", right.strip_prefix(prefix).unwrap_or(right))
}

struct State {
    words: Vec<(Vec<u32>, u64)>,
    symbol_counts: Vec<u64>,
    pair_counts: HashMap<Pair, u64>,
    locations: HashMap<Pair, HashSet<usize>>,
    pairs_of: HashMap<u32, HashSet<Pair>>,
    names: Vec<Rc<str>>,
}

impl State {
    fn score(&self, pair: Pair) -> Option<Score> {
        let count = *self.pair_counts.get(&pair)?;
        Some(Score {
            pair: count,
            left: self.symbol_counts[pair.0 as usize],
            right: self.symbol_counts[pair.1 as usize],
        })
    }

    fn candidate(&self, pair: Pair) -> Option<Candidate> {
        Some(Candidate {
            score: self.score(pair)?,
            left: self.names[pair.0 as usize].clone(),
            right: self.names[pair.1 as usize].clone(),
            pair,
        })
    }

    fn add_word(
        &mut self,
        idx: usize,
        sign: i64,
        pairs: &mut HashMap<Pair, i64>,
        symbols: &mut HashMap<u32, i64>,
    ) {
        let (word, freq) = &self.words[idx];
        let f = *freq as i64 * sign;
        for &s in word {
            *symbols.entry(s).or_default() += f;
        }
        for w in word.windows(2) {
            let p = (w[0], w[1]);
            *pairs.entry(p).or_default() += f;
            if sign > 0 {
                self.locations.entry(p).or_default().insert(idx);
                self.pairs_of.entry(p.0).or_default().insert(p);
                self.pairs_of.entry(p.1).or_default().insert(p);
            }
        }
    }
}

/// Train a WordPiece vocabulary.
///
/// Starts from every character (word-initial characters bare, the rest
/// continuation-prefixed) and repeatedly merges the adjacent pair with the
/// highest `count(pair) / (count(left) * count(right))`. Ties go to the higher
/// pair count, then to the lexicographically smaller pair.
pub fn train_wordpiece(
    wc: &WordCounts,
    vocab_size: usize,
    config: &WordPieceConfig,
) -> Result<WordPieceModel> {
    let prefix = config.continuation_prefix.as_str();
    let mut vocab = Vocab::new();
    vocab.push(config.unk_token.as_str());
    for s in &config.specials {
        vocab.push(s.as_str());
    }
    let word_symbols: Vec<(Vec<String>, u64)> = wc
        .iter()
        .filter(|(w, _)| w.chars().count() <= config.max_word_chars)
        .map(|(w, c)| (initial_symbols(w, prefix), c))
        .collect();
    let alphabet: BTreeSet<&str> = word_symbols
        .iter()
        .flat_map(|(s, _)| s.iter().map(String::as_str))
        .collect();
    for s in alphabet {
        vocab.push(s);
    }
    if vocab_size < vocab.len() {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            minimum: vocab.len(),
        });
    }

    let words = word_symbols
        .iter()
        .map(|(syms, c)| {
            (
                syms.iter()
                    .map(|s| vocab.id(s).expect("alphabet"))
                    .collect(),
                *c,
            )
        })
        .collect();
    let mut state = State {
        words,
        symbol_counts: vec![0; vocab.len()],
        pair_counts: HashMap::new(),
        locations: HashMap::new(),
        pairs_of: HashMap::new(),
        names: vocab
            .pieces()
            .iter()
            .map(|p| Rc::from(p.as_str()))
            .collect(),
    };
    let mut pair_delta = HashMap::new();
    let mut symbol_delta = HashMap::new();
    for i in 0..state.words.len() {
        state.add_word(i, 1, &mut pair_delta, &mut symbol_delta);
    }
    for (p, d) in pair_delta.drain() {
        state.pair_counts.insert(p, d as u64);
    }
    for (s, d) in symbol_delta.drain() {
        state.symbol_counts[s as usize] = d as u64;
    }
    let mut heap: BinaryHeap<Candidate> = state
        .pair_counts
        .keys()
        .filter_map(|&p| state.candidate(p))
        .collect();

    while vocab.len() < vocab_size {
        let Some(top) = heap.pop() else { break };
        match state.score(top.pair) {
            Some(s) if s == top.score => {}
            // Stale entry; the current score has its own entry.
            _ => continue,
        }
        if top.score.as_f64() < config.min_score {
            break;
        }
        if top.score.pair < config.min_frequency {
            continue;
        }
        let pair = top.pair;
        let merged = vocab.push(merged_symbol(&top.left, &top.right, prefix));
        if merged as usize == state.names.len() {
            state
                .names
                .push(Rc::from(vocab.piece(merged).expect("just pushed")));
            state.symbol_counts.push(0);
        }

        let mut affected: Vec<usize> = state
            .locations
            .remove(&pair)
            .unwrap_or_default()
            .into_iter()
            .collect();
        affected.sort_unstable();
        for idx in affected {
            if !state.words[idx].0.windows(2).any(|w| (w[0], w[1]) == pair) {
                continue;
            }
            state.add_word(idx, -1, &mut pair_delta, &mut symbol_delta);
            let word = &mut state.words[idx].0;
            let mut i = 0;
            while i + 1 < word.len() {
                if word[i] == pair.0 && word[i + 1] == pair.1 {
                    word[i] = merged;
                    word.remove(i + 1);
                }
                i += 1;
            }
            state.add_word(idx, 1, &mut pair_delta, &mut symbol_delta);
        }

        let mut touched: HashSet<Pair> = HashSet::new();
        for (p, d) in pair_delta.drain() {
            if d == 0 {
                continue;
            }
            let entry = state.pair_counts.entry(p).or_insert(0);
            *entry = (*entry as i64 + d) as u64;
            if *entry == 0 {
                state.pair_counts.remove(&p);
            } else {
                touched.insert(p);
            }
        }
        for (s, d) in symbol_delta.drain() {
            if d == 0 {
                continue;
            }
            let c = &mut state.symbol_counts[s as usize];
            *c = (*c as i64 + d) as u64;
            if let Some(ps) = state.pairs_of.get(&s) {
                touched.extend(ps.iter().filter(|p| state.pair_counts.contains_key(p)));
            }
        }
        for p in touched {
            if let Some(c) = state.candidate(p) {
                heap.push(c);
            }
        }
    }

    WordPieceModel::new(
        vocab,
        prefix,
        config.unk_token.as_str(),
        config.max_word_chars,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PretokenPolicy;
    use proptest::prelude::*;

    /// Reference trainer: recount and rescore every pair each iteration.
    fn naive_vocab(wc: &WordCounts, vocab_size: usize) -> Vec<String> {
        let mut words: Vec<(Vec<String>, u64)> = wc
            .iter()
            .map(|(w, c)| (initial_symbols(w, "##"), c))
            .collect();
        let mut vocab: Vec<String> = vec!["[UNK]".into()];
        let alphabet: BTreeSet<String> =
            words.iter().flat_map(|(w, _)| w.iter().cloned()).collect();
        vocab.extend(alphabet);
        while vocab.len() < vocab_size {
            let mut sym: HashMap<String, u64> = HashMap::new();
            let mut pairs: HashMap<(String, String), u64> = HashMap::new();
            for (w, c) in &words {
                for s in w {
                    *sym.entry(s.clone()).or_default() += c;
                }
                for p in w.windows(2) {
                    *pairs.entry((p[0].clone(), p[1].clone())).or_default() += c;
                }
            }
            let best = pairs.into_iter().max_by(|(pa, ca), (pb, cb)| {
                let da = sym[&pa.0] as u128 * sym[&pa.1] as u128;
                let db = sym[&pb.0] as u128 * sym[&pb.1] as u128;
                (*ca as u128 * db)
                    .cmp(&(*cb as u128 * da))
                    .then(ca.cmp(cb))
                    .then_with(|| pb.cmp(pa))
            });
            let Some(((l, r), _)) = best else { break };
            let merged = merged_symbol(&l, &r, "##");
            for (w, _) in words.iter_mut() {
                let mut i = 0;
                while i + 1 < w.len() {
                    if w[i] == l && w[i + 1] == r {
                        w[i] = merged.clone();
                        w.remove(i + 1);
                    }
                    i += 1;
                }
            }
            if !vocab.contains(&merged) {
                vocab.push(merged);
            }
        }
        vocab
    }

    #[test]
    fn likelihood_score_beats_raw_frequency() {
        // (a,##b): 3 / (7 * 4) = 0.107; (c,##d): 5 / (25 * 25) = 0.008.
        let a = Score {
            pair: 3,
            left: 7,
            right: 4,
        };
        let c = Score {
            pair: 5,
            left: 25,
            right: 25,
        };
        assert_eq!(a.cmp_value(&c), Ordering::Greater);
        assert!((a.as_f64() - 3.0 / 28.0).abs() < 1e-12);
        assert!((c.as_f64() - 0.008).abs() < 1e-12);

        // A corpus with exactly those counts; `z` soaks up the extra
        // continuation occurrences with low-scoring pairs.
        let mut wc = WordCounts::new();
        wc.add("ab", 3);
        wc.add("a", 4);
        wc.add("zb", 1);
        wc.add("cd", 5);
        wc.add("c", 20);
        wc.add("zd", 20);
        wc.add("z", 100);
        let m = train_wordpiece(&wc, 7, &WordPieceConfig::default()).unwrap();
        assert_eq!(
            m.vocab().pieces(),
            &["[UNK]", "##b", "##d", "a", "c", "z", "ab"]
        );
        assert_eq!(naive_vocab(&wc, 7), m.vocab().pieces());
    }

    #[test]
    fn zero_merges_when_no_room() {
        let wc: WordCounts = [("ab", 1)].into_iter().collect();
        let m = train_wordpiece(&wc, 3, &WordPieceConfig::default()).unwrap();
        assert_eq!(m.vocab().pieces(), &["[UNK]", "##b", "a"]);
    }

    #[test]
    fn single_word_first_merge() {
        let wc: WordCounts = [("ab", 1)].into_iter().collect();
        let m = train_wordpiece(&wc, 4, &WordPieceConfig::default()).unwrap();
        assert_eq!(m.vocab().piece(3), Some("ab"));
        assert_eq!(
            m.encode("ab", &PretokenPolicy::whitespace())
                .unwrap()
                .pieces,
            vec!["ab"]
        );
    }

    #[test]
    fn too_small() {
        let wc: WordCounts = [("abc", 1)].into_iter().collect();
        assert!(matches!(
            train_wordpiece(&wc, 2, &WordPieceConfig::default()),
            Err(Error::VocabTooSmall { minimum: 4, .. })
        ));
    }

    #[test]
    fn vocabulary_words_have_fertility_one() {
        let wc: WordCounts = [("abab", 3), ("ba", 2), ("abba", 1)].into_iter().collect();
        let m = train_wordpiece(&wc, 1000, &WordPieceConfig::default()).unwrap();
        for (w, _) in wc.iter() {
            assert_eq!(
                m.encode(w, &PretokenPolicy::whitespace()).unwrap().len(),
                1,
                "{w}"
            );
        }
    }

    proptest! {
        #[test]
        fn matches_naive_reference(
            words in prop::collection::vec(("[a-e]{1,6}", 1u64..5), 1..30),
            extra in 0usize..30,
        ) {
            let mut wc = WordCounts::new();
            for (w, c) in &words {
                wc.add(w, *c);
            }
            let alphabet = naive_vocab(&wc, 0).len();
            let m = train_wordpiece(&wc, alphabet + extra, &WordPieceConfig::default()).unwrap();
            prop_assert_eq!(m.vocab().pieces().to_vec(), naive_vocab(&wc, alphabet + extra));
        }
    }
}
