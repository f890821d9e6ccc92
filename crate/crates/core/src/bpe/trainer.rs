use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BaseSymbols, BpeModel, BpeSettings, MergeTable};
use crate::bytes;
use crate::corpus::WordCounts;
use crate::error::{Error, Result};
use crate::parallel;
use crate::vocab::Vocab;

type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpeConfig {
    /// Pairs seen fewer times than this are never merged.
    pub min_frequency: u64,
    #[serde(flatten)]
    pub settings: BpeSettings,
}

impl Default for BpeConfig {
    fn default() -> Self {
        Self {
            min_frequency: 2,
            settings: BpeSettings::default(),
        }
    }
}

/// Heap entry: highest count first, then the lexicographically smallest
/// `(left, right)`.
struct Candidate {
    count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: Pair,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

fn base_symbols(word: &str, base: BaseSymbols) -> Vec<String> {
    match base {
        BaseSymbols::Chars => word.chars().map(String::from).collect(),
        BaseSymbols::Bytes => word
            .bytes()
            .map(|b| bytes::byte_to_char(b).to_string())
            .collect(),
    }
}

fn merge_in_word(word: &mut Vec<u32>, pair: Pair, merged: u32) -> bool {
    let mut changed = false;
    let mut i = 0;
    while i + 1 < word.len() {
        if word[i] == pair.0 && word[i + 1] == pair.1 {
            word[i] = merged;
            word.remove(i + 1);
            changed = true;
        }
        i += 1;
    }
    changed
}

/// Learn a merge table from word counts.
///
/// The vocabulary is laid out as specials, then the 256 `<0xNN>` fallback
/// pieces (character base with byte fallback only), then the base alphabet in
/// scalar order, then one piece per merge. Training stops at `vocab_size`
/// pieces or when the best pair occurs fewer than `min_frequency` times.
pub fn train_bpe(wc: &WordCounts, vocab_size: usize, config: &BpeConfig) -> Result<BpeModel> {
    let settings = &config.settings;
    let mut vocab = Vocab::new();
    for s in &settings.specials {
        vocab.push(s.as_str());
    }
    if let Some(unk) = &settings.unk_token {
        vocab.push(unk.as_str());
    }
    match settings.base {
        BaseSymbols::Chars => {
            if settings.byte_fallback {
                for b in 0..=255u8 {
                    vocab.push(bytes::fallback_piece(b));
                }
            }
            let mut alphabet: Vec<char> = wc
                .iter()
                .flat_map(|(w, _)| w.chars())
                .collect::<HashSet<_>>()
                .into_iter()
                .collect();
            alphabet.sort_unstable();
            for c in alphabet {
                vocab.push(c.to_string());
            }
        }
        BaseSymbols::Bytes => {
            for b in 0..=255u8 {
                vocab.push(bytes::byte_to_char(b).to_string());
            }
        }
    }
    if vocab_size < vocab.len() {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            minimum: vocab.len(),
        });
    }

    let mut words: Vec<(Vec<u32>, u64)> = wc
        .iter()
        .map(|(w, c)| {
            let ids = base_symbols(w, settings.base)
                .iter()
                .map(|s| vocab.id(s).expect("alphabet covers every word"))
                .collect();
            (ids, c)
        })
        .collect();

    let mut pair_counts = parallel::install(|| count_pairs(&words));
    let mut locations: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (i, (w, _)) in words.iter().enumerate() {
        for p in w.windows(2) {
            locations.entry((p[0], p[1])).or_default().insert(i);
        }
    }

    let mut names: Vec<Rc<str>> = vocab
        .pieces()
        .iter()
        .map(|p| Rc::from(p.as_str()))
        .collect();
    let candidate = |pair: Pair, count: u64, names: &[Rc<str>]| Candidate {
        count,
        left: names[pair.0 as usize].clone(),
        right: names[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(&p, &c)| candidate(p, c, &names))
        .collect();

    let mut merges = MergeTable::new();
    let mut merged_pairs: HashSet<Pair> = HashSet::new();
    while vocab.len() < vocab_size {
        let Some(top) = heap.pop() else { break };
        let actual = pair_counts.get(&top.pair).copied().unwrap_or(0);
        if actual != top.count {
            if actual > 0 {
                heap.push(candidate(top.pair, actual, &names));
            }
            continue;
        }
        if actual < config.min_frequency.max(1) {
            break;
        }

        let pair = top.pair;
        let merged_id = vocab.push(format!("{}{}", top.left, top.right));
        if merged_id as usize == names.len() {
            names.push(Rc::from(vocab.piece(merged_id).expect("just pushed")));
        }
        // A pair can re-form when a later merge rebuilds an existing piece;
        // it is applied again but only recorded once.
        if merged_pairs.insert(pair) {
            merges.push(&*top.left, &*top.right);
        }

        let mut deltas: HashMap<Pair, i64> = HashMap::new();
        let mut affected: Vec<usize> = locations
            .remove(&pair)
            .unwrap_or_default()
            .into_iter()
            .collect();
        affected.sort_unstable();
        for idx in affected {
            let (word, freq) = &mut words[idx];
            if !word.windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            let freq = *freq as i64;
            for p in word.windows(2) {
                *deltas.entry((p[0], p[1])).or_default() -= freq;
            }
            merge_in_word(word, pair, merged_id);
            for p in word.windows(2) {
                let p = (p[0], p[1]);
                *deltas.entry(p).or_default() += freq;
                locations.entry(p).or_default().insert(idx);
            }
        }
        let mut grown: Vec<Pair> = Vec::new();
        for (p, d) in deltas {
            if d == 0 {
                continue;
            }
            let entry = pair_counts.entry(p).or_insert(0);
            *entry = (*entry as i64 + d) as u64;
            if *entry == 0 {
                pair_counts.remove(&p);
            } else if d > 0 {
                grown.push(p);
            }
        }
        grown.sort_unstable();
        for p in grown {
            heap.push(candidate(p, pair_counts[&p], &names));
        }
    }

    BpeModel::from_parts(vocab, merges, settings.clone())
}

fn count_pairs(words: &[(Vec<u32>, u64)]) -> HashMap<Pair, u64> {
    words
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<Pair, u64>, (w, c)| {
            for p in w.windows(2) {
                *acc.entry((p[0], p[1])).or_default() += c;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PretokenPolicy;
    use proptest::prelude::*;

    fn plain() -> BpeConfig {
        BpeConfig {
            min_frequency: 2,
            settings: BpeSettings {
                byte_fallback: false,
                specials: vec![],
                unk_token: None,
                base: BaseSymbols::Chars,
            },
        }
    }

    /// Reference trainer: recount every pair from scratch each iteration.
    fn naive_merges(
        wc: &WordCounts,
        vocab_size: usize,
        min_frequency: u64,
    ) -> Vec<(String, String)> {
        let mut words: Vec<(Vec<String>, u64)> = wc
            .iter()
            .map(|(w, c)| (w.chars().map(String::from).collect(), c))
            .collect();
        let mut vocab: HashSet<String> =
            words.iter().flat_map(|(w, _)| w.iter().cloned()).collect();
        let mut merges: Vec<(String, String)> = Vec::new();
        while vocab.len() < vocab_size {
            let mut counts: HashMap<(String, String), u64> = HashMap::new();
            for (w, c) in &words {
                for p in w.windows(2) {
                    *counts.entry((p[0].clone(), p[1].clone())).or_default() += c;
                }
            }
            let Some((best, n)) = counts
                .into_iter()
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            else {
                break;
            };
            if n < min_frequency {
                break;
            }
            let merged = format!("{}{}", best.0, best.1);
            for (w, _) in words.iter_mut() {
                let mut i = 0;
                while i + 1 < w.len() {
                    if w[i] == best.0 && w[i + 1] == best.1 {
                        w[i] = merged.clone();
                        w.remove(i + 1);
                    }
                    i += 1;
                }
            }
            vocab.insert(merged);
            if !merges.contains(&best) {
                merges.push(best);
            }
        }
        merges
    }

    #[test]
    fn learns_most_frequent_pairs_first() {
        let wc: WordCounts = [("aaab", 2), ("ab", 1)].into_iter().collect();
        let m = train_bpe(&wc, 2 + 2, &plain()).unwrap();
        assert_eq!(
            m.merges().pairs(),
            &[("a".into(), "a".into()), ("a".into(), "b".into())]
        );
        assert_eq!(
            naive_merges(&wc, 4, 2),
            vec![
                ("a".to_string(), "a".to_string()),
                ("a".to_string(), "b".to_string())
            ]
        );
    }

    #[test]
    fn no_room_means_character_vocab() {
        let wc: WordCounts = [("aaab", 2), ("ab", 1)].into_iter().collect();
        let m = train_bpe(&wc, 2, &plain()).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.vocab().pieces(), &["a", "b"]);
    }

    #[test]
    fn too_small_is_an_error() {
        let wc: WordCounts = [("abc", 1)].into_iter().collect();
        assert!(matches!(
            train_bpe(&wc, 2, &plain()),
            Err(Error::VocabTooSmall {
                requested: 2,
                minimum: 3
            })
        ));
        let err = train_bpe(&wc, 100, &BpeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::VocabTooSmall { minimum: 260, .. }));
    }

    #[test]
    fn min_frequency_stops_training() {
        let wc: WordCounts = [("ab", 1), ("cd", 1)].into_iter().collect();
        let m = train_bpe(&wc, 100, &plain()).unwrap();
        assert!(m.merges().is_empty());
        let mut cfg = plain();
        cfg.min_frequency = 1;
        let m = train_bpe(&wc, 100, &cfg).unwrap();
        assert_eq!(m.merges().len(), 2);
        // Equal counts: lexicographic order decides.
        assert_eq!(m.merges().pairs()[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn vocabulary_layout() {
        let wc: WordCounts = [("ba", 3)].into_iter().collect();
        let m = train_bpe(&wc, 300, &BpeConfig::default()).unwrap();
        let v = m.vocab();
        assert_eq!(v.piece(0), Some("<unk>"));
        assert_eq!(v.piece(1), Some("<0x00>"));
        assert_eq!(v.piece(257), Some("a"));
        assert_eq!(v.piece(258), Some("b"));
        assert_eq!(v.piece(259), Some("ba"));
        assert_eq!(v.len(), 260);
    }

    #[test]
    fn byte_base_trains_over_utf8() {
        let wc: WordCounts = [("ཀཀ", 4)].into_iter().collect();
        let cfg = BpeConfig {
            settings: BpeSettings {
                base: BaseSymbols::Bytes,
                byte_fallback: false,
                specials: vec![],
                unk_token: None,
            },
            ..BpeConfig::default()
        };
        let m = train_bpe(&wc, 256 + 10, &cfg).unwrap();
        let seq = m.encode("ཀཀ", &PretokenPolicy::whitespace()).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(m.decode(&seq.ids).unwrap(), "ཀཀ");
    }

    #[test]
    fn training_is_deterministic() {
        let wc: WordCounts = [("abcab", 5), ("bca", 3), ("cab", 4), ("ཀཁཀཁ", 2)]
            .into_iter()
            .collect();
        let a = train_bpe(&wc, 300, &BpeConfig::default()).unwrap();
        let b = train_bpe(&wc, 300, &BpeConfig::default()).unwrap();
        assert_eq!(a.vocab().to_json(), b.vocab().to_json());
        assert_eq!(a.merges().to_text(), b.merges().to_text());
    }

    fn corpus_strategy() -> impl Strategy<Value = (WordCounts, usize)> {
        (2usize..=8).prop_flat_map(|alpha| {
            let word = prop::collection::vec(0..alpha, 1..8).prop_map(|v| {
                v.into_iter()
                    .map(|i| char::from(b'a' + i as u8))
                    .collect::<String>()
            });
            (prop::collection::vec((word, 1u64..6), 1..50), 0usize..40).prop_map(
                |(words, extra)| {
                    let mut wc = WordCounts::new();
                    for (w, c) in &words {
                        wc.add(w, *c);
                    }
                    (wc, extra)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn matches_naive_reference((wc, extra) in corpus_strategy()) {
            let alphabet = wc.iter().flat_map(|(w, _)| w.chars()).collect::<HashSet<_>>().len();
            let model = train_bpe(&wc, alphabet + extra, &plain()).unwrap();
            prop_assert_eq!(model.merges().pairs().to_vec(), naive_merges(&wc, alphabet + extra, 2));
        }

        #[test]
        fn more_vocab_never_lengthens_words((wc, extra) in corpus_strategy()) {
            let alphabet = wc.iter().flat_map(|(w, _)| w.chars()).collect::<HashSet<_>>().len();
            let small = train_bpe(&wc, alphabet + extra / 2, &plain()).unwrap();
            let large = train_bpe(&wc, alphabet + extra, &plain()).unwrap();
            prop_assert!(large.merges().pairs().starts_with(small.merges().pairs()));
            for (w, _) in wc.iter() {
                let n_small = small.encode(w, &PretokenPolicy::whitespace()).unwrap().len();
                let n_large = large.encode(w, &PretokenPolicy::whitespace()).unwrap().len();
                prop_assert!(n_large <= n_small);
            }
        }
    }
}
