//! Writes the seeded Tibetan-script training corpus used by the test suite.
//!
//!     cargo run --example synthetic_corpus -- crates/core/tests/data/tibetan_1mb.txt
//!     cargo run --example synthetic_corpus -- --dataset crates/core/tests/data/tibetan_eval.txt
//!
//! The second form writes a held-out evaluation set in the segmented
//! dataset layout: one word per whitespace-separated token, with `beg`,
//! `end` and `NUM` markers.
//!
//! Syllables are built from real consonants, vowel signs, subjoined letters
//! and suffixes; words of one to three syllables are drawn from a Zipfian
//! lexicon so that frequent subwords exist for a tokenizer to learn.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TARGET_BYTES: usize = 1 << 20;
const SEED: u64 = 20_231_113;

const CONSONANTS: &[char] = &[
    'ཀ', 'ཁ', 'ག', 'ང', 'ཅ', 'ཆ', 'ཇ', 'ཉ', 'ཏ', 'ཐ', 'ད', 'ན', 'པ', 'ཕ', 'བ', 'མ', 'ཙ', 'ཚ', 'ཛ',
    'ཝ', 'ཞ', 'ཟ', 'འ', 'ཡ', 'ར', 'ལ', 'ཤ', 'ས', 'ཧ', 'ཨ',
];
const PREFIXES: &[char] = &['ག', 'ད', 'བ', 'མ', 'འ'];
const SUBJOINED: &[char] = &['\u{0fb1}', '\u{0fb2}', '\u{0fb3}'];
const VOWELS: &[char] = &['\u{0f72}', '\u{0f74}', '\u{0f7a}', '\u{0f7c}'];
const SUFFIXES: &[char] = &['ག', 'ང', 'ད', 'ན', 'བ', 'མ', 'འ', 'ར', 'ལ', 'ས'];
const TSHEG: char = '\u{0f0b}';
const SHAD: char = '\u{0f0d}';

fn syllable(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    if rng.gen_bool(0.2) {
        s.push(PREFIXES[rng.gen_range(0..PREFIXES.len())]);
    }
    s.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())]);
    if rng.gen_bool(0.25) {
        s.push(SUBJOINED[rng.gen_range(0..SUBJOINED.len())]);
    }
    if rng.gen_bool(0.6) {
        s.push(VOWELS[rng.gen_range(0..VOWELS.len())]);
    }
    if rng.gen_bool(0.5) {
        s.push(SUFFIXES[rng.gen_range(0..SUFFIXES.len())]);
    }
    s
}

fn zipf(n: usize, exponent: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / (r as f64).powf(exponent))).expect("positive weights")
}

struct Lexicon {
    words: Vec<String>,
    rank: WeightedIndex<f64>,
}

impl Lexicon {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let syllables: Vec<String> = (0..6000).map(|_| syllable(&mut rng)).collect();
        let syllable_rank = zipf(syllables.len(), 1.0);
        let lexicon: Vec<String> = (0..12000)
            .map(|_| {
                let n = [1, 1, 2, 2, 2, 3][rng.gen_range(0..6)];
                let parts: Vec<&str> = (0..n)
                    .map(|_| syllables[syllable_rank.sample(&mut rng)].as_str())
                    .collect();
                parts.join(&TSHEG.to_string())
            })
            .collect();
        let rank = zipf(lexicon.len(), 1.05);
        Self {
            words: lexicon,
            rank,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> &str {
        &self.words[self.rank.sample(rng)]
    }
}

fn corpus(lexicon: &Lexicon, target_bytes: usize, mut rng: impl Rng) -> String {
    let mut out = String::with_capacity(target_bytes + 512);
    while out.len() < target_bytes {
        let sentences = rng.gen_range(1..=4);
        for s in 0..sentences {
            if s > 0 {
                out.push(' ');
            }
            let words = rng.gen_range(4..=14);
            for w in 0..words {
                out.push_str(lexicon.sample(&mut rng));
                if w + 1 < words {
                    out.push(TSHEG);
                }
            }
            out.push(SHAD);
        }
        out.push('\n');
    }
    out
}

fn dataset(lexicon: &Lexicon, sentences: usize, mut rng: impl Rng) -> String {
    let mut out = String::new();
    for _ in 0..sentences {
        out.push_str("beg");
        for _ in 0..rng.gen_range(4..=12) {
            out.push(' ');
            if rng.gen_bool(0.03) {
                out.push_str("NUM");
            } else {
                out.push_str(lexicon.sample(&mut rng));
            }
        }
        out.push_str(" end\n");
    }
    out
}

fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let as_dataset = args.first().is_some_and(|a| a == "--dataset");
    if as_dataset {
        args.remove(0);
    }
    let path = args.first().cloned();
    let lexicon = Lexicon::new(SEED);
    let text = if as_dataset {
        dataset(&lexicon, 400, ChaCha8Rng::seed_from_u64(SEED + 2))
    } else {
        corpus(&lexicon, TARGET_BYTES, ChaCha8Rng::seed_from_u64(SEED + 1))
    };
    let mut summary = String::new();
    let _ = write!(
        summary,
        "{} bytes, {} chars, {} lines",
        text.len(),
        text.chars().count(),
        text.lines().count()
    );
    match path {
        Some(p) => {
            std::fs::write(&p, &text).expect("write corpus");
            eprintln!("{p}: {summary}");
        }
        None => print!("{text}"),
    }
}
