use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{log_add, Lattice};
use super::{UnigramModel, DEFAULT_UNK};
use crate::corpus::WordCounts;
use crate::error::{Error, Result};
use crate::parallel;

/// Log probability given to pieces with no expected count, so they stay
/// representable without carrying measurable mass.
const FLOOR_LOG_PROB: f64 = -1.0e4;

/// Words per parallel work unit. Fixed so reductions happen in the same
/// order whatever the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnigramConfig {
    pub max_piece_length: usize,
    /// Defaults to four times the vocabulary size.
    pub seed_size: Option<usize>,
    pub em_iters: usize,
    pub shrink_factor: f64,
    pub character_coverage: f64,
    pub unk_token: Option<String>,
    /// Words are raw lines in [`super::meta_space_line`] form.
    pub meta_space: bool,
}

impl Default for UnigramConfig {
    fn default() -> Self {
        Self {
            max_piece_length: 16,
            seed_size: None,
            em_iters: 2,
            shrink_factor: 0.75,
            character_coverage: 1.0,
            unk_token: Some(DEFAULT_UNK.to_string()),
            meta_space: false,
        }
    }
}

/// Initial model: every character plus the substrings with the highest
/// frequency × length, up to `seed_size` pieces in all.
pub fn seed_vocab(
    wc: &WordCounts,
    seed_size: usize,
    max_piece_length: usize,
) -> Result<UnigramModel> {
    if max_piece_length == 0 {
        return Err(Error::InvalidArgument(
            "max_piece_length must be positive".into(),
        ));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for (word, count) in wc.iter() {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        for start in 0..bounds.len() - 1 {
            for end in start + 1..bounds.len().min(start + max_piece_length + 1) {
                *freq.entry(&word[bounds[start]..bounds[end]]).or_default() += count;
            }
        }
    }
    let mut chars: Vec<(&str, u64)> = Vec::new();
    let mut longer: Vec<(&str, u64, u64)> = Vec::new();
    for (&piece, &f) in &freq {
        let len = piece.chars().count() as u64;
        if len == 1 {
            chars.push((piece, f));
        } else {
            longer.push((piece, f, f * len));
        }
    }
    if seed_size < chars.len() {
        return Err(Error::InvalidArgument(format!(
            "seed size {seed_size} is below the {} distinct characters",
            chars.len()
        )));
    }
    chars.sort_unstable_by(|a, b| a.0.cmp(b.0));
    longer.sort_unstable_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    longer.truncate(seed_size - chars.len());

    let kept: Vec<(&str, u64)> = chars
        .into_iter()
        .chain(longer.into_iter().map(|(p, f, _)| (p, f)))
        .collect();
    let total = (kept.iter().map(|&(_, f)| f as f64).sum::<f64>()).ln();
    let pieces = kept
        .into_iter()
        .map(|(p, f)| (p.to_string(), (f as f64).ln() - total))
        .collect();
    UnigramModel::new(pieces, None)
}

/// Per-chunk result of a pass over words.
fn chunked<T, F>(words: &[(&str, u64)], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[(&str, u64)]) -> Result<T> + Sync,
{
    parallel::install(|| words.par_chunks(CHUNK).map(&f).collect())
}

/// One EM iteration. Returns the re-estimated model and the corpus
/// log-likelihood under the input model.
pub fn em_step(model: &UnigramModel, wc: &WordCounts) -> Result<(UnigramModel, f64)> {
    let words: Vec<(&str, u64)> = wc.iter().collect();
    let n = model.len();
    let parts = chunked(&words, |chunk| {
        let mut expected = vec![0.0f64; n];
        let mut ll = 0.0;
        for &(word, count) in chunk {
            let lattice = Lattice::with_unk(model, word, false);
            let (z, marginals) = lattice
                .forward_backward()
                .ok_or_else(|| Error::Uncoverable(word.to_string()))?;
            ll += count as f64 * z;
            for (edge, m) in lattice.edges().iter().zip(marginals) {
                let id = edge.piece.expect("no unknown edges") as usize;
                expected[id] += count as f64 * m;
            }
        }
        Ok((expected, ll))
    })?;

    let mut expected = vec![0.0f64; n];
    let mut ll = 0.0;
    for (part, part_ll) in parts {
        for (e, p) in expected.iter_mut().zip(part) {
            *e += p;
        }
        ll += part_ll;
    }
    let total = expected.iter().sum::<f64>().ln();
    let pieces = model
        .pieces()
        .iter()
        .zip(&expected)
        .map(|((p, _), &e)| {
            let lp = if e > 0.0 {
                (e.ln() - total).min(0.0)
            } else {
                FLOOR_LOG_PROB
            };
            (p.clone(), lp.max(FLOOR_LOG_PROB))
        })
        .collect();
    Ok((rebuild(model, pieces)?, ll))
}

fn rebuild(like: &UnigramModel, pieces: Vec<(String, f64)>) -> Result<UnigramModel> {
    Ok(UnigramModel::new(pieces, like.unk_token.clone())?.with_meta_space(like.meta_space))
}

/// Drop the removable pieces whose removal costs the least corpus
/// log-likelihood, keeping `ceil(len × keep_fraction)` pieces.
pub fn prune(model: &UnigramModel, wc: &WordCounts, keep_fraction: f64) -> Result<UnigramModel> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep fraction {keep_fraction} is outside (0, 1]"
        )));
    }
    let keep = (model.len() as f64 * keep_fraction).ceil() as usize;
    prune_to(model, wc, keep)
}

/// Corpus log-likelihood lost when each piece is removed and every Viterbi
/// path through it is rerouted.
pub(crate) fn removal_losses(model: &UnigramModel, wc: &WordCounts) -> Result<Vec<f64>> {
    let words: Vec<(&str, u64)> = wc.iter().collect();
    let n = model.len();
    let parts = chunked(&words, |chunk| {
        let mut loss = vec![0.0f64; n];
        for &(word, count) in chunk {
            let lattice = Lattice::with_unk(model, word, false);
            let best = lattice
                .viterbi(None)
                .ok_or_else(|| Error::Uncoverable(word.to_string()))?;
            let used: BTreeSet<u32> = best.edges.iter().filter_map(|e| e.piece).collect();
            for id in used {
                let delta = match lattice.viterbi(Some(id)) {
                    Some(alt) => best.score - alt.score,
                    None => f64::INFINITY,
                };
                loss[id as usize] += count as f64 * delta;
            }
        }
        Ok(loss)
    })?;
    let mut loss = vec![0.0f64; n];
    for part in parts {
        for (l, p) in loss.iter_mut().zip(part) {
            *l += p;
        }
    }
    Ok(loss)
}

pub(crate) fn prune_to(model: &UnigramModel, wc: &WordCounts, keep: usize) -> Result<UnigramModel> {
    let required = model.required_chars().len();
    if keep < required {
        return Err(Error::InvalidArgument(format!(
            "keeping {keep} pieces would drop some of the {required} required characters"
        )));
    }
    if keep >= model.len() {
        return Ok(model.clone());
    }
    let loss = removal_losses(model, wc)?;
    let mut removable: Vec<u32> = (0..model.len() as u32)
        .filter(|&id| !model.required_chars().contains(model.piece(id).unwrap()))
        .collect();
    removable.sort_by(|&a, &b| {
        loss[a as usize]
            .total_cmp(&loss[b as usize])
            .then_with(|| model.log_prob(a).total_cmp(&model.log_prob(b)))
            .then_with(|| model.piece(a).cmp(&model.piece(b)))
    });
    let dropped: BTreeSet<u32> = removable[..model.len() - keep].iter().copied().collect();
    let survivors: Vec<(String, f64)> = model
        .pieces()
        .iter()
        .enumerate()
        .filter(|(id, _)| !dropped.contains(&(*id as u32)))
        .map(|(_, p)| p.clone())
        .collect();
    let z = survivors
        .iter()
        .fold(f64::NEG_INFINITY, |acc, (_, lp)| log_add(acc, *lp));
    let pieces = survivors
        .into_iter()
        .map(|(p, lp)| (p, (lp - z).clamp(FLOOR_LOG_PROB, 0.0)))
        .collect();
    rebuild(model, pieces)
}

/// Characters covering at least `coverage` of all character occurrences,
/// most frequent first.
fn covered_chars(wc: &WordCounts, coverage: f64) -> BTreeSet<char> {
    let mut counts: HashMap<char, u64> = HashMap::new();
    for (word, count) in wc.iter() {
        for c in word.chars() {
            *counts.entry(c).or_default() += count;
        }
    }
    if coverage >= 1.0 {
        return counts.into_keys().collect();
    }
    let total: u64 = counts.values().sum();
    let mut ranked: Vec<(char, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept = BTreeSet::new();
    let mut seen = 0u64;
    for (c, n) in ranked {
        if seen as f64 >= coverage * total as f64 {
            break;
        }
        kept.insert(c);
        seen += n;
    }
    kept
}

/// Seed, then alternate EM and pruning until the piece budget is met, then
/// run a final EM pass.
pub fn train_unigram(
    wc: &WordCounts,
    vocab_size: usize,
    config: &UnigramConfig,
) -> Result<UnigramModel> {
    if !(config.shrink_factor > 0.0 && config.shrink_factor < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink factor {} is outside (0, 1)",
            config.shrink_factor
        )));
    }
    let chars = covered_chars(wc, config.character_coverage);
    let mut kept = WordCounts::new();
    for (word, count) in wc.iter() {
        if word.chars().all(|c| chars.contains(&c)) {
            kept.add(word, count);
        }
    }
    if kept.is_empty() {
        return Err(Error::NoWords);
    }
    if kept.distinct_words() < wc.distinct_words() {
        log::info!(
            "dropped {} words with characters below the coverage threshold",
            wc.distinct_words() - kept.distinct_words()
        );
    }
    let specials = usize::from(config.unk_token.is_some());
    let minimum = chars.len() + specials;
    if vocab_size < minimum {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            minimum,
        });
    }
    let target = vocab_size - specials;
    let seed_size = config.seed_size.unwrap_or(4 * vocab_size).max(chars.len());

    let seed = seed_vocab(&kept, seed_size, config.max_piece_length)?;
    let mut model = UnigramModel::new(seed.pieces, config.unk_token.clone())?
        .with_meta_space(config.meta_space);
    while model.len() > target {
        for _ in 0..config.em_iters {
            model = em_step(&model, &kept)?.0;
        }
        let shrunk = (model.len() as f64 * config.shrink_factor) as usize;
        let keep = shrunk.min(model.len() - 1).max(target);
        log::debug!("pruning {} pieces to {keep}", model.len());
        model = prune_to(&model, &kept, keep)?;
    }
    for _ in 0..config.em_iters {
        model = em_step(&model, &kept)?.0;
    }

    let mut pieces = model.pieces().to_vec();
    pieces.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rebuild(&model, pieces)
}
