//! Normalized sequence length, subword fertility, proportion of continued
//! words, and execution time.

mod bench;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

pub use bench::{bench, bench_against, format_time, BenchConfig, BenchResult};
pub use report::{build_report, MetricsReport, Role, TokenizerRun, REPORT_SCHEMA};

/// Candidate tokens per baseline token over the whole evaluation text.
pub fn nsl(candidate: &TokenSeq, baseline: &TokenSeq) -> Result<f64> {
    if baseline.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    Ok(candidate.len() as f64 / baseline.len() as f64)
}

/// Mean over words of the per-word token ratio; the sensitivity variant of
/// [`nsl`]. Both sequences must cover the same words.
pub fn nsl_mean_per_word(candidate: &TokenSeq, baseline: &TokenSeq) -> Result<f64> {
    if baseline.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    if candidate.word_count() != baseline.word_count() {
        return Err(Error::MismatchedEvalText(format!(
            "{} words against {}",
            candidate.word_count(),
            baseline.word_count()
        )));
    }
    let sum: f64 = candidate
        .tokens_per_word()
        .zip(baseline.tokens_per_word())
        .map(|(c, b)| c as f64 / b as f64)
        .sum();
    Ok(sum / baseline.word_count() as f64)
}

/// Tokens per word.
pub fn fertility(ts: &TokenSeq) -> Result<f64> {
    if ts.word_count() == 0 {
        return Err(Error::NoWords);
    }
    Ok(ts.tokens_per_word().sum::<usize>() as f64 / ts.word_count() as f64)
}

/// Tokens per word when tokens are counted the tokenizer's own way, which
/// may cross word boundaries.
pub fn fertility_raw(raw_token_count: usize, words: usize) -> Result<f64> {
    if words == 0 {
        return Err(Error::NoWords);
    }
    Ok(raw_token_count as f64 / words as f64)
}

/// Words split into two or more tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pcw {
    pub continued: u64,
    pub words: u64,
}

impl Pcw {
    pub fn proportion(&self) -> f64 {
        self.continued as f64 / self.words as f64
    }

    /// The proportion rounded half-to-even from the exact ratio.
    pub fn rounded(&self, places: u32) -> String {
        format_ratio_half_even(self.continued, self.words, places)
    }
}

pub fn pcw(ts: &TokenSeq) -> Result<Pcw> {
    if ts.word_count() == 0 {
        return Err(Error::NoWords);
    }
    Ok(Pcw {
        continued: ts.tokens_per_word().filter(|&n| n >= 2).count() as u64,
        words: ts.word_count() as u64,
    })
}

/// `num / den` rounded half-to-even to `places` decimals, computed exactly.
pub fn format_ratio_half_even(num: u64, den: u64, places: u32) -> String {
    assert!(den > 0, "zero denominator");
    let scale = 10u128.pow(places);
    let scaled = num as u128 * scale;
    let den = den as u128;
    let (mut q, r) = (scaled / den, scaled % den);
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    if places == 0 {
        return q.to_string();
    }
    format!(
        "{}.{:0width$}",
        q / scale,
        q % scale,
        width = places as usize
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PretokenPolicy;
    use crate::wordpiece::WordPieceModel;
    use proptest::prelude::*;

    fn counts(c: &[usize]) -> TokenSeq {
        TokenSeq::from_word_token_counts(c)
    }

    #[test]
    fn nsl_definition() {
        let cand = counts(&[50]);
        let base = counts(&[100]);
        assert_eq!(nsl(&cand, &base).unwrap(), 0.5);
        assert_eq!(nsl(&base, &base).unwrap(), 1.0);
        assert!(matches!(
            nsl(&cand, &TokenSeq::default()),
            Err(Error::EmptyBaseline)
        ));
    }

    #[test]
    fn per_word_mean_differs_from_total() {
        let cand = counts(&[1, 3]);
        let base = counts(&[1, 1]);
        assert_eq!(nsl(&cand, &base).unwrap(), 2.0);
        assert_eq!(nsl_mean_per_word(&cand, &base).unwrap(), 2.0);
        let base = counts(&[2, 6]);
        assert_eq!(nsl(&cand, &base).unwrap(), 0.5);
        assert_eq!(nsl_mean_per_word(&cand, &base).unwrap(), 0.5);
        let base = counts(&[1, 6]);
        assert!((nsl_mean_per_word(&cand, &base).unwrap() - 0.75).abs() < 1e-15);
        assert!(nsl_mean_per_word(&cand, &counts(&[1])).is_err());
    }

    #[test]
    fn fertility_arithmetic() {
        // 180000 words, 234000 tokens: 54000 words of two tokens.
        let mut c = vec![1usize; 180_000];
        c[..54_000].fill(2);
        assert_eq!(fertility(&counts(&c)).unwrap(), 1.3);
        assert_eq!(fertility(&counts(&[1, 1, 1])).unwrap(), 1.0);
        assert!(matches!(
            fertility(&TokenSeq::default()),
            Err(Error::NoWords)
        ));
        assert_eq!(fertility_raw(9, 10).unwrap(), 0.9);
    }

    #[test]
    fn wordpiece_fertility_by_hand() {
        let m = WordPieceModel::from_pieces(["[UNK]", "ཀ", "ཁ", "##ི", "##ུ", "ཀི"]).unwrap();
        // ཀི → [ཀི]; ཁུ → [ཁ, ##ུ]; ཀ → [ཀ]; ཁིུ → [ཁ, ##ི, ##ུ]; x → [UNK].
        let seq = m
            .encode("ཀི ཁུ ཀ ཁིུ x", &PretokenPolicy::whitespace())
            .unwrap();
        assert_eq!(
            seq.tokens_per_word().collect::<Vec<_>>(),
            vec![1, 2, 1, 3, 1]
        );
        assert_eq!(fertility(&seq).unwrap(), 8.0 / 5.0);
        assert_eq!(
            pcw(&seq).unwrap(),
            Pcw {
                continued: 2,
                words: 5
            }
        );
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(format_ratio_half_even(49233, 180000, 2), "0.27");
        assert_eq!(format_ratio_half_even(23118, 180000, 2), "0.13");
        assert_eq!(format_ratio_half_even(15821, 180000, 2), "0.09");
        assert_eq!(format_ratio_half_even(49233, 180000, 4), "0.2735");
        assert_eq!(format_ratio_half_even(1, 8, 2), "0.12");
        assert_eq!(format_ratio_half_even(3, 8, 2), "0.38");
        assert_eq!(format_ratio_half_even(5, 2, 0), "2");
        assert_eq!(format_ratio_half_even(7, 2, 0), "4");
        assert_eq!(format_ratio_half_even(3, 1, 1), "3.0");
    }

    #[test]
    fn all_single_tokens_is_ideal() {
        let p = pcw(&counts(&[1, 1])).unwrap();
        assert_eq!((p.continued, p.proportion()), (0, 0.0));
    }

    proptest! {
        #[test]
        fn fertility_one_iff_no_continued(c in proptest::collection::vec(1usize..4, 1..50)) {
            let ts = counts(&c);
            prop_assert_eq!(fertility(&ts).unwrap() == 1.0, pcw(&ts).unwrap().continued == 0);
        }
    }
}
