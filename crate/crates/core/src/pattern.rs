//! Regex pre-tokenization patterns used by byte-level tokenizers.

use std::fmt;
use std::ops::Range;
use std::sync::LazyLock;

use fancy_regex::Regex;

use crate::error::{Error, Result};

/// The GPT-2 splitting rule.
pub const GPT2_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

/// The cl100k splitting rule.
pub const CL100K_PATTERN: &str = r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+";

/// The o200k splitting rule, the default for rank files.
pub const O200K_PATTERN: &str = concat!(
    r"[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]*[\p{Ll}\p{Lm}\p{Lo}\p{M}]+(?i:'s|'t|'re|'ve|'m|'ll|'d)?",
    r"|[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]+[\p{Ll}\p{Lm}\p{Lo}\p{M}]*(?i:'s|'t|'re|'ve|'m|'ll|'d)?",
    r"|\p{N}{1,3}| ?[^\s\p{L}\p{N}]+[\r\n/]*|\s*[\r\n]+|\s+(?!\S)|\s+"
);

static GPT2: LazyLock<SplitPattern> =
    LazyLock::new(|| SplitPattern::new(GPT2_PATTERN).expect("GPT-2 pattern compiles"));

/// A compiled splitting regex. Splitting is covering: text the regex does not
/// match is emitted as its own piece, so the pieces always concatenate back
/// to the input.
#[derive(Clone)]
pub struct SplitPattern {
    source: String,
    regex: Regex,
}

impl SplitPattern {
    pub fn new(source: &str) -> Result<Self> {
        let regex = Regex::new(source)
            .map_err(|e| Error::InvalidArgument(format!("bad split pattern: {e}")))?;
        Ok(Self {
            source: source.to_string(),
            regex,
        })
    }

    pub fn gpt2() -> &'static SplitPattern {
        &GPT2
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Byte ranges of the pieces of `text`, in order, covering all of it.
    pub fn split_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut cursor = 0;
        for m in self.regex.find_iter(text) {
            let m = match m {
                Ok(m) => m,
                // Backtracking limit: the remainder becomes one piece.
                Err(_) => break,
            };
            if m.start() > cursor {
                spans.push(cursor..m.start());
            }
            if m.end() > m.start() {
                spans.push(m.start()..m.end());
            }
            cursor = m.end();
        }
        if cursor < text.len() {
            spans.push(cursor..text.len());
        }
        spans
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.split_spans(text)
            .into_iter()
            .map(|r| &text[r])
            .collect()
    }
}

impl fmt::Debug for SplitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SplitPattern").field(&self.source).finish()
    }
}

impl PartialEq for SplitPattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gpt2_attaches_leading_space() {
        assert_eq!(
            SplitPattern::gpt2().split("Hello world's  end"),
            vec!["Hello", " world", "'s", " ", " end"]
        );
    }

    #[test]
    fn all_patterns_compile_and_cover() {
        let text = "ཀ་ཁ། abc  123456\n\nHELLO there's";
        for src in [GPT2_PATTERN, CL100K_PATTERN, O200K_PATTERN] {
            let p = SplitPattern::new(src).unwrap();
            assert_eq!(p.split(text).concat(), text, "{src}");
        }
    }

    #[test]
    fn uncovered_text_becomes_its_own_piece() {
        let p = SplitPattern::new("a+").unwrap();
        assert_eq!(p.split("xaay"), vec!["x", "aa", "y"]);
    }
}
