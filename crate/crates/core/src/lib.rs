//! Subword tokenizers (BPE, WordPiece, Unigram) trained from a corpus, and
//! the metrics used to compare them: normalized sequence length, subword
//! fertility, proportion of continued words, and execution time.
//!
//! ```
//! use subtok::corpus::{Corpus, PretokenPolicy};
//! use subtok::model::{train_model, training_words, Algorithm, ModelDir, TrainOptions};
//!
//! let policy = PretokenPolicy::whitespace();
//! let corpus = Corpus::from_text("low lower lowest\nnew newer newest\n", &policy, "toy");
//! let options = TrainOptions::default();
//! let words = training_words(&corpus, &policy, Algorithm::Wordpiece, &options);
//! let model = train_model(Algorithm::Wordpiece, &words, 40, &options).unwrap();
//! let seq = ModelDir::new(model, policy).encode("lowest newer").unwrap();
//! assert_eq!(seq.word_count(), 2);
//! ```

pub mod baselines;
pub mod bpe;
pub mod bytes;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod pattern;
pub mod tokens;
pub mod unigram;
pub mod vocab;
pub mod wordpiece;

pub use error::{Error, Result};
