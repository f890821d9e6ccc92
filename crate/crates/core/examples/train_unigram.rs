//! Unigram language model: seed, EM, prune, then Viterbi segmentation.

use subtok::corpus::{Corpus, PretokenPolicy};
use subtok::unigram::{em_step, seed_vocab, train_unigram, UnigramConfig};

fn main() -> subtok::Result<()> {
    let policy = PretokenPolicy::tsheg();
    let text: String = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/tibetan_1mb.txt"
    ))
    .expect("corpus")
    .lines()
    .take(300)
    .collect::<Vec<_>>()
    .join("\n");
    let words = Corpus::from_text(&text, &policy, "tibetan").word_counts(&policy);

    // The EM objective never decreases.
    let mut model = seed_vocab(&words, 2000, 8)?;
    for i in 0..4 {
        let (next, ll) = em_step(&model, &words)?;
        println!("EM {i}: log-likelihood {ll:.1}");
        model = next;
    }

    let model = train_unigram(&words, 500, &UnigramConfig::default())?;
    println!("{} pieces", model.len());
    for word in ["བཀྲ་", "ཤིས་", "གློ་"] {
        let (pieces, score) = model.viterbi_segment(word)?;
        println!("{word} -> {pieces:?} ({score:.2})");
    }
    Ok(())
}
