//! WordPiece: likelihood-scored merges, greedy longest-match encoding, and
//! the unknown token for words that cannot be covered.

use subtok::corpus::{Corpus, PretokenPolicy};
use subtok::metrics::{fertility, pcw};
use subtok::wordpiece::{train_wordpiece, WordPieceConfig};

fn main() -> subtok::Result<()> {
    let policy = PretokenPolicy::whitespace();
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/toy_corpus.txt"
    ))
    .expect("toy corpus");
    let words = Corpus::from_text(&text, &policy, "toy").word_counts(&policy);
    let model = train_wordpiece(&words, 80, &WordPieceConfig::default())?;
    println!(
        "{} pieces, e.g. {:?}",
        model.vocab().len(),
        &model.vocab().pieces()[..12]
    );

    let seq = model.encode("the newest towers are slower than xyz", &policy)?;
    for span in &seq.word_spans {
        let pieces = &seq.pieces[span.token_start..span.token_start + span.token_count];
        println!("{:>2}: {pieces:?}", span.word_index);
    }
    println!("unknown words: {:?}", seq.unk_words);
    println!(
        "fertility {:.2}, continued {:?}",
        fertility(&seq)?,
        pcw(&seq)?
    );
    Ok(())
}
