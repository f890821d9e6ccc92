//! Learn BPE merges from a small corpus and watch a word get merged.

use subtok::bpe::{train_bpe, BpeConfig};
use subtok::corpus::{Corpus, PretokenPolicy};

const TEXT: &str = "low lower lowest newer newest widest\nlow low lower newest newest\n";

fn main() -> subtok::Result<()> {
    let policy = PretokenPolicy::whitespace();
    let words = Corpus::from_text(TEXT, &policy, "inline").word_counts(&policy);
    let model = train_bpe(&words, 256 + 1 + 20, &BpeConfig::default())?;

    println!("first merges:");
    for (rank, (l, r)) in model.merges().iter().take(8).enumerate() {
        println!("  {rank:>2}  {l} + {r}");
    }

    let seq = model.encode("lowest newer slow", &policy)?;
    println!("pieces: {:?}", seq.pieces);
    println!("ids:    {:?}", seq.ids);
    // Unseen characters fall back to byte pieces.
    let seq = model.encode("ŵ", &policy)?;
    println!(
        "fallback: {:?} -> {:?}",
        seq.pieces,
        model.decode(&seq.ids)?
    );
    Ok(())
}
