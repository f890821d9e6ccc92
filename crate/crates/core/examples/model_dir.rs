//! Save a trained model with its pre-tokenization policy, load it back, and
//! round-trip text losslessly under the byte-level policy.

use subtok::corpus::{Corpus, Normalization, PretokenPolicy};
use subtok::model::{train_model, training_words, Algorithm, ModelDir, TrainOptions};
use subtok::tokens::Tokenizer;

fn main() -> subtok::Result<()> {
    let policy = PretokenPolicy::byte_level().with_normalization(Normalization::None);
    let text = "the lower tower is newer than the lowest tower\n  newer towers, lower roads\n";
    let corpus = Corpus::from_text(text, &policy, "inline");
    let options = TrainOptions::default();
    let dir = std::env::temp_dir().join(format!("subtok-model-{}", std::process::id()));

    for alg in Algorithm::ALL {
        let words = training_words(&corpus, &policy, alg, &options);
        let size = if alg == Algorithm::Bpe { 300 } else { 50 };
        let model = ModelDir::new(train_model(alg, &words, size, &options)?, policy);
        let path = dir.join(alg.to_string());
        model.save(&path)?;

        let loaded = ModelDir::load(&path)?;
        let input = "the newest  tower,";
        let seq = loaded.encode(input)?;
        let back = loaded.model.decode(&seq.ids)?;
        let files: Vec<String> = std::fs::read_dir(&path)
            .expect("model dir")
            .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
            .collect();
        println!(
            "{alg:>9}: {:?} {:?} lossless={} files={files:?}",
            seq.pieces,
            seq.unk_words,
            back == input
        );
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
