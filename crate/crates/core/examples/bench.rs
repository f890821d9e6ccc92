//! Time encoding the way the execution-time table does: seven runs, loop
//! count chosen so a run lasts at least 0.2 s, mean and spread per loop.

use subtok::baselines::PretrainedEncoder;
use subtok::cli::{format_bench_table, time_encoder};
use subtok::corpus::{Corpus, PretokenPolicy};
use subtok::metrics::{bench, format_time, BenchConfig};
use subtok::model::{train_model, training_words, Algorithm, TrainOptions};

fn main() -> subtok::Result<()> {
    let policy = PretokenPolicy::whitespace();
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/toy_corpus.txt"
    ))
    .expect("toy corpus");
    let corpus = Corpus::from_text(&text, &policy, "toy");
    let options = TrainOptions::default();

    let mut rows = Vec::new();
    for alg in Algorithm::ALL {
        let words = training_words(&corpus, &policy, alg, &options);
        let size = if alg == Algorithm::Bpe { 320 } else { 60 };
        let model = train_model(alg, &words, size, &options)?;
        rows.push((
            alg.to_string(),
            time_encoder(&model, &text, &policy, BenchConfig::default())?,
        ));
    }
    let bytes = PretrainedEncoder::pure_bytes();
    rows.push((
        "bytes".into(),
        time_encoder(&bytes, &text, &policy, BenchConfig::default())?,
    ));
    print!("{}", format_bench_table(&rows));

    // Any deterministic closure can be timed; its output must not change.
    let r = bench(
        || text.split_whitespace().count(),
        BenchConfig {
            runs: 7,
            loops: Some(1000),
        },
    )?;
    println!("split_whitespace: {r}");
    println!(
        "{} / {} / {}",
        format_time(127.3),
        format_time(0.0176),
        format_time(3.2e-6)
    );
    Ok(())
}
