//! Train the three algorithms on the bundled Tibetan corpus and compare them
//! against a pure-byte baseline on a held-out, marker-annotated dataset.
//!
//!     cargo run --release --example eval_report [vocab_size]

use subtok::cli::{cmd_eval, cmd_train, EvalConfig, RunConfig, TokenizerSource, TokenizerSpec};
use subtok::corpus::PretokenPolicy;
use subtok::metrics::{BenchConfig, Role};
use subtok::model::{Algorithm, TrainOptions};

fn main() -> subtok::Result<()> {
    let vocab_size: usize = std::env::args()
        .nth(1)
        .map_or(3000, |v| v.parse().expect("vocab size"));
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let out = std::env::temp_dir().join(format!("subtok-eval-{}", std::process::id()));
    let policy = PretokenPolicy::tsheg();

    let mut tokenizers = vec![TokenizerSpec {
        name: "bytes".into(),
        role: Role::Baseline,
        source: TokenizerSource::PureBytes,
    }];
    for algorithm in Algorithm::ALL {
        let config = RunConfig {
            algorithm,
            vocab_size,
            corpus_path: data.join("tibetan_1mb.txt"),
            dataset_path: None,
            policy,
            seed: 0,
            output_dir: out.join(algorithm.to_string()),
            options: TrainOptions::default(),
            timing: BenchConfig {
                runs: 3,
                loops: Some(1),
            },
        };
        let trained = cmd_train(&config)?;
        println!("{}", trained.timing_line(&config).unwrap_or_default());
        tokenizers.push(TokenizerSpec {
            name: algorithm.to_string(),
            role: Role::Both,
            source: TokenizerSource::Model {
                path: config.output_dir,
            },
        });
    }

    let report = cmd_eval(&EvalConfig {
        dataset_path: data.join("tibetan_eval.txt"),
        policy,
        tokenizers,
        per_word_mean: true,
        dedupe: false,
        bench: None,
        seed: 0,
        output_dir: Some(out.join("report")),
    })?;
    println!("\n{}", report.to_table());
    println!("report written to {}", out.join("report").display());
    Ok(())
}
