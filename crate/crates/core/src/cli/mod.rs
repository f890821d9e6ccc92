//! Training, encoding, evaluation, and benchmarking runs driven by a
//! serializable configuration, plus the command-line front end.

mod args;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    load_rank_file, load_unigram_tsv, load_vocab_merges, BaselineKind, PretrainedEncoder,
};
use crate::corpus::{concat_words, extract_words, load_corpus, read_dataset, PretokenPolicy};
use crate::error::{Error, Result};
use crate::metrics::{
    bench, bench_against, build_report, BenchConfig, BenchResult, MetricsReport, Role, TokenizerRun,
};
use crate::model::{train_model, training_words, Algorithm, AnyModel, ModelDir, TrainOptions};
use crate::parallel;
use crate::pattern::SplitPattern;
use crate::tokens::{encode_text, native_token_count, Tokenizer};

pub use args::{exit_code, main, run, run_from_args, Cli, ExitStatus};

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub vocab_size: usize,
    pub corpus_path: PathBuf,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub policy: PretokenPolicy,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub options: TrainOptions,
    /// Timed repetitions of training; zero trains once without timing.
    #[serde(default = "default_train_timing")]
    pub timing: BenchConfig,
}

fn default_train_timing() -> BenchConfig {
    BenchConfig {
        runs: 7,
        loops: Some(1),
    }
}

pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const TIMING_FILE: &str = "timing.json";
pub const REPORT_FILE: &str = "report.json";
pub const CSV_FILE: &str = "nsl_matrix.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelDir,
    pub timing: Option<BenchResult>,
}

impl TrainOutcome {
    /// One line in the form used for training-time tables.
    pub fn timing_line(&self, config: &RunConfig) -> Option<String> {
        self.timing
            .map(|t| format!("{} (vocab {}): {t}", config.algorithm, config.vocab_size))
    }
}

/// Train, time, and write the model directory with its run configuration.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    let corpus = load_corpus(&config.corpus_path, &config.policy)?;
    log::info!(
        "training {} at vocab {} on {} characters",
        config.algorithm,
        config.vocab_size,
        corpus.char_count
    );
    let train = || -> Result<AnyModel> {
        let wc = training_words(&corpus, &config.policy, config.algorithm, &config.options);
        train_model(config.algorithm, &wc, config.vocab_size, &config.options)
    };
    let model = train()?;
    let timing = if config.timing.runs == 0 {
        None
    } else {
        Some(bench_against(
            &Some(model.clone()),
            || train().ok(),
            config.timing,
        )?)
    };
    let outcome = TrainOutcome {
        model: ModelDir::new(model, config.policy),
        timing,
    };
    outcome.model.save(&config.output_dir)?;
    write_json(&config.output_dir.join(RUN_CONFIG_FILE), config)?;
    if let Some(t) = &timing {
        write_json(&config.output_dir.join(TIMING_FILE), t)?;
    }
    Ok(outcome)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&serde_json::to_value(value)?)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncodeFlags {
    /// Write pieces instead of ids.
    pub pieces: bool,
    /// Read ids and write text.
    pub decode: bool,
}

/// Encode (or decode) `input` line by line with the model in `model_dir`.
/// `policy` overrides the model's own.
pub fn cmd_encode(
    model_dir: &Path,
    policy: Option<PretokenPolicy>,
    input: impl BufRead,
    mut output: impl Write,
    flags: EncodeFlags,
) -> Result<()> {
    let mut dir = ModelDir::load(model_dir)?;
    if let Some(p) = policy {
        dir.policy = p;
    }
    let io_err = |e| Error::io("<stdout>", e);
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if flags.decode {
            let ids = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|e| Error::parse("<input>", i + 1, format!("bad id {t:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            writeln!(output, "{}", dir.model.decode(&ids)?).map_err(io_err)?;
        } else {
            let seq = dir.encode(&line)?;
            let out = if flags.pieces {
                seq.pieces.join(" ")
            } else {
                seq.ids
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            writeln!(output, "{out}").map_err(io_err)?;
        }
    }
    Ok(())
}

/// Where a tokenizer under evaluation comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenizerSource {
    /// A trained model directory.
    Model {
        path: PathBuf,
    },
    VocabMergesBpe {
        vocab: PathBuf,
        merges: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<String>,
    },
    RankFileBpe {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<String>,
    },
    UnigramTsv {
        path: PathBuf,
    },
    PureBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    pub name: String,
    pub role: Role,
    #[serde(flatten)]
    pub source: TokenizerSource,
}

impl TokenizerSpec {
    /// `[name=]dir` for a candidate model.
    pub fn parse_model(spec: &str) -> Result<Self> {
        let (name, path) = split_name(spec);
        let path = PathBuf::from(path);
        Ok(Self {
            name: name.map_or_else(|| file_name(&path), str::to_string),
            role: Role::Candidate,
            source: TokenizerSource::Model { path },
        })
    }

    /// `[name=]<kind>[:<path>[,<path>]]` for a baseline. `model` is accepted
    /// as a kind; a `vocab_merges_bpe` path may be a directory holding
    /// `vocab.json` and `merges.txt`.
    pub fn parse_baseline(spec: &str) -> Result<Self> {
        let (name, rest) = split_name(spec);
        let (kind, paths) = match rest.split_once(':') {
            Some((k, p)) => (k, p.split(',').map(PathBuf::from).collect::<Vec<_>>()),
            None => (rest, Vec::new()),
        };
        let need = |n: usize| -> Result<()> {
            if paths.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "baseline {spec:?} needs {n} path(s) after the kind"
                )))
            }
        };
        let source = if kind == "model" {
            need(1)?;
            TokenizerSource::Model {
                path: paths[0].clone(),
            }
        } else {
            match kind.parse::<BaselineKind>()? {
                BaselineKind::VocabMergesBpe => {
                    let (vocab, merges) = match paths.as_slice() {
                        [dir] => (dir.join("vocab.json"), dir.join("merges.txt")),
                        [v, m] => (v.clone(), m.clone()),
                        _ => {
                            return Err(Error::InvalidArgument(format!(
                                "baseline {spec:?} needs a directory or vocab,merges paths"
                            )))
                        }
                    };
                    TokenizerSource::VocabMergesBpe {
                        vocab,
                        merges,
                        pattern: None,
                    }
                }
                BaselineKind::RankFileBpe => {
                    need(1)?;
                    TokenizerSource::RankFileBpe {
                        path: paths[0].clone(),
                        pattern: None,
                    }
                }
                BaselineKind::UnigramTsv => {
                    need(1)?;
                    TokenizerSource::UnigramTsv {
                        path: paths[0].clone(),
                    }
                }
                BaselineKind::PureBytes => {
                    need(0)?;
                    TokenizerSource::PureBytes
                }
            }
        };
        let default_name = match &source {
            TokenizerSource::Model { path }
            | TokenizerSource::RankFileBpe { path, .. }
            | TokenizerSource::UnigramTsv { path } => file_name(path),
            TokenizerSource::VocabMergesBpe { vocab, .. } => vocab
                .parent()
                .map(file_name)
                .filter(|n| !n.is_empty())
                .unwrap_or_else(|| "vocab_merges".into()),
            TokenizerSource::PureBytes => "bytes".into(),
        };
        Ok(Self {
            name: name.map_or(default_name, str::to_string),
            role: Role::Baseline,
            source,
        })
    }

    pub fn load(&self) -> Result<Box<dyn Tokenizer>> {
        let with_pattern =
            |enc: PretrainedEncoder, pattern: &Option<String>| -> Result<PretrainedEncoder> {
                Ok(match pattern {
                    Some(p) if p.is_empty() => enc.with_pattern(None),
                    Some(p) => enc.with_pattern(Some(SplitPattern::new(p)?)),
                    None => enc,
                })
            };
        Ok(match &self.source {
            TokenizerSource::Model { path } => Box::new(ModelDir::load(path)?.model),
            TokenizerSource::VocabMergesBpe {
                vocab,
                merges,
                pattern,
            } => Box::new(with_pattern(load_vocab_merges(vocab, merges)?, pattern)?),
            TokenizerSource::RankFileBpe { path, pattern } => {
                Box::new(with_pattern(load_rank_file(path)?, pattern)?)
            }
            TokenizerSource::UnigramTsv { path } => Box::new(load_unigram_tsv(path)?),
            TokenizerSource::PureBytes => Box::new(PretrainedEncoder::pure_bytes()),
        })
    }
}

fn split_name(spec: &str) -> (Option<&str>, &str) {
    match spec.split_once('=') {
        Some((name, rest)) if !name.is_empty() && !name.contains(['/', '\\', ':']) => {
            (Some(name), rest)
        }
        _ => (None, spec),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .or_else(|| path.components().next_back().map(|c| c.as_os_str()))
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Merge specs that name the same tokenizer as both candidate and baseline.
pub fn merge_roles(specs: Vec<TokenizerSpec>) -> Result<Vec<TokenizerSpec>> {
    let mut out: Vec<TokenizerSpec> = Vec::new();
    for spec in specs {
        match out.iter_mut().find(|s| s.name == spec.name) {
            Some(existing) if existing.source == spec.source && existing.role != spec.role => {
                existing.role = Role::Both;
            }
            Some(_) => {
                return Err(Error::InvalidArgument(format!(
                    "tokenizer name {:?} is used twice",
                    spec.name
                )))
            }
            None => out.push(spec),
        }
    }
    Ok(out)
}

/// Everything needed to reproduce an evaluation or benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub policy: PretokenPolicy,
    pub tokenizers: Vec<TokenizerSpec>,
    #[serde(default)]
    pub per_word_mean: bool,
    /// Count each distinct dataset word once.
    #[serde(default)]
    pub dedupe: bool,
    /// Time every tokenizer on the evaluation text.
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl EvalConfig {
    /// Read either a configuration or a report embedding one.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("config_echo") {
            Some(echo) => Ok(serde_json::from_value(echo.clone())?),
            None => Ok(serde_json::from_value(value)?),
        }
    }
}

/// The evaluation text: dataset words without markers, space-joined.
pub fn evaluation_text(dataset: &Path, policy: &PretokenPolicy, dedupe: bool) -> Result<String> {
    let tokens = read_dataset(dataset, policy)?;
    let mut wc = extract_words(&tokens);
    if dedupe {
        wc = wc.deduped();
    }
    if wc.is_empty() {
        return Err(Error::NoWords);
    }
    Ok(concat_words(&wc))
}

fn text_id(text: &str) -> u64 {
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    h.finish()
}

/// Encode the evaluation text with every tokenizer, optionally time them,
/// and assemble the report. A tokenizer that fails to load or encode is
/// recorded under `failures` and the rest continue.
pub fn cmd_eval(config: &EvalConfig) -> Result<MetricsReport> {
    let text = evaluation_text(&config.dataset_path, &config.policy, config.dedupe)?;
    let id = text_id(&text);
    let specs = merge_roles(config.tokenizers.clone())?;
    let policy = config.policy;

    type Loaded = (Box<dyn Tokenizer>, TokenizerRun);
    let results: Vec<(String, Result<Loaded>)> = parallel::install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let run = spec.load().and_then(|tok| {
                    let seq = encode_text(tok.as_ref(), &text, &policy)?;
                    let native = native_token_count(tok.as_ref(), &text, &policy, &seq)?;
                    let run = TokenizerRun {
                        name: spec.name.clone(),
                        role: spec.role,
                        text_id: id,
                        raw_token_count: Some(native),
                        seq,
                        timing: None,
                    };
                    Ok((tok, run))
                });
                (spec.name.clone(), run)
            })
            .collect()
    });

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (name, result) in results {
        match result {
            Ok(ok) => runs.push(ok),
            Err(e) => {
                log::warn!("{name}: {e}");
                failures.push((name, e.to_string()));
            }
        }
    }
    if let Some(bench_config) = config.bench {
        for (tok, run) in &mut runs {
            run.timing = Some(time_encoder(tok.as_ref(), &text, &policy, bench_config)?);
        }
    }
    let runs: Vec<TokenizerRun> = runs.into_iter().map(|(_, r)| r).collect();
    let mut report = build_report(&runs, serde_json::to_value(config)?, config.per_word_mean)?;
    report.failures = failures.into_iter().collect();

    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, report.to_json()?).map_err(|e| Error::io(&path, e))?;
        if !report.nsl_matrix.is_empty() {
            let path = dir.join(CSV_FILE);
            std::fs::write(&path, report.to_csv()?).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(report)
}

/// Time encoding of `text` on the calling thread.
pub fn time_encoder(
    tok: &dyn Tokenizer,
    text: &str,
    policy: &PretokenPolicy,
    config: BenchConfig,
) -> Result<BenchResult> {
    bench(
        || encode_text(tok, text, policy).map(|s| s.ids).ok(),
        config,
    )
}

/// Time every tokenizer in `config` on the evaluation text, one after
/// another. Returns `(name, timing)` rows in configuration order.
pub fn cmd_bench(config: &EvalConfig) -> Result<Vec<(String, BenchResult)>> {
    let text = evaluation_text(&config.dataset_path, &config.policy, config.dedupe)?;
    let bench_config = config.bench.unwrap_or_default();
    let mut rows = Vec::new();
    for spec in merge_roles(config.tokenizers.clone())? {
        let tok = spec.load()?;
        encode_text(tok.as_ref(), &text, &config.policy)?;
        let result = time_encoder(tok.as_ref(), &text, &config.policy, bench_config)?;
        log::info!("{}: {result}", spec.name);
        rows.push((spec.name, result));
    }
    Ok(rows)
}

/// Rows in the execution-time table format.
pub fn format_bench_table(rows: &[(String, BenchResult)]) -> String {
    let width = rows
        .iter()
        .map(|(n, _)| n.chars().count())
        .max()
        .unwrap_or(0);
    rows.iter()
        .map(|(name, r)| format!("{name:<width$}  {r}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::Token;
    use std::time::Duration;

    struct Sleeper(Duration);

    impl Tokenizer for Sleeper {
        fn encode_word(&self, _word: &str, out: &mut Vec<Token>) -> Result<bool> {
            std::thread::sleep(self.0);
            out.push(Token::new(0, "x"));
            Ok(false)
        }

        fn decode(&self, ids: &[u32]) -> Result<String> {
            Ok("x".repeat(ids.len()))
        }

        fn vocab_size(&self) -> usize {
            1
        }
    }

    #[test]
    fn sleep_ratios_order_bench_rows() {
        let policy = PretokenPolicy::whitespace();
        let config = BenchConfig {
            runs: 3,
            loops: Some(5),
        };
        let time =
            |ms| time_encoder(&Sleeper(Duration::from_millis(ms)), "a b", &policy, config).unwrap();
        let (fast, slow) = (time(1), time(4));
        assert!(fast.mean_ms < slow.mean_ms);
        let ratio = slow.mean_ms / fast.mean_ms;
        assert!((2.0..=4.5).contains(&ratio), "ratio {ratio}");
        let table = format_bench_table(&[("fast".into(), fast), ("slow".into(), slow)]);
        assert_eq!(table.lines().count(), 2);
        assert!(table.starts_with("fast  "));
    }

    #[test]
    fn baseline_specs() {
        let s = TokenizerSpec::parse_baseline("gpt2=vocab_merges_bpe:/m/gpt2").unwrap();
        assert_eq!(s.name, "gpt2");
        assert_eq!(
            s.source,
            TokenizerSource::VocabMergesBpe {
                vocab: "/m/gpt2/vocab.json".into(),
                merges: "/m/gpt2/merges.txt".into(),
                pattern: None
            }
        );
        let s = TokenizerSpec::parse_baseline("rank_file:/x/o200k_base.tiktoken").unwrap();
        assert_eq!(s.name, "o200k_base.tiktoken");
        let s = TokenizerSpec::parse_baseline("pure_bytes").unwrap();
        assert_eq!(
            (s.name.as_str(), &s.source),
            ("bytes", &TokenizerSource::PureBytes)
        );
        assert!(TokenizerSpec::parse_baseline("pure_bytes:/x").is_err());
        assert!(TokenizerSpec::parse_baseline("nope:/x").is_err());
        let m = TokenizerSpec::parse_model("out/bpe_3000").unwrap();
        assert_eq!((m.name.as_str(), m.role), ("bpe_3000", Role::Candidate));
    }

    #[test]
    fn same_tokenizer_in_both_roles_merges() {
        let specs = vec![
            TokenizerSpec::parse_model("m=out/a").unwrap(),
            TokenizerSpec::parse_baseline("m=model:out/a").unwrap(),
        ];
        let merged = merge_roles(specs).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].role, Role::Both);
        let clash = vec![
            TokenizerSpec::parse_model("m=out/a").unwrap(),
            TokenizerSpec::parse_model("m=out/b").unwrap(),
        ];
        assert!(merge_roles(clash).is_err());
    }

    #[test]
    fn eval_config_from_report_or_config() {
        let config = EvalConfig {
            dataset_path: "d.txt".into(),
            policy: PretokenPolicy::tsheg(),
            tokenizers: vec![TokenizerSpec::parse_baseline("pure_bytes").unwrap()],
            per_word_mean: false,
            dedupe: false,
            bench: None,
            seed: 3,
            output_dir: None,
        };
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(EvalConfig::from_json(&text).unwrap(), config);
        let report = MetricsReport::empty(serde_json::to_value(&config).unwrap());
        assert_eq!(
            EvalConfig::from_json(&report.to_json().unwrap()).unwrap(),
            config
        );
    }
}
