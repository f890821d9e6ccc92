use std::io::{BufReader, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{
    cmd_bench, cmd_encode, cmd_eval, cmd_train, format_bench_table, EncodeFlags, EvalConfig,
    RunConfig, TokenizerSpec,
};
use crate::corpus::{Normalization, PretokenMode, PretokenPolicy};
use crate::error::{Error, Result};
use crate::metrics::BenchConfig;
use crate::model::{Algorithm, TrainingInput};

#[derive(Debug, Parser)]
#[command(
    name = "subtok",
    version,
    about = "Train and evaluate subword tokenizers"
)]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and time the training.
    Train(TrainArgs),
    /// Encode lines of stdin to ids or pieces, or decode ids.
    Encode(EncodeArgs),
    /// Compute NSL, fertility, and continued-word metrics.
    Eval(EvalArgs),
    /// Time encoding of the evaluation text.
    Bench(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Whitespace,
    Tsheg,
    ByteLevel,
}

impl PolicyArg {
    fn policy(self, no_nfc: bool) -> PretokenPolicy {
        let mode = match self {
            PolicyArg::Whitespace => PretokenMode::Whitespace,
            PolicyArg::Tsheg => PretokenMode::TshegSyllable,
            PolicyArg::ByteLevel => PretokenMode::ByteLevelRegex,
        };
        let p = PretokenPolicy::new(mode);
        if no_nfc {
            p.with_normalization(Normalization::None)
        } else {
            p
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnigramInputArg {
    Words,
    RawLines,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// A run configuration JSON; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Skip NFC normalization.
    #[arg(long)]
    no_nfc: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Timed training repetitions; 0 trains once untimed.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    loops: Option<usize>,
    #[arg(long, value_enum)]
    unigram_input: Option<UnigramInputArg>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Model directory.
    #[arg(long)]
    model: PathBuf,
    /// Override the model's pre-tokenization policy.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    no_nfc: bool,
    /// Write pieces instead of ids.
    #[arg(long, conflicts_with = "decode")]
    pieces: bool,
    /// Read space-separated ids and write text.
    #[arg(long)]
    decode: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// An evaluation configuration, or a report to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    no_nfc: bool,
    /// Candidate model directory as `[name=]dir`.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Baseline as `[name=]kind[:path[,path]]`; kinds are vocab_merges_bpe,
    /// rank_file_bpe, unigram_tsv, pure_bytes, and model.
    #[arg(long = "baseline")]
    baselines: Vec<String>,
    /// Directory for report.json and the NSL matrix CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    per_word_mean: bool,
    /// Count each distinct dataset word once.
    #[arg(long)]
    dedupe: bool,
    /// Time each tokenizer (always on for `bench`).
    #[arg(long)]
    time: bool,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    loops: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

/// Process outcome mapped to an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Internal = 3,
}

/// Usage mistakes exit 1, bad or missing data exits 2.
pub fn exit_code(err: &Error) -> ExitStatus {
    match err {
        Error::InvalidArgument(_) => ExitStatus::Usage,
        _ => ExitStatus::Data,
    }
}

fn read_json_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn missing(flag: &str) -> Error {
    Error::InvalidArgument(format!("--{flag} is required"))
}

impl TrainArgs {
    fn into_config(self) -> Result<RunConfig> {
        let base: Option<RunConfig> = match &self.config {
            Some(p) => Some(serde_json::from_str(&read_json_file(p)?)?),
            None => None,
        };
        let mut options = base.as_ref().map(|b| b.options.clone()).unwrap_or_default();
        if let Some(input) = self.unigram_input {
            options.unigram_input = match input {
                UnigramInputArg::Words => TrainingInput::Words,
                UnigramInputArg::RawLines => TrainingInput::RawLines,
            };
        }
        let mut timing = base
            .as_ref()
            .map_or(super::default_train_timing(), |b| b.timing);
        if let Some(r) = self.runs {
            timing.runs = r;
        }
        if let Some(l) = self.loops {
            timing.loops = Some(l);
        }
        let policy = match (self.policy, &base) {
            (Some(p), _) => p.policy(self.no_nfc),
            (None, Some(b)) => b.policy,
            (None, None) => PolicyArg::Whitespace.policy(self.no_nfc),
        };
        Ok(RunConfig {
            algorithm: self
                .algo
                .or(base.as_ref().map(|b| b.algorithm))
                .ok_or_else(|| missing("algo"))?,
            vocab_size: self
                .vocab_size
                .or(base.as_ref().map(|b| b.vocab_size))
                .ok_or_else(|| missing("vocab-size"))?,
            corpus_path: self
                .corpus
                .or(base.as_ref().map(|b| b.corpus_path.clone()))
                .ok_or_else(|| missing("corpus"))?,
            dataset_path: self
                .dataset
                .or(base.as_ref().and_then(|b| b.dataset_path.clone())),
            policy,
            seed: self.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
            output_dir: self
                .out
                .or(base.as_ref().map(|b| b.output_dir.clone()))
                .ok_or_else(|| missing("out"))?,
            options,
            timing,
        })
    }
}

impl EvalArgs {
    fn into_config(self, always_time: bool) -> Result<(EvalConfig, Format)> {
        let base = match &self.config {
            Some(p) => Some(EvalConfig::from_json(&read_json_file(p)?)?),
            None => None,
        };
        let mut tokenizers = Vec::new();
        for m in &self.models {
            tokenizers.push(TokenizerSpec::parse_model(m)?);
        }
        for b in &self.baselines {
            tokenizers.push(TokenizerSpec::parse_baseline(b)?);
        }
        if tokenizers.is_empty() {
            tokenizers = base
                .as_ref()
                .map(|b| b.tokenizers.clone())
                .unwrap_or_default();
        }
        if tokenizers.is_empty() {
            return Err(Error::InvalidArgument(
                "no --model or --baseline given".into(),
            ));
        }
        let base_bench = base.as_ref().and_then(|b| b.bench);
        let bench = if always_time || self.time || base_bench.is_some() || self.runs.is_some() {
            let mut c = base_bench.unwrap_or_default();
            if let Some(r) = self.runs {
                c.runs = r;
            }
            if let Some(l) = self.loops {
                c.loops = Some(l);
            }
            Some(c)
        } else {
            None
        };
        let policy = match (self.policy, &base) {
            (Some(p), _) => p.policy(self.no_nfc),
            (None, Some(b)) => b.policy,
            (None, None) => PolicyArg::Whitespace.policy(self.no_nfc),
        };
        let config = EvalConfig {
            dataset_path: self
                .dataset
                .or(base.as_ref().map(|b| b.dataset_path.clone()))
                .ok_or_else(|| missing("dataset"))?,
            policy,
            tokenizers,
            per_word_mean: self.per_word_mean || base.as_ref().is_some_and(|b| b.per_word_mean),
            dedupe: self.dedupe || base.as_ref().is_some_and(|b| b.dedupe),
            bench,
            seed: base.as_ref().map_or(0, |b| b.seed),
            output_dir: self.out.or(base.and_then(|b| b.output_dir)),
        };
        Ok((config, self.format))
    }
}

fn bench_config_check(c: &BenchConfig) -> Result<()> {
    if c.runs == 0 || c.loops == Some(0) {
        return Err(Error::InvalidArgument(
            "--runs and --loops must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Run a parsed command line, writing data to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let io_err = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::Train(args) => {
            let config = args.into_config()?;
            if let Some(l) = config.timing.loops {
                if l == 0 {
                    return Err(Error::InvalidArgument("--loops must be at least 1".into()));
                }
            }
            let outcome = cmd_train(&config)?;
            match outcome.timing_line(&config) {
                Some(line) => writeln!(stdout, "{line}").map_err(io_err)?,
                None => writeln!(stdout, "{}", config.output_dir.display()).map_err(io_err)?,
            }
        }
        Command::Encode(args) => {
            let policy = args.policy.map(|p| p.policy(args.no_nfc));
            let flags = EncodeFlags {
                pieces: args.pieces,
                decode: args.decode,
            };
            let stdin = std::io::stdin();
            cmd_encode(
                &args.model,
                policy,
                BufReader::new(stdin.lock()),
                &mut *stdout,
                flags,
            )?;
        }
        Command::Eval(args) => {
            let (config, format) = args.into_config(false)?;
            if let Some(b) = &config.bench {
                bench_config_check(b)?;
            }
            let report = cmd_eval(&config)?;
            let text = match format {
                Format::Json => report.to_json()?,
                Format::Csv => report.to_csv()?,
                Format::Table => report.to_table(),
            };
            stdout.write_all(text.as_bytes()).map_err(io_err)?;
            if !report.failures.is_empty() {
                return Err(Error::TokenizersFailed(
                    report.failures.keys().cloned().collect(),
                ));
            }
        }
        Command::Bench(args) => {
            let (config, _) = args.into_config(true)?;
            if let Some(b) = &config.bench {
                bench_config_check(b)?;
            }
            let rows = cmd_bench(&config)?;
            stdout
                .write_all(format_bench_table(&rows).as_bytes())
                .map_err(io_err)?;
        }
    }
    Ok(())
}

/// Parse `argv`, run, and return the exit code. Panics are caught and
/// reported as internal errors.
pub fn run_from_args<I, T>(argv: I, stdout: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Ok
            };
        }
    };
    init_logging(cli.verbose);
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli, stdout))) {
        Ok(Ok(())) => ExitStatus::Ok,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => ExitStatus::Internal,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Entry point for the `subtok` binary.
pub fn main() -> ! {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let status = run_from_args(std::env::args_os(), &mut lock);
    let _ = lock.flush();
    std::process::exit(status as i32)
}
