use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    fertility, fertility_raw, format_ratio_half_even, nsl, nsl_mean_per_word, pcw, BenchResult,
};
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

pub const REPORT_SCHEMA: &str = "metrics/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Candidate,
    Baseline,
    /// Both a row and a column of the NSL matrix.
    Both,
}

impl Role {
    fn is_candidate(self) -> bool {
        matches!(self, Role::Candidate | Role::Both)
    }

    fn is_baseline(self) -> bool {
        matches!(self, Role::Baseline | Role::Both)
    }
}

/// One tokenizer's output on the evaluation text.
#[derive(Debug, Clone)]
pub struct TokenizerRun {
    pub name: String,
    pub role: Role,
    /// Identifies the evaluation text; all runs in a report must agree.
    pub text_id: u64,
    pub seq: TokenSeq,
    /// Token count under the tokenizer's own segmentation, when it differs
    /// from the per-word encoding.
    pub raw_token_count: Option<usize>,
    pub timing: Option<BenchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub total_words: u64,
    /// Candidate, then baseline.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub nsl_matrix: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub nsl_mean_per_word: BTreeMap<String, BTreeMap<String, f64>>,
    pub token_counts: BTreeMap<String, u64>,
    pub fertility: BTreeMap<String, f64>,
    pub fertility_raw: BTreeMap<String, f64>,
    pub pcw: BTreeMap<String, f64>,
    pub continued_counts: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timing: BTreeMap<String, BenchResult>,
    /// Tokenizers that could not be evaluated, with the reason.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failures: BTreeMap<String, String>,
    pub config_echo: serde_json::Value,
}

impl MetricsReport {
    pub fn empty(config_echo: serde_json::Value) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            total_words: 0,
            nsl_matrix: BTreeMap::new(),
            nsl_mean_per_word: BTreeMap::new(),
            token_counts: BTreeMap::new(),
            fertility: BTreeMap::new(),
            fertility_raw: BTreeMap::new(),
            pcw: BTreeMap::new(),
            continued_counts: BTreeMap::new(),
            timing: BTreeMap::new(),
            failures: BTreeMap::new(),
            config_echo,
        }
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unsupported report schema {:?}",
                report.schema
            )));
        }
        Ok(report)
    }

    /// The NSL matrix with candidates as rows and baselines as columns.
    pub fn to_csv(&self) -> Result<String> {
        let baselines: BTreeSet<&str> = self
            .nsl_matrix
            .values()
            .flat_map(|row| row.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("candidate")
            .chain(baselines.iter().copied())
            .collect();
        let to_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(&header).map_err(to_err)?;
        for (cand, row) in &self.nsl_matrix {
            let mut record = vec![cand.clone()];
            record.extend(
                baselines
                    .iter()
                    .map(|b| row.get(*b).map(f64::to_string).unwrap_or_default()),
            );
            w.write_record(&record).map_err(to_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
    }

    /// Human-readable summary: NSL to four decimals, the rest to two, all
    /// rounded half-to-even.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "words: {}", self.total_words);
        if !self.nsl_matrix.is_empty() {
            let baselines: BTreeSet<&str> = self
                .nsl_matrix
                .values()
                .flat_map(|row| row.keys().map(String::as_str))
                .collect();
            let _ = writeln!(out, "\nNSL (rows: candidates, columns: baselines)");
            let _ = write!(out, "{:<24}", "");
            for b in &baselines {
                let _ = write!(out, " {b:>14}");
            }
            out.push('\n');
            for (cand, row) in &self.nsl_matrix {
                let _ = write!(out, "{cand:<24}");
                for b in &baselines {
                    let cell = row.get(*b).map(|v| format!("{v:.4}")).unwrap_or_default();
                    let _ = write!(out, " {cell:>14}");
                }
                out.push('\n');
            }
        }
        let _ = writeln!(
            out,
            "\n{:<24} {:>9} {:>13} {:>10} {:>4}",
            "tokenizer", "fertility", "fertility_raw", "continued", "pcw"
        );
        for (name, f) in &self.fertility {
            let continued = self.continued_counts[name];
            let _ = writeln!(
                out,
                "{name:<24} {f:>9.2} {:>13.2} {continued:>10} {:>4}",
                self.fertility_raw[name],
                format_ratio_half_even(continued, self.total_words, 2),
            );
        }
        if !self.timing.is_empty() {
            out.push('\n');
            for (name, t) in &self.timing {
                let _ = writeln!(out, "{name:<24} {t}");
            }
        }
        for (name, why) in &self.failures {
            let _ = writeln!(out, "failed: {name}: {why}");
        }
        out
    }
}

/// Assemble every metric for `runs`. The NSL matrix pairs each candidate
/// with each baseline; the per-word-mean variant is added when asked for.
pub fn build_report(
    runs: &[TokenizerRun],
    config_echo: serde_json::Value,
    per_word_mean: bool,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::empty(config_echo);
    let Some(first) = runs.first() else {
        return Ok(report);
    };
    let mut names = BTreeSet::new();
    for run in runs {
        if run.text_id != first.text_id || run.seq.word_count() != first.seq.word_count() {
            return Err(Error::MismatchedEvalText(format!(
                "{:?} and {:?} were evaluated on different texts",
                first.name, run.name
            )));
        }
        if !names.insert(run.name.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate tokenizer name {:?}",
                run.name
            )));
        }
    }
    report.total_words = first.seq.word_count() as u64;

    for run in runs {
        let words = run.seq.word_count();
        let p = pcw(&run.seq)?;
        report
            .token_counts
            .insert(run.name.clone(), run.seq.len() as u64);
        report
            .fertility
            .insert(run.name.clone(), fertility(&run.seq)?);
        report.fertility_raw.insert(
            run.name.clone(),
            fertility_raw(run.raw_token_count.unwrap_or(run.seq.len()), words)?,
        );
        report.pcw.insert(run.name.clone(), p.proportion());
        report
            .continued_counts
            .insert(run.name.clone(), p.continued);
        if let Some(t) = run.timing {
            report.timing.insert(run.name.clone(), t);
        }
    }

    for cand in runs.iter().filter(|r| r.role.is_candidate()) {
        for base in runs.iter().filter(|r| r.role.is_baseline()) {
            report
                .nsl_matrix
                .entry(cand.name.clone())
                .or_default()
                .insert(base.name.clone(), nsl(&cand.seq, &base.seq)?);
            if per_word_mean {
                report
                    .nsl_mean_per_word
                    .entry(cand.name.clone())
                    .or_default()
                    .insert(base.name.clone(), nsl_mean_per_word(&cand.seq, &base.seq)?);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(name: &str, role: Role, counts: &[usize]) -> TokenizerRun {
        TokenizerRun {
            name: name.into(),
            role,
            text_id: 7,
            seq: TokenSeq::from_word_token_counts(counts),
            raw_token_count: None,
            timing: None,
        }
    }

    #[test]
    fn empty_run_list() {
        let r = build_report(&[], serde_json::json!({}), false).unwrap();
        assert_eq!(r.total_words, 0);
        assert!(r.fertility.is_empty());
        assert!(r.to_json().unwrap().contains("\"schema\": \"metrics/v1\""));
    }

    #[test]
    fn matrix_and_diagonal() {
        let runs = [
            run("cand", Role::Both, &[1, 2, 1, 1]),
            run("bytes", Role::Baseline, &[3, 6, 3, 3]),
        ];
        let r = build_report(&runs, serde_json::json!({"k": 1}), true).unwrap();
        assert_eq!(r.nsl_matrix["cand"]["cand"], 1.0);
        assert_eq!(r.nsl_matrix["cand"]["bytes"], 5.0 / 15.0);
        assert!(!r.nsl_matrix.contains_key("bytes"));
        assert_eq!(r.continued_counts["cand"], 1);
        assert_eq!(r.pcw["cand"], 0.25);
        assert_eq!(r.fertility["bytes"], 15.0 / 4.0);
        assert_eq!(r.nsl_mean_per_word["cand"]["bytes"], 1.0 / 3.0);
    }

    #[test]
    fn no_baselines_no_matrix() {
        let r = build_report(
            &[run("a", Role::Candidate, &[1, 2])],
            serde_json::json!(null),
            false,
        )
        .unwrap();
        let json = r.to_json().unwrap();
        assert!(!json.contains("nsl_matrix"));
        assert!(json.contains("fertility"));
    }

    #[test]
    fn mismatched_texts_are_rejected() {
        let mut other = run("b", Role::Baseline, &[1, 1]);
        other.text_id = 8;
        let err = build_report(
            &[run("a", Role::Candidate, &[1, 1]), other],
            serde_json::json!({}),
            false,
        );
        assert!(matches!(err, Err(Error::MismatchedEvalText(_))));
        let err = build_report(
            &[
                run("a", Role::Candidate, &[1, 1]),
                run("b", Role::Baseline, &[1]),
            ],
            serde_json::json!({}),
            false,
        );
        assert!(matches!(err, Err(Error::MismatchedEvalText(_))));
    }

    #[test]
    fn serialization_is_stable_and_sorted() {
        let runs = [
            run("z", Role::Candidate, &[2, 1]),
            run("a", Role::Baseline, &[4, 2]),
        ];
        let config = serde_json::json!({"zeta": 1, "alpha": {"y": 2, "b": 3}});
        let a = build_report(&runs, config.clone(), false)
            .unwrap()
            .to_json()
            .unwrap();
        let b = build_report(&runs, config, false)
            .unwrap()
            .to_json()
            .unwrap();
        assert_eq!(a, b);
        assert!(a.find("\"alpha\"").unwrap() < a.find("\"zeta\"").unwrap());
        assert!(a.find("\"config_echo\"").unwrap() < a.find("\"schema\"").unwrap());
        let back = MetricsReport::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
    }

    #[test]
    fn csv_matrix() {
        let runs = [
            run("c1", Role::Candidate, &[1, 1]),
            run("c,2", Role::Candidate, &[2, 2]),
            run("b", Role::Baseline, &[4, 4]),
        ];
        let r = build_report(&runs, serde_json::json!({}), false).unwrap();
        assert_eq!(r.to_csv().unwrap(), "candidate,b\n\"c,2\",0.5\nc1,0.25\n");
        let table = r.to_table();
        assert!(table.contains("0.2500"));
    }
}
