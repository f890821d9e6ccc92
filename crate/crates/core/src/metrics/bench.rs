use std::fmt;
use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest run accepted when the loop count is fixed; shorter runs are
/// repeated with ten times the loops.
const MIN_RUN: Duration = Duration::from_micros(200);
/// Target run length when the loop count is chosen automatically.
const AUTO_RUN: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub runs: usize,
    /// `None` picks the smallest of 1, 2, 5, 10, 20, 50, ... loops whose run
    /// takes at least 0.2 s.
    pub loops: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            runs: 7,
            loops: None,
        }
    }
}

/// Per-loop timing: mean and population standard deviation of the run
/// means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub runs: usize,
    pub loops_per_run: usize,
}

impl BenchResult {
    pub fn from_run_means(run_means: &[Duration], loops_per_run: usize) -> Self {
        let ms: Vec<f64> = run_means.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        let n = ms.len() as f64;
        let mean = ms.iter().sum::<f64>() / n;
        let var = ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean_ms: mean,
            stddev_ms: var.sqrt(),
            runs: ms.len(),
            loops_per_run,
        }
    }

    /// `"<mean> ± <std>"`, the form used for training times.
    pub fn short(&self) -> String {
        format!(
            "{} ± {}",
            format_time(self.mean_ms / 1e3),
            format_time(self.stddev_ms / 1e3)
        )
    }
}

impl fmt::Display for BenchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} per loop (mean ± std. dev. of {} run{}, {} loop{} each)",
            self.short(),
            self.runs,
            if self.runs == 1 { "" } else { "s" },
            group_thousands(self.loops_per_run),
            if self.loops_per_run == 1 { "" } else { "s" },
        )
    }
}

fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// A duration in seconds with three significant digits and the largest
/// unit among s, ms, µs, ns that keeps the number at least 1. A minute or
/// more is written as whole units, e.g. `2min 7s`.
pub fn format_time(seconds: f64) -> String {
    if seconds >= 60.0 {
        let mut parts = Vec::new();
        let mut left = seconds;
        for (suffix, len) in [("d", 86400.0), ("h", 3600.0), ("min", 60.0), ("s", 1.0)] {
            let value = (left / len).floor();
            if value > 0.0 {
                left %= len;
                parts.push(format!("{value}{suffix}"));
            }
            if left < 1.0 {
                break;
            }
        }
        return parts.join(" ");
    }
    let order = if seconds > 0.0 {
        (-(seconds.log10().floor() as i64).div_euclid(3)).clamp(0, 3) as usize
    } else {
        3
    };
    let unit = ["s", "ms", "\u{b5}s", "ns"][order];
    let scaled = seconds * 1000f64.powi(order as i32);
    format!("{} {unit}", format_g(scaled, 3))
}

/// C `%.*g`: `precision` significant digits, trailing zeros removed,
/// exponent form outside `1e-4 ..< 10^precision`.
fn format_g(x: f64, precision: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn time_run<T, F: FnMut() -> T>(f: &mut F, loops: usize) -> (Duration, T) {
    let start = Instant::now();
    for _ in 1..loops {
        black_box(f());
    }
    let out = f();
    (start.elapsed(), out)
}

/// Time `f` as `runs` runs of `loops` calls each after one discarded warm-up
/// call. Every call must return the warm-up's output.
pub fn bench<T, F>(mut f: F, config: BenchConfig) -> Result<BenchResult>
where
    T: PartialEq,
    F: FnMut() -> T,
{
    if config.runs == 0 || config.loops == Some(0) {
        return Err(Error::InvalidArgument(
            "runs and loops must be at least 1".into(),
        ));
    }
    let reference = f();
    bench_against(&reference, f, config)
}

/// As [`bench`], with the warm-up call already made by the caller and its
/// output passed as `reference`.
pub fn bench_against<T, F>(reference: &T, mut f: F, config: BenchConfig) -> Result<BenchResult>
where
    T: PartialEq,
    F: FnMut() -> T,
{
    if config.runs == 0 || config.loops == Some(0) {
        return Err(Error::InvalidArgument(
            "runs and loops must be at least 1".into(),
        ));
    }
    let check = |out: &T| {
        if out == reference {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "output changed between timed runs".into(),
            ))
        }
    };

    let mut loops = match config.loops {
        Some(n) => n,
        None => {
            let mut chosen = 1;
            'search: for scale in (0..).map(|e| 10usize.pow(e)) {
                for base in [1, 2, 5] {
                    chosen = base * scale;
                    let (took, out) = time_run(&mut f, chosen);
                    check(&out)?;
                    if took >= AUTO_RUN {
                        break 'search;
                    }
                }
            }
            chosen
        }
    };

    let mut means = Vec::with_capacity(config.runs);
    while means.len() < config.runs {
        let (took, out) = time_run(&mut f, loops);
        check(&out)?;
        if took < MIN_RUN && loops < usize::MAX / 10 {
            log::debug!("run of {loops} loops took {took:?}; retrying with more loops");
            loops *= 10;
            means.clear();
            continue;
        }
        means.push(took.div_f64(loops as f64));
    }
    Ok(BenchResult::from_run_means(&means, loops))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipython_time_format() {
        assert_eq!(format_time(0.131), "131 ms");
        assert_eq!(format_time(0.00256), "2.56 ms");
        assert_eq!(format_time(2.01), "2.01 s");
        assert_eq!(format_time(0.0176), "17.6 ms");
        assert_eq!(format_time(43.0), "43 s");
        assert_eq!(format_time(46.5), "46.5 s");
        assert_eq!(format_time(127.3), "2min 7s");
        assert_eq!(format_time(108.0), "1min 48s");
        assert_eq!(format_time(3.2e-6), "3.2 \u{b5}s");
        assert_eq!(format_time(4.5e-8), "45 ns");
        assert_eq!(format_time(0.0), "0 ns");
        assert_eq!(format_time(1e-12), "0.001 ns");
    }

    #[test]
    fn percent_g() {
        assert_eq!(format_g(1234.0, 3), "1.23e+03");
        assert_eq!(format_g(0.5, 3), "0.5");
        assert_eq!(format_g(999.6, 3), "1e+03");
        assert_eq!(format_g(0.00001234, 3), "1.23e-05");
        assert_eq!(format_g(100.0, 3), "100");
    }

    #[test]
    fn table_line_format() {
        let r = BenchResult {
            mean_ms: 131.0,
            stddev_ms: 2.56,
            runs: 7,
            loops_per_run: 10,
        };
        assert_eq!(
            r.to_string(),
            "131 ms ± 2.56 ms per loop (mean ± std. dev. of 7 runs, 10 loops each)"
        );
        let one = BenchResult {
            runs: 1,
            loops_per_run: 1,
            ..r
        };
        assert!(one.to_string().ends_with("of 1 run, 1 loop each)"));
        let many = BenchResult {
            loops_per_run: 10000,
            ..r
        };
        assert!(many.to_string().contains("10,000 loops"));
    }

    #[test]
    fn stddev_is_over_run_means() {
        let means = [2, 4, 4, 4, 5, 5, 7, 9].map(Duration::from_millis);
        let r = BenchResult::from_run_means(&means, 3);
        assert!((r.mean_ms - 5.0).abs() < 1e-9);
        assert!((r.stddev_ms - 2.0).abs() < 1e-9);
    }

    #[test]
    fn stub_has_small_spread() {
        let work = || (0..20_000u64).fold(0u64, |a, x| a.wrapping_add(black_box(x) * x));
        let r = bench(
            work,
            BenchConfig {
                runs: 7,
                loops: Some(20),
            },
        )
        .unwrap();
        assert_eq!(r.runs, 7);
        assert!(r.mean_ms > 0.0);
    }

    #[test]
    fn changing_output_is_rejected() {
        let mut n = 0;
        let r = bench(
            || {
                n += 1;
                n
            },
            BenchConfig {
                runs: 2,
                loops: Some(1),
            },
        );
        assert!(r.is_err());
    }

    #[test]
    fn fast_functions_get_more_loops() {
        let r = bench(
            || black_box(1),
            BenchConfig {
                runs: 3,
                loops: Some(1),
            },
        )
        .unwrap();
        assert!(r.loops_per_run > 1);
    }
}
