// SPDX-License-Identifier: Apache-2.0

//! Timed benchmark runs and their reports.
//!
//! Each selected case runs in one or two modes (rewriting enabled or
//! disabled), each on a fresh instance reused across that mode's
//! iterations. Only `invoke` is timed. Runs are sequential on the calling
//! thread.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::exec::{Config, Imports, InstantiateError, InvokeError, ModuleInstance, Value};
use crate::par::{self, Parallelism};
use crate::suite::{build_case, BenchCase, CaseError, CaseName, CaseParams, DEFAULT_SEED};
use crate::tree::DEFAULT_THRESHOLD;
use crate::validate::{validate_module, ValidationError};

pub const REPORT_SCHEMA: u32 = 1;
pub const DEFAULT_ITERATIONS: usize = 350;
pub const DEFAULT_WARMUP: usize = 50;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("warmup {warmup} must be smaller than the {samples} iterations")]
    WarmupTooLarge { warmup: usize, samples: usize },
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("{case}: {source}")]
    Invalid { case: CaseName, source: ValidationError },
    #[error("{case}: {source}")]
    Instantiate { case: CaseName, source: InstantiateError },
    #[error("{case} ({mode}): {source}")]
    Invoke { case: CaseName, mode: Mode, source: InvokeError },
    #[error("{case} ({mode}): result {got} differs from oracle value {expected}")]
    Mismatch { case: CaseName, mode: Mode, expected: i64, got: String },
}

impl HarnessError {
    /// Wrong answers get their own exit status so that they are never
    /// mistaken for configuration problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::WarmupTooLarge { .. } | HarnessError::Case(_) => 4,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Optimized,
    Unoptimized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Optimized => "optimized",
            Mode::Unoptimized => "unoptimized",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub samples: usize,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

/// Drops the first `warmup` samples and summarizes the rest. The standard
/// deviation is the population one.
pub fn summarize(samples: &[f64], warmup: usize) -> Result<Stats, HarnessError> {
    if warmup >= samples.len() {
        return Err(HarnessError::WarmupTooLarge { warmup, samples: samples.len() });
    }
    let kept = &samples[warmup..];
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = kept.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    Ok(Stats {
        samples: kept.len(),
        mean,
        median,
        stddev: var.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

/// `(unoptimized - optimized) / unoptimized * 100`; negative when the
/// optimized mode is slower.
pub fn reduction_percent(unoptimized: f64, optimized: f64) -> f64 {
    if unoptimized == 0.0 {
        return 0.0;
    }
    (unoptimized - optimized) / unoptimized * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub iterations: usize,
    pub warmup: usize,
    /// Also run with rewriting enabled and report the reduction.
    pub optimize: bool,
    pub opt_threshold: u32,
    pub seed: u32,
    #[serde(serialize_with = "params_as_text")]
    pub cases: Vec<CaseParams>,
    pub fuel: Option<u64>,
}

fn params_as_text<S: serde::Serializer>(p: &[CaseParams], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(p.iter().map(|c| format!("{c:?}")))
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: DEFAULT_ITERATIONS,
            warmup: DEFAULT_WARMUP,
            optimize: true,
            opt_threshold: DEFAULT_THRESHOLD,
            seed: DEFAULT_SEED,
            cases: CaseName::ALL.iter().map(|c| c.default_params()).collect(),
            fuel: None,
        }
    }
}

impl RunConfig {
    pub fn modes(&self) -> Vec<Mode> {
        if self.optimize {
            vec![Mode::Unoptimized, Mode::Optimized]
        } else {
            vec![Mode::Unoptimized]
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub mode: Mode,
    #[serde(flatten)]
    pub stats: Stats,
    /// Every timed iteration in milliseconds, warmup included.
    pub raw_ms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub case: &'static str,
    pub params: String,
    pub expected: i64,
    pub oracle: &'static str,
    pub modes: Vec<ModeReport>,
    pub reduction_percent: Option<f64>,
}

impl CaseReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub os: &'static str,
    pub arch: &'static str,
    pub cpus: usize,
    pub version: &'static str,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub schema: u32,
    pub environment: Environment,
    pub cases: Vec<CaseReport>,
}

pub const CSV_HEADER: &str =
    "case,mode,samples,mean_ms,median_ms,stddev_ms,min_ms,max_ms,reduction_percent";

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cases {
            for m in &c.modes {
                let s = &m.stats;
                let red = c.reduction_percent.map_or(String::new(), |r| r.to_string());
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    c.case, m.mode, s.samples, s.mean, s.median, s.stddev, s.min, s.max, red
                );
            }
        }
        out
    }

    /// Every raw sample, one per line, with whether it survived warmup.
    pub fn samples_csv(&self) -> String {
        let warmup = self.environment.config.warmup;
        let mut out = String::from("case,mode,iteration,ms,retained\n");
        for c in &self.cases {
            for m in &c.modes {
                for (i, ms) in m.raw_ms.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{},{},{}", c.case, m.mode, i, ms, i >= warmup);
                }
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<18} {:<12} {:>7} {:>11} {:>11} {:>10} {:>11} {:>11} {:>10}\n",
            "case", "mode", "samples", "mean ms", "median ms", "stddev", "min ms", "max ms", "reduction"
        );
        for c in &self.cases {
            for m in &c.modes {
                let s = &m.stats;
                let red = match (m.mode, c.reduction_percent) {
                    (Mode::Optimized, Some(r)) => format!("{r:.2}%"),
                    _ => String::new(),
                };
                let _ = writeln!(
                    out,
                    "{:<18} {:<12} {:>7} {:>11.3} {:>11.3} {:>10.3} {:>11.3} {:>11.3} {:>10}",
                    c.case, m.mode, s.samples, s.mean, s.median, s.stddev, s.min, s.max, red
                );
            }
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Table => self.to_table(),
        }
    }
}

/// Builds the selected cases (in parallel) and times them (sequentially).
pub fn run_bench(config: &RunConfig) -> Result<BenchReport, HarnessError> {
    if config.warmup >= config.iterations {
        return Err(HarnessError::WarmupTooLarge { warmup: config.warmup, samples: config.iterations });
    }
    let built = par::map_slice(Parallelism::default(), &config.cases, |_, p| build_case(*p, config.seed));
    let cases = built.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut reports = Vec::with_capacity(cases.len());
    for case in &cases {
        let mut modes = Vec::new();
        for mode in config.modes() {
            let raw_ms = time_case(case, mode, config)?;
            let stats = summarize(&raw_ms, config.warmup)?;
            modes.push(ModeReport { mode, stats, raw_ms });
        }
        let mean = |m: Mode| modes.iter().find(|r| r.mode == m).map(|r| r.stats.mean);
        let reduction = mean(Mode::Unoptimized)
            .zip(mean(Mode::Optimized))
            .map(|(u, o)| reduction_percent(u, o));
        reports.push(CaseReport {
            case: case.name.as_str(),
            params: format!("{:?}", case.params),
            expected: case.expected.value,
            oracle: case.expected.produced_by,
            modes,
            reduction_percent: reduction,
        });
    }
    Ok(BenchReport {
        schema: REPORT_SCHEMA,
        environment: Environment {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
        },
        cases: reports,
    })
}

/// Runs `config.iterations` timed invocations on one fresh instance,
/// checking every result against the oracle.
pub fn time_case(case: &BenchCase, mode: Mode, config: &RunConfig) -> Result<Vec<f64>, HarnessError> {
    let vm = validate_module(case.module.clone())
        .map_err(|source| HarnessError::Invalid { case: case.name, source })?;
    let exec_config = Config {
        opt_threshold: (mode == Mode::Optimized).then_some(config.opt_threshold),
        fuel: config.fuel,
        ..Config::default()
    };
    let mut inst = ModuleInstance::instantiate(&vm, &mut Imports::new(), exec_config)
        .map_err(|source| HarnessError::Instantiate { case: case.name, source })?;
    let mut samples = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let start = Instant::now();
        let result = inst.invoke(case.entry, &[]);
        let elapsed = start.elapsed();
        let result = result.map_err(|source| HarnessError::Invoke { case: case.name, mode, source })?;
        if result != [Value::I64(case.expected.value)] {
            return Err(HarnessError::Mismatch {
                case: case.name,
                mode,
                expected: case.expected.value,
                got: format!("{result:?}"),
            });
        }
        samples.push(elapsed.as_secs_f64() * 1e3);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn warmup_is_dropped() {
        let samples: Vec<f64> = (0..350).map(|i| if i < 50 { 1000.0 } else { 2.0 }).collect();
        let s = summarize(&samples, 50).unwrap();
        assert_eq!(s.samples, 300);
        assert_eq!((s.mean, s.max), (2.0, 2.0));
        assert!(summarize(&samples, 350).is_err());
        assert!(summarize(&[], 0).is_err());
    }

    #[test]
    fn constant_and_ramp() {
        let s = summarize(&[5.0; 8], 0).unwrap();
        assert_eq!((s.mean, s.stddev, s.min, s.max), (5.0, 0.0, 5.0, 5.0));
        let ramp: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = summarize(&ramp, 0).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (5.5, 5.5, 1.0, 10.0));
        assert!(close(s.stddev, 8.25f64.sqrt()));
        assert_eq!(summarize(&[3.0, 1.0, 2.0], 0).unwrap().median, 2.0);
    }

    #[test]
    fn reduction_math() {
        assert!(close(reduction_percent(100.0, 37.03), 62.97));
        assert_eq!(reduction_percent(80.0, 80.0), 0.0);
        assert!(close(reduction_percent(100.0, 120.0), -20.0));
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let config = RunConfig {
            iterations: 3,
            warmup: 1,
            cases: vec![CaseParams::Fibonacci { n: 5 }],
            ..RunConfig::default()
        };
        let report = run_bench(&config).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 2);
        assert_eq!(report.samples_csv().lines().count(), 1 + 2 * 3);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["schema"], 1);
        assert_eq!(json["cases"][0]["modes"][0]["raw_ms"].as_array().unwrap().len(), 3);
        assert!(report.to_table().contains("fibonacci"));
    }

    #[test]
    fn warmup_must_leave_samples() {
        let config = RunConfig { iterations: 5, warmup: 5, ..RunConfig::default() };
        let err = run_bench(&config).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn wrong_answers_abort() {
        let mut case = build_case(CaseParams::Fibonacci { n: 6 }, 1).unwrap();
        case.expected.value += 1;
        let err = time_case(&case, Mode::Optimized, &RunConfig { iterations: 2, ..RunConfig::default() });
        let err = err.unwrap_err();
        assert!(matches!(err, HarnessError::Mismatch { expected: 9, .. }), "{err}");
        assert_eq!(err.exit_code(), 5);
    }

    proptest::proptest! {
        #[test]
        fn stats_are_ordered(xs in proptest::collection::vec(0.0f64..1e6, 1..200)) {
            let s = summarize(&xs, 0).unwrap();
            proptest::prop_assert!(s.min <= s.median && s.median <= s.max);
            proptest::prop_assert!(s.min <= s.mean * (1.0 + 1e-12) && s.mean <= s.max * (1.0 + 1e-12));
            proptest::prop_assert!(s.stddev >= 0.0);
        }
    }
}
