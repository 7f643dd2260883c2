//! Replicated solver comparisons.
//!
//! An experiment is a grid of (value kind, ratio, replicate) cells. Each cell
//! derives its own seed, generates one synthetic instance and runs every
//! configured algorithm on it. Rows come back sorted by
//! (kind, ratio, replicate, algo) whatever the execution order, so the
//! results file depends only on the configuration (timings aside).

pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnt::{refine, solve_bnt, BntConfig};
use crate::edf::{solve_edf, EdfConfig};
use crate::exact::{solve_exact, ExactConfig, DEFAULT_CAP};
use crate::model::{score_with, Accrual};
use crate::par::{self, Execution};
use crate::rng;
use crate::scenarios::{synth_instance, ScenarioError, ScenarioParams};
use crate::values::ValueKind;

pub use stats::{eta, median, summarize, StatsError, Summary, BOOTSTRAP_RESAMPLES};

pub const RESULTS_HEADER: &str = "algo,kind,ratio,replicate,seed,score,cpu_millis,traversals,skipped";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Bnt,
    Edf,
    Exact,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Bnt => "bnt",
            Algo::Edf => "edf",
            Algo::Exact => "exact",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bnt" => Ok(Algo::Bnt),
            "edf" => Ok(Algo::Edf),
            "exact" => Ok(Algo::Exact),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algo>,
    pub ratios: Vec<usize>,
    pub n_agents: usize,
    pub kinds: Vec<ValueKind>,
    pub replicates: usize,
    pub master_seed: u64,
    pub accrual: Accrual,
    /// Runs per BNT solve; more than one enables re-execution.
    pub bnt_runs: usize,
    pub proximity_filter: bool,
    pub exact_cap: usize,
    /// Scenario settings shared by every cell. Its agent count, ratio, kind
    /// and seed are overwritten per cell.
    pub scenario: ScenarioParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algo::Bnt, Algo::Edf],
            ratios: vec![1],
            n_agents: 10,
            kinds: vec![ValueKind::Superadditive],
            replicates: 100,
            master_seed: 0,
            accrual: Accrual::Literal,
            bnt_runs: 1,
            proximity_filter: true,
            exact_cap: DEFAULT_CAP,
            scenario: ScenarioParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty");
        }
        if self.ratios.is_empty() {
            return bad("ratios must not be empty");
        }
        if self.kinds.is_empty() {
            return bad("kinds must not be empty");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.bnt_runs == 0 {
            return bad("bnt_runs must be at least 1");
        }
        for &ratio in &self.ratios {
            self.cell_params(ValueKind::Superadditive, ratio, 0).check()?;
        }
        Ok(())
    }

    fn cell_params(&self, kind: ValueKind, ratio: usize, seed: u64) -> ScenarioParams {
        ScenarioParams {
            n_agents: self.n_agents,
            ratio,
            value_kind: kind,
            seed,
            ..self.scenario.clone()
        }
    }
}

/// Seed of one grid cell, independent of grid order.
pub fn child_seed(master: u64, kind: ValueKind, ratio: usize, replicate: usize) -> u64 {
    rng::mix(master, &[kind as u64, ratio as u64, replicate as u64])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algo: Algo,
    pub kind: ValueKind,
    pub ratio: usize,
    pub replicate: usize,
    pub seed: u64,
    pub score: f64,
    pub cpu_millis: f64,
    pub traversals: u64,
    /// The solver refused the instance; score and timings are zero.
    pub skipped: bool,
}

impl ResultRow {
    fn key(&self) -> (ValueKind, usize, usize, Algo) {
        (self.kind, self.ratio, self.replicate, self.algo)
    }
}

/// CPU time consumed by the calling thread, in milliseconds.
pub fn thread_cpu_millis() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid out-pointer and the clock id is a constant.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 * 1e3 + ts.tv_nsec as f64 / 1e6
}

fn run_cell(config: &ExperimentConfig, kind: ValueKind, ratio: usize, replicate: usize) -> Result<Vec<ResultRow>, BenchError> {
    let seed = child_seed(config.master_seed, kind, ratio, replicate);
    let instance = synth_instance(&config.cell_params(kind, ratio, seed))?;
    let mut rows = Vec::with_capacity(config.algorithms.len());
    for &algo in &config.algorithms {
        let started = thread_cpu_millis();
        let solution = match algo {
            Algo::Bnt => {
                let cfg = BntConfig {
                    accrual: config.accrual,
                    proximity_filter: config.proximity_filter,
                    ..BntConfig::default()
                };
                Some(if config.bnt_runs > 1 {
                    refine(&instance, &cfg, config.bnt_runs)
                } else {
                    solve_bnt(&instance, &cfg)
                })
            }
            Algo::Edf => Some(solve_edf(
                &instance,
                &EdfConfig {
                    accrual: config.accrual,
                    proximity_filter: config.proximity_filter,
                    ..EdfConfig::default()
                },
            )),
            Algo::Exact => solve_exact(
                &instance,
                &ExactConfig {
                    cap: config.exact_cap,
                    accrual: config.accrual,
                    ..ExactConfig::default()
                },
            )
            .ok()
            .map(|o| o.solution),
        };
        let cpu = (thread_cpu_millis() - started).max(0.0);
        rows.push(match solution {
            Some(s) => ResultRow {
                algo,
                kind,
                ratio,
                replicate,
                seed,
                score: score_with(&s, &instance, config.accrual).max(0.0),
                cpu_millis: cpu,
                traversals: s.metadata.traversals,
                skipped: false,
            },
            None => ResultRow {
                algo,
                kind,
                ratio,
                replicate,
                seed,
                score: 0.0,
                cpu_millis: 0.0,
                traversals: 0,
                skipped: true,
            },
        });
    }
    Ok(rows)
}

/// Runs the whole grid and returns the rows in canonical order.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ResultRow>, BenchError> {
    config.check()?;
    let mut cells = Vec::new();
    for &kind in &config.kinds {
        for &ratio in &config.ratios {
            for replicate in 0..config.replicates {
                cells.push((kind, ratio, replicate));
            }
        }
    }
    let done = par::map(exec, &cells, |&(kind, ratio, rep)| run_cell(config, kind, ratio, rep));
    let mut rows = Vec::with_capacity(cells.len() * config.algorithms.len());
    for r in done {
        rows.extend(r?);
    }
    rows.sort_by_key(ResultRow::key);
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Score,
    CpuMillis,
    Eta,
}

/// One summary line. `algo` is empty for η rows; `ratio` is empty for rows
/// pooled over every ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: ValueKind,
    pub ratio: Option<usize>,
    pub algo: Option<Algo>,
    pub metric: Metric,
    /// Finite samples summarised.
    pub n: usize,
    /// Samples left out because η was infinite.
    pub n_infinite: usize,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn summary_row(
    kind: ValueKind,
    ratio: Option<usize>,
    algo: Option<Algo>,
    metric: Metric,
    samples: &[f64],
) -> Result<Option<SummaryRow>, StatsError> {
    let finite: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    let n_infinite = samples.len() - finite.len();
    if samples.is_empty() {
        return Ok(None);
    }
    let seed = rng::mix(kind as u64, &[ratio.map_or(u64::MAX, |r| r as u64), algo.map_or(9, |a| a as u64), metric as u64]);
    let s = if finite.is_empty() {
        Summary {
            median: f64::INFINITY,
            ci_low: f64::INFINITY,
            ci_high: f64::INFINITY,
        }
    } else {
        summarize(&finite, seed)?
    };
    Ok(Some(SummaryRow {
        kind,
        ratio,
        algo,
        metric,
        n: finite.len(),
        n_infinite,
        median: s.median,
        ci_low: s.ci_low,
        ci_high: s.ci_high,
    }))
}

/// Per-replicate η for every (kind, ratio) cell that has both a BNT and an
/// EDF row.
pub fn eta_samples(rows: &[ResultRow]) -> Result<BTreeMap<(ValueKind, usize), Vec<f64>>, StatsError> {
    let mut scores: BTreeMap<_, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.skipped) {
        let e = scores.entry((r.kind, r.ratio, r.replicate)).or_default();
        match r.algo {
            Algo::Bnt => e.0 = Some(r.score),
            Algo::Edf => e.1 = Some(r.score),
            Algo::Exact => {}
        }
    }
    let mut out: BTreeMap<(ValueKind, usize), Vec<f64>> = BTreeMap::new();
    for ((kind, ratio, _), pair) in scores {
        if let (Some(b), Some(e)) = pair {
            out.entry((kind, ratio)).or_default().push(eta(b, e)?);
        }
    }
    Ok(out)
}

/// Median η per kind, pooled over ratios. Infinite ratios are left out.
pub fn median_eta_by_kind(rows: &[ResultRow]) -> Result<BTreeMap<ValueKind, f64>, StatsError> {
    let mut pooled: BTreeMap<ValueKind, Vec<f64>> = BTreeMap::new();
    for ((kind, _), xs) in eta_samples(rows)? {
        pooled.entry(kind).or_default().extend(xs.into_iter().filter(|x| x.is_finite()));
    }
    pooled
        .into_iter()
        .filter(|(_, xs)| !xs.is_empty())
        .map(|(k, xs)| Ok((k, median(&xs)?)))
        .collect()
}

/// Median and bootstrap interval of score and CPU time per
/// (algo, kind, ratio), then η per (kind, ratio) and per kind.
pub fn summarize_rows(rows: &[ResultRow]) -> Result<Vec<SummaryRow>, StatsError> {
    let mut groups: BTreeMap<_, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.skipped) {
        let g = groups.entry((r.kind, r.ratio, r.algo)).or_default();
        g.0.push(r.score);
        g.1.push(r.cpu_millis);
    }
    let mut out = Vec::new();
    for ((kind, ratio, algo), (scores, cpu)) in &groups {
        out.extend(summary_row(*kind, Some(*ratio), Some(*algo), Metric::Score, scores)?);
        out.extend(summary_row(*kind, Some(*ratio), Some(*algo), Metric::CpuMillis, cpu)?);
    }
    let etas = eta_samples(rows)?;
    let mut pooled: BTreeMap<ValueKind, Vec<f64>> = BTreeMap::new();
    for ((kind, ratio), xs) in &etas {
        out.extend(summary_row(*kind, Some(*ratio), None, Metric::Eta, xs)?);
        pooled.entry(*kind).or_default().extend(xs);
    }
    for (kind, xs) in &pooled {
        out.extend(summary_row(*kind, None, None, Metric::Eta, xs)?);
    }
    Ok(out)
}

/// One point of a score-versus-ratio panel: score against ratio per algorithm,
/// one panel per value kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub panel: char,
    pub kind: ValueKind,
    pub ratio: usize,
    pub algo: Algo,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn plot_rows(summary: &[SummaryRow]) -> Vec<PlotRow> {
    let mut out: Vec<PlotRow> = summary
        .iter()
        .filter(|s| s.metric == Metric::Score)
        .filter_map(|s| {
            let panel = ValueKind::ALL.iter().position(|k| *k == s.kind)?;
            Some(PlotRow {
                panel: (b'a' + panel as u8) as char,
                kind: s.kind,
                ratio: s.ratio?,
                algo: s.algo?,
                median: s.median,
                ci_low: s.ci_low,
                ci_high: s.ci_high,
            })
        })
        .collect();
    out.sort_by_key(|p| (p.panel, p.ratio, p.algo));
    out
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
