//! Parameter sweeps over repeated, seeded sessions.
//!
//! Every (sweep point, run) job builds one [`World`] from `seed + run` and
//! runs all strategies against it, so strategy comparisons are paired. Jobs
//! are independent and merged by index, so results do not depend on the
//! execution mode.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::aggregation::StrategyKind;
use crate::config::{Config, PoolCounts};
use crate::error::{Error, Result};
use crate::orchestrator::{run_session, SessionLog};
use crate::par::{map_ordered, Execution};
use crate::report::{fmt_num, write_rows};
use crate::rng::rng_stream;
use crate::simulation::World;

pub const QUESTION_GRID: [usize; 6] = [100, 250, 500, 1000, 1500, 2000];
pub const THRESHOLD_GRID: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
/// Mean difficulty in percentage points.
pub const DIFFICULTY_GRID: [f64; 7] = [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
pub const ADVERSARY_GRID: [usize; 9] = [0, 5, 10, 15, 20, 25, 30, 35, 40];
pub const ADVERSARIAL_NORMAL_WORKERS: usize = 40;
pub const ADVERSARIAL_EXPERT_WORKERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Questions,
    Threshold,
    Difficulty,
    Adversarial,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Questions,
        ExperimentKind::Threshold,
        ExperimentKind::Difficulty,
        ExperimentKind::Adversarial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Questions => "questions",
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::Difficulty => "difficulty",
            ExperimentKind::Adversarial => "adversarial",
        }
    }

    pub fn swept_param(self) -> &'static str {
        match self {
            ExperimentKind::Questions => "questions",
            ExperimentKind::Threshold => "confidence_threshold",
            ExperimentKind::Difficulty => "difficulty_mean",
            ExperimentKind::Adversarial => "adversarial_workers",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown experiment `{s}`")))
    }
}

/// One seeded run of one strategy at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub accuracy: f64,
    pub mean_cost: f64,
    /// Mean cost over the first quarter of the questions.
    pub early_cost: f64,
    /// Mean cost over the last quarter of the questions.
    pub late_cost: f64,
}

impl RunResult {
    fn from_prefix(log: &SessionLog, seed: u64, n: usize) -> RunResult {
        let quarter = n / 4;
        RunResult {
            seed,
            accuracy: log.accuracy_over(0..n),
            mean_cost: log.mean_cost_over(0..n),
            early_cost: log.mean_cost_over(0..quarter),
            late_cost: log.mean_cost_over(n - quarter..n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub experiment: ExperimentKind,
    pub value: f64,
    pub results: Vec<(StrategyKind, Vec<RunResult>)>,
}

impl SweepPoint {
    pub fn runs(&self, strategy: StrategyKind) -> &[RunResult] {
        self.results
            .iter()
            .find(|(s, _)| *s == strategy)
            .map(|(_, r)| r.as_slice())
            .unwrap_or(&[])
    }

    pub fn mean_accuracy(&self, strategy: StrategyKind) -> f64 {
        mean(self.runs(strategy).iter().map(|r| r.accuracy))
    }

    pub fn mean_cost(&self, strategy: StrategyKind) -> f64 {
        mean(self.runs(strategy).iter().map(|r| r.mean_cost))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Population mean and variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub swept_param: String,
    pub swept_value: f64,
    pub strategy: String,
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_var: f64,
    pub cost_mean: f64,
    pub cost_var: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
}

impl ExperimentSummary {
    pub fn row(&self, value: f64, strategy: StrategyKind) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.swept_value == value && r.strategy == strategy.name())
    }

    pub fn extend(&mut self, other: ExperimentSummary) {
        self.rows.extend(other.rows);
    }
}

pub fn summarize(points: &[SweepPoint]) -> Result<ExperimentSummary> {
    let mut rows = Vec::new();
    for point in points {
        for (strategy, runs) in &point.results {
            if runs.is_empty() {
                return Err(Error::contract(format!(
                    "no runs for {strategy} at {}={}",
                    point.experiment.swept_param(),
                    point.value
                )));
            }
            let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
            let cost: Vec<f64> = runs.iter().map(|r| r.mean_cost).collect();
            let (acc_mean, acc_var) = mean_var(&acc);
            let (cost_mean, cost_var) = mean_var(&cost);
            rows.push(SummaryRow {
                experiment: point.experiment.name().to_string(),
                swept_param: point.experiment.swept_param().to_string(),
                swept_value: point.value,
                strategy: strategy.name().to_string(),
                runs: runs.len(),
                acc_mean,
                acc_var,
                cost_mean,
                cost_var,
            });
        }
    }
    Ok(ExperimentSummary { rows })
}

fn run_seed(config: &Config, run: usize) -> u64 {
    config.seed.wrapping_add(run as u64)
}

/// Runs `strategies` on the world for `(config, seed)`, each with its own
/// selection stream.
fn paired_sessions(
    config: &Config,
    seed: u64,
    strategies: &[StrategyKind],
) -> Result<Vec<(StrategyKind, SessionLog)>> {
    let world = World::generate(config, seed)?;
    strategies
        .iter()
        .map(|&s| {
            let mut rng = rng_stream(seed, &format!("select/{}", s.cli_name()));
            Ok((s, run_session(&world, s, config, &mut rng)?))
        })
        .collect()
}

/// Generic sweep: one config variant per point, `config.runs` seeds each.
fn sweep(
    kind: ExperimentKind,
    config: &Config,
    exec: Execution,
    points: Vec<(f64, Config, Vec<StrategyKind>)>,
) -> Result<Vec<SweepPoint>> {
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..config.runs).map(move |r| (p, r)))
        .collect();
    let outcomes = map_ordered(exec, &jobs, |&(p, r)| {
        let (_, cfg, strategies) = &points[p];
        let seed = run_seed(config, r);
        paired_sessions(cfg, seed, strategies).map(|logs| {
            logs.into_iter()
                .map(|(s, log)| (s, RunResult::from_prefix(&log, seed, log.decisions.len())))
                .collect::<Vec<_>>()
        })
    });
    let mut outcomes = outcomes.into_iter();
    points
        .iter()
        .map(|(value, _, strategies)| {
            let mut results: Vec<(StrategyKind, Vec<RunResult>)> =
                strategies.iter().map(|&s| (s, Vec::new())).collect();
            for _ in 0..config.runs {
                let run = outcomes.next().expect("one outcome per job")?;
                for (slot, (s, result)) in results.iter_mut().zip(run) {
                    debug_assert_eq!(slot.0, s);
                    slot.1.push(result);
                }
            }
            Ok(SweepPoint {
                experiment: kind,
                value: *value,
                results,
            })
        })
        .collect()
}

/// Accuracy and cost as a function of how many questions have been asked.
/// One full-length session per run; each grid value reads a prefix of it.
pub fn run_questions(config: &Config, exec: Execution) -> Result<Vec<SweepPoint>> {
    let mut grid: Vec<usize> = QUESTION_GRID
        .into_iter()
        .filter(|&n| n <= config.questions)
        .collect();
    if grid.last() != Some(&config.questions) && config.questions > 0 {
        grid.push(config.questions);
    }
    let runs: Vec<usize> = (0..config.runs).collect();
    let sessions = map_ordered(exec, &runs, |&r| {
        let seed = run_seed(config, r);
        paired_sessions(config, seed, &StrategyKind::ALL).map(|logs| (seed, logs))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(grid
        .iter()
        .map(|&n| SweepPoint {
            experiment: ExperimentKind::Questions,
            value: n as f64,
            results: StrategyKind::ALL
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let runs = sessions
                        .iter()
                        .map(|(seed, logs)| RunResult::from_prefix(&logs[i].1, *seed, n))
                        .collect();
                    (s, runs)
                })
                .collect(),
        })
        .collect())
}

pub fn run_threshold(config: &Config, exec: Execution) -> Result<Vec<SweepPoint>> {
    let points = THRESHOLD_GRID
        .iter()
        .map(|&t| {
            let cfg = Config {
                confidence_threshold: t,
                ..config.clone()
            };
            (t, cfg, StrategyKind::ALL.to_vec())
        })
        .collect();
    sweep(ExperimentKind::Threshold, config, exec, points)
}

pub fn run_difficulty(config: &Config, exec: Execution) -> Result<Vec<SweepPoint>> {
    let points = DIFFICULTY_GRID
        .iter()
        .map(|&d| {
            let mut cfg = config.clone();
            cfg.difficulty.mean = d / 100.0;
            (d, cfg, StrategyKind::ALL.to_vec())
        })
        .collect();
    sweep(ExperimentKind::Difficulty, config, exec, points)
}

pub fn run_adversarial(config: &Config, exec: Execution) -> Result<Vec<SweepPoint>> {
    let points = ADVERSARY_GRID
        .iter()
        .map(|&a| {
            let cfg = Config {
                pool_counts: PoolCounts {
                    adversarial: a,
                    normal: ADVERSARIAL_NORMAL_WORKERS,
                    expert: ADVERSARIAL_EXPERT_WORKERS,
                },
                ..config.clone()
            };
            (a as f64, cfg, StrategyKind::ALL.to_vec())
        })
        .collect();
    sweep(ExperimentKind::Adversarial, config, exec, points)
}

pub fn run_experiment(kind: ExperimentKind, config: &Config, exec: Execution) -> Result<Vec<SweepPoint>> {
    match kind {
        ExperimentKind::Questions => run_questions(config, exec),
        ExperimentKind::Threshold => run_threshold(config, exec),
        ExperimentKind::Difficulty => run_difficulty(config, exec),
        ExperimentKind::Adversarial => run_adversarial(config, exec),
    }
}

pub fn exp_questions(config: &Config) -> Result<ExperimentSummary> {
    summarize(&run_questions(config, Execution::Parallel)?)
}

pub fn exp_threshold(config: &Config) -> Result<ExperimentSummary> {
    summarize(&run_threshold(config, Execution::Parallel)?)
}

pub fn exp_difficulty(config: &Config) -> Result<ExperimentSummary> {
    summarize(&run_difficulty(config, Execution::Parallel)?)
}

pub fn exp_adversarial(config: &Config) -> Result<ExperimentSummary> {
    summarize(&run_adversarial(config, Execution::Parallel)?)
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "experiment",
    "swept_param",
    "swept_value",
    "strategy",
    "runs",
    "acc_mean",
    "acc_var",
    "cost_mean",
    "cost_var",
];

pub fn write_summary_csv(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    let rows = summary.rows.iter().map(|r| {
        vec![
            r.experiment.clone(),
            r.swept_param.clone(),
            fmt_num(r.swept_value),
            r.strategy.clone(),
            r.runs.to_string(),
            fmt_num(r.acc_mean),
            fmt_num(r.acc_var),
            fmt_num(r.cost_mean),
            fmt_num(r.cost_var),
        ]
    });
    write_rows(path, &SUMMARY_HEADER, rows)
}

pub fn read_summary_csv(path: &Path) -> Result<ExperimentSummary> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok());
        match (num(2), record.get(4).and_then(|s| s.parse::<usize>().ok()), num(5), num(6), num(7), num(8)) {
            (Some(v), Some(runs), Some(am), Some(av), Some(cm), Some(cv)) if record.len() == 9 => {
                rows.push(SummaryRow {
                    experiment: record[0].to_string(),
                    swept_param: record[1].to_string(),
                    swept_value: v,
                    strategy: record[3].to_string(),
                    runs,
                    acc_mean: am,
                    acc_var: av,
                    cost_mean: cm,
                    cost_var: cv,
                })
            }
            _ => bad.push((line, "expected 9 fields with numeric values".to_string())),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            lines: bad,
        });
    }
    Ok(ExperimentSummary { rows })
}

/// Long-format figure data: one row per (x, strategy, panel).
pub fn write_plot_csv(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    let rows = summary.rows.iter().flat_map(|r| {
        [
            ("accuracy", r.acc_mean, r.acc_var),
            ("cost", r.cost_mean, r.cost_var),
        ]
        .into_iter()
        .map(move |(panel, m, v)| {
            vec![
                r.swept_param.clone(),
                fmt_num(r.swept_value),
                r.strategy.clone(),
                panel.to_string(),
                fmt_num(m),
                fmt_num(v),
                fmt_num(m - v.sqrt()),
                fmt_num(m + v.sqrt()),
            ]
        })
    });
    write_rows(
        path,
        &["x_param", "x", "strategy", "panel", "mean", "var", "lower", "upper"],
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(acc: f64, cost: f64) -> RunResult {
        RunResult {
            seed: 0,
            accuracy: acc,
            mean_cost: cost,
            early_cost: cost,
            late_cost: cost,
        }
    }

    fn point(runs: Vec<RunResult>) -> SweepPoint {
        SweepPoint {
            experiment: ExperimentKind::Questions,
            value: 100.0,
            results: vec![(StrategyKind::Mv, runs)],
        }
    }

    #[test]
    fn summarize_arithmetic() {
        let s = summarize(&[point(vec![run(0.7, 21.0), run(0.8, 23.0)])]).unwrap();
        let row = &s.rows[0];
        assert!((row.acc_mean - 0.75).abs() < 1e-12);
        assert!((row.acc_var - 0.0025).abs() < 1e-12);
        assert!((row.cost_mean - 22.0).abs() < 1e-12);
        assert!((row.cost_var - 1.0).abs() < 1e-12);
        assert_eq!(row.runs, 2);

        let single = summarize(&[point(vec![run(0.7, 21.0)])]).unwrap();
        assert_eq!(single.rows[0].acc_var, 0.0);
    }

    #[test]
    fn summarize_rejects_empty_point() {
        assert!(summarize(&[point(vec![])]).is_err());
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let a = summarize(&[point(vec![run(0.6, 1.0), run(0.7, 2.0), run(0.9, 4.0)])]).unwrap();
        let b = summarize(&[point(vec![run(0.9, 4.0), run(0.6, 1.0), run(0.7, 2.0)])]).unwrap();
        let (ra, rb) = (&a.rows[0], &b.rows[0]);
        assert!((ra.acc_mean - rb.acc_mean).abs() < 1e-15);
        assert!((ra.acc_var - rb.acc_var).abs() < 1e-15);
        assert!((ra.cost_var - rb.cost_var).abs() < 1e-15);
    }

    #[test]
    fn empty_summary_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&ExperimentSummary::default(), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), SUMMARY_HEADER.join(",") + "\n");
        assert!(read_summary_csv(&path).unwrap().rows.is_empty());
    }

    #[test]
    fn summary_csv_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let s = summarize(&[point(vec![run(0.7, 21.0), run(0.8, 23.0)])]).unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&s, &path).unwrap();
        let back = read_summary_csv(&path).unwrap();
        assert_eq!(back.rows.len(), 1);
        let (a, b) = (&back.rows[0], &s.rows[0]);
        assert_eq!((&a.experiment, &a.strategy, a.runs), (&b.experiment, &b.strategy, b.runs));
        for (x, y) in [(a.acc_mean, b.acc_mean), (a.acc_var, b.acc_var), (a.cost_mean, b.cost_mean)] {
            assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300));
        }
        let again = dir.path().join("again.csv");
        write_summary_csv(&back, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_summary_csv(&ExperimentSummary::default(), &blocker.join("s.csv")).unwrap_err();
        assert!(err.to_string().contains("file"));
    }

    #[test]
    fn experiment_names_parse() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("bogus".parse::<ExperimentKind>().is_err());
    }

    fn small() -> Config {
        Config {
            questions: 120,
            runs: 3,
            ..Config::default()
        }
    }

    #[test]
    fn sweeps_are_execution_independent() {
        let cfg = small();
        let seq = run_difficulty(&cfg, Execution::Sequential).unwrap();
        let par = run_difficulty(&cfg, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.len(), DIFFICULTY_GRID.len());
        for p in &seq {
            for (_, runs) in &p.results {
                assert_eq!(runs.len(), 3);
                assert!(runs.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
            }
        }
    }

    #[test]
    fn question_grid_is_capped_by_session_length() {
        let points = run_questions(&small(), Execution::Parallel).unwrap();
        let values: Vec<f64> = points.iter().map(|p| p.value).collect();
        assert_eq!(values, vec![100.0, 120.0]);
        for p in &points {
            assert_eq!(p.results.len(), 5);
        }
    }

    #[test]
    fn paired_runs_share_worlds() {
        // Same seed => MV, which has no learned state, gives the same result
        // at every threshold point.
        let cfg = Config {
            questions: 80,
            runs: 2,
            ..Config::default()
        };
        let points = run_threshold(&cfg, Execution::Parallel).unwrap();
        let first = points[0].runs(StrategyKind::Mv).to_vec();
        for p in &points {
            assert_eq!(p.runs(StrategyKind::Mv), first.as_slice());
        }
    }
}
