//! Command-line entry point.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use crate::aggregation::{
    agreement_weight, majority_vote, posterior_label, weighted_vote, SkillBelief, StrategyKind,
};
use crate::config::Config;
use crate::error::Error;
use crate::experiments::{run_experiment, summarize, write_plot_csv, write_summary_csv, ExperimentKind, ExperimentSummary};
use crate::orchestrator::{run_session, update_consensus_records, RecordBook};
use crate::par::Execution;
use crate::report::{fmt_num, write_decisions_csv, write_questions_csv, write_rows, write_workers_csv};
use crate::rng::rng_stream;
use crate::simulation::World;
use crate::types::{Label, Response, WorkerId};

#[derive(Debug, Parser)]
#[command(name = "crowdlabel", version, about = "Crowdsourced label aggregation simulator")]
pub struct Cli {
    /// Flat TOML config file; unspecified keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// mv, weighted, em, bayes or conf.
    #[arg(long, global = true, default_value = "bayes", value_parser = parse_strategy)]
    pub strategy: StrategyKind,
    /// Also write long-format per-figure CSVs.
    #[arg(long, global = true)]
    pub emit_plot_data: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a parameter sweep: questions, threshold, difficulty, adversarial or all.
    Experiment {
        #[arg(value_parser = ["questions", "threshold", "difficulty", "adversarial", "all"])]
        name: String,
    },
    /// Run one session and dump decisions, workers and questions.
    Simulate,
    /// Aggregate a CSV of (task_id, worker_id, label) responses.
    Aggregate { responses: PathBuf },
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Experiment { name } => {
            let kinds: Vec<ExperimentKind> = if name == "all" {
                ExperimentKind::ALL.to_vec()
            } else {
                vec![name.parse()?]
            };
            cmd_experiment(&kinds, &config, &cli.out, cli.emit_plot_data)
        }
        Command::Simulate => cmd_simulate(&config, cli.strategy, &cli.out),
        Command::Aggregate { responses } => {
            let path = cmd_aggregate(responses, cli.strategy, &config, &cli.out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// Runs the sweeps and writes `summary_<name>.csv` for each plus a combined
/// `summary.csv`.
pub fn cmd_experiment(
    kinds: &[ExperimentKind],
    config: &Config,
    out: &Path,
    emit_plot_data: bool,
) -> anyhow::Result<()> {
    let mut combined = ExperimentSummary::default();
    for &kind in kinds {
        let points = run_experiment(kind, config, Execution::Parallel)?;
        let summary = summarize(&points)?;
        write_summary_csv(&summary, &out.join(format!("summary_{}.csv", kind.name())))?;
        if emit_plot_data {
            write_plot_csv(&summary, &out.join(format!("plot_{}.csv", kind.name())))?;
        }
        print_table(kind, &summary);
        combined.extend(summary);
    }
    write_summary_csv(&combined, &out.join("summary.csv"))?;
    Ok(())
}

fn print_table(kind: ExperimentKind, summary: &ExperimentSummary) {
    println!("== {} (swept {}) ==", kind.name(), kind.swept_param());
    println!(
        "{:>12} {:>9} {:>10} {:>10} {:>10} {:>10}",
        "value", "strategy", "acc_mean", "acc_sd", "cost_mean", "cost_sd"
    );
    for r in &summary.rows {
        println!(
            "{:>12} {:>9} {:>10.4} {:>10.4} {:>10.3} {:>10.3}",
            r.swept_value,
            r.strategy,
            r.acc_mean,
            r.acc_var.sqrt(),
            r.cost_mean,
            r.cost_var.sqrt()
        );
    }
}

pub fn cmd_simulate(config: &Config, strategy: StrategyKind, out: &Path) -> anyhow::Result<()> {
    let world = World::generate(config, config.seed)?;
    let mut rng = rng_stream(config.seed, &format!("select/{}", strategy.cli_name()));
    let log = run_session(&world, strategy, config, &mut rng)?;
    write_decisions_csv(&log, &world, &out.join("decisions.csv"))?;
    write_workers_csv(&world, &out.join("workers.csv"))?;
    write_questions_csv(&world, &out.join("questions.csv"))?;
    println!(
        "{}: {} questions, accuracy {:.4}, mean cost {:.3}",
        strategy,
        log.decisions.len(),
        log.accuracy(),
        log.mean_cost()
    );
    Ok(())
}

struct Task {
    id: String,
    responses: Vec<(u64, String, Label)>,
}

fn read_responses(path: &Path) -> anyhow::Result<Vec<Task>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (task_col, worker_col, label_col) = (col("task_id")?, col("worker_id")?, col("label")?);

    let mut tasks: Vec<Task> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut bad = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                bad.push((line, e.to_string()));
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).map(str::trim).filter(|s| !s.is_empty());
        let (Some(task), Some(worker), Some(label)) = (field(task_col), field(worker_col), field(label_col)) else {
            bad.push((line, "missing field".to_string()));
            continue;
        };
        let Some(label) = label.parse::<u8>().ok().and_then(Label::from_bit) else {
            bad.push((line, format!("label `{label}` is not 0 or 1")));
            continue;
        };
        let slot = *index.entry(task.to_string()).or_insert_with(|| {
            tasks.push(Task {
                id: task.to_string(),
                responses: Vec::new(),
            });
            tasks.len() - 1
        });
        if tasks[slot].responses.iter().any(|(_, w, _)| w == worker) {
            bad.push((line, format!("worker `{worker}` answered task `{task}` twice")));
            continue;
        }
        tasks[slot].responses.push((line, worker.to_string(), label));
    }
    if !bad.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            lines: bad,
        }
        .into());
    }
    Ok(tasks)
}

/// Fuses every supplied response per task, in file order, learning worker
/// records against each chosen label. Writes `labels.csv` into `out`.
pub fn cmd_aggregate(
    responses: &Path,
    strategy: StrategyKind,
    config: &Config,
    out: &Path,
) -> anyhow::Result<PathBuf> {
    let tasks = read_responses(responses)?;
    let mut records = RecordBook::new(Vec::new());
    let mut ids: HashMap<String, WorkerId> = HashMap::new();
    let mut rows = Vec::with_capacity(tasks.len());

    for task in &tasks {
        let answers: Vec<Response> = task
            .responses
            .iter()
            .map(|(_, worker, label)| {
                let id = *ids
                    .entry(worker.clone())
                    .or_insert_with(|| records.push_fresh(config));
                Response {
                    worker: id,
                    label: *label,
                    expert: false,
                }
            })
            .collect();
        let votes: Vec<Label> = answers.iter().map(|r| r.label).collect();
        let (chosen, confidence) = match strategy {
            StrategyKind::Mv => {
                let label = majority_vote(&votes).with_context(|| {
                    format!(
                        "task `{}` (line {}) has {} responses",
                        task.id,
                        task.responses[0].0,
                        votes.len()
                    )
                })?;
                (label, None)
            }
            StrategyKind::Weighted => {
                let weights: Vec<f64> = answers
                    .iter()
                    .map(|r| agreement_weight(records.get(r.worker), config.prior_mean))
                    .collect();
                (weighted_vote(&votes, &weights)?, None)
            }
            _ => {
                let pairs: Vec<(f64, f64)> = answers
                    .iter()
                    .map(|r| {
                        SkillBelief::for_record(strategy, records.get(r.worker), config.prior_mean, config.epsilon)
                            .likelihoods(r.label)
                    })
                    .collect();
                let post = posterior_label(&pairs);
                (post.chosen, Some(post.confidence))
            }
        };
        update_consensus_records(strategy, &mut records, &answers, chosen, confidence.unwrap_or(1.0));
        rows.push(vec![
            task.id.clone(),
            chosen.to_string(),
            confidence.map(fmt_num).unwrap_or_default(),
        ]);
    }
    if tasks.is_empty() {
        bail!("{}: no responses", responses.display());
    }
    let path = out.join("labels.csv");
    write_rows(&path, &["task_id", "label", "confidence"], rows)?;
    Ok(path)
}
