//! CSV output for sessions and generated worlds.
//!
//! Every file has a header row, LF line endings, and floats written with
//! nine significant digits so identical inputs give identical bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::orchestrator::SessionLog;
use crate::simulation::World;

/// Fixed nine-significant-digit decimal rendering.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

pub(crate) fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_decisions_csv(log: &SessionLog, world: &World, path: &Path) -> Result<()> {
    let header = [
        "question_id",
        "strategy",
        "chosen_label",
        "true_label",
        "correct",
        "confidence",
        "cost",
        "n_workers",
        "n_experts",
        "escalated",
    ];
    let rows = log.decisions.iter().map(|d| {
        let truth = world.questions.questions[d.question_id as usize].true_label;
        vec![
            d.question_id.to_string(),
            log.strategy.name().to_string(),
            d.chosen_label.to_string(),
            truth.to_string(),
            d.correct.map(|c| u8::from(c).to_string()).unwrap_or_default(),
            d.confidence.map(fmt_num).unwrap_or_default(),
            fmt_num(d.cost),
            d.n_workers().to_string(),
            d.n_experts().to_string(),
            u8::from(d.escalated).to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_workers_csv(world: &World, path: &Path) -> Result<()> {
    let rows = world.pool.profiles.iter().map(|p| {
        vec![
            p.id.to_string(),
            p.class.name().to_string(),
            fmt_num(p.true_accuracy),
        ]
    });
    write_rows(path, &["id", "class", "true_accuracy"], rows)
}

/// Difficulty is written as a probability shift (0.1 = ten points harder).
pub fn write_questions_csv(world: &World, path: &Path) -> Result<()> {
    let rows = world.questions.questions.iter().map(|q| {
        vec![
            q.id.to_string(),
            q.true_label.to_string(),
            fmt_num(q.difficulty),
        ]
    });
    write_rows(path, &["id", "true_label", "difficulty"], rows)
}
