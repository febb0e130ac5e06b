//! Best point per method from a results CSV.
//!
//! Metrics are errors (error rate or MSE), so lower is better. When a
//! method has `agg` rows only those are considered; otherwise its per-seed
//! rows are. Only final-round rows count.

use std::io::Write;
use std::path::Path;

use silofed_core::fmt::sig9;

use crate::error::CliError;
use crate::results::{read_results, ResultRow, Round, Seed};

#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub row: ResultRow,
    /// Line of the chosen row in the CSV.
    pub line: u64,
}

/// Methods in order of first appearance with their best final row.
pub fn best_points(path: &Path) -> Result<Vec<Best>, CliError> {
    let rows = read_results(path)?;
    let mut methods: Vec<&str> = Vec::new();
    for (_, r) in &rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = Vec::new();
    for m in methods {
        let finals: Vec<&(u64, ResultRow)> = rows
            .iter()
            .filter(|(_, r)| r.method == m && r.round == Round::Final && !r.test_metric.is_nan())
            .collect();
        let has_agg = finals.iter().any(|(_, r)| r.seed == Seed::Agg);
        let best = finals
            .into_iter()
            .filter(|(_, r)| !has_agg || r.seed == Seed::Agg)
            .min_by(|a, b| a.1.test_metric.total_cmp(&b.1.test_metric));
        if let Some((line, row)) = best {
            out.push(Best {
                row: row.clone(),
                line: *line,
            });
        }
    }
    Ok(out)
}

pub fn emit_summary<W: Write>(path: &Path, mut out: W) -> Result<(), CliError> {
    let best = best_points(path)?;
    let io = |e| CliError::io(Path::new("<stdout>"), e);
    let cells: Vec<[String; 6]> = best
        .iter()
        .map(|b| {
            let r = &b.row;
            [
                r.method.clone(),
                r.lambda.map_or("-".into(), sig9),
                sig9(r.epsilon),
                r.seed.to_string(),
                sig9(r.test_metric),
                sig9(r.train_metric),
            ]
        })
        .collect();
    let head = ["method", "lambda", "epsilon", "seed", "test_metric", "train_metric"];
    let mut width = head.map(str::len);
    for c in &cells {
        for (w, s) in width.iter_mut().zip(c) {
            *w = (*w).max(s.len());
        }
    }
    let line = |cols: &[&str]| -> String {
        let parts: Vec<String> = cols.iter().zip(&width).map(|(s, w)| format!("{s:<w$}")).collect();
        parts.join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(&head)).map_err(io)?;
    for c in &cells {
        let refs: Vec<&str> = c.iter().map(String::as_str).collect();
        writeln!(out, "{}", line(&refs)).map_err(io)?;
    }
    Ok(())
}
