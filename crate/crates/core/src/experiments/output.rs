//! CSV and JSON artifacts.
//!
//! Floats are written in scientific notation with 17 significant digits, which
//! round-trips every `f64` exactly. Missing values are empty cells.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::RunTrace;

/// Traces for at most this many assets carry the full allocation on every row.
pub const FULL_ALLOCATION_LIMIT: usize = 32;

/// Allocation summary width for larger markets.
pub const TOP_WEIGHTS: usize = 5;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn trace_header(m: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["k", "gamma_k", "m_k", "b"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if m <= FULL_ALLOCATION_LIMIT {
        cols.extend((0..m).map(|j| format!("p_{j}")));
    } else {
        for rank in 1..=TOP_WEIGHTS {
            cols.push(format!("top{rank}_asset"));
            cols.push(format!("top{rank}_p"));
        }
    }
    cols.extend(
        ["ruin_hat", "ruin_se", "min_ruin_hat", "gradmap_norm"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols
}

/// The trace as CSV text: one row per iterate `x_0..=x_{N_max}`.
pub fn trace_csv(trace: &RunTrace) -> String {
    let m = trace.records.first().map_or(0, |r| r.strategy.p().len());
    let mut out = trace_header(m).join(",");
    out.push('\n');
    for r in &trace.records {
        let mut row = vec![
            r.k.to_string(),
            fmt_float(r.gamma),
            r.batch.to_string(),
            fmt_float(r.strategy.b()),
        ];
        let p = r.strategy.p();
        if m <= FULL_ALLOCATION_LIMIT {
            row.extend(p.iter().map(|&x| fmt_float(x)));
        } else {
            let mut order: Vec<usize> = (0..m).collect();
            // largest weights first, lower index on ties
            order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
            for &j in order.iter().take(TOP_WEIGHTS) {
                row.push(j.to_string());
                row.push(fmt_float(p[j]));
            }
        }
        row.push(fmt_opt(r.ruin.map(|e| e.probability)));
        row.push(fmt_opt(r.ruin.map(|e| e.std_error)));
        row.push(fmt_opt(r.min_ruin));
        row.push(fmt_opt(r.gradmap_norm));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Full allocations of the first and last iterate, for traces that only carry
/// the top weights.
pub fn endpoints_csv(trace: &RunTrace) -> String {
    let m = trace.records.first().map_or(0, |r| r.strategy.p().len());
    let mut out = String::from("k,b");
    for j in 0..m {
        let _ = write!(out, ",p_{j}");
    }
    out.push('\n');
    let ends = [trace.records.first(), trace.records.last()];
    for r in ends.into_iter().flatten() {
        let _ = write!(out, "{},{}", r.k, fmt_float(r.strategy.b()));
        for &x in r.strategy.p() {
            let _ = write!(out, ",{}", fmt_float(x));
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    write_text(path, &(text + "\n"))
}
