//! Plain-text strategy × N_UE summary of the energy-efficiency ratio.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::export::{cell_summaries, ee_ratio, StrategyKey};
use super::record::ResultRecord;

pub fn ee_report(records: &[ResultRecord]) -> String {
    let cells = cell_summaries(records, ee_ratio);
    let mut n_ues: Vec<usize> = cells.keys().map(|(_, n)| *n).collect();
    n_ues.sort_unstable();
    n_ues.dedup();
    let mut rows: BTreeMap<StrategyKey, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for ((k, n), s) in &cells {
        rows.entry(k.clone()).or_default().insert(*n, (s.mean, s.ci95));
    }

    let name_w = rows.keys().map(|k| k.name().len()).max().unwrap_or(0).max("Strategy".len());
    let cell_w = 13;
    let mut out = String::from("Max energy efficiency ratio (mean ± 95% CI)\n");
    let _ = write!(out, "{:<name_w$}", "Strategy");
    for n in &n_ues {
        let _ = write!(out, " | {:>cell_w$}", format!("N_UE={n}"));
    }
    let _ = writeln!(out, " | {:>6}", "Avg");
    let width = out.lines().last().map_or(0, |l| l.chars().count());
    let _ = writeln!(out, "{}", "-".repeat(width));
    for (k, row) in &rows {
        let _ = write!(out, "{:<name_w$}", k.name());
        for n in &n_ues {
            let cell = row.get(n).map_or(String::new(), |(m, ci)| format!("{m:.3} ± {ci:.3}"));
            let _ = write!(out, " | {cell:>cell_w$}");
        }
        let avg = row.values().map(|v| v.0).sum::<f64>() / row.len() as f64;
        let _ = writeln!(out, " | {avg:>6.3}");
    }
    if rows.is_empty() {
        out.push_str("(no evaluation records)\n");
    }
    out
}
