//! Plot-data tables derived from record shards.
//!
//! Everything here is a pure function of the record stream: shards are read
//! in file-name order and strategies are listed in a fixed kind order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::campaign::RECORDS_DIR;
use super::record::{read_records, Phase, ResultRecord};
use crate::baselines::StrategyKind;
use crate::error::{Error, Result};
use crate::stats::{moving_average, Summary};

pub const DEFAULT_WINDOW: usize = 20;

pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const TABLE_EE_CSV: &str = "table_ee_ratio.csv";
pub const EE_CSV: &str = "energy_efficiency.csv";
pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const POWER_CSV: &str = "power.csv";
pub const COVERAGE_CSV: &str = "coverage.csv";

/// Reads every shard under `<out_dir>/records`; a missing directory yields no records.
pub fn load_records(out_dir: &Path) -> Result<Vec<ResultRecord>> {
    let dir = out_dir.join(RECORDS_DIR);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_records(&p)?);
    }
    Ok(out)
}

fn kind_rank(kind: StrategyKind) -> u8 {
    match kind {
        StrategyKind::A2cFull => 0,
        StrategyKind::A2cPowerOnly => 1,
        StrategyKind::A2cBeamOnly => 2,
        StrategyKind::EsbFixed => 3,
        StrategyKind::Random => 4,
        StrategyKind::Oracle => 5,
    }
}

/// Sort key for a strategy: kind, then name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StrategyKey(u8, String);

impl StrategyKey {
    fn of(r: &ResultRecord) -> Self {
        Self(kind_rank(r.strategy_kind), r.strategy.clone())
    }

    pub fn name(&self) -> &str {
        &self.1
    }
}

/// Final evaluation records grouped by strategy and UE count.
pub fn final_cells(records: &[ResultRecord]) -> BTreeMap<(StrategyKey, usize), Vec<&ResultRecord>> {
    let mut cells: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Eval && r.is_final) {
        cells.entry((StrategyKey::of(r), r.n_ue)).or_default().push(r);
    }
    for v in cells.values_mut() {
        v.sort_by_key(|r| r.seed);
    }
    cells
}

/// Mean and interval of one metric per (strategy, N_UE) cell.
pub fn cell_summaries(
    records: &[ResultRecord],
    metric: fn(&ResultRecord) -> f64,
) -> BTreeMap<(StrategyKey, usize), Summary> {
    final_cells(records)
        .into_iter()
        .map(|(k, rs)| {
            let values: Vec<f64> = rs.iter().map(|r| metric(r)).collect();
            (k, Summary::of(&values).expect("cells are non-empty"))
        })
        .collect()
}

pub fn ee_ratio(r: &ResultRecord) -> f64 {
    r.reward.ee_ratio()
}

pub fn throughput_mbps(r: &ResultRecord) -> f64 {
    r.metrics.throughput_bps / 1e6
}

pub fn power_dbm(r: &ResultRecord) -> f64 {
    r.metrics.tx_power_dbm
}

pub fn coverage_pct(r: &ResultRecord) -> f64 {
    r.metrics.coverage_pct
}

fn csv_text<R, I>(header: &[&str], rows: I) -> String
where
    R: IntoIterator<Item = String>,
    I: IntoIterator<Item = R>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn metric_csv(records: &[ResultRecord], metric: fn(&ResultRecord) -> f64) -> String {
    let rows = cell_summaries(records, metric).into_iter().map(|((key, n_ue), s)| {
        vec![
            key.name().to_string(),
            n_ue.to_string(),
            s.mean.to_string(),
            s.ci95.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            s.n.to_string(),
        ]
    });
    csv_text(&["strategy", "n_ue", "mean", "ci95", "min", "max", "n"], rows)
}

/// Strategy rows by N_UE columns of mean EE ratio, plus the row average.
pub fn ee_table_csv(records: &[ResultRecord]) -> String {
    let cells = cell_summaries(records, ee_ratio);
    let mut n_ues: Vec<usize> = cells.keys().map(|(_, n)| *n).collect();
    n_ues.sort_unstable();
    n_ues.dedup();
    let mut header = vec!["strategy".to_string()];
    header.extend(n_ues.iter().map(|n| format!("n_ue_{n}")));
    header.push("avg".into());
    let mut rows: BTreeMap<StrategyKey, BTreeMap<usize, f64>> = BTreeMap::new();
    for ((k, n), s) in cells {
        rows.entry(k).or_default().insert(n, s.mean);
    }
    let lines = rows.into_iter().map(|(k, row)| {
        let mut line = vec![k.name().to_string()];
        line.extend(n_ues.iter().map(|n| row.get(n).map_or(String::new(), f64::to_string)));
        line.push((row.values().sum::<f64>() / row.len() as f64).to_string());
        line
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_text(&header, lines)
}

/// Smoothed training reward per (strategy, N_UE): mean, CI and min-max band across seeds.
pub fn convergence_rows(records: &[ResultRecord], window_episodes: usize) -> Vec<ConvergencePoint> {
    // (episode index, reward, episodes per record) by seed
    type Series = BTreeMap<u64, Vec<(usize, f64, usize)>>;
    let mut series: BTreeMap<(StrategyKey, usize), Series> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Train) {
        let (reward, block) = match r.block {
            Some(b) => (b.reward, b.episodes),
            None => (r.reward.reward, 1),
        };
        series
            .entry((StrategyKey::of(r), r.n_ue))
            .or_default()
            .entry(r.seed)
            .or_default()
            .push((r.index, reward, block));
    }
    let mut out = Vec::new();
    for ((key, n_ue), seeds) in series {
        let mut smoothed = Vec::new();
        let mut episodes: Vec<usize> = Vec::new();
        for (_, mut pts) in seeds {
            pts.sort_by_key(|p| p.0);
            let block = pts.first().map_or(1, |p| p.2.max(1));
            let window = window_episodes.div_ceil(block).max(1);
            let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if episodes.len() < pts.len() {
                episodes = pts.iter().map(|p| p.0).collect();
            }
            smoothed.push(moving_average(&values, window));
        }
        for (i, &episode) in episodes.iter().enumerate() {
            let column: Vec<f64> = smoothed.iter().filter_map(|s| s.get(i).copied()).collect();
            if let Some(s) = Summary::of(&column) {
                out.push(ConvergencePoint {
                    strategy: key.name().to_string(),
                    n_ue,
                    episode,
                    summary: s,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub strategy: String,
    pub n_ue: usize,
    pub episode: usize,
    pub summary: Summary,
}

fn convergence_csv(records: &[ResultRecord], window: usize) -> String {
    let rows = convergence_rows(records, window).into_iter().map(|p| {
        let s = p.summary;
        vec![
            p.strategy,
            p.n_ue.to_string(),
            p.episode.to_string(),
            s.mean.to_string(),
            s.ci95.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            s.n.to_string(),
        ]
    });
    csv_text(&["strategy", "n_ue", "episode", "mean", "ci95", "min", "max", "n_seeds"], rows)
}

/// All figure tables as (file name, CSV text).
pub fn export_tables(records: &[ResultRecord], window: usize) -> Vec<(&'static str, String)> {
    vec![
        (CONVERGENCE_CSV, convergence_csv(records, window)),
        (TABLE_EE_CSV, ee_table_csv(records)),
        (EE_CSV, metric_csv(records, ee_ratio)),
        (THROUGHPUT_CSV, metric_csv(records, throughput_mbps)),
        (POWER_CSV, metric_csv(records, power_dbm)),
        (COVERAGE_CSV, metric_csv(records, coverage_pct)),
    ]
}

/// Writes the figure tables for the campaign in `out_dir` into `dest`.
pub fn export_figures(out_dir: &Path, dest: &Path, window: usize) -> Result<Vec<PathBuf>> {
    let records = load_records(out_dir)?;
    std::fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let mut written = Vec::new();
    for (name, text) in export_tables(&records, window) {
        let path = dest.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
