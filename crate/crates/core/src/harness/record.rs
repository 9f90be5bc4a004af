//! Line-delimited result records.
//!
//! Every float is written in scientific notation with 17 significant digits
//! and object keys are sorted, so equal records are equal bytes.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::StrategyKind;
use crate::error::{Error, Result};
use crate::mdp::{BeamAction, RewardBreakdown, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

/// Round metrics carried by every record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub throughput_bps: f64,
    pub tx_power_dbm: f64,
    pub ee_bps_per_w: f64,
    pub outage_ratio: f64,
    pub coverage_pct: f64,
}

/// Means over the episodes summarized by one training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMeans {
    pub episodes: usize,
    pub reward: f64,
    pub ee_ratio: f64,
    pub tx_power_dbm: f64,
    pub coverage_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub config_hash: String,
    pub strategy: String,
    pub strategy_kind: StrategyKind,
    pub n_ue: usize,
    pub seed: u64,
    pub phase: Phase,
    /// Training episode (last of the block) or evaluation round, from 0.
    pub index: usize,
    /// Set on the evaluation round a strategy is scored by.
    pub is_final: bool,
    /// Index within the strategy's own action space.
    pub local_action: usize,
    /// Flat index in the full action space, when the decision belongs to it.
    pub flat_action: Option<usize>,
    pub action: Option<BeamAction>,
    pub power_index: usize,
    pub active_beams: usize,
    /// Quantized SINR produced by the action.
    pub state: StateVector,
    pub reward: RewardBreakdown,
    pub metrics: RoundMetrics,
    pub block: Option<BlockMeans>,
}

/// Written in place of a shard when a (strategy, N_UE, seed) run fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub experiment_id: String,
    pub config_hash: String,
    pub strategy: String,
    pub n_ue: usize,
    pub seed: u64,
    pub error_kind: String,
    pub message: String,
}

/// Serializes `value` as one line of canonical JSON.
pub fn to_canonical_line<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap());
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
