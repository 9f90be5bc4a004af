//! State quantization, action encoding and the energy-efficiency reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gob::{BeamSubset, SubsetFamily};
use crate::netsim::{dbm_to_watt, RoundResult, TrafficConfig};

/// Highest quantized SINR level.
pub const MAX_LEVEL: u8 = 10;

/// Maps an SINR in dB to an integer level in `0..=10`.
///
/// Non-positive values map to 0, values of 10 dB or more to 10, and the
/// open interval in between rounds to nearest with halves away from zero.
pub fn quantize_sinr(gamma_db: f64) -> Result<u8> {
    if gamma_db.is_nan() {
        return Err(Error::Domain("SINR is NaN".into()));
    }
    Ok(if gamma_db <= 0.0 {
        0
    } else if gamma_db >= f64::from(MAX_LEVEL) {
        MAX_LEVEL
    } else {
        gamma_db.round() as u8
    })
}

/// Per-UE quantized SINR, the observation the agent acts on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<u8>);

impl StateVector {
    pub fn new(levels: Vec<u8>) -> Result<Self> {
        if let Some(bad) = levels.iter().find(|&&l| l > MAX_LEVEL) {
            return Err(Error::Domain(format!("state level {bad} exceeds {MAX_LEVEL}")));
        }
        Ok(Self(levels))
    }

    pub fn try_from_sinr(sinr_db: &[f64]) -> Result<Self> {
        sinr_db
            .iter()
            .map(|&g| quantize_sinr(g))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    /// Quantizes, mapping NaN to level 0.
    pub fn from_sinr(sinr_db: &[f64]) -> Self {
        Self(sinr_db.iter().map(|&g| quantize_sinr(g).unwrap_or(0)).collect())
    }

    pub fn levels(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Network input: every level scaled into `[0, 1]`.
    pub fn features(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|&l| f64::from(l) / f64::from(MAX_LEVEL))
            .collect()
    }
}

/// Fraction of UEs at or below the quantized threshold.
pub fn outage_ratio(state: &StateVector, threshold: u8) -> Result<f64> {
    if threshold > MAX_LEVEL {
        return Err(Error::Domain(format!("outage threshold {threshold} exceeds {MAX_LEVEL}")));
    }
    if state.is_empty() {
        return Err(Error::Domain("empty state".into()));
    }
    let n_out = state.levels().iter().filter(|&&l| l <= threshold).count();
    Ok(n_out as f64 / state.len() as f64)
}

/// Sizes of the three action axes: `L`, `M`, `N_P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDims {
    pub l: usize,
    pub m: usize,
    pub n_p: usize,
}

impl ActionDims {
    pub fn size(&self) -> usize {
        self.l * self.m * self.n_p
    }
}

/// One joint action. Indices are 1-based: `l ∈ [1, L]`, `m ∈ [1, M]`, `n ∈ [1, N_P]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BeamAction {
    pub l: usize,
    pub m: usize,
    pub n: usize,
}

/// Flat index, `l`-major then `m` then `n`.
pub fn encode_action(action: BeamAction, dims: ActionDims) -> Result<usize> {
    let in_range = |v: usize, hi: usize| (1..=hi).contains(&v);
    if !(in_range(action.l, dims.l) && in_range(action.m, dims.m) && in_range(action.n, dims.n_p)) {
        return Err(Error::Domain(format!("action {action:?} outside {dims:?}")));
    }
    Ok(((action.l - 1) * dims.m + (action.m - 1)) * dims.n_p + (action.n - 1))
}

pub fn decode_action(index: usize, dims: ActionDims) -> Result<BeamAction> {
    if index >= dims.size() {
        return Err(Error::Domain(format!(
            "action index {index} outside [0, {})",
            dims.size()
        )));
    }
    Ok(BeamAction {
        l: index / (dims.m * dims.n_p) + 1,
        m: (index / dims.n_p) % dims.m + 1,
        n: index % dims.n_p + 1,
    })
}

/// Baseline radiated power and the ordered set of offsets around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLevels {
    pub baseline_dbm: f64,
    pub deltas_db: Vec<f64>,
}

impl Default for PowerLevels {
    fn default() -> Self {
        Self {
            baseline_dbm: 35.0,
            deltas_db: vec![-3.0, -1.5, 0.0, 1.5, 3.0],
        }
    }
}

impl PowerLevels {
    pub fn validate(&self) -> Result<()> {
        if self.deltas_db.is_empty() {
            return Err(Error::InvalidConfig("power deltas are empty".into()));
        }
        if !self.baseline_dbm.is_finite() || self.deltas_db.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidConfig("power levels must be finite".into()));
        }
        if self.deltas_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("power deltas must be strictly increasing".into()));
        }
        Ok(())
    }

    /// `N_P`
    pub fn len(&self) -> usize {
        self.deltas_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas_db.is_empty()
    }

    /// Radiated power for the 1-based delta index `n`.
    pub fn tx_power_dbm(&self, n: usize) -> f64 {
        self.baseline_dbm + self.deltas_db[n - 1]
    }

    /// 1-based index of the zero offset, if present.
    pub fn zero_delta_index(&self) -> Option<usize> {
        self.deltas_db.iter().position(|&d| d == 0.0).map(|i| i + 1)
    }

    pub fn p_min_dbm(&self) -> f64 {
        self.baseline_dbm + self.deltas_db.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn p_min_w(&self) -> f64 {
        dbm_to_watt(self.p_min_dbm())
    }
}

/// The joint action space of beam subsets and power offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub family: SubsetFamily,
    pub power: PowerLevels,
}

impl ActionSpace {
    pub fn dims(&self) -> ActionDims {
        ActionDims {
            l: self.family.n_theta_subsets(),
            m: self.family.n_phi_subsets(),
            n_p: self.power.len(),
        }
    }

    /// Active subset and radiated power for an action.
    pub fn resolve(&self, action: BeamAction) -> Result<(BeamSubset, f64)> {
        encode_action(action, self.dims())?;
        Ok((
            self.family.subset(action.l - 1, action.m - 1),
            self.power.tx_power_dbm(action.n),
        ))
    }
}

/// The reward and every term that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub ee: f64,
    pub ee_max: f64,
    pub outage: f64,
    pub omega_c: f64,
    pub reward: f64,
}

impl RewardBreakdown {
    pub fn ee_ratio(&self) -> f64 {
        self.ee / self.ee_max
    }
}

/// Reward parameters shared by every strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub omega_c: f64,
    pub outage_threshold: u8,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            omega_c: 1.0,
            outage_threshold: 0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c >= 0.0 && self.omega_c.is_finite()) {
            return Err(Error::InvalidConfig("omega_c must be non-negative".into()));
        }
        if self.outage_threshold > MAX_LEVEL {
            return Err(Error::InvalidConfig(format!(
                "outage_threshold must lie in [0, {MAX_LEVEL}]"
            )));
        }
        Ok(())
    }
}

/// `r = ε/ε_MAX − ω_C·ρ`, with `ε_MAX = τ_MAX / P_MIN`.
pub fn reward(
    result: &RoundResult,
    power: &PowerLevels,
    traffic: &TrafficConfig,
    cfg: RewardConfig,
) -> Result<RewardBreakdown> {
    let state = StateVector::try_from_sinr(&result.sinr_db)?;
    let outage = outage_ratio(&state, cfg.outage_threshold)?;
    let ee_max = traffic.tau_max(state.len()) / power.p_min_w();
    let ee = result.ee_bps_per_w;
    Ok(RewardBreakdown {
        ee,
        ee_max,
        outage,
        omega_c: cfg.omega_c,
        reward: ee / ee_max - cfg.omega_c * outage,
    })
}
