//! Flow-level single-cell simulator.
//!
//! One gNB sits at the middle of the `y = 0` edge of a rectangular area and
//! serves stationary UEs in the downlink. A round associates every UE to its
//! best active beam, converts SINR into delivered rate and aggregates the
//! cell throughput, radiated power, energy efficiency and outage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gob::{beams_of, Beam, BeamSubset};
use crate::mdp::{outage_ratio, quantize_sinr, StateVector};
use crate::radio::{self, AntennaConfig, Direction, LinkBudgetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Area {
    pub width_m: f64,
    pub depth_m: f64,
}

impl Default for Area {
    fn default() -> Self {
        Self {
            width_m: 50.0,
            depth_m: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Offered downlink rate per UE.
    pub app_rate_bps: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { app_rate_bps: 1e6 }
    }
}

impl TrafficConfig {
    /// Cell throughput at full offered load, `τ_MAX`.
    pub fn tau_max(&self, n_ue: usize) -> f64 {
        n_ue as f64 * self.app_rate_bps
    }
}

/// Everything a round needs besides the scenario and the action.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub area: Area,
    pub antenna: AntennaConfig,
    pub link: LinkBudgetConfig,
    pub traffic: TrafficConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.area.width_m > 0.0 && self.area.depth_m > 0.0) {
            return Err(Error::InvalidConfig("area dimensions must be positive".into()));
        }
        if !(self.traffic.app_rate_bps > 0.0) {
            return Err(Error::InvalidConfig("app_rate_bps must be positive".into()));
        }
        self.antenna.validate()?;
        self.link.validate()
    }

    /// Ground-level position of the gNB mast.
    pub fn gnb_position(&self) -> (f64, f64) {
        (self.area.width_m / 2.0, 0.0)
    }
}

/// A frozen UE and channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ue_positions: Vec<[f64; 3]>,
    pub los_flags: Vec<bool>,
    pub shadow_draws_db: Vec<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn n_ue(&self) -> usize {
        self.ue_positions.len()
    }

    /// Per-UE direction and total link loss toward the gNB.
    pub fn links(&self, cfg: &SimConfig) -> Result<Vec<UeLink>> {
        let (gx, gy) = cfg.gnb_position();
        let gz = cfg.link.gnb_height_m;
        self.ue_positions
            .iter()
            .zip(&self.los_flags)
            .zip(&self.shadow_draws_db)
            .map(|((&[x, y, z], &los), &shadow)| {
                let (dx, dy, dz) = (x - gx, y - gy, z - gz);
                let d2d = dx.hypot(dy);
                let d3d = d2d.hypot(dz);
                let direction = Direction {
                    elevation_deg: dz.atan2(d2d).to_degrees(),
                    azimuth_deg: dy.atan2(dx).to_degrees(),
                };
                Ok(UeLink {
                    direction,
                    loss_db: cfg.link.link_loss_db(d3d, los, shadow)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeLink {
    pub direction: Direction,
    pub loss_db: f64,
}

/// Draws UE positions uniformly over the area, then LOS state and shadowing.
pub fn generate_scenario(cfg: &SimConfig, n_ue: usize, seed: u64) -> Result<Scenario> {
    if n_ue == 0 {
        return Err(Error::InvalidConfig("a scenario needs at least one UE".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gx, gy) = cfg.gnb_position();
    let los_shadow = Normal::new(0.0, cfg.link.shadowing_sigma_los_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let nlos_shadow = Normal::new(0.0, cfg.link.shadowing_sigma_nlos_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut s = Scenario {
        ue_positions: Vec::with_capacity(n_ue),
        los_flags: Vec::with_capacity(n_ue),
        shadow_draws_db: Vec::with_capacity(n_ue),
        seed,
    };
    for _ in 0..n_ue {
        let x = rng.random::<f64>() * cfg.area.width_m;
        let y = rng.random::<f64>() * cfg.area.depth_m;
        let p_los = radio::los_probability((x - gx).hypot(y - gy))?;
        let los = rng.random::<f64>() < p_los;
        let shadow = if los {
            los_shadow.sample(&mut rng)
        } else {
            nlos_shadow.sample(&mut rng)
        };
        s.ue_positions.push([x, y, cfg.link.ue_height_m]);
        s.los_flags.push(los);
        s.shadow_draws_db.push(shadow);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    /// Index into the active beam list.
    pub beam: usize,
    pub sinr_db: f64,
}

/// Best active beam per UE by received SINR, ties to the lowest index.
pub fn associate(
    links: &[UeLink],
    active_beams: &[Beam],
    cfg: &SimConfig,
    tx_power_dbm: f64,
) -> Result<Vec<Association>> {
    if active_beams.is_empty() {
        return Err(Error::Domain("no active beams".into()));
    }
    Ok(links
        .iter()
        .map(|link| {
            let mut best = Association {
                beam: 0,
                sinr_db: f64::NEG_INFINITY,
            };
            for (b, &beam) in active_beams.iter().enumerate() {
                let s = radio::sinr(
                    &cfg.link,
                    &cfg.antenna,
                    tx_power_dbm,
                    beam,
                    link.direction,
                    link.loss_db,
                );
                if s > best.sinr_db {
                    best = Association { beam: b, sinr_db: s };
                }
            }
            best
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub sinr_db: Vec<f64>,
    /// Index of the serving beam within the active subset, theta-major.
    pub served_beam: Vec<usize>,
    pub per_ue_rate_bps: Vec<f64>,
    pub gnb_throughput_bps: f64,
    pub tx_power_dbm: f64,
    pub tx_power_w: f64,
    pub ee_bps_per_w: f64,
    pub outage_ratio: f64,
}

impl RoundResult {
    pub fn state(&self) -> StateVector {
        StateVector::from_sinr(&self.sinr_db)
    }

    /// Fraction of UEs whose quantized SINR is strictly above `threshold`.
    pub fn coverage(&self, threshold: u8) -> f64 {
        let n = self.sinr_db.len();
        let above = self
            .sinr_db
            .iter()
            .filter(|&&s| quantize_sinr(s).unwrap_or(0) > threshold)
            .count();
        above as f64 / n as f64
    }
}

/// One simulation round for an active subset at a given radiated power.
pub fn run_round(
    scenario: &Scenario,
    subset: &BeamSubset,
    tx_power_dbm: f64,
    cfg: &SimConfig,
    outage_threshold: u8,
) -> Result<RoundResult> {
    let links = scenario.links(cfg)?;
    run_round_with_links(&links, subset, tx_power_dbm, cfg, outage_threshold)
}

/// [`run_round`] with precomputed links, for callers sweeping many actions.
pub fn run_round_with_links(
    links: &[UeLink],
    subset: &BeamSubset,
    tx_power_dbm: f64,
    cfg: &SimConfig,
    outage_threshold: u8,
) -> Result<RoundResult> {
    let beams = beams_of(subset);
    let assoc = associate(links, &beams, cfg, tx_power_dbm)?;

    let mut load = vec![0usize; beams.len()];
    for a in &assoc {
        load[a.beam] += 1;
    }
    let bw = cfg.link.bandwidth_hz();
    let per_ue_rate_bps: Vec<f64> = assoc
        .iter()
        .map(|a| {
            let capacity = match cfg.link.min_sinr_db {
                Some(min) if a.sinr_db < min => 0.0,
                _ => bw * (1.0 + db_to_linear(a.sinr_db)).log2(),
            };
            (capacity / load[a.beam] as f64).min(cfg.traffic.app_rate_bps)
        })
        .collect();

    let sinr_db: Vec<f64> = assoc.iter().map(|a| a.sinr_db).collect();
    let state = StateVector::try_from_sinr(&sinr_db)?;
    let gnb_throughput_bps = per_ue_rate_bps.iter().sum::<f64>();
    let tx_power_w = dbm_to_watt(tx_power_dbm);
    Ok(RoundResult {
        served_beam: assoc.iter().map(|a| a.beam).collect(),
        sinr_db,
        per_ue_rate_bps,
        gnb_throughput_bps,
        tx_power_dbm,
        tx_power_w,
        ee_bps_per_w: gnb_throughput_bps / tx_power_w,
        outage_ratio: outage_ratio(&state, outage_threshold)?,
    })
}

pub fn dbm_to_watt(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gob::{enumerate_subsets, esb_select, GridOfBeams, SubsetConstraint};
    use proptest::prelude::*;

    fn grid() -> GridOfBeams {
        GridOfBeams::new(vec![-15.0, -45.0, -60.0], vec![0.0, 45.0, 90.0, 135.0, 180.0]).unwrap()
    }

    fn esb3() -> BeamSubset {
        esb_select(&grid(), SubsetConstraint::new(1, 3)).unwrap()
    }

    /// Strong link everywhere: no excess loss, no rate cutoff.
    fn clean_config() -> SimConfig {
        SimConfig {
            link: LinkBudgetConfig {
                excess_loss_db: 0.0,
                min_sinr_db: None,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watt(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watt(32.0) - 1.5848931924611136).abs() < 1e-12);
        assert!((dbm_to_watt(0.0) - 0.001).abs() < 1e-18);
        assert!((dbm_to_watt(35.0) - 3.1622776601683795).abs() < 1e-12);
        assert!((watt_to_dbm(dbm_to_watt(33.5)) - 33.5).abs() < 1e-12);
    }

    #[test]
    fn scenario_is_deterministic_per_seed() {
        let cfg = SimConfig::default();
        let a = generate_scenario(&cfg, 10, 42).unwrap();
        let b = generate_scenario(&cfg, 10, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = generate_scenario(&cfg, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scenario_sizes_and_bounds() {
        let cfg = SimConfig::default();
        for n in [5, 10, 15, 20] {
            let s = generate_scenario(&cfg, n, 7).unwrap();
            assert_eq!(s.n_ue(), n);
            assert_eq!(s.los_flags.len(), n);
            assert_eq!(s.shadow_draws_db.len(), n);
            for p in &s.ue_positions {
                assert!((0.0..=50.0).contains(&p[0]) && (0.0..=50.0).contains(&p[1]));
                assert_eq!(p[2], 1.5);
            }
        }
        assert!(generate_scenario(&cfg, 0, 1).is_err());
    }

    #[test]
    fn single_beam_serves_everyone() {
        let cfg = SimConfig::default();
        let s = generate_scenario(&cfg, 12, 3).unwrap();
        let one = BeamSubset {
            theta: vec![-45.0],
            phi: vec![90.0],
        };
        let r = run_round(&s, &one, 35.0, &cfg, 0).unwrap();
        assert!(r.served_beam.iter().all(|&b| b == 0));
    }

    #[test]
    fn saturated_cell_reaches_tau_max() {
        let cfg = clean_config();
        let s = generate_scenario(&cfg, 5, 11).unwrap();
        let r = run_round(&s, &grid().full_subset(), 35.0, &cfg, 0).unwrap();
        assert!(r.sinr_db.iter().all(|&g| g > 10.0));
        assert_eq!(r.gnb_throughput_bps, cfg.traffic.tau_max(5));
        assert!((r.tx_power_w - 3.1622776601683795).abs() < 1e-12);
        assert!((r.ee_bps_per_w - 1581138.8300841895).abs() < 1e-6);
        assert_eq!(r.outage_ratio, 0.0);
    }

    #[test]
    fn empty_active_set_is_an_error() {
        let cfg = SimConfig::default();
        let s = generate_scenario(&cfg, 3, 1).unwrap();
        let links = s.links(&cfg).unwrap();
        assert!(associate(&links, &[], &cfg, 35.0).is_err());
    }

    #[test]
    fn rate_cutoff_zeroes_undecodable_ues() {
        let mut cfg = SimConfig::default();
        cfg.link.excess_loss_db = 90.0;
        let s = generate_scenario(&cfg, 6, 5).unwrap();
        let r = run_round(&s, &esb3(), 32.0, &cfg, 0).unwrap();
        for (g, rate) in r.sinr_db.iter().zip(&r.per_ue_rate_bps) {
            if *g < -10.0 {
                assert_eq!(*rate, 0.0);
            }
        }
        assert_eq!(r.outage_ratio, 1.0);
    }

    /// Exhaustive check: the full grid dominates every 3-beam subset per UE.
    #[test]
    fn full_grid_dominates_every_constrained_subset() {
        let cfg = SimConfig::default();
        let g = grid();
        let fam = enumerate_subsets(&g, SubsetConstraint::new(1, 3)).unwrap();
        for seed in 0..20 {
            let s = generate_scenario(&cfg, 8, seed).unwrap();
            let full = run_round(&s, &g.full_subset(), 35.0, &cfg, 0).unwrap();
            for l in 0..fam.n_theta_subsets() {
                for m in 0..fam.n_phi_subsets() {
                    let sub = run_round(&s, &fam.subset(l, m), 35.0, &cfg, 0).unwrap();
                    for (f, c) in full.sinr_db.iter().zip(&sub.sinr_db) {
                        assert!(f >= c);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_invariants(seed in 0u64..10_000, n in 1usize..25, p in 20.0f64..45.0, l in 0usize..3, m in 0usize..10) {
            let cfg = SimConfig::default();
            let s = generate_scenario(&cfg, n, seed).unwrap();
            let fam = enumerate_subsets(&grid(), SubsetConstraint::new(1, 3)).unwrap();
            let sub = fam.subset(l, m);
            let r = run_round(&s, &sub, p, &cfg, 0).unwrap();

            let tau: f64 = r.per_ue_rate_bps.iter().sum();
            prop_assert_eq!(tau, r.gnb_throughput_bps);
            prop_assert!(r.gnb_throughput_bps <= cfg.traffic.tau_max(n));
            prop_assert!((0.0..=1.0).contains(&r.outage_ratio));
            prop_assert!(r.per_ue_rate_bps.iter().all(|&x| (0.0..=cfg.traffic.app_rate_bps).contains(&x)));
            prop_assert!((r.ee_bps_per_w - tau / r.tx_power_w).abs() <= 1e-9 * r.ee_bps_per_w.max(1.0));

            // co-beam shares never exceed the beam's capacity
            let bw = cfg.link.bandwidth_hz();
            for b in 0..sub.k_beams() {
                let ues: Vec<usize> = (0..n).filter(|&u| r.served_beam[u] == b).collect();
                for &u in &ues {
                    let cap = bw * (1.0 + 10f64.powf(r.sinr_db[u] / 10.0)).log2();
                    prop_assert!(r.per_ue_rate_bps[u] * ues.len() as f64 <= cap * (1.0 + 1e-12));
                }
            }

            // pure function of its inputs
            let again = run_round(&s, &sub, p, &cfg, 0).unwrap();
            prop_assert_eq!(&r, &again);
        }

        #[test]
        fn more_power_never_hurts(seed in 0u64..10_000, n in 1usize..25, p in 20.0f64..40.0, dp in 0.0f64..6.0) {
            let cfg = SimConfig::default();
            let s = generate_scenario(&cfg, n, seed).unwrap();
            let lo = run_round(&s, &esb3(), p, &cfg, 0).unwrap();
            let hi = run_round(&s, &esb3(), p + dp, &cfg, 0).unwrap();
            for (a, b) in lo.sinr_db.iter().zip(&hi.sinr_db) {
                prop_assert!(b >= a);
            }
            prop_assert!(hi.gnb_throughput_bps >= lo.gnb_throughput_bps);
        }

        #[test]
        fn adding_beams_never_lowers_sinr(seed in 0u64..10_000, n in 1usize..20, m in 0usize..10) {
            let cfg = SimConfig::default();
            let s = generate_scenario(&cfg, n, seed).unwrap();
            let fam = enumerate_subsets(&grid(), SubsetConstraint::new(1, 3)).unwrap();
            let small = fam.subset(1, m);
            let big = BeamSubset { theta: vec![-60.0, -45.0], phi: small.phi.clone() };
            let a = run_round(&s, &small, 35.0, &cfg, 0).unwrap();
            let b = run_round(&s, &big, 35.0, &cfg, 0).unwrap();
            for (x, y) in a.sinr_db.iter().zip(&b.sinr_db) {
                prop_assert!(y >= x);
            }
        }
    }
}
