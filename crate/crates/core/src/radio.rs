//! Link-budget physics: beam gain pattern, urban-macro pathloss and SINR.
//!
//! Angles enter in degrees. Elevation is measured from the horizon and is
//! negative below it; azimuth is measured from the +x axis of the area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gob::Beam;

/// Planar array description used by the parametric beam pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaConfig {
    /// Elements along the elevation axis.
    pub rows: usize,
    /// Elements along the azimuth axis.
    pub cols: usize,
    pub element_gain_dbi: f64,
    /// Gain floor relative to the peak, negative.
    pub sidelobe_floor_db: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            element_gain_dbi: 8.0,
            sidelobe_floor_db: -30.0,
        }
    }
}

impl AntennaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidConfig("antenna needs at least one row and column".into()));
        }
        if !(self.sidelobe_floor_db < 0.0) || !self.element_gain_dbi.is_finite() {
            return Err(Error::InvalidConfig(
                "antenna sidelobe floor must be negative and element gain finite".into(),
            ));
        }
        Ok(())
    }

    /// Boresight gain, element gain plus array gain.
    pub fn peak_gain_dbi(&self) -> f64 {
        self.element_gain_dbi + 10.0 * ((self.rows * self.cols) as f64).log10()
    }

    /// 3 dB beamwidth along elevation, degrees.
    pub fn beamwidth_theta_deg(&self) -> f64 {
        102.0 / self.rows as f64
    }

    /// 3 dB beamwidth along azimuth, degrees.
    pub fn beamwidth_phi_deg(&self) -> f64 {
        102.0 / self.cols as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetConfig {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub noise_figure_db: f64,
    pub ue_height_m: f64,
    pub gnb_height_m: f64,
    pub shadowing_sigma_los_db: f64,
    pub shadowing_sigma_nlos_db: f64,
    /// Fixed extra loss on every link (penetration, body and implementation losses).
    pub excess_loss_db: f64,
    /// Below this SINR a UE cannot decode and its rate is zero. `None` keeps
    /// plain Shannon capacity at every SINR.
    pub min_sinr_db: Option<f64>,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            bandwidth_mhz: 100.0,
            noise_figure_db: 7.0,
            ue_height_m: 1.5,
            gnb_height_m: 25.0,
            shadowing_sigma_los_db: 4.0,
            shadowing_sigma_nlos_db: 6.0,
            excess_loss_db: 35.0,
            min_sinr_db: Some(-10.0),
        }
    }
}

impl LinkBudgetConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_mhz", self.bandwidth_mhz),
            ("noise_figure_db", self.noise_figure_db),
            ("ue_height_m", self.ue_height_m),
            ("gnb_height_m", self.gnb_height_m),
            ("shadowing_sigma_los_db", self.shadowing_sigma_los_db),
            ("shadowing_sigma_nlos_db", self.shadowing_sigma_nlos_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.carrier_ghz > 6.0 && self.carrier_ghz <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "carrier_ghz must lie in (6, 100], got {}",
                self.carrier_ghz
            )));
        }
        if !(self.excess_loss_db >= 0.0 && self.excess_loss_db.is_finite()) {
            return Err(Error::InvalidConfig("excess_loss_db must be >= 0".into()));
        }
        if self.min_sinr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("min_sinr_db must be finite".into()));
        }
        if self.gnb_height_m <= self.ue_height_m {
            return Err(Error::InvalidConfig("gNB must be mounted above the UEs".into()));
        }
        Ok(())
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_mhz * 1e6
    }

    /// Thermal noise over the carrier bandwidth plus receiver noise figure.
    pub fn noise_floor_dbm(&self) -> f64 {
        -174.0 + 10.0 * self.bandwidth_hz().log10() + self.noise_figure_db
    }

    /// Pathloss with shadowing plus the fixed excess loss.
    pub fn link_loss_db(&self, distance3d_m: f64, los: bool, shadow_db: f64) -> Result<f64> {
        Ok(pathloss(self, distance3d_m, los, shadow_db)? + self.excess_loss_db)
    }
}

/// Direction from the gNB toward a UE, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

/// Gaussian main lobe clamped at the sidelobe floor.
pub fn beam_gain(antenna: &AntennaConfig, beam: Beam, direction: Direction) -> f64 {
    let d_theta = direction.elevation_deg - beam.theta_deg;
    let d_phi = wrap_degrees(direction.azimuth_deg - beam.phi_deg);
    let a_theta = d_theta / antenna.beamwidth_theta_deg();
    let a_phi = d_phi / antenna.beamwidth_phi_deg();
    let attenuation = 12.0 * (a_theta * a_theta + a_phi * a_phi);
    antenna.peak_gain_dbi() - attenuation.min(antenna.sidelobe_floor_db.abs())
}

fn wrap_degrees(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Urban-macro pathloss in dB, including the supplied shadowing draw.
pub fn pathloss(cfg: &LinkBudgetConfig, distance3d_m: f64, los: bool, shadow_db: f64) -> Result<f64> {
    if !(distance3d_m > 0.0) || !distance3d_m.is_finite() {
        return Err(Error::Domain(format!(
            "pathloss distance must be positive, got {distance3d_m}"
        )));
    }
    let log_d = distance3d_m.log10();
    let log_f = cfg.carrier_ghz.log10();
    let pl_los = 28.0 + 22.0 * log_d + 20.0 * log_f;
    let pl = if los {
        pl_los
    } else {
        let pl_nlos = 13.54 + 39.08 * log_d + 20.0 * log_f - 0.6 * (cfg.ue_height_m - 1.5);
        pl_los.max(pl_nlos)
    };
    Ok(pl + shadow_db)
}

/// Line-of-sight probability as a function of ground distance.
pub fn los_probability(distance2d_m: f64) -> Result<f64> {
    if !(distance2d_m >= 0.0) {
        return Err(Error::Domain(format!(
            "ground distance must be non-negative, got {distance2d_m}"
        )));
    }
    if distance2d_m <= 18.0 {
        return Ok(1.0);
    }
    let near = 18.0 / distance2d_m;
    let p = near + (-distance2d_m / 63.0).exp() * (1.0 - near);
    Ok(p.clamp(0.0, 1.0))
}

/// Received SINR in dB. A single gNB has no co-channel interferer, so this
/// is the SNR over the thermal floor.
pub fn sinr(
    cfg: &LinkBudgetConfig,
    antenna: &AntennaConfig,
    tx_power_dbm: f64,
    beam: Beam,
    direction: Direction,
    pathloss_db: f64,
) -> f64 {
    tx_power_dbm + beam_gain(antenna, beam, direction) - pathloss_db - cfg.noise_floor_dbm()
}
