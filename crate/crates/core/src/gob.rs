//! Grid-of-Beams codebook, constrained subsets and the Equally Spaced Beams rule.
//!
//! A regular grid is the Cartesian product of an elevation axis and an
//! azimuth axis. An overhead constraint limits the active set to
//! `k_theta` elevations times `k_phi` azimuths; [`enumerate_subsets`] lists
//! every admissible choice per axis in a stable order so that action
//! indices keep their meaning across runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One beam, identified by the boresight direction of its maximum gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

/// The full codebook. Both axes are kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOfBeams {
    theta: Vec<f64>,
    phi: Vec<f64>,
}

impl GridOfBeams {
    /// Builds a grid from elevation and azimuth angles in degrees, in any order.
    pub fn new(theta: impl Into<Vec<f64>>, phi: impl Into<Vec<f64>>) -> Result<Self> {
        let theta = sorted_axis("theta", theta.into(), -90.0, 0.0)?;
        let phi = sorted_axis("phi", phi.into(), 0.0, 180.0)?;
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn n_beams(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    /// Every beam of the grid, theta-major.
    pub fn beams(&self) -> Vec<Beam> {
        product(&self.theta, &self.phi)
    }

    /// Theta-major index of a beam within the full grid.
    pub fn beam_index(&self, beam: Beam) -> Option<usize> {
        let i = self.theta.iter().position(|&t| t == beam.theta_deg)?;
        let j = self.phi.iter().position(|&p| p == beam.phi_deg)?;
        Some(i * self.phi.len() + j)
    }

    /// The subset equal to the whole grid.
    pub fn full_subset(&self) -> BeamSubset {
        BeamSubset {
            theta: self.theta.clone(),
            phi: self.phi.clone(),
        }
    }
}

impl<'de> Deserialize<'de> for GridOfBeams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            theta: Vec<f64>,
            phi: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        GridOfBeams::new(raw.theta, raw.phi).map_err(serde::de::Error::custom)
    }
}

fn sorted_axis(name: &str, mut axis: Vec<f64>, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if axis.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} axis is empty")));
    }
    if let Some(bad) = axis.iter().find(|a| !a.is_finite() || **a < lo || **a > hi) {
        return Err(Error::InvalidGrid(format!(
            "{name} angle {bad} outside [{lo}, {hi}]"
        )));
    }
    axis.sort_by(f64::total_cmp);
    if axis.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidGrid(format!("{name} angles are not distinct")));
    }
    Ok(axis)
}

/// Number of options kept per axis under the overhead constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetConstraint {
    pub k_theta: usize,
    pub k_phi: usize,
}

impl SubsetConstraint {
    pub fn new(k_theta: usize, k_phi: usize) -> Self {
        Self { k_theta, k_phi }
    }

    /// Total number of active beams, `K_B`.
    pub fn k_beams(&self) -> usize {
        self.k_theta * self.k_phi
    }

    pub fn validate(&self, grid: &GridOfBeams) -> Result<()> {
        let ok = (1..=grid.n_theta()).contains(&self.k_theta)
            && (1..=grid.n_phi()).contains(&self.k_phi);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConstraint {
                k_theta: self.k_theta,
                k_phi: self.k_phi,
                n_theta: grid.n_theta(),
                n_phi: grid.n_phi(),
            })
        }
    }
}

/// An active subset: chosen elevations and azimuths, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSubset {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl BeamSubset {
    pub fn k_beams(&self) -> usize {
        self.theta.len() * self.phi.len()
    }
}

/// All admissible per-axis subsets, `(Θ^L, Φ^M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFamily {
    pub theta_subsets: Vec<Vec<f64>>,
    pub phi_subsets: Vec<Vec<f64>>,
}

impl SubsetFamily {
    /// `L`
    pub fn n_theta_subsets(&self) -> usize {
        self.theta_subsets.len()
    }

    /// `M`
    pub fn n_phi_subsets(&self) -> usize {
        self.phi_subsets.len()
    }

    /// Subset for 0-based axis indices.
    pub fn subset(&self, l: usize, m: usize) -> BeamSubset {
        BeamSubset {
            theta: self.theta_subsets[l].clone(),
            phi: self.phi_subsets[m].clone(),
        }
    }

    /// 0-based `(l, m)` of a subset, if it belongs to the family.
    pub fn position(&self, subset: &BeamSubset) -> Option<(usize, usize)> {
        let l = self.theta_subsets.iter().position(|t| *t == subset.theta)?;
        let m = self.phi_subsets.iter().position(|p| *p == subset.phi)?;
        Some((l, m))
    }
}

/// Lists every `k`-combination of each axis, lexicographic over the sorted angles.
pub fn enumerate_subsets(grid: &GridOfBeams, c: SubsetConstraint) -> Result<SubsetFamily> {
    c.validate(grid)?;
    let pick = |axis: &[f64], k: usize| -> Vec<Vec<f64>> {
        combinations(axis.len(), k)
            .into_iter()
            .map(|idx| idx.into_iter().map(|i| axis[i]).collect())
            .collect()
    };
    Ok(SubsetFamily {
        theta_subsets: pick(grid.theta(), c.k_theta),
        phi_subsets: pick(grid.phi(), c.k_phi),
    })
}

/// Equally Spaced Beams: `k` indices spread evenly over each sorted axis.
///
/// For `k > 1` both endpoints are included, `round(i·(n−1)/(k−1))`; for
/// `k = 1` the middle element `round((n−1)/2)` is taken. Halves round up.
pub fn esb_select(grid: &GridOfBeams, c: SubsetConstraint) -> Result<BeamSubset> {
    c.validate(grid)?;
    let pick = |axis: &[f64], k: usize| -> Vec<f64> {
        esb_indices(axis.len(), k).into_iter().map(|i| axis[i]).collect()
    };
    Ok(BeamSubset {
        theta: pick(grid.theta(), c.k_theta),
        phi: pick(grid.phi(), c.k_phi),
    })
}

fn esb_indices(n: usize, k: usize) -> Vec<usize> {
    if k == 1 {
        return vec![n / 2];
    }
    let (num, den) = (n - 1, k - 1);
    (0..k).map(|i| (2 * i * num + den) / (2 * den)).collect()
}

/// Cartesian product of a subset, theta-major.
pub fn beams_of(subset: &BeamSubset) -> Vec<Beam> {
    product(&subset.theta, &subset.phi)
}

fn product(theta: &[f64], phi: &[f64]) -> Vec<Beam> {
    theta
        .iter()
        .flat_map(|&t| {
            phi.iter().map(move |&p| Beam {
                theta_deg: t,
                phi_deg: p,
            })
        })
        .collect()
}

/// Index combinations of `0..n` taken `k` at a time, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(binomial(n, k) as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // rightmost position that can still advance
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}
