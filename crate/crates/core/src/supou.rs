//! supOU model assembly: Lévy moments, stationary statistics and distorted
//! inverse moments.
//!
//! Every stationary cumulant of the supOU process is proportional to the
//! inverse moment `R` of the reversion measure:
//! mean `M1 R`, variance `M2 R / 2`, third central moment `M3 R / 3` and
//! fourth cumulant `M4 R / 4`, where `M_k = ∫ z^k nu(dz)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum_with;
use crate::qcalc::{DiscreteDensity, ShapeParameter};
use crate::reversion::{DiscreteMeasure, GammaReversionMeasure};
use crate::special::ln_gamma;

/// Tempered stable Lévy measure `nu(dz) = A exp(-B z) z^-(1+C) dz`, `z > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperedStableLevy {
    intensity: f64,
    tempering: f64,
    stability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    /// Compound Poisson jumps: `∫ nu(dz) < ∞`.
    Finite,
    /// Infinitely many small jumps.
    Infinite,
}

impl TemperedStableLevy {
    pub fn new(intensity: f64, tempering: f64, stability: f64) -> Result<Self> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(Error::invalid(format!("Lévy intensity A must be positive, got {intensity}")));
        }
        if !(tempering.is_finite() && tempering > 0.0) {
            return Err(Error::invalid(format!("Lévy tempering B must be positive, got {tempering}")));
        }
        if !(stability.is_finite() && stability < 1.0) {
            return Err(Error::invalid(format!("Lévy stability index C must be below 1, got {stability}")));
        }
        Ok(TemperedStableLevy { intensity, tempering, stability })
    }

    /// `A`
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// `B`
    pub fn tempering(&self) -> f64 {
        self.tempering
    }

    /// `C`
    pub fn stability(&self) -> f64 {
        self.stability
    }

    /// `M_k = A B^(C-k) Gamma(k-C)`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("Lévy moments are defined for k >= 1"));
        }
        let (a, b, c) = (self.intensity, self.tempering, self.stability);
        let kc = k as f64 - c;
        Ok((a.ln() + (c - k as f64) * b.ln() + ln_gamma(kc)).exp())
    }

    pub fn activity(&self) -> Activity {
        if self.stability < 0.0 {
            Activity::Finite
        } else {
            Activity::Infinite
        }
    }
}

pub fn levy_moment(l: &TemperedStableLevy, k: u32) -> Result<f64> {
    l.moment(k)
}

pub fn activity_class(l: &TemperedStableLevy) -> Activity {
    l.activity()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryStats {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
    pub fourth_cumulant: f64,
    /// `third_central / variance^(3/2)`
    pub skew_normalized: f64,
    /// `fourth_cumulant / variance^2` (excess kurtosis)
    pub kurt_normalized: f64,
}

/// A fitted supOU model of a discharge record shifted by its minimum level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupOUModel {
    pub reversion: GammaReversionMeasure,
    pub levy: TemperedStableLevy,
    shift: f64,
    #[serde(skip)]
    moments: OnceLock<[f64; 4]>,
}

impl PartialEq for SupOUModel {
    fn eq(&self, other: &Self) -> bool {
        self.reversion == other.reversion && self.levy == other.levy && self.shift == other.shift
    }
}

impl SupOUModel {
    pub fn new(reversion: GammaReversionMeasure, levy: TemperedStableLevy, shift: f64) -> Result<Self> {
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::invalid(format!("minimum-discharge shift must be non-negative, got {shift}")));
        }
        Ok(SupOUModel { reversion, levy, shift, moments: OnceLock::new() })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn with_shift(&self, shift: f64) -> Result<Self> {
        let out = SupOUModel::new(self.reversion, self.levy, shift)?;
        if let Some(m) = self.moments.get() {
            let _ = out.moments.set(*m);
        }
        Ok(out)
    }

    /// `[M1, M2, M3, M4]`, computed on first use.
    pub fn levy_moments(&self) -> [f64; 4] {
        *self.moments.get_or_init(|| {
            let mut m = [0.0; 4];
            for (k, slot) in m.iter_mut().enumerate() {
                // C < 1 is enforced at construction, so k - C > 0.
                *slot = self.levy.moment(k as u32 + 1).expect("k >= 1");
            }
            m
        })
    }

    pub fn stationary_stats(&self) -> StationaryStats {
        stats_with_inverse_moment(&self.levy_moments(), self.reversion.inverse_moment(), self.shift)
    }
}

/// Stationary statistics for given Lévy moments, inverse moment and shift.
pub fn stats_with_inverse_moment(m: &[f64; 4], r: f64, shift: f64) -> StationaryStats {
    let mean = m[0] * r + shift;
    let variance = m[1] * r / 2.0;
    let third_central = m[2] * r / 3.0;
    let fourth_cumulant = m[3] * r / 4.0;
    StationaryStats {
        mean,
        variance,
        third_central,
        fourth_cumulant,
        skew_normalized: third_central / variance.powf(1.5),
        kurt_normalized: fourth_cumulant / (variance * variance),
    }
}

pub fn stationary_stats(model: &SupOUModel) -> StationaryStats {
    model.stationary_stats()
}

/// `(1/N) sum phi_i^q / r_i`: the inverse moment under the distorted measure.
pub fn distorted_inverse_moment(d: &DiscreteMeasure, phi: &DiscreteDensity, q: ShapeParameter) -> Result<f64> {
    if d.len() != phi.len() {
        return Err(Error::Alignment { expected: d.len(), found: phi.len() });
    }
    let nodes = d.nodes();
    let v = phi.values();
    let qv = q.value();
    let [s] = if q.is_classical() {
        pairwise_sum_with(nodes.len(), &|i| [v[i] / nodes[i]])
    } else {
        pairwise_sum_with(nodes.len(), &|i| [v[i].powf(qv) / nodes[i]])
    };
    Ok(s / nodes.len() as f64)
}
