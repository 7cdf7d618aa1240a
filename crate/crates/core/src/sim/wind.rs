use std::f64::consts::TAU;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindField {
    pub direction: DVec3,
    /// Mean wind speed, cm/s.
    pub strength: f64,
    /// Relative gust swing in [0, 1].
    pub gust_amplitude: f64,
    pub gust_frequency: f64,
    pub turbulence_seed: u64,
    pub enabled: bool,
}

impl Default for WindField {
    fn default() -> Self {
        Self {
            direction: DVec3::X,
            strength: 0.0,
            gust_amplitude: 0.0,
            gust_frequency: 0.5,
            turbulence_seed: 0,
            enabled: false,
        }
    }
}

impl WindField {
    /// The breeze switched on by a chat request.
    pub fn breeze() -> Self {
        Self {
            direction: DVec3::X,
            strength: 300.0,
            gust_amplitude: 0.5,
            gust_frequency: 0.5,
            turbulence_seed: 7,
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let finite = self.direction.is_finite()
            && self.strength.is_finite()
            && self.gust_amplitude.is_finite()
            && self.gust_frequency.is_finite();
        if !finite {
            return Err(SimError::InvalidWind("parameters must be finite"));
        }
        if !self.enabled {
            return Ok(());
        }
        if (self.direction.length() - 1.0).abs() > 1e-6 {
            return Err(SimError::NonUnitDirection);
        }
        if self.strength < 0.0 || self.gust_frequency < 0.0 || !(0.0..=1.0).contains(&self.gust_amplitude) {
            return Err(SimError::InvalidWind("strength and frequency must be non-negative, amplitude in [0, 1]"));
        }
        Ok(())
    }

    fn phases(&self) -> (f64, f64) {
        let a = derive_seed(self.turbulence_seed, 0);
        let b = derive_seed(self.turbulence_seed, 1);
        (unit(a) * TAU, unit(b) * TAU)
    }

    /// Per-strand phase jitter so neighbouring strands do not move in lockstep.
    pub fn strand_phase(&self, strand_id: u32) -> f64 {
        unit(derive_seed(self.turbulence_seed ^ 0xA5A5, strand_id as u64)) * 0.8
    }

    /// Gust multiplier at time `t`; identically 1 when the amplitude is 0.
    pub fn gust(&self, t: f64, strand_phase: f64) -> f64 {
        if self.gust_amplitude == 0.0 {
            return 1.0;
        }
        let (p1, p2) = self.phases();
        let w = TAU * self.gust_frequency;
        let swing = 0.6 * (w * t + p1 + strand_phase).sin() + 0.4 * (2.3 * w * t + p2 + strand_phase).sin();
        1.0 + self.gust_amplitude * swing
    }

    pub fn velocity(&self, t: f64, strand_phase: f64) -> DVec3 {
        if !self.enabled {
            return DVec3::ZERO;
        }
        self.direction * (self.strength * self.gust(t, strand_phase))
    }
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}
