use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::{SimError, SpringKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stiffness {
    pub edge: f64,
    pub bend: f64,
    pub torsion: f64,
    pub aug_local: f64,
    pub aug_global: f64,
}

impl Default for Stiffness {
    fn default() -> Self {
        Self { edge: 1.0e5, bend: 5.0e3, torsion: 1.0e3, aug_local: 2.0e3, aug_global: 50.0 }
    }
}

impl Stiffness {
    pub fn of(&self, kind: SpringKind) -> f64 {
        match kind {
            SpringKind::Edge => self.edge,
            SpringKind::Bend => self.bend,
            SpringKind::Torsion => self.torsion,
            SpringKind::AugLocal => self.aug_local,
            SpringKind::AugGlobal => self.aug_global,
        }
    }

    fn values(&self) -> [f64; 5] {
        [self.edge, self.bend, self.torsion, self.aug_local, self.aug_global]
    }
}

/// Simulation parameters. Units: cm, s, g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Substep length in seconds.
    pub dt: f64,
    /// Substeps per 60 Hz display frame.
    pub substeps: u32,
    pub gravity: DVec3,
    /// Velocity damping rate, 1/s.
    pub global_damping: f64,
    pub particle_mass: f64,
    pub stiffness: Stiffness,
    /// Axial damping of edge, bend and torsion springs, g/s.
    pub spring_damping: f64,
    /// Damping of the augmented springs relative to their anchor, g/s. One-way
    /// springs are non-conservative; too little damping here lets strands flutter.
    pub aug_damping: f64,
    /// Stretch-to-compression stiffness ratio of the augmented springs.
    pub biphasic_ratio: f64,
    pub grid_cell: f64,
    /// Fraction of the grid velocity blended into each particle per step.
    pub grid_blend: f64,
    /// Acceleration gain of the density-gradient repulsion, cm²/s².
    pub repulsion_gain: f64,
    /// Relative density excess over rest tolerated before repulsion acts.
    pub repulsion_slack: f64,
    pub collision_friction: f64,
    pub collision_margin: f64,
    /// Linear drag toward the wind velocity, g/s.
    pub wind_drag: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 600.0,
            substeps: 10,
            gravity: DVec3::new(0.0, -981.0, 0.0),
            global_damping: 2.0,
            particle_mass: 1.0,
            stiffness: Stiffness::default(),
            spring_damping: 10.0,
            aug_damping: 60.0,
            biphasic_ratio: 4.0,
            grid_cell: 2.0,
            grid_blend: 0.1,
            repulsion_gain: 2.0e3,
            repulsion_slack: 0.1,
            collision_friction: 0.3,
            collision_margin: 0.1,
            wind_drag: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let scalars = [
            self.dt,
            self.global_damping,
            self.particle_mass,
            self.spring_damping,
            self.aug_damping,
            self.biphasic_ratio,
            self.grid_cell,
            self.grid_blend,
            self.repulsion_gain,
            self.repulsion_slack,
            self.collision_friction,
            self.collision_margin,
            self.wind_drag,
        ];
        let bad = |why: &'static str| Err(SimError::InvalidConfig(why));
        if scalars.iter().chain(self.stiffness.values().iter()).any(|v| !v.is_finite()) || !self.gravity.is_finite() {
            return bad("all parameters must be finite");
        }
        if self.dt <= 0.0 || self.dt > 0.01 {
            return bad("dt must lie in (0, 0.01] s");
        }
        if self.substeps == 0 || self.substeps > 100 {
            return bad("substeps must lie in 1..=100");
        }
        if self.particle_mass <= 0.0 {
            return bad("particle_mass must be positive");
        }
        if self.stiffness.values().iter().any(|&k| k < 0.0) || self.spring_damping < 0.0 || self.aug_damping < 0.0 || self.global_damping < 0.0 {
            return bad("stiffness and damping must be non-negative");
        }
        if self.biphasic_ratio < 1.0 {
            return bad("biphasic_ratio must be at least 1");
        }
        if self.grid_cell < 0.1 {
            return bad("grid_cell must be at least 0.1 cm");
        }
        if !(0.0..=1.0).contains(&self.grid_blend) || !(0.0..=1.0).contains(&self.collision_friction) {
            return bad("grid_blend and collision_friction must lie in [0, 1]");
        }
        if self.repulsion_gain < 0.0 || self.repulsion_slack < 0.0 || self.collision_margin < 0.0 || self.wind_drag < 0.0 {
            return bad("gains, slack, margin and drag must be non-negative");
        }
        Ok(())
    }

    /// Wall-clock seconds covered by one display frame.
    pub fn frame_time(&self) -> f64 {
        self.dt * self.substeps as f64
    }
}
