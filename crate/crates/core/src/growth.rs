//! Procedural strand growth on painted head regions.
//!
//! A strand starts at a root sampled on the painted triangles with an
//! initial direction taken from the interpolated surface normal plus a
//! small random perturbation. Each growth step then bends the direction
//! downward with a gravity term whose influence is capped by the angle to
//! the vertical, and adds a helical offset that produces curls and waves:
//!
//! ```text
//! grav_i = (0, -i * p_gravity, 0)
//! dir'   = dir_{i-1} + grav_{i-1} * max(p_gamma_cap, 1 - |dir_{i-1} . Y|)
//! H_i    = (p_h * cos(i * p_freq), 1, p_h * sin(i * p_freq))
//! dir_i  = dir' + p_spiral * (dir' - H_i)
//! v_i    = v_{i-1} + segment_scale * dir_i
//! ```
//!
//! Directions are never renormalized, so segment length follows the
//! recursion; `segment_scale` only rescales the emitted geometry.

use glam::DVec3;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{HeadMesh, PaintSelection, Strand};
use crate::rng::{derive_seed, rng_from_seed};

/// Per-component scale of the uniform root-direction perturbation.
pub const DEFAULT_PERTURBATION_SCALE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum GrowthError {
    #[error("paint selection has no triangles")]
    EmptySelection,
    #[error("root or initial direction is not finite")]
    NonFiniteInput,
    #[error("initial direction is the zero vector")]
    ZeroDirection,
    #[error("invalid growth parameters: {0}")]
    InvalidParams(&'static str),
    #[error("sweep value lists must be non-empty")]
    EmptySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthParams {
    /// Lower bound on the gravity gain, so near-vertical directions still bend.
    pub p_gamma_cap: f64,
    /// Gravity added per step, growing linearly with the step index.
    pub p_gravity: f64,
    /// Strength of the pull toward the helix vector.
    pub p_spiral: f64,
    pub p_helix_radius: f64,
    /// Radians of helix phase per step.
    pub p_freq: f64,
    pub steps: u32,
    pub segment_scale: f64,
    pub perturbation_scale: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            p_gamma_cap: 0.2,
            p_gravity: 0.05,
            p_spiral: 0.3,
            p_helix_radius: 0.5,
            p_freq: 1.0,
            steps: 16,
            segment_scale: 1.0,
            perturbation_scale: DEFAULT_PERTURBATION_SCALE,
        }
    }
}

impl GrowthParams {
    pub fn validate(&self) -> Result<(), GrowthError> {
        let scalars = [
            self.p_gamma_cap,
            self.p_gravity,
            self.p_spiral,
            self.p_helix_radius,
            self.p_freq,
            self.segment_scale,
            self.perturbation_scale,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return Err(GrowthError::InvalidParams("parameters must be finite"));
        }
        if !(0.0..=1.0).contains(&self.p_gamma_cap) {
            return Err(GrowthError::InvalidParams("p_gamma_cap must lie in [0, 1]"));
        }
        if self.segment_scale <= 0.0 {
            return Err(GrowthError::InvalidParams("segment_scale must be positive"));
        }
        if self.perturbation_scale < 0.0 {
            return Err(GrowthError::InvalidParams("perturbation_scale must be non-negative"));
        }
        Ok(())
    }

    pub fn gravity_at(&self, step: u32) -> DVec3 {
        DVec3::new(0.0, -(step as f64) * self.p_gravity, 0.0)
    }

    pub fn helix_at(&self, step: u32) -> DVec3 {
        let phase = step as f64 * self.p_freq;
        DVec3::new(self.p_helix_radius * phase.cos(), 1.0, self.p_helix_radius * phase.sin())
    }
}

/// Intermediate values of one growth step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCursor {
    pub step: u32,
    pub dir: DVec3,
    pub grav: DVec3,
    pub helix: DVec3,
    pub perturbation: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSample {
    pub root: DVec3,
    pub dir0: DVec3,
    pub triangle_id: u32,
    pub perturbation: DVec3,
}

/// Samples a root on the selection with the default perturbation scale.
pub fn sample_root(mesh: &HeadMesh, sel: &PaintSelection, rng_seed: u64) -> Result<RootSample, GrowthError> {
    sample_root_with_rng(mesh, sel, DEFAULT_PERTURBATION_SCALE, &mut rng_from_seed(rng_seed))
}

/// Area-weighted triangle choice by cumulative-sum inversion, then a
/// uniform barycentric point (square-root warp) on that triangle.
pub fn sample_root_with_rng<R: RngCore + ?Sized>(
    mesh: &HeadMesh,
    sel: &PaintSelection,
    perturbation_scale: f64,
    rng: &mut R,
) -> Result<RootSample, GrowthError> {
    if sel.triangle_ids.is_empty() {
        return Err(GrowthError::EmptySelection);
    }
    let ids: Vec<u32> = sel.triangle_ids.iter().copied().collect();
    let mut cumulative = Vec::with_capacity(ids.len());
    let mut total = 0.0;
    for &t in &ids {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let pick = rng.random::<f64>() * total;
    let slot = cumulative.partition_point(|&c| c <= pick).min(ids.len() - 1);
    let triangle_id = ids[slot];

    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    let s = r1.sqrt();
    let bary = [1.0 - s, s * (1.0 - r2), s * r2];

    let tri = mesh.triangles[triangle_id as usize];
    let mut root = DVec3::ZERO;
    let mut normal = DVec3::ZERO;
    for (w, &vi) in bary.iter().zip(&tri) {
        root += *w * mesh.vertices[vi as usize];
        normal += *w * mesh.vertex_normals[vi as usize];
    }
    let perturbation = DVec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * perturbation_scale;
    Ok(RootSample { root, dir0: normal + perturbation, triangle_id, perturbation })
}

fn check_inputs(root: DVec3, dir0: DVec3, params: &GrowthParams) -> Result<(), GrowthError> {
    if !root.is_finite() || !dir0.is_finite() {
        return Err(GrowthError::NonFiniteInput);
    }
    if dir0 == DVec3::ZERO {
        return Err(GrowthError::ZeroDirection);
    }
    params.validate()
}

/// Grows one strand of `params.steps + 1` vertices from `root`.
pub fn grow_strand(root: DVec3, dir0: DVec3, params: &GrowthParams) -> Result<Strand, GrowthError> {
    trace_strand(root, dir0, DVec3::ZERO, params).map(|(s, _)| s)
}

/// Like [`grow_strand`] but also returns the per-step cursors
/// (`cursors[k]` describes step `k + 1`).
pub fn trace_strand(
    root: DVec3,
    dir0: DVec3,
    perturbation: DVec3,
    params: &GrowthParams,
) -> Result<(Strand, Vec<GrowthCursor>), GrowthError> {
    check_inputs(root, dir0, params)?;
    let steps = params.steps;
    let mut vertices = Vec::with_capacity(steps as usize + 1);
    let mut cursors = Vec::with_capacity(steps as usize);
    vertices.push(root);

    let mut dir = dir0;
    let mut prev_grav = params.gravity_at(0);
    let mut v = root;
    for i in 1..=steps {
        let grav = params.gravity_at(i);
        let gain = params.p_gamma_cap.max(1.0 - dir.y.abs());
        let bent = dir + prev_grav * gain;
        let helix = params.helix_at(i);
        dir = bent + params.p_spiral * (bent - helix);
        v += params.segment_scale * dir;
        vertices.push(v);
        cursors.push(GrowthCursor { step: i, dir, grav, helix, perturbation });
        prev_grav = grav;
    }
    Ok((Strand::new(vertices), cursors))
}

/// Grows `count` strands on the painted region; strand `k` uses its own
/// generator seeded from `(rng_seed, k)`, so output order and content do
/// not depend on how the work is scheduled.
pub fn grow_region(
    mesh: &HeadMesh,
    sel: &PaintSelection,
    params: &GrowthParams,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<Strand>, GrowthError> {
    params.validate()?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if sel.triangle_ids.is_empty() {
        return Err(GrowthError::EmptySelection);
    }
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(rng_seed, k as u64));
            let sample = sample_root_with_rng(mesh, sel, params.perturbation_scale, &mut rng)?;
            let dir0 = if sample.dir0 == DVec3::ZERO { DVec3::Y } else { sample.dir0 };
            grow_strand(sample.root, dir0, params)
        })
        .collect()
}

/// One strand per `(p_h, p_gravity)` pair; rows follow `p_gravity_values`,
/// columns follow `p_h_values`.
pub fn sweep_grid(
    root: DVec3,
    dir0: DVec3,
    base: &GrowthParams,
    p_h_values: &[f64],
    p_gravity_values: &[f64],
) -> Result<Vec<Vec<Strand>>, GrowthError> {
    if p_h_values.is_empty() || p_gravity_values.is_empty() {
        return Err(GrowthError::EmptySweep);
    }
    p_gravity_values
        .iter()
        .map(|&g| {
            p_h_values
                .iter()
                .map(|&h| {
                    let params = GrowthParams { p_helix_radius: h, p_gravity: g, ..*base };
                    grow_strand(root, dir0, &params)
                })
                .collect()
        })
        .collect()
}


#[cfg(test)]
mod reference;
