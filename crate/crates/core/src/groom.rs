//! Grooming on a live simulation: grabbing through clamped one-way springs
//! and trimming by particle removal.

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{GrabForce, SimState};

/// Per particle, g/s². Must dominate the stretched local augmented springs or grabs stall short of the cursor.
pub const DEFAULT_GRAB_STIFFNESS: f64 = 5.0e4;
pub const DEFAULT_GRAB_MAX_FORCE: f64 = 2.5e5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroomError {
    #[error("grab ray selects no particles")]
    EmptyGrab,
    #[error("every grabbed particle has been trimmed")]
    StaleHandle,
    #[error("grab handle is not active")]
    InactiveHandle,
    #[error("ray direction must be finite and unit length")]
    InvalidRay,
    #[error("invalid grab parameters: {0}")]
    InvalidGrab(&'static str),
    #[error("invalid trim region: {0}")]
    InvalidRegion(&'static str),
}

/// Stable particle identity across index compaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticleKey {
    pub strand_id: u32,
    pub index_in_strand: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrabHandle {
    /// Sorted and unique.
    pub particle_ids: Vec<ParticleKey>,
    pub target: DVec3,
    pub stiffness: f64,
    pub max_force: f64,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrimRegion {
    /// Removes particles strictly closer than `radius` to `center`.
    Sphere { center: DVec3, radius: f64 },
    /// Removes particles strictly on the negative side of the plane.
    BelowPlane { point: DVec3, normal: DVec3 },
    /// Removes `first_removed_index..` of one strand.
    Tail { strand_id: u32, first_removed_index: u32 },
}

impl TrimRegion {
    pub fn validate(&self) -> Result<(), GroomError> {
        match *self {
            TrimRegion::Sphere { center, radius } => {
                if !center.is_finite() || !radius.is_finite() || radius < 0.0 {
                    return Err(GroomError::InvalidRegion("sphere needs a finite center and radius >= 0"));
                }
            }
            TrimRegion::BelowPlane { point, normal } => {
                if !point.is_finite() || !normal.is_finite() || (normal.length() - 1.0).abs() > 1e-6 {
                    return Err(GroomError::InvalidRegion("plane needs a finite point and unit normal"));
                }
            }
            TrimRegion::Tail { .. } => {}
        }
        Ok(())
    }

    fn selects(&self, strand_id: u32, index_in_strand: u32, x: DVec3) -> bool {
        match *self {
            TrimRegion::Sphere { center, radius } => x.distance_squared(center) < radius * radius,
            TrimRegion::BelowPlane { point, normal } => (x - point).dot(normal) < 0.0,
            TrimRegion::Tail { strand_id: s, first_removed_index } => {
                strand_id == s && index_in_strand >= first_removed_index
            }
        }
    }
}

/// Distance from `p` to the ray `origin + t·dir`, `t >= 0`.
pub fn distance_to_ray(p: DVec3, origin: DVec3, dir: DVec3) -> f64 {
    let t = (p - origin).dot(dir).max(0.0);
    p.distance(origin + t * dir)
}

/// Selects every free particle within `radius` of the ray and attaches a
/// clamped spring pulling them toward their centroid.
pub fn begin_grab(state: &mut SimState, origin: DVec3, dir: DVec3, radius: f64) -> Result<GrabHandle, GroomError> {
    begin_grab_with(state, origin, dir, radius, DEFAULT_GRAB_STIFFNESS, DEFAULT_GRAB_MAX_FORCE)
}

pub fn begin_grab_with(
    state: &mut SimState,
    origin: DVec3,
    dir: DVec3,
    radius: f64,
    stiffness: f64,
    max_force: f64,
) -> Result<GrabHandle, GroomError> {
    if !origin.is_finite() || !dir.is_finite() || (dir.length() - 1.0).abs() > 1e-6 {
        return Err(GroomError::InvalidRay);
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GroomError::InvalidGrab("radius must be positive"));
    }
    if !(stiffness > 0.0) || !stiffness.is_finite() || !(max_force > 0.0) {
        return Err(GroomError::InvalidGrab("stiffness and max_force must be positive"));
    }
    let indices: Vec<usize> = state
        .particles
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_pinned() && distance_to_ray(p.position, origin, dir) <= radius)
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(GroomError::EmptyGrab);
    }
    let target = indices.iter().map(|&i| state.particles[i].position).sum::<DVec3>() / indices.len() as f64;
    let particle_ids = indices
        .iter()
        .map(|&i| {
            let p = &state.particles[i];
            ParticleKey { strand_id: p.strand_id, index_in_strand: p.index_in_strand }
        })
        .collect();
    state.grab = Some(GrabForce { indices, target, stiffness, max_force });
    Ok(GrabHandle { particle_ids, target, stiffness, max_force, active: true })
}

/// Moves the grab target. Trimmed particles are pruned from the handle;
/// the call fails only when none are left.
pub fn update_grab(state: &mut SimState, handle: &mut GrabHandle, target: DVec3) -> Result<(), GroomError> {
    if !handle.active {
        return Err(GroomError::InactiveHandle);
    }
    if !target.is_finite() {
        return Err(GroomError::InvalidGrab("target must be finite"));
    }
    let mut indices = Vec::with_capacity(handle.particle_ids.len());
    handle.particle_ids.retain(|key| match find_particle(state, *key) {
        Some(i) => {
            indices.push(i);
            true
        }
        None => false,
    });
    if indices.is_empty() {
        handle.active = false;
        state.grab = None;
        return Err(GroomError::StaleHandle);
    }
    handle.target = target;
    state.grab = Some(GrabForce { indices, target, stiffness: handle.stiffness, max_force: handle.max_force });
    Ok(())
}

/// Releases the grab; positions and velocities are left untouched.
pub fn end_grab(state: &mut SimState, handle: &mut GrabHandle) {
    handle.active = false;
    state.grab = None;
}

/// Current index of a particle, if it is still live.
pub fn find_particle(state: &SimState, key: ParticleKey) -> Option<usize> {
    let spans = state.spans();
    let s = spans.binary_search_by_key(&key.strand_id, |span| span.strand_id).ok()?;
    let range = spans[s].particles.clone();
    let local = state.particles[range.clone()]
        .binary_search_by_key(&key.index_in_strand, |p| p.index_in_strand)
        .ok()?;
    Some(range.start + local)
}

/// Removes every non-root particle the region selects along with every
/// spring touching one. Returns the number of particles removed.
pub fn trim(state: &mut SimState, region: &TrimRegion) -> Result<usize, GroomError> {
    region.validate()?;
    let keep: Vec<bool> = state
        .particles
        .iter()
        .map(|p| p.index_in_strand == 0 || !region.selects(p.strand_id, p.index_in_strand, p.position))
        .collect();
    Ok(state.retain_particles(&keep))
}

/// Discards detached fragments that have left the simulated domain.
/// Returns the number of particles removed.
pub fn collect_fragments(state: &mut SimState) -> usize {
    let (lo, hi) = state.domain();
    let transform = state.head_transform;
    let keep: Vec<bool> = state
        .particles
        .iter()
        .map(|p| {
            if p.attached {
                return true;
            }
            let local = transform.apply_inverse(p.position);
            local.cmpge(lo).all() && local.cmple(hi).all()
        })
        .collect();
    state.retain_particles(&keep)
}
