//! Strand dynamics: a mass-spring system per strand (edge, bend and torsion
//! springs plus two one-way shape springs), coupled through a background
//! grid for hair–hair friction and volume repulsion, with wind, gravity and
//! sphere-proxy head collisions.
//!
//! Each particle `i > 0` of a strand carries two augmented springs that pull
//! it toward `x_b + R (rest_i - rest_b)`, where `R` is the head rotation:
//! `aug_local` uses the parent particle as `b`, `aug_global` the root. They
//! act on `i` only, and are stiffer (by `biphasic_ratio`) when the spring is
//! longer than at rest.
//!
//! Springs never cross strands, so force accumulation runs strand-parallel
//! while summing every particle's forces in ascending spring order; the
//! result is bit-identical to a sequential pass.

mod collision;
mod config;
mod grid;
mod transform;
mod wind;

use std::ops::Range;
use std::sync::Arc;

use glam::{DMat3, DVec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use collision::ProxyLookup;
pub use config::{SimConfig, Stiffness};
pub use grid::{Grid, GridSample, Stencil};
pub use transform::RigidTransform;
pub use wind::WindField;

use crate::model::{bounds_of, validate_hairstyle, Hairstyle, HeadMesh, Strand, StyleSource};

/// Coordinates beyond this magnitude count as a numerical blow-up.
pub const BLOWUP_LIMIT: f64 = 1.0e6;

/// Padding around the rest pose and head that bounds the simulated domain.
pub const DOMAIN_PADDING: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid hairstyle: {0}")]
    InvalidHairstyle(String),
    #[error("numerical blow-up at t={time:.4}s (particle {particle}); state rolled back")]
    NumericalBlowup { time: f64, particle: usize },
    #[error("wind direction must be unit length")]
    NonUnitDirection,
    #[error("invalid wind: {0}")]
    InvalidWind(&'static str),
    #[error("transform is not rigid")]
    NonRigidTransform,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("step of {dt}s exceeds the configured substep")]
    StepTooLarge { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpringKind {
    Edge,
    Bend,
    Torsion,
    AugLocal,
    AugGlobal,
}

impl SpringKind {
    pub fn is_one_way(self) -> bool {
        matches!(self, SpringKind::AugLocal | SpringKind::AugGlobal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: DVec3,
    pub velocity: DVec3,
    /// Zero for pinned roots.
    pub inv_mass: f64,
    pub strand_id: u32,
    pub index_in_strand: u32,
    /// Rest position in the head frame.
    pub rest_position: DVec3,
    /// Grid density sampled at the rest pose; repulsion acts above it.
    pub rest_density: f64,
    /// Still connected to its root through consecutive particles.
    pub attached: bool,
}

impl Particle {
    pub fn is_pinned(&self) -> bool {
        self.inv_mass == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    pub kind: SpringKind,
    pub a: u32,
    /// For augmented springs, the anchor whose frame defines the target.
    pub b: u32,
    pub rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub one_way: bool,
}

impl Spring {
    fn new(kind: SpringKind, a: usize, b: usize, rest_length: f64, cfg: &SimConfig) -> Self {
        let damping = if kind.is_one_way() { cfg.aug_damping } else { cfg.spring_damping };
        Self {
            kind,
            a: a as u32,
            b: b as u32,
            rest_length,
            stiffness: cfg.stiffness.of(kind),
            damping,
            one_way: kind.is_one_way(),
        }
    }

    /// Force on endpoint `a`; the force on `b` is its negation for two-way
    /// springs and zero for one-way springs.
    #[inline]
    pub fn force_on_a(&self, pa: &Particle, pb: &Particle, rotation: &DMat3, biphasic_ratio: f64) -> DVec3 {
        if self.one_way {
            let offset = pa.position - pb.position;
            let target = *rotation * (pa.rest_position - pb.rest_position);
            let mut f = -self.stiffness * (offset - target) - self.damping * (pa.velocity - pb.velocity);
            // Stretch beyond the rest length is resisted ratio times harder. Only the
            // length excess is stiffened so the force stays continuous at the switch.
            let len = offset.length();
            if len > self.rest_length && len > 1e-12 {
                f -= (biphasic_ratio - 1.0) * self.stiffness * (len - self.rest_length) * (offset / len);
            }
            f
        } else {
            let d = pb.position - pa.position;
            let len = d.length();
            if len <= 1e-12 {
                return DVec3::ZERO;
            }
            let n = d / len;
            let rel = (pb.velocity - pa.velocity).dot(n);
            n * (self.stiffness * (len - self.rest_length) + self.damping * rel)
        }
    }
}

/// Contiguous particle and spring ranges of one strand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandSpan {
    pub strand_id: u32,
    pub particles: Range<usize>,
    pub springs: Range<usize>,
}

/// Spring pull applied to grabbed particles.
#[derive(Debug, Clone, PartialEq)]
pub struct GrabForce {
    pub indices: Vec<usize>,
    pub target: DVec3,
    pub stiffness: f64,
    pub max_force: f64,
}

impl GrabForce {
    #[inline]
    pub fn force(&self, position: DVec3) -> DVec3 {
        let f = self.stiffness * (self.target - position);
        let mag = f.length();
        if mag > self.max_force {
            f * (self.max_force / mag)
        } else {
            f
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    forces: Vec<DVec3>,
    positions: Vec<DVec3>,
    velocities: Vec<DVec3>,
    stencils: Vec<Stencil>,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub particles: Vec<Particle>,
    pub springs: Vec<Spring>,
    pub grid: Grid,
    pub time: f64,
    pub wind: WindField,
    pub head: Arc<HeadMesh>,
    pub head_transform: RigidTransform,
    pub(crate) spans: Vec<StrandSpan>,
    pub(crate) grab: Option<GrabForce>,
    pub(crate) next_strand_id: u32,
    /// Head-frame box outside which detached fragments are discarded.
    pub(crate) domain: (DVec3, DVec3),
    proxies: ProxyLookup,
    scratch: Scratch,
}

/// Builds the particle/spring system for a hairstyle in its rest pose.
pub fn build_sim(h: &Hairstyle, head: Arc<HeadMesh>, cfg: &SimConfig) -> Result<SimState, SimError> {
    cfg.validate()?;
    let violations = validate_hairstyle(h);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        return Err(SimError::InvalidHairstyle(text.join("; ")));
    }
    let mut state = empty_sim(head, cfg)?;
    state.particles.reserve(h.vertex_count());
    state.spans.reserve(h.strands.len());
    for s in &h.strands {
        state.push_strand(&s.vertices, cfg);
    }
    let all = 0..state.particles.len();
    state.assign_rest_density(all, cfg);
    state.refresh_domain();
    Ok(state)
}

/// A state with no strands; hair arrives later through `add_strands`.
pub fn empty_sim(head: Arc<HeadMesh>, cfg: &SimConfig) -> Result<SimState, SimError> {
    cfg.validate()?;
    let mut state = SimState {
        particles: Vec::new(),
        springs: Vec::new(),
        grid: Grid::default(),
        time: 0.0,
        wind: WindField::default(),
        proxies: ProxyLookup::new(&head.collision_proxies, cfg.collision_margin),
        head,
        head_transform: RigidTransform::IDENTITY,
        spans: Vec::new(),
        grab: None,
        next_strand_id: 0,
        domain: (DVec3::ZERO, DVec3::ZERO),
        scratch: Scratch::default(),
    };
    state.refresh_domain();
    Ok(state)
}

impl SimState {
    fn push_strand(&mut self, world: &[DVec3], cfg: &SimConfig) {
        let strand_id = self.next_strand_id;
        self.next_strand_id += 1;
        let p0 = self.particles.len();
        let s0 = self.springs.len();
        let n = world.len();
        for (i, &x) in world.iter().enumerate() {
            self.particles.push(Particle {
                position: x,
                velocity: DVec3::ZERO,
                inv_mass: if i == 0 { 0.0 } else { 1.0 / cfg.particle_mass },
                strand_id,
                index_in_strand: i as u32,
                rest_position: self.head_transform.apply_inverse(x),
                rest_density: 0.0,
                attached: true,
            });
        }
        let rest = |i: usize| self.particles[p0 + i].rest_position;
        let mut springs = Vec::with_capacity(5 * n);
        for (kind, gap) in [(SpringKind::Edge, 1), (SpringKind::Bend, 2), (SpringKind::Torsion, 3)] {
            for i in 0..n.saturating_sub(gap) {
                let len = rest(i).distance(rest(i + gap));
                springs.push(Spring::new(kind, p0 + i, p0 + i + gap, len, cfg));
            }
        }
        for i in 1..n {
            springs.push(Spring::new(SpringKind::AugLocal, p0 + i, p0 + i - 1, rest(i).distance(rest(i - 1)), cfg));
        }
        for i in 1..n {
            springs.push(Spring::new(SpringKind::AugGlobal, p0 + i, p0, rest(i).distance(rest(0)), cfg));
        }
        self.springs.extend(springs);
        self.spans.push(StrandSpan {
            strand_id,
            particles: p0..self.particles.len(),
            springs: s0..self.springs.len(),
        });
    }

    /// Appends strands given in world coordinates; their current shape
    /// becomes their rest shape.
    pub fn add_strands(&mut self, strands: &[Strand], cfg: &SimConfig) -> Result<Range<u32>, SimError> {
        cfg.validate()?;
        if let Some(bad) = strands.iter().position(|s| s.is_empty() || !s.vertices.iter().all(|v| v.is_finite())) {
            return Err(SimError::InvalidHairstyle(format!("strand {bad} is empty or not finite")));
        }
        let first_id = self.next_strand_id;
        let first_particle = self.particles.len();
        for s in strands {
            self.push_strand(&s.vertices, cfg);
        }
        let added = first_particle..self.particles.len();
        self.assign_rest_density(added, cfg);
        self.refresh_domain();
        Ok(first_id..self.next_strand_id)
    }

    fn refresh_domain(&mut self) {
        let rest = self.particles.iter().map(|p| p.rest_position);
        let head = self.head.vertices.iter().copied();
        let (lo, hi) = bounds_of(rest.chain(head)).unwrap_or((DVec3::ZERO, DVec3::ZERO));
        self.domain = (lo - DVec3::splat(DOMAIN_PADDING), hi + DVec3::splat(DOMAIN_PADDING));
    }

    /// Head-frame bounds of the simulated region.
    pub fn domain(&self) -> (DVec3, DVec3) {
        self.domain
    }

    fn assign_rest_density(&mut self, range: Range<usize>, cfg: &SimConfig) {
        self.rebuild_grid(cfg, |p| p.velocity);
        for i in range {
            let s = self.grid.stencil(self.particles[i].position);
            self.particles[i].rest_density = self.grid.sample(&s).density;
        }
    }

    /// Fits the grid to the current particles and scatters mass and momentum.
    fn rebuild_grid(&mut self, cfg: &SimConfig, velocity: impl Fn(&Particle) -> DVec3) {
        let Some((lo, hi)) = bounds_of(self.particles.iter().map(|p| p.position)) else {
            self.grid.fit(DVec3::ZERO, DVec3::ZERO, cfg.grid_cell);
            return;
        };
        self.grid.fit(lo, hi, cfg.grid_cell);
        for p in &self.particles {
            let s = self.grid.stencil(p.position);
            self.grid.scatter(&s, cfg.particle_mass, cfg.particle_mass * velocity(p));
        }
    }

    pub fn spans(&self) -> &[StrandSpan] {
        &self.spans
    }

    pub fn strand_count(&self) -> usize {
        self.spans.len()
    }

    pub fn grab(&self) -> Option<&GrabForce> {
        self.grab.as_ref()
    }

    pub fn set_wind(&mut self, wind: WindField) -> Result<(), SimError> {
        wind.validate()?;
        self.wind = wind;
        Ok(())
    }

    /// Moves the head; pinned roots follow immediately, everything else
    /// responds through the springs on later steps.
    pub fn set_head_transform(&mut self, transform: RigidTransform) -> Result<(), SimError> {
        let checked = RigidTransform::new(transform.rotation, transform.translation)?;
        self.head_transform = checked;
        for p in self.particles.iter_mut().filter(|p| p.is_pinned()) {
            p.position = checked.apply(p.rest_position);
        }
        Ok(())
    }

    /// Pushes new stiffness and damping values into existing springs.
    pub fn apply_config(&mut self, cfg: &SimConfig) -> Result<(), SimError> {
        cfg.validate()?;
        for s in &mut self.springs {
            s.stiffness = cfg.stiffness.of(s.kind);
            s.damping = if s.one_way { cfg.aug_damping } else { cfg.spring_damping };
        }
        let inv = 1.0 / cfg.particle_mass;
        for p in self.particles.iter_mut().filter(|p| !p.is_pinned()) {
            p.inv_mass = inv;
        }
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.particles
            .iter()
            .filter(|p| !p.is_pinned())
            .map(|p| 0.5 * p.velocity.length_squared() / p.inv_mass)
            .sum()
    }

    pub fn positions(&self) -> Vec<DVec3> {
        self.particles.iter().map(|p| p.position).collect()
    }

    /// Current geometry as a groomed hairstyle, one polyline per strand.
    pub fn to_hairstyle(&self, id: &str) -> Hairstyle {
        let strands = self
            .spans
            .iter()
            .map(|span| Strand::new(self.particles[span.particles.clone()].iter().map(|p| p.position).collect()))
            .collect();
        Hairstyle { id: id.to_string(), strands, caption: String::new(), source: StyleSource::Groomed }
    }

    /// Runs one display frame of `cfg.substeps` substeps.
    pub fn advance_frame(&mut self, cfg: &SimConfig) -> Result<(), SimError> {
        for _ in 0..cfg.substeps {
            self.step(cfg, cfg.dt)?;
        }
        Ok(())
    }

    /// One semi-implicit Euler substep. On blow-up the state is left exactly
    /// as it was before the call.
    pub fn step(&mut self, cfg: &SimConfig, dt: f64) -> Result<(), SimError> {
        cfg.validate()?;
        if !(dt > 0.0) || dt > cfg.dt * (1.0 + 1e-9) {
            return Err(SimError::StepTooLarge { dt });
        }
        if self.proxies.margin() != cfg.collision_margin {
            self.proxies = ProxyLookup::new(&self.head.collision_proxies, cfg.collision_margin);
        }
        let n = self.particles.len();
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.forces.clear();
        scratch.forces.resize(n, DVec3::ZERO);

        self.accumulate_spring_forces(&mut scratch.forces, cfg);
        self.integrate_velocities(&mut scratch, cfg, dt);
        if cfg.grid_blend > 0.0 || cfg.repulsion_gain > 0.0 {
            self.couple_through_grid(&mut scratch, cfg, dt);
        }
        self.integrate_positions(&mut scratch, cfg, dt);

        let bad = scratch
            .positions
            .par_iter()
            .zip(scratch.velocities.par_iter())
            .position_first(|(x, v)| !x.is_finite() || !v.is_finite() || x.abs().max_element() > BLOWUP_LIMIT);
        if let Some(particle) = bad {
            self.scratch = scratch;
            return Err(SimError::NumericalBlowup { time: self.time, particle });
        }
        for ((p, x), v) in self.particles.iter_mut().zip(&scratch.positions).zip(&scratch.velocities) {
            p.position = *x;
            p.velocity = *v;
        }
        self.time += dt;
        self.scratch = scratch;
        Ok(())
    }

    fn accumulate_spring_forces(&self, forces: &mut [DVec3], cfg: &SimConfig) {
        let rotation = self.head_transform.rotation;
        let ratio = cfg.biphasic_ratio;
        let particles = &self.particles;
        let springs = &self.springs;
        let mut chunks = Vec::with_capacity(self.spans.len());
        let mut rest: &mut [DVec3] = forces;
        let mut consumed = 0;
        for span in &self.spans {
            let skip = span.particles.start - consumed;
            let (_, tail) = std::mem::take(&mut rest).split_at_mut(skip);
            let (chunk, tail) = tail.split_at_mut(span.particles.len());
            rest = tail;
            consumed = span.particles.end;
            chunks.push((span, chunk));
        }
        chunks.into_par_iter().with_min_len(32).for_each(|(span, chunk)| {
            let base = span.particles.start;
            for s in &springs[span.springs.clone()] {
                let (a, b) = (s.a as usize, s.b as usize);
                let pa = &particles[a];
                let pb = &particles[b];
                if s.one_way && !pa.attached {
                    continue;
                }
                // A two-way spring whose strand interval lost a particle spans a cut and is inert.
                if !s.one_way && pa.index_in_strand.abs_diff(pb.index_in_strand) as usize != a.abs_diff(b) {
                    continue;
                }
                let f = s.force_on_a(pa, pb, &rotation, ratio);
                chunk[a - base] += f;
                if !s.one_way {
                    chunk[b - base] -= f;
                }
            }
        });
    }

    fn integrate_velocities(&self, scratch: &mut Scratch, cfg: &SimConfig, dt: f64) {
        let n = self.particles.len();
        scratch.velocities.resize(n, DVec3::ZERO);
        let damp = 1.0 / (1.0 + cfg.global_damping * dt);
        let wind = self.wind;
        let time = self.time;
        let drag = cfg.wind_drag;
        let gravity = cfg.gravity;
        let grab = self.grab.as_ref();
        let forces = &scratch.forces;
        // Per-strand wind phases, indexed by strand id.
        let phases: Vec<f64> = if wind.enabled {
            (0..self.next_strand_id).map(|s| wind.strand_phase(s)).collect()
        } else {
            Vec::new()
        };
        scratch
            .velocities
            .par_iter_mut()
            .zip(self.particles.par_iter())
            .zip(forces.par_iter())
            .with_min_len(512)
            .for_each(|((out, p), f)| {
                if p.is_pinned() {
                    *out = DVec3::ZERO;
                    return;
                }
                let mut f = *f + gravity / p.inv_mass;
                if wind.enabled {
                    f += drag * (wind.velocity(time, phases[p.strand_id as usize]) - p.velocity);
                }
                *out = (p.velocity + dt * p.inv_mass * f) * damp;
            });
        if let Some(g) = grab {
            for &i in &g.indices {
                let p = &self.particles[i];
                if !p.is_pinned() {
                    scratch.velocities[i] += dt * p.inv_mass * g.force(p.position) * damp;
                }
            }
        }
    }

    fn couple_through_grid(&mut self, scratch: &mut Scratch, cfg: &SimConfig, dt: f64) {
        let Some((lo, hi)) = bounds_of(self.particles.iter().map(|p| p.position)) else { return };
        self.grid.fit(lo, hi, cfg.grid_cell);
        scratch.stencils.clear();
        scratch.stencils.extend(self.particles.iter().map(|p| self.grid.stencil(p.position)));
        let m = cfg.particle_mass;
        for (s, v) in scratch.stencils.iter().zip(&scratch.velocities) {
            self.grid.scatter(s, m, m * *v);
        }
        let grid = &self.grid;
        let beta = cfg.grid_blend;
        let gain = cfg.repulsion_gain;
        let slack = cfg.repulsion_slack;
        scratch
            .velocities
            .par_iter_mut()
            .zip(self.particles.par_iter())
            .zip(scratch.stencils.par_iter())
            .with_min_len(512)
            .for_each(|((v, p), s)| {
                if p.is_pinned() {
                    return;
                }
                let sample = grid.sample(s);
                *v = (1.0 - beta) * *v + beta * sample.velocity;
                if gain > 0.0 && p.rest_density > 0.0 && sample.density > 0.0 {
                    let excess = sample.density / p.rest_density - 1.0 - slack;
                    if excess > 0.0 {
                        *v -= dt * gain * excess * sample.density_gradient / sample.density;
                    }
                }
            });
    }

    fn integrate_positions(&self, scratch: &mut Scratch, cfg: &SimConfig, dt: f64) {
        let n = self.particles.len();
        scratch.positions.resize(n, DVec3::ZERO);
        let transform = self.head_transform;
        let proxies = &self.proxies;
        let friction = cfg.collision_friction;
        scratch
            .positions
            .par_iter_mut()
            .zip(scratch.velocities.par_iter_mut())
            .zip(self.particles.par_iter())
            .with_min_len(512)
            .for_each(|((x, v), p)| {
                if p.is_pinned() {
                    *x = transform.apply(p.rest_position);
                    *v = DVec3::ZERO;
                    return;
                }
                let mut next = p.position + dt * *v;
                if !proxies.is_empty() {
                    let local = transform.apply_inverse(next);
                    if let Some((fixed, normal_local)) = proxies.resolve(local) {
                        next = transform.apply(fixed);
                        let normal = transform.rotation * normal_local;
                        let vn = v.dot(normal);
                        let normal_part = normal * vn.max(0.0);
                        let tangential = *v - normal * vn;
                        *v = normal_part + tangential * (1.0 - friction);
                    }
                }
                *x = next;
            });
    }

    /// Removes every particle whose flag in `keep` is false, drops springs
    /// touching them, compacts indices and refreshes strand bookkeeping.
    /// Returns the number of particles removed.
    pub(crate) fn retain_particles(&mut self, keep: &[bool]) -> usize {
        debug_assert_eq!(keep.len(), self.particles.len());
        let mut remap = vec![u32::MAX; self.particles.len()];
        let mut next = 0u32;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                remap[i] = next;
                next += 1;
            }
        }
        let removed = self.particles.len() - next as usize;
        if removed == 0 {
            return 0;
        }
        let mut i = 0;
        self.particles.retain(|_| {
            let k = keep[i];
            i += 1;
            k
        });
        self.springs.retain_mut(|s| {
            let (a, b) = (remap[s.a as usize], remap[s.b as usize]);
            if a == u32::MAX || b == u32::MAX {
                return false;
            }
            s.a = a;
            s.b = b;
            true
        });
        if let Some(g) = &mut self.grab {
            g.indices = g
                .indices
                .iter()
                .filter_map(|&i| (remap[i] != u32::MAX).then_some(remap[i] as usize))
                .collect();
            if g.indices.is_empty() {
                self.grab = None;
            }
        }
        self.rebuild_spans();
        removed
    }

    fn rebuild_spans(&mut self) {
        self.spans.clear();
        let mut spring_cursor = 0;
        let mut start = 0;
        while start < self.particles.len() {
            let id = self.particles[start].strand_id;
            let mut end = start + 1;
            while end < self.particles.len() && self.particles[end].strand_id == id {
                end += 1;
            }
            self.particles[start].attached = self.particles[start].index_in_strand == 0;
            for k in start + 1..end {
                let (prev_attached, prev_index) = (self.particles[k - 1].attached, self.particles[k - 1].index_in_strand);
                let p = &mut self.particles[k];
                p.attached = prev_attached && p.index_in_strand == prev_index + 1;
            }
            let s0 = spring_cursor;
            while spring_cursor < self.springs.len() && (self.springs[spring_cursor].a as usize) < end {
                spring_cursor += 1;
            }
            self.spans.push(StrandSpan { strand_id: id, particles: start..end, springs: s0..spring_cursor });
            start = end;
        }
    }

    /// Every structural invariant: spring endpoints in range and inside
    /// their strand, spans contiguous, roots pinned.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.particles.len();
        for (k, s) in self.springs.iter().enumerate() {
            if s.a as usize >= n || s.b as usize >= n {
                return Err(format!("spring {k} dangles"));
            }
            if s.a == s.b {
                return Err(format!("spring {k} is degenerate"));
            }
            if s.one_way != s.kind.is_one_way() {
                return Err(format!("spring {k} has the wrong direction flag"));
            }
            if self.particles[s.a as usize].strand_id != self.particles[s.b as usize].strand_id {
                return Err(format!("spring {k} crosses strands"));
            }
        }
        let mut expect_p = 0;
        let mut expect_s = 0;
        for span in &self.spans {
            if span.particles.start != expect_p || span.springs.start != expect_s {
                return Err(format!("span of strand {} is not contiguous", span.strand_id));
            }
            for s in &self.springs[span.springs.clone()] {
                if !span.particles.contains(&(s.a as usize)) {
                    return Err(format!("spring outside span of strand {}", span.strand_id));
                }
            }
            expect_p = span.particles.end;
            expect_s = span.springs.end;
        }
        if expect_p != n || expect_s != self.springs.len() {
            return Err("spans do not cover every particle and spring".into());
        }
        for p in &self.particles {
            if (p.index_in_strand == 0) != p.is_pinned() {
                return Err(format!("strand {} root pinning is inconsistent", p.strand_id));
            }
        }
        Ok(())
    }
}
