//! Domain types shared by every other module.

use std::collections::BTreeSet;
use std::fmt;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Captions longer than this are accepted but logged.
pub const CAPTION_WORD_LIMIT: usize = 60;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("triangle {triangle} references vertex {index} but mesh has {count} vertices")]
    TriangleIndex { triangle: usize, index: u32, count: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("triangle id {0} is not part of the head mesh")]
    UnknownTriangle(u32),
    #[error("paint density must be positive, got {0}")]
    BadDensity(f64),
}

/// One hair fiber as a polyline, root first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Strand {
    pub vertices: Vec<DVec3>,
}

impl Strand {
    pub fn new(vertices: Vec<DVec3>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn root(&self) -> Option<DVec3> {
        self.vertices.first().copied()
    }

    pub fn is_simulatable(&self) -> bool {
        self.vertices.len() >= 2
    }

    pub fn arc_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StyleSource {
    #[default]
    Database,
    Groomed,
    Procedural,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Hairstyle {
    pub id: String,
    pub strands: Vec<Strand>,
    pub caption: String,
    pub source: StyleSource,
}

impl Hairstyle {
    pub fn new(id: impl Into<String>, strands: Vec<Strand>) -> Self {
        Self { id: id.into(), strands, caption: String::new(), source: StyleSource::Database }
    }

    pub fn vertex_count(&self) -> usize {
        self.strands.iter().map(Strand::len).sum()
    }

    /// Warning text when the caption is over the conventional word limit.
    pub fn caption_warning(&self) -> Option<String> {
        let words = self.caption.split_whitespace().count();
        (words > CAPTION_WORD_LIMIT).then(|| {
            format!("caption of '{}' has {words} words (convention is {CAPTION_WORD_LIMIT})", self.id)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Finite,
    MinVertices,
    Nonempty,
    EmptyId,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Finite => "finite",
            Rule::MinVertices => "min_vertices",
            Rule::Nonempty => "nonempty",
            Rule::EmptyId => "empty_id",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub strand: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.strand {
            Some(s) => write!(f, "strand {s}: {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

/// Checks every hairstyle invariant and reports each broken one.
///
/// Single-vertex strands are tolerated for procedural and groomed styles
/// (zero-step growth, fully trimmed stubs) but not for database entries.
pub fn validate_hairstyle(h: &Hairstyle) -> Vec<Violation> {
    let mut out = Vec::new();
    if h.id.trim().is_empty() {
        out.push(Violation { strand: None, rule: Rule::EmptyId });
    }
    if h.strands.is_empty() {
        out.push(Violation { strand: None, rule: Rule::Nonempty });
    }
    let min_vertices = match h.source {
        StyleSource::Database => 2,
        StyleSource::Groomed | StyleSource::Procedural => 1,
    };
    for (i, s) in h.strands.iter().enumerate() {
        if s.len() < min_vertices {
            out.push(Violation { strand: Some(i), rule: Rule::MinVertices });
        }
        if !s.vertices.iter().all(|v| v.is_finite()) {
            out.push(Violation { strand: Some(i), rule: Rule::Finite });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: DVec3,
    pub radius: f64,
}

/// Triangle mesh of the head with per-vertex normals and a sphere-proxy
/// approximation used for collisions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeadMesh {
    pub vertices: Vec<DVec3>,
    pub triangles: Vec<[u32; 3]>,
    pub vertex_normals: Vec<DVec3>,
    pub collision_proxies: Vec<Sphere>,
}

impl HeadMesh {
    /// Builds a mesh, deriving area-weighted vertex normals and fitting
    /// `proxy_count` collision spheres inside it.
    pub fn new(
        vertices: Vec<DVec3>,
        triangles: Vec<[u32; 3]>,
        proxy_count: usize,
    ) -> Result<Self, ModelError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteVertex(i));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= vertices.len() {
                    return Err(ModelError::TriangleIndex { triangle: t, index, count: vertices.len() });
                }
            }
        }
        let vertex_normals = area_weighted_normals(&vertices, &triangles);
        let mut mesh = Self { vertices, triangles, vertex_normals, collision_proxies: Vec::new() };
        mesh.collision_proxies = fit_collision_proxies(&mesh, proxy_count);
        Ok(mesh)
    }

    /// A mesh with no geometry and no collision proxies.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn triangle(&self, id: u32) -> [DVec3; 3] {
        let [a, b, c] = self.triangles[id as usize];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, id: u32) -> f64 {
        let [a, b, c] = self.triangle(id);
        0.5 * (b - a).cross(c - a).length()
    }

    pub fn bounds(&self) -> Option<(DVec3, DVec3)> {
        bounds_of(self.vertices.iter().copied())
    }

    /// Human-readable list of broken mesh invariants.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                out.push(format!("triangle {t} index out of range"));
            }
        }
        if self.vertex_normals.len() != n {
            out.push("normal count differs from vertex count".to_string());
        }
        for (i, nrm) in self.vertex_normals.iter().enumerate() {
            if (nrm.length() - 1.0).abs() > 1e-5 {
                out.push(format!("normal {i} is not unit length"));
            }
        }
        if let Some((lo, hi)) = self.bounds() {
            let pad = (hi - lo) * 0.1;
            let (lo, hi) = (lo - pad, hi + pad);
            for (i, s) in self.collision_proxies.iter().enumerate() {
                let r = DVec3::splat(s.radius);
                if (s.center - r).cmplt(lo).any() || (s.center + r).cmpgt(hi).any() {
                    out.push(format!("proxy {i} leaves the inflated bounding box"));
                }
            }
        } else if !self.collision_proxies.is_empty() {
            out.push("proxies on an empty mesh".to_string());
        }
        out
    }

    /// True when `p` is inside the closed surface (ray parity along +x).
    pub fn contains(&self, p: DVec3) -> bool {
        // Slightly skewed direction keeps the ray off shared edges.
        let dir = DVec3::new(1.0, 1.234_567e-3, 2.345_678e-3).normalize();
        let hits = (0..self.triangles.len() as u32)
            .filter(|&t| {
                let [a, b, c] = self.triangle(t);
                ray_triangle(p, dir, a, b, c).is_some()
            })
            .count();
        hits % 2 == 1
    }

    /// Distance from `p` to the nearest triangle.
    pub fn surface_distance(&self, p: DVec3) -> f64 {
        (0..self.triangles.len() as u32)
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                p.distance(closest_point_on_triangle(p, a, b, c))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn bounds_of(points: impl Iterator<Item = DVec3>) -> Option<(DVec3, DVec3)> {
    points.fold(None, |acc, p| match acc {
        None => Some((p, p)),
        Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
    })
}

fn area_weighted_normals(vertices: &[DVec3], triangles: &[[u32; 3]]) -> Vec<DVec3> {
    let mut acc = vec![DVec3::ZERO; vertices.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| vertices[i as usize]);
        // Cross product length is twice the area, so this is area weighted.
        let n = (b - a).cross(c - a);
        for &i in tri {
            acc[i as usize] += n;
        }
    }
    acc.into_iter().map(|n| n.try_normalize().unwrap_or(DVec3::Y)).collect()
}

/// Greedy inscribed-sphere fit: candidate centers on a lattice inside the
/// mesh, radius equal to the distance to the surface, largest first, with
/// candidates already deep inside a chosen sphere skipped.
pub fn fit_collision_proxies(mesh: &HeadMesh, count: usize) -> Vec<Sphere> {
    let Some((lo, hi)) = mesh.bounds() else { return Vec::new() };
    if count == 0 || mesh.triangles.is_empty() {
        return Vec::new();
    }
    const RES: usize = 9;
    let step = (hi - lo) / RES as f64;
    let mut candidates = Vec::new();
    for i in 0..RES {
        for j in 0..RES {
            for k in 0..RES {
                let p = lo + step * DVec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
                if mesh.contains(p) {
                    let r = mesh.surface_distance(p);
                    if r > 1e-6 {
                        candidates.push(Sphere { center: p, radius: r });
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| b.radius.total_cmp(&a.radius));
    let mut chosen: Vec<Sphere> = Vec::new();
    for c in candidates {
        if chosen.len() >= count {
            break;
        }
        let redundant = chosen
            .iter()
            .any(|s| s.center.distance(c.center) + c.radius * 0.35 < s.radius);
        if !redundant {
            chosen.push(c);
        }
    }
    chosen
}

/// Möller–Trumbore; returns the ray parameter of a forward hit.
pub(crate) fn ray_triangle(origin: DVec3, dir: DVec3, a: DVec3, b: DVec3, c: DVec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 1e-12).then_some(t)
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub(crate) fn closest_point_on_triangle(p: DVec3, a: DVec3, b: DVec3, c: DVec3) -> DVec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Triangles painted on a head mesh as a growth region.
#[derive(Debug, Clone, PartialEq)]
pub struct PaintSelection {
    pub triangle_ids: BTreeSet<u32>,
    /// Strands per square centimeter.
    pub density: f64,
}

impl PaintSelection {
    pub fn new(
        mesh: &HeadMesh,
        triangle_ids: impl IntoIterator<Item = u32>,
        density: f64,
    ) -> Result<Self, ModelError> {
        if !(density > 0.0 && density.is_finite()) {
            return Err(ModelError::BadDensity(density));
        }
        let triangle_ids: BTreeSet<u32> = triangle_ids.into_iter().collect();
        if let Some(&bad) = triangle_ids.iter().find(|&&t| t as usize >= mesh.triangles.len()) {
            return Err(ModelError::UnknownTriangle(bad));
        }
        Ok(Self { triangle_ids, density })
    }

    pub fn area(&self, mesh: &HeadMesh) -> f64 {
        self.triangle_ids.iter().map(|&t| mesh.triangle_area(t)).sum()
    }

    /// Number of strands implied by density times painted area.
    pub fn strand_budget(&self, mesh: &HeadMesh) -> usize {
        (self.area(mesh) * self.density).round() as usize
    }
}

/// Free-text attributes of a render request.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderAttributes {
    pub gender: String,
    pub hair_color: String,
    pub head_pose: String,
    pub misc: String,
}
