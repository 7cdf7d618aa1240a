//! Authored test and demo assets: an ellipsoidal head, painted regions, a
//! small captioned hairstyle database spanning the ten curl types, and
//! synthetic styles for benchmarking.
//!
//! Everything here is deterministic; the same call always produces the
//! same geometry.

use std::sync::OnceLock;

use glam::DVec3;
use rand::Rng;

use crate::growth::sample_root_with_rng;
use crate::model::{Hairstyle, HeadMesh, PaintSelection, Strand, StyleSource};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};

/// Semi-axes of the fixture head ellipsoid (x: ear to ear, y: up, z: face).
pub const HEAD_RADII: DVec3 = DVec3::new(7.5, 9.5, 8.5);
const SLICES: u32 = 40;
const STACKS: u32 = 28;
const PROXY_COUNT: usize = 40;
/// Clearance kept between authored hair and the head surface.
const HAIR_CLEARANCE: f64 = 0.4;

/// Closed UV-ellipsoid head, 2160 triangles, outward winding.
pub fn head_mesh() -> HeadMesh {
    static HEAD: OnceLock<HeadMesh> = OnceLock::new();
    HEAD.get_or_init(build_head).clone()
}

fn build_head() -> HeadMesh {
    let mut vertices = vec![DVec3::new(0.0, HEAD_RADII.y, 0.0)];
    for i in 1..STACKS {
        let theta = std::f64::consts::PI * i as f64 / STACKS as f64;
        for j in 0..SLICES {
            let phi = std::f64::consts::TAU * j as f64 / SLICES as f64;
            vertices.push(DVec3::new(
                HEAD_RADII.x * theta.sin() * phi.cos(),
                HEAD_RADII.y * theta.cos(),
                HEAD_RADII.z * theta.sin() * phi.sin(),
            ));
        }
    }
    let bottom = vertices.len() as u32;
    vertices.push(DVec3::new(0.0, -HEAD_RADII.y, 0.0));

    let ring = |i: u32, j: u32| 1 + (i - 1) * SLICES + (j % SLICES);
    let mut triangles = Vec::new();
    for j in 0..SLICES {
        triangles.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..STACKS - 1 {
        for j in 0..SLICES {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    for j in 0..SLICES {
        triangles.push([bottom, ring(STACKS - 1, j), ring(STACKS - 1, j + 1)]);
    }
    HeadMesh::new(vertices, triangles, PROXY_COUNT).expect("fixture head is well formed")
}

fn select(mesh: &HeadMesh, keep: impl Fn(DVec3) -> bool) -> PaintSelection {
    let ids = (0..mesh.triangles.len() as u32).filter(|&t| {
        let [a, b, c] = mesh.triangle(t);
        keep((a + b + c) / 3.0)
    });
    PaintSelection::new(mesh, ids, 20.0).expect("fixture selection is valid")
}

/// Top and back of the head, leaving the face and forehead bare.
pub fn scalp_selection(mesh: &HeadMesh) -> PaintSelection {
    select(mesh, |c| {
        let forehead = c.z > 3.0 && c.y < 6.5;
        let behind_ears = c.z < 1.0 && c.y > -2.0;
        (c.y > 1.5 || behind_ears) && !forehead
    })
}

pub fn beard_selection(mesh: &HeadMesh) -> PaintSelection {
    select(mesh, |c| c.z > 3.0 && c.y < -3.5 && c.y > -8.8)
}

pub fn mustache_selection(mesh: &HeadMesh) -> PaintSelection {
    select(mesh, |c| c.z > 6.0 && c.y < -2.0 && c.y > -3.8 && c.x.abs() < 3.0)
}

/// Radially pushes `p` out of the head ellipsoid inflated by `margin`.
pub fn push_outside_head(p: DVec3, margin: f64) -> DVec3 {
    let r = HEAD_RADII + DVec3::splat(margin);
    let f = (p / r).length_squared();
    if f < 1.0 && f > 0.0 {
        p / f.sqrt()
    } else {
        p
    }
}

/// Shape controls for one authored style.
#[derive(Debug, Clone, Copy)]
pub struct StyleRecipe {
    pub id: &'static str,
    pub caption: &'static str,
    pub strands: usize,
    pub vertices: usize,
    pub length: f64,
    /// Turning rate toward the floor, radians per cm.
    pub droop: f64,
    pub curl_radius: f64,
    /// Curl period along the strand, cm.
    pub curl_period: f64,
}

pub const FIXTURE_RECIPES: [StyleRecipe; 12] = [
    StyleRecipe {
        id: "short_bob",
        caption: "short bob with straight sleek hair and blunt ends at chin length, type 1 straight",
        strands: 1600, vertices: 16, length: 13.0, droop: 0.35, curl_radius: 0.0, curl_period: 1.0,
    },
    StyleRecipe {
        id: "pixie_cut",
        caption: "very short pixie cut with cropped straight hair close to the head, type 1",
        strands: 1400, vertices: 16, length: 5.0, droop: 0.5, curl_radius: 0.0, curl_period: 1.0,
    },
    StyleRecipe {
        id: "long_straight",
        caption: "long straight hair flowing down the back, sleek type 1 texture",
        strands: 1000, vertices: 24, length: 38.0, droop: 0.3, curl_radius: 0.0, curl_period: 1.0,
    },
    StyleRecipe {
        id: "medium_wavy",
        caption: "medium wavy hair falling to the shoulders with loose s-shaped waves, type 2a",
        strands: 1200, vertices: 20, length: 24.0, droop: 0.3, curl_radius: 0.6, curl_period: 8.0,
    },
    StyleRecipe {
        id: "tousled_lob",
        caption: "tousled lob with beach waves just above the shoulders, type 2b",
        strands: 1300, vertices: 20, length: 18.0, droop: 0.3, curl_radius: 0.8, curl_period: 6.0,
    },
    StyleRecipe {
        id: "thick_waves",
        caption: "thick defined waves with frizz at shoulder length, type 2c",
        strands: 1200, vertices: 20, length: 22.0, droop: 0.28, curl_radius: 1.0, curl_period: 5.0,
    },
    StyleRecipe {
        id: "loose_curls",
        caption: "short loose curls with big bouncy spirals, type 3a",
        strands: 1400, vertices: 16, length: 12.0, droop: 0.25, curl_radius: 1.2, curl_period: 4.0,
    },
    StyleRecipe {
        id: "long_curly",
        caption: "long curly hair with springy ringlets, type 3b",
        strands: 1000, vertices: 24, length: 34.0, droop: 0.25, curl_radius: 1.0, curl_period: 3.0,
    },
    StyleRecipe {
        id: "corkscrew",
        caption: "voluminous tight corkscrew ringlets past the chin, type 3c",
        strands: 1200, vertices: 20, length: 16.0, droop: 0.2, curl_radius: 0.8, curl_period: 2.4,
    },
    StyleRecipe {
        id: "afro",
        caption: "rounded afro with soft coily texture standing out from the head, type 4a",
        strands: 1600, vertices: 16, length: 8.0, droop: 0.03, curl_radius: 0.6, curl_period: 1.6,
    },
    StyleRecipe {
        id: "zigzag_coils",
        caption: "dense z-pattern coils with sharp angles, type 4b",
        strands: 1500, vertices: 16, length: 7.0, droop: 0.05, curl_radius: 0.5, curl_period: 1.3,
    },
    StyleRecipe {
        id: "tight_coils",
        caption: "tightly packed kinky coils shrunk close to the scalp, type 4c",
        strands: 1500, vertices: 16, length: 5.0, droop: 0.06, curl_radius: 0.4, curl_period: 1.0,
    },
];

/// The captioned fixture database, one style per recipe.
pub fn fixture_database() -> Vec<Hairstyle> {
    FIXTURE_RECIPES.iter().enumerate().map(|(k, r)| author_style(r, 1000 + k as u64)).collect()
}

pub fn fixture_style(id: &str) -> Option<Hairstyle> {
    FIXTURE_RECIPES
        .iter()
        .position(|r| r.id == id)
        .map(|k| author_style(&FIXTURE_RECIPES[k], 1000 + k as u64))
}

pub fn author_style(recipe: &StyleRecipe, seed: u64) -> Hairstyle {
    let head = head_mesh();
    let scalp = scalp_selection(&head);
    let strands = (0..recipe.strands)
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let root = sample_root_with_rng(&head, &scalp, 0.0, &mut rng).expect("scalp is non-empty");
            author_strand(root.root, root.dir0.normalize(), recipe, &mut rng)
        })
        .collect();
    Hairstyle {
        id: recipe.id.to_string(),
        strands,
        caption: recipe.caption.to_string(),
        source: StyleSource::Database,
    }
}

fn author_strand(root: DVec3, normal: DVec3, recipe: &StyleRecipe, rng: &mut SeededRng) -> Strand {
    const DENSE: usize = 160;
    let jitter = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let length = recipe.length * rng.random_range(0.9..1.1);
    let ds = length / DENSE as f64;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);

    let mut dir = (normal + 0.15 * jitter).normalize();
    let mut p = root;
    let mut path = Vec::with_capacity(DENSE + 1);
    path.push(p);
    for _ in 0..DENSE {
        dir = (dir + DVec3::NEG_Y * recipe.droop * ds).normalize();
        let next = push_outside_head(p + dir * ds, HAIR_CLEARANCE);
        dir = (next - p).try_normalize().unwrap_or(dir);
        p = next;
        path.push(p);
    }

    if recipe.curl_radius > 0.0 {
        let omega = std::f64::consts::TAU / recipe.curl_period;
        let base = path.clone();
        let mut s = 0.0;
        for k in 1..path.len() {
            s += ds;
            let t = (base[k] - base[k - 1]).normalize();
            let reference = if t.y.abs() < 0.9 { DVec3::Y } else { DVec3::X };
            let u = t.cross(reference).normalize();
            let w = t.cross(u);
            let ramp = (s / 2.0).min(1.0);
            let angle = omega * s + phase;
            path[k] = base[k] + recipe.curl_radius * ramp * (angle.cos() * u + angle.sin() * w);
        }
    }

    let mut vertices = resample(&path, recipe.vertices);
    for v in vertices.iter_mut().skip(1) {
        *v = push_outside_head(*v, HAIR_CLEARANCE);
    }
    Strand::new(vertices)
}

/// Uniform arc-length resampling to `n` vertices (n ≥ 2).
fn resample(path: &[DVec3], n: usize) -> Vec<DVec3> {
    let mut cumulative = Vec::with_capacity(path.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in path.windows(2) {
        total += w[0].distance(w[1]);
        cumulative.push(total);
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 2 < path.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let t = if span > 0.0 { ((target - cumulative[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        out.push(path[seg].lerp(path[seg + 1], t));
    }
    out[0] = path[0];
    out
}

/// Medium-length straight style with a chosen strand and vertex count,
/// used by the benchmark harness.
pub fn bench_hairstyle(strands: usize, vertices: usize, seed: u64) -> Hairstyle {
    let recipe = StyleRecipe {
        id: "bench",
        caption: "benchmark style",
        strands,
        vertices: vertices.max(2),
        length: 20.0,
        droop: 0.3,
        curl_radius: 0.3,
        curl_period: 6.0,
    };
    author_style(&recipe, seed)
}

/// Two-particle strand hanging straight down from `anchor`.
pub fn pendulum_style(anchor: DVec3, length: f64) -> Hairstyle {
    Hairstyle::new("pendulum", vec![Strand::new(vec![anchor, anchor - DVec3::Y * length])])
}

/// One strand hanging straight down, `vertices` particles, spacing `segment`.
pub fn hanging_strand(anchor: DVec3, vertices: usize, segment: f64) -> Hairstyle {
    let v = (0..vertices).map(|i| anchor - DVec3::Y * (segment * i as f64)).collect();
    Hairstyle::new("hanging", vec![Strand::new(v)])
}
