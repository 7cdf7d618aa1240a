//! Viewport capture to edge-conditioned render request: a strand
//! rasterizer, an integer Canny detector, PNG coding and prompt assembly.
//!
//! Canny runs entirely in integer arithmetic so any implementation that
//! follows the same steps agrees pixel for pixel:
//! 1. Gaussian weights for offsets `-r..=r`, `r = ceil(3σ)`, are scaled to
//!    sum to 2^16 and rounded; the center absorbs the rounding residue.
//! 2. Horizontal then vertical passes with edge-clamp padding accumulate
//!    exact integers; the result is rounded once, `(acc + 2^31) >> 32`.
//! 3. 3×3 Sobel on the blurred image, edge-clamped, y pointing down.
//! 4. Thresholds compare squared magnitudes: weak `m² > low²`, strong
//!    `m² > high²`.
//! 5. Directions quantize to 0°, 45°, 90° and 135° with exact integer
//!    tests against tan 22.5° and tan 67.5°.
//! 6. A pixel survives suppression when its magnitude is greater than the
//!    neighbor behind it and at least the neighbor ahead; neighbors outside
//!    the image count as zero.
//! 7. Hysteresis keeps weak pixels 8-connected to a strong one.

use std::io::Cursor;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Hairstyle, HeadMesh, RenderAttributes};

pub const DEFAULT_SIGMA: f64 = 1.4;
pub const DEFAULT_LOW: u8 = 100;
pub const DEFAULT_HIGH: u8 = 200;
pub const DEFAULT_SIZE: u32 = 512;
pub const MIN_SIZE: u32 = 64;

/// Gaussian weights sum to this.
const KERNEL_ONE: u32 = 1 << 16;
/// Gray level of the head silhouette under the strands.
pub const HEAD_FILL: u8 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("thresholds must satisfy low < high, got low={low} high={high}")]
    BadThresholds { low: u8, high: u8 },
    #[error("sigma must be positive and finite")]
    BadSigma,
    #[error("pixel buffer holds {got} bytes, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("camera eye and target coincide or the camera is malformed")]
    DegenerateCamera,
    #[error("every render attribute is empty")]
    AllEmpty,
    #[error("png: {0}")]
    Png(String),
    #[error("invalid generation request: {0}")]
    InvalidRequest(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(ImagingError::SizeMismatch { expected, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Binary edge image holding only 0 and 255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl EdgeMap {
    pub fn edge_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    #[inline]
    pub fn is_edge(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] != 0
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage { width: self.width, height: self.height, data: self.data.clone() }
    }
}

/// Integer Gaussian weights for offsets `-r..=r`, summing to 2^16.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<u32>, ImagingError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ImagingError::BadSigma);
    }
    let r = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut q: Vec<i64> = w.iter().map(|x| (x / total * KERNEL_ONE as f64).round() as i64).collect();
    let residue = KERNEL_ONE as i64 - q.iter().sum::<i64>();
    q[r as usize] += residue;
    Ok(q.into_iter().map(|x| x as u32).collect())
}

/// Separable integer blur with edge clamping.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage, ImagingError> {
    let k = gaussian_kernel(sigma)?;
    let r = (k.len() / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let mut horiz = vec![0u32; img.data.len()];
    for y in 0..h {
        let row = &img.data[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0u32;
            for (j, &kv) in k.iter().enumerate() {
                let sx = (x + j as i64 - r).clamp(0, w - 1);
                acc += kv * row[sx as usize] as u32;
            }
            horiz[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0u8; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0u64;
            for (j, &kv) in k.iter().enumerate() {
                let sy = (y + j as i64 - r).clamp(0, h - 1);
                acc += kv as u64 * horiz[(sy * w + x) as usize] as u64;
            }
            out[(y * w + x) as usize] = ((acc + (1u64 << 31)) >> 32) as u8;
        }
    }
    Ok(GrayImage { width: img.width, height: img.height, data: out })
}

/// Sobel gradients `(gx, gy)` with edge clamping, y down.
pub fn sobel(img: &GrayImage) -> (Vec<i32>, Vec<i32>) {
    let (w, h) = (img.width as i64, img.height as i64);
    let at = |x: i64, y: i64| img.data[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize] as i32;
    let mut gx = vec![0; img.data.len()];
    let mut gy = vec![0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            gx[i] = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Neighbor step `(dx, dy)` along the quantized gradient direction.
#[inline]
pub fn quantize_direction(gx: i32, gy: i32) -> (i64, i64) {
    let (ax, ay) = (gx.unsigned_abs() as i64, gy.unsigned_abs() as i64);
    // ay < (√2 − 1)·ax  ⟺  (ay + ax)² < 2·ax²
    if (ay + ax) * (ay + ax) < 2 * ax * ax {
        return (1, 0);
    }
    // ay > (√2 + 1)·ax  ⟺  ay > ax and (ay − ax)² > 2·ax²
    if ay > ax && (ay - ax) * (ay - ax) > 2 * ax * ax {
        return (0, 1);
    }
    if (gx > 0) == (gy > 0) {
        (1, 1)
    } else {
        (1, -1)
    }
}

pub fn canny(img: &GrayImage, sigma: f64, low: u8, high: u8) -> Result<EdgeMap, ImagingError> {
    if img.is_empty() || img.width == 0 || img.height == 0 {
        return Err(ImagingError::EmptyImage);
    }
    if low >= high {
        return Err(ImagingError::BadThresholds { low, high });
    }
    let blurred = gaussian_blur(img, sigma)?;
    let (gx, gy) = sobel(&blurred);
    let mag2: Vec<i64> = gx.iter().zip(&gy).map(|(&x, &y)| (x as i64) * (x as i64) + (y as i64) * (y as i64)).collect();
    let (w, h) = (img.width as i64, img.height as i64);
    let m = |x: i64, y: i64| -> i64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0
        } else {
            mag2[(y * w + x) as usize]
        }
    };
    let (low2, high2) = ((low as i64).pow(2), (high as i64).pow(2));
    // 0 = none, 1 = weak, 2 = strong.
    let mut class = vec![0u8; mag2.len()];
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let v = mag2[i];
            if v <= low2 {
                continue;
            }
            let (dx, dy) = quantize_direction(gx[i], gy[i]);
            if v > m(x - dx, y - dy) && v >= m(x + dx, y + dy) {
                class[i] = if v > high2 { 2 } else { 1 };
                if class[i] == 2 {
                    stack.push((x, y));
                }
            }
        }
    }
    let mut data = vec![0u8; mag2.len()];
    for &(x, y) in &stack {
        data[(y * w + x) as usize] = 255;
    }
    while let Some((x, y)) = stack.pop() {
        for ny in (y - 1).max(0)..=(y + 1).min(h - 1) {
            for nx in (x - 1).max(0)..=(x + 1).min(w - 1) {
                let j = (ny * w + nx) as usize;
                if class[j] != 0 && data[j] == 0 {
                    data[j] = 255;
                    stack.push((nx, ny));
                }
            }
        }
    }
    Ok(EdgeMap { width: img.width, height: img.height, data })
}

/// Pinhole camera looking from `eye` at `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub eye: DVec3,
    pub target: DVec3,
    pub up: DVec3,
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    /// Front view framing a head at the origin and hair down to the chest.
    pub fn frontal(width: u32, height: u32) -> Self {
        Self {
            eye: DVec3::new(0.0, -5.0, 80.0),
            target: DVec3::new(0.0, -5.0, 0.0),
            up: DVec3::Y,
            fov_y: 40.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), ImagingError> {
        let f = self.target - self.eye;
        let finite = self.eye.is_finite() && self.target.is_finite() && self.up.is_finite() && self.fov_y.is_finite();
        if !finite || f.length() < 1e-9 || f.cross(self.up).length() < 1e-9 || self.width == 0 || self.height == 0 {
            return Err(ImagingError::DegenerateCamera);
        }
        if !(self.fov_y > 0.0 && self.fov_y < 180.0) {
            return Err(ImagingError::DegenerateCamera);
        }
        Ok(())
    }

    fn basis(&self) -> Projector {
        let forward = (self.target - self.eye).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        let tan_half = (self.fov_y.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        Projector { eye: self.eye, forward, right, up, tan_half, aspect, width: self.width as f64, height: self.height as f64 }
    }

    /// Pixel coordinates (x right, y down, pixel centers at +0.5) and depth
    /// along the view axis; `None` behind the near plane.
    pub fn project(&self, p: DVec3) -> Option<(f64, f64, f64)> {
        self.validate().ok()?;
        self.basis().project(p)
    }
}

const NEAR: f64 = 1e-2;

struct Projector {
    eye: DVec3,
    forward: DVec3,
    right: DVec3,
    up: DVec3,
    tan_half: f64,
    aspect: f64,
    width: f64,
    height: f64,
}

impl Projector {
    fn depth(&self, p: DVec3) -> f64 {
        (p - self.eye).dot(self.forward)
    }

    fn project(&self, p: DVec3) -> Option<(f64, f64, f64)> {
        let d = p - self.eye;
        let z = d.dot(self.forward);
        if z < NEAR {
            return None;
        }
        let nx = d.dot(self.right) / (z * self.tan_half * self.aspect);
        let ny = d.dot(self.up) / (z * self.tan_half);
        Some(((nx + 1.0) * 0.5 * self.width, (1.0 - ny) * 0.5 * self.height, z))
    }
}

/// Draws the head silhouette (if given) in flat gray, then every strand as
/// a 1-px anti-aliased polyline whose brightness falls from 255 at the
/// nearest hair vertex to 128 at the farthest.
pub fn rasterize_strands(h: &Hairstyle, head: Option<&HeadMesh>, camera: &Camera) -> Result<GrayImage, ImagingError> {
    camera.validate()?;
    let proj = camera.basis();
    let mut img = GrayImage::filled(camera.width, camera.height, 0);
    if let Some(mesh) = head {
        for t in 0..mesh.triangles.len() as u32 {
            let tri = mesh.triangle(t);
            if let (Some(a), Some(b), Some(c)) = (proj.project(tri[0]), proj.project(tri[1]), proj.project(tri[2])) {
                fill_triangle(&mut img, [(a.0, a.1), (b.0, b.1), (c.0, c.1)], HEAD_FILL);
            }
        }
    }
    let depths = h.strands.iter().flat_map(|s| s.vertices.iter()).map(|&v| proj.depth(v)).filter(|&z| z >= NEAR);
    let (zmin, zmax) = depths.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
    if !zmin.is_finite() {
        return Ok(img);
    }
    let span = (zmax - zmin).max(1e-9);
    let shade = |z: f64| 255.0 - 127.0 * ((z - zmin) / span).clamp(0.0, 1.0);
    for s in &h.strands {
        for seg in s.vertices.windows(2) {
            let (mut a, mut b) = (seg[0], seg[1]);
            let (za, zb) = (proj.depth(a), proj.depth(b));
            if za < NEAR && zb < NEAR {
                continue;
            }
            if za < NEAR {
                a = a.lerp(b, (NEAR - za) / (zb - za));
            } else if zb < NEAR {
                b = b.lerp(a, (NEAR - zb) / (za - zb));
            }
            let (Some(pa), Some(pb)) = (proj.project(a), proj.project(b)) else { continue };
            draw_segment(&mut img, pa, pb, &shade);
        }
        if s.vertices.len() == 1 {
            if let Some(p) = proj.project(s.vertices[0]) {
                draw_segment(&mut img, p, p, &shade);
            }
        }
    }
    Ok(img)
}

fn draw_segment(img: &mut GrayImage, a: (f64, f64, f64), b: (f64, f64, f64), shade: &impl Fn(f64) -> f64) {
    let (w, h) = (img.width as i64, img.height as i64);
    let x0 = (a.0.min(b.0) - 1.0).floor().max(0.0);
    let x1 = (a.0.max(b.0) + 1.0).ceil().min(w as f64 - 1.0);
    let y0 = (a.1.min(b.1) - 1.0).floor().max(0.0);
    let y1 = (a.1.max(b.1) + 1.0).ceil().min(h as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    for py in y0 as i64..=y1 as i64 {
        for px in x0 as i64..=x1 as i64 {
            let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
            let t = if len2 > 0.0 { (((cx - a.0) * dx + (cy - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
            let dist = ((cx - qx).powi(2) + (cy - qy).powi(2)).sqrt();
            let coverage = 1.0 - dist;
            if coverage <= 0.0 {
                continue;
            }
            let v = (coverage * shade(a.2 + t * (b.2 - a.2))).round().clamp(0.0, 255.0) as u8;
            let i = (py * w + px) as usize;
            img.data[i] = img.data[i].max(v);
        }
    }
}

fn fill_triangle(img: &mut GrayImage, p: [(f64, f64); 3], value: u8) {
    let (w, h) = (img.width as f64, img.height as f64);
    let x0 = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor().max(0.0);
    let x1 = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(w - 1.0);
    let y0 = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor().max(0.0);
    let y1 = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let edge = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let area = edge(p[0], p[1], p[2]);
    if area == 0.0 {
        return;
    }
    for py in y0 as i64..=y1 as i64 {
        for px in x0 as i64..=x1 as i64 {
            let c = (px as f64 + 0.5, py as f64 + 0.5);
            let w0 = edge(p[1], p[2], c) * area.signum();
            let w1 = edge(p[2], p[0], c) * area.signum();
            let w2 = edge(p[0], p[1], c) * area.signum();
            if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                let i = py as usize * img.width as usize + px as usize;
                img.data[i] = img.data[i].max(value);
            }
        }
    }
}

/// Comma-joins the non-empty attributes in the order gender, hair color,
/// head pose, misc.
pub fn compose_prompt(attrs: &RenderAttributes) -> Result<String, ImagingError> {
    let parts: Vec<&str> = [&attrs.gender, &attrs.hair_color, &attrs.head_pose, &attrs.misc]
        .into_iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if parts.is_empty() {
        return Err(ImagingError::AllEmpty);
    }
    Ok(parts.join(", "))
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>, ImagingError> {
    if img.width == 0 || img.height == 0 {
        return Err(ImagingError::EmptyImage);
    }
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, img.width, img.height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| ImagingError::Png(e.to_string()))?;
    writer.write_image_data(&img.data).map_err(|e| ImagingError::Png(e.to_string()))?;
    writer.finish().map_err(|e| ImagingError::Png(e.to_string()))?;
    Ok(out)
}

/// Decodes any PNG to 8-bit gray; color is reduced with Rec. 601 luma.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage, ImagingError> {
    let err = |e: png::DecodingError| ImagingError::Png(e.to_string());
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(err)?;
    let size = reader.output_buffer_size().ok_or_else(|| ImagingError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    let luma = |r: u8, g: u8, b: u8| ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8;
    let data: Vec<u8> = match info.color_type {
        png::ColorType::Grayscale => buf,
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|c| c[0]).collect(),
        png::ColorType::Rgb => buf.chunks_exact(3).map(|c| luma(c[0], c[1], c[2])).collect(),
        png::ColorType::Rgba => buf.chunks_exact(4).map(|c| luma(c[0], c[1], c[2])).collect(),
        png::ColorType::Indexed => return Err(ImagingError::Png("unexpanded palette".into())),
    };
    GrayImage::new(info.width, info.height, data)
}

/// Everything the external generator needs for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub edge_map: EdgeMap,
    pub prompt: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.prompt.trim().is_empty() {
            return Err(ImagingError::InvalidRequest("prompt is empty"));
        }
        if self.width < MIN_SIZE || self.height < MIN_SIZE {
            return Err(ImagingError::InvalidRequest("size is below 64 pixels"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageResult {
    pub png: Vec<u8>,
    pub latency_ms: u64,
}

/// Rasterize, detect edges and build the request in one call.
pub fn prepare_generation(
    h: &Hairstyle,
    head: Option<&HeadMesh>,
    camera: &Camera,
    attrs: &RenderAttributes,
    seed: u64,
) -> Result<GenerationRequest, ImagingError> {
    let prompt = compose_prompt(attrs)?;
    let img = rasterize_strands(h, head, camera)?;
    let edge_map = canny(&img, DEFAULT_SIGMA, DEFAULT_LOW, DEFAULT_HIGH)?;
    let req = GenerationRequest { edge_map, prompt, seed, width: camera.width, height: camera.height };
    req.validate()?;
    Ok(req)
}
