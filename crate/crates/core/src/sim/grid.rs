//! Uniform background grid for the particle/grid coupling.

use glam::DVec3;

/// Cells per axis never exceed this; the cell size grows instead.
const MAX_DIM: usize = 160;
/// Cells of padding around the particle bounds.
const PAD: f64 = 2.0;

#[derive(Debug, Clone, Default)]
pub struct Grid {
    pub origin: DVec3,
    pub cell: f64,
    pub dims: [usize; 3],
    pub mass: Vec<f64>,
    pub momentum: Vec<DVec3>,
}

/// Trilinear stencil of one point: index of the lower corner and the
/// fractional offset inside the cell.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil {
    base: usize,
    frac: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    /// Mass-weighted velocity; zero where the grid is empty.
    pub velocity: DVec3,
    /// Mass per cm³.
    pub density: f64,
    pub density_gradient: DVec3,
}

impl Grid {
    /// Resizes the grid to cover `lo..=hi` with `PAD` cells of margin and clears it.
    pub fn fit(&mut self, lo: DVec3, hi: DVec3, cell: f64) {
        let mut cell = cell;
        let extent = (hi - lo).max(DVec3::ZERO);
        let needed = extent.max_element() / cell + 2.0 * PAD + 2.0;
        if needed > MAX_DIM as f64 {
            cell = extent.max_element() / (MAX_DIM as f64 - 2.0 * PAD - 2.0);
        }
        self.cell = cell;
        self.origin = lo - DVec3::splat(PAD * cell);
        let span = extent / cell + DVec3::splat(2.0 * PAD + 2.0);
        self.dims = [span.x as usize, span.y as usize, span.z as usize].map(|d| d.clamp(2, MAX_DIM));
        let n = self.dims.iter().product();
        self.mass.clear();
        self.mass.resize(n, 0.0);
        self.momentum.clear();
        self.momentum.resize(n, DVec3::ZERO);
    }

    pub fn cell_count(&self) -> usize {
        self.mass.len()
    }

    #[inline]
    pub fn stencil(&self, x: DVec3) -> Stencil {
        let g = (x - self.origin) / self.cell;
        let max = DVec3::new(
            (self.dims[0] - 2) as f64,
            (self.dims[1] - 2) as f64,
            (self.dims[2] - 2) as f64,
        );
        // Truncation equals floor once clamped to be non-negative.
        let c = g.clamp(DVec3::ZERO, max);
        let (i, j, k) = (c.x as usize, c.y as usize, c.z as usize);
        let base = DVec3::new(i as f64, j as f64, k as f64);
        let frac = (g - base).clamp(DVec3::ZERO, DVec3::ONE);
        Stencil { base: i + self.dims[0] * (j + self.dims[1] * k), frac }
    }

    #[inline]
    fn offsets(&self) -> [usize; 8] {
        let (sy, sz) = (self.dims[0], self.dims[0] * self.dims[1]);
        [0, 1, sy, sy + 1, sz, sz + 1, sz + sy, sz + sy + 1]
    }

    /// Trilinear weights in the same corner order as `offsets`.
    #[inline]
    fn weights(s: &Stencil) -> [f64; 8] {
        let f = s.frac;
        let g = DVec3::ONE - f;
        let (yz00, yz10, yz01, yz11) = (g.y * g.z, f.y * g.z, g.y * f.z, f.y * f.z);
        [g.x * yz00, f.x * yz00, g.x * yz10, f.x * yz10, g.x * yz01, f.x * yz01, g.x * yz11, f.x * yz11]
    }

    #[inline]
    pub fn scatter(&mut self, s: &Stencil, mass: f64, momentum: DVec3) {
        let w = Self::weights(s);
        for (o, w) in self.offsets().into_iter().zip(w) {
            let idx = s.base + o;
            self.mass[idx] += w * mass;
            self.momentum[idx] += w * momentum;
        }
    }

    #[inline]
    pub fn sample(&self, s: &Stencil) -> GridSample {
        let w = Self::weights(s);
        let mut cm = [0.0; 8];
        let mut p = DVec3::ZERO;
        for (n, o) in self.offsets().into_iter().enumerate() {
            let idx = s.base + o;
            cm[n] = self.mass[idx];
            p += w[n] * self.momentum[idx];
        }
        let m: f64 = w.iter().zip(&cm).map(|(w, c)| w * c).sum();
        // Derivatives of the trilinear weights, in cell units.
        let f = s.frac;
        let g = DVec3::ONE - f;
        let lerp = |a: f64, b: f64, t: f64, u: f64| a * u + b * t;
        let x00 = cm[1] - cm[0];
        let x10 = cm[3] - cm[2];
        let x01 = cm[5] - cm[4];
        let x11 = cm[7] - cm[6];
        let dx = lerp(lerp(x00, x10, f.y, g.y), lerp(x01, x11, f.y, g.y), f.z, g.z);
        let c00 = lerp(cm[0], cm[1], f.x, g.x);
        let c10 = lerp(cm[2], cm[3], f.x, g.x);
        let c01 = lerp(cm[4], cm[5], f.x, g.x);
        let c11 = lerp(cm[6], cm[7], f.x, g.x);
        let dy = lerp(c10 - c00, c11 - c01, f.z, g.z);
        let dz = lerp(c00, c10, f.y, g.y);
        let dz = lerp(c01, c11, f.y, g.y) - dz;
        let inv = 1.0 / self.cell;
        let vol = self.cell * self.cell * self.cell;
        GridSample {
            velocity: if m > 0.0 { p / m } else { DVec3::ZERO },
            density: m / vol,
            density_gradient: DVec3::new(dx, dy, dz) * (inv / vol),
        }
    }

    pub fn covers(&self, x: DVec3) -> bool {
        let hi = self.origin
            + self.cell * DVec3::new(self.dims[0] as f64 - 1.0, self.dims[1] as f64 - 1.0, self.dims[2] as f64 - 1.0);
        x.cmpge(self.origin).all() && x.cmple(hi).all()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn total_momentum(&self) -> DVec3 {
        self.momentum.iter().copied().sum()
    }
}
