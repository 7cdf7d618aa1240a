//! Head collision against sphere proxies, with a coarse lookup grid in the
//! head frame so each particle only tests nearby spheres.

use glam::DVec3;

use crate::model::Sphere;

const LOOKUP_CELL: f64 = 2.0;

#[derive(Debug, Clone, Default)]
pub struct ProxyLookup {
    spheres: Vec<Sphere>,
    margin: f64,
    origin: DVec3,
    dims: [usize; 3],
    cells: Vec<Vec<u16>>,
}

impl ProxyLookup {
    pub fn new(spheres: &[Sphere], margin: f64) -> Self {
        if spheres.is_empty() {
            return Self { margin, ..Self::default() };
        }
        let mut lo = DVec3::splat(f64::INFINITY);
        let mut hi = DVec3::splat(f64::NEG_INFINITY);
        for s in spheres {
            let r = DVec3::splat(s.radius + margin);
            lo = lo.min(s.center - r);
            hi = hi.max(s.center + r);
        }
        let span = ((hi - lo) / LOOKUP_CELL).ceil();
        let dims = [span.x as usize + 1, span.y as usize + 1, span.z as usize + 1];
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let cmin = lo + LOOKUP_CELL * DVec3::new(i as f64, j as f64, k as f64);
                    let cmax = cmin + DVec3::splat(LOOKUP_CELL);
                    let cell = &mut cells[i + dims[0] * (j + dims[1] * k)];
                    for (n, s) in spheres.iter().enumerate() {
                        let nearest = s.center.clamp(cmin, cmax);
                        if nearest.distance(s.center) <= s.radius + margin {
                            cell.push(n as u16);
                        }
                    }
                }
            }
        }
        Self { spheres: spheres.to_vec(), margin, origin: lo, dims, cells }
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    fn candidates(&self, p: DVec3) -> &[u16] {
        if self.cells.is_empty() {
            return &[];
        }
        let g = ((p - self.origin) / LOOKUP_CELL).floor();
        if g.x < 0.0 || g.y < 0.0 || g.z < 0.0 {
            return &[];
        }
        let (i, j, k) = (g.x as usize, g.y as usize, g.z as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return &[];
        }
        &self.cells[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Pushes a head-frame point out of every overlapping sphere. Returns the
    /// corrected point and the outward normal of the last contact.
    #[inline]
    pub fn resolve(&self, mut p: DVec3) -> Option<(DVec3, DVec3)> {
        let mut contact = None;
        for &n in self.candidates(p) {
            let s = self.spheres[n as usize];
            let r = s.radius + self.margin;
            let d = p - s.center;
            let dist2 = d.length_squared();
            if dist2 < r * r {
                let dist = dist2.sqrt();
                let normal = if dist > 1e-12 { d / dist } else { DVec3::Y };
                p = s.center + normal * r;
                contact = Some(normal);
            }
        }
        contact.map(|n| (p, n))
    }
}
