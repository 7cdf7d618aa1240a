//! Reference Canny written straight from the step list: a full 2D
//! convolution instead of separable passes, float angles for direction
//! bins and a fixpoint sweep for hysteresis.

#![allow(dead_code)]

pub struct RefImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RefImage {
    fn at(&self, x: i64, y: i64) -> i64 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx] as i64
    }
}

pub fn kernel(sigma: f64) -> Vec<i64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut raw = Vec::new();
    for i in -r..=r {
        raw.push((-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = raw.iter().sum();
    let mut q: Vec<i64> = raw.iter().map(|v| (65536.0 * v / sum).round() as i64).collect();
    let fix = 65536 - q.iter().sum::<i64>();
    q[r as usize] += fix;
    q
}

pub fn blur(img: &RefImage, sigma: f64) -> RefImage {
    let k = kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut data = Vec::with_capacity(img.data.len());
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut acc: i128 = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let w = k[(dy + r) as usize] as i128 * k[(dx + r) as usize] as i128;
                    acc += w * img.at(x + dx, y + dy) as i128;
                }
            }
            let v = (acc + (1i128 << 31)) / (1i128 << 32);
            data.push(v as u8);
        }
    }
    RefImage { width: img.width, height: img.height, data }
}

/// Returns 255 for edge pixels, 0 elsewhere.
pub fn canny(img: &RefImage, sigma: f64, low: f64, high: f64) -> Vec<u8> {
    let b = blur(img, sigma);
    let (w, h) = (img.width as i64, img.height as i64);
    let n = img.data.len();
    let mut mag = vec![0.0f64; n];
    let mut angle = vec![0.0f64; n];
    for y in 0..h {
        for x in 0..w {
            let gx = b.at(x + 1, y - 1) + 2 * b.at(x + 1, y) + b.at(x + 1, y + 1)
                - b.at(x - 1, y - 1)
                - 2 * b.at(x - 1, y)
                - b.at(x - 1, y + 1);
            let gy = b.at(x - 1, y + 1) + 2 * b.at(x, y + 1) + b.at(x + 1, y + 1)
                - b.at(x - 1, y - 1)
                - 2 * b.at(x, y - 1)
                - b.at(x + 1, y - 1);
            let i = (y * w + x) as usize;
            mag[i] = ((gx * gx + gy * gy) as f64).sqrt();
            angle[i] = (gy as f64).atan2(gx as f64).to_degrees().rem_euclid(180.0);
        }
    }
    let get = |x: i64, y: i64| if x < 0 || y < 0 || x >= w || y >= h { 0.0 } else { mag[(y * w + x) as usize] };
    let mut weak = vec![false; n];
    let mut strong = vec![false; n];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let a = angle[i];
            let (dx, dy) = if !(22.5..157.5).contains(&a) {
                (1, 0)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (0, 1)
            } else {
                (1, -1)
            };
            let m = mag[i];
            let local_max = m > get(x - dx, y - dy) && m >= get(x + dx, y + dy);
            if local_max && m > low {
                weak[i] = true;
                strong[i] = m > high;
            }
        }
    }
    let mut on = strong.clone();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                if on[i] || !weak[i] {
                    continue;
                }
                let touches = (-1..=1).any(|dy: i64| {
                    (-1..=1).any(|dx: i64| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0 && ny >= 0 && nx < w && ny < h && on[(ny * w + nx) as usize]
                    })
                });
                if touches {
                    on[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    on.into_iter().map(|e| if e { 255 } else { 0 }).collect()
}
