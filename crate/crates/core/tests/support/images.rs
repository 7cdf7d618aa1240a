use hairforge_core::imaging::GrayImage;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Steps, ramps, disks and blocky noise; 50 images in a fixed order.
pub fn synthetic_images() -> Vec<(String, GrayImage)> {
    let mut out = Vec::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(42);
    for k in 0..15u32 {
        let (w, h) = (48 + 2 * k, 64 - k);
        let angle = k as f64 * 0.21;
        let (c, s) = (angle.cos(), angle.sin());
        let (lo, hi) = (rng.random_range(0..80u8), rng.random_range(160..=255u8));
        let img = GrayImage::from_fn(w, h, |x, y| {
            let d = (x as f64 - w as f64 / 2.0) * c + (y as f64 - h as f64 / 2.0) * s;
            if d > 0.3 { hi } else { lo }
        });
        out.push((format!("step{k}"), img));
    }
    for k in 0..10u32 {
        let slope = 2.0 + 3.0 * k as f64;
        let img = GrayImage::from_fn(64, 56, |x, y| {
            let t = (x as f64 * slope + y as f64 * (k as f64 - 4.0)).rem_euclid(256.0);
            t as u8
        });
        out.push((format!("ramp{k}"), img));
    }
    for k in 0..15u32 {
        let (cx, cy) = (20.0 + 2.0 * k as f64, 30.0 + k as f64);
        let r = 6.0 + 1.3 * k as f64;
        let (inside, outside) = (255 - 8 * k as u8, 10 + 3 * k as u8);
        let img = GrayImage::from_fn(72, 64, |x, y| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if d < r { inside } else { outside }
        });
        out.push((format!("disk{k}"), img));
    }
    for k in 0..10u32 {
        let mut local = Xoshiro256PlusPlus::seed_from_u64(1000 + k as u64);
        let block = 1 + k % 4;
        let cells: Vec<u8> = (0..64 * 64).map(|_| local.random()).collect();
        let img = GrayImage::from_fn(60, 52, |x, y| cells[((y / block) * 64 + x / block) as usize]);
        out.push((format!("noise{k}"), img));
    }
    out
}
