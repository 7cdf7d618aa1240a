mod support;

use hairforge_core::imaging::{canny, GrayImage, DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_SIGMA};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use support::canny_ref::{self, RefImage};
use support::images::synthetic_images;

fn to_ref(img: &GrayImage) -> RefImage {
    RefImage { width: img.width as usize, height: img.height as usize, data: img.data.clone() }
}

#[test]
fn fifty_synthetic_images_match_the_reference_pixel_for_pixel() {
    let images = synthetic_images();
    assert_eq!(images.len(), 50);
    let settings = [(DEFAULT_SIGMA, DEFAULT_LOW, DEFAULT_HIGH), (1.0, 40, 90), (2.0, 20, 60)];
    for (k, (name, img)) in images.iter().enumerate() {
        let (sigma, low, high) = settings[k % settings.len()];
        let ours = canny(img, sigma, low, high).unwrap();
        let theirs = canny_ref::canny(&to_ref(img), sigma, low as f64, high as f64);
        let diff = ours.data.iter().zip(&theirs).filter(|(a, b)| a != b).count();
        assert_eq!(diff, 0, "{name}: {diff} pixels differ");
    }
}

#[test]
fn synthetic_set_is_not_trivially_empty() {
    let edgy = synthetic_images()
        .iter()
        .filter(|(_, img)| canny(img, 1.0, 40, 90).unwrap().edge_count() > 0)
        .count();
    assert!(edgy >= 45, "{edgy}");
}

#[test]
fn blur_matches_direct_convolution() {
    for (_, img) in synthetic_images().iter().step_by(7) {
        for sigma in [0.5, 1.4, 2.3] {
            let ours = hairforge_core::imaging::gaussian_blur(img, sigma).unwrap();
            assert_eq!(ours.data, canny_ref::blur(&to_ref(img), sigma).data);
        }
    }
}

#[test]
fn constant_images_have_no_edges() {
    for v in [0u8, 1, 128, 255] {
        let img = GrayImage::filled(40, 30, v);
        assert_eq!(canny(&img, DEFAULT_SIGMA, DEFAULT_LOW, DEFAULT_HIGH).unwrap().edge_count(), 0);
    }
}

#[test]
fn thresholds_are_monotone_on_fuzzed_images() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(8..40u32), rng.random_range(8..40u32));
        let data: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
        let img = GrayImage::new(w, h, data).unwrap();
        let sigma = rng.random_range(0.6..2.0);
        let low = rng.random_range(10..120u8);
        let high = rng.random_range(low + 1..=250u8);
        let base = canny(&img, sigma, low, high).unwrap();
        let looser_low = canny(&img, sigma, low / 2, high).unwrap();
        let looser_high = canny(&img, sigma, low, low + (high - low) / 2 + 1).unwrap();
        for (i, &e) in base.data.iter().enumerate() {
            if e != 0 {
                assert_ne!(looser_low.data[i], 0);
                assert_ne!(looser_high.data[i], 0);
            }
        }
    }
}
