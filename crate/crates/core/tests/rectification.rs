//! Patch rectification against direct-crop oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubepath::patch::{extract_rectified_patch, frame_path};
use tubepath::PixelCoord;

mod common;
use common::{crop, random_image, random_walk, rotate_cw, rotate_image};

fn patch_rows(p: &tubepath::Patch) -> Vec<Vec<f64>> {
    (0..p.length())
        .map(|i| (0..p.width()).map(|j| p.get(i, j)).collect())
        .collect()
}

fn assert_close(a: &[Vec<f64>], b: &[Vec<f64>]) {
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }
}

#[test]
fn vertical_paths_are_direct_crops() {
    let img = random_image(1, 40, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (w, l) = (7usize, 9usize);
    for _ in 0..50 {
        let x = rng.random_range(0..40usize);
        let y0 = rng.random_range(0..=(40 - l));
        let pts: Vec<PixelCoord> = (0..l).map(|i| PixelCoord::new(x, y0 + i)).collect();
        let patch = extract_rectified_patch(&img, &frame_path(&pts), w, pts[l - 1]).unwrap();
        let expected = crop(&img, x as i64 - 3, y0 as i64, w, l);
        assert_close(&patch_rows(&patch), &expected);
    }
}

#[test]
fn horizontal_paths_are_rotated_crops() {
    let img = random_image(3, 40, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (w, l) = (7usize, 9usize);
    for _ in 0..50 {
        let y = rng.random_range(0..40usize);
        let x0 = rng.random_range(0..=(40 - l));
        let pts: Vec<PixelCoord> = (0..l).map(|i| PixelCoord::new(x0 + i, y)).collect();
        let patch = extract_rectified_patch(&img, &frame_path(&pts), w, pts[l - 1]).unwrap();
        let expected = rotate_cw(&crop(&img, x0 as i64, y as i64 - 3, l, w));
        assert_close(&patch_rows(&patch), &expected);
    }
}

#[test]
fn middle_column_is_the_path() {
    let img = random_image(5, 32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let pts = random_walk(&mut rng, 32, 32, 15);
        let patch = extract_rectified_patch(&img, &frame_path(&pts), 9, pts[14]).unwrap();
        let expected: Vec<f64> = pts.iter().map(|p| img.get(p.x, p.y)).collect();
        assert_eq!(patch.middle_column(), expected);
        assert!(patch.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #[test]
    fn rotation_equivariance(seed in 0u64..1000) {
        let img = random_image(seed, 24, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let pts = random_walk(&mut rng, 24, 18, 11);
        let rot_pts: Vec<PixelCoord> = pts.iter().map(|p| PixelCoord::new(18 - 1 - p.y, p.x)).collect();
        let a = extract_rectified_patch(&img, &frame_path(&pts), 7, pts[10]).unwrap();
        let rimg = rotate_image(&img);
        let b = extract_rectified_patch(&rimg, &frame_path(&rot_pts), 7, rot_pts[10]).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn normals_stay_consistent_on_walks(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_walk(&mut rng, 30, 30, 20);
        let f = frame_path(&pts);
        for (t, n) in f.tangents.iter().zip(&f.normals) {
            prop_assert!((t[0].hypot(t[1]) - 1.0).abs() < 1e-12);
            prop_assert!((n[0] * t[0] + n[1] * t[1]).abs() < 1e-12);
        }
        for w in f.normals.windows(2) {
            prop_assert!(w[0][0] * w[1][0] + w[0][1] * w[1][1] >= 0.0);
        }
    }
}
