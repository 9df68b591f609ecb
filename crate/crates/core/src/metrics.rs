//! Centerline error and Dice overlap.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::raster::{BinaryMask, Centerline, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenterlineError {
    /// Mean distance in pixels.
    pub mean: f64,
    /// Number of path points evaluated.
    pub points: usize,
}

/// Mean Euclidean distance from every point of every path to its nearest
/// ground-truth point, averaged over all path points.
pub fn mean_centerline_error(
    paths: &[Centerline],
    gt_points: &[PixelCoord],
) -> Result<CenterlineError> {
    mean_centerline_error_with(paths, gt_points, Execution::default())
}

pub fn mean_centerline_error_with(
    paths: &[Centerline],
    gt_points: &[PixelCoord],
    exec: Execution,
) -> Result<CenterlineError> {
    if paths.is_empty() || gt_points.is_empty() {
        return Err(Error::InvalidParameter(
            "centerline error needs at least one path and one ground-truth point".into(),
        ));
    }
    let points: Vec<PixelCoord> = paths.iter().flat_map(|p| p.points().iter().copied()).collect();
    let dists = exec.map(&points, |p| {
        gt_points
            .iter()
            .map(|q| {
                let dx = p.x as i64 - q.x as i64;
                let dy = p.y as i64 - q.y as i64;
                dx * dx + dy * dy
            })
            .min()
            .map_or(f64::INFINITY, |d2| (d2 as f64).sqrt())
    });
    let total: f64 = dists.iter().sum();
    Ok(CenterlineError {
        mean: total / points.len() as f64,
        points: points.len(),
    })
}

/// `2 |A ∩ B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        na += usize::from(x);
        nb += usize::from(y);
        inter += usize::from(x && y);
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Arithmetic mean of per-pair Dice scores.
pub fn mean_dice(pairs: &[(&BinaryMask, &BinaryMask)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("mean Dice of no pairs".into()));
    }
    let scores = pairs
        .iter()
        .map(|(a, b)| dice(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(points: &[(usize, usize)]) -> Centerline {
        Centerline::new(points.iter().map(|&(x, y)| PixelCoord::new(x, y)).collect()).unwrap()
    }

    fn mask_with(w: usize, h: usize, fg: &[usize]) -> BinaryMask {
        let mut labels = vec![false; w * h];
        for &i in fg {
            labels[i] = true;
        }
        BinaryMask::new(w, h, labels).unwrap()
    }

    #[test]
    fn centerline_error_unit_cases() {
        let gt: Vec<PixelCoord> = (0..10).map(|x| PixelCoord::new(x, 5)).collect();
        let same = line(&[(2, 5), (3, 5), (4, 5)]);
        assert_eq!(mean_centerline_error(&[same], &gt).unwrap().mean, 0.0);

        let shifted = line(&(0..10).map(|x| (x, 6)).collect::<Vec<_>>());
        let e = mean_centerline_error(&[shifted], &gt).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.points, 10);

        let e = mean_centerline_error(&[line(&[(3, 4)])], &[PixelCoord::new(0, 0)]).unwrap();
        assert_eq!(e.mean, 5.0);

        assert!(mean_centerline_error(&[], &gt).is_err());
        assert!(mean_centerline_error(&[line(&[(0, 0)])], &[]).is_err());
    }

    #[test]
    fn centerline_error_averages_over_all_points() {
        let gt = [PixelCoord::new(0, 0)];
        let a = line(&[(0, 0)]);
        let b = line(&[(3, 4), (3, 5)]);
        let e = mean_centerline_error(&[a, b], &gt).unwrap();
        let expected = (0.0 + 5.0 + 34f64.sqrt()) / 3.0;
        assert_eq!(e.points, 3);
        assert!((e.mean - expected).abs() < 1e-15);
    }

    #[test]
    fn dice_unit_cases() {
        let a = mask_with(4, 4, &[0, 1, 2, 3]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let disjoint = mask_with(4, 4, &[8, 9]);
        assert_eq!(dice(&a, &disjoint).unwrap(), 0.0);
        // |A| = 4, |B| = 6, overlap 3.
        let b = mask_with(4, 4, &[1, 2, 3, 12, 13, 14]);
        assert!((dice(&a, &b).unwrap() - 0.6).abs() < 1e-15);
        let empty = mask_with(4, 4, &[]);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert!(dice(&a, &mask_with(2, 2, &[])).is_err());
    }

    #[test]
    fn mean_dice_cases() {
        let a = mask_with(4, 4, &[0, 1, 2, 3]);
        let b = mask_with(4, 4, &[8]);
        assert_eq!(mean_dice(&[(&a, &a)]).unwrap(), 1.0);
        assert_eq!(mean_dice(&[(&a, &a), (&a, &b)]).unwrap(), 0.5);
        assert!(mean_dice(&[]).is_err());

        // Pairs built to hit 0.9, 0.8 and 0.7 on a 10x10 grid: |A| = |B| = 10,
        // overlaps 9, 8 and 7.
        let base = mask_with(10, 10, &(0..10).collect::<Vec<_>>());
        let shifted = |k: usize| mask_with(10, 10, &(k..10 + k).collect::<Vec<_>>());
        let (m1, m2, m3) = (shifted(1), shifted(2), shifted(3));
        assert!((dice(&base, &m1).unwrap() - 0.9).abs() < 1e-15);
        let mean = mean_dice(&[(&base, &m1), (&base, &m2), (&base, &m3)]).unwrap();
        assert!((mean - 0.8).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dice_symmetric_and_bounded(a in proptest::collection::vec(any::<bool>(), 36), b in proptest::collection::vec(any::<bool>(), 36)) {
            let ma = BinaryMask::new(6, 6, a).unwrap();
            let mb = BinaryMask::new(6, 6, b).unwrap();
            let d = dice(&ma, &mb).unwrap();
            prop_assert_eq!(d, dice(&mb, &ma).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn centerline_error_translation_invariant(
            pts in proptest::collection::vec((0usize..20, 0usize..20), 1..10),
            gt in proptest::collection::vec((0usize..20, 0usize..20), 1..10),
            tx in 0usize..30, ty in 0usize..30,
        ) {
            let mk = |v: &[(usize, usize)], dx: usize, dy: usize| -> Vec<Centerline> {
                v.iter().map(|&(x, y)| line(&[(x + dx, y + dy)])).collect()
            };
            let gt_pts = |dx: usize, dy: usize| -> Vec<PixelCoord> {
                gt.iter().map(|&(x, y)| PixelCoord::new(x + dx, y + dy)).collect()
            };
            let e0 = mean_centerline_error(&mk(&pts, 0, 0), &gt_pts(0, 0)).unwrap().mean;
            let e1 = mean_centerline_error(&mk(&pts, tx, ty), &gt_pts(tx, ty)).unwrap().mean;
            prop_assert!((e0 - e1).abs() < 1e-12);
            let coincide = pts.iter().all(|p| gt.contains(p));
            prop_assert_eq!(e0 == 0.0, coincide);
        }
    }
}
