//! Curved patch extraction and rectification.
//!
//! A local path is given a moving frame (tangent + normal per point); patch row
//! `i` samples the image across the normal at path point `i`, so the path
//! itself becomes the middle column of the rectangular patch. Row 0 is the
//! farthest predecessor, the last row is the anchor pixel.

use crate::error::{Error, Result};
use crate::raster::{GridImage, PixelCoord};

/// Path points with a unit tangent and unit normal at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedPath {
    pub points: Vec<[f64; 2]>,
    pub tangents: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
}

impl FramedPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const DEFAULT_TANGENT: [f64; 2] = [0.0, 1.0];

fn diff(a: PixelCoord, b: PixelCoord) -> [f64; 2] {
    [a.x as f64 - b.x as f64, a.y as f64 - b.y as f64]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Tangent at `i` from the narrowest symmetric (or one-sided at the ends)
/// difference that is non-zero; `None` if every point coincides.
fn tangent_at(points: &[PixelCoord], i: usize) -> Option<[f64; 2]> {
    let n = points.len();
    for k in 1..n {
        let hi = (i + k).min(n - 1);
        let lo = i.saturating_sub(k);
        let d = diff(points[hi], points[lo]);
        let norm = d[0].hypot(d[1]);
        if norm > 0.0 {
            return Some([d[0] / norm, d[1] / norm]);
        }
    }
    None
}

/// Builds the sampling frame along `points` (ordered far end → anchor).
///
/// Tangents are normalized central differences, one-sided at the ends. The
/// normal is the tangent turned a quarter, `(t_y, -t_x)`, so a path running
/// down the image has its normal pointing right; a normal whose dot product
/// with its predecessor's is negative is flipped. A path without any
/// displacement gets the default vertical frame.
pub fn frame_path(points: &[PixelCoord]) -> FramedPath {
    let n = points.len();
    let mut tangents = Vec::with_capacity(n);
    let mut normals: Vec<[f64; 2]> = Vec::with_capacity(n);
    for i in 0..n {
        let t = tangent_at(points, i).unwrap_or(DEFAULT_TANGENT);
        let mut nrm = [t[1], -t[0]];
        if let Some(prev) = normals.last() {
            if dot(*prev, nrm) < 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
        }
        tangents.push(t);
        normals.push(nrm);
    }
    FramedPath {
        points: points.iter().map(|p| [p.x as f64, p.y as f64]).collect(),
        tangents,
        normals,
    }
}

/// A rectified `length × width` patch, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    width: usize,
    length: usize,
    values: Vec<f64>,
    anchor: PixelCoord,
}

impl Patch {
    pub fn new(width: usize, length: usize, values: Vec<f64>, anchor: PixelCoord) -> Result<Self> {
        if width == 0 || length == 0 || values.len() != width * length {
            return Err(Error::InvalidParameter(format!(
                "patch of {width}x{length} cannot hold {} values",
                values.len()
            )));
        }
        Ok(Self {
            width,
            length,
            values,
            anchor,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The pixel this patch was extracted for (the last path point).
    pub fn anchor(&self) -> PixelCoord {
        self.anchor
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn middle_column(&self) -> Vec<f64> {
        let c = (self.width - 1) / 2;
        (0..self.length).map(|i| self.get(i, c)).collect()
    }

    /// Mirror the columns.
    pub fn flip_horizontal(&self) -> Patch {
        let values = (0..self.length)
            .flat_map(|i| (0..self.width).rev().map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Patch { values, ..*self }
    }

    /// Mirror the rows, reversing the path direction.
    pub fn flip_vertical(&self) -> Patch {
        let values = (0..self.length)
            .rev()
            .flat_map(|i| (0..self.width).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Patch { values, ..*self }
    }

    /// In-plane rotation about the patch center with bilinear resampling and
    /// border clamping.
    pub fn rotate(&self, degrees: f64) -> Patch {
        let (s, c) = degrees.to_radians().sin_cos();
        let cx = (self.width - 1) as f64 / 2.0;
        let cy = (self.length - 1) as f64 / 2.0;
        let xmax = (self.width - 1) as f64;
        let ymax = (self.length - 1) as f64;
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.length {
            for j in 0..self.width {
                let (dx, dy) = (j as f64 - cx, i as f64 - cy);
                let sx = (cx + c * dx + s * dy).clamp(0.0, xmax);
                let sy = (cy - s * dx + c * dy).clamp(0.0, ymax);
                values.push(self.sample(sx, sy));
            }
        }
        Patch { values, ..*self }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.length - 1);
        let top = self.get(y0, x0) * (1.0 - fx) + self.get(y0, x1) * fx;
        let bottom = self.get(y1, x0) * (1.0 - fx) + self.get(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Samples `width` values across the normal at every frame point.
pub fn extract_rectified_patch(
    image: &GridImage,
    frame: &FramedPath,
    width: usize,
    anchor: PixelCoord,
) -> Result<Patch> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "patch width must be odd, got {width}"
        )));
    }
    if frame.is_empty() {
        return Err(Error::InvalidParameter("cannot extract a patch along an empty path".into()));
    }
    let half = ((width - 1) / 2) as f64;
    let mut values = Vec::with_capacity(width * frame.len());
    for (p, n) in frame.points.iter().zip(&frame.normals) {
        for j in 0..width {
            let offset = j as f64 - half;
            values.push(image.sample_bilinear(p[0] + offset * n[0], p[1] + offset * n[1]));
        }
    }
    Patch::new(width, frame.len(), values, anchor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(usize, usize)]) -> Vec<PixelCoord> {
        v.iter().map(|&(x, y)| PixelCoord::new(x, y)).collect()
    }

    fn assert_unit_frame(f: &FramedPath) {
        for (t, n) in f.tangents.iter().zip(&f.normals) {
            assert!((t[0].hypot(t[1]) - 1.0).abs() < 1e-12);
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
            assert!(dot(*t, *n).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_and_horizontal_frames() {
        let f = frame_path(&pts(&[(2, 0), (2, 1), (2, 2), (2, 3)]));
        assert!(f.tangents.iter().all(|t| *t == [0.0, 1.0]));
        assert!(f.normals.iter().all(|n| n[0].abs() == 1.0 && n[1] == 0.0));
        assert!(f.normals.windows(2).all(|w| w[0] == w[1]));

        let f = frame_path(&pts(&[(0, 4), (1, 4), (2, 4)]));
        assert!(f.normals.iter().all(|n| n[0] == 0.0 && n[1].abs() == 1.0));
        assert!(f.normals.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn l_shaped_frame_turns_continuously() {
        let f = frame_path(&pts(&[(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)]));
        assert_unit_frame(&f);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected_t = [[0.0, 1.0], [0.0, 1.0], [s, s], [1.0, 0.0], [1.0, 0.0]];
        for (t, e) in f.tangents.iter().zip(expected_t) {
            assert!((t[0] - e[0]).abs() < 1e-12 && (t[1] - e[1]).abs() < 1e-12);
        }
        for w in f.normals.windows(2) {
            assert!(dot(w[0], w[1]) > 0.0);
        }
    }

    #[test]
    fn degenerate_paths_get_default_frame() {
        let f = frame_path(&pts(&[(3, 3)]));
        assert_eq!(f.tangents, vec![[0.0, 1.0]]);
        let f = frame_path(&pts(&[(0, 0), (0, 0), (0, 1)]));
        assert_unit_frame(&f);
        assert_eq!(f.tangents[0], [0.0, 1.0]);
    }

    #[test]
    fn constant_image_constant_patch() {
        let img = GridImage::filled(9, 9, 0.25).unwrap();
        let f = frame_path(&pts(&[(1, 1), (2, 1), (2, 2), (3, 2)]));
        let patch = extract_rectified_patch(&img, &f, 7, PixelCoord::new(3, 2)).unwrap();
        assert!(patch.values().iter().all(|&v| v == 0.25));
        assert!(extract_rectified_patch(&img, &f, 4, PixelCoord::new(3, 2)).is_err());
    }

    #[test]
    fn flips_are_involutions() {
        let p = Patch::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], PixelCoord::new(0, 0)).unwrap();
        assert_eq!(p.flip_horizontal().values(), &[0.3, 0.2, 0.1, 0.6, 0.5, 0.4]);
        assert_eq!(p.flip_vertical().values(), &[0.4, 0.5, 0.6, 0.1, 0.2, 0.3]);
        assert_eq!(p.flip_horizontal().flip_horizontal(), p);
        assert_eq!(p.flip_vertical().flip_vertical(), p);
        assert_eq!(p.rotate(0.0), p);
    }
}
