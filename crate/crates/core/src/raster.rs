//! Raster types shared by every stage: intensity images, binary masks and
//! pixel-coordinate centerlines. Coordinates are `(x = column, y = row)` with
//! the origin at the top-left corner; storage is row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn is_inside(self, width: usize, height: usize) -> bool {
        self.x < width && self.y < height
    }

    /// True for horizontally or vertically adjacent pixels.
    pub fn is_neighbor(self, other: PixelCoord) -> bool {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) == 1
    }

    pub fn distance(self, other: PixelCoord) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx.hypot(dy)
    }
}

impl std::fmt::Display for PixelCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl std::str::FromStr for PixelCoord {
    type Err = Error;

    /// Parses `"X,Y"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected pixel as X,Y, got {s:?}"));
        let (x, y) = s.split_once(',').ok_or_else(bad)?;
        let x = x.trim().parse().map_err(|_| bad())?;
        let y = y.trim().parse().map_err(|_| bad())?;
        Ok(PixelCoord { x, y })
    }
}

pub(crate) fn check_inside(p: PixelCoord, width: usize, height: usize) -> Result<()> {
    if p.is_inside(width, height) {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            coord: p,
            width,
            height,
        })
    }
}

/// Scalar-intensity raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GridImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "image data has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at a real position; positions outside the image are
    /// clamped to the border.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let x = x.clamp(0.0, xmax);
        let y = y.clamp(0.0, ymax);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Binary foreground/background raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    fg: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, fg: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask must be at least 1x1, got {width}x{height}"
            )));
        }
        if fg.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "mask has {} labels, expected {}",
                fg.len(),
                width * height
            )));
        }
        Ok(Self { width, height, fg })
    }

    pub fn filled(width: usize, height: usize, fg: bool) -> Result<Self> {
        Self::new(width, height, vec![fg; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut fg = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                fg.push(f(x, y));
            }
        }
        Self::new(width, height, fg)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn is_fg(&self, p: PixelCoord) -> bool {
        self.fg[p.y * self.width + p.x]
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> bool {
        self.fg[index]
    }

    pub fn set(&mut self, p: PixelCoord, fg: bool) {
        self.fg[p.y * self.width + p.x] = fg;
    }

    pub fn set_index(&mut self, index: usize, fg: bool) {
        self.fg[index] = fg;
    }

    pub fn labels(&self) -> &[bool] {
        &self.fg
    }

    pub fn count_fg(&self) -> usize {
        self.fg.iter().filter(|&&v| v).count()
    }

    /// Foreground pixels in row-major order.
    pub fn fg_pixels(&self) -> Vec<PixelCoord> {
        self.pixels_where(|v| v)
    }

    pub fn bg_pixels(&self) -> Vec<PixelCoord> {
        self.pixels_where(|v| !v)
    }

    fn pixels_where(&self, pred: impl Fn(bool) -> bool) -> Vec<PixelCoord> {
        self.fg
            .iter()
            .enumerate()
            .filter(|(_, &v)| pred(v))
            .map(|(i, _)| PixelCoord::new(i % self.width, i / self.width))
            .collect()
    }
}

/// An ordered, non-empty pixel path whose consecutive points differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PixelCoord>", into = "Vec<PixelCoord>")]
pub struct Centerline {
    points: Vec<PixelCoord>,
}

impl Centerline {
    pub fn new(points: Vec<PixelCoord>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("centerline is empty".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "centerline repeats point ({}, {})",
                w[0].x, w[0].y
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[PixelCoord] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> PixelCoord {
        self.points[0]
    }

    pub fn last(&self) -> PixelCoord {
        self.points[self.points.len() - 1]
    }

    /// Consecutive points differ by exactly one unit step.
    pub fn is_4_connected(&self) -> bool {
        self.points.windows(2).all(|w| w[0].is_neighbor(w[1]))
    }

    pub fn into_points(self) -> Vec<PixelCoord> {
        self.points
    }
}

impl TryFrom<Vec<PixelCoord>> for Centerline {
    type Error = Error;

    fn try_from(points: Vec<PixelCoord>) -> Result<Self> {
        Centerline::new(points)
    }
}

impl From<Centerline> for Vec<PixelCoord> {
    fn from(c: Centerline) -> Self {
        c.points
    }
}
