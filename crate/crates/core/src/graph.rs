//! The 4-neighborhood grid graph induced by an image.
//!
//! Weights live in two dense arrays: `h_weights[y * (w - 1) + x]` joins
//! `(x, y)`–`(x + 1, y)` and `v_weights[y * w + x]` joins `(x, y)`–`(x, y + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{check_inside, BinaryMask, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Initial weight ε of every edge.
    pub init_weight: f64,
    /// Penalty ω added to edges leaving a background pixel.
    pub penalty: f64,
    /// Weight C of edges touching background in ground-truth graphs.
    pub barrier: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            init_weight: 1.0,
            penalty: 1000.0,
            barrier: 1.0e6,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.init_weight) || !ok(self.penalty) || !ok(self.barrier) {
            return Err(Error::InvalidParameter(format!(
                "graph weights must be positive and finite: {self:?}"
            )));
        }
        if self.penalty < 100.0 * self.init_weight {
            return Err(Error::InvalidParameter(format!(
                "penalty {} must be at least 100x the initial weight {}",
                self.penalty, self.init_weight
            )));
        }
        if self.barrier < 100.0 {
            return Err(Error::InvalidParameter(format!(
                "barrier {} must be at least 100",
                self.barrier
            )));
        }
        Ok(())
    }
}

/// Position of one edge in the weight arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeId {
    Horizontal(usize),
    Vertical(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    width: usize,
    height: usize,
    h_weights: Vec<f64>,
    v_weights: Vec<f64>,
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "edge weight must be positive and finite, got {w}"
        )))
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        Err(Error::InvalidParameter(format!(
            "grid must be at least 1x1, got {width}x{height}"
        )))
    } else {
        Ok(())
    }
}

impl GridGraph {
    /// Every edge weighted `init_weight`.
    pub fn uniform(width: usize, height: usize, init_weight: f64) -> Result<Self> {
        check_dims(width, height)?;
        check_weight(init_weight)?;
        Ok(Self {
            width,
            height,
            h_weights: vec![init_weight; (width - 1) * height],
            v_weights: vec![init_weight; width * (height - 1)],
        })
    }

    /// Weight 1 between two foreground pixels, `barrier` otherwise.
    pub fn from_ground_truth(gt: &BinaryMask, params: &GraphParams) -> Result<Self> {
        params.validate()?;
        let (width, height) = gt.dims();
        let fg = gt.labels();
        let weight = |a: usize, b: usize| if fg[a] && fg[b] { 1.0 } else { params.barrier };
        let mut h_weights = Vec::with_capacity((width - 1) * height);
        for y in 0..height {
            for x in 0..width - 1 {
                h_weights.push(weight(y * width + x, y * width + x + 1));
            }
        }
        let mut v_weights = Vec::with_capacity(width * (height - 1));
        for y in 0..height - 1 {
            for x in 0..width {
                v_weights.push(weight(y * width + x, (y + 1) * width + x));
            }
        }
        Ok(Self {
            width,
            height,
            h_weights,
            v_weights,
        })
    }

    /// Builds a graph from explicit weight arrays.
    pub fn from_weights(
        width: usize,
        height: usize,
        h_weights: Vec<f64>,
        v_weights: Vec<f64>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if h_weights.len() != (width - 1) * height || v_weights.len() != width * (height - 1) {
            return Err(Error::InvalidParameter(
                "weight arrays do not match grid dimensions".into(),
            ));
        }
        for &w in h_weights.iter().chain(&v_weights) {
            check_weight(w)?;
        }
        Ok(Self {
            width,
            height,
            h_weights,
            v_weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn edge_count(&self) -> usize {
        self.h_weights.len() + self.v_weights.len()
    }

    pub fn h_weights(&self) -> &[f64] {
        &self.h_weights
    }

    pub fn v_weights(&self) -> &[f64] {
        &self.v_weights
    }

    pub fn edge_between(&self, u: PixelCoord, v: PixelCoord) -> Result<EdgeId> {
        check_inside(u, self.width, self.height)?;
        check_inside(v, self.width, self.height)?;
        if !u.is_neighbor(v) {
            return Err(Error::NotAdjacent { u, v });
        }
        Ok(if u.y == v.y {
            EdgeId::Horizontal(u.y * (self.width - 1) + u.x.min(v.x))
        } else {
            EdgeId::Vertical(u.y.min(v.y) * self.width + u.x)
        })
    }

    #[inline]
    pub fn weight(&self, edge: EdgeId) -> f64 {
        match edge {
            EdgeId::Horizontal(i) => self.h_weights[i],
            EdgeId::Vertical(i) => self.v_weights[i],
        }
    }

    pub fn weight_between(&self, u: PixelCoord, v: PixelCoord) -> Result<f64> {
        Ok(self.weight(self.edge_between(u, v)?))
    }

    #[inline]
    pub(crate) fn add_to_edge(&mut self, edge: EdgeId, amount: f64) {
        match edge {
            EdgeId::Horizontal(i) => self.h_weights[i] += amount,
            EdgeId::Vertical(i) => self.v_weights[i] += amount,
        }
    }

    /// Adds `penalty` to the single edge joining the 4-neighbors `u` and `v`.
    pub fn add_penalty(&mut self, u: PixelCoord, v: PixelCoord, penalty: f64) -> Result<()> {
        check_weight(penalty)?;
        let edge = self.edge_between(u, v)?;
        self.add_to_edge(edge, penalty);
        Ok(())
    }

    /// Neighbors of the pixel at row-major `index` with their connecting edge,
    /// in the fixed order up, left, right, down.
    #[inline]
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = (usize, EdgeId)> {
        let w = self.width;
        let (x, y) = (index % w, index / w);
        let up = (y > 0).then(|| (index - w, EdgeId::Vertical(index - w)));
        let left = (x > 0).then(|| (index - 1, EdgeId::Horizontal(y * (w - 1) + x - 1)));
        let right = (x + 1 < w).then(|| (index + 1, EdgeId::Horizontal(y * (w - 1) + x)));
        let down = (y + 1 < self.height).then(|| (index + w, EdgeId::Vertical(index)));
        [up, left, right, down].into_iter().flatten()
    }
}
