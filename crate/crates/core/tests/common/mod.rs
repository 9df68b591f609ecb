//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubepath::{GridGraph, GridImage, PixelCoord};

/// Bellman-Ford over an explicit edge list built from the weight arrays.
pub fn bellman_ford(graph: &GridGraph, start: usize) -> Vec<f64> {
    let (w, h) = (graph.width(), graph.height());
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w - 1 {
            edges.push((y * w + x, y * w + x + 1, graph.h_weights()[y * (w - 1) + x]));
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            edges.push((y * w + x, (y + 1) * w + x, graph.v_weights()[y * w + x]));
        }
    }
    let mut dist = vec![f64::INFINITY; w * h];
    dist[start] = 0.0;
    for _ in 0..w * h {
        let mut changed = false;
        for &(a, b, wt) in &edges {
            if dist[a] + wt < dist[b] {
                dist[b] = dist[a] + wt;
                changed = true;
            }
            if dist[b] + wt < dist[a] {
                dist[a] = dist[b] + wt;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

pub fn random_graph(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GridGraph {
    // Weights in (0, 10].
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n).map(|_| 10.0 - rng.random_range(0.0..10.0)).collect()
    };
    let hw = draw((w - 1) * h);
    let vw = draw(w * (h - 1));
    GridGraph::from_weights(w, h, hw, vw).unwrap()
}

pub fn random_image(seed: u64, w: usize, h: usize) -> GridImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridImage::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap()
}

/// Axis-aligned crop with border clamping, `rows × cols`, top-left (x0, y0).
pub fn crop(img: &GridImage, x0: i64, y0: i64, cols: usize, rows: usize) -> Vec<Vec<f64>> {
    (0..rows as i64)
        .map(|r| {
            (0..cols as i64)
                .map(|c| {
                    let x = (x0 + c).clamp(0, img.width() as i64 - 1) as usize;
                    let y = (y0 + r).clamp(0, img.height() as i64 - 1) as usize;
                    img.get(x, y)
                })
                .collect()
        })
        .collect()
}

/// Rotates a matrix 90 degrees clockwise.
pub fn rotate_cw(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (rows, cols) = (m.len(), m[0].len());
    (0..cols)
        .map(|i| (0..rows).map(|j| m[rows - 1 - j][i]).collect())
        .collect()
}

/// A random 4-connected walk that never steps back onto the previous pixel.
pub fn random_walk(rng: &mut ChaCha8Rng, w: usize, h: usize, len: usize) -> Vec<PixelCoord> {
    let mut p = PixelCoord::new(rng.random_range(0..w), rng.random_range(0..h));
    let mut pts = vec![p];
    while pts.len() < len {
        let dir = rng.random_range(0..4);
        let next = match dir {
            0 if p.x + 1 < w => PixelCoord::new(p.x + 1, p.y),
            1 if p.x > 0 => PixelCoord::new(p.x - 1, p.y),
            2 if p.y + 1 < h => PixelCoord::new(p.x, p.y + 1),
            3 if p.y > 0 => PixelCoord::new(p.x, p.y - 1),
            _ => continue,
        };
        if pts.len() >= 2 && pts[pts.len() - 2] == next {
            continue;
        }
        pts.push(next);
        p = next;
    }
    pts
}

/// Image rotated 90° clockwise; pixel (x, y) moves to (H-1-y, x).
pub fn rotate_image(img: &GridImage) -> GridImage {
    let (w, h) = img.dims();
    GridImage::from_fn(h, w, |nx, ny| img.get(ny, h - 1 - nx)).unwrap()
}

