//! Synthetic tubular scenes with exact ground truth.
//!
//! Each tube is a smoothed random walk: the heading changes at a curvature
//! that itself follows a damped random walk, bounded so that tubes bend like
//! roads or vessels. The walk is sampled every half pixel; the mask is the
//! union of disks of the tube radius around those samples, and the
//! centerline is the 4-connected pixelization of the walk.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::raster::{BinaryMask, Centerline, GridImage, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub tubes_min: usize,
    pub tubes_max: usize,
    pub tube_width_min: f64,
    pub tube_width_max: f64,
    /// Standard deviation of the per-step curvature change (rad/px per step);
    /// 0 gives straight tubes.
    pub curvature: f64,
    pub fg_mean: f64,
    pub bg_mean: f64,
    pub noise_sigma: f64,
    /// Box-blur radius in pixels, applied before noise.
    pub blur_radius: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            tubes_min: 1,
            tubes_max: 3,
            tube_width_min: 5.0,
            tube_width_max: 9.0,
            curvature: 0.004,
            fg_mean: 0.75,
            bg_mean: 0.35,
            noise_sigma: 0.05,
            blur_radius: 1,
            seed: 0,
        }
    }
}

const STEP: f64 = 0.5;
const MAX_TURN_RATE: f64 = 1.0 / 15.0;
const CURVATURE_DAMPING: f64 = 0.98;
const ATTEMPTS: usize = 64;

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.tube_width_min < 2.0 || self.tube_width_max < self.tube_width_min {
            return Err(Error::InvalidParameter(format!(
                "tube widths must satisfy 2 <= min <= max, got [{}, {}]",
                self.tube_width_min, self.tube_width_max
            )));
        }
        if self.tubes_min == 0 || self.tubes_max < self.tubes_min {
            return Err(Error::InvalidParameter("tube count range is empty".into()));
        }
        if !unit(self.fg_mean) || !unit(self.bg_mean) {
            return Err(Error::InvalidParameter("intensities must be within [0, 1]".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.curvature >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise and curvature must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn min_length(&self) -> f64 {
        0.5 * self.width.min(self.height) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: GridImage,
    pub mask: BinaryMask,
    pub centerlines: Vec<Centerline>,
    /// `(start, end)` of each centerline.
    pub endpoints: Vec<(PixelCoord, PixelCoord)>,
    pub spec: SceneSpec,
}

impl Scene {
    /// Every centerline pixel of the scene.
    pub fn centerline_points(&self) -> Vec<PixelCoord> {
        self.centerlines
            .iter()
            .flat_map(|c| c.points().iter().copied())
            .collect()
    }

    /// Writes `image.png`, `mask.png`, `centerlines.json`, `endpoints.json`
    /// and `spec.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::save_image(&self.image, dir.join("image.png"))?;
        io::save_mask(&self.mask, dir.join("mask.png"))?;
        io::save_centerlines(&self.centerlines, dir.join("centerlines.json"))?;
        io::save_endpoints(&self.endpoints, dir.join("endpoints.json"))?;
        let spec_path = dir.join("spec.json");
        let text = serde_json::to_string_pretty(&self.spec)
            .map_err(|e| Error::format(&spec_path, e.to_string()))?;
        fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))
    }
}

struct Tube {
    samples: Vec<[f64; 2]>,
    width: f64,
}

fn walk_tube(spec: &SceneSpec, width: f64, rng: &mut ChaCha8Rng) -> Option<Vec<[f64; 2]>> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let margin = width / 2.0 + 1.0;
    let (lo_x, hi_x, lo_y, hi_y) = (margin, w - 1.0 - margin, margin, h - 1.0 - margin);
    if hi_x <= lo_x || hi_y <= lo_y {
        return None;
    }
    let inside = |x: f64, y: f64| x >= lo_x && x <= hi_x && y >= lo_y && y <= hi_y;
    let curvature_noise = Normal::new(0.0, spec.curvature.max(1e-12)).ok()?;
    let max_len = 2.0 * (w + h);

    for _ in 0..ATTEMPTS {
        // Start on the inset border, heading inward within ±45°.
        let side = rng.random_range(0..4);
        let t: f64 = rng.random_range(0.1..0.9);
        let (x0, y0, base) = match side {
            0 => (lo_x + t * (hi_x - lo_x), lo_y, std::f64::consts::FRAC_PI_2),
            1 => (hi_x, lo_y + t * (hi_y - lo_y), std::f64::consts::PI),
            2 => (lo_x + t * (hi_x - lo_x), hi_y, -std::f64::consts::FRAC_PI_2),
            _ => (lo_x, lo_y + t * (hi_y - lo_y), 0.0),
        };
        let mut heading = base + rng.random_range(-0.25..0.25) * std::f64::consts::PI;
        let mut turn = 0.0f64;
        let (mut x, mut y) = (x0, y0);
        let mut pts = vec![[x, y]];
        let mut len = 0.0;
        while len < max_len {
            if spec.curvature > 0.0 {
                turn = (CURVATURE_DAMPING * turn + curvature_noise.sample(rng))
                    .clamp(-MAX_TURN_RATE, MAX_TURN_RATE);
                heading += turn * STEP;
            }
            let (nx, ny) = (x + STEP * heading.cos(), y + STEP * heading.sin());
            if !inside(nx, ny) {
                break;
            }
            x = nx;
            y = ny;
            pts.push([x, y]);
            len += STEP;
        }
        if len >= spec.min_length() {
            return Some(pts);
        }
    }
    None
}

fn round_px(p: [f64; 2]) -> PixelCoord {
    PixelCoord::new(p[0].round() as usize, p[1].round() as usize)
}

/// 4-connected pixel chain through the rounded walk samples.
fn pixelize(samples: &[[f64; 2]]) -> Vec<PixelCoord> {
    let mut out: Vec<PixelCoord> = Vec::with_capacity(samples.len());
    for (k, &s) in samples.iter().enumerate() {
        let p = round_px(s);
        let Some(&last) = out.last() else {
            out.push(p);
            continue;
        };
        if p == last {
            continue;
        }
        if p.x != last.x && p.y != last.y {
            // Diagonal move: go through whichever corner is closer to the
            // midpoint of the two walk samples.
            let prev = samples[k - 1];
            let mid = [(prev[0] + s[0]) / 2.0, (prev[1] + s[1]) / 2.0];
            let a = PixelCoord::new(p.x, last.y);
            let b = PixelCoord::new(last.x, p.y);
            let d = |q: PixelCoord| (q.x as f64 - mid[0]).hypot(q.y as f64 - mid[1]);
            out.push(if d(a) <= d(b) { a } else { b });
        }
        out.push(p);
    }
    out
}

fn box_blur(data: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return data.to_vec();
    }
    let r = r as isize;
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    let (sx, sy) = if horizontal {
                        ((x as isize + d).clamp(0, w as isize - 1) as usize, y)
                    } else {
                        (x, (y as isize + d).clamp(0, h as isize - 1) as usize)
                    };
                    acc += src[sy * w + sx];
                }
                dst[y * w + x] = acc / (2 * r + 1) as f64;
            }
        }
        dst
    };
    pass(&pass(data, true), false)
}

/// Deterministic for a given spec (including its seed).
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = rng.random_range(spec.tubes_min..=spec.tubes_max);
    let mut tubes = Vec::with_capacity(count);
    for k in 0..count {
        let width = if spec.tube_width_max > spec.tube_width_min {
            rng.random_range(spec.tube_width_min..=spec.tube_width_max)
        } else {
            spec.tube_width_min
        };
        let samples = walk_tube(spec, width, &mut rng).ok_or_else(|| {
            Error::Scene(format!(
                "tube {k} of width {width:.1} does not fit a {}x{} image",
                spec.width, spec.height
            ))
        })?;
        tubes.push(Tube { samples, width });
    }

    let (w, h) = (spec.width, spec.height);
    let mut fg = vec![false; w * h];
    let mut centerlines = Vec::with_capacity(tubes.len());
    for tube in &tubes {
        let r = tube.width / 2.0;
        let reach = r.ceil() as isize;
        for s in &tube.samples {
            let (cx, cy) = (s[0].round() as isize, s[1].round() as isize);
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        continue;
                    }
                    if (x as f64 - s[0]).hypot(y as f64 - s[1]) <= r {
                        fg[y as usize * w + x as usize] = true;
                    }
                }
            }
        }
        let pixels = pixelize(&tube.samples);
        for p in &pixels {
            fg[p.y * w + p.x] = true;
        }
        centerlines.push(Centerline::new(pixels)?);
    }

    let clean: Vec<f64> = fg
        .iter()
        .map(|&f| if f { spec.fg_mean } else { spec.bg_mean })
        .collect();
    let blurred = box_blur(&clean, w, h, spec.blur_radius);
    let data = if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        blurred
            .into_iter()
            .map(|v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0))
            .collect()
    } else {
        blurred
    };
    let endpoints = centerlines.iter().map(|c| (c.first(), c.last())).collect();
    Ok(Scene {
        image: GridImage::new(w, h, data)?,
        mask: BinaryMask::new(w, h, fg)?,
        centerlines,
        endpoints,
        spec: *spec,
    })
}

/// Scenes for consecutive seeds starting at `spec.seed`.
pub fn generate_scenes(
    spec: &SceneSpec,
    count: usize,
    exec: crate::exec::Execution,
) -> Result<Vec<Scene>> {
    exec.map_range(count, |k| {
        generate_scene(&SceneSpec {
            seed: spec.seed.wrapping_add(k as u64),
            ..*spec
        })
    })
    .into_iter()
    .collect()
}
