//! Tailored training samples: patches cut along back-traced minimal paths,
//! labeled by the mask value at their anchor pixel.

use std::fs;
use std::path::Path;

use image::{GrayImage, Luma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::classifier::Sample;
use crate::classifier::Label;
use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{GraphParams, GridGraph};
use crate::minpath::{plain_dijkstra, rectified_patch_at, InferenceParams, PredecessorField};
use crate::raster::{BinaryMask, Centerline, GridImage, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub trace_length: usize,
    pub patch_width: usize,
    pub max_positives: usize,
    pub max_negatives: usize,
    /// Background pixels this close to the pseudo-mask are not used.
    pub exclusion_radius: f64,
    /// Centerline dilation radius for pseudo-masks.
    pub dilation_radius: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            trace_length: 31,
            patch_width: 31,
            max_positives: 2000,
            max_negatives: 4000,
            exclusion_radius: 8.0,
            dilation_radius: 3.0,
            seed: 11,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_positives == 0 || self.max_negatives == 0 {
            return Err(Error::InvalidParameter("sample caps must be >= 1".into()));
        }
        if !(self.exclusion_radius >= 0.0 && self.dilation_radius >= 0.0) {
            return Err(Error::InvalidParameter("radii must be non-negative".into()));
        }
        if self.patch_width < 3 || self.patch_width.is_multiple_of(2) || self.trace_length == 0 {
            return Err(Error::InvalidParameter(format!(
                "invalid patch geometry {}x{}",
                self.patch_width, self.trace_length
            )));
        }
        Ok(())
    }
}

/// Which predecessor field the samples were traced through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSource {
    /// Dijkstra on weights derived from the ground-truth mask.
    GroundTruth,
    /// The classifier-driven solver.
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub anchor: PixelCoord,
    pub image: usize,
    pub iteration: usize,
    pub source: SampleSource,
}

/// Where a batch of samples comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOrigin {
    pub image: usize,
    pub iteration: usize,
    pub source: SampleSource,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub provenance: Vec<Provenance>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn extend(&mut self, other: SampleSet) {
        self.samples.extend(other.samples);
        self.provenance.extend(other.provenance);
    }

    /// Writes `sample_NNNNN.png` per patch and a `manifest.json` with labels
    /// and provenance.
    pub fn dump(&self, dir: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Entry<'a> {
            file: String,
            label: Label,
            #[serde(flatten)]
            provenance: &'a Provenance,
        }
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Vec::with_capacity(self.len());
        for (k, (s, prov)) in self.samples.iter().zip(&self.provenance).enumerate() {
            let file = format!("sample_{k:05}.png");
            let p = &s.patch;
            let img = GrayImage::from_fn(p.width() as u32, p.length() as u32, |x, y| {
                Luma([(p.get(y as usize, x as usize) * 255.0).round() as u8])
            });
            crate::io::save_gray(&img, dir.join(&file))?;
            manifest.push(Entry {
                file,
                label: s.label,
                provenance: prov,
            });
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Predecessor field of plain Dijkstra on the ground-truth weighted graph.
pub fn determine_pi(
    gt: &BinaryMask,
    start: PixelCoord,
    params: &GraphParams,
) -> Result<PredecessorField> {
    crate::raster::check_inside(start, gt.width(), gt.height())?;
    if !gt.is_fg(start) {
        return Err(Error::StartNotForeground(start));
    }
    let graph = GridGraph::from_ground_truth(gt, params)?;
    plain_dijkstra(&graph, start)
}

fn mix_seed(seed: u64, origin: SampleOrigin) -> u64 {
    // splitmix64-style scramble of (seed, image, iteration)
    let mut z = seed
        ^ (origin.image as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (origin.iteration as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pick(rng: &mut ChaCha8Rng, pool: &[PixelCoord], cap: usize) -> Vec<PixelCoord> {
    if pool.len() <= cap {
        return pool.to_vec();
    }
    let mut idx = rand::seq::index::sample(rng, pool.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// Draws seeded random anchors (foreground → positive, background outside
/// `ignore` → negative), back-traces each through `pred` and cuts the
/// rectified patch. Output order is positives then negatives, each in
/// row-major anchor order.
pub fn create_tailored_samples(
    pred: &PredecessorField,
    image: &GridImage,
    labels: &BinaryMask,
    ignore: Option<&BinaryMask>,
    cfg: &SamplerConfig,
    origin: SampleOrigin,
    exec: Execution,
) -> Result<SampleSet> {
    cfg.validate()?;
    let dims = image.dims();
    for other in [Some(pred.dims()), Some(labels.dims()), ignore.map(|m| m.dims())]
        .into_iter()
        .flatten()
    {
        if other != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: other,
            });
        }
    }
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for y in 0..dims.1 {
        for x in 0..dims.0 {
            let p = PixelCoord::new(x, y);
            if !pred.is_finalized(p) {
                continue;
            }
            if labels.is_fg(p) {
                fg.push(p);
            } else if !ignore.is_some_and(|m| m.is_fg(p)) {
                bg.push(p);
            }
        }
    }
    if fg.is_empty() && bg.is_empty() {
        return Err(Error::Samples("no eligible anchor pixels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, origin));
    let mut anchors: Vec<(PixelCoord, Label)> = pick(&mut rng, &fg, cfg.max_positives)
        .into_iter()
        .map(|p| (p, Label::Foreground))
        .collect();
    anchors.extend(
        pick(&mut rng, &bg, cfg.max_negatives)
            .into_iter()
            .map(|p| (p, Label::Background)),
    );

    let params = InferenceParams {
        patch_width: cfg.patch_width,
        trace_length: cfg.trace_length,
        ..InferenceParams::default()
    };
    let samples = exec.try_map(&anchors, |&(anchor, label)| {
        rectified_patch_at(image, pred, anchor, &params).map(|patch| Sample { patch, label })
    })?;
    let provenance = anchors
        .iter()
        .map(|&(anchor, _)| Provenance {
            anchor,
            image: origin.image,
            iteration: origin.iteration,
            source: origin.source,
        })
        .collect();
    Ok(SampleSet {
        samples,
        provenance,
    })
}

/// Foreground = pixels within `dilation_radius` of a centerline pixel;
/// ignore = remaining pixels within `exclusion_radius` of that foreground.
pub fn pseudo_mask_from_centerline(
    lines: &[Centerline],
    dims: (usize, usize),
    dilation_radius: f64,
    exclusion_radius: f64,
) -> Result<(BinaryMask, BinaryMask)> {
    let (w, h) = dims;
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter("pseudo-mask needs non-empty dims".into()));
    }
    if !(dilation_radius >= 0.0 && exclusion_radius >= 0.0) {
        return Err(Error::InvalidParameter("radii must be non-negative".into()));
    }
    let mut seeds = vec![false; w * h];
    for line in lines {
        for p in line.points() {
            crate::raster::check_inside(*p, w, h)?;
            seeds[p.y * w + p.x] = true;
        }
    }
    let to_line = squared_edt(w, h, &seeds);
    let r2 = dilation_radius * dilation_radius;
    let fg: Vec<bool> = to_line.iter().map(|&d| d <= r2).collect();
    let to_fg = squared_edt(w, h, &fg);
    let e2 = exclusion_radius * exclusion_radius;
    let ignore: Vec<bool> = fg
        .iter()
        .zip(&to_fg)
        .map(|(&f, &d)| !f && d <= e2)
        .collect();
    Ok((BinaryMask::new(w, h, fg)?, BinaryMask::new(w, h, ignore)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: usize, y: usize) -> PixelCoord {
        PixelCoord::new(x, y)
    }

    fn small_cfg() -> SamplerConfig {
        SamplerConfig {
            trace_length: 5,
            patch_width: 5,
            max_positives: 10,
            max_negatives: 10,
            ..SamplerConfig::default()
        }
    }

    const ORIGIN: SampleOrigin = SampleOrigin {
        image: 0,
        iteration: 0,
        source: SampleSource::GroundTruth,
    };

    fn corridor() -> BinaryMask {
        // 10x3 all-FG corridor in the middle row band of a 10x7 canvas.
        BinaryMask::from_fn(10, 7, |_, y| (2..5).contains(&y)).unwrap()
    }

    #[test]
    fn determine_pi_stays_in_corridor() {
        let gt = corridor();
        let f = determine_pi(&gt, p(0, 3), &GraphParams::default()).unwrap();
        let path = crate::minpath::backtrace_full(&f, p(9, 2)).unwrap();
        assert!(path.points().iter().all(|&q| gt.is_fg(q)));
        assert!(matches!(
            determine_pi(&gt, p(0, 0), &GraphParams::default()),
            Err(Error::StartNotForeground(_))
        ));
    }

    #[test]
    fn determine_pi_all_fg_is_unit_dijkstra() {
        let gt = BinaryMask::filled(6, 5, true).unwrap();
        let f = determine_pi(&gt, p(1, 1), &GraphParams::default()).unwrap();
        let unit = plain_dijkstra(&GridGraph::uniform(6, 5, 1.0).unwrap(), p(1, 1)).unwrap();
        assert_eq!(f, unit);
    }

    #[test]
    fn disconnected_component_costs_at_least_barrier() {
        let gt = BinaryMask::from_fn(9, 3, |x, _| !(3..=5).contains(&x)).unwrap();
        let params = GraphParams::default();
        let f = determine_pi(&gt, p(0, 1), &params).unwrap();
        assert!(f.dist(p(8, 1)) >= params.barrier);
        assert!(f.dist(p(2, 1)) < params.barrier);
    }

    #[test]
    fn caps_and_classes() {
        let gt = corridor();
        let img = GridImage::from_fn(10, 7, |x, y| ((x + y) % 5) as f64 / 4.0).unwrap();
        let f = determine_pi(&gt, p(0, 3), &GraphParams::default()).unwrap();
        let set = create_tailored_samples(&f, &img, &gt, None, &small_cfg(), ORIGIN, Execution::Sequential)
            .unwrap();
        assert_eq!(set.count(Label::Foreground), 10);
        assert_eq!(set.count(Label::Background), 10);
        for (s, prov) in set.samples.iter().zip(&set.provenance) {
            assert_eq!(gt.is_fg(prov.anchor), s.label.is_fg());
            assert_eq!(s.patch.anchor(), prov.anchor);
            let local = crate::minpath::backtrace_local(&f, prov.anchor, 5).unwrap();
            let expected: Vec<f64> = local.iter().map(|q| img.get(q.x, q.y)).collect();
            assert_eq!(s.patch.middle_column(), expected);
        }
        let again = create_tailored_samples(&f, &img, &gt, None, &small_cfg(), ORIGIN, Execution::Parallel)
            .unwrap();
        assert_eq!(set, again);

        let all_fg = BinaryMask::filled(10, 7, true).unwrap();
        let set = create_tailored_samples(&f, &img, &all_fg, None, &small_cfg(), ORIGIN, Execution::Sequential)
            .unwrap();
        assert_eq!(set.count(Label::Background), 0);
        assert_eq!(set.count(Label::Foreground), 10);
    }

    #[test]
    fn ignore_band_blocks_negatives() {
        let line = Centerline::new((0..20).map(|x| p(x, 10)).collect()).unwrap();
        let (fg, ignore) = pseudo_mask_from_centerline(&[line], (20, 21), 2.0, 4.0).unwrap();
        let img = GridImage::filled(20, 21, 0.5).unwrap();
        let f = determine_pi(&fg, p(0, 10), &GraphParams::default()).unwrap();
        let cfg = SamplerConfig {
            max_negatives: 1000,
            ..small_cfg()
        };
        let set = create_tailored_samples(&f, &img, &fg, Some(&ignore), &cfg, ORIGIN, Execution::Sequential)
            .unwrap();
        let to_fg = squared_edt(20, 21, fg.labels());
        let negatives: Vec<_> = set
            .provenance
            .iter()
            .zip(&set.samples)
            .filter(|(_, s)| !s.label.is_fg())
            .map(|(prov, _)| prov.anchor)
            .collect();
        assert!(!negatives.is_empty());
        for a in negatives {
            assert!(to_fg[a.y * 20 + a.x] > 16.0);
        }
    }

    #[test]
    fn pseudo_mask_widths() {
        let single = Centerline::new(vec![p(3, 3)]).unwrap();
        let (fg, _) = pseudo_mask_from_centerline(&[single], (7, 7), 0.0, 0.0).unwrap();
        assert_eq!(fg.fg_pixels(), vec![p(3, 3)]);

        let line = Centerline::new((0..20).map(|x| p(x, 4)).collect()).unwrap();
        let (fg, ignore) = pseudo_mask_from_centerline(&[line], (20, 9), 2.0, 3.0).unwrap();
        for x in 0..20 {
            let width = (0..9).filter(|&y| fg.is_fg(p(x, y))).count();
            assert_eq!(width, 5);
        }
        // Band of 3 on either side, clipped by the canvas (rows 0..2 and 7..9).
        assert_eq!(ignore.count_fg(), 20 * 4);
    }
}
