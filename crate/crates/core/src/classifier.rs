//! Patch classifiers: the [`PatchClassifier`] interface, test doubles, and a
//! small trainable multilayer perceptron ([`ReferenceModel`]).

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::patch::Patch;
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Foreground,
    Background,
}

impl Label {
    pub fn from_score(score: f64) -> Label {
        if score >= DECISION_THRESHOLD {
            Label::Foreground
        } else {
            Label::Background
        }
    }

    pub fn from_fg(fg: bool) -> Label {
        if fg {
            Label::Foreground
        } else {
            Label::Background
        }
    }

    pub fn is_fg(self) -> bool {
        self == Label::Foreground
    }
}

pub const DECISION_THRESHOLD: f64 = 0.5;

/// Maps a rectified patch to a foreground probability. Implementations must
/// be pure: the same patch always yields the same score.
pub trait PatchClassifier: Sync {
    fn score(&self, patch: &Patch) -> Result<f64>;

    fn classify(&self, patch: &Patch) -> Result<(Label, f64)> {
        let s = self.score(patch)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Classifier(format!("score {s} outside [0, 1]")));
        }
        Ok((Label::from_score(s), s))
    }
}

impl<C: PatchClassifier + ?Sized> PatchClassifier for &C {
    fn score(&self, patch: &Patch) -> Result<f64> {
        (**self).score(patch)
    }
}

/// Always returns the same label.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier(pub Label);

impl PatchClassifier for ConstantClassifier {
    fn score(&self, _: &Patch) -> Result<f64> {
        Ok(if self.0.is_fg() { 1.0 } else { 0.0 })
    }
}

/// Returns a fixed score regardless of the patch.
#[derive(Debug, Clone, Copy)]
pub struct FixedScore(pub f64);

impl PatchClassifier for FixedScore {
    fn score(&self, _: &Patch) -> Result<f64> {
        Ok(self.0)
    }
}

/// Test double: ignores the patch contents and returns the ground-truth label
/// of the patch's anchor pixel.
#[derive(Debug, Clone, Copy)]
pub struct OracleClassifier<'a> {
    pub mask: &'a BinaryMask,
}

impl PatchClassifier for OracleClassifier<'_> {
    fn score(&self, patch: &Patch) -> Result<f64> {
        let a = patch.anchor();
        if !a.is_inside(self.mask.width(), self.mask.height()) {
            return Err(Error::Classifier(format!("anchor {a} outside oracle mask")));
        }
        Ok(if self.mask.is_fg(a) { 1.0 } else { 0.0 })
    }
}

/// A labeled patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub patch: Patch,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub hflip: bool,
    pub vflip: bool,
    /// Number of rotated copies per sample.
    pub rotations: usize,
    /// Rotation angles are drawn uniformly from `[-max, +max]` degrees.
    pub max_rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            hflip: true,
            vflip: true,
            rotations: 1,
            max_rotation_deg: 5.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=5.0).contains(&self.max_rotation_deg) {
            return Err(Error::InvalidParameter(format!(
                "rotation augmentation is limited to 5 degrees, got {}",
                self.max_rotation_deg
            )));
        }
        Ok(())
    }

    pub fn variants_per_sample(&self) -> usize {
        1 + usize::from(self.hflip) + usize::from(self.vflip) + self.rotations
    }

    fn plan(&self, rng: &mut impl Rng) -> Vec<Augmentation> {
        let mut out = vec![Augmentation::Identity];
        if self.hflip {
            out.push(Augmentation::FlipHorizontal);
        }
        if self.vflip {
            out.push(Augmentation::FlipVertical);
        }
        for _ in 0..self.rotations {
            let m = self.max_rotation_deg;
            let angle = if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
            out.push(Augmentation::Rotate(angle));
        }
        out
    }
}

/// One label-preserving transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augmentation {
    Identity,
    FlipHorizontal,
    FlipVertical,
    Rotate(f64),
}

impl Augmentation {
    pub fn apply(self, patch: &Patch) -> Patch {
        match self {
            Augmentation::Identity => patch.clone(),
            Augmentation::FlipHorizontal => patch.flip_horizontal(),
            Augmentation::FlipVertical => patch.flip_vertical(),
            Augmentation::Rotate(deg) => patch.rotate(deg),
        }
    }
}

/// The original sample followed by its flips and small rotations.
pub fn augment(sample: &Sample, cfg: &AugmentConfig, rng: &mut impl Rng) -> Vec<Sample> {
    cfg.plan(rng)
        .into_iter()
        .map(|a| Sample {
            patch: a.apply(&sample.patch),
            label: sample.label,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 4,
            batch_size: 64,
            l2: 1e-4,
            seed: 7,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidParameter("l2 must be non-negative".into()));
        }
        self.augment.validate()
    }
}

const ARCH_ID: u16 = 1;
const HIDDEN1: usize = 16;
const HIDDEN2: usize = 8;
const STD_FLOOR: f64 = 1e-2;
const CHUNK: usize = 16;

/// Per-position standardization, then two tanh dense layers (16 and 8 units)
/// and a logistic output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    width: usize,
    length: usize,
    mean: Vec<f64>,
    std: Vec<f64>,
    /// W1 (H1×n), b1, W2 (H2×H1), b2, w3 (H2), b3.
    params: Vec<f64>,
}

fn trainable_count(n: usize) -> usize {
    HIDDEN1 * n + HIDDEN1 + HIDDEN2 * HIDDEN1 + HIDDEN2 + HIDDEN2 + 1
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + HIDDEN1 * n;
        let w2 = b1 + HIDDEN1;
        let b2 = w2 + HIDDEN2 * HIDDEN1;
        let w3 = b2 + HIDDEN2;
        let b3 = w3 + HIDDEN2;
        Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Activations {
    h1: [f64; HIDDEN1],
    h2: [f64; HIDDEN2],
    logit: f64,
}

impl ReferenceModel {
    /// Untrained model with identity standardization and seeded Xavier-uniform
    /// weights.
    pub fn new(width: usize, length: usize, seed: u64) -> Result<Self> {
        if width == 0 || length == 0 {
            return Err(Error::InvalidParameter("patch dims must be positive".into()));
        }
        let n = width * length;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lay = Layout::new(n);
        let mut params = vec![0.0; trainable_count(n)];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-a..a);
            }
        };
        fill(lay.w1..lay.b1, n, HIDDEN1);
        fill(lay.w2..lay.b2, HIDDEN1, HIDDEN2);
        fill(lay.w3..lay.b3, HIDDEN2, 1);
        Ok(Self {
            width,
            length,
            mean: vec![0.0; n],
            std: vec![1.0; n],
            params,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Total stored parameter count (standardization + trainable).
    pub fn parameter_count(&self) -> usize {
        2 * self.mean.len() + self.params.len()
    }

    pub fn trainable_params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_trainable_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidParameter("parameter vector length mismatch".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Sets per-position mean and standard deviation from patches.
    pub fn fit_standardization<'a>(&mut self, patches: impl IntoIterator<Item = &'a Patch>) {
        let n = self.mean.len();
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = 0usize;
        for p in patches {
            for (k, &v) in p.values().iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
            count += 1;
        }
        if count == 0 {
            return;
        }
        let c = count as f64;
        for k in 0..n {
            let m = sum[k] / c;
            self.mean[k] = m;
            self.std[k] = (sq[k] / c - m * m).max(0.0).sqrt().max(STD_FLOOR);
        }
    }

    fn check_dims(&self, patch: &Patch) -> Result<()> {
        if patch.width() != self.width || patch.length() != self.length {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.length),
                actual: (patch.width(), patch.length()),
            });
        }
        Ok(())
    }

    pub fn standardize(&self, patch: &Patch) -> Result<Vec<f64>> {
        self.check_dims(patch)?;
        Ok(patch
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    fn forward(&self, z: &[f64]) -> Activations {
        let n = z.len();
        let lay = Layout::new(n);
        let p = &self.params;
        let mut h1 = [0.0; HIDDEN1];
        for (k, h) in h1.iter_mut().enumerate() {
            let row = &p[lay.w1 + k * n..lay.w1 + (k + 1) * n];
            let a: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + p[lay.b1 + k];
            *h = a.tanh();
        }
        let mut h2 = [0.0; HIDDEN2];
        for (k, h) in h2.iter_mut().enumerate() {
            let row = &p[lay.w2 + k * HIDDEN1..lay.w2 + (k + 1) * HIDDEN1];
            let a: f64 = row.iter().zip(&h1).map(|(w, x)| w * x).sum::<f64>() + p[lay.b2 + k];
            *h = a.tanh();
        }
        let logit = p[lay.w3..lay.b3]
            .iter()
            .zip(&h2)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + p[lay.b3];
        Activations { h1, h2, logit }
    }

    /// Weighted cross-entropy of one standardized input; accumulates its
    /// gradient into `grad` and returns the loss.
    fn backprop(&self, z: &[f64], target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let n = z.len();
        let lay = Layout::new(n);
        let p = &self.params;
        let act = self.forward(z);
        let loss = weight * (softplus(act.logit) - target * act.logit);
        let ds = weight * (sigmoid(act.logit) - target);

        grad[lay.b3] += ds;
        let mut da2 = [0.0; HIDDEN2];
        for k in 0..HIDDEN2 {
            grad[lay.w3 + k] += ds * act.h2[k];
            da2[k] = ds * p[lay.w3 + k] * (1.0 - act.h2[k] * act.h2[k]);
        }
        let mut dh1 = [0.0; HIDDEN1];
        for k in 0..HIDDEN2 {
            grad[lay.b2 + k] += da2[k];
            for j in 0..HIDDEN1 {
                grad[lay.w2 + k * HIDDEN1 + j] += da2[k] * act.h1[j];
                dh1[j] += da2[k] * p[lay.w2 + k * HIDDEN1 + j];
            }
        }
        for j in 0..HIDDEN1 {
            let da1 = dh1[j] * (1.0 - act.h1[j] * act.h1[j]);
            grad[lay.b1 + j] += da1;
            let row = &mut grad[lay.w1 + j * n..lay.w1 + (j + 1) * n];
            for (g, x) in row.iter_mut().zip(z) {
                *g += da1 * x;
            }
        }
        loss
    }

    /// Mean weighted cross-entropy plus `l2/2 · ‖θ‖²` over a batch of
    /// standardized inputs, and its gradient with respect to the trainable
    /// parameters.
    pub fn loss_and_gradient(
        &self,
        batch: &[(&[f64], Label, f64)],
        l2: f64,
        exec: Execution,
    ) -> (f64, Vec<f64>) {
        let np = self.params.len();
        let chunks: Vec<&[(&[f64], Label, f64)]> = batch.chunks(CHUNK).collect();
        let partials = exec.map(&chunks, |chunk| {
            let mut g = vec![0.0; np];
            let mut loss = 0.0;
            for (z, label, w) in chunk.iter() {
                let target = if label.is_fg() { 1.0 } else { 0.0 };
                loss += self.backprop(z, target, *w, &mut g);
            }
            (loss, g)
        });
        let inv = 1.0 / batch.len().max(1) as f64;
        let mut grad = vec![0.0; np];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        loss *= inv;
        for (a, theta) in grad.iter_mut().zip(&self.params) {
            *a = *a * inv + l2 * theta;
        }
        loss += 0.5 * l2 * self.params.iter().map(|t| t * t).sum::<f64>();
        (loss, grad)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }

    /// Serialized model. Layout, little-endian:
    ///
    /// ```text
    /// offset  size  field
    /// 0       4     magic "TPMD"
    /// 4       2     format version (1)
    /// 6       4     patch width W
    /// 10      4     patch length L
    /// 14      2     architecture id (1)
    /// 16      8     parameter count P
    /// 24      8·P   f64 parameters: mean[W·L], std[W·L], W1, b1, W2, b2, w3, b3
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let count = self.parameter_count();
        let mut out = Vec::with_capacity(24 + 8 * count);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.length as u32).to_le_bytes());
        out.extend_from_slice(&ARCH_ID.to_le_bytes());
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for v in self.mean.iter().chain(&self.std).chain(&self.params) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 24 || &bytes[0..4] != MODEL_MAGIC {
            return Err("not a model file".into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(format!("unsupported model version {version}"));
        }
        let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let length = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let arch = u16::from_le_bytes([bytes[14], bytes[15]]);
        if arch != ARCH_ID {
            return Err(format!("unknown architecture id {arch}"));
        }
        let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let n = width * length;
        if n == 0 || count != 2 * n + trainable_count(n) || bytes.len() != 24 + 8 * count {
            return Err("parameter count does not match patch dimensions".into());
        }
        let vals: Vec<f64> = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err("non-finite parameter".into());
        }
        Ok(Self {
            width,
            length,
            mean: vals[..n].to_vec(),
            std: vals[n..2 * n].to_vec(),
            params: vals[2 * n..].to_vec(),
        })
    }
}

const MODEL_MAGIC: &[u8; 4] = b"TPMD";
const MODEL_VERSION: u16 = 1;

impl PatchClassifier for ReferenceModel {
    fn score(&self, patch: &Patch) -> Result<f64> {
        let z = self.standardize(patch)?;
        Ok(sigmoid(self.forward(&z).logit))
    }
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

pub fn train_classifier(samples: &[Sample], params: &TrainParams) -> Result<ReferenceModel> {
    train_classifier_with(samples, params, Execution::default()).map(|(m, _)| m)
}

/// Mini-batch Adam on inverse-frequency weighted cross-entropy. Augmented
/// variants are generated on the fly from a seeded plan, so the run is
/// reproducible for a fixed seed in either execution mode.
pub fn train_classifier_with(
    samples: &[Sample],
    params: &TrainParams,
    exec: Execution,
) -> Result<(ReferenceModel, TrainReport)> {
    params.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Samples("no training samples".into()))?;
    let (width, length) = (first.patch.width(), first.patch.length());
    if let Some(s) = samples
        .iter()
        .find(|s| s.patch.width() != width || s.patch.length() != length)
    {
        return Err(Error::DimensionMismatch {
            expected: (width, length),
            actual: (s.patch.width(), s.patch.length()),
        });
    }
    let n_fg = samples.iter().filter(|s| s.label.is_fg()).count();
    let n_bg = samples.len() - n_fg;
    if n_fg == 0 || n_bg == 0 {
        return Err(Error::Samples(format!(
            "need both classes, got {n_fg} foreground and {n_bg} background samples"
        )));
    }
    let total = samples.len() as f64;
    let w_fg = total / (2.0 * n_fg as f64);
    let w_bg = total / (2.0 * n_bg as f64);

    let mut model = ReferenceModel::new(width, length, params.seed)?;
    model.fit_standardization(samples.iter().map(|s| &s.patch));

    let mut aug_rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_a06e);
    let items: Vec<(usize, Augmentation)> = samples
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            params
                .augment
                .plan(&mut aug_rng)
                .into_iter()
                .map(move |a| (i, a))
        })
        .collect();

    let np = model.params.len();
    let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    let mut epoch_losses = Vec::with_capacity(params.epochs);

    for epoch in 0..params.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch_idx in order.chunks(params.batch_size) {
            let inputs: Vec<Result<(Vec<f64>, Label, f64)>> = exec.map(batch_idx, |&k| {
                let (i, aug) = items[k];
                let s = &samples[i];
                let z = model.standardize(&aug.apply(&s.patch))?;
                let w = if s.label.is_fg() { w_fg } else { w_bg };
                Ok((z, s.label, w))
            });
            let inputs = inputs.into_iter().collect::<Result<Vec<_>>>()?;
            let batch: Vec<(&[f64], Label, f64)> = inputs
                .iter()
                .map(|(z, l, w)| (z.as_slice(), *l, *w))
                .collect();
            let (loss, grad) = model.loss_and_gradient(&batch, params.l2, exec);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became {loss} in epoch {epoch} at step {step}"
                )));
            }
            epoch_loss += loss * batch.len() as f64;
            step += 1;
            let bc1 = 1.0 - beta1.powi(step);
            let bc2 = 1.0 - beta2.powi(step);
            for k in 0..np {
                m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                model.params[k] -=
                    params.learning_rate * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
            }
        }
        epoch_losses.push(epoch_loss / items.len() as f64);
    }
    Ok((model, TrainReport { epoch_losses }))
}
