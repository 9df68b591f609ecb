//! Iterative training with tailored samples.
//!
//! Iteration 0 samples through the ground-truth weighted predecessor field.
//! Every later iteration trains a fresh classifier on the current samples,
//! re-runs the classifier-driven solver on the training images to draw new
//! samples, and scores the classifier by mean Dice on the validation images.
//! The loop stops at the first iteration whose Dice does not strictly
//! increase. The returned model is the snapshot with the best validation Dice
//! rather than the last one trained, which is the one that failed to improve.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classifier::{train_classifier_with, Label, ReferenceModel, TrainParams};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::GraphParams;
use crate::metrics::dice;
use crate::minpath::{apply_classifier, InferenceParams};
use crate::raster::{BinaryMask, GridImage, PixelCoord};
use crate::sampler::{
    create_tailored_samples, determine_pi, SampleOrigin, SampleSet, SampleSource, SamplerConfig,
};

/// An image with its ground truth and solver start point. `ignore` marks
/// background pixels that must not become negative samples.
#[derive(Debug, Clone)]
pub struct TrainingImage {
    pub image: GridImage,
    pub gt: BinaryMask,
    pub ignore: Option<BinaryMask>,
    pub start: PixelCoord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub graph: GraphParams,
    pub sampler: SamplerConfig,
    pub classifier: TrainParams,
    /// When set, snapshots, the metrics log and the final model go here.
    pub run_dir: Option<PathBuf>,
    /// Also dump every iteration's samples under the run directory.
    pub dump_samples: bool,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            graph: GraphParams::default(),
            sampler: SamplerConfig::default(),
            classifier: TrainParams::default(),
            run_dir: None,
            dump_samples: false,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn inference(&self) -> InferenceParams {
        InferenceParams {
            graph: self.graph,
            patch_width: self.sampler.patch_width,
            trace_length: self.sampler.trace_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max iterations must be >= 1".into()));
        }
        self.sampler.validate()?;
        self.classifier.validate()?;
        self.inference().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dice: f64,
    /// Samples the iteration's classifier was trained on.
    pub positives: usize,
    pub negatives: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub records: Vec<IterationRecord>,
    /// Index into `records` of the returned model.
    pub best: usize,
}

impl TrainRun {
    pub fn best_record(&self) -> &IterationRecord {
        &self.records[self.best]
    }

    pub fn dices(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dice).collect()
    }
}

pub(crate) struct Plateau<M> {
    pub best: usize,
    pub model: M,
}

/// Runs `step(i)` for `i = 1..=max_iterations`, stopping after the first
/// step whose score is not strictly greater than the best so far (which
/// starts at 0). Keeps the model of the last improving step, or of step 1 if
/// none improved.
pub(crate) fn iterate_until_plateau<M>(
    max_iterations: usize,
    mut step: impl FnMut(usize) -> Result<(M, f64)>,
) -> Result<Plateau<M>> {
    let mut best: Option<(usize, M)> = None;
    let mut prev = 0.0;
    for i in 1..=max_iterations {
        let (model, score) = step(i)?;
        if score > prev {
            prev = score;
            best = Some((i - 1, model));
        } else {
            if best.is_none() {
                best = Some((i - 1, model));
            }
            break;
        }
    }
    let (best, model) = best.ok_or_else(|| Error::InvalidParameter("no iterations run".into()))?;
    Ok(Plateau { best, model })
}

fn sample_images(
    set: &[TrainingImage],
    fields: Vec<crate::minpath::PredecessorField>,
    cfg: &TrainConfig,
    iteration: usize,
    source: SampleSource,
) -> Result<SampleSet> {
    let items: Vec<(usize, crate::minpath::PredecessorField)> = fields.into_iter().enumerate().collect();
    let parts = cfg.execution.try_map(&items, |(k, field)| {
        let t = &set[*k];
        create_tailored_samples(
            field,
            &t.image,
            &t.gt,
            t.ignore.as_ref(),
            &cfg.sampler,
            SampleOrigin {
                image: *k,
                iteration,
                source,
            },
            Execution::Sequential,
        )
    })?;
    let mut all = SampleSet::default();
    for p in parts {
        all.extend(p);
    }
    Ok(all)
}

struct RunWriter {
    dir: PathBuf,
    log: fs::File,
}

impl RunWriter {
    fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("metrics.jsonl");
        let log = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { dir, log })
    }

    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        let line = serde_json::to_string(rec).expect("record serializes");
        let path = self.dir.join("metrics.jsonl");
        writeln!(self.log, "{line}").map_err(|e| Error::io(&path, e))
    }
}

/// Trains a classifier with tailored samples; see the module docs.
pub fn iterative_train(
    train: &[TrainingImage],
    val: &[TrainingImage],
    cfg: &TrainConfig,
) -> Result<(ReferenceModel, TrainRun)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidParameter(
            "training and validation sets must be non-empty".into(),
        ));
    }
    for t in train.iter().chain(val) {
        if t.image.dims() != t.gt.dims() {
            return Err(Error::DimensionMismatch {
                expected: t.image.dims(),
                actual: t.gt.dims(),
            });
        }
    }
    let params = cfg.inference();
    let mut writer = cfg.run_dir.clone().map(RunWriter::create).transpose()?;

    let gt_fields = cfg
        .execution
        .try_map(train, |t| determine_pi(&t.gt, t.start, &cfg.graph))?;
    let mut samples = sample_images(train, gt_fields, cfg, 0, SampleSource::GroundTruth)?;
    if let (Some(w), true) = (&writer, cfg.dump_samples) {
        samples.dump(w.dir.join("samples_iter_000"))?;
    }
    let mut records = Vec::new();

    let plateau = iterate_until_plateau(cfg.max_iterations, |i| {
        let positives = samples.count(Label::Foreground);
        let negatives = samples.len() - positives;
        let (model, _) = train_classifier_with(&samples.samples, &cfg.classifier, cfg.execution)?;

        let fields = cfg.execution.try_map(train, |t| {
            apply_classifier(&t.image, t.start, &model, &params).map(|s| s.field)
        })?;
        samples = sample_images(train, fields, cfg, i, SampleSource::Classifier)?;

        let masks = cfg.execution.try_map(val, |t| {
            apply_classifier(&t.image, t.start, &model, &params).map(|s| s.mask)
        })?;
        let mut total = 0.0;
        for (m, t) in masks.iter().zip(val) {
            total += dice(m, &t.gt)?;
        }
        let score = total / val.len() as f64;

        let mut rec = IterationRecord {
            iteration: i,
            dice: score,
            positives,
            negatives,
            snapshot: None,
        };
        if let Some(w) = writer.as_mut() {
            let name = format!("iter_{i:03}.model");
            model.save(w.dir.join(&name))?;
            rec.snapshot = Some(name);
            w.record(&rec)?;
            if cfg.dump_samples {
                samples.dump(w.dir.join(format!("samples_iter_{i:03}")))?;
            }
        }
        records.push(rec);
        Ok((model, score))
    })?;

    let run = TrainRun {
        records,
        best: plateau.best,
    };
    if let Some(w) = &writer {
        plateau.model.save(w.dir.join("model.bin"))?;
        let path = w.dir.join("run.json");
        let text = serde_json::to_string_pretty(&run).expect("run serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok((plateau.model, run))
}
