//! Segmentation of tubular structures with a minimal-path solver whose edge
//! weights are adapted on the fly by a patch classifier.
//!
//! The solver ([`minpath::apply_classifier`]) runs Dijkstra's algorithm on the
//! 4-neighborhood pixel graph. Every time a pixel is finalized, a short path is
//! back-traced through the predecessor field, a curved patch is cropped along it
//! and rectified ([`patch`]), and the classifier decides whether the pixel is
//! foreground. Background pixels have their outgoing edges penalized, so the
//! minimal path stays inside the structure, and the labels form the
//! segmentation mask.
//!
//! The classifier is trained by [`trainer::iterative_train`], which repeatedly
//! re-samples training patches with the solver itself so that training patches
//! look like the ones met during inference.

pub mod classifier;
pub mod distance;
pub mod error;
pub mod exec;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod minpath;
pub mod patch;
pub mod raster;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use classifier::{
    ConstantClassifier, Label, OracleClassifier, PatchClassifier, ReferenceModel, TrainParams,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{GraphParams, GridGraph};
pub use minpath::{InferenceParams, PredecessorField, Solution};
pub use patch::{FramedPath, Patch};
pub use raster::{BinaryMask, Centerline, GridImage, PixelCoord};
pub use sampler::{Sample, SampleSet, SamplerConfig};
pub use synth::{Scene, SceneSpec};
pub use trainer::{TrainConfig, TrainRun};
