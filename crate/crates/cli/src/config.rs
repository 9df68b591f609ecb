//! Flat run configuration: built-in defaults, then an optional TOML file,
//! then command-line flags. File keys and flag names are identical.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tubepath::classifier::AugmentConfig;
use tubepath::{
    Execution, GraphParams, InferenceParams, SamplerConfig, SceneSpec, TrainConfig, TrainParams,
};

macro_rules! run_config {
    ($( $(#[doc = $doc:literal])+ $field:ident : $ty:ty = $default:expr, )+) => {
        /// Every tunable of the pipeline.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        pub struct RunConfig {
            $( $(#[doc = $doc])+ pub $field: $ty, )+
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $( $field: $default, )+ }
            }
        }

        /// Flag overrides; one optional flag per config key.
        #[derive(Debug, Clone, Default, Args)]
        pub struct Overrides {
            $(
                $(#[doc = $doc])+
                #[arg(long, global = true, value_name = stringify!($ty),
                      help_heading = "Configuration")]
                pub $field: Option<$ty>,
            )+
        }

        impl RunConfig {
            fn apply(&mut self, o: &Overrides) {
                $( if let Some(v) = &o.$field { self.$field = v.clone(); } )+
            }
        }
    };
}

run_config! {
    /// Master seed for scene generation, sampling and weight initialization.
    seed: u64 = 0,
    /// Worker threads; 0 picks one per core.
    threads: usize = 0,
    /// Run everything on the calling thread.
    sequential: bool = false,

    /// Initial edge weight.
    init_weight: f64 = 1.0,
    /// Weight added to edges leaving a background pixel.
    penalty: f64 = 1000.0,
    /// Weight of edges touching background when solving on a ground-truth mask.
    barrier: f64 = 1e6,

    /// Patch width in pixels, odd.
    patch_width: usize = 31,
    /// Number of path points per patch.
    trace_length: usize = 31,

    /// Foreground anchors drawn per image and iteration.
    max_positives: usize = 2000,
    /// Background anchors drawn per image and iteration.
    max_negatives: usize = 4000,
    /// Background within this distance of the foreground is not sampled.
    exclusion_radius: f64 = 8.0,
    /// Pseudo-mask radius around annotated centerlines.
    dilation_radius: f64 = 3.0,

    /// Upper bound on training iterations.
    max_iterations: usize = 5,
    /// Write the samples of every iteration into the run directory.
    dump_samples: bool = false,
    /// Adam step size.
    learning_rate: f64 = 1e-3,
    /// Passes over the samples per iteration.
    epochs: usize = 4,
    /// Minibatch size.
    batch_size: usize = 64,
    /// L2 weight decay.
    l2: f64 = 1e-4,
    /// Augment with horizontal flips.
    hflip: bool = true,
    /// Augment with vertical flips.
    vflip: bool = true,
    /// Random rotations per sample.
    rotations: usize = 1,
    /// Largest augmentation rotation in degrees.
    max_rotation_deg: f64 = 5.0,

    /// Model file read by `infer` and `trace`.
    model: PathBuf = PathBuf::from("model.bin"),

    /// Number of scenes written by `synth`.
    scenes: usize = 1,
    /// Scene width.
    width: usize = 128,
    /// Scene height.
    height: usize = 128,
    /// Fewest tubes per scene.
    tubes_min: usize = 1,
    /// Most tubes per scene.
    tubes_max: usize = 3,
    /// Narrowest tube width.
    tube_width_min: f64 = 5.0,
    /// Widest tube width.
    tube_width_max: f64 = 9.0,
    /// Curvature scale of the tubes.
    curvature: f64 = 0.004,
    /// Mean foreground intensity.
    fg_mean: f64 = 0.75,
    /// Mean background intensity.
    bg_mean: f64 = 0.35,
    /// Standard deviation of the additive noise.
    noise_sigma: f64 = 0.05,
    /// Box-blur radius.
    blur_radius: usize = 1,
}

impl RunConfig {
    /// Defaults, overlaid with `file` if given, overlaid with `flags`.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self, String> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| {
                    format!("{}: {}", path.display(), e.message().trim_end())
                })?
            }
            None => RunConfig::default(),
        };
        cfg.apply(flags);
        Ok(cfg)
    }

    /// Checks every derived parameter set.
    pub fn validate(&self) -> Result<(), String> {
        let err = |e: tubepath::Error| e.to_string();
        self.graph().validate().map_err(err)?;
        self.inference().validate().map_err(err)?;
        self.sampler().validate().map_err(err)?;
        self.classifier().validate().map_err(err)?;
        self.train(PathBuf::new()).validate().map_err(err)?;
        self.scene().validate().map_err(err)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn graph(&self) -> GraphParams {
        GraphParams {
            init_weight: self.init_weight,
            penalty: self.penalty,
            barrier: self.barrier,
        }
    }

    pub fn inference(&self) -> InferenceParams {
        InferenceParams {
            graph: self.graph(),
            patch_width: self.patch_width,
            trace_length: self.trace_length,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            trace_length: self.trace_length,
            patch_width: self.patch_width,
            max_positives: self.max_positives,
            max_negatives: self.max_negatives,
            exclusion_radius: self.exclusion_radius,
            dilation_radius: self.dilation_radius,
            seed: self.seed,
        }
    }

    pub fn classifier(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: self.l2,
            seed: self.seed,
            augment: AugmentConfig {
                hflip: self.hflip,
                vflip: self.vflip,
                rotations: self.rotations,
                max_rotation_deg: self.max_rotation_deg,
            },
        }
    }

    pub fn train(&self, run_dir: PathBuf) -> TrainConfig {
        TrainConfig {
            max_iterations: self.max_iterations,
            graph: self.graph(),
            sampler: self.sampler(),
            classifier: self.classifier(),
            run_dir: Some(run_dir),
            dump_samples: self.dump_samples,
            execution: self.execution(),
        }
    }

    pub fn scene(&self) -> SceneSpec {
        SceneSpec {
            width: self.width,
            height: self.height,
            tubes_min: self.tubes_min,
            tubes_max: self.tubes_max,
            tube_width_min: self.tube_width_min,
            tube_width_max: self.tube_width_max,
            curvature: self.curvature,
            fg_mean: self.fg_mean,
            bg_mean: self.bg_mean,
            noise_sigma: self.noise_sigma,
            blur_radius: self.blur_radius,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.inference(), InferenceParams::default());
        assert_eq!(cfg.graph(), GraphParams::default());
        let s = cfg.sampler();
        let d = SamplerConfig::default();
        assert_eq!(
            (s.max_positives, s.max_negatives, s.exclusion_radius, s.dilation_radius),
            (d.max_positives, d.max_negatives, d.exclusion_radius, d.dilation_radius)
        );
        let c = cfg.classifier();
        let d = TrainParams::default();
        assert_eq!((c.learning_rate, c.epochs, c.batch_size, c.l2), (d.learning_rate, d.epochs, d.batch_size, d.l2));
        assert_eq!(c.augment, d.augment);
        assert_eq!(cfg.scene(), SceneSpec::default());
        assert_eq!(cfg.max_iterations, TrainConfig::default().max_iterations);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig {
            penalty: 250.0,
            hflip: false,
            ..RunConfig::default()
        };
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.validate().is_ok());
        assert!(RunConfig { patch_width: 4, ..cfg.clone() }.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("penalti = 3.0").is_err());
        assert!(toml::from_str::<RunConfig>("penalty = 3.0").is_ok());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "penalty = 300.0\nepochs = 2\n").unwrap();
        let flags = Overrides {
            epochs: Some(9),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(Some(&path), &flags).unwrap();
        assert_eq!((cfg.penalty, cfg.epochs), (300.0, 9));
    }
}
