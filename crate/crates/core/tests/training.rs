//! Classifier training and tailored sampling on small synthetic problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubepath::classifier::{train_classifier, train_classifier_with, Sample};
use tubepath::sampler::{create_tailored_samples, determine_pi, SampleOrigin, SampleSource};
use tubepath::synth::generate_scene;
use tubepath::{
    Execution, GraphParams, Label, Patch, PatchClassifier, PixelCoord, SamplerConfig, SceneSpec,
    TrainParams,
};

/// Bright-centred patches are foreground, dark-centred ones background.
fn separable(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let fg = i % 2 == 0;
            let values = (0..31 * 31usize)
                .map(|k| {
                    let centre = (k % 31).abs_diff(15) <= 2;
                    let base = if centre && fg { 0.8 } else { 0.3 };
                    (base + rng.random_range(-0.1..0.1f64)).clamp(0.0, 1.0)
                })
                .collect();
            Sample {
                patch: Patch::new(31, 31, values, PixelCoord::new(0, 0)).unwrap(),
                label: Label::from_fg(fg),
            }
        })
        .collect()
}

#[test]
fn separable_set_is_learned_perfectly() {
    let samples = separable(200, 1);
    let model = train_classifier(&samples, &TrainParams::default()).unwrap();
    let correct = samples
        .iter()
        .filter(|s| model.classify(&s.patch).unwrap().0 == s.label)
        .count();
    assert_eq!(correct, samples.len());
}

#[test]
fn training_is_deterministic_across_execution_modes() {
    let samples = separable(120, 2);
    let params = TrainParams {
        epochs: 2,
        ..TrainParams::default()
    };
    let (a, ra) = train_classifier_with(&samples, &params, Execution::Sequential).unwrap();
    let (b, rb) = train_classifier_with(&samples, &params, Execution::Parallel).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ra.epoch_losses, rb.epoch_losses);
}

#[test]
fn single_class_sets_are_rejected() {
    let samples: Vec<_> = separable(20, 3).into_iter().filter(|s| s.label.is_fg()).collect();
    assert!(train_classifier(&samples, &TrainParams::default()).is_err());
    assert!(train_classifier(&[], &TrainParams::default()).is_err());
}

#[test]
fn tailored_samples_carry_labels_and_provenance() {
    let scene = generate_scene(&SceneSpec {
        width: 64,
        height: 64,
        seed: 4,
        ..SceneSpec::default()
    })
    .unwrap();
    let start = scene.endpoints[0].0;
    let field = determine_pi(&scene.mask, start, &GraphParams::default()).unwrap();
    let cfg = SamplerConfig {
        max_positives: 40,
        max_negatives: 60,
        ..SamplerConfig::default()
    };
    let origin = SampleOrigin {
        image: 3,
        iteration: 2,
        source: SampleSource::GroundTruth,
    };
    let set = create_tailored_samples(&field, &scene.image, &scene.mask, None, &cfg, origin, Execution::Sequential)
        .unwrap();
    assert_eq!(set.count(Label::Foreground), 40);
    assert_eq!(set.count(Label::Background), 60);
    for (s, p) in set.samples.iter().zip(&set.provenance) {
        assert_eq!(s.label.is_fg(), scene.mask.is_fg(p.anchor));
        assert_eq!(s.patch.anchor(), p.anchor);
        assert_eq!((p.image, p.iteration, p.source), (3, 2, SampleSource::GroundTruth));
        assert_eq!((s.patch.width(), s.patch.length()), (31, 31));
    }
    let again = create_tailored_samples(&field, &scene.image, &scene.mask, None, &cfg, origin, Execution::Parallel)
        .unwrap();
    assert_eq!(again, set);

    let dir = tempfile::tempdir().unwrap();
    set.dump(dir.path()).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 100);
    assert!(dir.path().join("sample_00099.png").exists());
}
