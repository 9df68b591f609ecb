use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tubepath::classifier::train_classifier_with;
use tubepath::minpath::apply_classifier;
use tubepath::sampler::{create_tailored_samples, determine_pi, SampleOrigin, SampleSource};
use tubepath::synth::{generate_scene, generate_scenes};
use tubepath::{
    Execution, GraphParams, InferenceParams, ReferenceModel, SamplerConfig, SceneSpec, TrainParams,
};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn small_spec(seed: u64) -> SceneSpec {
    SceneSpec {
        width: 64,
        height: 64,
        seed,
        ..SceneSpec::default()
    }
}

fn sampling(c: &mut Criterion) {
    let scene = generate_scene(&small_spec(1)).unwrap();
    let field = determine_pi(&scene.mask, scene.endpoints[0].0, &GraphParams::default()).unwrap();
    let cfg = SamplerConfig {
        max_positives: 300,
        max_negatives: 300,
        ..SamplerConfig::default()
    };
    let origin = SampleOrigin {
        image: 0,
        iteration: 0,
        source: SampleSource::GroundTruth,
    };
    let mut group = c.benchmark_group("tailored_samples");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                create_tailored_samples(&field, &scene.image, &scene.mask, None, &cfg, origin, exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let scene = generate_scene(&small_spec(2)).unwrap();
    let field = determine_pi(&scene.mask, scene.endpoints[0].0, &GraphParams::default()).unwrap();
    let cfg = SamplerConfig {
        max_positives: 128,
        max_negatives: 128,
        ..SamplerConfig::default()
    };
    let origin = SampleOrigin {
        image: 0,
        iteration: 0,
        source: SampleSource::GroundTruth,
    };
    let set = create_tailored_samples(
        &field,
        &scene.image,
        &scene.mask,
        None,
        &cfg,
        origin,
        Execution::Sequential,
    )
    .unwrap();
    let params = TrainParams {
        epochs: 1,
        ..TrainParams::default()
    };
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_classifier_with(&set.samples, &params, exec).unwrap())
        });
    }
    group.finish();
}

fn solving(c: &mut Criterion) {
    let scenes = generate_scenes(&small_spec(3), 4, Execution::Sequential).unwrap();
    let model = ReferenceModel::new(31, 31, 0).unwrap();
    let params = InferenceParams::default();
    let mut group = c.benchmark_group("solve_scenes");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.try_map(&scenes, |s| {
                    apply_classifier(&s.image, s.endpoints[0].0, &model, &params)
                })
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, training, solving);
criterion_main!(benches);
