use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vanity_core::imageops::{guided_filter, ImageBuffer};
use vanity_core::matting::{spectral_matting, MattingConfig};
use vanity_core::recommender::{LabelSpace, LatentSpace, LatentSvmModel};
use vanity_core::synthesis::{synthesize, Intensities, SynthesisConfig};
use vanity_core::synthetic::{sample_face, sample_spec};

fn random_image(w: usize, h: usize, channels: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::from_vec(w, h, channels, (0..w * h * channels).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn guided(c: &mut Criterion) {
    let guide = random_image(512, 512, 1, 1);
    let input = random_image(512, 512, 1, 2);
    let mut group = c.benchmark_group("guided_filter_512");
    for r in [2, 8, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, &r| {
            b.iter(|| guided_filter(&guide, &input, r, 1e-3).unwrap())
        });
    }
    group.finish();
}

fn matting(c: &mut Criterion) {
    let patch = random_image(48, 32, 3, 3);
    let cfg = MattingConfig::default();
    c.bench_function("spectral_matting_48x32", |b| b.iter(|| spectral_matting(&patch, &cfg).unwrap()));
}

fn inference(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut model = LatentSvmModel::zeros(64, LatentSpace::default(), LabelSpace::new(20, 8, 8, 8).unwrap());
    model.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("latent_svm_infer", |b| b.iter(|| model.infer(&x)));
}

fn synthesis(c: &mut Criterion) {
    let (img, lm) = sample_face();
    let spec = sample_spec(Intensities::default());
    let cfg = SynthesisConfig::default();
    let mut group = c.benchmark_group("synthesis");
    group.sample_size(10);
    group.bench_function("sample_face", |b| b.iter(|| synthesize(&img, &lm, &spec, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, guided, matting, inference, synthesis);
criterion_main!(benches);
