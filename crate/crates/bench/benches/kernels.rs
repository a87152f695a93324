use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use sweuler::euler::EulerScheme;
use sweuler::generator::{apply_generator, QuadratureSpec};
use sweuler::model::{Model, Preset};
use sweuler::oracle::{Symbol, SymbolGrid};
use sweuler::stable::{anisotropic_stable_increment, isotropic_stable_vector, AlphaRegime, SphereFunction, StableLaw};
use sweuler::{linalg, RngStream, TestFunction};
use sweuler_bench::preset;

fn samplers(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampler");
    for alpha in [0.6, 1.5, 2.0] {
        let mut rng = RngStream::new(1, 0);
        g.bench_function(format!("isotropic alpha={alpha} d=2"), |b| {
            b.iter(|| isotropic_stable_vector(black_box(alpha), 2, &mut rng).unwrap())
        });
    }
    let law = StableLaw::isotropic(1.5, 2, 0.05);
    let h = SphereFunction::Affine {
        base: 1.0,
        slope: vec![0.3, -0.2],
    };
    let map = linalg::identity(2);
    let mut rng = RngStream::new(2, 0);
    g.bench_function("truncated alpha=1.5 d=2 dt=1/64", |b| {
        b.iter(|| anisotropic_stable_increment(&law, &h, &map, 1.0 / 64.0, AlphaRegime::Super1, &mut rng).unwrap())
    });
    g.finish();
}

fn euler_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("euler_step");
    for p in [Preset::BrownianSmooth, Preset::WeierstrassC, Preset::LevyTempered] {
        let spec = preset(p, None, None);
        let scheme = EulerScheme::from_spec(&spec, 1.0 / 64.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let y = spec.x0.clone();
        g.bench_function(p.name(), |b| b.iter(|| scheme.step(black_box(&y), 1.0 / 64.0, &mut rng).unwrap()));
    }
    g.finish();
}

fn generator(c: &mut Criterion) {
    let mut g = c.benchmark_group("generator");
    g.sample_size(20);
    let q = QuadratureSpec::default();
    for (alpha, dim) in [(1.5, 1), (0.6, 1), (1.5, 2)] {
        let model = Model::new(preset(Preset::IsotropicStableConst, Some(alpha), Some(dim))).unwrap();
        let u = TestFunction::cosine(&vec![1.0; dim]);
        let x = vec![0.3; dim];
        g.bench_function(format!("cosine alpha={alpha} d={dim}"), |b| {
            b.iter(|| apply_generator(&model, &u, black_box(&x), &q).unwrap())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    let spec = preset(Preset::IsotropicStableConst, Some(1.5), Some(2));
    let symbol = Symbol::from_model(&spec).unwrap();
    g.bench_function("symbol eval d=2", |b| b.iter(|| symbol.eval(black_box(&[0.7, -1.2])).unwrap()));
    let grid = SymbolGrid::new(symbol, 8.0, 128).unwrap();
    let values = grid.sample(|x| x[0].cos() * x[1].sin());
    g.bench_function("semigroup 128x128", |b| b.iter(|| grid.semigroup_apply(black_box(&values), 1.0).unwrap()));
    g.finish();
}

criterion_group!(benches, samplers, euler_steps, generator, oracle);
criterion_main!(benches);
