//! Acceptance suite. Every criterion prints one PASS/FAIL line on stderr
//! (written past the test harness capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;
use sweuler::euler::{with_workers, EulerScheme};
use sweuler::generator::{apply_generator, dynkin_residual, mollify, QuadratureSpec};
use sweuler::harness::{predicted_kappa, run_ladder, weak_error_study, Reference, StudyReport};
use sweuler::linalg;
use sweuler::model::{Model, ModelSpec, Preset, PresetParams};
use sweuler::stable::{
    anisotropic_stable_increment, isotropic_stable_vector, AlphaRegime, SmallJumps, SphereFunction, StableLaw,
};
use sweuler::stats::{ecf_vector, energy_test, weighted_line_fit, McEstimate};
use sweuler::{RngStream, TestFunction};

fn report(id: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    let line = format!(
        "acceptance {id:>2} [{}] {name}: {detail} ({:.1} s)\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

fn preset(p: Preset, alpha: f64, dim: usize) -> ModelSpec {
    ModelSpec::preset(
        p,
        &PresetParams {
            alpha: Some(alpha),
            dim: Some(dim),
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn a01_sampler_characteristic_functions() {
    let t0 = Instant::now();
    let n = 100_000;
    let tol = 3.0 / (n as f64).sqrt();
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for alpha in [0.6, 1.0, 1.5, 2.0] {
        for dim in [1, 2] {
            let mut rng = RngStream::new(101, (10.0 * alpha) as u64 * 10 + dim as u64);
            let mut xs = Vec::with_capacity(n * dim);
            for _ in 0..n {
                xs.extend(isotropic_stable_vector(alpha, dim, &mut rng).unwrap());
            }
            for k in 0..8 {
                let r = [0.2, 0.5, 1.0, 1.7][k % 4];
                let th = if k < 4 { 0.3 } else { 2.1 };
                let xi: Vec<f64> = if dim == 1 {
                    vec![if k < 4 { r } else { -r }]
                } else {
                    vec![r * f64::cos(th), r * f64::sin(th)]
                };
                let (re, im) = ecf_vector(&xs, dim, &xi);
                let exact = (-linalg::norm(&xi).powf(alpha)).exp();
                let dev = (re - exact).abs().max(im.abs());
                worst = worst.max(dev);
                if dev > tol {
                    fails.push(format!("alpha {alpha} d {dim} xi {xi:?}: {dev:.4}"));
                }
            }
        }
    }
    let pass = fails.is_empty();
    report(
        1,
        "sampler CF suite",
        pass,
        &format!("max deviation {worst:.5} vs 3/sqrt(N) = {tol:.5}; {fails:?}"),
        t0,
    );
    assert!(pass);
}

#[test]
fn a02_exactness_in_law() {
    let t0 = Instant::now();
    let mut worst_z = 0.0f64;
    let mut pass = true;
    for (alpha, dim, xi) in [(1.5, 1, vec![1.0]), (2.0, 1, vec![1.0]), (1.5, 2, vec![0.8, -0.6])] {
        let spec = preset(Preset::IsotropicStableConst, alpha, dim);
        let g = TestFunction::cosine(&xi);
        let ladder = run_ladder(&spec, &g, &dyadic(3, 8), 100_000, Reference::Oracle, 2).unwrap();
        for p in &ladder.points {
            let z = p.error / p.error_stderr;
            worst_z = worst_z.max(z);
            pass &= z <= 3.0;
        }
    }
    report(
        2,
        "exactness in law for constant isotropic models",
        pass,
        &format!("max |E g(Y_T) - oracle| / stderr = {worst_z:.2} (limit 3)"),
        t0,
    );
    assert!(pass);
}

#[test]
fn a03_gaussian_benchmark() {
    let t0 = Instant::now();
    let spec = preset(Preset::IsotropicStableConst, 2.0, 1);
    let x0 = spec.x0[0];
    let oracle = x0.cos() * (-0.5f64).exp();
    let scheme = EulerScheme::from_spec(&spec, 1.0 / 16.0).unwrap();
    let v = scheme
        .simulate_coupled(1.0, &[16], 100_000, 3, |y| y[0].cos())
        .unwrap();
    let e = McEstimate::from_samples(&v[0]);
    let z = (e.mean - oracle).abs() / e.stderr;
    let pass = z <= 3.0;
    report(
        3,
        "Gaussian benchmark",
        pass,
        &format!("E cos(Y_1) = {:.5} +- {:.5}, cos(x0) e^-1/2 = {oracle:.5}, z = {z:.2}", e.mean, e.stderr),
        t0,
    );
    assert!(pass);
}

#[test]
fn a04_smooth_brownian_rate() {
    let t0 = Instant::now();
    let spec = preset(Preset::BrownianSmooth, 2.0, 1);
    let g = TestFunction::cosine(&[1.0]);
    let (_, fit) = weak_error_study(
        &spec,
        &g,
        &dyadic(3, 8),
        200_000,
        Reference::FineGrid { refinement: 16 },
        4,
    )
    .unwrap();
    let pass = (0.8..=1.3).contains(&fit.slope) && fit.predicted_kappa == 1.0;
    report(
        4,
        "smooth alpha = 2 rate",
        pass,
        &format!(
            "slope {:.3} +- {:.3} on {} points, predicted 1, window [0.8, 1.3]",
            fit.slope,
            fit.slope_stderr,
            fit.used.iter().filter(|u| **u).count()
        ),
        t0,
    );
    assert!(pass);
}

#[test]
fn a05_holder_coefficient_rate() {
    let t0 = Instant::now();
    let spec = ModelSpec::preset(
        Preset::WeierstrassC,
        &PresetParams {
            alpha: Some(1.5),
            beta: Some(0.75),
            ..Default::default()
        },
    )
    .unwrap();
    let g = TestFunction::cosine(&[1.0]);
    let (_, fit) = weak_error_study(
        &spec,
        &g,
        &dyadic(3, 8),
        100_000,
        Reference::FineGrid { refinement: 8 },
        5,
    )
    .unwrap();
    let pass = fit.predicted_kappa == 0.5 && fit.slope >= 0.35;
    report(
        5,
        "Holder coefficient rate",
        pass,
        &format!(
            "slope {:.3} +- {:.3} on {} points, predicted 0.5, need >= 0.35",
            fit.slope,
            fit.slope_stderr,
            fit.used.iter().filter(|u| **u).count()
        ),
        t0,
    );
    assert!(pass);
}

#[test]
fn a06_rate_comparison() {
    let t0 = Instant::now();
    let k = predicted_kappa(2.0, 1.5).unwrap();
    let earlier = 1.0 / (3.0 - 1.5);
    let pass = k == 0.75 && k > earlier;
    report(
        6,
        "rate comparison",
        pass,
        &format!("kappa(2, 1.5) = {k} > 1/(3 - beta) = {earlier:.4}"),
        t0,
    );
    assert!(pass);
}

/// `-N(alpha) int |(xi, w)|^alpha dmu(w)` for the unit-density isotropic
/// jump measure, from Gamma functions.
fn isotropic_symbol(alpha: f64, xi: &[f64]) -> f64 {
    use statrs::function::gamma::gamma;
    let d = xi.len() as f64;
    let n = if alpha == 1.0 {
        PI / 2.0
    } else {
        gamma(2.0 - alpha) * (PI * alpha / 2.0).cos() / (alpha * (1.0 - alpha))
    };
    let moment = 2.0 * PI.powf((d - 1.0) / 2.0) * gamma((alpha + 1.0) / 2.0) / gamma((d + alpha) / 2.0);
    -n * moment * linalg::norm(xi).powf(alpha)
}

#[test]
fn a07_generator_consistency() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for alpha in [0.6, 1.0, 1.5, 1.9] {
        for xi in [vec![0.5], vec![1.3], vec![2.0], vec![0.7, -0.4]] {
            let spec = preset(Preset::IsotropicStableConst, alpha, xi.len());
            let model = Model::new(spec.clone()).unwrap();
            let x: Vec<f64> = (0..xi.len()).map(|i| 0.2 - 0.5 * i as f64).collect();
            let u = TestFunction::cosine(&xi);
            let got = apply_generator(&model, &u, &x, &QuadratureSpec::default())
                .unwrap()
                .value;
            let phase: f64 = xi.iter().zip(&x).map(|(a, b)| a * b).sum();
            let want = isotropic_symbol(alpha, &xi) * phase.cos();
            worst = worst.max((got - want).abs() / want.abs());
            count += 1;
        }
    }
    let pass = worst <= 1e-4 && count == 16;
    report(
        7,
        "generator consistency",
        pass,
        &format!("{count} (alpha, xi) pairs, max relative error {worst:.2e} (limit 1e-4)"),
        t0,
    );
    assert!(pass);
}

#[test]
fn a08_dynkin_residual() {
    let t0 = Instant::now();
    let h = 2f64.powi(-8);
    let mut pass = true;
    let mut details = Vec::new();
    for (alpha, xi) in [(1.5, vec![1.0]), (2.0, vec![1.0]), (1.2, vec![0.6, 0.9])] {
        let spec = preset(Preset::IsotropicStableConst, alpha, xi.len());
        let u = TestFunction::cosine(&xi);
        let r = dynkin_residual(&spec, &u, &spec.x0, h, 100_000, 8, &QuadratureSpec::default()).unwrap();
        let limit = (3.0 * r.stderr).max(10.0 * h.sqrt());
        pass &= r.mean.abs() <= limit;
        details.push(format!("alpha {alpha}: {:.4} (limit {limit:.4})", r.mean));
    }
    report(8, "Dynkin residual", pass, &details.join(", "), t0);
    assert!(pass);
}

#[test]
fn a09_mollifier_exponents() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    let eps: Vec<f64> = dyadic(4, 10);
    // A dyadic grid would sit on the zeros of sin(2^k x); use a golden-ratio sequence.
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let probes: Vec<f64> = (0..20_000)
        .map(|i| -PI + 2.0 * PI * (i as f64 * golden).fract())
        .collect();
    for beta in [0.5, 0.75] {
        let f = TestFunction::Weierstrass {
            beta,
            amplitude: 0.25,
            levels: 30,
            axis: 0,
        };
        let mut dev = Vec::new();
        let mut grad = Vec::new();
        for &e in &eps {
            let m = mollify(&f, e).unwrap();
            // Spot-check the spectral shortcut against the public evaluators.
            let x = [0.3];
            let tm = m.trig_terms(1).unwrap();
            let tf = f.trig_terms(1).unwrap();
            let direct: f64 = tm.iter().map(|t| t.amp * (t.freq[0] * x[0] + t.phase).cos()).sum();
            assert!((direct - m.value(&x)).abs() < 1e-12);
            assert!((f.value(&x) - tf.iter().map(|t| t.amp * (t.freq[0] * x[0] + t.phase).cos()).sum::<f64>()).abs() < 1e-12);
            let (mut d, mut g) = (0.0f64, 0.0f64);
            for &x in &probes {
                let (mut dv, mut gv) = (0.0, 0.0);
                for (a, b) in tm.iter().zip(&tf) {
                    let arg = a.freq[0] * x + a.phase;
                    dv += (a.amp - b.amp) * arg.cos();
                    gv -= a.amp * a.freq[0] * arg.sin();
                }
                d = d.max(dv.abs());
                g = g.max(gv.abs());
            }
            dev.push(d.ln());
            grad.push(g.ln());
        }
        let le: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let w = vec![1.0; eps.len()];
        let s0 = weighted_line_fit(&le, &dev, &w).unwrap().slope;
        let s1 = weighted_line_fit(&le, &grad, &w).unwrap().slope;
        pass &= (s0 - beta).abs() <= 0.1 && (s1 - (beta - 1.0)).abs() <= 0.15;
        details.push(format!("beta {beta}: sup-norm exponent {s0:.3}, gradient exponent {s1:.3}"));
    }
    report(9, "mollifier exponents", pass, &details.join("; "), t0);
    assert!(pass);
}

#[test]
fn a10_pushforward_rotation() {
    let t0 = Instant::now();
    let alpha = 1.5;
    let c = {
        let r = linalg::plane_rotation(2, 0.7);
        r.iter().map(|v| 1.2 * v).collect::<Vec<f64>>()
    };
    let h = SphereFunction::Affine {
        base: 1.0,
        slope: vec![0.3, -0.2],
    };
    let dt = 0.5;
    let n = 1500;
    let cut = 0.02;
    // Jumps c h(w) y of the isotropic driver ...
    let mut law_a = StableLaw::isotropic(alpha, 2, cut);
    law_a.small_jumps = SmallJumps::Gaussian;
    // ... against jumps y' drawn directly from the pushed-forward density.
    let mut law_b = law_a.clone();
    law_b.directional_density = SphereFunction::Pushforward {
        map: c.clone(),
        modulation: Box::new(h.clone()),
        alpha,
    };
    let mut ra = RngStream::new(10, 0);
    let mut rb = RngStream::new(10, 1);
    let mut xa = Vec::with_capacity(2 * n);
    let mut xb = Vec::with_capacity(2 * n);
    let id = linalg::identity(2);
    for _ in 0..n {
        let a = anisotropic_stable_increment(&law_a, &h, &c, dt, AlphaRegime::Super1, &mut ra).unwrap();
        xa.extend(a.jump_sum.iter().zip(&a.compensator).map(|(j, k)| j + k));
        let b = anisotropic_stable_increment(&law_b, &SphereFunction::one(), &id, dt, AlphaRegime::Super1, &mut rb)
            .unwrap();
        xb.extend(b.jump_sum.iter().zip(&b.compensator).map(|(j, k)| j + k));
    }
    // Heavy tails: compare the laws through a bounded, injective transform.
    let squash = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x.atan()).collect() };
    let (stat, p) = energy_test(&squash(&xa), &squash(&xb), 2, 199, 3);
    let pass = p > 0.01;
    report(
        10,
        "pushforward change of variables",
        pass,
        &format!("energy statistic {stat:.4}, permutation p = {p:.3} (need > 0.01)"),
        t0,
    );
    assert!(pass);
}

fn study_report_bytes(spec: &ModelSpec, workers: usize) -> Vec<u8> {
    with_workers(Some(workers), || {
        let g = TestFunction::cosine(&vec![1.0; spec.dim]);
        let kappa = predicted_kappa(spec.alpha, spec.beta()).unwrap();
        let ladder = run_ladder(spec, &g, &dyadic(2, 5), 3000, Reference::default(), 11).unwrap();
        let fit = ladder.fit(kappa);
        let config = serde_json::to_value(spec).unwrap();
        let r = StudyReport::new("rate-study", config, kappa, false, Some(ladder), fit).unwrap();
        let mut out = Vec::new();
        r.write_json(&mut out).unwrap();
        out
    })
    .unwrap()
}

#[test]
fn a11_determinism() {
    let t0 = Instant::now();
    let mut pass = true;
    for p in [Preset::BrownianSmooth, Preset::WeierstrassC, Preset::LevyTempered] {
        let spec = ModelSpec::preset(p, &PresetParams::default()).unwrap();
        let a = study_report_bytes(&spec, 1);
        let b = study_report_bytes(&spec, 8);
        let c = study_report_bytes(&spec, 1);
        pass &= a == b && a == c;
    }
    report(
        11,
        "determinism",
        pass,
        "rate-study reports byte-identical across runs and 1 vs 8 workers",
        t0,
    );
    assert!(pass);
}
