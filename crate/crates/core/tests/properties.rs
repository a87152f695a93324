use proptest::prelude::*;
use sweuler::euler::uniform_grid;
use sweuler::generator::{apply_generator, QuadratureSpec};
use sweuler::harness::{fit_rate, predicted_kappa};
use sweuler::linalg;
use sweuler::model::{Model, ModelSpec, Preset, PresetParams};
use sweuler::oracle::Symbol;
use sweuler::stable::{isotropic_stable_vector, pushforward_density, SphereFunction};
use sweuler::stats::{weighted_line_fit, McEstimate};
use sweuler::{RngStream, TestFunction};

fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streams_replay(seed in any::<u64>(), id in 0u64..1000, alpha in 0.3f64..2.0) {
        let mut a = RngStream::new(seed, id);
        let mut b = RngStream::new(seed, id);
        for _ in 0..4 {
            let x = isotropic_stable_vector(alpha, 2, &mut a).unwrap();
            let y = isotropic_stable_vector(alpha, 2, &mut b).unwrap();
            prop_assert_eq!(&x, &y);
            prop_assert!(x.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn even_modulation_gives_symmetric_density(
        c in prop::array::uniform4(-2.0f64..2.0),
        amp in 0.0f64..0.8,
        alpha in 0.3f64..1.99,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        prop_assume!((c[0] * c[3] - c[1] * c[2]).abs() > 0.1);
        let h = SphereFunction::Quadratic { base: 1.0, amp, axis: 0 };
        let w = unit(theta);
        let a = pushforward_density(&c, &h, alpha, &w);
        let b = pushforward_density(&c, &h, alpha, &[-w[0], -w[1]]);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a > 0.0);
    }

    #[test]
    fn pushforward_of_scaled_rotation(
        lambda in 0.2f64..5.0,
        phi in 0.0f64..std::f64::consts::TAU,
        alpha in 0.3f64..1.99,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        // c = lambda R with h = 1 gives the constant lambda^alpha.
        let c: Vec<f64> = linalg::plane_rotation(2, phi).iter().map(|v| lambda * v).collect();
        let m = pushforward_density(&c, &SphereFunction::one(), alpha, &unit(theta));
        let want = lambda.powf(alpha);
        prop_assert!((m - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn symbol_has_nonpositive_real_part(
        alpha in 0.3f64..2.0,
        xi in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let spec = ModelSpec::preset(
            Preset::IsotropicStableConst,
            &PresetParams { alpha: Some(alpha), dim: Some(2), ..Default::default() },
        ).unwrap();
        let psi = Symbol::from_model(&spec).unwrap().eval(&xi).unwrap();
        prop_assert!(psi.re <= 1e-12);
    }

    #[test]
    fn estimate_interval_is_centred(xs in prop::collection::vec(-1e3f64..1e3, 2..200), by in -10.0f64..10.0) {
        let e = McEstimate::from_samples(&xs);
        prop_assert!(e.stderr >= 0.0);
        prop_assert!(e.contains(e.mean));
        let half = 1.96 * e.stderr;
        prop_assert!((e.ci95.1 - e.mean - half).abs() <= 1e-9 * (1.0 + half));
        prop_assert!((e.mean - e.ci95.0 - half).abs() <= 1e-9 * (1.0 + half));
        let s = e.shifted(by);
        prop_assert!((s.stderr - e.stderr).abs() <= 1e-12 * (1.0 + e.stderr));
        prop_assert!((s.mean - e.mean - by).abs() <= 1e-9 * (1.0 + e.mean.abs()));
    }

    #[test]
    fn line_fit_recovers_exact_lines(
        slope in -3.0f64..3.0,
        intercept in -5.0f64..5.0,
        ws in prop::collection::vec(0.1f64..10.0, 3..10),
    ) {
        let xs: Vec<f64> = (0..ws.len()).map(|i| i as f64 * 0.7 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
        let fit = weighted_line_fit(&xs, &ys, &ws).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - intercept).abs() < 1e-9);
    }

    #[test]
    fn rate_fit_recovers_power_laws(kappa in 0.2f64..1.5, c in 0.01f64..10.0) {
        let deltas: Vec<f64> = (3..=8).map(|k| 2f64.powi(-k)).collect();
        let errors: Vec<f64> = deltas.iter().map(|d| c * d.powf(kappa)).collect();
        let stderrs: Vec<f64> = errors.iter().map(|e| 1e-6 * e).collect();
        let fit = fit_rate(&deltas, &errors, &stderrs, kappa).unwrap();
        prop_assert!((fit.slope - kappa).abs() < 1e-8);
        prop_assert!(fit.pass);
    }

    #[test]
    fn predicted_rate_is_a_fraction(alpha in 0.3f64..2.0, beta in 0.05f64..3.0) {
        prop_assume!((beta - beta.round()).abs() > 1e-3 && (beta - alpha).abs() > 1e-3);
        let k = predicted_kappa(alpha, beta).unwrap();
        prop_assert!(k > 0.0 && k <= 1.0);
    }

    #[test]
    fn uniform_grids(horizon in 1e-3f64..100.0, n in 1usize..2000) {
        let g = uniform_grid(horizon, n).unwrap();
        prop_assert_eq!(g.n_steps(), n);
        prop_assert_eq!(g.horizon(), horizon);
        prop_assert_eq!(g.nodes()[0], 0.0);
        for i in 0..n {
            prop_assert!(g.step(i) > 0.0 && g.step(i) <= g.delta());
        }
        prop_assert!((g.delta() - horizon / n as f64).abs() <= 1e-12 * horizon);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generator_is_linear(
        alpha in prop_oneof![0.4f64..0.9, 1.1f64..1.9],
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        f1 in 0.3f64..2.0,
        f2 in 0.3f64..2.0,
        x in -1.0f64..1.0,
    ) {
        let spec = ModelSpec::preset(
            Preset::IsotropicStableConst,
            &PresetParams { alpha: Some(alpha), ..Default::default() },
        ).unwrap();
        let model = Model::new(spec).unwrap();
        let q = QuadratureSpec::default();
        let u1 = TestFunction::cosine(&[f1]);
        let u2 = TestFunction::cosine(&[f2]);
        let both = TestFunction::Combination { terms: vec![(a, u1.clone()), (b, u2.clone())] };
        let l1 = apply_generator(&model, &u1, &[x], &q).unwrap().value;
        let l2 = apply_generator(&model, &u2, &[x], &q).unwrap().value;
        let l = apply_generator(&model, &both, &[x], &q).unwrap().value;
        let scale = (a * l1).abs() + (b * l2).abs() + 1e-3;
        prop_assert!((l - a * l1 - b * l2).abs() <= q.tolerance * scale, "{l} vs {}", a * l1 + b * l2);
    }
}
