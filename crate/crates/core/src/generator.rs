//! Deterministic evaluation of the generator `L u(x)` of a model on a test
//! function, and the Monte Carlo Dynkin check that ties it to the scheme.

use crate::euler::{EulerOptions, EulerScheme};
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::quad::{self, GaussLegendre, SphereRule};
use crate::stable::AlphaRegime;
use crate::stats::McEstimate;
use crate::testfn::TestFunction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Radial and angular quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Radius below which the Taylor remainder form is integrated.
    pub r0: f64,
    /// Radius where the numerical radial integral stops.
    pub r_max: f64,
    /// Angles (d = 2) or polar nodes (d = 3) of the plain sphere rule.
    pub sphere_resolution: usize,
    /// tanh-sinh level on the arcs between kink directions (d = 2).
    pub circle_level: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Accepted relative change between the rule and its refinement.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            r0: 1e-3,
            r_max: 1e3,
            sphere_resolution: 1024,
            circle_level: 6,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            tolerance: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn refined(&self) -> Self {
        Self {
            sphere_resolution: 2 * self.sphere_resolution,
            circle_level: self.circle_level + 1,
            rel_tol: 0.1 * self.rel_tol,
            abs_tol: 0.1 * self.abs_tol,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(Error::Domain {
                name: "r0",
                value: self.r0,
                range: "(0, 1)",
            });
        }
        if !(self.r_max > 1.0) {
            return Err(Error::Domain {
                name: "r_max",
                value: self.r_max,
                range: "(1, inf)",
            });
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `L u(x)` split by contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// Stable jump part, including `core`.
    pub jumps: f64,
    /// Part of `jumps` coming from radii below `r0`.
    pub core: f64,
    pub drift: f64,
    pub diffusion: f64,
    pub levy: f64,
    /// Bound on the dropped oscillatory tail beyond `r_max`.
    pub tail_bound: f64,
    /// `|value - value at the refined rule|`
    pub refinement_delta: f64,
}

/// `L u(x)` for the model. The value at `quad` is compared with the value at
/// `quad.refined()`; a relative change above `quad.tolerance` is an error.
pub fn apply_generator(
    model: &Model,
    u: &TestFunction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<GeneratorValue> {
    quad.check()?;
    let d = model.dim();
    u.check(d)?;
    if x.len() != d {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates for dimension {d}",
            x.len()
        )));
    }
    let coarse = evaluate(model, u, x, quad)?;
    let fine = evaluate(model, u, x, &quad.refined())?;
    let delta = (coarse.value - fine.value).abs();
    if delta > quad.tolerance * fine.value.abs().max(1.0) {
        return Err(Error::Quadrature(format!(
            "generator at {x:?}: {:.10e} vs refined {:.10e}, residual {delta:.2e}",
            coarse.value, fine.value
        )));
    }
    Ok(GeneratorValue {
        refinement_delta: delta,
        ..fine
    })
}

/// Builds the model from `spec` and applies the generator.
pub fn apply_generator_spec(
    spec: &ModelSpec,
    u: &TestFunction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<GeneratorValue> {
    apply_generator(&Model::new(spec.clone())?, u, x, quad)
}

fn evaluate(model: &Model, u: &TestFunction, x: &[f64], q: &QuadratureSpec) -> Result<GeneratorValue> {
    let spec = model.spec();
    let d = model.dim();
    let alpha = model.alpha();
    let regime = model.regime();
    let grad = u.gradient(x);
    let mut out = GeneratorValue {
        value: 0.0,
        jumps: 0.0,
        core: 0.0,
        drift: 0.0,
        diffusion: 0.0,
        levy: 0.0,
        tail_bound: 0.0,
        refinement_delta: 0.0,
    };

    if alpha >= 1.0 {
        let a = spec.drift.eval(x);
        out.drift = a.iter().zip(&grad).map(|(a, g)| a * g).sum();
    }
    if regime == AlphaRegime::Gaussian {
        let b = spec.diffusion.eval(x);
        let h = u.hessian(x);
        // tr(b b^T H) / 2
        let mut tr = 0.0;
        for i in 0..d {
            for j in 0..d {
                let bbt: f64 = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum();
                tr += bbt * h[i * d + j];
            }
        }
        out.diffusion = 0.5 * tr;
    } else {
        let (jumps, core, tail_bound) = stable_part(model, u, x, &grad, q)?;
        out.jumps = jumps;
        out.core = core;
        out.tail_bound = tail_bound;
    }

    if let Some(l) = model.levy() {
        let c = l.component().direction.eval(x);
        let slope: f64 = c.iter().zip(&grad).map(|(c, g)| c * g).sum();
        let ux = u.value(x);
        out.levy = l.integrate_generator(
            |s| {
                let y: Vec<f64> = x.iter().zip(&c).map(|(x, c)| x + s * c).collect();
                u.value(&y) - ux
            },
            slope,
            regime,
        )?;
    }
    out.value = out.drift + out.diffusion + out.jumps + out.levy;
    if !out.value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite generator value at {x:?}")));
    }
    Ok(out)
}

/// Directions and weights on the unit sphere.
fn sphere_nodes(u: &TestFunction, d: usize, q: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
    if d == 2 {
        // The angular integrand of a trigonometric function has kinks where
        // a frequency is orthogonal to the direction.
        if let Some(terms) = u.trig_terms(d) {
            let breaks: Vec<f64> = terms
                .iter()
                .filter(|t| t.amp != 0.0 && t.freq.iter().any(|f| *f != 0.0))
                .flat_map(|t| {
                    let th = t.freq[1].atan2(t.freq[0]);
                    [th + std::f64::consts::FRAC_PI_2, th - std::f64::consts::FRAC_PI_2]
                })
                .collect();
            if breaks.len() <= 32 {
                return Ok(quad::circle_nodes(&breaks, q.circle_level)
                    .into_iter()
                    .map(|(th, w)| (vec![th.cos(), th.sin()], w))
                    .collect());
            }
        }
    }
    let res = if d == 3 { q.sphere_resolution / 16 } else { q.sphere_resolution };
    let rule = SphereRule::new(d, res)?;
    Ok(rule.iter().map(|(w, wt)| (w.to_vec(), wt)).collect())
}

/// Returns (jump part, core part, tail bound).
fn stable_part(
    model: &Model,
    u: &TestFunction,
    x: &[f64],
    grad: &[f64],
    q: &QuadratureSpec,
) -> Result<(f64, f64, f64)> {
    let d = model.dim();
    let alpha = model.alpha();
    let regime = model.regime();
    let poly = if u.sup_bound().is_finite() { None } else { u.polynomial_degree() };
    if poly == Some(2) {
        return Err(Error::Unsupported(format!(
            "quadratic test function against alpha = {alpha} < 2 jumps"
        )));
    }
    let nodes = sphere_nodes(u, d, q)?;
    let densities: Vec<f64> = nodes.iter().map(|(w, _)| model.jump_density(x, w)).collect();
    if poly == Some(1) && regime != AlphaRegime::Super1 {
        // Uncompensated linear growth only integrates as a principal value.
        let mass: f64 = densities.iter().zip(&nodes).map(|(r, (_, wt))| r * wt).sum();
        for k in 0..d {
            let m: f64 = densities
                .iter()
                .zip(&nodes)
                .map(|(r, (w, wt))| r * wt * w[k])
                .sum();
            if m.abs() > 1e-10 * mass {
                return Err(Error::Unsupported(
                    "linear test function against asymmetric jumps with infinite mean".into(),
                ));
            }
        }
    }
    let ux = u.value(x);
    // Value u settles to on average far away: the zero-frequency part.
    let far = u
        .trig_terms(d)
        .map(|ts| {
            ts.iter()
                .filter(|t| t.freq.iter().all(|f| *f == 0.0))
                .map(|t| t.amp * t.phase.cos())
                .sum::<f64>()
        })
        .unwrap_or(0.0);
    let sup = u.sup_bound() + far.abs();
    let per_dir: Vec<Result<(f64, f64)>> = nodes
        .par_iter()
        .zip(densities.par_iter())
        .map(|((w, wt), r)| {
            if *r == 0.0 {
                return Ok((0.0, 0.0));
            }
            let (i, core) = radial(u, x, ux, far, grad, w, alpha, regime, poly.is_some(), q)?;
            Ok((wt * r * i, wt * r * core))
        })
        .collect();
    let (mut total, mut core) = (0.0, 0.0);
    for v in per_dir {
        let (i, c) = v?;
        total += i;
        core += c;
    }
    let mass: f64 = densities.iter().zip(&nodes).map(|(r, (_, wt))| r * wt).sum();
    let tail_bound = if poly.is_some() {
        0.0
    } else {
        sup * mass * q.r_max.powf(-alpha) / alpha
    };
    Ok((total, core, tail_bound))
}

/// `int_0^inf [u(x + rho w) - u(x) - chi(rho) rho (grad u, w)] rho^{-1-alpha} d rho`
/// with its part below `r0`.
#[allow(clippy::too_many_arguments)]
fn radial(
    u: &TestFunction,
    x: &[f64],
    ux: f64,
    far: f64,
    grad: &[f64],
    w: &[f64],
    alpha: f64,
    regime: AlphaRegime,
    polynomial: bool,
    q: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let d = x.len();
    let g: f64 = grad.iter().zip(w).map(|(a, b)| a * b).sum();
    let chi = |rho: f64| match regime {
        AlphaRegime::Super1 | AlphaRegime::Gaussian => 1.0,
        AlphaRegime::Eq1 => (rho <= 1.0) as u8 as f64,
        AlphaRegime::Sub1 => 0.0,
    };
    let mut y = vec![0.0; d];
    let mut shift = |rho: f64| -> f64 {
        y.iter_mut().zip(x).zip(w).for_each(|((y, x), w)| *y = x + rho * w);
        u.value(&y)
    };

    // Core: rho^2 int_0^1 (1 - s) w^T H(x + s rho w) w ds, integrated in
    // t = rho^(2 - alpha).
    let p = 2.0 - alpha;
    let gl_s = GaussLegendre::new(6);
    let gl_t = GaussLegendre::new(10);
    let mut core = 0.0;
    for (t, wt_t) in gl_t.points(0.0, q.r0.powf(p)) {
        let rho = t.powf(1.0 / p);
        let mut qv = 0.0;
        for (s, wt_s) in gl_s.points(0.0, 1.0) {
            let z: Vec<f64> = x.iter().zip(w).map(|(x, w)| x + s * rho * w).collect();
            let h = u.hessian(&z);
            let mut whw = 0.0;
            for i in 0..d {
                for j in 0..d {
                    whw += w[i] * h[i * d + j] * w[j];
                }
            }
            qv += wt_s * (1.0 - s) * whw;
        }
        core += wt_t * qv;
    }
    core /= p;
    if regime == AlphaRegime::Sub1 {
        core += g * q.r0.powf(1.0 - alpha) / (1.0 - alpha);
    }

    // Cancellation in the compensated integrand leaves roundoff of order
    // eps |u| rho^-alpha.
    let abs_tol = q
        .abs_tol
        .max(64.0 * f64::EPSILON * (ux.abs() + g.abs() + 1.0) * q.r0.powf(-alpha));

    // Shell [r0, 1] in log radius.
    let inner = quad::adaptive(
        |s| {
            let rho = s.exp();
            (shift(rho) - ux - chi(rho) * rho * g) * rho.powf(-alpha)
        },
        q.r0.ln(),
        0.0,
        abs_tol,
        q.rel_tol,
        4000,
    )?
    .value;

    // Shell [1, r_max] on decades.
    let mut outer = 0.0;
    let mut lo = 1.0;
    while lo < q.r_max {
        let hi = (10.0 * lo).min(q.r_max);
        outer += quad::adaptive(
            |rho| (shift(rho) - ux - chi(rho) * rho * g) * rho.powf(-1.0 - alpha),
            lo,
            hi,
            abs_tol,
            q.rel_tol,
            4000,
        )?
        .value;
        lo = hi;
    }

    let r = q.r_max;
    let comp_tail = if chi(2.0 * r) > 0.0 {
        // alpha > 1 here
        -g * r.powf(1.0 - alpha) / (alpha - 1.0)
    } else {
        0.0
    };
    let tail = if polynomial {
        // Linear u: the integrand is (1 - chi) rho g, odd in w, dropped as a
        // principal value.
        0.0
    } else {
        (far - ux) * r.powf(-alpha) / alpha + comp_tail
    };
    Ok((core + inner + outer + tail, core))
}

/// `f` convolved with the bump kernel of radius `eps`.
pub fn mollify(f: &TestFunction, eps: f64) -> Result<TestFunction> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            range: "(0, 1)",
        });
    }
    Ok(TestFunction::Mollified {
        inner: Box::new(f.clone()),
        eps,
    })
}

/// Monte Carlo estimate of `(E u(X_h) - u(x)) / h - L u(x)` with `X` the
/// Euler scheme started at `x` and run with 64 steps over `[0, h]`.
pub fn dynkin_residual(
    spec: &ModelSpec,
    u: &TestFunction,
    x: &[f64],
    h: f64,
    n_paths: usize,
    master_seed: u64,
    quad: &QuadratureSpec,
) -> Result<McEstimate> {
    if !(h > 0.0 && h <= spec.horizon) {
        return Err(Error::Domain {
            name: "h",
            value: h,
            range: "(0, T]",
        });
    }
    let mut started = spec.clone();
    started.x0 = x.to_vec();
    let model = Model::new(started)?;
    let lu = apply_generator(&model, u, x, quad)?.value;
    let steps = 64;
    let scheme = EulerScheme::new(model, h / steps as f64, EulerOptions::default())?;
    let ux = u.value(x);
    let vals = scheme.simulate_coupled(h, &[steps], n_paths, master_seed, |y| u.value(y))?;
    let samples: Vec<f64> = vals[0].iter().map(|v| (v - ux) / h - lu).collect();
    Ok(McEstimate::from_samples(&samples))
}
