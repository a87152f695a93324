//! Declarative description of the SDE, its regime-dependent drift and the
//! built-in coefficient families.

use crate::error::{check_alpha, Error, Result, ValidationIssue};
use crate::fields::{check_weierstrass, MatrixField, ScalarField, VectorField};
use crate::levy::{LevyComponent, LevySampler, MarkMeasure, MarkTransform};
use crate::linalg;
use crate::quad::SphereRule;
use crate::stable::{pushforward_density, scale_to_paper_intensity, AlphaRegime, SphereFunction, MIN_CONFIG_ALPHA};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn identity_field() -> MatrixField {
    MatrixField::identity()
}

fn zero_field() -> VectorField {
    VectorField::Zero
}

/// Full description of the SDE
/// `dX = a_alpha dt + b_alpha dW + int c h y p0(dt, dy) + int l p(dt, dv)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub alpha: f64,
    pub dim: usize,
    pub horizon: f64,
    pub x0: Vec<f64>,
    /// `a`, used for alpha in [1, 2].
    #[serde(default = "zero_field")]
    pub drift: VectorField,
    /// `b`, used for alpha = 2 only.
    #[serde(default = "identity_field")]
    pub diffusion: MatrixField,
    /// `c`, used for alpha < 2.
    #[serde(default = "identity_field")]
    pub jump_scale: MatrixField,
    /// `h_alpha(w)`, the radial modulation of stable jumps `y -> c h(y/|y|) y`.
    #[serde(default = "SphereFunction::one")]
    pub h_alpha: SphereFunction,
    #[serde(default)]
    pub levy: Option<LevyComponent>,
    /// Declared Hölder exponent of the coefficients; derived from the
    /// families when absent.
    #[serde(default)]
    pub holder_beta: Option<f64>,
}

impl ModelSpec {
    pub fn regime(&self) -> AlphaRegime {
        AlphaRegime::of(self.alpha)
    }

    /// Hölder exponent used for rate prediction (infinite for smooth models).
    pub fn beta(&self) -> f64 {
        if let Some(b) = self.holder_beta {
            return b;
        }
        let mut beta = self.drift.holder_exponent();
        if self.alpha == 2.0 {
            beta = beta.min(self.diffusion.holder_exponent());
        } else {
            beta = beta.min(self.jump_scale.holder_exponent());
        }
        if let Some(l) = &self.levy {
            beta = beta.min(l.direction.holder_exponent());
        }
        beta
    }

    /// True when every coefficient is constant and the stable part is
    /// isotropic up to a constant factor.
    pub fn is_constant_isotropic(&self) -> bool {
        self.drift.is_constant()
            && self.diffusion.is_constant()
            && self.jump_scale.is_constant()
            && self.jump_scale.is_scalar()
            && matches!(self.h_alpha, SphereFunction::Constant { .. })
            && self.levy.is_none()
    }

    /// Structural checks: domains, dimensions and parameter ranges.
    pub fn check(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.alpha < MIN_CONFIG_ALPHA {
            return Err(Error::Domain {
                name: "alpha",
                value: self.alpha,
                range: "[0.2, 2] (indices below 0.2 are not supported)",
            });
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain {
                name: "horizon",
                value: self.horizon,
                range: "(0, inf)",
            });
        }
        if self.x0.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "x0 has {} entries for dimension {}",
                self.x0.len(),
                self.dim
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("x0 must be finite".into()));
        }
        self.drift.check(self.dim)?;
        self.diffusion.check(self.dim)?;
        self.jump_scale.check(self.dim)?;
        self.h_alpha.check(self.dim)?;
        if self.alpha < 2.0 {
            if self.dim > 3 && !matches!(self.h_alpha, SphereFunction::Constant { .. }) {
                return Err(Error::Unsupported(
                    "direction-dependent h_alpha beyond dimension 3".into(),
                ));
            }
            if !(self.h_alpha.lower_bound(self.dim) > 0.0) {
                return Err(Error::InvalidParameter("h_alpha must be positive on the sphere".into()));
            }
            if self.alpha == 1.0 && !self.h_alpha.is_even() {
                return Err(Error::InvalidParameter(
                    "alpha = 1 requires h_alpha(-w) = h_alpha(w)".into(),
                ));
            }
        }
        if let Some(b) = self.holder_beta {
            if !(b > 0.0) {
                return Err(Error::Domain {
                    name: "holder_beta",
                    value: b,
                    range: "(0, inf]",
                });
            }
        }
        if let Some(l) = &self.levy {
            l.direction.check(self.dim)?;
        }
        Ok(())
    }

    /// Probe-grid check of the non-degeneracy, boundedness, symmetry and
    /// moment assumptions. Every failure is reported with its probe point.
    pub fn validate(&self, probes: &ProbeGrid) -> Result<ValidationReport> {
        validate(self, probes)
    }
}

/// A validated, ready-to-evaluate model with its cached integrals.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    regime: AlphaRegime,
    levy: Option<LevySampler>,
    /// `int h(w) w dmu(w)`
    h_moment: Vec<f64>,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.check()?;
        let levy = spec.levy.clone().map(LevySampler::new).transpose()?;
        if let (Some(sampler), true) = (&levy, spec.alpha < 2.0) {
            let comp = sampler.component();
            comp.measure.small_alpha_moment(comp.transform, spec.alpha)?;
        }
        let h_moment = if spec.alpha < 2.0 {
            sphere_first_moment(&spec.h_alpha, spec.dim)?
        } else {
            vec![0.0; spec.dim]
        };
        Ok(Self {
            regime: spec.regime(),
            spec,
            levy,
            h_moment,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn regime(&self) -> AlphaRegime {
        self.regime
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn levy(&self) -> Option<&LevySampler> {
        self.levy.as_ref()
    }

    /// `int h(w) w dmu(w)`, zero when `h` is even.
    pub fn h_moment(&self) -> &[f64] {
        &self.h_moment
    }

    /// The drift `a_alpha(x)` of the SDE written with the regime's
    /// compensation convention.
    pub fn effective_drift(&self, x: &[f64]) -> Vec<f64> {
        let d = self.spec.dim;
        let a = self.spec.alpha;
        let mut out = vec![0.0; d];
        let c = self.spec.jump_scale.eval(x);
        let mut cv = vec![0.0; d];
        linalg::mat_vec(&c, &self.h_moment, &mut cv);
        match self.regime {
            AlphaRegime::Sub1 => {
                // int_{|y| <= 1} c h y dy / |y|^{d+a} = c v / (1 - a)
                out.iter_mut().zip(&cv).for_each(|(o, v)| *o = v / (1.0 - a));
            }
            AlphaRegime::Eq1 => self.spec.drift.eval_into(x, &mut out),
            AlphaRegime::Super1 => {
                self.spec.drift.eval_into(x, &mut out);
                // minus int_{|y| > 1} c h y dy / |y|^{d+a} = c v / (a - 1)
                out.iter_mut().zip(&cv).for_each(|(o, v)| *o -= v / (a - 1.0));
            }
            AlphaRegime::Gaussian => self.spec.drift.eval_into(x, &mut out),
        }
        if let (Some(l), AlphaRegime::Sub1 | AlphaRegime::Eq1) = (&self.levy, self.regime) {
            let cl = l.component().direction.eval(x);
            let m = l.u1_mean_g();
            out.iter_mut().zip(&cl).for_each(|(o, c)| *o += c * m);
        }
        out
    }

    /// The jump density `m~(x, w)` on the sphere of the jumps `c(x) h(w) y`.
    pub fn jump_density(&self, x: &[f64], w: &[f64]) -> f64 {
        let c = self.spec.jump_scale.eval(x);
        pushforward_density(&c, &self.spec.h_alpha, self.spec.alpha, w)
    }

    /// `K(d, alpha)` of the driver; 0 at alpha = 2.
    pub fn intensity_constant(&self) -> f64 {
        if self.spec.alpha < 2.0 {
            scale_to_paper_intensity(self.spec.alpha, self.spec.dim).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    }
}

/// `a_alpha(x)` for a model described by `spec`.
pub fn effective_drift_a_alpha(spec: &ModelSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.dim {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates for dimension {}",
            x.len(),
            spec.dim
        )));
    }
    Ok(Model::new(spec.clone())?.effective_drift(x))
}

/// `int h(w) w dmu(w)` with sphere refinement until the relative change is
/// below 1e-6.
fn sphere_first_moment(h: &SphereFunction, dim: usize) -> Result<Vec<f64>> {
    if h.is_even() || dim > 3 {
        return Ok(vec![0.0; dim]);
    }
    let moment = |res: usize| -> Result<Vec<f64>> {
        let rule = SphereRule::new(dim, res)?;
        let mut v = vec![0.0; dim];
        for (w, wt) in rule.iter() {
            let hv = h.eval(w);
            v.iter_mut().zip(w).for_each(|(v, w)| *v += wt * hv * w);
        }
        Ok(v)
    };
    let mut res = if dim == 3 { 16 } else { 64 };
    let mut prev = moment(res)?;
    for _ in 0..8 {
        res *= 2;
        let next = moment(res)?;
        let scale = linalg::norm(&next).max(1e-300);
        let diff: Vec<f64> = next.iter().zip(&prev).map(|(a, b)| a - b).collect();
        if linalg::norm(&diff) <= 1e-6 * scale || linalg::norm(&next) < 1e-14 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "first sphere moment of h_alpha did not settle at resolution {res}"
    )))
}

/// Constructs `x -> 1 + amplitude * sum_{k=0}^{levels} 2^{-beta k} cos(2^k x_1)`.
pub fn weierstrass_coefficient(beta: f64, amplitude: f64, levels: u32) -> Result<ScalarField> {
    check_weierstrass(beta, amplitude, levels)?;
    Ok(ScalarField::Weierstrass {
        scale: 1.0,
        beta,
        amplitude,
        levels,
        axis: 0,
    })
}

/// Deterministic probe set for [`ModelSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeGrid {
    /// Points are drawn from `[-half_width, half_width]^d`.
    pub half_width: f64,
    pub n_points: usize,
    pub n_directions: usize,
    /// Required lower bound on the non-degeneracy constant; any positive
    /// value passes when absent.
    pub declared_mu: Option<f64>,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            n_points: 256,
            n_directions: 64,
            declared_mu: None,
        }
    }
}

/// Outcome of a successful validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Smallest non-degeneracy value seen on the probe grid.
    pub mu: f64,
    pub mu_probe: Vec<f64>,
    pub n_points: usize,
    pub n_directions: usize,
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in `[-h, h]^d`.
pub fn halton_points(dim: usize, n: usize, half_width: f64) -> Vec<Vec<f64>> {
    (1..=n as u64)
        .map(|i| {
            (0..dim)
                .map(|k| half_width * (2.0 * radical_inverse(i, PRIMES[k % PRIMES.len()]) - 1.0))
                .collect()
        })
        .collect()
}

/// Unit directions covering the half sphere (`xi` and `-xi` give the same
/// quadratic and absolute-moment values).
pub fn probe_directions(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0]],
        2 => (0..n)
            .map(|k| {
                let th = PI * k as f64 / n as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on S^2, padded with zeros in higher dimensions.
            let golden = PI * (3.0 - 5f64.sqrt());
            let mut dirs: Vec<Vec<f64>> = (0..n)
                .map(|k| {
                    let z = 1.0 - (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = r * th.cos();
                    v[1] = r * th.sin();
                    v[2] = z;
                    v
                })
                .collect();
            for axis in 3..dim {
                let mut v = vec![0.0; dim];
                v[axis] = 1.0;
                dirs.push(v);
            }
            dirs
        }
    }
}

fn issue(assumption: &str, message: String, probe: Option<&[f64]>) -> ValidationIssue {
    ValidationIssue {
        assumption: assumption.into(),
        message,
        probe: probe.map(|p| p.to_vec()),
    }
}

fn validate(spec: &ModelSpec, probes: &ProbeGrid) -> Result<ValidationReport> {
    if let Err(e) = spec.check() {
        return Err(Error::Validation(vec![issue("structure", e.to_string(), None)]));
    }
    let d = spec.dim;
    let mut issues = Vec::new();
    let points = halton_points(d, probes.n_points, probes.half_width);
    let dirs = probe_directions(d, probes.n_directions);
    let threshold = probes.declared_mu.unwrap_or(0.0);
    let mut mu = f64::INFINITY;
    let mut mu_probe = spec.x0.clone();

    let rule = if spec.alpha < 2.0 && d <= 3 {
        Some(SphereRule::new(d, if d == 3 { 24 } else { 256 })?)
    } else {
        None
    };

    for x in &points {
        let a = spec.drift.eval(x);
        if a.iter().any(|v| !v.is_finite()) {
            issues.push(issue("boundedness", "drift is not finite".into(), Some(x)));
        }
        let mu_x = if spec.alpha == 2.0 {
            let b = spec.diffusion.eval(x);
            if b.iter().any(|v| !v.is_finite()) {
                issues.push(issue("boundedness", "diffusion is not finite".into(), Some(x)));
                continue;
            }
            let bb = linalg::mat_mul(&b, &linalg::transpose(&b, d), d);
            let mut best = f64::INFINITY;
            let mut tmp = vec![0.0; d];
            for xi in &dirs {
                linalg::mat_vec(&bb, xi, &mut tmp);
                best = best.min(linalg::dot(&tmp, xi));
            }
            best
        } else {
            let c = spec.jump_scale.eval(x);
            if c.iter().any(|v| !v.is_finite()) {
                issues.push(issue("boundedness", "jump scale is not finite".into(), Some(x)));
                continue;
            }
            let det = linalg::det(&c, d);
            if !(det.abs() > 1e-10) {
                issues.push(issue(
                    "A2 non-degeneracy",
                    format!("|det c(x)| = {:.3e}", det.abs()),
                    Some(x),
                ));
                continue;
            }
            match &rule {
                Some(rule) => {
                    let dens: Vec<(Vec<f64>, f64)> = rule
                        .iter()
                        .map(|(w, wt)| {
                            (w.to_vec(), wt * pushforward_density(&c, &spec.h_alpha, spec.alpha, w))
                        })
                        .collect();
                    let mut best = f64::INFINITY;
                    for xi in &dirs {
                        let v: f64 = dens
                            .iter()
                            .map(|(w, m)| m * linalg::dot(w, xi).abs().powf(spec.alpha))
                            .sum();
                        best = best.min(v);
                    }
                    best
                }
                // Constant h in high dimension: the integral is
                // |det c|^{-1} h^alpha int |(c^T xi, w)|^alpha ... bounded below by
                // the smallest singular direction; report |det c| as the proxy.
                None => det.abs(),
            }
        };
        if !mu_x.is_finite() {
            issues.push(issue("boundedness", "non-degeneracy integral is not finite".into(), Some(x)));
            continue;
        }
        if mu_x < mu {
            mu = mu_x;
            mu_probe = x.clone();
        }
        if mu_x <= threshold || mu_x <= 0.0 {
            issues.push(issue(
                "A1 non-degeneracy",
                format!("non-degeneracy value {mu_x:.4e} below the required {threshold:.4e}"),
                Some(x),
            ));
        }
    }

    if spec.alpha == 1.0 && !spec.h_alpha.is_even() {
        issues.push(issue("alpha-1 symmetry", "m_1(-w) != m_1(w)".into(), None));
    }
    if let Some(l) = &spec.levy {
        match LevySampler::new(l.clone()) {
            Ok(_) => {
                if spec.alpha < 2.0 {
                    if let Err(e) = l.measure.small_alpha_moment(l.transform, spec.alpha) {
                        issues.push(issue("Levy moment", e.to_string(), None));
                    }
                }
                for x in &points {
                    if l.direction.eval(x).iter().any(|v| !v.is_finite()) {
                        issues.push(issue("boundedness", "Levy direction is not finite".into(), Some(x)));
                        break;
                    }
                }
            }
            Err(e) => issues.push(issue("Levy measure", e.to_string(), None)),
        }
    }

    if issues.is_empty() {
        Ok(ValidationReport {
            mu,
            mu_probe,
            n_points: points.len(),
            n_directions: dirs.len(),
        })
    } else {
        Err(Error::Validation(issues))
    }
}

/// Built-in model families addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    IsotropicStableConst,
    WeierstrassC,
    LevyTempered,
    BrownianSmooth,
    Prop2LevyDriven,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::IsotropicStableConst,
        Preset::WeierstrassC,
        Preset::LevyTempered,
        Preset::BrownianSmooth,
        Preset::Prop2LevyDriven,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::IsotropicStableConst => "isotropic-stable-const",
            Self::WeierstrassC => "weierstrass-c",
            Self::LevyTempered => "levy-tempered",
            Self::BrownianSmooth => "brownian-smooth",
            Self::Prop2LevyDriven => "prop2-levy-driven",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Optional overrides of a preset's parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    pub alpha: Option<f64>,
    pub dim: Option<usize>,
    pub beta: Option<f64>,
    pub horizon: Option<f64>,
    pub x0: Option<Vec<f64>>,
    /// Number of dyadic blocks in Weierstrass coefficients.
    pub levels: Option<u32>,
}

impl ModelSpec {
    pub fn preset(preset: Preset, p: &PresetParams) -> Result<Self> {
        let dim = p.dim.unwrap_or(1);
        let default_alpha = match preset {
            Preset::BrownianSmooth => 2.0,
            Preset::Prop2LevyDriven => 1.2,
            _ => 1.5,
        };
        let alpha = p.alpha.unwrap_or(default_alpha);
        let x0 = p.x0.clone().unwrap_or_else(|| vec![0.3; dim]);
        let horizon = p.horizon.unwrap_or(1.0);
        let levels = p.levels.unwrap_or(16);
        let mut spec = ModelSpec {
            alpha,
            dim,
            horizon,
            x0,
            drift: VectorField::Zero,
            diffusion: MatrixField::identity(),
            jump_scale: MatrixField::identity(),
            h_alpha: SphereFunction::one(),
            levy: None,
            holder_beta: None,
        };
        match preset {
            Preset::IsotropicStableConst => {}
            Preset::WeierstrassC => {
                let beta = p.beta.unwrap_or(0.75);
                let field = ScalarField::Weierstrass {
                    scale: 1.0,
                    beta,
                    amplitude: 0.25,
                    levels,
                    axis: 0,
                };
                spec.jump_scale = MatrixField::ScaledIdentity {
                    factor: field.clone(),
                };
                if alpha == 2.0 {
                    spec.diffusion = MatrixField::ScaledIdentity { factor: field };
                }
                spec.holder_beta = Some(beta);
            }
            Preset::LevyTempered => {
                spec.levy = Some(LevyComponent {
                    measure: MarkMeasure::TemperedStable {
                        c_pos: 1.0,
                        c_neg: 0.5,
                        lambda: 1.0,
                        index: 0.5 * alpha.min(1.0),
                    },
                    transform: MarkTransform::Identity,
                    direction: VectorField::Components {
                        fields: (0..dim)
                            .map(|i| ScalarField::Cosine {
                                base: 0.5,
                                amp: 0.2,
                                freq: 1.0,
                                axis: i,
                            })
                            .collect(),
                    },
                    small_cut: None,
                });
            }
            Preset::BrownianSmooth => {
                spec.drift = VectorField::Components {
                    fields: (0..dim)
                        .map(|i| ScalarField::Sine {
                            base: 0.0,
                            amp: 0.3,
                            freq: 1.0,
                            axis: i,
                        })
                        .collect(),
                };
                let b = MatrixField::Diagonal {
                    fields: (0..dim)
                        .map(|i| ScalarField::Cosine {
                            base: 1.0,
                            amp: 0.3,
                            freq: 1.0,
                            axis: i,
                        })
                        .collect(),
                };
                spec.diffusion = b.clone();
                spec.jump_scale = b;
            }
            Preset::Prop2LevyDriven => {
                let beta = p.beta.unwrap_or(0.75);
                spec.levy = Some(LevyComponent {
                    measure: MarkMeasure::TemperedStable {
                        c_pos: 1.0,
                        c_neg: 1.0,
                        lambda: 1.0,
                        index: 0.5 * alpha.min(1.0),
                    },
                    transform: MarkTransform::Identity,
                    direction: VectorField::Components {
                        fields: (0..dim)
                            .map(|i| ScalarField::Weierstrass {
                                scale: 0.5,
                                beta,
                                amplitude: 0.25,
                                levels,
                                axis: i,
                            })
                            .collect(),
                    },
                    small_cut: None,
                });
                spec.holder_beta = Some(beta);
            }
        }
        spec.check()?;
        Ok(spec)
    }
}
