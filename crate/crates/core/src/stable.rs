//! Samplers for the stable driving noise.
//!
//! The unit law throughout is the symmetric stable law with characteristic
//! function `exp(-|xi|^alpha)`. The driver of the SDE has Levy measure
//! `dy / |y|^{d+alpha}`, whose time-`t` increment is `(K t)^{1/alpha}` times a
//! unit draw with `K = scale_to_paper_intensity(alpha, d)`; that conversion
//! happens in one place only.

use crate::error::{check_alpha, Error, Result};
use crate::linalg;
use crate::quad::{gamma, sphere_area, SphereRule};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Smallest stability index accepted by configuration validation.
pub const MIN_CONFIG_ALPHA: f64 = 0.2;
pub const DEFAULT_JUMP_BUDGET: f64 = 1e6;

/// How the stable part enters the scheme, by stability index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRegime {
    /// alpha in (0, 1): uncompensated jumps, no drift.
    Sub1,
    /// alpha = 1: drift, p0 on |y| > 1 and q0 on |y| <= 1.
    Eq1,
    /// alpha in (1, 2): drift and fully compensated jumps.
    Super1,
    /// alpha = 2: Brownian motion.
    Gaussian,
}

impl AlphaRegime {
    pub fn of(alpha: f64) -> Self {
        if alpha >= 2.0 {
            Self::Gaussian
        } else if alpha > 1.0 {
            Self::Super1
        } else if alpha == 1.0 {
            Self::Eq1
        } else {
            Self::Sub1
        }
    }
}

/// A positive function on the unit sphere, evaluated at unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SphereFunction {
    Constant {
        value: f64,
    },
    /// `base + (slope, w)`.
    Affine {
        base: f64,
        slope: Vec<f64>,
    },
    /// `base + amp * w[axis]^2`, even in `w`.
    Quadratic {
        base: f64,
        amp: f64,
        axis: usize,
    },
    /// The pushed-forward density of jumps `c h(w) y` under the intensity
    /// `dy / |y|^{d+alpha}`:
    /// `|det c|^{-1} |c^{-1} w|^{-d-alpha} m(c^{-1} w / |c^{-1} w|)` with `m = h^alpha`.
    Pushforward {
        map: Vec<f64>,
        modulation: Box<SphereFunction>,
        alpha: f64,
    },
}

impl SphereFunction {
    pub fn one() -> Self {
        Self::Constant { value: 1.0 }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Affine { base, slope } => base + linalg::dot(slope, w),
            Self::Quadratic { base, amp, axis } => base + amp * w[*axis] * w[*axis],
            Self::Pushforward {
                map,
                modulation,
                alpha,
            } => pushforward_density(map, modulation, *alpha, w),
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Self::Constant { value } if *value == 1.0)
    }

    /// Whether `f(-w) = f(w)` holds identically.
    pub fn is_even(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::Quadratic { .. } => true,
            Self::Affine { slope, .. } => slope.iter().all(|s| *s == 0.0),
            Self::Pushforward { modulation, .. } => modulation.is_even(),
        }
    }

    /// Upper bound of the function over the sphere.
    pub fn upper_bound(&self, dim: usize) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Affine { base, slope } => base + linalg::norm(slope),
            Self::Quadratic { base, amp, .. } => base + amp.max(0.0),
            Self::Pushforward { .. } => {
                let rule = SphereRule::new(dim, 720).expect("dimension checked by caller");
                let max = rule.iter().map(|(w, _)| self.eval(w)).fold(0.0, f64::max);
                1.1 * max
            }
        }
    }

    /// Lower bound of the function over the sphere.
    pub fn lower_bound(&self, dim: usize) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Affine { base, slope } => base - linalg::norm(slope),
            Self::Quadratic { base, amp, .. } => base + amp.min(0.0),
            Self::Pushforward { .. } => {
                let rule = SphereRule::new(dim, 720).expect("dimension checked by caller");
                rule.iter()
                    .map(|(w, _)| self.eval(w))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            Self::Affine { slope, .. } if slope.len() != dim => Err(Error::InvalidParameter(
                format!("affine sphere function has {} slopes for dimension {dim}", slope.len()),
            )),
            Self::Quadratic { axis, .. } if *axis >= dim => Err(Error::InvalidParameter(format!(
                "quadratic sphere function axis {axis} >= dimension {dim}"
            ))),
            Self::Pushforward { map, .. } if map.len() != dim * dim => Err(
                Error::InvalidParameter("pushforward map must be d x d".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Density on the sphere of the jumps `c h(w) y`, by change of variables.
pub fn pushforward_density(map: &[f64], modulation: &SphereFunction, alpha: f64, w: &[f64]) -> f64 {
    let d = w.len();
    if d == 2 {
        let det = map[0] * map[3] - map[1] * map[2];
        if det == 0.0 {
            return f64::NAN;
        }
        let v = [
            (map[3] * w[0] - map[1] * w[1]) / det,
            (-map[2] * w[0] + map[0] * w[1]) / det,
        ];
        let r = v[0].hypot(v[1]);
        let m = modulation.eval(&[v[0] / r, v[1] / r]).powf(alpha);
        return m / det.abs() / r.powf(2.0 + alpha);
    }
    let inv = match linalg::inverse(map, d) {
        Some(inv) => inv,
        None => return f64::NAN,
    };
    let mut v = vec![0.0; d];
    linalg::mat_vec(&inv, w, &mut v);
    let r = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= r);
    let m = modulation.eval(&v).powf(alpha);
    m / linalg::det(map, d).abs() / r.powf(d as f64 + alpha)
}

/// Parameters of a (possibly anisotropic) stable driving law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
    pub alpha: f64,
    pub dim: usize,
    /// Weight of jump directions on the sphere; 1 for the isotropic law.
    pub directional_density: SphereFunction,
    /// Jumps with `|y| <= cut_eps` are not sampled individually.
    pub cut_eps: f64,
    pub small_jumps: SmallJumps,
    pub jump_budget: f64,
}

/// Treatment of the jumps below the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumps {
    /// Dropped; only their mean is restored through the compensator.
    #[default]
    Drop,
    /// Replaced by a Gaussian with the small-jump covariance.
    Gaussian,
}

impl StableLaw {
    pub fn isotropic(alpha: f64, dim: usize, cut_eps: f64) -> Self {
        Self {
            alpha,
            dim,
            directional_density: SphereFunction::one(),
            cut_eps,
            small_jumps: SmallJumps::Drop,
            jump_budget: DEFAULT_JUMP_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
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
        if !(self.cut_eps > 0.0) {
            return Err(Error::Domain {
                name: "cut_eps",
                value: self.cut_eps,
                range: "(0, inf)",
            });
        }
        self.directional_density.check(self.dim)?;
        if self.alpha < 2.0 {
            if self.directional_density.lower_bound(self.dim) < 0.0 {
                return Err(Error::InvalidParameter(
                    "directional density must be non-negative".into(),
                ));
            }
            if !(self.directional_density.upper_bound(self.dim) > 0.0) {
                return Err(Error::InvalidParameter(
                    "directional density vanishes on the whole sphere".into(),
                ));
            }
            if self.alpha == 1.0 && !self.directional_density.is_even() {
                return Err(Error::InvalidParameter(
                    "alpha = 1 requires an even directional density m(-w) = m(w)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Default truncation radius for a step of length `dt`: the scale of one step.
pub fn default_cut_eps(dt: f64, alpha: f64) -> f64 {
    dt.powf(1.0 / alpha)
}

/// Chambers-Mallows-Stuck draw of the symmetric law with CF `exp(-|xi|^alpha)`.
pub fn cms_standard_stable(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(cms_unchecked(alpha, rng))
}

fn cms_unchecked(alpha: f64, rng: &mut RngStream) -> f64 {
    if alpha == 2.0 {
        return std::f64::consts::SQRT_2 * rng.normal();
    }
    let v = rng.uniform_range(-FRAC_PI_2, FRAC_PI_2);
    if alpha == 1.0 {
        return v.tan();
    }
    let w = rng.exp1();
    let cv = v.cos();
    (alpha * v).sin() / cv.powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable draw with Laplace transform `exp(-lambda^a)`, `a in (0, 1)`
/// (Kanter's representation).
pub fn positive_stable(a: f64, rng: &mut RngStream) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain {
            name: "alpha_half",
            value: a,
            range: "(0, 1)",
        });
    }
    Ok(positive_stable_unchecked(a, rng))
}

fn positive_stable_unchecked(a: f64, rng: &mut RngStream) -> f64 {
    let u = rng.uniform_range(0.0, PI);
    let e = rng.exp1();
    let s = (a * u).sin() / u.sin().powf(1.0 / a)
        * (((1.0 - a) * u).sin() / e).powf((1.0 - a) / a);
    s.max(f64::MIN_POSITIVE)
}

/// Isotropic vector with CF `exp(-|xi|^alpha)`, written into `out`.
///
/// For `alpha < 2` this is the sub-Gaussian construction `sqrt(2 S) G` with
/// `S` positive `alpha/2`-stable; for `alpha = 2` it is `sqrt(2) G`.
pub fn isotropic_stable_vector_into(alpha: f64, rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
    check_alpha(alpha)?;
    if out.is_empty() {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    isotropic_unchecked(alpha, rng, out);
    Ok(())
}

pub(crate) fn isotropic_unchecked(alpha: f64, rng: &mut RngStream, out: &mut [f64]) {
    let scale = if alpha == 2.0 {
        std::f64::consts::SQRT_2
    } else {
        (2.0 * positive_stable_unchecked(0.5 * alpha, rng)).sqrt()
    };
    for v in out.iter_mut() {
        *v = scale * rng.normal();
    }
}

pub fn isotropic_stable_vector(alpha: f64, dim: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    isotropic_stable_vector_into(alpha, rng, &mut out)?;
    Ok(out)
}

/// The constant `N(alpha)` with
/// `int_0^inf (e^{i r s} - 1 - i r s chi) r^{-1-alpha} dr = -N |s|^alpha (1 - i ...)`:
/// `N = Gamma(2 - alpha) cos(pi alpha / 2) / (alpha (1 - alpha))`, `N(1) = pi / 2`.
pub fn stable_norm_constant(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-9 {
        return FRAC_PI_2;
    }
    gamma(2.0 - alpha) * (FRAC_PI_2 * alpha).cos() / (alpha * (1.0 - alpha))
}

/// `int_{S^{d-1}} |w_1|^alpha dmu(w) = 2 pi^{(d-1)/2} Gamma((alpha+1)/2) / Gamma((d+alpha)/2)`.
pub fn sphere_abs_moment(alpha: f64, dim: usize) -> f64 {
    2.0 * PI.powf(0.5 * (dim as f64 - 1.0)) * gamma(0.5 * (alpha + 1.0))
        / gamma(0.5 * (dim as f64 + alpha))
}

/// `K(d, alpha)` such that the Levy measure `dy / |y|^{d+alpha}` has symbol
/// `-K |xi|^alpha`.
pub fn scale_to_paper_intensity(alpha: f64, dim: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            range: "(0, 2) (alpha = 2 is the Gaussian case)",
        });
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(stable_norm_constant(alpha) * sphere_abs_moment(alpha, dim))
}

/// Sphere moments of a (density, modulation) pair used by the truncated sampler.
#[derive(Debug, Clone)]
pub struct JumpGeometry {
    pub dim: usize,
    /// `int m dmu`
    pub mass: f64,
    /// `int m h w dmu`
    pub first: Vec<f64>,
    /// `int m h^2 w w^T dmu`, row-major.
    pub second: Vec<f64>,
    pub sup_density: f64,
}

impl JumpGeometry {
    pub fn new(density: &SphereFunction, modulation: &SphereFunction, dim: usize) -> Result<Self> {
        density.check(dim)?;
        modulation.check(dim)?;
        let rule = SphereRule::new(dim, if dim == 3 { 96 } else { 1024 })?;
        let mut mass = 0.0;
        let mut first = vec![0.0; dim];
        let mut second = vec![0.0; dim * dim];
        for (w, wt) in rule.iter() {
            let m = density.eval(w);
            let h = modulation.eval(w);
            mass += wt * m;
            for i in 0..dim {
                first[i] += wt * m * h * w[i];
                for j in 0..dim {
                    second[i * dim + j] += wt * m * h * h * w[i] * w[j];
                }
            }
        }
        if density.is_unit() {
            mass = sphere_area(dim);
        }
        if density.is_even() && modulation.is_even() {
            first.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(Self {
            dim,
            mass,
            first,
            second,
            sup_density: density.upper_bound(dim),
        })
    }
}

/// Result of one truncated stable step: the sum of sampled jumps and the
/// drift the caller adds to it.
#[derive(Debug, Clone, PartialEq)]
pub struct StableIncrement {
    pub jump_sum: Vec<f64>,
    pub compensator: Vec<f64>,
}

/// Truncated compound-Poisson sampler for the direction-modulated driver.
#[derive(Debug, Clone)]
pub struct AnisotropicSampler {
    law: StableLaw,
    modulation: SphereFunction,
    geometry: JumpGeometry,
}

impl AnisotropicSampler {
    pub fn new(law: StableLaw, modulation: SphereFunction) -> Result<Self> {
        law.validate()?;
        if law.alpha >= 2.0 {
            return Err(Error::InvalidParameter(
                "the truncated jump sampler needs alpha < 2".into(),
            ));
        }
        let geometry = JumpGeometry::new(&law.directional_density, &modulation, law.dim)?;
        Ok(Self {
            law,
            modulation,
            geometry,
        })
    }

    pub fn law(&self) -> &StableLaw {
        &self.law
    }

    pub fn geometry(&self) -> &JumpGeometry {
        &self.geometry
    }

    /// Truncation radius actually used for a regime (clamped to 1 at alpha = 1).
    pub fn effective_cut(&self, regime: AlphaRegime) -> f64 {
        match regime {
            AlphaRegime::Eq1 => self.law.cut_eps.min(1.0),
            _ => self.law.cut_eps,
        }
    }

    /// Jump intensity above `eps`: `eps^{-alpha} / alpha * int m dmu`.
    pub fn jump_rate(&self, eps: f64) -> f64 {
        eps.powf(-self.law.alpha) / self.law.alpha * self.geometry.mass
    }

    /// Appends the raw jumps `y` (before the map `y -> c h(w) y`) of a step of
    /// length `dt` to `out`, returning the jump count.
    pub fn draw_raw(
        &self,
        dt: f64,
        regime: AlphaRegime,
        rng: &mut RngStream,
        out: &mut Vec<f64>,
    ) -> Result<usize> {
        let eps = self.effective_cut(regime);
        let mean = self.jump_rate(eps) * dt;
        if mean > self.law.jump_budget {
            return Err(Error::JumpBudget {
                expected: mean,
                budget: self.law.jump_budget,
            });
        }
        let count = rng.poisson(mean) as usize;
        let d = self.law.dim;
        let start = out.len();
        out.resize(start + count * d, 0.0);
        let isotropic = self.law.directional_density.is_unit();
        for k in 0..count {
            let slot = &mut out[start + k * d..start + (k + 1) * d];
            loop {
                rng.unit_sphere(slot);
                if isotropic
                    || rng.uniform_open() * self.geometry.sup_density
                        <= self.law.directional_density.eval(slot)
                {
                    break;
                }
            }
            let radius = eps * rng.uniform_open().powf(-1.0 / self.law.alpha);
            slot.iter_mut().for_each(|v| *v *= radius);
        }
        Ok(count)
    }

    /// Adds `sum_k c h(w_k) y_k` over raw jumps to `out`.
    pub fn map_jumps(&self, raw: &[f64], linear_map: &[f64], out: &mut [f64]) {
        let d = self.law.dim;
        let mut tmp = vec![0.0; d];
        let mut w = vec![0.0; d];
        for y in raw.chunks_exact(d) {
            let r = linalg::norm(y);
            w.iter_mut().zip(y).for_each(|(wi, yi)| *wi = yi / r);
            let h = self.modulation.eval(&w);
            linalg::mat_vec(linear_map, y, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += h * t);
        }
    }

    /// Drift added to the jump sum over a step of length `dt`.
    ///
    /// Super1: `-dt c eps^{1-a}/(a-1) v`; Eq1: `-dt c ln(1/eps) v`;
    /// Sub1: the mean of the dropped jumps `dt c eps^{1-a}/(1-a) v`, where
    /// `v = int m h w dmu`.
    pub fn compensator(&self, linear_map: &[f64], dt: f64, regime: AlphaRegime) -> Vec<f64> {
        let a = self.law.alpha;
        let eps = self.effective_cut(regime);
        let factor = match regime {
            AlphaRegime::Super1 => -eps.powf(1.0 - a) / (a - 1.0),
            AlphaRegime::Eq1 => -(1.0 / eps).ln(),
            AlphaRegime::Sub1 => eps.powf(1.0 - a) / (1.0 - a),
            AlphaRegime::Gaussian => 0.0,
        };
        let d = self.law.dim;
        let mut out = vec![0.0; d];
        if factor != 0.0 {
            linalg::mat_vec(linear_map, &self.geometry.first, &mut out);
            out.iter_mut().for_each(|v| *v *= dt * factor);
        }
        out
    }

    /// Lower Cholesky factor of the per-unit-time covariance of the jumps
    /// below the cut: `eps^{2-a}/(2-a) c M c^T`, `M = int m h^2 w w^T dmu`.
    pub fn small_jump_factor(&self, linear_map: &[f64], regime: AlphaRegime) -> Vec<f64> {
        let a = self.law.alpha;
        let d = self.law.dim;
        let eps = self.effective_cut(regime);
        let cm = linalg::mat_mul(linear_map, &self.geometry.second, d);
        let mut cov = linalg::mat_mul(&cm, &linalg::transpose(linear_map, d), d);
        let s = eps.powf(2.0 - a) / (2.0 - a);
        cov.iter_mut().for_each(|v| *v *= s);
        linalg::cholesky(&cov, d)
    }

    /// One step: jumps above the cut mapped through `c h(w)`, plus the regime
    /// compensator, with the optional Gaussian small-jump replacement folded
    /// into `jump_sum`.
    pub fn increment(
        &self,
        linear_map: &[f64],
        dt: f64,
        regime: AlphaRegime,
        rng: &mut RngStream,
    ) -> Result<StableIncrement> {
        if !(dt > 0.0) {
            return Err(Error::Domain {
                name: "dt",
                value: dt,
                range: "(0, inf)",
            });
        }
        let d = self.law.dim;
        if linear_map.len() != d * d {
            return Err(Error::InvalidParameter("linear map must be d x d".into()));
        }
        let mut raw = Vec::new();
        self.draw_raw(dt, regime, rng, &mut raw)?;
        let mut jump_sum = vec![0.0; d];
        self.map_jumps(&raw, linear_map, &mut jump_sum);
        if self.law.small_jumps == SmallJumps::Gaussian {
            let l = self.small_jump_factor(linear_map, regime);
            let g: Vec<f64> = (0..d).map(|_| rng.normal() * dt.sqrt()).collect();
            linalg::mat_vec_add(&l, &g, &mut jump_sum);
        }
        Ok(StableIncrement {
            jump_sum,
            compensator: self.compensator(linear_map, dt, regime),
        })
    }
}

/// One-shot form of [`AnisotropicSampler::increment`].
pub fn anisotropic_stable_increment(
    law: &StableLaw,
    modulation: &SphereFunction,
    linear_map: &[f64],
    dt: f64,
    regime: AlphaRegime,
    rng: &mut RngStream,
) -> Result<StableIncrement> {
    AnisotropicSampler::new(law.clone(), modulation.clone())?.increment(linear_map, dt, regime, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ecf_scalar, ecf_vector, ks_critical, ks_uniform};

    const N: usize = 100_000;

    fn draws(alpha: f64, seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed, 0);
        (0..N).map(|_| cms_standard_stable(alpha, &mut r).unwrap()).collect()
    }

    #[test]
    fn cms_gaussian_case_cf() {
        let xs = draws(2.0, 11);
        let (re, im) = ecf_scalar(&xs, 1.0);
        let tol = 3.0 / (N as f64).sqrt();
        assert!((re - (-1f64).exp()).abs() < tol, "re = {re}");
        assert!(im.abs() < tol);
    }

    #[test]
    fn cms_cauchy_median() {
        let mut xs = draws(1.0, 12);
        xs.sort_by(f64::total_cmp);
        let median = 0.5 * (xs[N / 2 - 1] + xs[N / 2]);
        assert!(median.abs() < 0.02, "median = {median}");
    }

    #[test]
    fn cms_cf_at_alpha_1_5() {
        let xs = draws(1.5, 13);
        let tol = 3.0 / (N as f64).sqrt();
        for xi in [0.5, 1.0, 2.0f64] {
            let (re, im) = ecf_scalar(&xs, xi);
            assert!((re - (-xi.powf(1.5)).exp()).abs() < tol, "xi={xi} re={re}");
            assert!(im.abs() < tol);
        }
    }

    #[test]
    fn cms_rejects_bad_alpha() {
        let mut r = RngStream::new(1, 1);
        for a in [0.0, -1.0, 2.5, f64::NAN] {
            assert!(matches!(cms_standard_stable(a, &mut r), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let mut r = RngStream::new(21, 0);
        let xs: Vec<f64> = (0..N).map(|_| positive_stable(0.5, &mut r).unwrap()).collect();
        let lt = xs.iter().map(|s| (-s).exp()).sum::<f64>() / N as f64;
        assert!((lt - (-1f64).exp()).abs() < 3.0 / (N as f64).sqrt(), "lt = {lt}");
    }

    #[test]
    fn positive_stable_is_positive() {
        let mut r = RngStream::new(22, 0);
        for _ in 0..N {
            assert!(positive_stable(0.75, &mut r).unwrap() > 0.0);
        }
        assert!(positive_stable(1.0, &mut r).is_err());
        assert!(positive_stable(0.0, &mut r).is_err());
    }

    #[test]
    fn positive_stable_half_tail_slope() {
        // The 1/2-stable law with Laplace transform exp(-sqrt(l)) is Levy with
        // P(S > s) = erf(1/(2 sqrt s)) ~ (pi s)^{-1/2}: log-log slope -1/2.
        let mut r = RngStream::new(23, 0);
        let mut xs: Vec<f64> = (0..N).map(|_| positive_stable(0.5, &mut r).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let tail = |s: f64| xs.iter().filter(|&&x| x > s).count() as f64 / N as f64;
        let pts: Vec<f64> = [10.0, 31.6, 100.0, 316.0, 1000.0f64].to_vec();
        let lx: Vec<f64> = pts.iter().map(|s| s.ln()).collect();
        let ly: Vec<f64> = pts.iter().map(|&s| tail(s).ln()).collect();
        let fit = crate::stats::weighted_line_fit(&lx, &ly, &[1.0; 5]).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.1, "slope = {}", fit.slope);
    }

    #[test]
    fn isotropic_gaussian_covariance() {
        let mut r = RngStream::new(31, 0);
        let d = 3;
        let mut cov = [0.0; 9];
        for _ in 0..N {
            let v = isotropic_stable_vector(2.0, d, &mut r).unwrap();
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += v[i] * v[j] / N as f64;
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 2.0 } else { 0.0 };
                assert!((cov[i * d + j] - target).abs() < 0.1, "cov[{i}{j}] = {}", cov[i * d + j]);
            }
        }
    }

    #[test]
    fn isotropic_angle_is_uniform() {
        for alpha in [0.6f64, 1.0, 1.5] {
            let mut r = RngStream::new(32, alpha.to_bits());
            let u: Vec<f64> = (0..20_000)
                .map(|_| {
                    let v = isotropic_stable_vector(alpha, 2, &mut r).unwrap();
                    (v[1].atan2(v[0]) + PI) / (2.0 * PI)
                })
                .collect();
            assert!(ks_uniform(&u) < ks_critical(u.len(), 0.01), "alpha={alpha}");
        }
    }

    #[test]
    fn isotropic_cf_alpha_1_2() {
        let mut r = RngStream::new(33, 0);
        let mut xs = Vec::with_capacity(2 * N);
        for _ in 0..N {
            xs.extend(isotropic_stable_vector(1.2, 2, &mut r).unwrap());
        }
        let (re, _) = ecf_vector(&xs, 2, &[1.0, 0.0]);
        assert!((re - (-1f64).exp()).abs() < 3.0 / (N as f64).sqrt(), "re = {re}");
    }

    #[test]
    fn intensity_scale_cauchy_line() {
        let k = scale_to_paper_intensity(1.0, 1).unwrap();
        assert!((k - PI).abs() < 1e-12);
        assert!(scale_to_paper_intensity(2.0, 1).is_err());
        for d in 1..4 {
            for a in [0.3, 0.9, 1.0, 1.1, 1.7, 1.99] {
                assert!(scale_to_paper_intensity(a, d).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn norm_constant_is_continuous_at_one() {
        let below = stable_norm_constant(1.0 - 1e-6);
        let above = stable_norm_constant(1.0 + 1e-6);
        assert!((below - FRAC_PI_2).abs() < 1e-5);
        assert!((above - FRAC_PI_2).abs() < 1e-5);
    }

    fn isotropic_sampler(alpha: f64, dim: usize, eps: f64) -> AnisotropicSampler {
        AnisotropicSampler::new(StableLaw::isotropic(alpha, dim, eps), SphereFunction::one()).unwrap()
    }

    #[test]
    fn truncated_isotropic_sum_has_zero_mean() {
        let s = isotropic_sampler(1.5, 2, 0.1);
        let id = linalg::identity(2);
        let mut r = RngStream::new(41, 0);
        let mut sums = [Vec::new(), Vec::new()];
        for _ in 0..N {
            let inc = s.increment(&id, 0.01, AlphaRegime::Super1, &mut r).unwrap();
            assert_eq!(inc.compensator, vec![0.0, 0.0]);
            sums[0].push(inc.jump_sum[0]);
            sums[1].push(inc.jump_sum[1]);
        }
        for c in &sums {
            let e = crate::stats::McEstimate::from_samples(c);
            assert!(e.mean.abs() < 3.0 * e.stderr, "{e:?}");
        }
    }

    #[test]
    fn poisson_count_matches_closed_form_rate() {
        let s = isotropic_sampler(1.5, 2, 0.1);
        let dt = 0.01;
        let expected = dt * 2.0 * PI * 0.1f64.powf(-1.5) / 1.5;
        assert!((s.jump_rate(0.1) * dt - expected).abs() < 1e-10);
        let mut r = RngStream::new(42, 0);
        let mut raw = Vec::new();
        let counts: Vec<f64> = (0..N)
            .map(|_| {
                raw.clear();
                s.draw_raw(dt, AlphaRegime::Super1, &mut r, &mut raw).unwrap() as f64
            })
            .collect();
        let e = crate::stats::McEstimate::from_samples(&counts);
        assert!((e.mean - expected).abs() < 3.0 * e.stderr, "{e:?} vs {expected}");
    }

    #[test]
    fn jump_budget_is_enforced() {
        let mut law = StableLaw::isotropic(1.5, 2, 1e-6);
        law.jump_budget = 100.0;
        let s = AnisotropicSampler::new(law, SphereFunction::one()).unwrap();
        let mut r = RngStream::new(1, 1);
        let err = s.increment(&linalg::identity(2), 1.0, AlphaRegime::Super1, &mut r);
        assert!(matches!(err, Err(Error::JumpBudget { .. })));
    }

    #[test]
    fn alpha_one_rejects_odd_density() {
        let mut law = StableLaw::isotropic(1.0, 2, 0.1);
        law.directional_density = SphereFunction::Affine {
            base: 1.0,
            slope: vec![0.3, 0.0],
        };
        assert!(law.validate().is_err());
        law.alpha = 1.2;
        assert!(law.validate().is_ok());
    }

    #[test]
    fn compensator_cancels_mean_of_asymmetric_jumps() {
        // With a non-even modulation the raw jumps have a drift; adding the
        // super-1 compensator must restore a zero-mean increment.
        let h = SphereFunction::Affine {
            base: 1.0,
            slope: vec![0.4, 0.0],
        };
        let s = AnisotropicSampler::new(StableLaw::isotropic(1.6, 2, 0.2), h).unwrap();
        let id = linalg::identity(2);
        let mut r = RngStream::new(43, 0);
        let xs: Vec<f64> = (0..N)
            .map(|_| {
                let inc = s.increment(&id, 0.05, AlphaRegime::Super1, &mut r).unwrap();
                inc.jump_sum[0] + inc.compensator[0]
            })
            .collect();
        let e = crate::stats::McEstimate::from_samples(&xs);
        assert!(e.mean.abs() < 3.0 * e.stderr, "{e:?}");
        assert!(s.compensator(&id, 0.05, AlphaRegime::Super1)[0] < 0.0);
    }

    #[test]
    fn directional_density_rejection_sampling() {
        // m(w) = 1 + 0.8 w_1^2 on the circle: E w_1^2 = (pi + 0.8 * 3pi/4) / (2pi + 0.8 pi).
        let mut law = StableLaw::isotropic(1.5, 2, 1.0);
        law.directional_density = SphereFunction::Quadratic {
            base: 1.0,
            amp: 0.8,
            axis: 0,
        };
        let s = AnisotropicSampler::new(law, SphereFunction::one()).unwrap();
        let mut r = RngStream::new(44, 0);
        let mut raw = Vec::new();
        while raw.len() < 2 * 50_000 {
            s.draw_raw(10.0, AlphaRegime::Super1, &mut r, &mut raw).unwrap();
        }
        let w1sq: Vec<f64> = raw
            .chunks_exact(2)
            .map(|y| y[0] * y[0] / (y[0] * y[0] + y[1] * y[1]))
            .collect();
        let e = crate::stats::McEstimate::from_samples(&w1sq);
        let exact = (PI + 0.8 * 0.75 * PI) / (2.0 * PI + 0.8 * PI);
        assert!((e.mean - exact).abs() < 3.0 * e.stderr, "{e:?} vs {exact}");
    }

    #[test]
    fn pushforward_of_identity_is_modulation_power() {
        let h = SphereFunction::Affine {
            base: 1.0,
            slope: vec![0.3, -0.2],
        };
        let pf = SphereFunction::Pushforward {
            map: linalg::identity(2),
            modulation: Box::new(h.clone()),
            alpha: 1.3,
        };
        for k in 0..8 {
            let t = k as f64 * 0.7;
            let w = [t.cos(), t.sin()];
            assert!((pf.eval(&w) - h.eval(&w).powf(1.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_of_scalar_map() {
        // c = s I: m~ = s^{-d} s^{d + alpha} = s^alpha.
        let pf = SphereFunction::Pushforward {
            map: vec![2.0, 0.0, 0.0, 2.0],
            modulation: Box::new(SphereFunction::one()),
            alpha: 1.5,
        };
        assert!((pf.eval(&[0.6, 0.8]) - 2f64.powf(1.5)).abs() < 1e-12);
    }
}
