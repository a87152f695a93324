//! The subordinated Levy part: point and martingale integrals of
//! `l(x, v) = C(x) g(v)` against a mark measure `pi` on the real line.
//!
//! Marks split into `U1 = {|v| <= 1}` and its complement. The complement has
//! finite mass and is sampled exactly; on `U1` only marks with
//! `|v| > small_cut` are sampled and the rest is accounted for in the mean.

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::quad;
use crate::rng::RngStream;
use crate::stable::AlphaRegime;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: f64,
    pub weight: f64,
}

/// Mark measure `pi` on `R \ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MarkMeasure {
    /// Finitely many weighted atoms.
    Atomic { atoms: Vec<Atom> },
    /// `c_pos e^{-lambda v} v^{-1-index} dv` on `v > 0`, mirrored with `c_neg`.
    TemperedStable {
        c_pos: f64,
        c_neg: f64,
        lambda: f64,
        index: f64,
    },
}

/// The mark transform `g` in `l(x, v) = C(x) g(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarkTransform {
    #[default]
    Identity,
    /// `sign(v) |v|^power`
    SignedPower { power: f64 },
}

impl MarkTransform {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Self::Identity => v,
            Self::SignedPower { power } => v.signum() * v.abs().powf(power),
        }
    }

    fn power(&self) -> f64 {
        match *self {
            Self::Identity => 1.0,
            Self::SignedPower { power } => power,
        }
    }
}

/// Description of the Levy component of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyComponent {
    pub measure: MarkMeasure,
    #[serde(default)]
    pub transform: MarkTransform,
    /// `C(x)` in `l(x, v) = C(x) g(v)`.
    pub direction: VectorField,
    /// Marks with `|v| <= small_cut` are not sampled. `None` picks the cut
    /// giving at most ten expected small jumps per unit of `dt`.
    #[serde(default)]
    pub small_cut: Option<f64>,
}

/// A half-open band of marks `lo < |v| <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Band {
    lo: f64,
    hi: f64,
}

const QUAD_TOL: f64 = 1e-11;

impl MarkMeasure {
    fn check(&self) -> Result<()> {
        match self {
            Self::Atomic { atoms } => {
                for a in atoms {
                    if !(a.weight >= 0.0 && a.weight.is_finite()) || a.mark == 0.0 || !a.mark.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "atom {a:?}: weight must be finite and >= 0, mark finite and non-zero"
                        )));
                    }
                }
                Ok(())
            }
            Self::TemperedStable {
                c_pos,
                c_neg,
                lambda,
                index,
            } => {
                if !(*c_pos >= 0.0 && *c_neg >= 0.0 && *lambda >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "tempered-stable needs c_pos, c_neg, lambda >= 0".into(),
                    ));
                }
                if !(*index > -1.0 && *index < 2.0) {
                    return Err(Error::Domain {
                        name: "index",
                        value: *index,
                        range: "(-1, 2)",
                    });
                }
                if *lambda == 0.0 && *index <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "untempered measure with index <= 0 has infinite mass outside U1".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Radial density of `|v|` per sign, `e^{-lambda r} r^{-1-index}`.
    fn radial(lambda: f64, index: f64, r: f64) -> f64 {
        (-lambda * r).exp() * r.powf(-1.0 - index)
    }

    /// `int_{band, both signs} f(v) pi(dv)`.
    fn integrate_band<F: Fn(f64) -> f64>(&self, band: Band, f: F) -> Result<f64> {
        match self {
            Self::Atomic { atoms } => Ok(atoms
                .iter()
                .filter(|a| a.mark.abs() > band.lo && a.mark.abs() <= band.hi)
                .map(|a| a.weight * f(a.mark))
                .sum()),
            Self::TemperedStable {
                c_pos,
                c_neg,
                lambda,
                index,
            } => {
                let g = |r: f64| {
                    let w = Self::radial(*lambda, *index, r);
                    if w == 0.0 {
                        return 0.0;
                    }
                    let mut s = 0.0;
                    if *c_pos > 0.0 {
                        s += c_pos * f(r);
                    }
                    if *c_neg > 0.0 {
                        s += c_neg * f(-r);
                    }
                    s * w
                };
                let value = if band.hi.is_infinite() {
                    quad::adaptive_semi_infinite(g, band.lo, QUAD_TOL, QUAD_TOL, 4000)?.value
                } else {
                    quad::adaptive(g, band.lo, band.hi, QUAD_TOL, QUAD_TOL, 4000)?.value
                };
                if !value.is_finite() {
                    return Err(Error::Quadrature(format!(
                        "mark integral over {band:?} is not finite"
                    )));
                }
                Ok(value)
            }
        }
    }

    /// `int_{|v| <= 1} |g(v)|^alpha pi(dv)`, finite iff the A-moment condition holds.
    pub fn small_alpha_moment(&self, transform: MarkTransform, alpha: f64) -> Result<f64> {
        if let Self::TemperedStable { index, .. } = self {
            if transform.power() * alpha <= *index {
                return Err(Error::InvalidParameter(format!(
                    "int_U1 |l|^alpha dpi diverges: power {} * alpha {alpha} <= index {index}",
                    transform.power()
                )));
            }
        }
        self.integrate_band(Band { lo: 0.0, hi: 1.0 }, |v| transform.apply(v).abs().powf(alpha))
    }

    fn is_symmetric(&self) -> bool {
        match self {
            Self::Atomic { atoms } => {
                let mut pos: Vec<(f64, f64)> = atoms
                    .iter()
                    .filter(|a| a.mark > 0.0)
                    .map(|a| (a.mark, a.weight))
                    .collect();
                let mut neg: Vec<(f64, f64)> = atoms
                    .iter()
                    .filter(|a| a.mark < 0.0)
                    .map(|a| (-a.mark, a.weight))
                    .collect();
                pos.sort_by(|a, b| a.0.total_cmp(&b.0));
                neg.sort_by(|a, b| a.0.total_cmp(&b.0));
                pos == neg
            }
            Self::TemperedStable { c_pos, c_neg, .. } => c_pos == c_neg,
        }
    }
}

/// Exact sampler of the marks in one band.
#[derive(Debug, Clone)]
struct BandSampler {
    band: Band,
    mass: f64,
    /// `int_band g dpi`
    mean_g: f64,
    /// Probability of a positive mark (tempered family).
    p_pos: f64,
    /// Cumulative weights (atomic family).
    cumulative: Vec<(f64, f64)>,
}

impl BandSampler {
    fn new(measure: &MarkMeasure, transform: MarkTransform, band: Band) -> Result<Self> {
        let mass = measure.integrate_band(band, |_| 1.0)?;
        let mean_g = measure.integrate_band(band, |v| transform.apply(v))?;
        let mut cumulative = Vec::new();
        let mut p_pos = 0.0;
        match measure {
            MarkMeasure::Atomic { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    if a.mark.abs() > band.lo && a.mark.abs() <= band.hi && a.weight > 0.0 {
                        acc += a.weight;
                        cumulative.push((acc, a.mark));
                    }
                }
            }
            MarkMeasure::TemperedStable { c_pos, c_neg, .. } => {
                let total = c_pos + c_neg;
                p_pos = if total > 0.0 { c_pos / total } else { 0.0 };
            }
        }
        Ok(Self {
            band,
            mass,
            mean_g,
            p_pos,
            cumulative,
        })
    }

    /// Sum of `g(v)` over the marks falling in a window of length `dt`.
    fn draw_sum(&self, measure: &MarkMeasure, transform: MarkTransform, dt: f64, rng: &mut RngStream) -> f64 {
        let n = rng.poisson(self.mass * dt);
        let mut s = 0.0;
        for _ in 0..n {
            s += transform.apply(self.draw_mark(measure, rng));
        }
        s
    }

    fn draw_mark(&self, measure: &MarkMeasure, rng: &mut RngStream) -> f64 {
        match measure {
            MarkMeasure::Atomic { .. } => {
                let total = self.cumulative.last().map(|c| c.0).unwrap_or(0.0);
                let u = rng.uniform_open() * total;
                let i = self.cumulative.partition_point(|c| c.0 < u);
                self.cumulative[i.min(self.cumulative.len() - 1)].1
            }
            MarkMeasure::TemperedStable { lambda, index, .. } => {
                let r = draw_tempered_radius(*lambda, *index, self.band, rng);
                if rng.uniform_open() < self.p_pos {
                    r
                } else {
                    -r
                }
            }
        }
    }
}

/// Radius with density `e^{-lambda r} r^{-1-index}` on `(lo, hi]`.
fn draw_tempered_radius(lambda: f64, index: f64, band: Band, rng: &mut RngStream) -> f64 {
    let (a, b) = (band.lo, band.hi);
    if b.is_infinite() && index <= 0.0 {
        // Shifted exponential proposal, accept with (r / a)^{-1-index} <= 1.
        loop {
            let r = a + rng.exp1() / lambda;
            if rng.uniform_open() <= (r / a).powf(-1.0 - index) {
                return r;
            }
        }
    }
    loop {
        let u = rng.uniform_open();
        let r = if index == 0.0 {
            a * (b / a).powf(u)
        } else {
            let top = if b.is_infinite() { 0.0 } else { b.powf(-index) };
            (a.powf(-index) - u * (a.powf(-index) - top)).powf(-1.0 / index)
        };
        if lambda == 0.0 || rng.uniform_open() <= (-lambda * (r - a)).exp() {
            return r;
        }
    }
}

/// Prepared sampler for a [`LevyComponent`] with all mark integrals cached.
///
/// The integrals do not depend on the state because the jump map factorizes.
#[derive(Debug, Clone)]
pub struct LevySampler {
    comp: LevyComponent,
    small_cut: f64,
    large: BandSampler,
    small: BandSampler,
    /// `int_{|v| <= small_cut} g dpi` (mean of the dropped marks).
    dropped_mean_g: f64,
    /// `int_{U1} g dpi`
    u1_mean_g: f64,
}

impl LevySampler {
    pub fn new(comp: LevyComponent) -> Result<Self> {
        comp.measure.check()?;
        let small_cut = match comp.small_cut {
            Some(c) if c > 0.0 && c < 1.0 => c,
            Some(c) => {
                return Err(Error::Domain {
                    name: "small_cut",
                    value: c,
                    range: "(0, 1)",
                })
            }
            None => default_small_cut(&comp.measure)?,
        };
        let large = BandSampler::new(
            &comp.measure,
            comp.transform,
            Band {
                lo: 1.0,
                hi: f64::INFINITY,
            },
        )?;
        let small = BandSampler::new(
            &comp.measure,
            comp.transform,
            Band {
                lo: small_cut,
                hi: 1.0,
            },
        )?;
        let t = comp.transform;
        let symmetric = comp.measure.is_symmetric();
        let (dropped_mean_g, u1_mean_g) = if symmetric {
            (0.0, 0.0)
        } else {
            let dropped = comp.measure.integrate_band(Band { lo: 0.0, hi: small_cut }, |v| t.apply(v))?;
            (dropped, dropped + small.mean_g)
        };
        if !(large.mass.is_finite() && small.mass.is_finite()) {
            return Err(Error::InvalidParameter(
                "truncated mark region has non-finite mass".into(),
            ));
        }
        Ok(Self {
            comp,
            small_cut,
            large,
            small,
            dropped_mean_g,
            u1_mean_g,
        })
    }

    pub fn component(&self) -> &LevyComponent {
        &self.comp
    }

    pub fn small_cut(&self) -> f64 {
        self.small_cut
    }

    /// `pi(U1^c)`
    pub fn large_mass(&self) -> f64 {
        self.large.mass
    }

    /// `pi(small_cut < |v| <= 1)`
    pub fn small_mass(&self) -> f64 {
        self.small.mass
    }

    /// `int_{U1} g dpi`
    pub fn u1_mean_g(&self) -> f64 {
        self.u1_mean_g
    }

    /// `int_{U1^c} g dpi`
    pub fn large_mean_g(&self) -> f64 {
        self.large.mean_g
    }

    pub fn draw_large_g(&self, dt: f64, rng: &mut RngStream) -> f64 {
        self.large.draw_sum(&self.comp.measure, self.comp.transform, dt, rng)
    }

    pub fn draw_small_g(&self, dt: f64, rng: &mut RngStream) -> f64 {
        self.small.draw_sum(&self.comp.measure, self.comp.transform, dt, rng)
    }

    /// Per-unit-time drift in mark space added to the sampled small marks.
    ///
    /// For alpha in (1, 2] the U1 marks are integrated against q, so the mean
    /// of the sampled band is subtracted. Otherwise they are integrated
    /// against p and the mean of the unsampled marks is added back.
    pub fn small_drift_g(&self, regime: AlphaRegime) -> f64 {
        match regime {
            AlphaRegime::Super1 | AlphaRegime::Gaussian => -self.small.mean_g,
            AlphaRegime::Sub1 | AlphaRegime::Eq1 => self.dropped_mean_g,
        }
    }

    /// `int_U [u(x + l(x,v)) - u(x) - 1_{alpha > 1} 1_{U1}(v) (grad u, l)] pi(dv)`
    /// where `u_shift(s)` returns `u(x + s C(x)) - u(x)` and `slope` is
    /// `(grad u(x), C(x))`.
    pub fn integrate_generator<F: Fn(f64) -> f64>(
        &self,
        u_shift: F,
        slope: f64,
        regime: AlphaRegime,
    ) -> Result<f64> {
        let t = self.comp.transform;
        let compensate = matches!(regime, AlphaRegime::Super1 | AlphaRegime::Gaussian);
        let large = self
            .comp
            .measure
            .integrate_band(Band { lo: 1.0, hi: f64::INFINITY }, |v| u_shift(t.apply(v)))?;
        let small = self.comp.measure.integrate_band(Band { lo: 0.0, hi: 1.0 }, |v| {
            let g = t.apply(v);
            let mut val = u_shift(g);
            if compensate {
                val -= slope * g;
            }
            val
        })?;
        Ok(large + small)
    }
}

/// Cut giving `pi(cut < |v| <= 1) <= 10` per unit time (at most 1e-6).
fn default_small_cut(measure: &MarkMeasure) -> Result<f64> {
    if let MarkMeasure::Atomic { atoms } = measure {
        let smallest = atoms
            .iter()
            .map(|a| a.mark.abs())
            .fold(f64::INFINITY, f64::min);
        return Ok((0.5 * smallest).clamp(1e-12, 0.5));
    }
    let mut cut: f64 = 0.5;
    while cut > 1e-6 {
        let next = 0.5 * cut;
        let mass = measure.integrate_band(Band { lo: next, hi: 1.0 }, |_| 1.0)?;
        if mass > 10.0 {
            break;
        }
        cut = next;
    }
    Ok(cut)
}

/// Compound Poisson sum of the large jumps `C(x) g(v)` over a step `dt`.
pub fn sample_large_jumps(
    sampler: &LevySampler,
    x_frozen: &[f64],
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            range: "(0, inf)",
        });
    }
    let s = sampler.draw_large_g(dt, rng);
    let mut out = sampler.comp.direction.eval(x_frozen);
    out.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

/// Sampled small jumps on `U1` and the drift to be added to them.
pub fn sample_small_jumps(
    sampler: &LevySampler,
    x_frozen: &[f64],
    dt: f64,
    regime: AlphaRegime,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            range: "(0, inf)",
        });
    }
    let c = sampler.comp.direction.eval(x_frozen);
    let s = sampler.draw_small_g(dt, rng);
    let drift = sampler.small_drift_g(regime) * dt;
    Ok((
        c.iter().map(|v| v * s).collect(),
        c.iter().map(|v| v * drift).collect(),
    ))
}
