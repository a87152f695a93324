//! Test functions `g`, `f` and `u` fed to the estimators and the generator,
//! and the bump kernel used to mollify them.

use crate::error::{Error, Result};
use crate::fields::dyadic_sum;
use crate::quad::{self, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

fn one() -> f64 {
    1.0
}

/// A parametric test function on R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `(coef, x) + offset`
    Linear {
        coef: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `amp * cos((freq, x) + phase)`
    Cosine {
        freq: Vec<f64>,
        #[serde(default)]
        phase: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// `scale * |x|^2`
    Quadratic {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `1 + amplitude * sum_{k=0}^{levels} 2^{-beta k} cos(2^k x[axis])`
    Weierstrass {
        beta: f64,
        amplitude: f64,
        levels: u32,
        #[serde(default)]
        axis: usize,
    },
    /// Convolution of `inner` with the bump kernel of radius `eps`.
    Mollified { inner: Box<TestFunction>, eps: f64 },
    /// `sum_k weight_k f_k`
    Combination { terms: Vec<(f64, TestFunction)> },
}

/// One term `amp * cos((freq, x) + phase)` of a trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amp: f64,
    pub freq: Vec<f64>,
    pub phase: f64,
}

impl TrigTerm {
    fn arg(&self, x: &[f64]) -> f64 {
        self.freq.iter().zip(x).map(|(f, x)| f * x).sum::<f64>() + self.phase
    }
}

impl TestFunction {
    pub fn cosine(freq: &[f64]) -> Self {
        Self::Cosine {
            freq: freq.to_vec(),
            phase: 0.0,
            amp: 1.0,
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            Self::Linear { coef, .. } if coef.len() != dim => Err(Error::InvalidParameter(format!(
                "linear test function has {} coefficients for dimension {dim}",
                coef.len()
            ))),
            Self::Cosine { freq, .. } if freq.len() != dim => Err(Error::InvalidParameter(format!(
                "cosine test function has {} frequencies for dimension {dim}",
                freq.len()
            ))),
            Self::Weierstrass {
                beta,
                amplitude,
                axis,
                ..
            } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::Domain {
                        name: "beta",
                        value: *beta,
                        range: "(0, 1)",
                    });
                }
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("amplitude must be finite".into()));
                }
                if *axis >= dim {
                    return Err(Error::InvalidParameter(format!(
                        "axis {axis} out of range for dimension {dim}"
                    )));
                }
                Ok(())
            }
            Self::Mollified { inner, eps } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::Domain {
                        name: "eps",
                        value: *eps,
                        range: "(0, 1)",
                    });
                }
                if dim > 3 && inner.trig_terms(dim).is_none() {
                    return Err(Error::Unsupported(
                        "numerical mollification beyond dimension 3".into(),
                    ));
                }
                inner.check(dim)
            }
            Self::Combination { terms } => terms.iter().try_for_each(|(_, f)| f.check(dim)),
            _ => Ok(()),
        }
    }

    /// Declared Hölder exponent; infinite for smooth families.
    pub fn smoothness(&self) -> f64 {
        match self {
            Self::Weierstrass { beta, amplitude, .. } if *amplitude != 0.0 => *beta,
            Self::Combination { terms } => terms
                .iter()
                .filter(|(w, _)| *w != 0.0)
                .map(|(_, f)| f.smoothness())
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    /// Whether `E g(x + Z)` has a closed form for any `Z` with known
    /// characteristic function.
    pub fn has_closed_form_cf(&self, dim: usize) -> bool {
        self.trig_terms(dim).is_some()
    }

    /// The function as a finite sum of cosines, when it is one.
    pub fn trig_terms(&self, dim: usize) -> Option<Vec<TrigTerm>> {
        match self {
            Self::Constant { value } => Some(vec![TrigTerm {
                amp: *value,
                freq: vec![0.0; dim],
                phase: 0.0,
            }]),
            Self::Cosine { freq, phase, amp } => Some(vec![TrigTerm {
                amp: *amp,
                freq: freq.clone(),
                phase: *phase,
            }]),
            Self::Weierstrass {
                beta,
                amplitude,
                levels,
                axis,
            } => {
                let mut terms = vec![TrigTerm {
                    amp: 1.0,
                    freq: vec![0.0; dim],
                    phase: 0.0,
                }];
                for k in 0..=*levels {
                    let mut freq = vec![0.0; dim];
                    freq[*axis] = 2f64.powi(k as i32);
                    terms.push(TrigTerm {
                        amp: amplitude * 2f64.powf(-beta * k as f64),
                        freq,
                        phase: 0.0,
                    });
                }
                Some(terms)
            }
            Self::Mollified { inner, eps } => {
                let mut terms = inner.trig_terms(dim)?;
                for t in &mut terms {
                    let s = eps * t.freq.iter().map(|f| f * f).sum::<f64>().sqrt();
                    t.amp *= bump_fourier(dim, s);
                }
                Some(terms)
            }
            Self::Combination { terms } => {
                let mut out = Vec::new();
                for (w, f) in terms {
                    for mut t in f.trig_terms(dim)? {
                        t.amp *= w;
                        out.push(t);
                    }
                }
                Some(out)
            }
            Self::Linear { .. } | Self::Quadratic { .. } => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Linear { coef, offset } => coef.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + offset,
            Self::Cosine { freq, phase, amp } => {
                amp * (freq.iter().zip(x).map(|(f, x)| f * x).sum::<f64>() + phase).cos()
            }
            Self::Quadratic { scale } => scale * x.iter().map(|v| v * v).sum::<f64>(),
            Self::Weierstrass {
                beta,
                amplitude,
                levels,
                axis,
            } => crate::fields::weierstrass_value(*beta, *amplitude, *levels, x[*axis]),
            Self::Mollified { inner, eps } => match self.trig_terms(x.len()) {
                Some(terms) => terms.iter().map(|t| t.amp * t.arg(x).cos()).sum(),
                None => convolve(inner, *eps, x, Order::Value)[0],
            },
            Self::Combination { terms } => terms.iter().map(|(w, f)| w * f.value(x)).sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        match self {
            Self::Constant { .. } => vec![0.0; d],
            Self::Linear { coef, .. } => coef.clone(),
            Self::Quadratic { scale } => x.iter().map(|v| 2.0 * scale * v).collect(),
            Self::Mollified { inner, eps } if self.trig_terms(d).is_none() => {
                convolve(inner, *eps, x, Order::Gradient)
            }
            Self::Combination { terms } => {
                let mut g = vec![0.0; d];
                for (w, f) in terms {
                    g.iter_mut().zip(f.gradient(x)).for_each(|(g, v)| *g += w * v);
                }
                g
            }
            _ => {
                let mut g = vec![0.0; d];
                for t in self.trig_terms(d).expect("trigonometric family") {
                    let s = -t.amp * t.arg(x).sin();
                    g.iter_mut().zip(&t.freq).for_each(|(g, f)| *g += s * f);
                }
                g
            }
        }
    }

    /// Hessian, row-major.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        match self {
            Self::Constant { .. } | Self::Linear { .. } => vec![0.0; d * d],
            Self::Quadratic { scale } => {
                let mut h = vec![0.0; d * d];
                for i in 0..d {
                    h[i * d + i] = 2.0 * scale;
                }
                h
            }
            Self::Mollified { inner, eps } if self.trig_terms(d).is_none() => {
                convolve(inner, *eps, x, Order::Hessian)
            }
            Self::Combination { terms } => {
                let mut h = vec![0.0; d * d];
                for (w, f) in terms {
                    h.iter_mut().zip(f.hessian(x)).for_each(|(h, v)| *h += w * v);
                }
                h
            }
            _ => {
                let mut h = vec![0.0; d * d];
                for t in self.trig_terms(d).expect("trigonometric family") {
                    let c = -t.amp * t.arg(x).cos();
                    for i in 0..d {
                        for j in 0..d {
                            h[i * d + j] += c * t.freq[i] * t.freq[j];
                        }
                    }
                }
                h
            }
        }
    }

    /// Polynomial degree for the unbounded families (at most 2), `None` for
    /// bounded ones.
    pub fn polynomial_degree(&self) -> Option<u32> {
        match self {
            Self::Linear { .. } => Some(1),
            Self::Quadratic { .. } => Some(2),
            Self::Mollified { inner, .. } => inner.polynomial_degree(),
            Self::Combination { terms } => terms.iter().filter_map(|(_, f)| f.polynomial_degree()).max(),
            _ => None,
        }
    }

    /// Upper bound of `|value|`, or infinity for unbounded families.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Self::Constant { value } => value.abs(),
            Self::Cosine { amp, .. } => amp.abs(),
            Self::Weierstrass {
                beta,
                amplitude,
                levels,
                ..
            } => 1.0 + amplitude.abs() * dyadic_sum(*beta, *levels),
            Self::Mollified { inner, .. } => inner.sup_bound(),
            Self::Combination { terms } => terms.iter().map(|(w, f)| w.abs() * f.sup_bound()).sum(),
            Self::Linear { coef, offset } if coef.iter().all(|c| *c == 0.0) => offset.abs(),
            Self::Linear { .. } | Self::Quadratic { .. } => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

/// `w(z) = exp(-1 / (1 - |z|^2))` on the unit ball, unnormalized.
fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Tensor Gauss-Legendre rule on the unit cube carrying the normalized bump
/// and its first two derivatives at every node.
struct BumpRule {
    dim: usize,
    z: Vec<f64>,
    w: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn bump_rule(dim: usize) -> &'static BumpRule {
    static RULES: [OnceLock<BumpRule>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    RULES[dim - 1].get_or_init(|| {
        let n = if dim == 3 { 24 } else { 48 };
        let gl = GaussLegendre::new(n);
        let pts: Vec<(f64, f64)> = gl.points(-1.0, 1.0).collect();
        let mut z = Vec::new();
        let mut w = Vec::new();
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        let total = n.pow(dim as u32);
        let mut node = vec![0.0; dim];
        for idx in 0..total {
            let mut rem = idx;
            let mut weight = 1.0;
            for v in node.iter_mut() {
                let (p, pw) = pts[rem % n];
                *v = p;
                weight *= pw;
                rem /= n;
            }
            let r2: f64 = node.iter().map(|v| v * v).sum();
            let b = bump(r2);
            if b == 0.0 {
                continue;
            }
            let q = 1.0 - r2;
            z.extend_from_slice(&node);
            w.push(weight * b);
            for i in 0..dim {
                grad.push(weight * (-2.0 * node[i] * b / (q * q)));
            }
            for i in 0..dim {
                for j in 0..dim {
                    let zz = node[i] * node[j];
                    let mut h = 4.0 * zz * b / q.powi(4) - 8.0 * zz * b / q.powi(3);
                    if i == j {
                        h -= 2.0 * b / (q * q);
                    }
                    hess.push(weight * h);
                }
            }
        }
        let mass: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= mass);
        grad.iter_mut().for_each(|v| *v /= mass);
        hess.iter_mut().for_each(|v| *v /= mass);
        BumpRule {
            dim,
            z,
            w,
            grad,
            hess,
        }
    })
}

/// `f^eps` or one of its derivatives at `x` through the kernel:
/// `d^k f^eps(x) = eps^{-k} int d^k w(z) f(x - eps z) dz`.
fn convolve(f: &TestFunction, eps: f64, x: &[f64], order: Order) -> Vec<f64> {
    let d = x.len();
    let rule = bump_rule(d);
    debug_assert_eq!(rule.dim, d);
    let width = match order {
        Order::Value => 1,
        Order::Gradient => d,
        Order::Hessian => d * d,
    };
    let mut out = vec![0.0; width];
    let mut y = vec![0.0; d];
    for (k, z) in rule.z.chunks_exact(d).enumerate() {
        y.iter_mut().zip(x.iter().zip(z)).for_each(|(y, (x, z))| *y = x - eps * z);
        let fy = f.value(&y);
        match order {
            Order::Value => out[0] += rule.w[k] * fy,
            Order::Gradient => {
                for i in 0..d {
                    out[i] += rule.grad[k * d + i] * fy;
                }
            }
            Order::Hessian => {
                for i in 0..d * d {
                    out[i] += rule.hess[k * d * d + i] * fy;
                }
            }
        }
    }
    let scale = match order {
        Order::Value => 1.0,
        Order::Gradient => 1.0 / eps,
        Order::Hessian => 1.0 / (eps * eps),
    };
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Marginal of the normalized bump along one axis, tabulated on a composite
/// Gauss-Legendre grid over [-1, 1].
struct Marginal {
    t: Vec<f64>,
    q: Vec<f64>,
}

const MARGINAL_PANELS: usize = 512;
/// Above this argument the kernel transform is below 1e-15 and is taken as 0.
const FOURIER_CUTOFF: f64 = 600.0;

fn marginal(dim: usize) -> &'static Marginal {
    static TABLES: [OnceLock<Marginal>; 8] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    TABLES[dim - 1].get_or_init(|| {
        let gl = GaussLegendre::new(16);
        let h = 2.0 / MARGINAL_PANELS as f64;
        let mut t = Vec::new();
        let mut q = Vec::new();
        for p in 0..MARGINAL_PANELS {
            let a = -1.0 + p as f64 * h;
            for (ti, wi) in gl.points(a, a + h) {
                let dens = if dim == 1 {
                    bump(ti * ti)
                } else {
                    let rmax = (1.0 - ti * ti).max(0.0).sqrt();
                    let k = dim as f64 - 2.0;
                    let inner = quad::adaptive(
                        |rho: f64| bump(ti * ti + rho * rho) * rho.powf(k),
                        0.0,
                        rmax,
                        1e-15,
                        1e-12,
                        200,
                    )
                    .map(|i| i.value)
                    .unwrap_or(0.0);
                    quad::sphere_area(dim - 1) * inner
                };
                t.push(ti);
                q.push(wi * dens);
            }
        }
        let mass: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= mass);
        Marginal { t, q }
    })
}

/// Fourier transform `int w(z) cos(s z_1) dz` of the normalized kernel.
pub fn bump_fourier(dim: usize, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if s.abs() > FOURIER_CUTOFF || dim == 0 || dim > 8 {
        return 0.0;
    }
    let m = marginal(dim);
    m.t.iter().zip(&m.q).map(|(t, q)| q * (s * t).cos()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_terms_reproduce_values() {
        let f = TestFunction::Weierstrass {
            beta: 0.5,
            amplitude: 0.2,
            levels: 10,
            axis: 1,
        };
        let x = [0.3, -1.7];
        let s: f64 = f
            .trig_terms(2)
            .unwrap()
            .iter()
            .map(|t| t.amp * t.arg(&x).cos())
            .sum();
        assert!((s - f.value(&x)).abs() < 1e-13);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fs = [
            TestFunction::Cosine {
                freq: vec![1.3, -0.4],
                phase: 0.2,
                amp: 0.7,
            },
            TestFunction::Quadratic { scale: 0.5 },
            TestFunction::Weierstrass {
                beta: 0.75,
                amplitude: 0.1,
                levels: 8,
                axis: 0,
            },
        ];
        let x = [0.4, 0.9];
        let h = 1e-5;
        for f in &fs {
            let g = f.gradient(&x);
            let hs = f.hessian(&x);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-4 * (1.0 + g[i].abs()), "{f:?} {i}");
                let gp = f.gradient(&xp);
                let gm = f.gradient(&xm);
                for j in 0..2 {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd2 - hs[i * 2 + j]).abs() < 1e-3 * (1.0 + hs[i * 2 + j].abs()));
                }
            }
        }
    }

    #[test]
    fn bump_transform_matches_direct_quadrature() {
        // d = 1: int w(z) cos(sz) dz / int w(z) dz by adaptive quadrature.
        let mass = quad::adaptive(|z| bump(z * z), -1.0, 1.0, 1e-14, 1e-13, 500).unwrap().value;
        for s in [0.5, 3.0, 20.0] {
            let direct = quad::adaptive(|z| bump(z * z) * (s * z).cos(), -1.0, 1.0, 1e-14, 1e-13, 2000)
                .unwrap()
                .value
                / mass;
            assert!((bump_fourier(1, s) - direct).abs() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn numeric_and_spectral_mollification_agree() {
        // Spectral route against the tensor kernel rule on the same cosine.
        for dim in [1usize, 2] {
            let mut freq = vec![0.0; dim];
            freq[0] = 5.0;
            let f = TestFunction::cosine(&freq);
            let x = vec![0.37; dim];
            let eps = 0.2;
            let spectral = TestFunction::Mollified {
                inner: Box::new(f.clone()),
                eps,
            }
            .value(&x);
            let numeric = convolve(&f, eps, &x, Order::Value)[0];
            assert!((spectral - numeric).abs() < 1e-8, "dim {dim}: {spectral} vs {numeric}");
        }
    }
}
