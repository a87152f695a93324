//! Numerical integration: Gauss-Legendre rules, adaptive Gauss-Kronrod,
//! tanh-sinh for endpoint singularities, and sphere rules for d <= 3.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // p1 = P_n(x), p0 = P_{n-1}(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A fixed Gauss-Legendre rule, mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }

    /// Mapped (node, weight) pairs on [a, b].
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + h * x, w * h))
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7-15) integration on a finite interval.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_segments {
            return Err(Error::Quadrature(format!(
                "[{a}, {b}]: {max_segments} segments, estimate {total:.6e} +- {err:.2e}"
            )));
        }
        let s = heap.pop().expect("non-empty heap");
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            // Interval can no longer be split; accept what we have.
            heap.push(s);
            break;
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        total += v1 + v2 - s.value;
        err += e1 + e2 - s.error;
        heap.push(Segment {
            a: s.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: m,
            b: s.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let mut value = 0.0;
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    Ok(Integral { value, error })
}

/// Integral over [a, inf) via the substitution x = a + t / (1 - t).
pub fn adaptive_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Integral> {
    adaptive(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_segments,
    )
}

/// Tanh-sinh (double exponential) nodes and weights on [a, b], robust to
/// integrable endpoint singularities. Nodes closer than ~1e-14 (relative) to
/// an endpoint are skipped, so the integrand is never evaluated at a or b.
pub fn tanh_sinh_nodes(a: f64, b: f64, level: u32) -> Vec<(f64, f64)> {
    let h = 2f64.powi(-(level as i32));
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let tmax = 3.2;
    let n = (tmax / h).ceil() as i64;
    let mut out = Vec::with_capacity(2 * n as usize + 1);
    for k in -n..=n {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let x = u.tanh();
        let w = 0.5 * PI * t.cosh() / (u.cosh() * u.cosh());
        if w < 1e-300 || x.abs() >= 1.0 {
            continue;
        }
        let node = c + half * x;
        if node <= a || node >= b {
            continue;
        }
        out.push((node, w * h * half));
    }
    out
}

pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, level: u32) -> f64 {
    tanh_sinh_nodes(a, b, level).into_iter().map(|(x, w)| w * f(x)).sum()
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Surface measure of S^{d-1}: 2 pi^{d/2} / Gamma(d/2). For d = 1 this is 2
/// (counting measure on {-1, 1}).
pub fn sphere_area(dim: usize) -> f64 {
    let h = 0.5 * dim as f64;
    2.0 * PI.powf(h) / gamma(h)
}

/// A quadrature rule on S^{d-1} for d in {1, 2, 3}.
#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// `resolution` is the number of angles on the circle (d = 2) or the
    /// number of polar nodes (d = 3, with twice as many azimuths).
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                points.extend([1.0, -1.0]);
                weights.extend([1.0, 1.0]);
            }
            2 => {
                let n = resolution.max(4);
                let dth = 2.0 * PI / n as f64;
                for k in 0..n {
                    let th = (k as f64 + 0.5) * dth;
                    points.extend([th.cos(), th.sin()]);
                    weights.push(dth);
                }
            }
            3 => {
                let nz = resolution.max(4);
                let nphi = 2 * nz;
                let gl = GaussLegendre::new(nz);
                let dphi = 2.0 * PI / nphi as f64;
                for (z, wz) in gl.points(-1.0, 1.0) {
                    let s = (1.0 - z * z).sqrt();
                    for k in 0..nphi {
                        let phi = (k as f64 + 0.5) * dphi;
                        points.extend([s * phi.cos(), s * phi.sin(), z]);
                        weights.push(wz * dphi);
                    }
                }
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "sphere quadrature in dimension {dim} (supported: 1, 2, 3)"
                )))
            }
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(w, wt)| wt * f(w)).sum()
    }
}

/// Nodes and weights on the circle, split at `breaks` (kink or singular
/// angles) with tanh-sinh on every arc.
pub fn circle_nodes(breaks: &[f64], level: u32) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.iter().map(|b| b.rem_euclid(2.0 * PI)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if cuts.is_empty() {
        cuts.push(0.0);
    }
    let mut nodes = Vec::new();
    for i in 0..cuts.len() {
        let a = cuts[i];
        let b = if i + 1 < cuts.len() {
            cuts[i + 1]
        } else {
            cuts[0] + 2.0 * PI
        };
        nodes.extend(tanh_sinh_nodes(a, b, level));
    }
    nodes
}

/// Integral of a 2pi-periodic function of the angle over [`circle_nodes`].
pub fn circle_with_breaks<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], level: u32) -> f64 {
    circle_nodes(breaks, level).into_iter().map(|(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            for p in 0..(2 * n) {
                let exact = (1.0 - (-1f64).powi(p as i32 + 1)) / (p as f64 + 1.0);
                let got = gl.integrate(-1.0, 1.0, |x| x.powi(p as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} p={p}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        let r = adaptive(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10, 2000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn adaptive_oscillatory() {
        let r = adaptive(|x| (20.0 * x).cos(), 0.0, 3.0, 1e-12, 1e-12, 2000).unwrap();
        assert!((r.value - (60f64).sin() / 20.0).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_power_tail() {
        let r = adaptive_semi_infinite(|x| x.powf(-2.5), 1.0, 1e-12, 1e-10, 2000).unwrap();
        assert!((r.value - 1.0 / 1.5).abs() < 1e-8);
    }

    #[test]
    fn tanh_sinh_log_singularity() {
        let v = tanh_sinh(|x| x.ln(), 0.0, 1.0, 6);
        assert!((v + 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn sphere_rules_total_area() {
        for d in 1..=3 {
            let r = SphereRule::new(d, 32).unwrap();
            let area = r.integrate(|_| 1.0);
            assert!((area - sphere_area(d)).abs() < 1e-10, "d={d}");
        }
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn sphere_rule_second_moment() {
        // int w_1^2 dmu = area / d
        for d in 2..=3 {
            let r = SphereRule::new(d, 32).unwrap();
            let m = r.integrate(|w| w[0] * w[0]);
            assert!((m - sphere_area(d) / d as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_breaks_abs_cos_power() {
        // int_0^{2pi} |cos t|^a dt = 2 sqrt(pi) Gamma((a+1)/2) / Gamma(a/2 + 1)
        let a = 0.6;
        let exact = 2.0 * PI.sqrt() * gamma((a + 1.0) / 2.0) / gamma(a / 2.0 + 1.0);
        let v = circle_with_breaks(|t| t.cos().abs().powf(a), &[PI / 2.0, 3.0 * PI / 2.0], 6);
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }
}
