//! Exact expectations for constant-coefficient models through the Fourier
//! symbol of the generator.
//!
//! Convention: `E exp(i (xi, X_t - x)) = exp(t psi(xi))`, with
//!
//! `psi(xi) = -N int |(w,xi)|^a [1 - i tan(a pi/2) sgn (w,xi)] r(w) dmu(w)` (a != 1),
//! `psi(xi) = -N int |(w,xi)| [1 + i (2/pi) sgn (w,xi) ln |(w,xi)|] r(w) dmu(w)` (a = 1),
//! `psi(xi) = -(B xi, xi)` (a = 2),
//!
//! plus `i (a1, xi)` for a drift `a1`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelSpec;
use crate::quad::{circle_nodes, SphereRule};
use crate::stable::{stable_norm_constant, SphereFunction};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

/// Parameters of a constant-coefficient symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symbol {
    pub alpha: f64,
    pub dim: usize,
    /// Directional density `r` of the jumps (ignored at alpha = 2).
    pub density: SphereFunction,
    /// Drift `a1`.
    pub drift: Vec<f64>,
    /// `B`, row-major (used at alpha = 2).
    pub b: Vec<f64>,
}

const CIRCLE_LEVEL: u32 = 6;

impl Symbol {
    /// The symbol of the Euler scheme of a constant-coefficient model without
    /// Levy part: `r` is the pushed-forward jump density, `a1` the drift for
    /// alpha >= 1 and `B = b b^T / 2`.
    pub fn from_model(spec: &ModelSpec) -> Result<Self> {
        spec.check()?;
        if spec.levy.is_some() {
            return Err(Error::Unsupported("Fourier oracle for models with a Levy part".into()));
        }
        let d = spec.dim;
        let x = &spec.x0;
        let constant = spec.drift.is_constant() && spec.diffusion.is_constant() && spec.jump_scale.is_constant();
        if !constant {
            return Err(Error::Unsupported(
                "Fourier oracle for state-dependent coefficients".into(),
            ));
        }
        let c = spec.jump_scale.eval(x);
        let density = match (&spec.h_alpha, spec.jump_scale.is_scalar()) {
            (SphereFunction::Constant { value }, true) => SphereFunction::Constant {
                value: (c[0].abs() * value).powf(spec.alpha),
            },
            _ => SphereFunction::Pushforward {
                map: c,
                modulation: Box::new(spec.h_alpha.clone()),
                alpha: spec.alpha,
            },
        };
        let drift = if spec.alpha >= 1.0 {
            spec.drift.eval(x)
        } else {
            vec![0.0; d]
        };
        let b = if spec.alpha == 2.0 {
            let b = spec.diffusion.eval(x);
            let mut bb = linalg::mat_mul(&b, &linalg::transpose(&b, d), d);
            bb.iter_mut().for_each(|v| *v *= 0.5);
            bb
        } else {
            vec![0.0; d * d]
        };
        Ok(Self {
            alpha: spec.alpha,
            dim: d,
            density,
            drift,
            b,
        })
    }

    fn check(&self) -> Result<()> {
        crate::error::check_alpha(self.alpha)?;
        if self.dim == 0 || self.drift.len() != self.dim || self.b.len() != self.dim * self.dim {
            return Err(Error::InvalidParameter("symbol dimensions do not match".into()));
        }
        self.density.check(self.dim)
    }

    /// `psi(xi)`.
    pub fn eval(&self, xi: &[f64]) -> Result<Complex64> {
        self.check()?;
        if xi.len() != self.dim {
            return Err(Error::InvalidParameter("frequency has the wrong dimension".into()));
        }
        let norm = linalg::norm(xi);
        if norm == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut psi = Complex64::new(0.0, linalg::dot(&self.drift, xi));
        if self.alpha == 2.0 {
            let mut tmp = vec![0.0; self.dim];
            linalg::mat_vec(&self.b, xi, &mut tmp);
            psi.re -= linalg::dot(&tmp, xi);
        } else {
            psi += self.stable_part(xi)?;
        }
        Ok(psi)
    }

    fn stable_part(&self, xi: &[f64]) -> Result<Complex64> {
        let a = self.alpha;
        let n = stable_norm_constant(a);
        let tan = if a == 1.0 { 0.0 } else { (FRAC_PI_2 * a).tan() };
        let kernel = |s: f64| -> Complex64 {
            if s == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let m = s.abs().powf(a);
            let im = if a == 1.0 {
                -(2.0 / PI) * s.signum() * s.abs().ln()
            } else {
                tan * s.signum()
            };
            // -N |s|^a (1 - i im)
            Complex64::new(-n * m, n * m * im)
        };
        let r = &self.density;
        let total = match self.dim {
            1 => kernel(xi[0]) * r.eval(&[1.0]) + kernel(-xi[0]) * r.eval(&[-1.0]),
            2 => {
                let th = xi[1].atan2(xi[0]);
                circle_nodes(&[th + FRAC_PI_2, th - FRAC_PI_2], CIRCLE_LEVEL)
                    .into_iter()
                    .map(|(phi, wt)| {
                        let w = [phi.cos(), phi.sin()];
                        kernel(w[0] * xi[0] + w[1] * xi[1]) * (wt * r.eval(&w))
                    })
                    .sum()
            }
            3 => {
                let rule = SphereRule::new(3, 128)?;
                rule.iter()
                    .map(|(w, wt)| kernel(linalg::dot(w, xi)) * (wt * r.eval(w)))
                    .sum()
            }
            d => {
                return Err(Error::Unsupported(format!(
                    "symbol quadrature in dimension {d}"
                )))
            }
        };
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::Quadrature("symbol integral is not finite".into()));
        }
        Ok(total)
    }

    /// `Re exp(i (xi, x0) + t psi(xi)) = E cos((xi, X_t))` for `X_0 = x0`.
    pub fn expectation_cos(&self, x0: &[f64], t: f64, xi: &[f64]) -> Result<f64> {
        let psi = self.eval(xi)?;
        let z = Complex64::new(0.0, linalg::dot(xi, x0)) + psi * t;
        Ok(z.exp().re)
    }
}

/// `psi(xi)` for the given parameters.
pub fn symbol_psi0(
    xi: &[f64],
    alpha: f64,
    density: &SphereFunction,
    a1: &[f64],
    b: &[f64],
) -> Result<Complex64> {
    Symbol {
        alpha,
        dim: xi.len(),
        density: density.clone(),
        drift: a1.to_vec(),
        b: b.to_vec(),
    }
    .eval(xi)
}

/// `E cos((xi, X_t))` for the constant-coefficient process started at `x0`.
pub fn exact_expectation_trig(
    x0: &[f64],
    t: f64,
    xi: &[f64],
    alpha: f64,
    density: &SphereFunction,
    a1: &[f64],
    b: &[f64],
) -> Result<f64> {
    Symbol {
        alpha,
        dim: xi.len(),
        density: density.clone(),
        drift: a1.to_vec(),
        b: b.to_vec(),
    }
    .expectation_cos(x0, t, xi)
}

/// The symbol tabulated on the dual grid of a periodic box `[-L, L)^d`.
#[derive(Debug, Clone)]
pub struct SymbolGrid {
    symbol: Symbol,
    half_width: f64,
    n: usize,
    /// `psi` at the dual points in FFT order, axis 0 slowest.
    psi: Vec<Complex64>,
}

/// Angular table of the homogeneous stable part in d = 2.
struct AngularTable {
    phi: Vec<Complex64>,
    v: Vec<f64>,
}

impl AngularTable {
    const SIZE: usize = 2048;

    fn new(symbol: &Symbol) -> Result<Self> {
        if let SphereFunction::Constant { .. } = symbol.density {
            // Rotation invariant: one direction suffices, and V vanishes.
            return Ok(Self {
                phi: vec![symbol.stable_part(&[1.0, 0.0])?],
                v: vec![0.0],
            });
        }
        let rule = SphereRule::new(2, 2048)?;
        let rows: Vec<(Complex64, f64)> = (0..Self::SIZE)
            .into_par_iter()
            .map(|k| {
                let th = 2.0 * PI * k as f64 / Self::SIZE as f64;
                let e = [th.cos(), th.sin()];
                let v = if symbol.alpha == 1.0 {
                    rule.integrate(|w| linalg::dot(w, &e) * symbol.density.eval(w))
                } else {
                    0.0
                };
                Ok((symbol.stable_part(&e)?, v))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            phi: rows.iter().map(|r| r.0).collect(),
            v: rows.iter().map(|r| r.1).collect(),
        })
    }

    /// Periodic four-point Lagrange interpolation.
    fn interp<T>(table: &[T], th: f64) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let n = table.len();
        if n == 1 {
            return table[0];
        }
        let x = th.rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
        let i = x.floor() as isize;
        let u = x - i as f64;
        let at = |k: isize| table[(i + k).rem_euclid(n as isize) as usize];
        let w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        at(-1) * w0 + at(0) * w1 + at(1) * w2 + at(2) * w3
    }
}

/// Result of applying the semigroup to a grid function.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub values: Vec<f64>,
    /// Fraction of spectral energy in the outer 10% frequency shell.
    pub shell_ratio: f64,
}

impl Propagated {
    pub fn aliasing_suspected(&self) -> bool {
        self.shell_ratio > 1e-8
    }
}

impl SymbolGrid {
    /// Default box half-width `16 (T^{1/alpha} + |x0|)`.
    pub fn default_half_width(alpha: f64, horizon: f64, x0: &[f64]) -> f64 {
        16.0 * (horizon.powf(1.0 / alpha) + linalg::norm(x0))
    }

    pub fn new(symbol: Symbol, half_width: f64, n: usize) -> Result<Self> {
        symbol.check()?;
        if symbol.dim > 2 {
            return Err(Error::Unsupported(format!(
                "grid oracle in dimension {} (supported: 1, 2)",
                symbol.dim
            )));
        }
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::InvalidParameter(format!("n_fft = {n} must be a power of two")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Domain {
                name: "half_width",
                value: half_width,
                range: "(0, inf)",
            });
        }
        let freq = |k: usize| -> f64 {
            let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            PI * k / half_width
        };
        let psi = if symbol.dim == 1 {
            (0..n).map(|k| symbol.eval(&[freq(k)])).collect::<Result<Vec<_>>>()?
        } else {
            let table = if symbol.alpha < 2.0 {
                Some(AngularTable::new(&symbol)?)
            } else {
                None
            };
            let n_const = stable_norm_constant(symbol.alpha);
            let mut out = Vec::with_capacity(n * n);
            for k0 in 0..n {
                for k1 in 0..n {
                    let xi = [freq(k0), freq(k1)];
                    let lam = xi[0].hypot(xi[1]);
                    let mut psi = Complex64::new(0.0, linalg::dot(&symbol.drift, &xi));
                    if lam == 0.0 {
                        out.push(Complex64::new(0.0, 0.0));
                        continue;
                    }
                    match &table {
                        None => {
                            let mut tmp = [0.0; 2];
                            linalg::mat_vec(&symbol.b, &xi, &mut tmp);
                            psi.re -= linalg::dot(&tmp, &xi);
                        }
                        Some(t) => {
                            let th = xi[1].atan2(xi[0]);
                            let phi = AngularTable::interp(&t.phi, th);
                            if symbol.alpha == 1.0 {
                                let v = AngularTable::interp(&t.v, th);
                                psi += phi * lam - Complex64::new(0.0, n_const * 2.0 / PI * lam * lam.ln() * v);
                            } else {
                                psi += phi * lam.powf(symbol.alpha);
                            }
                        }
                    }
                    out.push(psi);
                }
            }
            out
        };
        Ok(Self {
            symbol,
            half_width,
            n,
            psi,
        })
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Spatial coordinates of grid point `idx` (axis 0 slowest).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let h = 2.0 * self.half_width / self.n as f64;
        let coord = |i: usize| -self.half_width + i as f64 * h;
        match self.symbol.dim {
            1 => vec![coord(idx)],
            _ => vec![coord(idx / self.n), coord(idx % self.n)],
        }
    }

    /// Samples `f` on the grid.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    /// `min -Re psi(xi) / |xi|^alpha` over dual points with `|xi| >= 1`.
    pub fn ellipticity(&self) -> f64 {
        let freq = |k: usize| {
            let k = if k < self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
            PI * k / self.half_width
        };
        let mut best = f64::INFINITY;
        for (idx, psi) in self.psi.iter().enumerate() {
            let lam = match self.symbol.dim {
                1 => freq(idx).abs(),
                _ => freq(idx / self.n).hypot(freq(idx % self.n)),
            };
            if lam >= 1.0 {
                best = best.min(-psi.re / lam.powf(self.symbol.alpha));
            }
        }
        best
    }

    fn fft(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let mut planner = FftPlanner::new();
        let plan = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        if self.symbol.dim == 1 {
            plan.process(data);
            return;
        }
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// `x -> E g(x + X_t - X_0)` on the grid: inverse FFT of
    /// `exp(t psi) * FFT(g)`.
    pub fn semigroup_apply(&self, g: &[f64], t: f64) -> Result<Propagated> {
        if g.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "grid function has {} values, grid has {}",
                g.len(),
                self.len()
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::Domain {
                name: "t",
                value: t,
                range: "[0, inf)",
            });
        }
        let mut data: Vec<Complex64> = g.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft(&mut data, false);
        let n = self.n;
        let edge = (0.9 * (n / 2) as f64).floor() as isize;
        let signed = |k: usize| if k < n / 2 { k as isize } else { k as isize - n as isize };
        let mut total = 0.0;
        let mut shell = 0.0;
        for (idx, (z, psi)) in data.iter_mut().zip(&self.psi).enumerate() {
            *z *= (psi * t).exp();
            let e = z.norm_sqr();
            total += e;
            let outer = match self.symbol.dim {
                1 => signed(idx).abs() > edge,
                _ => signed(idx / n).abs() > edge || signed(idx % n).abs() > edge,
            };
            if outer {
                shell += e;
            }
        }
        self.fft(&mut data, true);
        let scale = 1.0 / data.len() as f64;
        Ok(Propagated {
            values: data.iter().map(|z| z.re * scale).collect(),
            shell_ratio: if total > 0.0 { shell / total } else { 0.0 },
        })
    }
}

/// Values on a set of points, for CSV and binary exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub dim: usize,
    /// `n x dim`, point-major.
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

const GRID_MAGIC: &[u8; 8] = b"SWEGF\0\0\x01";

impl GridFunction {
    pub fn from_grid(grid: &SymbolGrid, values: Vec<f64>) -> Self {
        let points = (0..grid.len()).flat_map(|i| grid.point(i)).collect();
        Self {
            dim: grid.symbol.dim,
            points,
            values,
        }
    }

    /// CSV `x1,...,xd,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        out.write_record(&header)?;
        for (p, v) in self.points.chunks_exact(self.dim).zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{v:e}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let dim = rd.headers()?.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
            Error::Format("grid CSV needs coordinate columns and a value column".into())
        })?;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("bad number in grid CSV: {e}")))?;
            if nums.len() != dim + 1 {
                return Err(Error::Format("ragged grid CSV row".into()));
            }
            points.extend_from_slice(&nums[..dim]);
            values.push(nums[dim]);
        }
        Ok(Self { dim, points, values })
    }

    /// Little-endian: magic, dim (u32), reserved (u32), count (u64), the
    /// points, then the values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_u32::<LittleEndian>(0)?;
        w.write_u64::<LittleEndian>(self.values.len() as u64)?;
        for v in self.points.iter().chain(&self.values) {
            w.write_f64::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Format("not a grid function file".into()));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let _ = r.read_u32::<LittleEndian>()?;
        let n = r.read_u64::<LittleEndian>()? as usize;
        let mut points = vec![0.0; n * dim];
        r.read_f64_into::<LittleEndian>(&mut points)?;
        let mut values = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut values)?;
        Ok(Self { dim, points, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::scale_to_paper_intensity;

    fn iso(alpha: f64, dim: usize) -> Symbol {
        Symbol {
            alpha,
            dim,
            density: SphereFunction::one(),
            drift: vec![0.0; dim],
            b: linalg::identity(dim),
        }
    }

    #[test]
    fn symbol_special_values() {
        assert_eq!(iso(1.5, 2).eval(&[0.0, 0.0]).unwrap(), Complex64::new(0.0, 0.0));
        let mut g = iso(2.0, 2);
        g.density = SphereFunction::Constant { value: 0.0 };
        let p = g.eval(&[0.3, -1.2]).unwrap();
        assert!((p.re + 0.09 + 1.44).abs() < 1e-15 && p.im == 0.0);
    }

    #[test]
    fn isotropic_symbol_matches_intensity_constant() {
        for (alpha, dim) in [(1.5, 2), (0.6, 2), (1.0, 2), (1.5, 1), (1.0, 1), (0.6, 3)] {
            let k = scale_to_paper_intensity(alpha, dim).unwrap();
            let mut xi = vec![0.0; dim];
            xi[0] = 0.8;
            if dim > 1 {
                xi[1] = -1.1;
            }
            let p = iso(alpha, dim).eval(&xi).unwrap();
            let oracle = -k * linalg::norm(&xi).powf(alpha);
            let tol = if dim == 3 { 1e-3 } else { 1e-6 };
            assert!((p.re - oracle).abs() < tol * oracle.abs(), "{alpha} {dim}: {p} vs {oracle}");
            assert!(p.im.abs() < tol * oracle.abs());
        }
    }

    #[test]
    fn semigroup_identity_and_heat_eigenfunction() {
        let grid = SymbolGrid::new(iso(2.0, 2), PI, 32).unwrap();
        let g = grid.sample(|x| (2.0 * x[0] - x[1]).cos());
        let same = grid.semigroup_apply(&g, 0.0).unwrap();
        for (a, b) in same.values.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = 0.3;
        let out = grid.semigroup_apply(&g, t).unwrap();
        for (a, b) in out.values.iter().zip(&g) {
            assert!((a - (-t * 5.0f64).exp() * b).abs() < 1e-10);
        }
        let ones = grid.semigroup_apply(&vec![1.0; grid.len()], 2.0).unwrap();
        assert!(ones.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn grid_agrees_with_closed_form() {
        // Asymmetric pushed-forward density with drift, d = 2.
        let sym = Symbol {
            alpha: 1.3,
            dim: 2,
            density: SphereFunction::Pushforward {
                map: vec![1.2, 0.3, -0.2, 0.8],
                modulation: Box::new(SphereFunction::Affine {
                    base: 1.0,
                    slope: vec![0.4, -0.2],
                }),
                alpha: 1.3,
            },
            drift: vec![0.3, -0.1],
            b: vec![0.0; 4],
        };
        let l = 2.0 * PI;
        let grid = SymbolGrid::new(sym.clone(), l, 64).unwrap();
        let xi = [3.0 * PI / l, -2.0 * PI / l];
        let g = grid.sample(|x| (xi[0] * x[0] + xi[1] * x[1]).cos());
        let t = 0.7;
        let out = grid.semigroup_apply(&g, t).unwrap();
        for idx in [0, 17, 500, 2049, 4095] {
            let x = grid.point(idx);
            let exact = sym.expectation_cos(&x, t, &xi).unwrap();
            assert!((out.values[idx] - exact).abs() < 1e-8, "{idx}: {} vs {exact}", out.values[idx]);
        }
        assert!(grid.ellipticity() > 0.0);
    }

    #[test]
    fn semigroup_composes_and_stays_positive() {
        let grid = SymbolGrid::new(iso(1.2, 1), 8.0, 256).unwrap();
        let g = grid.sample(|x| (-x[0] * x[0]).exp());
        let a = grid.semigroup_apply(&g, 0.4).unwrap();
        let ab = grid.semigroup_apply(&a.values, 0.6).unwrap();
        let c = grid.semigroup_apply(&g, 1.0).unwrap();
        for (x, y) in ab.values.iter().zip(&c.values) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(c.values.iter().all(|v| *v >= -1e-9));
        assert!(!c.aliasing_suspected());
    }

    #[test]
    fn aliasing_guard_fires_on_unresolved_input() {
        let grid = SymbolGrid::new(iso(1.5, 1), 1.0, 64).unwrap();
        let mut g = vec![0.0; 64];
        g[10] = 1.0;
        assert!(grid.semigroup_apply(&g, 0.0).unwrap().aliasing_suspected());
    }

    #[test]
    fn grid_function_io_roundtrip() {
        let grid = SymbolGrid::new(iso(1.5, 2), 1.0, 4).unwrap();
        let f = GridFunction::from_grid(&grid, grid.sample(|x| x[0] - 2.0 * x[1]));
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(GridFunction::read_binary(buf.as_slice()).unwrap(), f);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        assert_eq!(GridFunction::read_csv(csv.as_slice()).unwrap(), f);
    }
}
