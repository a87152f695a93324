//! Estimators and goodness-of-fit statistics shared by the samplers' tests,
//! the harness and the acceptance suite.

use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Monte Carlo estimate of a mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    pub fn from_moments(mean: f64, sample_std: f64, n: u64) -> Self {
        let stderr = if n > 0 { sample_std / (n as f64).sqrt() } else { f64::NAN };
        Self {
            mean,
            stderr,
            n_paths: n,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
        }
    }

    /// Mean and standard error of a sample. Summation runs in slice order,
    /// so the result does not depend on how the sample was produced.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self::from_moments(mean, var.sqrt(), n as u64)
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self::from_moments(
            self.mean + by,
            self.stderr * (self.n_paths as f64).sqrt(),
            self.n_paths,
        )
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

/// Empirical characteristic function of scalar samples at `xi`: (Re, Im).
pub fn ecf_scalar(xs: &[f64], xi: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let (c, s) = xs.iter().fold((0.0, 0.0), |(c, s), x| {
        let (sn, cs) = (xi * x).sin_cos();
        (c + cs, s + sn)
    });
    (c / n, s / n)
}

/// Empirical characteristic function of vector samples stored row-major.
pub fn ecf_vector(xs: &[f64], dim: usize, xi: &[f64]) -> (f64, f64) {
    let n = (xs.len() / dim) as f64;
    let (c, s) = xs.chunks_exact(dim).fold((0.0, 0.0), |(c, s), x| {
        let p: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
        let (sn, cs) = p.sin_cos();
        (c + cs, s + sn)
    });
    (c / n, s / n)
}

/// One-sample Kolmogorov-Smirnov statistic against U(0, 1).
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical coefficient c(level), so the critical
/// value is c / sqrt(n_eff).
pub fn ks_coefficient(level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt()
}

pub fn ks_critical(n: usize, level: f64) -> f64 {
    ks_coefficient(level) / (n as f64).sqrt()
}

pub fn ks_critical_two_sample(n: usize, m: usize, level: f64) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    ks_coefficient(level) / ne.sqrt()
}

/// Energy-distance two-sample permutation test on row-major vectors.
/// Returns (statistic, permutation p-value).
pub fn energy_test(
    x: &[f64],
    y: &[f64],
    dim: usize,
    permutations: usize,
    seed: u64,
) -> (f64, f64) {
    let n = x.len() / dim;
    let m = y.len() / dim;
    let total = n + m;
    let pts: Vec<&[f64]> = x.chunks_exact(dim).chain(y.chunks_exact(dim)).collect();
    let mut dist = vec![0.0f64; total * total];
    for i in 0..total {
        for j in (i + 1)..total {
            let d: f64 = pts[i]
                .iter()
                .zip(pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[i * total + j] = d;
            dist[j * total + i] = d;
        }
    }
    let stat = |labels: &[bool]| -> f64 {
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..total {
            let row = &dist[i * total..(i + 1) * total];
            for j in (i + 1)..total {
                match (labels[i], labels[j]) {
                    (true, true) => sxx += row[j],
                    (false, false) => syy += row[j],
                    _ => sxy += row[j],
                }
            }
        }
        let (nf, mf) = (n as f64, m as f64);
        let e = 2.0 * sxy / (nf * mf) - 2.0 * sxx / (nf * nf) - 2.0 * syy / (mf * mf);
        e * nf * mf / (nf + mf)
    };
    let mut labels: Vec<bool> = (0..total).map(|i| i < n).collect();
    let observed = stat(&labels);
    let mut rng = RngStream::new(seed, 0xE4E7);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        for i in (1..total).rev() {
            let j = (rng.uniform_open() * (i + 1) as f64) as usize;
            labels.swap(i, j.min(i));
        }
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    (observed, (exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Weighted least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

pub fn weighted_line_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += ws[i] * dx * dx;
        sxy += ws[i] * dx * dy;
        syy += ws[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = (0..n)
        .map(|i| {
            let r = ys[i] - intercept - slope * xs[i];
            ws[i] * r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = McEstimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.ci95, (2.0, 2.0));
    }

    #[test]
    fn exact_power_law_fit() {
        let xs: Vec<f64> = (3..9).map(|k| -(k as f64) * 2f64.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3f64.ln() + 0.5 * x).collect();
        let f = weighted_line_fit(&xs, &ys, &[1.0; 6]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 0.3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_grid_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&xs) <= 0.0005 + 1e-12);
    }

    #[test]
    fn ks_coefficient_matches_tables() {
        assert!((ks_coefficient(0.05) - 1.358).abs() < 1e-3);
        assert!((ks_coefficient(0.01) - 1.628).abs() < 1e-3);
    }

    #[test]
    fn energy_test_separates_shifted_samples() {
        let mut r = RngStream::new(5, 5);
        let x: Vec<f64> = (0..300).map(|_| r.normal()).collect();
        let y: Vec<f64> = (0..300).map(|_| r.normal() + 1.0).collect();
        let (_, p) = energy_test(&x, &y, 1, 99, 1);
        assert!(p < 0.02);
        let z: Vec<f64> = (0..300).map(|_| r.normal()).collect();
        let (_, p) = energy_test(&x, &z, 1, 99, 1);
        assert!(p > 0.01);
    }
}
