//! Small dense row-major matrices for d <= 3 state spaces.

/// `out = m * v` for a row-major `n x n` matrix.
pub fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    debug_assert_eq!(m.len(), n * n);
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i * n + j] * v[j]).sum();
    }
}

/// `out += m * v`.
pub fn mat_vec_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        out[i] += (0..n).map(|j| m[i * n + j] * v[j]).sum::<f64>();
    }
}

pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn det(m: &[f64], n: usize) -> f64 {
    match n {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            let mut a = m.to_vec();
            let mut d = 1.0;
            for c in 0..n {
                let p = (c..n)
                    .max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))
                    .unwrap();
                if a[p * n + c] == 0.0 {
                    return 0.0;
                }
                if p != c {
                    for k in 0..n {
                        a.swap(p * n + k, c * n + k);
                    }
                    d = -d;
                }
                d *= a[c * n + c];
                for r in (c + 1)..n {
                    let f = a[r * n + c] / a[c * n + c];
                    for k in c..n {
                        a[r * n + k] -= f * a[c * n + k];
                    }
                }
            }
            d
        }
    }
}

/// Inverse by Gauss-Jordan elimination; `None` if singular.
pub fn inverse(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = identity(n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        let piv = a[p * n + c];
        if piv.abs() < 1e-300 {
            return None;
        }
        for k in 0..n {
            a.swap(p * n + k, c * n + k);
            inv.swap(p * n + k, c * n + k);
        }
        for k in 0..n {
            a[c * n + k] /= piv;
            inv[c * n + k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r * n + c];
                for k in 0..n {
                    a[r * n + k] -= f * a[c * n + k];
                    inv[r * n + k] -= f * inv[c * n + k];
                }
            }
        }
    }
    Some(inv)
}

/// Lower Cholesky factor of a symmetric positive semi-definite matrix.
/// Non-positive pivots (semi-definite directions) are set to zero.
pub fn cholesky(m: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let v = m[i * n + i] - s;
                l[i * n + j] = if v > 0.0 { v.sqrt() } else { 0.0 };
            } else if l[j * n + j] > 0.0 {
                l[i * n + j] = (m[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    l
}

/// Rotation by `theta` in the (0, 1) coordinate plane of R^n.
pub fn plane_rotation(n: usize, theta: f64) -> Vec<f64> {
    let mut r = identity(n);
    if n >= 2 {
        let (s, c) = theta.sin_cos();
        r[0] = c;
        r[1] = -s;
        r[n] = s;
        r[n + 1] = c;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = [2.0, 1.0, 0.5, 0.0, 3.0, 1.0, 1.0, 0.0, 4.0];
        let inv = inverse(&m, 3).unwrap();
        let p = mat_mul(&m, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 3 + j] - e).abs() < 1e-12);
            }
        }
        assert!((det(&m, 3) - 23.5).abs() < 1e-12);
    }

    #[test]
    fn singular_has_no_inverse() {
        assert!(inverse(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&m, 2);
        let llt = mat_mul(&l, &transpose(&l, 2), 2);
        for (a, b) in llt.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
