//! Parametric coefficient families.
//!
//! Coefficients are data rather than closures so that a model can be written
//! to and read back from an experiment config without loss.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A bounded scalar function on R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarField {
    Constant {
        value: f64,
    },
    /// `base + amp * sin(freq * x[axis])`
    Sine {
        base: f64,
        amp: f64,
        freq: f64,
        axis: usize,
    },
    /// `base + amp * cos(freq * x[axis])`
    Cosine {
        base: f64,
        amp: f64,
        freq: f64,
        axis: usize,
    },
    /// `scale * (1 + amplitude * sum_{k=0}^{levels} 2^{-beta k} cos(2^k x[axis]))`,
    /// Hölder continuous of order `beta`.
    Weierstrass {
        scale: f64,
        beta: f64,
        amplitude: f64,
        levels: u32,
        axis: usize,
    },
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Sine {
                base,
                amp,
                freq,
                axis,
            } => base + amp * (freq * x[axis]).sin(),
            Self::Cosine {
                base,
                amp,
                freq,
                axis,
            } => base + amp * (freq * x[axis]).cos(),
            Self::Weierstrass {
                scale,
                beta,
                amplitude,
                levels,
                axis,
            } => scale * weierstrass_value(beta, amplitude, levels, x[axis]),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Sine { amp, .. } | Self::Cosine { amp, .. } => *amp == 0.0,
            Self::Weierstrass { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// Declared Hölder exponent (infinite for smooth families).
    pub fn holder_exponent(&self) -> f64 {
        match self {
            Self::Weierstrass {
                beta, amplitude, ..
            } if *amplitude != 0.0 => *beta,
            _ => f64::INFINITY,
        }
    }

    /// Range bounds `(inf, sup)` of the family.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Constant { value } => (value, value),
            Self::Sine { base, amp, .. } | Self::Cosine { base, amp, .. } => {
                (base - amp.abs(), base + amp.abs())
            }
            Self::Weierstrass {
                scale,
                beta,
                amplitude,
                levels,
                ..
            } => {
                let s = amplitude.abs() * dyadic_sum(beta, levels);
                let (lo, hi) = (scale * (1.0 - s), scale * (1.0 + s));
                (lo.min(hi), lo.max(hi))
            }
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        let axis = match self {
            Self::Constant { .. } => return Ok(()),
            Self::Sine { axis, .. } | Self::Cosine { axis, .. } => *axis,
            Self::Weierstrass {
                axis,
                beta,
                amplitude,
                levels,
                ..
            } => {
                check_weierstrass(*beta, *amplitude, *levels)?;
                *axis
            }
        };
        if axis >= dim {
            return Err(Error::InvalidParameter(format!(
                "field axis {axis} out of range for dimension {dim}"
            )));
        }
        Ok(())
    }
}

/// `sum_{k=0}^{levels} 2^{-beta k}`
pub fn dyadic_sum(beta: f64, levels: u32) -> f64 {
    (0..=levels).map(|k| 2f64.powf(-beta * k as f64)).sum()
}

pub(crate) fn weierstrass_value(beta: f64, amplitude: f64, levels: u32, t: f64) -> f64 {
    let mut s = 0.0;
    let mut freq = 1.0;
    let mut weight = 1.0;
    let decay = 2f64.powf(-beta);
    for _ in 0..=levels {
        s += weight * (freq * t).cos();
        freq *= 2.0;
        weight *= decay;
    }
    1.0 + amplitude * s
}

/// Parameter check for the Weierstrass family: `beta in (0, 1)`,
/// `|amplitude| < 1`, `levels >= 8`, and the function stays positive.
pub fn check_weierstrass(beta: f64, amplitude: f64, levels: u32) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain {
            name: "beta",
            value: beta,
            range: "(0, 1)",
        });
    }
    if !(amplitude.abs() < 1.0) {
        return Err(Error::Domain {
            name: "amplitude",
            value: amplitude,
            range: "(-1, 1)",
        });
    }
    if levels < 8 {
        return Err(Error::InvalidParameter(format!(
            "weierstrass levels = {levels}, need at least 8"
        )));
    }
    let s = amplitude.abs() * dyadic_sum(beta, levels);
    if s >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "weierstrass amplitude {amplitude} with beta {beta} can reach {:.4} <= 0",
            1.0 - s
        )));
    }
    Ok(())
}

/// A bounded map R^d -> R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VectorField {
    Zero,
    Components { fields: Vec<ScalarField> },
}

impl VectorField {
    pub fn constant(v: &[f64]) -> Self {
        Self::Components {
            fields: v.iter().map(|&x| ScalarField::constant(x)).collect(),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Self::Components { fields } => {
                for (o, f) in out.iter_mut().zip(fields) {
                    *o = f.eval(x);
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Components { fields } => fields
                .iter()
                .all(|f| matches!(f, ScalarField::Constant { value } if *value == 0.0)),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Components { fields } => fields.iter().all(ScalarField::is_constant),
        }
    }

    pub fn holder_exponent(&self) -> f64 {
        match self {
            Self::Zero => f64::INFINITY,
            Self::Components { fields } => fields
                .iter()
                .map(ScalarField::holder_exponent)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Components { fields } => {
                if fields.len() != dim {
                    return Err(Error::InvalidParameter(format!(
                        "vector field has {} components for dimension {dim}",
                        fields.len()
                    )));
                }
                fields.iter().try_for_each(|f| f.check(dim))
            }
        }
    }
}

/// A bounded map R^d -> R^{d x d}, evaluated row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixField {
    ScaledIdentity { factor: ScalarField },
    Diagonal { fields: Vec<ScalarField> },
    Constant { entries: Vec<f64> },
}

impl MatrixField {
    pub fn identity() -> Self {
        Self::ScaledIdentity {
            factor: ScalarField::constant(1.0),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            Self::ScaledIdentity { factor } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let s = factor.eval(x);
                for i in 0..d {
                    out[i * d + i] = s;
                }
            }
            Self::Diagonal { fields } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, f) in fields.iter().enumerate() {
                    out[i * d + i] = f.eval(x);
                }
            }
            Self::Constant { entries } => out.copy_from_slice(entries),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len() * x.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::ScaledIdentity { factor } => factor.is_constant(),
            Self::Diagonal { fields } => fields.iter().all(ScalarField::is_constant),
            Self::Constant { .. } => true,
        }
    }

    /// True when the field is `s(x) * I`.
    pub fn is_scalar(&self) -> bool {
        matches!(self, Self::ScaledIdentity { .. })
    }

    pub fn holder_exponent(&self) -> f64 {
        match self {
            Self::ScaledIdentity { factor } => factor.holder_exponent(),
            Self::Diagonal { fields } => fields
                .iter()
                .map(ScalarField::holder_exponent)
                .fold(f64::INFINITY, f64::min),
            Self::Constant { .. } => f64::INFINITY,
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            Self::ScaledIdentity { factor } => factor.check(dim),
            Self::Diagonal { fields } => {
                if fields.len() != dim {
                    return Err(Error::InvalidParameter(format!(
                        "diagonal matrix field has {} entries for dimension {dim}",
                        fields.len()
                    )));
                }
                fields.iter().try_for_each(|f| f.check(dim))
            }
            Self::Constant { entries } => {
                if entries.len() != dim * dim {
                    return Err(Error::InvalidParameter(format!(
                        "constant matrix has {} entries, expected {}",
                        entries.len(),
                        dim * dim
                    )));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weierstrass_at_origin_is_one_plus_amplitude_sum() {
        let f = ScalarField::Weierstrass {
            scale: 1.0,
            beta: 0.6,
            amplitude: 0.2,
            levels: 10,
            axis: 0,
        };
        let expect = 1.0 + 0.2 * dyadic_sum(0.6, 10);
        assert!((f.eval(&[0.0]) - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_amplitude_is_constant_one() {
        let f = ScalarField::Weierstrass {
            scale: 1.0,
            beta: 0.5,
            amplitude: 0.0,
            levels: 12,
            axis: 0,
        };
        for x in [-3.0, 0.1, 7.7] {
            assert_eq!(f.eval(&[x]), 1.0);
        }
        assert!(f.is_constant());
    }

    #[test]
    fn weierstrass_positivity_is_validated() {
        assert!(check_weierstrass(0.75, 0.25, 12).is_ok());
        assert!(check_weierstrass(0.75, 0.5, 12).is_err());
        assert!(check_weierstrass(0.75, 0.1, 4).is_err());
        assert!(check_weierstrass(1.2, 0.1, 12).is_err());
    }

    #[test]
    fn matrix_fields_fill_row_major() {
        let m = MatrixField::Diagonal {
            fields: vec![ScalarField::constant(2.0), ScalarField::constant(3.0)],
        };
        assert_eq!(m.eval(&[0.0, 0.0]), vec![2.0, 0.0, 0.0, 3.0]);
    }
}
