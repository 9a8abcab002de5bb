//! Closed-form divergence-free velocity fields.

use std::f64::consts::PI;

use crate::domain::{Domain, Jacobian, Point, ORIGIN, ZERO_JACOBIAN};
use crate::error::{Error, Result};

/// Catalog of analytic steady fields on the torus. All are exactly
/// divergence-free.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticField {
    Zero,
    Constant(Point),
    /// `u = (rate * x_2, 0, 0)`; not periodic.
    LinearShear { rate: f64 },
    /// `u = A (sin kx cos ky, -cos kx sin ky, 0)`, `k = 2 pi / L`.
    TaylorGreen { amplitude: f64 },
    /// Arnold–Beltrami–Childress flow with wavenumber `2 pi / L`.
    Abc { a: f64, b: f64, c: f64 },
}

/// How spatial mollification acts on a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MollifierAction {
    /// Affine fields are reproduced exactly by a radial mollifier.
    Identity,
    /// Every Fourier mode has wavenumber magnitude `k`, so mollification
    /// multiplies the field by the mollifier's Fourier transform at `eps k`.
    Shell(f64),
    /// No closed form.
    General,
}

pub const CATALOG: &[&str] = &["zero", "constant", "linear-shear", "taylor-green", "abc"];

impl AnalyticField {
    /// Parse a catalog id with its parameter list.
    ///
    /// * `zero`: no parameters
    /// * `constant`: `d` velocity components
    /// * `linear-shear`: optional rate (default 1), `d >= 2`
    /// * `taylor-green`: optional amplitude (default 1), `d >= 2`
    /// * `abc`: optional `A, B, C` (default 1, 1, 1), `d = 3`
    pub fn from_catalog(name: &str, params: &[f64], dim: usize) -> Result<Self> {
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameters of `{name}`")));
        }
        let need_dim = |min: usize| -> Result<()> {
            if dim < min {
                Err(Error::UnsupportedDimension { name: name.to_string(), dim })
            } else {
                Ok(())
            }
        };
        let optional = |idx: usize, default: f64| params.get(idx).copied().unwrap_or(default);
        let max_params = |n: usize| -> Result<()> {
            if params.len() > n {
                Err(Error::InvalidParameter(format!(
                    "`{name}` takes at most {n} parameters, got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "zero" => {
                max_params(0)?;
                Ok(Self::Zero)
            }
            "constant" => {
                if params.len() != dim {
                    return Err(Error::InvalidParameter(format!(
                        "`constant` needs {dim} components, got {}",
                        params.len()
                    )));
                }
                let mut c = ORIGIN;
                c[..dim].copy_from_slice(params);
                Ok(Self::Constant(c))
            }
            "linear-shear" => {
                need_dim(2)?;
                max_params(1)?;
                Ok(Self::LinearShear { rate: optional(0, 1.0) })
            }
            "taylor-green" => {
                need_dim(2)?;
                max_params(1)?;
                Ok(Self::TaylorGreen { amplitude: optional(0, 1.0) })
            }
            "abc" => {
                if dim != 3 {
                    return Err(Error::UnsupportedDimension { name: name.to_string(), dim });
                }
                max_params(3)?;
                Ok(Self::Abc { a: optional(0, 1.0), b: optional(1, 1.0), c: optional(2, 1.0) })
            }
            other => Err(Error::UnknownField(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Constant(_) => "constant",
            Self::LinearShear { .. } => "linear-shear",
            Self::TaylorGreen { .. } => "taylor-green",
            Self::Abc { .. } => "abc",
        }
    }

    pub fn is_periodic(&self) -> bool {
        !matches!(self, Self::LinearShear { .. })
    }

    pub fn mollifier_action(&self, domain: &Domain) -> MollifierAction {
        let k = 2.0 * PI / domain.period();
        match self {
            Self::Zero | Self::Constant(_) | Self::LinearShear { .. } => MollifierAction::Identity,
            Self::TaylorGreen { .. } => MollifierAction::Shell(k * 2f64.sqrt()),
            Self::Abc { .. } => MollifierAction::Shell(k),
        }
    }

    pub fn velocity(&self, domain: &Domain, x: &Point) -> Point {
        let k = 2.0 * PI / domain.period();
        match *self {
            Self::Zero => ORIGIN,
            Self::Constant(c) => c,
            Self::LinearShear { rate } => [rate * x[1], 0.0, 0.0],
            Self::TaylorGreen { amplitude } => {
                let (sx, cx) = (k * x[0]).sin_cos();
                let (sy, cy) = (k * x[1]).sin_cos();
                [amplitude * sx * cy, -amplitude * cx * sy, 0.0]
            }
            Self::Abc { a, b, c } => {
                let (sx, cx) = (k * x[0]).sin_cos();
                let (sy, cy) = (k * x[1]).sin_cos();
                let (sz, cz) = (k * x[2]).sin_cos();
                [a * sz + c * cy, b * sx + a * cz, c * sy + b * cx]
            }
        }
    }

    pub fn gradient(&self, domain: &Domain, x: &Point) -> Jacobian {
        let k = 2.0 * PI / domain.period();
        match *self {
            Self::Zero | Self::Constant(_) => ZERO_JACOBIAN,
            Self::LinearShear { rate } => {
                let mut j = ZERO_JACOBIAN;
                j[0][1] = rate;
                j
            }
            Self::TaylorGreen { amplitude } => {
                let (sx, cx) = (k * x[0]).sin_cos();
                let (sy, cy) = (k * x[1]).sin_cos();
                let ak = amplitude * k;
                let mut j = ZERO_JACOBIAN;
                j[0][0] = ak * cx * cy;
                j[0][1] = -ak * sx * sy;
                j[1][0] = ak * sx * sy;
                j[1][1] = -ak * cx * cy;
                j
            }
            Self::Abc { a, b, c } => {
                let (sx, cx) = (k * x[0]).sin_cos();
                let (sy, cy) = (k * x[1]).sin_cos();
                let (sz, cz) = (k * x[2]).sin_cos();
                [
                    [0.0, -c * k * sy, a * k * cz],
                    [b * k * cx, 0.0, -a * k * sz],
                    [-b * k * sx, c * k * cy, 0.0],
                ]
            }
        }
    }

    /// Bound on `|u|` over the ball of radius `radius` around `center`.
    pub fn speed_bound(&self, center: &Point, radius: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant(c) => (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt(),
            Self::LinearShear { rate } => rate.abs() * (center[1].abs() + radius),
            Self::TaylorGreen { amplitude } => amplitude.abs(),
            Self::Abc { a, b, c } => {
                let (a, b, c) = (a.abs(), b.abs(), c.abs());
                ((a + c).powi(2) + (b + a).powi(2) + (c + b).powi(2)).sqrt()
            }
        }
    }

    /// Bound on the Frobenius norm of `grad u`.
    pub fn gradient_bound(&self, domain: &Domain) -> f64 {
        let k = 2.0 * PI / domain.period();
        match *self {
            Self::Zero | Self::Constant(_) => 0.0,
            Self::LinearShear { rate } => rate.abs(),
            Self::TaylorGreen { amplitude } => amplitude.abs() * k * 2f64.sqrt(),
            Self::Abc { a, b, c } => k * (a * a + b * b + c * c).sqrt(),
        }
    }
}
