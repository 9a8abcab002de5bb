//! Periodic spacetime domain and small fixed-size vector helpers.
//!
//! Points always carry three components; only the first `dim` are used and the
//! rest stay zero. This keeps the hot loops allocation-free for `d <= 3`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A spatial point (or vector) in up to three dimensions.
pub type Point = [f64; 3];

/// A velocity gradient, `jac[i][j] = d u_i / d x_j`.
pub type Jacobian = [[f64; 3]; 3];

pub const ORIGIN: Point = [0.0; 3];
pub const ZERO_JACOBIAN: Jacobian = [[0.0; 3]; 3];

/// The torus `[0, L)^d` over the time span `(S, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    period: f64,
    start: f64,
    end: f64,
}

impl Domain {
    pub fn new(dim: usize, period: f64, start: f64, end: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDomain(format!("dimension {dim} not in 1..=3")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidDomain(format!("period {period} must be positive")));
        }
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::InvalidDomain(format!(
                "time span ({start}, {end}) must be finite and increasing"
            )));
        }
        Ok(Self { dim, period, start, end })
    }

    /// Unit torus in `dim` dimensions over `(0, 1)`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(dim, 1.0, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Largest admissible cylinder radius, `L/8`.
    pub fn max_radius(&self) -> f64 {
        self.period / 8.0
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    /// `(lo, hi)` lies inside `(S, T)`.
    pub fn contains_span(&self, lo: f64, hi: f64) -> bool {
        lo >= self.start && hi <= self.end
    }

    pub fn check_radius(&self, eps: f64) -> Result<()> {
        if eps > 0.0 && eps <= self.max_radius() * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "radius {eps} outside (0, L/8 = {}]",
                self.max_radius()
            )))
        }
    }

    /// Reduce each used coordinate into `[0, L)`.
    pub fn wrap(&self, x: &Point) -> Point {
        let mut out = ORIGIN;
        for i in 0..self.dim {
            out[i] = x[i].rem_euclid(self.period);
            if out[i] >= self.period {
                out[i] = 0.0;
            }
        }
        out
    }

    /// Minimal-image displacement `a - b` on the torus.
    pub fn delta(&self, a: &Point, b: &Point) -> Point {
        let mut out = ORIGIN;
        for i in 0..self.dim {
            let mut v = a[i] - b[i];
            v -= self.period * (v / self.period).round();
            out[i] = v;
        }
        out
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        norm(&self.delta(a, b), self.dim)
    }

    pub fn unit_ball_volume(&self) -> f64 {
        unit_ball_volume(self.dim)
    }

    pub fn ball_volume(&self, r: f64) -> f64 {
        unit_ball_volume(self.dim) * r.powi(self.dim as i32)
    }

    /// `|Q_eps| = 2 eps^2 |B_eps|`.
    pub fn cylinder_measure(&self, eps: f64) -> f64 {
        2.0 * eps * eps * self.ball_volume(eps)
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("dimension {d} not supported"),
    }
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: &Point, s: f64, b: &Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn norm(a: &Point, d: usize) -> f64 {
    a[..d].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Frobenius norm of the leading `d x d` block.
#[inline]
pub fn frobenius(j: &Jacobian, d: usize) -> f64 {
    let mut s = 0.0;
    for row in j.iter().take(d) {
        for v in row.iter().take(d) {
            s += v * v;
        }
    }
    s.sqrt()
}

#[inline]
pub fn jacobian_scale(j: &Jacobian, s: f64) -> Jacobian {
    let mut out = *j;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    out
}

/// `j * v` restricted to `d` components.
#[inline]
pub fn jacobian_apply(j: &Jacobian, v: &Point, d: usize) -> Point {
    let mut out = ORIGIN;
    for i in 0..d {
        out[i] = (0..d).map(|k| j[i][k] * v[k]).sum();
    }
    out
}

pub fn trace(j: &Jacobian, d: usize) -> f64 {
    (0..d).map(|i| j[i][i]).sum()
}

/// Build a `Point` from a slice of at most three components.
pub fn point_from(v: &[f64]) -> Point {
    let mut p = ORIGIN;
    for (dst, src) in p.iter_mut().zip(v) {
        *dst = *src;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_domains() {
        assert!(Domain::new(0, 1.0, 0.0, 1.0).is_err());
        assert!(Domain::new(4, 1.0, 0.0, 1.0).is_err());
        assert!(Domain::new(2, 0.0, 0.0, 1.0).is_err());
        assert!(Domain::new(2, 1.0, 1.0, 1.0).is_err());
        assert!(Domain::new(2, 1.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn torus_distance_uses_minimal_image() {
        let dom = Domain::unit(2).unwrap();
        let d = dom.distance(&[0.05, 0.5, 0.0], &[0.95, 0.5, 0.0]);
        assert!((d - 0.1).abs() < 1e-12);
        let w = dom.wrap(&[-0.25, 1.5, 7.0]);
        assert_eq!(w, [0.75, 0.5, 0.0]);
    }

    #[test]
    fn cylinder_measure_matches_formula() {
        let dom = Domain::unit(2).unwrap();
        let m = dom.cylinder_measure(0.1);
        assert!((m - 2.0 * 1e-4 * PI).abs() < 1e-16);
        assert!((m - 6.2832e-4).abs() < 1e-8);
    }
}
