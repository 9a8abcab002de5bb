//! Velocity samples on a uniform periodic lattice.

use crate::domain::{Domain, Jacobian, Point, ORIGIN, ZERO_JACOBIAN};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Velocity samples on a periodic lattice at `time_samples` equally spaced
/// times spanning `[S, T]` (a single sample means a steady field).
///
/// Values between nodes are multilinear in space and linear in time. The
/// gradient is the centered difference at nodes, interpolated the same way.
#[derive(Clone, Debug)]
pub struct GriddedField {
    domain: Domain,
    lattice: Lattice,
    time_samples: usize,
    velocity: Vec<f64>,
    gradient: Vec<f64>,
}

impl GriddedField {
    /// `velocity` is laid out time-major, then row-major nodes, then `d`
    /// components.
    pub fn new(domain: Domain, counts: &[usize], time_samples: usize, velocity: Vec<f64>) -> Result<Self> {
        let lattice = Lattice::new(domain.dim(), counts, domain.period())?;
        if time_samples == 0 {
            return Err(Error::Shape("at least one time sample required".into()));
        }
        let expected = time_samples * lattice.len() * domain.dim();
        if velocity.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} velocity values, got {}",
                velocity.len()
            )));
        }
        if let Some(pos) = velocity.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("velocity sample {pos}")));
        }
        let mut field = Self { domain, lattice, time_samples, velocity, gradient: Vec::new() };
        field.gradient = field.centered_gradients();
        Ok(field)
    }

    /// Sample a function of `(t, x)` on the lattice.
    pub fn from_fn<F>(domain: Domain, counts: &[usize], time_samples: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, &Point) -> Point,
    {
        let lattice = Lattice::new(domain.dim(), counts, domain.period())?;
        let d = domain.dim();
        let mut data = Vec::with_capacity(time_samples * lattice.len() * d);
        for k in 0..time_samples {
            let t = sample_time(&domain, time_samples, k);
            for node in 0..lattice.len() {
                let u = f(t, &lattice.node(node));
                data.extend_from_slice(&u[..d]);
            }
        }
        Self::new(domain, counts, time_samples, data)
    }

    /// Build from explicit axis coordinates, checking that every axis is the
    /// uniform periodic lattice `i * L / n` and the times are uniform on `[S, T]`.
    pub fn from_axes(domain: Domain, axes: &[Vec<f64>], times: &[f64], velocity: Vec<f64>) -> Result<Self> {
        if axes.len() != domain.dim() {
            return Err(Error::Shape(format!("expected {} axes, got {}", domain.dim(), axes.len())));
        }
        let tol = 1e-9 * domain.period();
        for (a, axis) in axes.iter().enumerate() {
            let n = axis.len();
            let h = domain.period() / n as f64;
            for (i, x) in axis.iter().enumerate() {
                if (x - i as f64 * h).abs() > tol {
                    return Err(Error::NonUniformGrid(format!(
                        "axis {a} node {i} at {x}, expected {}",
                        i as f64 * h
                    )));
                }
            }
        }
        for (k, &t) in times.iter().enumerate() {
            let expect = sample_time(&domain, times.len(), k);
            if (t - expect).abs() > 1e-9 * domain.duration() {
                return Err(Error::NonUniformGrid(format!("time sample {k} at {t}, expected {expect}")));
            }
        }
        let counts: Vec<usize> = axes.iter().map(Vec::len).collect();
        Self::new(domain, &counts, times.len(), velocity)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn time_samples(&self) -> usize {
        self.time_samples
    }

    pub fn is_steady(&self) -> bool {
        self.time_samples == 1
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        sample_time(&self.domain, self.time_samples, k)
    }

    pub fn raw(&self) -> &[f64] {
        &self.velocity
    }

    pub fn node_velocity(&self, k: usize, node: usize) -> Point {
        let d = self.domain.dim();
        let base = (k * self.lattice.len() + node) * d;
        let mut u = ORIGIN;
        u[..d].copy_from_slice(&self.velocity[base..base + d]);
        u
    }

    pub fn node_gradient(&self, k: usize, node: usize) -> Jacobian {
        let d = self.domain.dim();
        let base = (k * self.lattice.len() + node) * d * d;
        let mut j = ZERO_JACOBIAN;
        for (i, row) in j.iter_mut().enumerate().take(d) {
            row[..d].copy_from_slice(&self.gradient[base + i * d..base + i * d + d]);
        }
        j
    }

    /// Time bracket `(k0, k1, theta)` with `t = (1-theta) t_k0 + theta t_k1`.
    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        if self.time_samples == 1 {
            return (0, 0, 0.0);
        }
        let last = (self.time_samples - 1) as f64;
        let tau = ((t - self.domain.start()) / self.domain.duration() * last).clamp(0.0, last);
        let k0 = (tau.floor() as usize).min(self.time_samples - 2);
        (k0, k0 + 1, tau - k0 as f64)
    }

    pub fn velocity(&self, t: f64, x: &Point) -> Point {
        let d = self.domain.dim();
        let st = self.lattice.stencil(x);
        let (k0, k1, theta) = self.bracket(t);
        let mut out = ORIGIN;
        for (k, wt) in [(k0, 1.0 - theta), (k1, theta)] {
            if wt == 0.0 {
                continue;
            }
            let base_t = k * self.lattice.len();
            for c in 0..st.len {
                let w = wt * st.weights[c];
                let base = (base_t + st.nodes[c]) * d;
                for i in 0..d {
                    out[i] += w * self.velocity[base + i];
                }
            }
        }
        out
    }

    pub fn gradient(&self, t: f64, x: &Point) -> Jacobian {
        let d = self.domain.dim();
        let st = self.lattice.stencil(x);
        let (k0, k1, theta) = self.bracket(t);
        let mut out = ZERO_JACOBIAN;
        for (k, wt) in [(k0, 1.0 - theta), (k1, theta)] {
            if wt == 0.0 {
                continue;
            }
            let base_t = k * self.lattice.len();
            for c in 0..st.len {
                let w = wt * st.weights[c];
                let base = (base_t + st.nodes[c]) * d * d;
                for i in 0..d {
                    for j in 0..d {
                        out[i][j] += w * self.gradient[base + i * d + j];
                    }
                }
            }
        }
        out
    }

    /// Centered-difference divergence at every node of time sample `k`.
    pub fn discrete_divergence(&self, k: usize) -> Vec<f64> {
        let d = self.domain.dim();
        (0..self.lattice.len())
            .map(|node| {
                let g = self.node_gradient(k, node);
                (0..d).map(|i| g[i][i]).sum()
            })
            .collect()
    }

    pub fn max_speed(&self) -> f64 {
        let d = self.domain.dim();
        self.velocity
            .chunks(d)
            .map(|u| u.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_gradient(&self) -> f64 {
        let d = self.domain.dim();
        self.gradient
            .chunks(d * d)
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn centered_gradients(&self) -> Vec<f64> {
        let d = self.domain.dim();
        let n = self.lattice.len();
        let mut out = vec![0.0; self.time_samples * n * d * d];
        for k in 0..self.time_samples {
            for node in 0..n {
                let mi = self.lattice.multi_index(node);
                for j in 0..d {
                    let mut plus = mi;
                    let mut minus = mi;
                    plus[j] += 1;
                    minus[j] -= 1;
                    let up = self.node_velocity(k, self.lattice.index(plus));
                    let um = self.node_velocity(k, self.lattice.index(minus));
                    let inv = 0.5 / self.lattice.spacing(j);
                    for i in 0..d {
                        out[((k * n + node) * d + i) * d + j] = (up[i] - um[i]) * inv;
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn sample_time(domain: &Domain, samples: usize, k: usize) -> f64 {
    if samples <= 1 {
        domain.start()
    } else {
        domain.start() + domain.duration() * k as f64 / (samples - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn swirl(dom: Domain) -> GriddedField {
        GriddedField::from_fn(dom, &[16, 16], 3, |t, x| {
            let s = 1.0 + t;
            [s * (2.0 * PI * x[1]).sin(), s * (2.0 * PI * x[0]).cos(), 0.0]
        })
        .unwrap()
    }

    #[test]
    fn nodes_reproduce_samples() {
        let dom = Domain::unit(2).unwrap();
        let g = swirl(dom);
        for k in 0..3 {
            for node in [0, 5, 17, 255] {
                let x = g.lattice().node(node);
                let u = g.velocity(g.sample_time(k), &x);
                let s = g.node_velocity(k, node);
                assert!((u[0] - s[0]).abs() < 1e-12 && (u[1] - s[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_in_time_between_samples() {
        let dom = Domain::unit(2).unwrap();
        let g = swirl(dom);
        let x = g.lattice().node(37);
        let a = g.velocity(0.0, &x);
        let b = g.velocity(0.5, &x);
        let mid = g.velocity(0.25, &x);
        assert!((mid[0] - 0.5 * (a[0] + b[0])).abs() < 1e-12);
    }

    #[test]
    fn divergence_free_samples_have_zero_discrete_divergence() {
        let dom = Domain::unit(2).unwrap();
        let g = swirl(dom);
        for k in 0..3 {
            assert!(g.discrete_divergence(k).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let dom = Domain::unit(2).unwrap();
        assert!(matches!(
            GriddedField::new(dom, &[4, 4], 1, vec![0.0; 31]),
            Err(Error::Shape(_))
        ));
        let mut v = vec![0.0; 32];
        v[3] = f64::NAN;
        assert!(matches!(GriddedField::new(dom, &[4, 4], 1, v), Err(Error::NonFinite(_))));
        let axes = vec![vec![0.0, 0.25, 0.5, 0.8], vec![0.0, 0.25, 0.5, 0.75]];
        assert!(matches!(
            GriddedField::from_axes(dom, &axes, &[0.0], vec![0.0; 32]),
            Err(Error::NonUniformGrid(_))
        ));
    }
}
