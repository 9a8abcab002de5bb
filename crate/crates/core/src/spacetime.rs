//! Scalar functions of `(t, x)` and rectangular spacetime sample grids.

use serde::Serialize;

use crate::domain::{Domain, Point, ORIGIN};
use crate::error::{Error, Result};

/// Axis-aligned spacetime box; spatial bounds are unwrapped and understood
/// modulo the period of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportBox {
    pub t_lo: f64,
    pub t_hi: f64,
    pub lo: Point,
    pub hi: Point,
}

impl SupportBox {
    /// Whether the box `[t_lo, t_hi] x [lo, hi]` can meet this one on the torus.
    pub fn meets(&self, dom: &Domain, t_lo: f64, t_hi: f64, lo: &Point, hi: &Point) -> bool {
        if t_hi < self.t_lo || t_lo > self.t_hi {
            return false;
        }
        let l = dom.period();
        (0..dom.dim()).all(|a| {
            let (c1, r1) = (0.5 * (self.lo[a] + self.hi[a]), 0.5 * (self.hi[a] - self.lo[a]));
            let (c2, r2) = (0.5 * (lo[a] + hi[a]), 0.5 * (hi[a] - lo[a]));
            if r1 + r2 >= 0.5 * l {
                return true;
            }
            let mut gap = c1 - c2;
            gap -= l * (gap / l).round();
            gap.abs() <= r1 + r2
        })
    }
}

/// A scalar function on spacetime, periodic in space.
pub trait SpacetimeFn: Sync {
    fn eval(&self, t: f64, x: &Point) -> f64;

    /// A box outside of which the function vanishes, if known.
    fn support(&self) -> Option<SupportBox> {
        None
    }

    /// Whether the function is known not to depend on `t`.
    fn is_steady(&self) -> bool {
        false
    }
}

impl<F: Fn(f64, &Point) -> f64 + Sync> SpacetimeFn for F {
    fn eval(&self, t: f64, x: &Point) -> f64 {
        self(t, x)
    }
}

/// Constant function.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl SpacetimeFn for Constant {
    fn eval(&self, _t: f64, _x: &Point) -> f64 {
        self.0
    }

    fn is_steady(&self) -> bool {
        true
    }
}

/// Indicator of `|t - t_c| < half_t`, `|x_i - c_i| < half_x` (torus).
#[derive(Clone, Copy, Debug)]
pub struct BoxIndicator {
    domain: Domain,
    t_center: f64,
    half_t: f64,
    center: Point,
    half_x: f64,
}

impl BoxIndicator {
    pub fn new(domain: Domain, t_center: f64, half_t: f64, center: Point, half_x: f64) -> Self {
        Self { domain, t_center, half_t, center, half_x }
    }

    /// Exact spacetime measure.
    pub fn measure(&self) -> f64 {
        2.0 * self.half_t * (2.0 * self.half_x).powi(self.domain.dim() as i32)
    }
}

impl SpacetimeFn for BoxIndicator {
    fn eval(&self, t: f64, x: &Point) -> f64 {
        if (t - self.t_center).abs() >= self.half_t {
            return 0.0;
        }
        let dl = self.domain.delta(x, &self.center);
        if dl[..self.domain.dim()].iter().all(|v| v.abs() < self.half_x) {
            1.0
        } else {
            0.0
        }
    }

    fn support(&self) -> Option<SupportBox> {
        let mut lo = ORIGIN;
        let mut hi = ORIGIN;
        for a in 0..self.domain.dim() {
            lo[a] = self.center[a] - self.half_x;
            hi[a] = self.center[a] + self.half_x;
        }
        Some(SupportBox { t_lo: self.t_center - self.half_t, t_hi: self.t_center + self.half_t, lo, hi })
    }
}

/// `amplitude * exp(1 - 1 / (1 - rho^2))` with
/// `rho^2 = ((t - t_c) / r_t)^2 + |x - c|^2 / r_x^2` (torus distance); the
/// peak value is `amplitude`.
#[derive(Clone, Copy, Debug)]
pub struct SmoothBump {
    domain: Domain,
    t_center: f64,
    r_t: f64,
    center: Point,
    r_x: f64,
    amplitude: f64,
}

impl SmoothBump {
    pub fn new(domain: Domain, t_center: f64, r_t: f64, center: Point, r_x: f64, amplitude: f64) -> Self {
        Self { domain, t_center, r_t, center, r_x, amplitude }
    }
}

impl SpacetimeFn for SmoothBump {
    fn eval(&self, t: f64, x: &Point) -> f64 {
        let a = (t - self.t_center) / self.r_t;
        let rho2 = a * a + (self.domain.distance(x, &self.center) / self.r_x).powi(2);
        if rho2 < 1.0 {
            self.amplitude * (1.0 - 1.0 / (1.0 - rho2)).exp()
        } else {
            0.0
        }
    }

    fn support(&self) -> Option<SupportBox> {
        let mut lo = ORIGIN;
        let mut hi = ORIGIN;
        for a in 0..self.domain.dim() {
            lo[a] = self.center[a] - self.r_x;
            hi[a] = self.center[a] + self.r_x;
        }
        Some(SupportBox { t_lo: self.t_center - self.r_t, t_hi: self.t_center + self.r_t, lo, hi })
    }
}

/// Sample points `(t_k, origin + i * spacing)`: uniform times times a
/// rectangular block of spatial nodes (coordinates may exceed `[0, L)`; they
/// are read modulo `L`). Each point stands for one cell of volume
/// `dt * prod(spacing)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpacetimeGrid {
    dim: usize,
    times: Vec<f64>,
    dt: f64,
    origin: Point,
    spacing: [f64; 3],
    counts: [usize; 3],
}

impl SpacetimeGrid {
    pub fn new(dim: usize, times: Vec<f64>, dt: f64, origin: Point, spacing: [f64; 3], counts: &[usize]) -> Result<Self> {
        if counts.len() != dim || counts.contains(&0) || times.is_empty() {
            return Err(Error::Shape("spacetime grid needs a nonempty block in every axis".into()));
        }
        if !(dt > 0.0) || spacing[..dim].iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidParameter("grid spacings must be positive".into()));
        }
        let mut c = [1; 3];
        c[..dim].copy_from_slice(counts);
        Ok(Self { dim, times, dt, origin, spacing, counts: c })
    }

    /// Cell-centered times in `(S, T)` and the full torus lattice with `n`
    /// nodes per axis.
    pub fn full(domain: &Domain, n: usize, n_times: usize) -> Result<Self> {
        let dt = domain.duration() / n_times as f64;
        let times = (0..n_times).map(|k| domain.start() + (k as f64 + 0.5) * dt).collect();
        let h = domain.period() / n as f64;
        Self::new(domain.dim(), times, dt, ORIGIN, [h; 3], &vec![n; domain.dim()])
    }

    /// Lattice-aligned block of the torus lattice (`n` per axis) covering
    /// `[lo, hi]` in space, with cell-centered times of step `dt` covering
    /// `[t_lo, t_hi]` clipped to `(S, T)`.
    pub fn window(domain: &Domain, n: usize, dt: f64, t_lo: f64, t_hi: f64, lo: &Point, hi: &Point) -> Result<Self> {
        let d = domain.dim();
        let h = domain.period() / n as f64;
        let mut origin = ORIGIN;
        let mut counts = vec![0; d];
        for a in 0..d {
            if hi[a] - lo[a] >= domain.period() {
                origin[a] = 0.0;
                counts[a] = n;
            } else {
                let i0 = (lo[a] / h).floor();
                let i1 = (hi[a] / h).ceil();
                origin[a] = i0 * h;
                counts[a] = ((i1 - i0) as usize + 1).min(n);
            }
        }
        // cell-centered times on the global grid S + (k + 1/2) dt
        let s = domain.start();
        let k0 = (((t_lo.max(s) - s) / dt).floor() as i64).max(0);
        let k1 = ((t_hi.min(domain.end()) - s) / dt).ceil() as i64;
        let kmax = ((domain.duration() / dt).round() as i64).max(1);
        let times: Vec<f64> = (k0..k1.min(kmax)).map(|k| s + (k as f64 + 0.5) * dt).collect();
        Self::new(d, times, dt, origin, [h; 3], &counts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spatial_len(&self) -> usize {
        self.counts[..self.dim].iter().product()
    }

    pub fn len(&self) -> usize {
        self.times.len() * self.spatial_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.dt * self.spacing[..self.dim].iter().product::<f64>()
    }

    /// Spatial node `i` (row-major, first axis slowest).
    pub fn node(&self, mut i: usize) -> Point {
        let mut p = ORIGIN;
        for a in (0..self.dim).rev() {
            p[a] = self.origin[a] + (i % self.counts[a]) as f64 * self.spacing[a];
            i /= self.counts[a];
        }
        p
    }

    /// Point `k` in time-major order.
    pub fn point(&self, k: usize) -> (f64, Point) {
        let n = self.spatial_len();
        (self.times[k / n], self.node(k % n))
    }

    /// `sum |v|^p * cell` over values laid out like [`SpacetimeGrid::point`].
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.cell_volume()).powf(1.0 / p)
    }

    pub fn l1_norm(&self, values: &[f64]) -> f64 {
        values.iter().map(|v| v.abs()).sum::<f64>() * self.cell_volume()
    }

    /// Sample `f` at every point.
    pub fn sample<F: SpacetimeFn + ?Sized>(&self, f: &F) -> Vec<f64> {
        (0..self.len()).map(|k| {
            let (t, x) = self.point(k);
            f.eval(t, &x)
        }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peaks_at_its_amplitude() {
        let dom = Domain::unit(3).unwrap();
        let b = SmoothBump::new(dom, 0.5, 0.1, [0.5, 0.5, 0.5], 0.2, -2.0);
        assert_eq!(b.eval(0.5, &[0.5, 0.5, 0.5]), -2.0);
        assert!(b.eval(0.55, &[0.6, 0.5, 0.5]).abs() < 2.0);
        assert_eq!(b.eval(0.5, &[0.71, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn box_indicator_wraps() {
        let dom = Domain::unit(2).unwrap();
        let b = BoxIndicator::new(dom, 0.5, 0.1, [0.02, 0.5, 0.0], 0.05);
        assert_eq!(b.eval(0.5, &[0.99, 0.5, 0.0]), 1.0);
        assert_eq!(b.eval(0.5, &[0.9, 0.5, 0.0]), 0.0);
        assert_eq!(b.eval(0.65, &[0.02, 0.5, 0.0]), 0.0);
        let s = b.support().unwrap();
        assert!(s.meets(&dom, 0.45, 0.46, &[0.95, 0.45, 0.0], &[0.98, 0.46, 0.0]));
        assert!(!s.meets(&dom, 0.45, 0.46, &[0.5, 0.45, 0.0], &[0.6, 0.46, 0.0]));
        assert!(!s.meets(&dom, 0.7, 0.8, &[0.0, 0.45, 0.0], &[0.1, 0.46, 0.0]));
    }

    #[test]
    fn window_grid_is_lattice_aligned() {
        let dom = Domain::unit(2).unwrap();
        let g = SpacetimeGrid::window(&dom, 64, 0.01, 0.2, 0.3, &[-0.1, 0.4, 0.0], &[0.1, 0.6, 0.0]).unwrap();
        let h = 1.0 / 64.0;
        let p = g.node(0);
        assert!((p[0] / h - (p[0] / h).round()).abs() < 1e-9);
        assert!(g.times().iter().all(|t| *t > 0.19 && *t < 0.31));
        let full = SpacetimeGrid::full(&dom, 8, 4).unwrap();
        assert_eq!(full.len(), 256);
        assert!((full.cell_volume() * 256.0 - 1.0).abs() < 1e-12);
    }
}
