//! Uniform periodic node lattices on the torus `[0, L)^d`.
//!
//! Nodes sit at `i * L / n` on every axis and are stored row-major with the
//! first axis slowest.

use crate::domain::{Point, ORIGIN};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    dim: usize,
    counts: [usize; 3],
    period: f64,
}

/// Interpolation weights for one query point: up to `2^d` corner nodes.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub nodes: [usize; 8],
    pub weights: [f64; 8],
    pub len: usize,
}

impl Lattice {
    pub fn new(dim: usize, counts: &[usize], period: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) || counts.len() != dim {
            return Err(Error::Shape(format!(
                "expected {dim} axis counts, got {}",
                counts.len()
            )));
        }
        if counts.iter().any(|&n| n < 2) {
            return Err(Error::Shape("every axis needs at least two nodes".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidDomain(format!("period {period}")));
        }
        let mut c = [1usize; 3];
        c[..dim].copy_from_slice(counts);
        Ok(Self { dim, counts: c, period })
    }

    /// Same count on every axis.
    pub fn cubic(dim: usize, n: usize, period: f64) -> Result<Self> {
        Self::new(dim, &vec![n; dim], period)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.period() / self.counts[axis] as f64
    }

    /// Largest spacing over the used axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.counts[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Flat index of a multi-index (components wrapped periodically).
    #[inline]
    pub fn index(&self, idx: [isize; 3]) -> usize {
        let mut flat = 0usize;
        for a in 0..self.dim {
            let n = self.counts[a] as isize;
            flat = flat * self.counts[a] + idx[a].rem_euclid(n) as usize;
        }
        flat
    }

    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [isize; 3] {
        let mut out = [0isize; 3];
        for a in (0..self.dim).rev() {
            out[a] = (flat % self.counts[a]) as isize;
            flat /= self.counts[a];
        }
        out
    }

    pub fn node(&self, flat: usize) -> Point {
        let mi = self.multi_index(flat);
        let mut p = ORIGIN;
        for a in 0..self.dim {
            p[a] = mi[a] as f64 * self.spacing(a);
        }
        p
    }

    /// Row-major stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.counts[axis + 1..self.dim].iter().product()
    }

    /// Multilinear interpolation stencil for a point anywhere on the torus.
    #[inline]
    pub fn stencil(&self, x: &Point) -> Stencil {
        let mut lo = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..self.dim {
            let n = self.counts[a] as f64;
            let mut xi = (x[a] / self.period()).rem_euclid(1.0) * n;
            if xi >= n {
                xi -= n;
            }
            let i0 = xi.floor();
            lo[a] = i0 as isize;
            frac[a] = xi - i0;
        }
        let len = 1usize << self.dim;
        let mut st = Stencil { nodes: [0; 8], weights: [0.0; 8], len };
        for corner in 0..len {
            let mut idx = [0isize; 3];
            let mut w = 1.0;
            for a in 0..self.dim {
                if corner >> a & 1 == 1 {
                    idx[a] = lo[a] + 1;
                    w *= frac[a];
                } else {
                    idx[a] = lo[a];
                    w *= 1.0 - frac[a];
                }
            }
            st.nodes[corner] = self.index(idx);
            st.weights[corner] = w;
        }
        st
    }

    /// Interpolate a scalar nodal array.
    #[inline]
    pub fn interpolate(&self, values: &[f64], x: &Point) -> f64 {
        let st = self.stencil(x);
        (0..st.len).map(|k| st.weights[k] * values[st.nodes[k]]).sum()
    }
}
