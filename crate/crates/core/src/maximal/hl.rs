//! Discrete Hardy–Littlewood maximal function on periodic lattices.
//!
//! The ball of radius `r` around a node is the set of lattice offsets `o`
//! with `sum_a (o_a h_a)^2 <= r^2` (each torus node counted once), and the
//! ball average is the plain mean over those nodes. Sums run along chords of
//! the last axis with cyclic prefix sums, so one radius costs
//! `O(N * r^{d-1} / h^{d-1})`.

use rayon::prelude::*;

use crate::domain::{frobenius, Domain, Point};
use crate::error::{Error, Result};
use crate::field::{sample_time, VelocityField};
use crate::lattice::Lattice;
use crate::mollify::BallRule;
use crate::spacetime::SpacetimeFn;

/// Relative slack so that nodes exactly on the sphere are always inside.
const SPHERE_SLACK: f64 = 1e-12;

/// `M(|g|)` at every node of one lattice.
#[derive(Clone, Debug)]
pub struct HLMaximalField {
    lattice: Lattice,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl HLMaximalField {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: &Point) -> f64 {
        self.lattice.interpolate(&self.values, x)
    }
}

/// Radii `L/2, L/(2 sqrt 2), ...` down to (but excluding) the grid spacing.
pub fn default_radius_grid(lattice: &Lattice) -> Vec<f64> {
    let h = lattice.max_spacing();
    let mut r = 0.5 * lattice.period();
    let mut out = Vec::new();
    while r > h * (1.0 + 1e-12) {
        out.push(r);
        r /= 2f64.sqrt();
    }
    out
}

fn check_radius_grid(lattice: &Lattice, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Err(Error::Empty("radius grid"));
    }
    let h = lattice.max_spacing();
    let half = 0.5 * lattice.period();
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &r in &sorted {
        if !(r > h * (1.0 - 1e-12) && r <= half * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("radius {r} outside (h = {h}, L/2 = {half}]")));
        }
    }
    if sorted.windows(2).any(|w| w[0] / w[1] > 2.0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter("consecutive radii differ by more than a factor 2".into()));
    }
    Ok(sorted)
}

/// Offsets allowed along an axis with `n` nodes: `-floor((n-1)/2) ..= floor(n/2)`.
#[inline]
fn offset_range(n: usize) -> (isize, isize) {
    (-(((n - 1) / 2) as isize), (n / 2) as isize)
}

/// Squared offset length, summed axis by axis in a fixed order.
#[inline]
pub(crate) fn offset_norm2(o: &[isize], h: &[f64]) -> f64 {
    o.iter().zip(h).map(|(&k, &h)| (k as f64 * h).powi(2)).sum()
}

/// Largest `j` in the allowed range with `rest + (j h)^2 <= bound`; `None`
/// if even `j = 0` fails.
fn half_chord(rest: f64, h: f64, bound: f64, cap: isize) -> Option<isize> {
    if rest > bound {
        return None;
    }
    let mut j = (((bound - rest).max(0.0)).sqrt() / h).floor() as isize;
    j = j.min(cap);
    while j < cap && rest + ((j + 1) as f64 * h).powi(2) <= bound {
        j += 1;
    }
    while j > 0 && rest + (j as f64 * h).powi(2) > bound {
        j -= 1;
    }
    Some(j)
}

/// Maximal function of `|g|` over the radius grid at every lattice node.
pub fn hl_maximal(lattice: &Lattice, g: &[f64], radius_grid: &[f64]) -> Result<HLMaximalField> {
    if g.len() != lattice.len() {
        return Err(Error::Shape(format!("expected {} samples, got {}", lattice.len(), g.len())));
    }
    let radii = check_radius_grid(lattice, radius_grid)?;
    let d = lattice.dim();
    let abs: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let last = d - 1;
    let n_last = lattice.count(last);
    let lines = lattice.len() / n_last;
    // cyclic prefix sums along the last axis, one row of n+1 per line
    let mut prefix = vec![0.0; lines * (n_last + 1)];
    for line in 0..lines {
        let row = &mut prefix[line * (n_last + 1)..(line + 1) * (n_last + 1)];
        for i in 0..n_last {
            row[i + 1] = row[i] + abs[line * n_last + i];
        }
    }
    let h: Vec<f64> = (0..d).map(|a| lattice.spacing(a)).collect();
    let mut best = vec![0.0f64; lattice.len()];
    for &r in &radii {
        let bound = r * r * (1.0 + SPHERE_SLACK);
        // enumerate offsets over the leading axes, with the chord each allows
        let mut chords: Vec<([isize; 3], isize, isize)> = Vec::new();
        let mut count = 0usize;
        let ranges: Vec<(isize, isize)> = (0..last).map(|a| offset_range(lattice.count(a))).collect();
        let (lo_last, hi_last) = offset_range(n_last);
        let mut o = [0isize; 3];
        let total_lead: usize = ranges.iter().map(|(a, b)| (b - a + 1) as usize).product();
        for flat in 0..total_lead {
            let mut rem = flat;
            for a in (0..last).rev() {
                let span = (ranges[a].1 - ranges[a].0 + 1) as usize;
                o[a] = ranges[a].0 + (rem % span) as isize;
                rem /= span;
            }
            let rest = offset_norm2(&o[..last], &h[..last]);
            if let Some(j) = half_chord(rest, h[last], bound, hi_last.max(-lo_last)) {
                let lo = (-j).max(lo_last);
                let hi = j.min(hi_last);
                chords.push((o, lo, hi));
                count += (hi - lo + 1) as usize;
            }
        }
        let count = count as f64;
        best.par_iter_mut().enumerate().for_each(|(node, b)| {
            let c = lattice.multi_index(node);
            let mut sum = 0.0;
            for (o, lo, hi) in &chords {
                let mut idx = c;
                for a in 0..last {
                    idx[a] += o[a];
                }
                idx[last] = 0;
                let line = lattice.index(idx) / n_last;
                let row = &prefix[line * (n_last + 1)..(line + 1) * (n_last + 1)];
                let len = (hi - lo + 1) as usize;
                let start = (c[last] + lo).rem_euclid(n_last as isize) as usize;
                sum += if start + len <= n_last {
                    row[start + len] - row[start]
                } else {
                    row[n_last] - row[start] + row[start + len - n_last]
                };
            }
            let avg = sum / count;
            if avg > *b {
                *b = avg;
            }
        });
    }
    Ok(HLMaximalField { lattice: *lattice, radii, values: best })
}

/// `max_r` of ball averages of `g` around `x` by a ball rule: a pointwise
/// version for scattered evaluation.
pub fn hl_maximal_at<G: Fn(&Point) -> f64>(g: G, x: &Point, radii: &[f64], rule: &BallRule) -> f64 {
    radii.iter().map(|&r| rule.average(x, r, |p| g(p).abs())).fold(0.0, f64::max)
}

/// `M(|grad u|^p)` on a lattice at each time sample, interpolated
/// multilinearly in space and linearly in time.
#[derive(Clone, Debug)]
pub struct GradientMaximal {
    domain: Domain,
    lattice: Lattice,
    time_samples: usize,
    power: f64,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl GradientMaximal {
    pub fn new(field: &VelocityField, counts: &[usize], time_samples: usize, power: f64, radii: Option<&[f64]>) -> Result<Self> {
        let domain = *field.domain();
        let lattice = Lattice::new(domain.dim(), counts, domain.period())?;
        if time_samples == 0 {
            return Err(Error::Shape("at least one time sample required".into()));
        }
        let radii = match radii {
            Some(r) => r.to_vec(),
            None => default_radius_grid(&lattice),
        };
        let d = domain.dim();
        let mut values = Vec::with_capacity(time_samples * lattice.len());
        let mut used = Vec::new();
        for k in 0..time_samples {
            let t = sample_time(&domain, time_samples, k);
            let g: Vec<f64> = (0..lattice.len())
                .into_par_iter()
                .map(|i| frobenius(&field.gradient(t, &lattice.node(i)), d).powf(power))
                .collect();
            let hl = hl_maximal(&lattice, &g, &radii)?;
            used = hl.radii.clone();
            values.extend_from_slice(&hl.values);
        }
        Ok(Self { domain, lattice, time_samples, power, radii: used, values })
    }

    /// Lattice and time sampling matched to the field: a gridded field's own
    /// lattice and samples, or `n` nodes per axis and one sample for the
    /// (steady) analytic catalog.
    pub fn for_field(field: &VelocityField, n: usize, power: f64) -> Result<Self> {
        match field.source() {
            crate::field::Source::Gridded(g) => {
                Self::new(field, g.lattice().counts(), g.time_samples(), power, None)
            }
            crate::field::Source::Analytic(_) => Self::new(field, &vec![n; field.dim()], 1, power, None),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Node values of time sample `k`.
    pub fn sample(&self, k: usize) -> &[f64] {
        let n = self.lattice.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn value(&self, t: f64, x: &Point) -> f64 {
        if !self.domain.contains_time(t) {
            return 0.0;
        }
        if self.time_samples == 1 {
            return self.lattice.interpolate(self.sample(0), x);
        }
        let last = (self.time_samples - 1) as f64;
        let tau = ((t - self.domain.start()) / self.domain.duration() * last).clamp(0.0, last);
        let k0 = (tau.floor() as usize).min(self.time_samples - 2);
        let th = tau - k0 as f64;
        let a = self.lattice.interpolate(self.sample(k0), x);
        if th == 0.0 {
            return a;
        }
        let b = self.lattice.interpolate(self.sample(k0 + 1), x);
        (1.0 - th) * a + th * b
    }
}

impl SpacetimeFn for GradientMaximal {
    fn eval(&self, t: f64, x: &Point) -> f64 {
        self.value(t, x)
    }

    fn is_steady(&self) -> bool {
        self.time_samples == 1
    }
}
