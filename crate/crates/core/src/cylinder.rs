//! Skewed parabolic cylinders
//! `Q_eps(t, x) = {(s, y) : |s - t| < eps^2, |y - X_eps(t, x; s)| < eps}`
//! and the quantities built on them.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{norm, sub, Domain, Point, ORIGIN};
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::flow::{centerline, flow_to, jittered, Estimate, MollifiedVelocity, Trajectory, VelocityProvider, DEFAULT_STEP_BUDGET};
use crate::mollify::{BallRule, Mollifier};
use crate::spacetime::SpacetimeFn;

#[derive(Clone, Debug)]
pub struct SkewedCylinder {
    domain: Domain,
    center_time: f64,
    center: Point,
    eps: f64,
    radius: f64,
    centerline: Arc<Trajectory>,
    /// The stored centerline was computed for anchor time
    /// `center_time - shift` (steady fields reuse one centerline).
    shift: f64,
}

/// Cylinder of radius `eps` around `(t, x)` for the mollified flow of
/// `field`, with the default step budget.
pub fn make_cylinder(field: &VelocityField, m: &Mollifier, eps: f64, t: f64, x: &Point) -> Result<SkewedCylinder> {
    let u = MollifiedVelocity::new(field, m, eps)?;
    SkewedCylinder::build(&u, t, x, DEFAULT_STEP_BUDGET)
}

impl SkewedCylinder {
    /// Integrate the centerline over the whole span `t +- eps^2` (the velocity
    /// vanishes outside the flow horizon, so the centerline stops there).
    pub fn build<P: VelocityProvider + ?Sized>(p: &P, t: f64, x: &Point, step_budget: usize) -> Result<Self> {
        let dom = *p.domain();
        let eps = p.eps();
        dom.check_radius(eps)?;
        let (lo, hi) = (t - eps * eps, t + eps * eps);
        if hi <= dom.start() || lo >= dom.end() {
            return Err(Error::OutsideHorizon(lo, hi));
        }
        let line = centerline(p, t, x, step_budget)?;
        Ok(Self { domain: dom, center_time: t, center: *x, eps, radius: eps, centerline: Arc::new(line), shift: 0.0 })
    }

    /// Same cylinder moved in time by `dt`. Valid for steady velocities
    /// whenever both the original and the shifted span stay in the horizon.
    pub fn translated(&self, dt: f64) -> Self {
        let mut c = self.clone();
        c.center_time += dt;
        c.shift += dt;
        c
    }

    /// [`SkewedCylinder::translated`] to the center time `t` exactly.
    pub fn moved_to(&self, t: f64) -> Self {
        let mut c = self.clone();
        c.shift = t - self.centerline.anchor_time();
        c.center_time = t;
        c
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn center_time(&self) -> f64 {
        self.center_time
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Spatial radius (`eps` unless dilated).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(S^a, T^a) = (t - eps^2, t + eps^2)`.
    pub fn span(&self) -> (f64, f64) {
        let e2 = self.eps * self.eps;
        (self.center_time - e2, self.center_time + e2)
    }

    pub fn within_horizon(&self) -> bool {
        let (lo, hi) = self.span();
        self.domain.contains_span(lo, hi)
    }

    pub fn centerline(&self) -> &Trajectory {
        &self.centerline
    }

    /// `2 eps^2 |B_radius|`.
    pub fn measure(&self) -> f64 {
        2.0 * self.eps * self.eps * self.domain.ball_volume(self.radius)
    }

    /// Unwrapped axis position `X(s)`.
    #[inline]
    pub fn axis(&self, s: f64) -> Point {
        self.centerline.at(s - self.shift)
    }

    #[inline]
    pub fn contains(&self, s: f64, y: &Point) -> bool {
        (s - self.center_time).abs() < self.eps * self.eps && self.domain.distance(y, &self.axis(s)) < self.radius
    }

    /// `lambda Q`: same span and centerline, spatial radius `lambda` times
    /// larger.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("dilation factor {lambda}")));
        }
        let radius = lambda * self.radius;
        let half = 0.5 * self.domain.period();
        if radius > half {
            return Err(Error::WrapAround { radius, half_period: half });
        }
        let mut c = self.clone();
        c.radius = radius;
        Ok(c)
    }

    /// Spacetime bounding box `(t_lo, t_hi, lo, hi)` in unwrapped coordinates.
    pub fn bounding_box(&self) -> (f64, f64, Point, Point) {
        let d = self.domain.dim();
        let (t_lo, t_hi) = self.span();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in self.centerline.positions() {
            for a in 0..d {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        for a in 0..d {
            lo[a] -= self.radius;
            hi[a] += self.radius;
        }
        for a in d..3 {
            lo[a] = 0.0;
            hi[a] = 0.0;
        }
        (t_lo, t_hi, lo, hi)
    }

    /// Spacetime diameter: the time extent `2 eps^2` combined with the
    /// spatial extent `2 radius + max |X(s) - X(s')|` over centerline samples.
    pub fn diameter(&self) -> f64 {
        let d = self.domain.dim();
        let pos = self.centerline.positions();
        let mut spread = 0.0f64;
        for (i, p) in pos.iter().enumerate() {
            for q in &pos[i + 1..] {
                spread = spread.max(norm(&sub(p, q), d));
            }
        }
        let e2 = 2.0 * self.eps * self.eps;
        e2.hypot(2.0 * self.radius + spread)
    }

    /// Whether `f` is known to vanish on the whole cylinder.
    pub fn misses_support<F: SpacetimeFn + ?Sized>(&self, f: &F) -> bool {
        match f.support() {
            None => false,
            Some(sup) => {
                let (t_lo, t_hi, lo, hi) = self.bounding_box();
                !sup.meets(&self.domain, t_lo, t_hi, &lo, &hi)
            }
        }
    }
}

/// Tensor quadrature over a cylinder: `n_time` midpoint slices of the span
/// times a uniform ball rule at each slice.
#[derive(Clone, Debug)]
pub struct CylinderQuadrature {
    n_time: usize,
    ball: BallRule,
}

impl CylinderQuadrature {
    pub fn new(n_time: usize, n_ball: usize, d: usize) -> Result<Self> {
        if n_time < 8 || n_ball < 32 {
            return Err(Error::InvalidParameter(format!(
                "cylinder quadrature needs n_time >= 8 and n_ball >= 32, got {n_time}, {n_ball}"
            )));
        }
        Ok(Self { n_time, ball: BallRule::uniform(n_ball, d) })
    }

    /// `n_time = 16`, `n_ball = 64 d`.
    pub fn standard(d: usize) -> Self {
        Self { n_time: 16, ball: BallRule::uniform(64 * d, d) }
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_ball(&self) -> usize {
        self.ball.len()
    }

    pub fn ball(&self) -> &BallRule {
        &self.ball
    }

    /// Slice times `S^a + (k + 1/2) 2 eps^2 / n_time`.
    pub fn slice_times(&self, c: &SkewedCylinder) -> impl Iterator<Item = f64> {
        let (lo, hi) = c.span();
        let n = self.n_time;
        (0..n).map(move |k| lo + (k as f64 + 0.5) * (hi - lo) / n as f64)
    }

    /// Average of `f` over the cylinder; errors on a non-finite node value.
    ///
    /// The weighted sum is clamped to the range of the sampled values, which
    /// a convex combination cannot leave; this removes round-off so that
    /// constants average to themselves exactly and averages never exceed
    /// the sup.
    pub fn average<F: SpacetimeFn + ?Sized>(&self, c: &SkewedCylinder, f: &F) -> Result<f64> {
        let mut total = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in self.slice_times(c) {
            let axis = c.axis(s);
            let mut slice = 0.0;
            for (y, w) in self.ball.nodes().iter().zip(self.ball.weights()) {
                let p = [axis[0] + c.radius * y[0], axis[1] + c.radius * y[1], axis[2] + c.radius * y[2]];
                let v = f.eval(s, &p);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("integrand at ({s}, {p:?})")));
                }
                lo = lo.min(v);
                hi = hi.max(v);
                slice += w * v;
            }
            total += slice;
        }
        Ok((total / self.n_time as f64).clamp(lo, hi))
    }

    /// Average of `|f|`, short-circuiting to zero when `f` is known to
    /// vanish on the cylinder.
    pub fn average_abs<F: SpacetimeFn + ?Sized>(&self, c: &SkewedCylinder, f: &F) -> Result<f64> {
        if c.misses_support(f) {
            return Ok(0.0);
        }
        self.average(c, &|s: f64, p: &Point| f.eval(s, p).abs())
    }

    /// Signed average with the same support shortcut.
    pub fn average_signed<F: SpacetimeFn + ?Sized>(&self, c: &SkewedCylinder, f: &F) -> Result<f64> {
        if c.misses_support(f) {
            return Ok(0.0);
        }
        self.average(c, f)
    }
}

/// Average of `f` over `c` with `n_time` slices and an `n_ball` ball rule.
pub fn average_over<F: SpacetimeFn + ?Sized>(c: &SkewedCylinder, f: &F, n_time: usize, n_ball: usize) -> Result<f64> {
    CylinderQuadrature::new(n_time, n_ball, c.domain.dim())?.average(c, f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    /// `eps^2` times the average of `M(|grad u|)` over the cylinder.
    pub value: f64,
    pub eta: f64,
    pub within_horizon: bool,
    pub admissible: bool,
    pub n_time: usize,
    pub n_ball: usize,
}

/// `eta`-admissibility: `eps^2 avg_Q M(|grad u|) < eta` and the span lies
/// inside the flow horizon. `hl` evaluates `M(|grad u|)(s, y)`.
pub fn is_admissible<H: SpacetimeFn + ?Sized>(
    c: &SkewedCylinder,
    eta: f64,
    hl: &H,
    quad: &CylinderQuadrature,
) -> Result<AdmissibilityReport> {
    let value = c.eps * c.eps * quad.average(c, hl)?;
    let within_horizon = c.within_horizon();
    Ok(AdmissibilityReport {
        value,
        eta,
        within_horizon,
        admissible: within_horizon && value < eta,
        n_time: quad.n_time(),
        n_ball: quad.n_ball(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusScan {
    pub eps_grid: Vec<f64>,
    /// Admissibility of each grid radius.
    pub mask: Vec<bool>,
    pub values: Vec<f64>,
    /// Largest admissible radius on the grid.
    pub best: Option<f64>,
}

/// Scan a descending radius grid at `(t, x)`; reports the largest admissible
/// radius and the full mask (an all-false mask is a result, not an error).
#[allow(clippy::too_many_arguments)]
pub fn smallest_admissible_radius<H: SpacetimeFn + ?Sized>(
    field: &VelocityField,
    m: &Mollifier,
    eta: f64,
    t: f64,
    x: &Point,
    eps_grid: &[f64],
    hl: &H,
    quad: &CylinderQuadrature,
) -> Result<RadiusScan> {
    if eps_grid.is_empty() {
        return Err(Error::Empty("radius grid"));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("radius grid must be strictly descending".into()));
    }
    let mut mask = Vec::with_capacity(eps_grid.len());
    let mut values = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let c = make_cylinder(field, m, eps, t, x)?;
        let r = is_admissible(&c, eta, hl, quad)?;
        mask.push(r.admissible);
        values.push(r.value);
    }
    let best = eps_grid.iter().zip(&mask).find(|(_, ok)| **ok).map(|(e, _)| *e);
    Ok(RadiusScan { eps_grid: eps_grid.to_vec(), mask, values, best })
}

/// Measure of the dual cylinder `{(t, x) : |t - s| < eps^2,
/// |X_eps(t, x; s) - y| < eps}` by stratified sampling of a spacetime box
/// that contains it, with at least `n_mc` samples.
pub fn dual_cylinder_measure_with<P: VelocityProvider + ?Sized>(
    p: &P,
    speed_bound: f64,
    s: f64,
    y: &Point,
    n_mc: usize,
    step_budget: usize,
    seed: u64,
) -> Result<Estimate> {
    let dom = *p.domain();
    let d = dom.dim();
    let eps = p.eps();
    let e2 = eps * eps;
    let half = eps + speed_bound * e2 * (1.0 + 1e-9) + 1e-12;
    let per_axis = (n_mc as f64).powf(1.0 / (d + 1) as f64).ceil() as usize;
    // time is the first coordinate of the (d + 1)-dimensional samples
    let mut lo = vec![s - e2];
    let mut width = vec![2.0 * e2];
    for a in 0..d {
        lo.push(y[a] - half);
        width.push(2.0 * half);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = jittered(&lo, &width, per_axis, &mut rng);
    let hits: usize = pts
        .par_iter()
        .map(|q| {
            let t = q[0];
            let x = [q[1], q[2], q[3]];
            match flow_to(p, t, &x, s, step_budget) {
                Ok(z) if dom.distance(&z, y) < eps => 1,
                _ => 0,
            }
        })
        .sum();
    let n = pts.len() as f64;
    let vol: f64 = width.iter().product();
    let frac = hits as f64 / n;
    Ok(Estimate { value: vol * frac, std_error: vol * (frac * (1.0 - frac) / n).sqrt(), samples: pts.len() })
}

/// [`dual_cylinder_measure_with`] for the default mollified velocity.
pub fn dual_cylinder_measure(
    field: &VelocityField,
    m: &Mollifier,
    eps: f64,
    s: f64,
    y: &Point,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_mc < 4096 {
        return Err(Error::InvalidParameter(format!("n_mc {n_mc} below 4096")));
    }
    let u = MollifiedVelocity::new(field, m, eps)?;
    let speed = u.speed_bound(y, field.domain().period());
    dual_cylinder_measure_with(&u, speed, s, y, n_mc, DEFAULT_STEP_BUDGET, seed)
}

/// First probed common time at which the two cylinders overlap, probing the
/// midpoints of `n_probe` equal pieces of the (open) common span.
pub fn intersection_witness(a: &SkewedCylinder, b: &SkewedCylinder, n_probe: usize) -> Option<f64> {
    let (a_lo, a_hi) = a.span();
    let (b_lo, b_hi) = b.span();
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if lo >= hi {
        return None;
    }
    let n = n_probe.max(1);
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).find(|&t| {
        a.domain.distance(&a.axis(t), &b.axis(t)) < a.radius + b.radius
    })
}

pub fn cylinders_intersect(a: &SkewedCylinder, b: &SkewedCylinder, n_probe: usize) -> bool {
    intersection_witness(a, b, n_probe).is_some()
}

/// Search the quadrature nodes of `a` (pulled slightly inward) for a point
/// that lies outside `b`.
pub fn non_nested_witness(a: &SkewedCylinder, b: &SkewedCylinder, quad: &CylinderQuadrature) -> Option<(f64, Point)> {
    for s in quad.slice_times(a) {
        let axis = a.axis(s);
        for y in quad.ball().nodes() {
            let p = [
                axis[0] + 0.999 * a.radius * y[0],
                axis[1] + 0.999 * a.radius * y[1],
                axis[2] + 0.999 * a.radius * y[2],
            ];
            if a.contains(s, &p) && !b.contains(s, &p) {
                return Some((s, p));
            }
        }
    }
    None
}

/// Largest `|X_{eps_b}(t0, x0; t) - X_{eps_a}(t0, x0; t)|` over probed times
/// `|t - t0| < window`.
pub fn centerline_gap(a: &SkewedCylinder, b: &SkewedCylinder, window: f64, n_probe: usize) -> f64 {
    let d = a.domain.dim();
    let t0 = a.center_time;
    let n = n_probe.max(2);
    (0..n)
        .map(|i| t0 - window + 2.0 * window * i as f64 / (n - 1) as f64)
        .map(|t| norm(&sub(&a.axis(t), &b.axis(t)), d))
        .fold(0.0, f64::max)
}

/// One row of a cylinder family file: `t, x_1..x_d, epsilon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyRow {
    pub t: f64,
    pub x: Point,
    pub eps: f64,
}

/// Parse a family file; a first line that does not parse as numbers is
/// taken as a header.
pub fn read_family<R: BufRead>(reader: R, dim: usize) -> Result<Vec<FamilyRow>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let vals = match vals {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse { line: i + 1, msg: e.to_string() }),
        };
        if vals.len() != dim + 2 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected {} columns, got {}", dim + 2, vals.len()) });
        }
        let mut x = ORIGIN;
        x[..dim].copy_from_slice(&vals[1..=dim]);
        out.push(FamilyRow { t: vals[0], x, eps: vals[dim + 1] });
    }
    Ok(out)
}

pub fn write_family<W: Write>(mut w: W, dim: usize, rows: &[FamilyRow]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    header.push("epsilon".into());
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut cells = vec![format!("{}", r.t)];
        cells.extend(r.x[..dim].iter().map(|v| format!("{v}")));
        cells.push(format!("{}", r.eps));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Build every cylinder of a family (in parallel, order preserved).
pub fn build_family(field: &VelocityField, m: &Mollifier, rows: &[FamilyRow]) -> Result<Vec<SkewedCylinder>> {
    rows.par_iter().map(|r| make_cylinder(field, m, r.eps, r.t, &r.x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_analytic_field;
    use crate::spacetime::Constant;
    use std::f64::consts::PI;

    fn unit2(name: &str, params: &[f64]) -> (VelocityField, Mollifier) {
        let dom = Domain::unit(2).unwrap();
        (make_analytic_field(name, params, dom).unwrap(), Mollifier::standard(2).unwrap())
    }

    #[test]
    fn zero_field_gives_upright_cylinder() {
        let (f, m) = unit2("zero", &[]);
        let c = make_cylinder(&f, &m, 0.1, 0.5, &[0.5, 0.5, 0.0]).unwrap();
        assert!(c.contains(0.5 + 0.0099, &[0.59, 0.5, 0.0]));
        assert!(!c.contains(0.5 + 0.0101, &[0.5, 0.5, 0.0]));
        assert!(!c.contains(0.5, &[0.5, 0.601, 0.0]));
        assert!((c.measure() - 6.2832e-4).abs() < 1e-8);
    }

    #[test]
    fn constant_field_shears_the_cylinder() {
        let (f, m) = unit2("constant", &[1.0, 0.0]);
        let c = make_cylinder(&f, &m, 0.1, 0.5, &[0.5, 0.5, 0.0]).unwrap();
        for s in [0.491, 0.495, 0.5, 0.507] {
            let a = c.axis(s);
            assert!((a[0] - (0.5 + s - 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn horizon_errors_and_flags() {
        let (f, m) = unit2("zero", &[]);
        assert!(matches!(make_cylinder(&f, &m, 0.1, -0.02, &ORIGIN), Err(Error::OutsideHorizon(..))));
        let c = make_cylinder(&f, &m, 0.1, 0.005, &ORIGIN).unwrap();
        assert!(!c.within_horizon());
    }

    #[test]
    fn dilation() {
        let (f, m) = unit2("taylor-green", &[]);
        let c = make_cylinder(&f, &m, 0.05, 0.5, &[0.3, 0.2, 0.0]).unwrap();
        let same = c.dilate(1.0).unwrap();
        assert_eq!(same.radius(), c.radius());
        let nine = c.dilate(9.0).unwrap();
        assert!((nine.radius() - 0.45).abs() < 1e-15);
        assert_eq!(nine.axis(0.501), c.axis(0.501));
        assert!((nine.measure() / c.measure() - 81.0).abs() < 1e-9);
        assert!(matches!(c.dilate(11.0), Err(Error::WrapAround { .. })));
    }

    #[test]
    fn averages() {
        let (f, m) = unit2("zero", &[]);
        let x = [0.5, 0.5, 0.0];
        let c = make_cylinder(&f, &m, 0.1, 0.5, &x).unwrap();
        assert_eq!(average_over(&c, &Constant(1.0), 16, 128).unwrap(), 1.0);
        let sq = |_s: f64, y: &Point| (y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2);
        let avg = average_over(&c, &sq, 16, 128).unwrap();
        assert!((avg / 0.005 - 1.0).abs() < 1e-3);
        // dense midpoint brute force over the disc
        let n = 400;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let p = [-0.1 + 0.2 * (i as f64 + 0.5) / n as f64, -0.1 + 0.2 * (j as f64 + 0.5) / n as f64];
                let r2 = p[0] * p[0] + p[1] * p[1];
                if r2 < 0.01 {
                    num += r2;
                    den += 1.0;
                }
            }
        }
        assert!((avg / (num / den) - 1.0).abs() < 1e-3);
        let (tg, m) = unit2("taylor-green", &[2.0]);
        let c = make_cylinder(&tg, &m, 0.08, 0.5, &[0.3, 0.7, 0.0]).unwrap();
        let ind = |s: f64, y: &Point| if c.contains(s, y) { 1.0 } else { 0.0 };
        assert_eq!(average_over(&c, &ind, 16, 128).unwrap(), 1.0);
        assert!(average_over(&c, &|_s: f64, _y: &Point| f64::NAN, 16, 128).is_err());
        assert!(average_over(&c, &Constant(1.0), 4, 128).is_err());
    }

    #[test]
    fn admissibility_of_shear() {
        let (f, m) = unit2("linear-shear", &[]);
        let q = CylinderQuadrature::standard(2);
        let one = Constant(1.0);
        let x = [0.3, 0.7, 0.0];
        let r = is_admissible(&make_cylinder(&f, &m, 0.1, 0.5, &x).unwrap(), 0.01, &one, &q).unwrap();
        assert!((r.value - 0.01).abs() < 1e-15 && !r.admissible);
        let r = is_admissible(&make_cylinder(&f, &m, 0.05, 0.5, &x).unwrap(), 0.01, &one, &q).unwrap();
        assert!((r.value - 0.0025).abs() < 1e-15 && r.admissible);
        let scan = smallest_admissible_radius(&f, &m, 0.01, 0.5, &x, &[0.1, 0.05, 0.025], &one, &q).unwrap();
        assert_eq!(scan.best, Some(0.05));
        assert_eq!(scan.mask, vec![false, true, true]);
        let huge = Constant(1e9);
        let scan = smallest_admissible_radius(&f, &m, 0.01, 0.5, &x, &[0.1, 0.05], &huge, &q).unwrap();
        assert_eq!(scan.best, None);
        assert!(smallest_admissible_radius(&f, &m, 0.01, 0.5, &x, &[], &one, &q).is_err());
        let (z, m) = unit2("zero", &[]);
        let zero = Constant(0.0);
        let scan = smallest_admissible_radius(&z, &m, 1e-6, 0.5, &x, &[0.125, 0.05], &zero, &q).unwrap();
        assert_eq!(scan.best, Some(0.125));
    }

    #[test]
    fn intersections() {
        let (f, m) = unit2("zero", &[]);
        let eps = 0.0625;
        let a = make_cylinder(&f, &m, eps, 0.5, &[0.5, 0.5, 0.0]).unwrap();
        assert!(cylinders_intersect(&a, &a, 16));
        let far = make_cylinder(&f, &m, eps, 0.5, &[0.625, 0.5, 0.0]).unwrap();
        assert!(!cylinders_intersect(&a, &far, 16));
        let near = make_cylinder(&f, &m, eps, 0.5, &[0.5 + 1.9 * eps, 0.5, 0.0]).unwrap();
        assert!(cylinders_intersect(&a, &near, 16));
        let later = make_cylinder(&f, &m, eps, 0.5 + 2.0 * eps * eps + 1e-6, &[0.5, 0.5, 0.0]).unwrap();
        assert!(!cylinders_intersect(&a, &later, 16));
    }

    #[test]
    fn dual_measure_is_cylinder_measure() {
        let (z, m) = unit2("zero", &[]);
        let est = dual_cylinder_measure(&z, &m, 0.1, 0.5, &[0.4, 0.4, 0.0], 4096, 1).unwrap();
        let exact = 2.0 * 0.01 * PI * 0.01;
        assert!((est.value / exact - 1.0).abs() < 0.01);
        let (tg, m) = unit2("taylor-green", &[]);
        let est = dual_cylinder_measure(&tg, &m, 0.1, 0.5, &[0.3, 0.6, 0.0], 65536, 2).unwrap();
        assert!((est.value / exact - 1.0).abs() < 0.02, "{}", est.value / exact);
    }

    #[test]
    fn family_file_reads_back() {
        let rows = vec![
            FamilyRow { t: 0.5, x: [0.1, 0.2, 0.0], eps: 0.05 },
            FamilyRow { t: 0.25, x: [0.7, 0.9, 0.0], eps: 0.1 },
        ];
        let mut buf = Vec::new();
        write_family(&mut buf, 2, &rows).unwrap();
        assert_eq!(read_family(buf.as_slice(), 2).unwrap(), rows);
        assert!(read_family("t,x_1,x_2,epsilon\n0.5,0.1,0.05\n".as_bytes(), 2).is_err());
    }
}
