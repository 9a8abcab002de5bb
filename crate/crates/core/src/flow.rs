//! The mollified flow `d/ds X_eps(t, x; s) = u_eps(s, X_eps(t, x; s))`,
//! `X_eps(t, x; t) = x`, integrated with classical fixed-step RK4.
//!
//! Positions are tracked unwrapped (no reduction modulo `L`), so the
//! displacement along a trajectory is always available directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{axpy, jacobian_scale, norm, sub, Domain, Jacobian, Point, ORIGIN};
use crate::error::{Error, Result};
use crate::field::{GriddedField, MollifierAction, VelocityField};
use crate::mollify::{mollified_gradient, mollified_velocity, Mollifier};

/// Steps per `eps^2` of integration time.
pub const DEFAULT_STEP_BUDGET: usize = 64;
const MIN_STEP: f64 = 1e-14;

/// A velocity that can be sampled along trajectories.
pub trait VelocityProvider: Sync {
    fn domain(&self) -> &Domain;
    /// Mollification radius; sets the time scale `eps^2` of a cylinder.
    fn eps(&self) -> f64;
    fn velocity(&self, t: f64, x: &Point) -> Point;
}

#[derive(Clone, Debug)]
enum Route {
    /// Mollification reproduces the field (affine fields).
    Exact,
    /// Single Fourier shell: `u_eps = factor * u`.
    Scaled(f64),
    Quadrature,
    Cached(Box<GriddedField>),
}

/// `u_eps` for one field, mollifier and radius.
///
/// The default route uses the closed form available for the analytic
/// catalog (affine fields are reproduced exactly; single-shell fields are
/// scaled by the mollifier's Fourier transform) and falls back to the stored
/// quadrature otherwise. [`MollifiedVelocity::cached`] precomputes `u_eps`
/// on a lattice for long sweeps.
#[derive(Clone, Debug)]
pub struct MollifiedVelocity<'a> {
    field: &'a VelocityField,
    mollifier: &'a Mollifier,
    eps: f64,
    route: Route,
}

impl<'a> MollifiedVelocity<'a> {
    pub fn new(field: &'a VelocityField, mollifier: &'a Mollifier, eps: f64) -> Result<Self> {
        field.domain().check_radius(eps)?;
        let route = match field.mollifier_action() {
            MollifierAction::Identity => Route::Exact,
            MollifierAction::Shell(k) => Route::Scaled(mollifier.shell_factor(eps * k)),
            MollifierAction::General => Route::Quadrature,
        };
        Ok(Self { field, mollifier, eps, route })
    }

    /// Always evaluate through the mollifier quadrature.
    pub fn quadrature(field: &'a VelocityField, mollifier: &'a Mollifier, eps: f64) -> Result<Self> {
        field.domain().check_radius(eps)?;
        Ok(Self { field, mollifier, eps, route: Route::Quadrature })
    }

    /// Precompute `u_eps` by quadrature at the nodes of a lattice with
    /// `counts` per axis and `time_samples` uniform times, then interpolate.
    pub fn cached(
        field: &'a VelocityField,
        mollifier: &'a Mollifier,
        eps: f64,
        counts: &[usize],
        time_samples: usize,
    ) -> Result<Self> {
        field.domain().check_radius(eps)?;
        let grid = GriddedField::from_fn(*field.domain(), counts, time_samples, |t, x| {
            mollified_velocity(field, mollifier, eps, t, x)
        })?;
        Ok(Self { field, mollifier, eps, route: Route::Cached(Box::new(grid)) })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn field(&self) -> &VelocityField {
        self.field
    }

    pub fn mollifier(&self) -> &Mollifier {
        self.mollifier
    }

    pub fn route_name(&self) -> &'static str {
        match self.route {
            Route::Exact => "exact",
            Route::Scaled(_) => "shell",
            Route::Quadrature => "quadrature",
            Route::Cached(_) => "cached-grid",
        }
    }

    #[inline]
    pub fn velocity(&self, t: f64, x: &Point) -> Point {
        match &self.route {
            Route::Exact => self.field.evaluate(t, x),
            Route::Scaled(c) => {
                let u = self.field.evaluate(t, x);
                [c * u[0], c * u[1], c * u[2]]
            }
            Route::Quadrature => mollified_velocity(self.field, self.mollifier, self.eps, t, x),
            Route::Cached(g) => {
                if self.field.domain().contains_time(t) {
                    g.velocity(t, x)
                } else {
                    ORIGIN
                }
            }
        }
    }

    pub fn gradient(&self, t: f64, x: &Point) -> Jacobian {
        match &self.route {
            Route::Exact => self.field.gradient(t, x),
            Route::Scaled(c) => jacobian_scale(&self.field.gradient(t, x), *c),
            _ => mollified_gradient(self.field, self.mollifier, self.eps, t, x),
        }
    }

    /// Bound on `|u_eps|` over the ball of radius `radius` around `center`.
    pub fn speed_bound(&self, center: &Point, radius: f64) -> f64 {
        self.field.speed_bound(center, radius + self.eps)
    }
}

impl VelocityProvider for MollifiedVelocity<'_> {
    fn domain(&self) -> &Domain {
        self.field.domain()
    }

    fn eps(&self) -> f64 {
        self.eps
    }

    fn velocity(&self, t: f64, x: &Point) -> Point {
        MollifiedVelocity::velocity(self, t, x)
    }
}

/// Samples `X(s_k)` on a uniform grid `s_k = s_0 + k h`, ascending in `s`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    anchor_time: f64,
    anchor: Point,
    eps: f64,
    dim: usize,
    s0: f64,
    step: f64,
    positions: Vec<Point>,
}

impl Trajectory {
    pub fn anchor_time(&self) -> f64 {
        self.anchor_time
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn start_time(&self) -> f64 {
        self.s0
    }

    pub fn end_time(&self) -> f64 {
        self.s0 + self.step * (self.positions.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.s0 + self.step * k as f64
    }

    /// Unwrapped positions.
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, Point)> + '_ {
        self.positions.iter().enumerate().map(|(k, p)| (self.time(k), *p))
    }

    /// Unwrapped position at `s`, linear between samples and clamped to the
    /// covered span.
    #[inline]
    pub fn at(&self, s: f64) -> Point {
        let n = self.positions.len();
        if n == 1 || self.step == 0.0 {
            return self.positions[0];
        }
        let tau = ((s - self.s0) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (tau.floor() as usize).min(n - 2);
        let th = tau - k as f64;
        let a = &self.positions[k];
        let b = &self.positions[k + 1];
        [
            a[0] + th * (b[0] - a[0]),
            a[1] + th * (b[1] - a[1]),
            a[2] + th * (b[2] - a[2]),
        ]
    }

    /// Largest displacement between consecutive samples.
    pub fn max_step_displacement(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| norm(&sub(&w[1], &w[0]), self.dim))
            .fold(0.0, f64::max)
    }
}

#[inline]
fn rk4_step<P: VelocityProvider + ?Sized>(p: &P, s: f64, x: &Point, h: f64) -> Point {
    let k1 = p.velocity(s, x);
    let k2 = p.velocity(s + 0.5 * h, &axpy(x, 0.5 * h, &k1));
    let k3 = p.velocity(s + 0.5 * h, &axpy(x, 0.5 * h, &k2));
    let k4 = p.velocity(s + h, &axpy(x, h, &k3));
    let mut out = *x;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrate from `(t, x)` to `s` with `n` equal steps; returns every
/// intermediate position, starting with `x`.
fn march<P: VelocityProvider + ?Sized>(p: &P, t: f64, x: &Point, s: f64, n: usize) -> Vec<Point> {
    let h = if n == 0 { 0.0 } else { (s - t) / n as f64 };
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = *x;
    out.push(cur);
    for k in 0..n {
        cur = rk4_step(p, t + h * k as f64, &cur, h);
        out.push(cur);
    }
    out
}

fn steps_for(span: f64, h_nominal: f64) -> Result<usize> {
    if !(h_nominal >= MIN_STEP) {
        return Err(Error::StepUnderflow(h_nominal));
    }
    Ok((span.abs() / h_nominal * (1.0 - 1e-12)).ceil() as usize)
}

/// Integrate with a fixed nominal step `h` (shrunk slightly so it divides
/// the span). Returns the trajectory from `t` to `s`.
pub fn integrate_with_step<P: VelocityProvider + ?Sized>(
    p: &P,
    t: f64,
    x: &Point,
    s: f64,
    h: f64,
) -> Result<Trajectory> {
    let n = steps_for(s - t, h)?;
    let mut positions = march(p, t, x, s, n);
    let step = if n == 0 { 0.0 } else { (s - t).abs() / n as f64 };
    let s0 = t.min(s);
    if s < t {
        positions.reverse();
    }
    Ok(Trajectory { anchor_time: t, anchor: *x, eps: p.eps(), dim: p.domain().dim(), s0, step, positions })
}

/// `X_eps(t, x; .)` from `t` to `s_target` with step `eps^2 / step_budget`.
pub fn integrate_flow(
    field: &VelocityField,
    m: &Mollifier,
    eps: f64,
    t: f64,
    x: &Point,
    s_target: f64,
    step_budget: usize,
) -> Result<Trajectory> {
    let u = MollifiedVelocity::new(field, m, eps)?;
    flow_trajectory(&u, t, x, s_target, step_budget)
}

/// As [`integrate_flow`] for any provider.
pub fn flow_trajectory<P: VelocityProvider + ?Sized>(
    p: &P,
    t: f64,
    x: &Point,
    s_target: f64,
    step_budget: usize,
) -> Result<Trajectory> {
    if step_budget == 0 {
        return Err(Error::InvalidParameter("step budget must be positive".into()));
    }
    let eps = p.eps();
    integrate_with_step(p, t, x, s_target, eps * eps / step_budget as f64)
}

/// Two-sided trajectory over `[t - eps^2, t + eps^2]` with `2 step_budget`
/// equal steps, anchored exactly at `x`.
pub fn centerline<P: VelocityProvider + ?Sized>(p: &P, t: f64, x: &Point, step_budget: usize) -> Result<Trajectory> {
    if step_budget == 0 {
        return Err(Error::InvalidParameter("step budget must be positive".into()));
    }
    let eps = p.eps();
    let e2 = eps * eps;
    let h = e2 / step_budget as f64;
    if !(h >= MIN_STEP) {
        return Err(Error::StepUnderflow(h));
    }
    let mut back = march(p, t, x, t - e2, step_budget);
    let fwd = march(p, t, x, t + e2, step_budget);
    back.reverse();
    back.extend_from_slice(&fwd[1..]);
    Ok(Trajectory {
        anchor_time: t,
        anchor: *x,
        eps,
        dim: p.domain().dim(),
        s0: t - e2,
        step: h,
        positions: back,
    })
}

/// Position `X(t, x; s)` only.
pub fn flow_to<P: VelocityProvider + ?Sized>(p: &P, t: f64, x: &Point, s: f64, step_budget: usize) -> Result<Point> {
    let eps = p.eps();
    let n = steps_for(s - t, eps * eps / step_budget.max(1) as f64)?;
    let h = if n == 0 { 0.0 } else { (s - t) / n as f64 };
    let mut cur = *x;
    for k in 0..n {
        cur = rk4_step(p, t + h * k as f64, &cur, h);
    }
    Ok(cur)
}

/// Round-trip residual `|X(s, X(t, x; s); t) - x|` with step `h`.
pub fn round_trip_residual<P: VelocityProvider + ?Sized>(p: &P, t: f64, x: &Point, s: f64, h: f64) -> Result<f64> {
    let fwd = integrate_with_step(p, t, x, s, h)?;
    let y = if s >= t { *fwd.positions().last().unwrap() } else { fwd.positions()[0] };
    let back = integrate_with_step(p, s, &y, t, h)?;
    let z = if t >= s { *back.positions().last().unwrap() } else { back.positions()[0] };
    Ok(norm(&sub(&z, x), p.domain().dim()))
}

/// `|X_eps(s, X_eps(t, x; s); t) - x|` at the default step.
pub fn flow_inverse_check(field: &VelocityField, m: &Mollifier, eps: f64, t: f64, x: &Point, s: f64) -> Result<f64> {
    let u = MollifiedVelocity::new(field, m, eps)?;
    round_trip_residual(&u, t, x, s, eps * eps / DEFAULT_STEP_BUDGET as f64)
}

/// Monte Carlo estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Jittered (stratified) samples in the box `lo + [0, width]` (up to four
/// axes): `per_axis^n` strata, one uniform point each.
pub(crate) fn jittered(lo: &[f64], width: &[f64], per_axis: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    let n = lo.len();
    let total = per_axis.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut p = [0.0; 4];
        let mut rem = flat;
        for a in 0..n {
            let cell = (rem % per_axis) as f64;
            rem /= per_axis;
            p[a] = lo[a] + width[a] * (cell + rng.gen::<f64>()) / per_axis as f64;
        }
        out.push(p);
    }
    out
}

/// Measure of the image `{X(s, x'; t) : x' in B_eps(y)}` of a ball under the
/// flow map from time `s` to time `t`, by stratified sampling of a box that
/// contains the image: `z` is in the image iff `X(t, z; s)` lies in the ball.
/// Uses at least `n_samples` points.
pub fn image_measure<P: VelocityProvider + ?Sized>(
    p: &P,
    speed_bound: f64,
    s: f64,
    y: &Point,
    t: f64,
    n_samples: usize,
    step_budget: usize,
    seed: u64,
) -> Result<Estimate> {
    let dom = p.domain();
    let d = dom.dim();
    let eps = p.eps();
    let half = eps + speed_bound * (t - s).abs() * (1.0 + 1e-9) + 1e-12;
    let per_axis = (n_samples as f64).powf(1.0 / d as f64).ceil() as usize;
    let lo: Vec<f64> = (0..d).map(|a| y[a] - half).collect();
    let width = vec![2.0 * half; d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = jittered(&lo, &width, per_axis, &mut rng);
    let mut hits = 0usize;
    for q in &pts {
        let back = flow_to(p, t, &[q[0], q[1], q[2]], s, step_budget)?;
        if dom.distance(&back, y) < eps {
            hits += 1;
        }
    }
    let n = pts.len() as f64;
    let vol: f64 = width.iter().product();
    let frac = hits as f64 / n;
    Ok(Estimate {
        value: vol * frac,
        std_error: vol * (frac * (1.0 - frac) / n).sqrt(),
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_analytic_field;

    fn setup(name: &str, params: &[f64]) -> (VelocityField, Mollifier) {
        let dom = Domain::unit(2).unwrap();
        (make_analytic_field(name, params, dom).unwrap(), Mollifier::standard(2).unwrap())
    }

    #[test]
    fn constant_and_zero_fields_move_rigidly() {
        let (c, m) = setup("constant", &[1.0, 0.0]);
        let x = [0.2, 0.4, 0.0];
        let tr = integrate_flow(&c, &m, 0.1, 0.5, &x, 0.51, 64).unwrap();
        for (s, p) in tr.samples() {
            assert!((p[0] - (x[0] + (s - 0.5))).abs() < 1e-14 && (p[1] - x[1]).abs() < 1e-15);
        }
        let (z, m) = setup("zero", &[]);
        let tr = integrate_flow(&z, &m, 0.1, 0.5, &x, 0.49, 64).unwrap();
        assert!(tr.positions().iter().all(|p| *p == x));
    }

    #[test]
    fn shear_is_integrated_exactly() {
        let dom = Domain::new(2, 1.0, 0.0, 2.0).unwrap();
        let shear = make_analytic_field("linear-shear", &[], dom).unwrap();
        let m = Mollifier::standard(2).unwrap();
        let (x0, y0) = (0.3, 0.7);
        let tr = integrate_flow(&shear, &m, 0.1, 0.0, &[x0, y0, 0.0], 1.0, 64).unwrap();
        for (s, p) in tr.samples() {
            assert!((p[0] - (x0 + s * y0)).abs() < 1e-10 && (p[1] - y0).abs() < 1e-15);
        }
    }

    #[test]
    fn anchor_is_exact_and_steps_are_bounded() {
        let (tg, m) = setup("taylor-green", &[]);
        let u = MollifiedVelocity::new(&tg, &m, 0.05).unwrap();
        let x = [0.13, 0.71, 0.0];
        let c = centerline(&u, 0.5, &x, 64).unwrap();
        assert_eq!(c.len(), 129);
        assert_eq!(c.positions()[64], x);
        assert_eq!(c.at(0.5), x);
        let bound = m.shell_factor(0.05 * 2.0 * std::f64::consts::PI * 2f64.sqrt());
        assert!(c.max_step_displacement() <= bound * c.step() * (1.0 + 1e-6));
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for (dim, name) in [(2, "taylor-green"), (3, "abc"), (3, "taylor-green")] {
            let dom = Domain::new(dim, 1.0, 0.0, 1.0).unwrap();
            let f = make_analytic_field(name, &[], dom).unwrap();
            let m = Mollifier::standard(dim).unwrap();
            for eps in [0.02, 0.07, 0.125] {
                let fast = MollifiedVelocity::new(&f, &m, eps).unwrap();
                let slow = MollifiedVelocity::quadrature(&f, &m, eps).unwrap();
                assert_eq!(fast.route_name(), "shell");
                for x in [[0.1, 0.2, 0.3], [0.77, 0.05, 0.61]] {
                    let a = fast.velocity(0.3, &x);
                    let b = slow.velocity(0.3, &x);
                    let ga = fast.gradient(0.3, &x);
                    let gb = slow.gradient(0.3, &x);
                    for i in 0..dim {
                        assert!((a[i] - b[i]).abs() < 1e-10, "{name} eps {eps}");
                        for j in 0..dim {
                            assert!((ga[i][j] - gb[i][j]).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cached_grid_is_close() {
        let (tg, m) = setup("taylor-green", &[]);
        let cached = MollifiedVelocity::cached(&tg, &m, 0.05, &[128, 128], 1).unwrap();
        let exact = MollifiedVelocity::new(&tg, &m, 0.05).unwrap();
        let x = [0.123, 0.456, 0.0];
        let a = cached.velocity(0.2, &x);
        let b = exact.velocity(0.2, &x);
        assert!((a[0] - b[0]).abs() < 2e-3 && (a[1] - b[1]).abs() < 2e-3);
    }

    #[test]
    fn round_trip_is_tiny_and_fourth_order() {
        let (tg, m) = setup("taylor-green", &[]);
        let eps = 0.05;
        let r = flow_inverse_check(&tg, &m, eps, 0.4, &[0.31, 0.62, 0.0], 0.4 + eps * eps).unwrap();
        assert!(r <= 1e-6 * eps);
        let u = MollifiedVelocity::new(&tg, &m, eps).unwrap();
        let x = [0.31, 0.12, 0.0];
        let r1 = round_trip_residual(&u, 0.1, &x, 0.6, 0.05).unwrap();
        let r2 = round_trip_residual(&u, 0.1, &x, 0.6, 0.025).unwrap();
        assert!(r1 / r2 >= 8.0, "ratio {}", r1 / r2);
    }

    #[test]
    fn underflow_is_reported() {
        let (tg, m) = setup("taylor-green", &[]);
        let u = MollifiedVelocity::new(&tg, &m, 1e-8).unwrap();
        assert!(matches!(centerline(&u, 0.5, &ORIGIN, 64), Err(Error::StepUnderflow(_))));
    }

    #[test]
    fn flow_preserves_volume() {
        let (tg, m) = setup("taylor-green", &[3.0]);
        let eps = 0.08;
        let u = MollifiedVelocity::new(&tg, &m, eps).unwrap();
        let y = [0.4, 0.3, 0.0];
        let est = image_measure(&u, u.speed_bound(&y, 1.0), 0.3, &y, 0.3 + 4.0 * eps * eps, 4096, 64, 9).unwrap();
        let exact = std::f64::consts::PI * eps * eps;
        assert!((est.value / exact - 1.0).abs() < 0.02, "{}", est.value / exact);
    }
}
