//! The standard bump mollifier and spatial convolutions with it.
//!
//! `phi(y) = exp(-1 / (1 - |y|^2)) / Z` on the unit ball, where `Z` is the
//! integral of the bump under the stored quadrature. The quadrature is a
//! Gauss–Legendre rule in the radius times a uniform (or Gauss, for the
//! polar angle in 3-D) rule on the sphere; one rule serves every `eps` by
//! scaling, so `u_eps(t, x) = sum_k w_k phi(y_k) u(t, x - eps y_k)`.

use std::f64::consts::PI;

use crate::domain::{add, axpy, frobenius, jacobian_apply, Jacobian, Point, ORIGIN, ZERO_JACOBIAN};
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::quadrature::{gauss_legendre, gauss_legendre_on};

/// Angular directions used by the mollifier rule in 2-D.
const ANGLES_2D: usize = 16;
/// Polar (Gauss) and azimuthal (uniform) counts in 3-D.
const POLAR_3D: usize = 6;
const AZIMUTH_3D: usize = 12;
/// Radial nodes of the default rule; enough for a 1e-10 normalization.
const DEFAULT_RADIAL: usize = 32;
const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Mollifier {
    dim: usize,
    nodes: Vec<Point>,
    /// `w_k * phi(y_k)`; sums to one.
    mass: Vec<f64>,
    /// Distinct radii with the total mass on each sphere, for radial
    /// integrals of the form `int phi(y) g(|y|) dy`.
    radii: Vec<f64>,
    radial_mass: Vec<f64>,
    bump_integral: f64,
    sup_phi: f64,
    sup_y_phi: f64,
}

#[inline]
fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// High-resolution value of `int_{B_1} bump`.
fn bump_integral_oracle(d: usize) -> f64 {
    let (r, w) = gauss_legendre_on(400, 0.0, 1.0);
    let radial: f64 = r.iter().zip(&w).map(|(r, w)| w * bump(r * r) * r.powi(d as i32 - 1)).sum();
    sphere_area(d) * radial
}

/// Unit directions with weights summing to the sphere area.
fn sphere_rule(d: usize) -> Vec<(Point, f64)> {
    match d {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => (0..ANGLES_2D)
            .map(|j| {
                let th = 2.0 * PI * (j as f64 + 0.5) / ANGLES_2D as f64;
                ([th.cos(), th.sin(), 0.0], 2.0 * PI / ANGLES_2D as f64)
            })
            .collect(),
        _ => {
            let (ct, wt) = gauss_legendre(POLAR_3D);
            let mut out = Vec::with_capacity(POLAR_3D * AZIMUTH_3D);
            for (c, w) in ct.iter().zip(&wt) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..AZIMUTH_3D {
                    let ph = 2.0 * PI * (j as f64 + 0.5) / AZIMUTH_3D as f64;
                    out.push(([s * ph.cos(), s * ph.sin(), *c], w * 2.0 * PI / AZIMUTH_3D as f64));
                }
            }
            out
        }
    }
}

impl Mollifier {
    /// Build the rule with `node_count` nodes in dimension `d`
    /// (`node_count >= 32 d`). Fails if the stored quadrature misses the
    /// bump integral by more than `1e-8` relative.
    pub fn new(node_count: usize, d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("dimension {d}")));
        }
        if node_count < 32 * d {
            return Err(Error::InvalidParameter(format!("node count {node_count} below {}", 32 * d)));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut radii = Vec::new();
        let mut radial_weight = Vec::new();
        if d == 1 {
            let (x, w) = gauss_legendre(node_count);
            for (x, w) in x.into_iter().zip(w) {
                nodes.push([x, 0.0, 0.0]);
                weights.push(w);
                radii.push(x.abs());
                radial_weight.push(w);
            }
        } else {
            let dirs = sphere_rule(d);
            let n_r = node_count / dirs.len();
            if n_r == 0 {
                return Err(Error::Normalization { nodes: node_count, error: 1.0 });
            }
            let (r, w) = gauss_legendre_on(n_r, 0.0, 1.0);
            for (ri, wi) in r.into_iter().zip(w) {
                let jac = wi * ri.powi(d as i32 - 1);
                radii.push(ri);
                radial_weight.push(jac * sphere_area(d));
                for (dir, wd) in &dirs {
                    nodes.push([ri * dir[0], ri * dir[1], ri * dir[2]]);
                    weights.push(jac * wd);
                }
            }
        }
        let mut mass: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(y, w)| w * bump(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]))
            .collect();
        let z: f64 = mass.iter().sum();
        let oracle = bump_integral_oracle(d);
        let error = (z - oracle).abs() / oracle;
        if !(error <= NORMALIZATION_TOL) {
            return Err(Error::Normalization { nodes: node_count, error });
        }
        for m in &mut mass {
            *m /= z;
        }
        let radial_mass = radii.iter().zip(&radial_weight).map(|(r, w)| w * bump(r * r) / z).collect();
        // r exp(-1/(1-r^2)) peaks where (1 - r^2)^2 = 2 r^2.
        let r_star = (6f64.sqrt() - 2f64.sqrt()) / 2.0;
        Ok(Self {
            dim: d,
            nodes,
            mass,
            radii,
            radial_mass,
            bump_integral: z,
            sup_phi: bump(0.0) / z,
            sup_y_phi: r_star * bump(r_star * r_star) / z,
        })
    }

    /// Default rule: 32 radial nodes times the angular rule.
    pub fn standard(d: usize) -> Result<Self> {
        let per_shell = match d {
            1 => 2,
            2 => ANGLES_2D,
            _ => POLAR_3D * AZIMUTH_3D,
        };
        Self::new(DEFAULT_RADIAL * per_shell, d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Quadrature weight times `phi` at each node.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// `1 / Z`, the factor turning the bump into `phi`.
    pub fn normalization(&self) -> f64 {
        1.0 / self.bump_integral
    }

    /// `||phi||_inf = phi(0)`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_phi
    }

    /// `|| |y| phi(y) ||_inf`.
    pub fn sup_y_norm(&self) -> f64 {
        self.sup_y_phi
    }

    pub fn phi(&self, y: &Point) -> f64 {
        let r2: f64 = y[..self.dim].iter().map(|v| v * v).sum();
        bump(r2) / self.bump_integral
    }

    /// `int phi(y) cos(a y_1) dy`: the Fourier transform of `phi` at
    /// wavenumber `a`, by which mollification at scale `eps` multiplies a
    /// mode of wavenumber `a / eps`.
    pub fn shell_factor(&self, a: f64) -> f64 {
        let kernel: fn(f64) -> f64 = match self.dim {
            1 => f64::cos,
            2 => bessel_j0,
            _ => sinc,
        };
        self.radii.iter().zip(&self.radial_mass).map(|(r, m)| m * kernel(a * r)).sum()
    }

    /// Derivative of [`Mollifier::shell_factor`] in `a`.
    pub fn shell_factor_derivative(&self, a: f64) -> f64 {
        let kernel: fn(f64) -> f64 = match self.dim {
            1 => |z: f64| -z.sin(),
            2 => |z: f64| -bessel_j1(z),
            _ => sinc_derivative,
        };
        self.radii.iter().zip(&self.radial_mass).map(|(r, m)| m * r * kernel(a * r)).sum()
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn sinc_derivative(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        -z / 3.0
    } else {
        (z * z.cos() - z.sin()) / (z * z)
    }
}

/// Power series; accurate to round-off for the `|z| <= 10` used here.
fn bessel_j0(z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn bessel_j1(z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k * (k + 1)) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `u_eps(t, x) = int u(t, x - eps y) phi(y) dy` by the stored quadrature.
pub fn mollified_velocity(field: &VelocityField, m: &Mollifier, eps: f64, t: f64, x: &Point) -> Point {
    if !field.domain().contains_time(t) {
        return ORIGIN;
    }
    let mut out = ORIGIN;
    for (y, w) in m.nodes.iter().zip(&m.mass) {
        let u = field.evaluate(t, &axpy(x, -eps, y));
        out = axpy(&out, *w, &u);
    }
    out
}

/// `grad u_eps(t, x) = int grad u(t, x - eps y) phi(y) dy`.
pub fn mollified_gradient(field: &VelocityField, m: &Mollifier, eps: f64, t: f64, x: &Point) -> Jacobian {
    let mut out = ZERO_JACOBIAN;
    if !field.domain().contains_time(t) {
        return out;
    }
    let d = field.dim();
    for (y, w) in m.nodes.iter().zip(&m.mass) {
        let g = field.gradient(t, &axpy(x, -eps, y));
        for i in 0..d {
            for j in 0..d {
                out[i][j] += w * g[i][j];
            }
        }
    }
    out
}

/// `d u_eps / d eps = int grad u(t, x - eps y) (-y) phi(y) dy`.
pub fn d_epsilon_velocity(field: &VelocityField, m: &Mollifier, eps: f64, t: f64, x: &Point) -> Point {
    if !field.domain().contains_time(t) {
        return ORIGIN;
    }
    let d = field.dim();
    let mut out = ORIGIN;
    for (y, w) in m.nodes.iter().zip(&m.mass) {
        let g = field.gradient(t, &axpy(x, -eps, y));
        let gy = jacobian_apply(&g, y, d);
        out = axpy(&out, -w, &gy);
    }
    out
}

/// Tensor rule for averages over the unit ball with uniform density:
/// Gauss–Legendre in the radius (weight `r^{d-1}`) times uniform angles.
/// Weights sum to one.
#[derive(Clone, Debug)]
pub struct BallRule {
    dim: usize,
    nodes: Vec<Point>,
    weights: Vec<f64>,
}

impl BallRule {
    /// About `n` nodes (never fewer).
    pub fn uniform(n: usize, d: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match d {
            1 => {
                let (x, w) = gauss_legendre(n.max(1));
                for (x, w) in x.into_iter().zip(w) {
                    nodes.push([x, 0.0, 0.0]);
                    weights.push(w);
                }
            }
            2 => {
                let n_r = ((n as f64 / 2.0).sqrt().ceil() as usize).max(1);
                let n_t = 2 * n_r;
                let (r, w) = gauss_legendre_on(n_r, 0.0, 1.0);
                for (ri, wi) in r.into_iter().zip(w) {
                    for j in 0..n_t {
                        let th = 2.0 * PI * (j as f64 + 0.5) / n_t as f64;
                        nodes.push([ri * th.cos(), ri * th.sin(), 0.0]);
                        weights.push(wi * ri);
                    }
                }
            }
            _ => {
                let n_r = ((n as f64 / 2.0).cbrt().ceil() as usize).max(1);
                let (r, w) = gauss_legendre_on(n_r, 0.0, 1.0);
                let (ct, wt) = gauss_legendre(n_r);
                let n_p = 2 * n_r;
                for (ri, wi) in r.iter().zip(&w) {
                    for (c, wc) in ct.iter().zip(&wt) {
                        let s = (1.0 - c * c).sqrt();
                        for j in 0..n_p {
                            let ph = 2.0 * PI * (j as f64 + 0.5) / n_p as f64;
                            nodes.push([ri * s * ph.cos(), ri * s * ph.sin(), ri * c]);
                            weights.push(wi * ri * ri * wc);
                        }
                    }
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self { dim: d, nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Average of `f` over the ball of radius `r` around `center`.
    pub fn average<F: FnMut(&Point) -> f64>(&self, center: &Point, r: f64, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(y, w)| w * f(&axpy(center, r, y))).sum()
    }
}

/// `||grad u(t)||_{L^1(B_r(x))}` by a ball rule (Frobenius norm pointwise).
pub fn gradient_l1_on_ball(field: &VelocityField, rule: &BallRule, t: f64, x: &Point, r: f64) -> f64 {
    let d = field.dim();
    let avg = rule.average(x, r, |p| frobenius(&field.gradient(t, p), d));
    avg * field.domain().ball_volume(r)
}

/// Dense tensor-grid convolution `int u(t, x - z) phi_eps(z) dz` with `n`
/// midpoints per axis over `[-eps, eps]^d`. Slow; meant as a cross-check.
pub fn brute_force_mollify<F>(d: usize, m: &Mollifier, eps: f64, x: &Point, n: usize, f: F) -> Vec<f64>
where
    F: Fn(&Point) -> Vec<f64>,
{
    let h = 2.0 / n as f64;
    let total = n.pow(d as u32);
    let mut acc: Vec<f64> = Vec::new();
    for flat in 0..total {
        let mut y = ORIGIN;
        let mut rem = flat;
        for a in 0..d {
            y[a] = -1.0 + h * ((rem % n) as f64 + 0.5);
            rem /= n;
        }
        let w = m.phi(&y);
        if w == 0.0 {
            continue;
        }
        let v = f(&add(x, &[-eps * y[0], -eps * y[1], -eps * y[2]]));
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += w * h.powi(d as i32) * b;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::field::make_analytic_field;

    #[test]
    fn normalization_and_support() {
        for d in 1..=3 {
            let m = Mollifier::standard(d).unwrap();
            let total: f64 = m.masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert_eq!(m.phi(&[1.5, 0.0, 0.0]), 0.0);
            assert!(m.phi(&ORIGIN) >= m.phi(&[0.3, 0.0, 0.0]));
            assert!((m.sup_norm() - m.phi(&ORIGIN)).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_64_nodes_pass() {
        let m = Mollifier::new(64, 1).unwrap();
        let oracle = bump_integral_oracle(1) * m.normalization();
        assert!((oracle - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn too_few_nodes_fail_normalization() {
        assert!(matches!(Mollifier::new(64, 2), Err(Error::Normalization { .. })));
        assert!(matches!(Mollifier::new(10, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn sup_y_phi_dominates_samples() {
        let m = Mollifier::standard(2).unwrap();
        for k in 0..=1000 {
            let r = k as f64 / 1000.0;
            assert!(r * m.phi(&[r, 0.0, 0.0]) <= m.sup_y_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn shell_factor_matches_direct_sum() {
        for d in 1..=3 {
            let m = Mollifier::standard(d).unwrap();
            for a in [0.0, 0.3, 0.8, 1.1] {
                let axis = if d == 3 { 2 } else { 0 };
                let direct: f64 =
                    m.nodes().iter().zip(m.masses()).map(|(y, w)| w * (a * y[axis]).cos()).sum();
                assert!((direct - m.shell_factor(a)).abs() < 1e-10, "d {d} a {a}");
                let h = 1e-5;
                let fd = (m.shell_factor(a + h) - m.shell_factor(a - h)) / (2.0 * h);
                assert!((fd - m.shell_factor_derivative(a)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let dom = Domain::unit(2).unwrap();
        let m = Mollifier::standard(2).unwrap();
        let c = make_analytic_field("constant", &[1.0, 0.0], dom).unwrap();
        let shear = make_analytic_field("linear-shear", &[], dom).unwrap();
        let x = [0.3, 0.7, 0.0];
        for eps in [0.01, 0.05, 0.125] {
            let u = mollified_velocity(&c, &m, eps, 0.5, &x);
            assert!((u[0] - 1.0).abs() < 1e-14 && u[1].abs() < 1e-14);
            assert_eq!(mollified_gradient(&c, &m, eps, 0.5, &x), ZERO_JACOBIAN);
            let v = mollified_velocity(&shear, &m, eps, 0.5, &x);
            assert!((v[0] - 0.7).abs() < 1e-14 && v[1].abs() < 1e-14);
            let g = mollified_gradient(&shear, &m, eps, 0.5, &x);
            assert!((g[0][1] - 1.0).abs() < 1e-14 && g[0][0] == 0.0 && g[1][0] == 0.0);
            assert!(norm2(&d_epsilon_velocity(&shear, &m, eps, 0.5, &x)) < 1e-14);
            assert!(norm2(&d_epsilon_velocity(&c, &m, eps, 0.5, &x)) < 1e-14);
        }
    }

    fn norm2(p: &Point) -> f64 {
        crate::domain::norm(p, 3)
    }

    #[test]
    fn zero_outside_time_span() {
        let dom = Domain::unit(2).unwrap();
        let m = Mollifier::standard(2).unwrap();
        let c = make_analytic_field("constant", &[1.0, 0.0], dom).unwrap();
        assert_eq!(mollified_velocity(&c, &m, 0.05, 1.5, &ORIGIN), ORIGIN);
    }

    #[test]
    fn ball_rule_moments() {
        let r2 = BallRule::uniform(128, 2);
        let avg = r2.average(&ORIGIN, 0.1, |p| p[0] * p[0] + p[1] * p[1]);
        assert!((avg - 0.005).abs() < 1e-15);
        let r3 = BallRule::uniform(192, 3);
        let avg = r3.average(&ORIGIN, 1.0, |p| p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        assert!((avg - 0.6).abs() < 1e-13);
        let r1 = BallRule::uniform(64, 1);
        assert!((r1.average(&ORIGIN, 2.0, |p| p[0] * p[0]) - 4.0 / 3.0).abs() < 1e-13);
    }
}
