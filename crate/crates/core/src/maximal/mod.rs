//! The spatial maximal function `M` and the skewed maximal operator
//! `M_Q f(t, x) = sup { avg_{Q_eps(t, x)} |f| : Q_eps(t, x) eta-admissible }`,
//! with the sup taken over a finite descending radius grid.

mod hl;

pub use hl::{default_radius_grid, hl_maximal, hl_maximal_at, GradientMaximal, HLMaximalField};

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{is_admissible, CylinderQuadrature, SkewedCylinder};
use crate::domain::{Domain, Point};
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::flow::{MollifiedVelocity, VelocityProvider, DEFAULT_STEP_BUDGET};
use crate::mollify::Mollifier;
use crate::spacetime::{SpacetimeFn, SpacetimeGrid};

/// Radii `L/8, L/(8 sqrt 2), ...` down to `2h`, descending.
pub fn dyadic_eps_grid(domain: &Domain, h: f64) -> Vec<f64> {
    let mut e = domain.max_radius();
    let mut out = Vec::new();
    while e >= 2.0 * h * (1.0 - 1e-12) {
        out.push(e);
        e /= 2f64.sqrt();
    }
    out
}

fn check_eps_grid(domain: &Domain, eps_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(Error::Empty("radius grid"));
    }
    if eps_grid.len() > 64 {
        return Err(Error::InvalidParameter("at most 64 radii per grid".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("radius grid must be strictly descending".into()));
    }
    for &e in eps_grid {
        domain.check_radius(e)?;
    }
    Ok(())
}

/// Knobs of a skewed maximal sweep.
#[derive(Clone, Debug)]
pub struct MaximalOptions {
    pub eta: f64,
    /// Strictly descending, at most 64 entries, each in `(0, L/8]`.
    pub eps_grid: Vec<f64>,
    pub quad: CylinderQuadrature,
    pub step_budget: usize,
}

impl MaximalOptions {
    pub fn new(dim: usize, eta: f64, eps_grid: Vec<f64>) -> Self {
        Self { eta, eps_grid, quad: CylinderQuadrature::standard(dim), step_budget: DEFAULT_STEP_BUDGET }
    }
}

/// `M_Q f` on a spacetime grid.
#[derive(Clone, Debug)]
pub struct MaximalField {
    grid: SpacetimeGrid,
    eps_grid: Vec<f64>,
    eta: f64,
    values: Vec<f64>,
    argmax: Vec<Option<u8>>,
    masks: Vec<u64>,
}

/// Headline numbers of a [`MaximalField`].
#[derive(Clone, Debug, Serialize)]
pub struct MaximalSummary {
    pub eta: f64,
    pub eps_grid: Vec<f64>,
    pub points: usize,
    pub cell_volume: f64,
    pub sup: f64,
    pub l1: f64,
    pub l2: f64,
    pub flagged_fraction: f64,
}

impl MaximalField {
    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn eps_grid(&self) -> &[f64] {
        &self.eps_grid
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Values in the point order of the grid.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Maximizing radius at point `k` (`None` if nothing was admissible).
    pub fn argmax_eps(&self, k: usize) -> Option<f64> {
        self.argmax[k].map(|i| self.eps_grid[i as usize])
    }

    /// Bit `i` set iff `eps_grid[i]` is admissible at point `k`.
    pub fn mask(&self, k: usize) -> u64 {
        self.masks[k]
    }

    pub fn admissible_count(&self, k: usize) -> u32 {
        self.masks[k].count_ones()
    }

    /// No admissible radius on the grid: the value 0 is a placeholder.
    pub fn is_flagged(&self, k: usize) -> bool {
        self.masks[k] == 0
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.masks.iter().filter(|m| **m == 0).count() as f64 / self.masks.len() as f64
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn summary(&self) -> MaximalSummary {
        MaximalSummary {
            eta: self.eta,
            eps_grid: self.eps_grid.clone(),
            points: self.values.len(),
            cell_volume: self.grid.cell_volume(),
            sup: self.sup(),
            l1: self.grid.l1_norm(&self.values),
            l2: self.grid.lp_norm(&self.values, 2.0),
            flagged_fraction: self.flagged_fraction(),
        }
    }

    /// Columns `t,x_1..x_d,value,argmax_eps,admissible_count`; `argmax_eps`
    /// is empty at flagged points.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.grid.dim();
        let xs: Vec<String> = (1..=d).map(|a| format!("x_{a}")).collect();
        writeln!(w, "t,{},value,argmax_eps,admissible_count", xs.join(","))?;
        for k in 0..self.values.len() {
            let (t, x) = self.grid.point(k);
            write!(w, "{t}")?;
            for v in &x[..d] {
                write!(w, ",{v}")?;
            }
            let arg = self.argmax_eps(k).map(|e| e.to_string()).unwrap_or_default();
            writeln!(w, ",{},{},{}", self.values[k], arg, self.admissible_count(k))?;
        }
        Ok(())
    }
}

/// Per spatial node and radius: the cylinder at every grid time, reusing one
/// centerline for steady fields.
struct CylinderSource<'a> {
    provider: MollifiedVelocity<'a>,
    steady: bool,
    step_budget: usize,
}

impl<'a> CylinderSource<'a> {
    fn new(field: &'a VelocityField, m: &'a Mollifier, eps: f64, step_budget: usize) -> Result<Self> {
        Ok(Self { provider: MollifiedVelocity::new(field, m, eps)?, steady: field.is_steady(), step_budget })
    }

    /// A reference cylinder whose centerline is valid for every in-horizon
    /// translate (`None` when the field is not steady or no span fits).
    fn reference(&self, x: &Point) -> Result<Option<SkewedCylinder>> {
        let dom = VelocityProvider::domain(&self.provider);
        let e2 = self.provider.eps() * self.provider.eps();
        if !self.steady || 2.0 * e2 >= dom.duration() {
            return Ok(None);
        }
        let mid = 0.5 * (dom.start() + dom.end());
        SkewedCylinder::build(&self.provider, mid, x, self.step_budget).map(Some)
    }

    fn at(&self, reference: Option<&SkewedCylinder>, t: f64, x: &Point) -> Result<SkewedCylinder> {
        if let Some(r) = reference {
            let c = r.moved_to(t);
            if c.within_horizon() {
                return Ok(c);
            }
        }
        SkewedCylinder::build(&self.provider, t, x, self.step_budget)
    }
}

/// `M_Q f` with `M(|grad u|)` precomputed on a lattice matching the grid
/// spacing and the default quadrature.
pub fn skewed_maximal<F: SpacetimeFn + ?Sized>(
    field: &VelocityField,
    m: &Mollifier,
    f: &F,
    eta: f64,
    grid: &SpacetimeGrid,
    eps_grid: &[f64],
) -> Result<MaximalField> {
    let n = ((field.domain().period() / grid.spacing()[0]).round() as usize).clamp(8, 256);
    let hl = GradientMaximal::for_field(field, n, 1.0)?;
    let opts = MaximalOptions::new(field.dim(), eta, eps_grid.to_vec());
    skewed_maximal_with(field, m, f, grid, &opts, &hl)
}

/// `M_Q f` with explicit options and `M(|grad u|)` handle.
pub fn skewed_maximal_with<F: SpacetimeFn + ?Sized, H: SpacetimeFn + ?Sized>(
    field: &VelocityField,
    m: &Mollifier,
    f: &F,
    grid: &SpacetimeGrid,
    opts: &MaximalOptions,
    hl: &H,
) -> Result<MaximalField> {
    let dom = *field.domain();
    check_eps_grid(&dom, &opts.eps_grid)?;
    if !(opts.eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta = {} must be positive", opts.eta)));
    }
    if grid.dim() != dom.dim() {
        return Err(Error::Shape("grid and field dimensions differ".into()));
    }
    let sources = opts
        .eps_grid
        .iter()
        .map(|&e| CylinderSource::new(field, m, e, opts.step_budget))
        .collect::<Result<Vec<_>>>()?;
    let cache_admissibility = field.is_steady() && hl.is_steady();
    let times = grid.times();
    let per_node: Vec<Vec<(f64, Option<u8>, u64)>> = (0..grid.spatial_len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, Option<u8>, u64)>> {
            let x = grid.node(i);
            let mut out = vec![(0.0, None, 0u64); times.len()];
            for (e, src) in sources.iter().enumerate() {
                let reference = src.reference(&x)?;
                let cached = match (&reference, cache_admissibility) {
                    (Some(r), true) => Some(is_admissible(r, opts.eta, hl, &opts.quad)?.value < opts.eta),
                    _ => None,
                };
                for (k, &t) in times.iter().enumerate() {
                    let c = src.at(reference.as_ref(), t, &x)?;
                    let ok = match cached {
                        Some(v) => v && c.within_horizon(),
                        None => is_admissible(&c, opts.eta, hl, &opts.quad)?.admissible,
                    };
                    if !ok {
                        continue;
                    }
                    let avg = opts.quad.average_abs(&c, f)?;
                    let slot = &mut out[k];
                    slot.2 |= 1 << e;
                    if slot.1.is_none() || avg > slot.0 {
                        slot.0 = avg;
                        slot.1 = Some(e as u8);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let n = grid.spatial_len();
    let mut values = vec![0.0; grid.len()];
    let mut argmax = vec![None; grid.len()];
    let mut masks = vec![0; grid.len()];
    for (i, node) in per_node.into_iter().enumerate() {
        for (k, (v, a, mk)) in node.into_iter().enumerate() {
            values[k * n + i] = v;
            argmax[k * n + i] = a;
            masks[k * n + i] = mk;
        }
    }
    Ok(MaximalField { grid: grid.clone(), eps_grid: opts.eps_grid.clone(), eta: opts.eta, values, argmax, masks })
}

/// `f_eps(t, x)`: signed average of `f` over `Q_eps(t, x)` at every grid
/// point, admissible or not.
pub fn f_epsilon<F: SpacetimeFn + ?Sized>(
    field: &VelocityField,
    m: &Mollifier,
    f: &F,
    eps: f64,
    grid: &SpacetimeGrid,
    quad: &CylinderQuadrature,
) -> Result<Vec<f64>> {
    field.domain().check_radius(eps)?;
    let src = CylinderSource::new(field, m, eps, DEFAULT_STEP_BUDGET)?;
    let times = grid.times();
    let per_node: Vec<Vec<f64>> = (0..grid.spatial_len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = grid.node(i);
            let reference = src.reference(&x)?;
            times
                .iter()
                .map(|&t| quad.average_signed(&src.at(reference.as_ref(), t, &x)?, f))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = grid.spatial_len();
    let mut out = vec![0.0; grid.len()];
    for (i, node) in per_node.into_iter().enumerate() {
        for (k, v) in node.into_iter().enumerate() {
            out[k * n + i] = v;
        }
    }
    Ok(out)
}

/// `M f` over upright cylinders `(t - e^2, t + e^2) x B_e(x)`, with the same
/// slice times and ball nodes as `quad`; every radius whose span stays in
/// `(S, T)` counts. This is `M_Q f` for the zero field.
pub fn upright_maximal<F: SpacetimeFn + ?Sized>(
    f: &F,
    domain: &Domain,
    grid: &SpacetimeGrid,
    eps_grid: &[f64],
    quad: &CylinderQuadrature,
) -> Result<Vec<f64>> {
    check_eps_grid(domain, eps_grid)?;
    let nt = quad.n_time();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (t, x) = grid.point(k);
            let mut best = 0.0f64;
            for &e in eps_grid {
                let (lo, hi) = (t - e * e, t + e * e);
                if lo < domain.start() || hi > domain.end() {
                    continue;
                }
                let (mut total, mut vmin, mut vmax) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
                for j in 0..nt {
                    let s = lo + (j as f64 + 0.5) * (hi - lo) / nt as f64;
                    let mut slice = 0.0;
                    for (y, w) in quad.ball().nodes().iter().zip(quad.ball().weights()) {
                        let v = f.eval(s, &[x[0] + e * y[0], x[1] + e * y[1], x[2] + e * y[2]]).abs();
                        vmin = vmin.min(v);
                        vmax = vmax.max(v);
                        slice += w * v;
                    }
                    total += slice;
                }
                best = best.max((total / nt as f64).clamp(vmin, vmax));
            }
            best
        })
        .collect())
}

/// `n` points log-spaced between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Empirical weak-type constants `lambda mu({v > lambda}) / ||f||_1`.
#[derive(Clone, Debug, Serialize)]
pub struct WeakTypeReport {
    pub lambdas: Vec<f64>,
    pub measures: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Largest ratio.
    pub constant: f64,
}

/// Cell-counted superlevel measures of `values` laid out on `grid`.
pub fn weak_type(values: &[f64], grid: &SpacetimeGrid, f_l1: f64, lambdas: &[f64]) -> Result<WeakTypeReport> {
    if !(f_l1 > 0.0) {
        return Err(Error::InvalidParameter("weak-type ratio needs a nonzero ||f||_1".into()));
    }
    let cell = grid.cell_volume();
    let measures: Vec<f64> =
        lambdas.iter().map(|&l| values.iter().filter(|v| **v > l).count() as f64 * cell).collect();
    let ratios: Vec<f64> = lambdas.iter().zip(&measures).map(|(l, mu)| l * mu / f_l1).collect();
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    Ok(WeakTypeReport { lambdas: lambdas.to_vec(), measures, ratios, constant })
}

/// `||M f||_p / ||f||_p` from samples on the same grid.
pub fn strong_type_ratio(m_values: &[f64], f_values: &[f64], grid: &SpacetimeGrid, p: f64) -> Result<f64> {
    let denom = grid.lp_norm(f_values, p);
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter("strong-type ratio needs a nonzero ||f||_p".into()));
    }
    Ok(grid.lp_norm(m_values, p) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_analytic_field;
    use crate::spacetime::{BoxIndicator, Constant};

    fn zero_setup(n: usize) -> (VelocityField, Mollifier, SpacetimeGrid) {
        let dom = Domain::unit(2).unwrap();
        let field = make_analytic_field("zero", &[], dom).unwrap();
        let grid = SpacetimeGrid::full(&dom, n, 4).unwrap();
        (field, Mollifier::standard(2).unwrap(), grid)
    }

    /// Upright cylinders built by hand: slices of `(t - e^2, t + e^2)`, ball
    /// nodes around `x`; the horizon condition is the only admissibility test.
    fn upright(f: &dyn SpacetimeFn, dom: &Domain, grid: &SpacetimeGrid, eps_grid: &[f64], quad: &CylinderQuadrature) -> Vec<f64> {
        (0..grid.len())
            .map(|k| {
                let (t, x) = grid.point(k);
                let mut best = 0.0f64;
                for &e in eps_grid {
                    let (lo, hi) = (t - e * e, t + e * e);
                    if lo < dom.start() || hi > dom.end() {
                        continue;
                    }
                    let nt = quad.n_time();
                    let mut total = 0.0;
                    for j in 0..nt {
                        let s = lo + (j as f64 + 0.5) * (hi - lo) / nt as f64;
                        for (y, w) in quad.ball().nodes().iter().zip(quad.ball().weights()) {
                            let p = [x[0] + e * y[0], x[1] + e * y[1], x[2] + e * y[2]];
                            total += w * f.eval(s, &p).abs();
                        }
                    }
                    best = best.max(total / nt as f64);
                }
                best
            })
            .collect()
    }

    #[test]
    fn constant_is_reproduced() {
        let (field, m, grid) = zero_setup(8);
        let eps = dyadic_eps_grid(field.domain(), 1.0 / 32.0);
        let mf = skewed_maximal(&field, &m, &Constant(-0.75), 0.1, &grid, &eps).unwrap();
        for k in 0..grid.len() {
            if !mf.is_flagged(k) {
                assert_eq!(mf.values()[k], 0.75);
            }
        }
        assert!(mf.flagged_fraction() < 1.0);
    }

    #[test]
    fn zero_field_matches_upright_oracle() {
        let (field, m, grid) = zero_setup(12);
        let dom = *field.domain();
        let f = BoxIndicator::new(dom, 0.5, 0.1, [0.4, 0.55, 0.0], 0.12);
        let eps = dyadic_eps_grid(&dom, 1.0 / 24.0);
        let mf = skewed_maximal(&field, &m, &f, 0.1, &grid, &eps).unwrap();
        let oracle = upright(&f, &dom, &grid, &eps, &CylinderQuadrature::standard(2));
        for (a, b) in mf.values().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        assert!(mf.sup() <= 1.0);
    }

    #[test]
    fn masks_and_argmax_are_consistent() {
        let dom = Domain::unit(2).unwrap();
        let field = make_analytic_field("taylor-green", &[], dom).unwrap();
        let m = Mollifier::standard(2).unwrap();
        let grid = SpacetimeGrid::full(&dom, 6, 3).unwrap();
        let f = |t: f64, x: &Point| (t * 3.0).sin() + x[0];
        let eps = dyadic_eps_grid(&dom, 1.0 / 16.0);
        let mf = skewed_maximal(&field, &m, &f, 0.05, &grid, &eps).unwrap();
        for k in 0..grid.len() {
            match mf.argmax_eps(k) {
                None => assert_eq!(mf.values()[k], 0.0),
                Some(e) => {
                    let i = eps.iter().position(|v| *v == e).unwrap();
                    assert!(mf.mask(k) & (1 << i) != 0);
                    assert!(mf.values()[k] >= 0.0);
                }
            }
        }
        let mut buf = Vec::new();
        mf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_1,x_2,value,argmax_eps,admissible_count\n"));
        assert_eq!(text.lines().count(), grid.len() + 1);
    }

    #[test]
    fn f_epsilon_of_constant() {
        let (field, m, grid) = zero_setup(4);
        let v = f_epsilon(&field, &m, &Constant(2.5), 0.1, &grid, &CylinderQuadrature::standard(2)).unwrap();
        assert!(v.iter().all(|x| *x == 2.5));
    }

    #[test]
    fn bad_grids() {
        let (field, m, grid) = zero_setup(4);
        let c = Constant(1.0);
        assert!(skewed_maximal(&field, &m, &c, 0.1, &grid, &[]).is_err());
        assert!(skewed_maximal(&field, &m, &c, 0.1, &grid, &[0.05, 0.1]).is_err());
        assert!(skewed_maximal(&field, &m, &c, 0.1, &grid, &[0.2]).is_err());
        assert!(skewed_maximal(&field, &m, &c, 0.0, &grid, &[0.1]).is_err());
    }

    #[test]
    fn weak_and_strong_helpers() {
        let grid = SpacetimeGrid::full(&Domain::unit(1).unwrap(), 4, 1).unwrap();
        let vals = [0.0, 1.0, 2.0, 4.0];
        let w = weak_type(&vals, &grid, 1.0, &[0.5, 3.0]).unwrap();
        assert_eq!(w.measures, vec![0.75, 0.25]);
        assert_eq!(w.constant, 0.75);
        let r = strong_type_ratio(&vals, &vals, &grid, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let g = log_grid(0.01, 1.0, 3);
        assert!((g[1] - 0.1).abs() < 1e-12);
    }
}
