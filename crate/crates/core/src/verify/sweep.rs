use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{is_admissible, CylinderQuadrature, SkewedCylinder};
use crate::domain::{Point, ORIGIN};
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::flow::{MollifiedVelocity, DEFAULT_STEP_BUDGET};
use crate::maximal::{dyadic_eps_grid, GradientMaximal};
use crate::mollify::Mollifier;
use crate::spacetime::SpacetimeFn;

/// Tail length over which diameters must decrease.
const TAIL: usize = 4;

/// One resolution of an existence sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub resolution: usize,
    /// Smallest radius of the resolution's grid (`>= 2 L / n`).
    pub finest_eps: f64,
    pub radii: usize,
    /// Points with at least one admissible radius on the grid.
    pub found: f64,
    /// Points whose cylinder diameters strictly decrease along the last
    /// radii of the grid.
    pub shrinking: f64,
    /// Points with both properties.
    pub fraction: f64,
}

/// Fraction of 256 seeded random points (seed 0) at which an admissible
/// cylinder exists on the radius grid of each resolution, with shrinking
/// diameters; `M(|grad u|)` on 64 nodes per axis (32 in 3d). Points keep a
/// distance `(L/8)^2` from `S` and `T` so that every grid radius fits.
pub fn existence_sweep(field: &VelocityField, m: &Mollifier, eta: f64, resolutions: &[usize]) -> Result<Vec<f64>> {
    let dom = field.domain();
    let n = if dom.dim() == 3 { 32 } else { 64 };
    let hl = GradientMaximal::for_field(field, n, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let points: Vec<(f64, Point)> = (0..256)
        .map(|_| {
            let margin = dom.max_radius().powi(2);
            let t = dom.start() + margin + (dom.duration() - 2.0 * margin) * rng.gen::<f64>();
            let mut x = ORIGIN;
            for v in x.iter_mut().take(dom.dim()) {
                *v = dom.period() * rng.gen::<f64>();
            }
            (t, x)
        })
        .collect();
    let quad = CylinderQuadrature::standard(dom.dim());
    let rows = existence_sweep_at(field, m, eta, resolutions, &points, &hl, &quad, DEFAULT_STEP_BUDGET)?;
    Ok(rows.into_iter().map(|r| r.fraction).collect())
}

/// Existence sweep at given points. The grid of resolution `n` runs from
/// `L/8` down by `sqrt 2` to `2 L / n`, so coarser grids are prefixes of
/// finer ones and each point is scanned once on the finest grid.
#[allow(clippy::too_many_arguments)]
pub fn existence_sweep_at<H: SpacetimeFn + ?Sized>(
    field: &VelocityField,
    m: &Mollifier,
    eta: f64,
    resolutions: &[usize],
    points: &[(f64, Point)],
    hl: &H,
    quad: &CylinderQuadrature,
    step_budget: usize,
) -> Result<Vec<SweepRow>> {
    let dom = *field.domain();
    let l = dom.period();
    if resolutions.is_empty() {
        return Err(Error::Empty("resolution list"));
    }
    if points.is_empty() {
        return Err(Error::Empty("sweep point set"));
    }
    let grids: Vec<Vec<f64>> = resolutions.iter().map(|&n| dyadic_eps_grid(&dom, l / n as f64)).collect();
    if let Some(n) = resolutions.iter().zip(&grids).find(|(_, g)| g.is_empty()).map(|(n, _)| n) {
        return Err(Error::InvalidParameter(format!("resolution {n} leaves no radius below L/8")));
    }
    let finest = grids.iter().max_by_key(|g| g.len()).expect("nonempty").clone();
    let providers = finest
        .iter()
        .map(|&e| MollifiedVelocity::new(field, m, e))
        .collect::<Result<Vec<_>>>()?;
    // per point: (admissible, diameter) for each radius of the finest grid
    let scans: Vec<Vec<(bool, f64)>> = points
        .par_iter()
        .map(|(t, x)| {
            providers
                .iter()
                .map(|u| -> Result<(bool, f64)> {
                    match SkewedCylinder::build(u, *t, x, step_budget) {
                        Ok(c) => Ok((is_admissible(&c, eta, hl, quad)?.admissible, c.diameter())),
                        Err(Error::OutsideHorizon(..)) => Ok((false, f64::INFINITY)),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let total = points.len() as f64;
    Ok(resolutions
        .iter()
        .zip(&grids)
        .map(|(&n, g)| {
            let p = g.len();
            let (mut found, mut shrinking, mut both) = (0usize, 0usize, 0usize);
            for s in &scans {
                let f = s[..p].iter().any(|v| v.0);
                let tail = &s[p.saturating_sub(TAIL)..p];
                let sh = tail.windows(2).all(|w| w[1].1 < w[0].1);
                found += f as usize;
                shrinking += sh as usize;
                both += (f && sh) as usize;
            }
            SweepRow {
                resolution: n,
                finest_eps: g[p - 1],
                radii: p,
                found: found as f64 / total,
                shrinking: shrinking as f64 / total,
                fraction: both as f64 / total,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::field::make_analytic_field;

    #[test]
    fn zero_field_is_found_everywhere() {
        let dom = Domain::unit(2).unwrap();
        let f = make_analytic_field("zero", &[], dom).unwrap();
        let m = Mollifier::standard(2).unwrap();
        assert_eq!(existence_sweep(&f, &m, 0.01, &[16, 32]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn linear_shear_needs_small_radii() {
        // |grad u| = 1, so admissibility needs eps^2 < eta
        let dom = Domain::unit(2).unwrap();
        let f = make_analytic_field("linear-shear", &[], dom).unwrap();
        let m = Mollifier::standard(2).unwrap();
        let fr = existence_sweep(&f, &m, 0.01, &[16, 64]).unwrap();
        assert!(fr[0] < 0.01, "{fr:?}");
        assert!(fr[1] >= 0.99, "{fr:?}");
    }
}
