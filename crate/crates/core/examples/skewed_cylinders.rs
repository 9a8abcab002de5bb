//! Build skewed cylinders, test admissibility, and scan the radius grid for
//! the largest admissible radius.

use skewmax::cylinder::{dual_cylinder_measure, is_admissible, make_cylinder, smallest_admissible_radius, CylinderQuadrature};
use skewmax::domain::Domain;
use skewmax::maximal::{dyadic_eps_grid, GradientMaximal};
use skewmax::mollify::Mollifier;
use skewmax::make_analytic_field;

fn main() -> skewmax::Result<()> {
    let dom = Domain::unit(2)?;
    let field = make_analytic_field("taylor-green", &[], dom)?;
    let m = Mollifier::standard(2)?;
    let hl = GradientMaximal::for_field(&field, 64, 1.0)?;
    let quad = CylinderQuadrature::standard(2);
    let (t, x) = (0.5, [0.37, 0.21, 0.0]);

    for eps in [0.1, 0.05, 0.025] {
        let c = make_cylinder(&field, &m, eps, t, &x)?;
        let rep = is_admissible(&c, 0.01, &hl, &quad)?;
        let (t0, lo, hi) = (c.span().0, c.bounding_box().2, c.bounding_box().3);
        println!(
            "eps = {eps:<6} span starts {t0:.5}  box [{:.3}, {:.3}] x [{:.3}, {:.3}]  diam = {:.4}  eps^2 avg M = {:.5}  admissible = {}",
            lo[0], hi[0], lo[1], hi[1], c.diameter(), rep.value, rep.admissible
        );
    }

    let grid = dyadic_eps_grid(&dom, 1.0 / 128.0);
    let scan = smallest_admissible_radius(&field, &m, 0.01, t, &x, &grid, &hl, &quad)?;
    println!("radius grid {:?}\nmask {:?}\nlargest admissible {:?}", grid, scan.mask, scan.best);

    let eps = 0.05;
    let est = dual_cylinder_measure(&field, &m, eps, t, &x, 1 << 16, 3)?;
    println!("dual cylinder / |Q_eps| = {:.4} +- {:.4}", est.value / dom.cylinder_measure(eps), est.std_error / dom.cylinder_measure(eps));
    Ok(())
}
