//! Project perturbed gridded samples onto divergence-free fields, save them,
//! load them back and mollify the result.

use skewmax::domain::Domain;
use skewmax::field::io::{load_gridded, save_gridded};
use skewmax::flow::MollifiedVelocity;
use skewmax::mollify::Mollifier;
use skewmax::field::Source;
use skewmax::{project_divergence_free, GriddedField};

fn main() -> skewmax::Result<()> {
    let dom = Domain::unit(2)?;
    // a shear flow plus a compressible, high-frequency perturbation
    let raw = GriddedField::from_fn(dom, &[32, 32], 1, |_, x| {
        let tau = std::f64::consts::TAU;
        let wiggle = 0.05 * (tau * (7.0 * x[0] + 3.0 * x[1])).sin();
        [(tau * x[1]).sin() + wiggle, (tau * x[0]).cos() + 0.3 - wiggle, 0.0]
    })?;
    let before = raw.discrete_divergence(0).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let field = project_divergence_free(&raw)?;
    let Source::Gridded(g) = field.source() else { unreachable!() };
    let after = g.discrete_divergence(0).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("max |div| before = {before:.3e}, after = {after:.3e}");

    let dir = std::env::temp_dir().join("skewmax_project_example.csv");
    save_gridded(&dir, g)?;
    let loaded = load_gridded(&dir)?;
    println!("reloaded {} nodes x {} times from {}", loaded.lattice().len(), loaded.time_samples(), dir.display());

    let m = Mollifier::standard(2)?;
    let u = MollifiedVelocity::new(&field, &m, 0.05)?;
    let v = u.velocity(0.5, &[0.25, 0.5, 0.0]);
    println!("u_eps(0.5, (0.25, 0.5)) = ({:.5}, {:.5}) via {}", v[0], v[1], u.route_name());
    Ok(())
}
