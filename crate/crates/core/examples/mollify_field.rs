//! Mollify the Taylor–Green field and compare the closed-form route with
//! plain quadrature and a dense brute-force convolution.

use skewmax::domain::{frobenius, Domain};
use skewmax::flow::MollifiedVelocity;
use skewmax::mollify::{brute_force_mollify, Mollifier};
use skewmax::make_analytic_field;

fn main() -> skewmax::Result<()> {
    let dom = Domain::unit(2)?;
    let field = make_analytic_field("taylor-green", &[], dom)?;
    let m = Mollifier::standard(2)?;
    println!("mollifier: {} nodes, |phi|_inf = {:.6}", m.len(), m.sup_norm());

    let x = [0.3, 0.7, 0.0];
    for eps in [0.02, 0.05, 0.1] {
        let fast = MollifiedVelocity::new(&field, &m, eps)?;
        let slow = MollifiedVelocity::quadrature(&field, &m, eps)?;
        let (a, b) = (fast.velocity(0.5, &x), slow.velocity(0.5, &x));
        let dense = brute_force_mollify(2, &m, eps, &x, 200, |p| field.evaluate(0.5, p)[..2].to_vec());
        println!(
            "eps = {eps:<5} route = {:<10} u_eps = ({:+.8}, {:+.8})  quadrature diff = {:.1e}  dense diff = {:.1e}  |grad u_eps| = {:.5}",
            fast.route_name(),
            a[0],
            a[1],
            (a[0] - b[0]).hypot(a[1] - b[1]),
            (a[0] - dense[0]).hypot(a[1] - dense[1]),
            frobenius(&fast.gradient(0.5, &x), 2),
        );
    }
    Ok(())
}
