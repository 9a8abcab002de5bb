//! Mollified trajectories: linear shear moves `(x, y)` to `(x + s y, y)`,
//! and the Taylor–Green flow map preserves volume.

use skewmax::domain::Domain;
use skewmax::flow::{flow_to, image_measure, integrate_flow, round_trip_residual, MollifiedVelocity, DEFAULT_STEP_BUDGET};
use skewmax::mollify::Mollifier;
use skewmax::make_analytic_field;

fn main() -> skewmax::Result<()> {
    let dom = Domain::unit(2)?;
    let m = Mollifier::standard(2)?;

    let shear = make_analytic_field("linear-shear", &[], dom)?;
    let x0 = [0.2, 0.4, 0.0];
    let tr = integrate_flow(&shear, &m, 0.1, 0.5, &x0, 0.52, DEFAULT_STEP_BUDGET)?;
    let end = tr.positions().last().unwrap();
    println!("shear: {} samples, end = ({:.12}, {:.12}), exact = ({:.12}, {:.12})", tr.len(), end[0], end[1], x0[0] + 0.02 * x0[1], x0[1]);

    let tg = make_analytic_field("taylor-green", &[], dom)?;
    let eps = 0.08;
    let u = MollifiedVelocity::new(&tg, &m, eps)?;
    let y = [0.31, 0.62, 0.0];
    let there = flow_to(&u, 0.5, &y, 0.5 + eps * eps, DEFAULT_STEP_BUDGET)?;
    println!("taylor-green: ({:.4}, {:.4}) -> ({:.6}, {:.6}) over eps^2", y[0], y[1], there[0], there[1]);
    for h in [1e-3, 5e-4, 2.5e-4] {
        println!("  round trip residual at step {h:.1e}: {:.2e}", round_trip_residual(&u, 0.5, &y, 0.5 + eps * eps, h)?);
    }

    let est = image_measure(&u, u.speed_bound(&y, 1.0), 0.5, &y, 0.5 + eps * eps, 1 << 16, DEFAULT_STEP_BUDGET, 7)?;
    let ball = dom.ball_volume(eps);
    println!("|image of B_eps| / |B_eps| = {:.5} +- {:.5}", est.value / ball, est.std_error / ball);
    Ok(())
}
