//! Greedy disjoint subfamily of random admissible cylinders, with the
//! certificate and the empirical covering constant.

use skewmax::covering::{greedy_cover, satellite_bound, CoverOptions};
use skewmax::verify::{Context, ExperimentSpec};

fn main() -> skewmax::Result<()> {
    let spec = ExperimentSpec::default();
    let ctx = Context::new(&spec)?;
    let mut rng = ctx.rng(1);
    let mut family = Vec::new();
    while family.len() < 100 {
        if let Some(c) = ctx.random_admissible(&mut rng, 0.01, Some((0.01, 0.03)))? {
            family.push(c);
        }
    }
    let rep = greedy_cover(&family, &CoverOptions::default())?;
    print!("{}", rep.summary());
    println!("explicit bound = {}", satellite_bound(2));
    for (j, &i) in rep.selection.selected.iter().take(5).enumerate() {
        let c = &family[i];
        println!("  pick {j}: #{i} t = {:.4} eps = {:.4}", c.center_time(), c.eps());
    }
    Ok(())
}
