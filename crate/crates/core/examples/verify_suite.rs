//! Run the verification suite on a catalog field.
//!
//! `cargo run --release --example verify_suite -- [field] [dim] [checks...]`
//!
//! Three-dimensional fields get `spatial = 128, stride = 4`: abc needs radii
//! below about 0.03 to be admissible at `eta = 0.01`.

use skewmax::verify::{run_suite, ExperimentSpec};

fn main() -> skewmax::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut spec = ExperimentSpec::default();
    if let Some(name) = args.first() {
        spec.field.name = name.clone();
    }
    if let Some(d) = args.get(1) {
        spec.field.dim = d.parse().expect("dimension");
    }
    if spec.field.name == "constant" {
        spec.field.params = vec![1.0, 0.0, 0.0][..spec.field.dim].to_vec();
    }
    if spec.field.dim == 3 {
        spec.grid.spatial = 128;
        spec.grid.stride = 4;
    }
    spec.suite.checks = args.iter().skip(2).cloned().collect();
    let report = run_suite(&spec)?;
    print!("{}", report.to_text());
    eprint!("{}", report.runtimes_text());
    Ok(())
}
