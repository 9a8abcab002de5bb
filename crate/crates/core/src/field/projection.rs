//! Helmholtz (Leray) projection of gridded samples onto fields whose
//! centered-difference divergence vanishes.
//!
//! In Fourier space the centered difference along axis `j` has symbol
//! `i sin(k_j h_j) / h_j`. Removing the component of each mode along that
//! modified wavevector makes the discrete divergence vanish to round-off and
//! the map is an orthogonal projector, hence idempotent.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::Result;
use crate::field::{GriddedField, VelocityField};
use crate::lattice::Lattice;

/// Project every time sample and wrap the result as a velocity field.
pub fn project_divergence_free(samples: &GriddedField) -> Result<VelocityField> {
    Ok(VelocityField::from_gridded(project_samples(samples)?))
}

/// Projected copy of the samples.
pub fn project_samples(samples: &GriddedField) -> Result<GriddedField> {
    let lattice = *samples.lattice();
    let d = lattice.dim();
    let n = lattice.len();
    let symbols = modified_wavevectors(&lattice);
    let mut planner = FftPlanner::<f64>::new();
    let mut out = Vec::with_capacity(samples.raw().len());
    for k in 0..samples.time_samples() {
        let slab = &samples.raw()[k * n * d..(k + 1) * n * d];
        let mut spectra: Vec<Vec<Complex<f64>>> = (0..d)
            .map(|c| {
                let mut buf: Vec<Complex<f64>> =
                    (0..n).map(|i| Complex::new(slab[i * d + c], 0.0)).collect();
                fft_nd(&mut planner, &mut buf, &lattice, false);
                buf
            })
            .collect();
        for (mode, kt) in symbols.iter().enumerate() {
            let norm2: f64 = kt[..d].iter().map(|v| v * v).sum();
            if norm2 == 0.0 {
                continue;
            }
            let mut dot = Complex::new(0.0, 0.0);
            for c in 0..d {
                dot += spectra[c][mode] * kt[c];
            }
            for c in 0..d {
                spectra[c][mode] -= dot * (kt[c] / norm2);
            }
        }
        let mut real = vec![0.0; n * d];
        for (c, spec) in spectra.iter_mut().enumerate() {
            fft_nd(&mut planner, spec, &lattice, true);
            for i in 0..n {
                real[i * d + c] = spec[i].re / n as f64;
            }
        }
        out.extend_from_slice(&real);
    }
    GriddedField::new(*samples.domain(), lattice.counts(), samples.time_samples(), out)
}

/// `sin(k_j h_j) / h_j` per mode, with modes whose symbol vanishes up to
/// round-off (mean and Nyquist) snapped to exactly zero.
fn modified_wavevectors(lattice: &Lattice) -> Vec<[f64; 3]> {
    let d = lattice.dim();
    (0..lattice.len())
        .map(|flat| {
            let mi = lattice.multi_index(flat);
            let mut kt = [0.0; 3];
            for a in 0..d {
                let n = lattice.count(a);
                let h = lattice.spacing(a);
                let m = mi[a] as usize;
                kt[a] = if m == 0 || 2 * m == n {
                    0.0
                } else {
                    (2.0 * PI * m as f64 / n as f64).sin() / h
                };
            }
            kt
        })
        .collect()
}

/// Unnormalized multi-dimensional FFT over a row-major buffer.
pub(crate) fn fft_nd(planner: &mut FftPlanner<f64>, data: &mut [Complex<f64>], lattice: &Lattice, inverse: bool) {
    let total = lattice.len();
    for axis in 0..lattice.dim() {
        let n = lattice.count(axis);
        let stride = lattice.stride(axis);
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(dom: Domain, counts: &[usize], seed: u64) -> GriddedField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = counts.iter().product::<usize>() * dom.dim();
        let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GriddedField::new(dom, counts, 1, data).unwrap()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn random_grid_becomes_discretely_solenoidal() {
        for (dim, counts) in [(2, vec![32, 24]), (3, vec![12, 10, 8])] {
            let dom = Domain::unit(dim).unwrap();
            let g = random_field(dom, &counts, 7);
            let p = project_samples(&g).unwrap();
            assert!(max_abs(&p.discrete_divergence(0)) <= 1e-6, "dim {dim}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let dom = Domain::unit(2).unwrap();
        let p1 = project_samples(&random_field(dom, &[32, 32], 3)).unwrap();
        let p2 = project_samples(&p1).unwrap();
        let diff = p1.raw().iter().zip(p2.raw()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-10, "diff {diff}");
    }

    #[test]
    fn discrete_gradients_are_annihilated() {
        let dom = Domain::unit(2).unwrap();
        let lat = Lattice::cubic(2, 32, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi: Vec<f64> = (0..lat.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut data = vec![0.0; lat.len() * 2];
        for node in 0..lat.len() {
            let mi = lat.multi_index(node);
            for a in 0..2 {
                let (mut p, mut m) = (mi, mi);
                p[a] += 1;
                m[a] -= 1;
                data[node * 2 + a] = (psi[lat.index(p)] - psi[lat.index(m)]) / (2.0 * lat.spacing(a));
            }
        }
        let g = GriddedField::new(dom, &[32, 32], 1, data).unwrap();
        let p = project_samples(&g).unwrap();
        assert!(max_abs(p.raw()) < 1e-10);
    }

    #[test]
    fn single_axis_analytic_gradient_is_annihilated() {
        let dom = Domain::unit(2).unwrap();
        let g = GriddedField::from_fn(dom, &[32, 32], 1, |_, x| {
            [2.0 * PI * (2.0 * PI * x[0]).cos(), 0.0, 0.0]
        })
        .unwrap();
        let p = project_samples(&g).unwrap();
        assert!(max_abs(p.raw()) < 1e-10);
    }

    #[test]
    fn solenoidal_input_is_unchanged() {
        let dom = Domain::unit(2).unwrap();
        let g = GriddedField::from_fn(dom, &[32, 32], 2, |_, x| {
            let k = 2.0 * PI;
            [(k * x[0]).sin() * (k * x[1]).cos(), -(k * x[0]).cos() * (k * x[1]).sin(), 0.0]
        })
        .unwrap();
        let p = project_samples(&g).unwrap();
        let diff = g.raw().iter().zip(p.raw()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-10, "diff {diff}");
    }
}
