//! Greedy Vitali-type selection for families of skewed cylinders, Monte
//! Carlo union measures, and the geometric checks behind the covering
//! argument (satellite unions, closeness of intersecting cylinders, and
//! closeness of streamlines through a cylinder).

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{intersection_witness, CylinderQuadrature, SkewedCylinder};
use crate::domain::Point;
use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::flow::{integrate_with_step, jittered, Estimate, MollifiedVelocity, Trajectory, DEFAULT_STEP_BUDGET};
use crate::mollify::Mollifier;

/// Default number of time probes for intersection tests.
pub const DEFAULT_PROBES: usize = 64;
/// Smallest sample count accepted by [`union_measure`].
pub const MIN_UNION_SAMPLES: usize = 65_536;

/// `2 (16/3) 9^{2d} + 9^d`: the union bound assembled from the satellite
/// argument (two end slabs and the middle slab).
pub fn satellite_bound(d: usize) -> f64 {
    let nine_d = 9f64.powi(d as i32);
    2.0 * (16.0 / 3.0) * nine_d * nine_d + nine_d
}

#[derive(Clone, Debug)]
pub struct CoverOptions {
    pub n_probe: usize,
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        Self { n_probe: DEFAULT_PROBES, n_mc: MIN_UNION_SAMPLES, seed: 0 }
    }
}

/// Why a family member left the working set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Removal {
    pub index: usize,
    /// Position in the selection order of the cylinder that removed it.
    pub step: usize,
    /// Probe time at which the two overlap.
    pub time: f64,
}

/// The greedy selection alone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    /// Family indices in selection order.
    pub selected: Vec<usize>,
    /// Largest radius left in the working set before each step.
    pub max_remaining: Vec<f64>,
    /// Every non-selected member with its witness.
    pub removals: Vec<Removal>,
    pub n_probe: usize,
}

/// Greedy rule: pick a member whose radius exceeds half the largest left
/// (the largest, lowest index on ties), then drop everything meeting it.
pub fn greedy_select(family: &[SkewedCylinder], n_probe: usize) -> Selection {
    let mut working: Vec<usize> = (0..family.len()).collect();
    let mut selected = Vec::new();
    let mut max_remaining = Vec::new();
    let mut removals = Vec::new();
    while !working.is_empty() {
        let sup = working.iter().map(|&i| family[i].eps()).fold(0.0, f64::max);
        let pick = working
            .iter()
            .copied()
            .filter(|&i| family[i].eps() > 0.5 * sup)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if family[b].eps() >= family[i].eps() => Some(b),
                _ => Some(i),
            })
            .expect("the largest radius is always a candidate");
        let step = selected.len();
        selected.push(pick);
        max_remaining.push(sup);
        let hits: Vec<Option<f64>> = working
            .par_iter()
            .map(|&i| if i == pick { Some(f64::NAN) } else { intersection_witness(&family[pick], &family[i], n_probe) })
            .collect();
        let mut rest = Vec::with_capacity(working.len());
        for (&i, hit) in working.iter().zip(hits) {
            match hit {
                Some(time) if i != pick => removals.push(Removal { index: i, step, time }),
                Some(_) => {}
                None => rest.push(i),
            }
        }
        working = rest;
    }
    removals.sort_by_key(|r| r.index);
    Selection { selected, max_remaining, removals, n_probe }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub family_size: usize,
    pub selection: Selection,
    /// Selected pairs that the probes find intersecting (should be zero).
    pub disjointness_violations: usize,
    /// `sum_j |Q^{alpha_j}|`.
    pub selected_measure: f64,
    pub union_estimate: f64,
    pub union_std_error: f64,
    pub union_samples: usize,
    /// `|union| / sum_j |Q^{alpha_j}|`.
    pub constant: f64,
}

impl CoverReport {
    /// Selection-order rows `order,index,t,x_1..x_d,epsilon`.
    pub fn write_csv<W: Write>(&self, mut w: W, family: &[SkewedCylinder]) -> Result<()> {
        let d = family.first().map(|c| c.domain().dim()).unwrap_or(0);
        let xs: Vec<String> = (1..=d).map(|a| format!("x_{a}")).collect();
        writeln!(w, "order,index,t,{},epsilon", xs.join(","))?;
        for (j, &i) in self.selection.selected.iter().enumerate() {
            let c = &family[i];
            write!(w, "{j},{i},{}", c.center_time())?;
            for v in &c.center()[..d] {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", c.eps())?;
        }
        Ok(())
    }

    /// Plain-text block of the headline numbers.
    pub fn summary(&self) -> String {
        format!(
            "family_size = {}\nselected = {}\nn_probe = {}\ndisjointness_violations = {}\nselected_measure = {:.6e}\nunion_estimate = {:.6e}\nunion_std_error = {:.3e}\nunion_samples = {}\nconstant = {:.6}\n",
            self.family_size,
            self.selection.selected.len(),
            self.selection.n_probe,
            self.disjointness_violations,
            self.selected_measure,
            self.union_estimate,
            self.union_std_error,
            self.union_samples,
            self.constant,
        )
    }
}

/// Greedy selection plus its certificate and the empirical covering
/// constant. An empty family gives an empty report.
pub fn greedy_cover(family: &[SkewedCylinder], opts: &CoverOptions) -> Result<CoverReport> {
    let selection = greedy_select(family, opts.n_probe);
    if family.is_empty() {
        return Ok(CoverReport {
            family_size: 0,
            selection,
            disjointness_violations: 0,
            selected_measure: 0.0,
            union_estimate: 0.0,
            union_std_error: 0.0,
            union_samples: 0,
            constant: 0.0,
        });
    }
    let sel = &selection.selected;
    let disjointness_violations = (0..sel.len())
        .into_par_iter()
        .map(|a| {
            ((a + 1)..sel.len())
                .filter(|&b| intersection_witness(&family[sel[a]], &family[sel[b]], opts.n_probe).is_some())
                .count()
        })
        .sum();
    let selected_measure: f64 = sel.iter().map(|&i| family[i].measure()).sum();
    let union = union_measure(family, opts.n_mc, opts.seed)?;
    Ok(CoverReport {
        family_size: family.len(),
        disjointness_violations,
        selected_measure,
        union_estimate: union.value,
        union_std_error: union.std_error,
        union_samples: union.samples,
        constant: union.value / selected_measure,
        selection,
    })
}

/// Measure of the union of `family` by stratified sampling of its spacetime
/// bounding box (axes that wrap the torus are sampled over one period).
pub fn union_measure(family: &[SkewedCylinder], n_mc: usize, seed: u64) -> Result<Estimate> {
    if n_mc < MIN_UNION_SAMPLES {
        return Err(Error::InvalidParameter(format!("n_mc {n_mc} below {MIN_UNION_SAMPLES}")));
    }
    let first = family.first().ok_or(Error::DegenerateBox)?;
    let dom = *first.domain();
    let d = dom.dim();
    let boxes: Vec<_> = family.iter().map(|c| c.bounding_box()).collect();
    let mut lo = vec![f64::INFINITY; d + 1];
    let mut hi = vec![f64::NEG_INFINITY; d + 1];
    for (t_lo, t_hi, blo, bhi) in &boxes {
        lo[0] = lo[0].min(*t_lo);
        hi[0] = hi[0].max(*t_hi);
        for a in 0..d {
            // compare boxes in the frame of the first member's center
            let shift = dom.period() * ((0.5 * (blo[a] + bhi[a]) - first.center()[a]) / dom.period()).round();
            lo[a + 1] = lo[a + 1].min(blo[a] - shift);
            hi[a + 1] = hi[a + 1].max(bhi[a] - shift);
        }
    }
    let mut width: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    for a in 0..d {
        if width[a + 1] >= dom.period() {
            lo[a + 1] = 0.0;
            width[a + 1] = dom.period();
        }
    }
    if width.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::DegenerateBox);
    }
    let per_axis = (n_mc as f64).powf(1.0 / (d + 1) as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = jittered(&lo, &width, per_axis, &mut rng);
    let hits: usize = pts
        .par_iter()
        .map(|q| {
            let x = [q[1], q[2], q[3]];
            usize::from(family.iter().any(|c| c.contains(q[0], &x)))
        })
        .sum();
    let n = pts.len() as f64;
    let vol: f64 = width.iter().product();
    let frac = hits as f64 / n;
    Ok(Estimate { value: vol * frac, std_error: vol * (frac * (1.0 - frac) / n).sqrt(), samples: pts.len() })
}

/// Where a time falls relative to the anchor span `(S, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slab {
    /// `s <= S`
    Before,
    /// `S < s < T`
    Middle,
    /// `s >= T`
    After,
}

pub fn classify(anchor: &SkewedCylinder, s: f64) -> Slab {
    let (lo, hi) = anchor.span();
    if s <= lo {
        Slab::Before
    } else if s >= hi {
        Slab::After
    } else {
        Slab::Middle
    }
}

/// Radius group `i >= 0` with `2^{-i} eps_a <= eps_b < 2^{1-i} eps_a`
/// (`None` when `eps_b >= 2 eps_a`).
pub fn radius_group(eps_a: f64, eps_b: f64) -> Option<usize> {
    if eps_b >= 2.0 * eps_a || !(eps_b > 0.0) {
        return None;
    }
    let mut i = 0;
    while eps_b < eps_a * 0.5f64.powi(i as i32) {
        i += 1;
    }
    Some(i)
}

#[derive(Clone, Debug, Serialize)]
pub struct SatelliteReport {
    pub satellites: usize,
    /// Member count of each radius group, group 0 first.
    pub group_sizes: Vec<usize>,
    /// Quadrature points of the middle slabs that were tested.
    pub middle_samples: usize,
    /// Middle-slab points found outside `9 Q^alpha`.
    pub middle_violations: usize,
    /// Largest `|y - X^alpha(s)| / eps_alpha` over middle-slab points.
    pub worst_middle_ratio: f64,
    pub union_estimate: f64,
    pub union_std_error: f64,
    /// `|union| / |Q^alpha|`.
    pub ratio: f64,
    pub bound: f64,
}

impl SatelliteReport {
    pub fn holds(&self) -> bool {
        self.middle_violations == 0 && self.ratio <= self.bound
    }
}

/// Check the satellite picture around `anchor`: every satellite must meet
/// the anchor and have radius below twice the anchor's.
pub fn satellite_union_check(
    anchor: &SkewedCylinder,
    satellites: &[SkewedCylinder],
    quad: &CylinderQuadrature,
    opts: &CoverOptions,
) -> Result<SatelliteReport> {
    let ea = anchor.eps();
    let mut groups: Vec<usize> = Vec::new();
    for (k, b) in satellites.iter().enumerate() {
        let g = radius_group(ea, b.eps()).ok_or_else(|| {
            Error::Hypothesis(format!("satellite {k}: radius {} not below 2 x {ea}", b.eps()))
        })?;
        if intersection_witness(anchor, b, opts.n_probe).is_none() {
            return Err(Error::Hypothesis(format!("satellite {k} does not meet the anchor")));
        }
        if groups.len() <= g {
            groups.resize(g + 1, 0);
        }
        groups[g] += 1;
    }
    let dom = anchor.domain();
    let (middle_samples, middle_violations, worst) = satellites
        .par_iter()
        .map(|b| {
            let (mut n, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
            for s in quad.slice_times(b).filter(|&s| classify(anchor, s) == Slab::Middle) {
                let axis = b.axis(s);
                let center = anchor.axis(s);
                for y in quad.ball().nodes() {
                    let p = [axis[0] + b.radius() * y[0], axis[1] + b.radius() * y[1], axis[2] + b.radius() * y[2]];
                    let r = dom.distance(&p, &center) / ea;
                    n += 1;
                    if r >= 9.0 {
                        bad += 1;
                    }
                    worst = worst.max(r);
                }
            }
            (n, bad, worst)
        })
        .reduce(|| (0, 0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)));
    let (union_estimate, union_std_error) = if satellites.is_empty() {
        (0.0, 0.0)
    } else {
        let u = union_measure(satellites, opts.n_mc, opts.seed)?;
        (u.value, u.std_error)
    };
    Ok(SatelliteReport {
        satellites: satellites.len(),
        group_sizes: groups,
        middle_samples,
        middle_violations,
        worst_middle_ratio: worst,
        union_estimate,
        union_std_error,
        ratio: union_estimate / anchor.measure(),
        bound: satellite_bound(dom.dim()),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosenessReport {
    /// Largest `(|X^b(t) - X^a(t)| + eps_b) / eps_a` over probed common times.
    pub ratio: f64,
    pub n_probe: usize,
}

impl ClosenessReport {
    pub fn holds(&self) -> bool {
        self.ratio <= 9.0
    }
}

/// `B^b(t)` inside `9 B^a(t)` on the common span of two intersecting
/// cylinders with `eps_b < 2 eps_a`.
pub fn closeness_check(a: &SkewedCylinder, b: &SkewedCylinder, n_probe: usize) -> Result<ClosenessReport> {
    if b.eps() >= 2.0 * a.eps() {
        return Err(Error::Hypothesis(format!("radius {} not below 2 x {}", b.eps(), a.eps())));
    }
    if intersection_witness(a, b, n_probe).is_none() {
        return Err(Error::Hypothesis("cylinders do not intersect".into()));
    }
    let (lo, hi) = (a.span().0.max(b.span().0), a.span().1.min(b.span().1));
    let n = n_probe.max(1);
    let dom = a.domain();
    let ratio = (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .map(|t| (dom.distance(&a.axis(t), &b.axis(t)) + b.eps()) / a.eps())
        .fold(0.0, f64::max);
    Ok(ClosenessReport { ratio, n_probe: n })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StreamlineReport {
    pub seeds: usize,
    /// Largest `|X_{eps_a}(t0, x0; t) - X^a(t)| / (2 eps_a)`.
    pub worst_seed_ratio: f64,
    /// Largest `|X_{eps_b}(t0, x0; t) - X_{eps_a}(t0, x0; t)| / eps_a`, when
    /// a companion cylinder is given.
    pub worst_pair_ratio: Option<f64>,
    pub n_probe: usize,
}

impl StreamlineReport {
    pub fn holds(&self) -> bool {
        self.worst_seed_ratio <= 1.0 && self.worst_pair_ratio.is_none_or(|r| r <= 1.0)
    }
}

/// `X_eps(t0, x0; .)` on `[lo, hi]` (which contains `t0`).
fn streamline(field: &VelocityField, m: &Mollifier, eps: f64, t0: f64, x0: &Point, lo: f64, hi: f64) -> Result<(Trajectory, Trajectory)> {
    let u = MollifiedVelocity::new(field, m, eps)?;
    let h = eps * eps / DEFAULT_STEP_BUDGET as f64;
    Ok((integrate_with_step(&u, t0, x0, lo, h)?, integrate_with_step(&u, t0, x0, hi, h)?))
}

fn along(pair: &(Trajectory, Trajectory), t0: f64, t: f64) -> Point {
    if t <= t0 {
        pair.0.at(t)
    } else {
        pair.1.at(t)
    }
}

/// Follow the mollified streamline through each seed of `a` (and of `b`, if
/// given, with `eps_b < 2 eps_a` and seeds in both) and compare it with the
/// centerline of `a` and with the companion streamline.
pub fn streamline_closeness_check(
    field: &VelocityField,
    m: &Mollifier,
    a: &SkewedCylinder,
    b: Option<&SkewedCylinder>,
    seeds: &[(f64, Point)],
    n_probe: usize,
) -> Result<StreamlineReport> {
    if let Some(b) = b {
        if b.eps() >= 2.0 * a.eps() {
            return Err(Error::Hypothesis(format!("radius {} not below 2 x {}", b.eps(), a.eps())));
        }
    }
    for (t0, x0) in seeds {
        let outside = !a.contains(*t0, x0) || b.is_some_and(|b| !b.contains(*t0, x0));
        if outside {
            return Err(Error::SeedOutside(*t0, x0[..a.domain().dim()].to_vec()));
        }
    }
    let dom = *a.domain();
    let ea = a.eps();
    let n = n_probe.max(1);
    let probes = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect() };
    let (a_lo, a_hi) = a.span();
    let results: Vec<(f64, Option<f64>)> = seeds
        .par_iter()
        .map(|(t0, x0)| -> Result<(f64, Option<f64>)> {
            let sa = streamline(field, m, ea, *t0, x0, a_lo, a_hi)?;
            let seed_ratio = probes(a_lo, a_hi)
                .into_iter()
                .map(|t| dom.distance(&along(&sa, *t0, t), &a.axis(t)) / (2.0 * ea))
                .fold(0.0, f64::max);
            let pair = match b {
                None => None,
                Some(b) => {
                    let (lo, hi) = (a_lo.max(b.span().0), a_hi.min(b.span().1));
                    let sb = streamline(field, m, b.eps(), *t0, x0, lo, hi)?;
                    Some(
                        probes(lo, hi)
                            .into_iter()
                            .map(|t| dom.distance(&along(&sb, *t0, t), &along(&sa, *t0, t)) / ea)
                            .fold(0.0, f64::max),
                    )
                }
            };
            Ok((seed_ratio, pair))
        })
        .collect::<Result<_>>()?;
    let worst_seed_ratio = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_pair_ratio = b.map(|_| results.iter().filter_map(|r| r.1).fold(0.0, f64::max));
    Ok(StreamlineReport { seeds: seeds.len(), worst_seed_ratio, worst_pair_ratio, n_probe: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::make_cylinder;
    use crate::domain::Domain;
    use crate::field::make_analytic_field;

    fn zero() -> (VelocityField, Mollifier) {
        let dom = Domain::unit(2).unwrap();
        (make_analytic_field("zero", &[], dom).unwrap(), Mollifier::standard(2).unwrap())
    }

    #[test]
    fn bound_value() {
        assert_eq!(satellite_bound(2), 2.0 * 16.0 / 3.0 * 6561.0 + 81.0);
        assert!((satellite_bound(2) - 70065.0).abs() < 1e-9);
    }

    #[test]
    fn duplicates_and_disjoint_families() {
        let (f, m) = zero();
        let c = make_cylinder(&f, &m, 0.1, 0.5, &[0.3, 0.3, 0.0]).unwrap();
        let rep = greedy_cover(&[c.clone(), c.clone()], &CoverOptions::default()).unwrap();
        assert_eq!(rep.selection.selected, vec![0]);
        assert_eq!(rep.selection.removals[0].index, 1);
        let far = make_cylinder(&f, &m, 0.1, 0.5, &[0.8, 0.8, 0.0]).unwrap();
        let rep = greedy_cover(&[c.clone(), far.clone()], &CoverOptions::default()).unwrap();
        assert_eq!(rep.selection.selected.len(), 2);
        assert_eq!(rep.disjointness_violations, 0);
        let exact = c.measure() + far.measure();
        assert!((rep.union_estimate - exact).abs() < 3.0 * rep.union_std_error.max(1e-9));
        assert!(greedy_cover(&[], &CoverOptions::default()).unwrap().selection.selected.is_empty());
    }

    #[test]
    fn union_of_one_and_dilated() {
        let (f, m) = zero();
        let c = make_cylinder(&f, &m, 0.1, 0.5, &[0.02, 0.5, 0.0]).unwrap();
        let u = union_measure(std::slice::from_ref(&c), MIN_UNION_SAMPLES, 1).unwrap();
        assert!((u.value - c.measure()).abs() < 3.0 * u.std_error);
        let big = c.dilate(2.0).unwrap();
        let u = union_measure(&[c.clone(), big.clone()], MIN_UNION_SAMPLES, 2).unwrap();
        assert!((u.value - 4.0 * c.measure()).abs() < 3.0 * u.std_error);
        assert!(union_measure(&[], MIN_UNION_SAMPLES, 0).is_err());
        assert!(union_measure(&[c], 100, 0).is_err());
    }

    #[test]
    fn radius_groups_partition() {
        assert_eq!(radius_group(1.0, 1.5), Some(0));
        assert_eq!(radius_group(1.0, 1.0), Some(0));
        assert_eq!(radius_group(1.0, 0.99), Some(1));
        assert_eq!(radius_group(1.0, 0.5), Some(1));
        assert_eq!(radius_group(1.0, 0.2), Some(3));
        assert_eq!(radius_group(1.0, 2.0), None);
    }

    #[test]
    fn satellites_of_copies_and_violations() {
        let (f, m) = zero();
        let a = make_cylinder(&f, &m, 0.1, 0.5, &[0.5, 0.5, 0.0]).unwrap();
        let quad = CylinderQuadrature::standard(2);
        let rep = satellite_union_check(&a, &[a.clone(), a.clone()], &quad, &CoverOptions::default()).unwrap();
        assert!((rep.ratio - 1.0).abs() < 3.0 * rep.union_std_error / a.measure());
        assert!(rep.holds());
        let far = make_cylinder(&f, &m, 0.1, 0.5, &[0.9, 0.5, 0.0]).unwrap();
        assert!(matches!(
            satellite_union_check(&a, &[far], &quad, &CoverOptions::default()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn static_closeness() {
        let (f, m) = zero();
        let a = make_cylinder(&f, &m, 0.05, 0.5, &[0.5, 0.5, 0.0]).unwrap();
        assert!((closeness_check(&a, &a, 16).unwrap().ratio - 1.0).abs() < 1e-12);
        let b = make_cylinder(&f, &m, 0.099, 0.5, &[0.64, 0.5, 0.0]).unwrap();
        let r = closeness_check(&a, &b, 16).unwrap();
        assert!(r.ratio < 5.0 && r.holds());
        let s = streamline_closeness_check(&f, &m, &a, Some(&b), &[(0.5, [0.545, 0.5, 0.0])], 16).unwrap();
        assert!(s.worst_seed_ratio <= 0.5 && s.worst_pair_ratio.unwrap() == 0.0);
        assert!(matches!(
            streamline_closeness_check(&f, &m, &a, None, &[(0.5, [0.9, 0.5, 0.0])], 16),
            Err(Error::SeedOutside(..))
        ));
    }
}
