use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::sweep::existence_sweep_at;
use super::{log_uniform, unit_ball, CheckResult, Context};
use crate::covering::{closeness_check, greedy_cover, satellite_bound, satellite_union_check, streamline_closeness_check, CoverOptions};
use crate::cylinder::{dual_cylinder_measure_with, SkewedCylinder};
use crate::domain::{add, frobenius, norm, scale, sub, Point, ORIGIN};
use crate::error::Result;
use crate::field::Source;
use crate::flow::image_measure;
use crate::maximal::{
    dyadic_eps_grid, f_epsilon, log_grid, skewed_maximal_with, strong_type_ratio, upright_maximal, weak_type, MaximalOptions,
};
use crate::mollify::{gradient_l1_on_ball, mollified_gradient, BallRule};
use crate::spacetime::{BoxIndicator, SmoothBump, SpacetimeFn, SpacetimeGrid};

/// Suite order.
pub const CHECK_NAMES: &[&str] = &[
    "field-invariants",
    "mollify-estimates",
    "flow-volume",
    "dual-measure",
    "existence-sweep",
    "closeness",
    "satellite-union",
    "greedy-cover",
    "maximal-linf",
    "maximal-constants",
    "l1-boundedness",
    "convergence",
    "eta-escalation",
];

/// Relative slack for the explicit-constant inequalities (round-off only).
const ROUND_OFF: f64 = 1e-12;

pub(crate) fn run_check(ctx: &Context, name: &str, stream: u64) -> Result<CheckResult> {
    let mut rng = ctx.rng(stream);
    match name {
        "field-invariants" => field_invariants(ctx, &mut rng),
        "mollify-estimates" => mollify_estimates(ctx, &mut rng),
        "flow-volume" => flow_volume(ctx, &mut rng),
        "dual-measure" => dual_measure(ctx, &mut rng),
        "existence-sweep" => existence(ctx, &mut rng),
        "closeness" => closeness(ctx, &mut rng),
        "satellite-union" => satellites(ctx, &mut rng),
        "greedy-cover" => cover(ctx, &mut rng),
        "maximal-linf" => maximal_linf(ctx),
        "maximal-constants" => maximal_constants(ctx),
        "l1-boundedness" => l1_boundedness(ctx),
        "convergence" => convergence(ctx, &mut rng),
        "eta-escalation" => escalation(ctx, &mut rng),
        other => unreachable!("unknown check {other}"),
    }
}

fn random_points(ctx: &Context, rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, Point)> {
    (0..n).map(|_| (ctx.uniform_time(rng, 0.0), ctx.uniform_point(rng))).collect()
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

fn field_invariants(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("field-invariants", true);
    let field = &ctx.field;
    let dom = ctx.domain;
    let d = ctx.dim();
    let pts = random_points(ctx, rng, 256);
    let scale_g = 1.0 + field.gradient_bound();
    let div = match field.source() {
        Source::Gridded(g) => max_of((0..g.time_samples()).flat_map(|k| g.discrete_divergence(k)).map(f64::abs)),
        Source::Analytic(_) => max_of(pts.iter().map(|(t, x)| field.divergence(*t, x).abs())),
    };
    r.metric("max_divergence", div).metric("gradient_scale", scale_g);
    r.require(div <= 1e-8 * scale_g, "divergence above 1e-8 x (1 + |grad u|)");
    if field.is_periodic() {
        let l = dom.period();
        let per = max_of(pts.iter().flat_map(|(t, x)| {
            (0..d).map(move |a| {
                let mut y = *x;
                y[a] += l;
                norm(&sub(&field.evaluate(*t, &y), &field.evaluate(*t, x)), d)
            })
        }));
        let speed = max_of(pts.iter().map(|(t, x)| norm(&field.evaluate(*t, x), d)));
        r.metric("periodicity_defect", per);
        r.require(per <= 1e-9 * (1.0 + speed), "velocity not periodic");
    }
    let outside = max_of(pts.iter().map(|(_, x)| {
        let before = field.evaluate(dom.start() - 0.5 * dom.duration(), x);
        let after = field.evaluate(dom.end() + 0.5 * dom.duration(), x);
        norm(&before, d) + norm(&after, d)
    }));
    r.metric("speed_outside_horizon", outside);
    r.require(outside == 0.0, "velocity nonzero outside [S, T]");
    let finite = pts.iter().all(|(t, x)| {
        field.evaluate(*t, x)[..d].iter().all(|v| v.is_finite()) && field.gradient_norm(*t, x).is_finite()
    });
    r.require(finite, "non-finite velocity or gradient");
    Ok(r)
}

/// `M(|grad u(t)|)(z)` from below: the largest ball average over radii that
/// include the two used by the estimate's proof.
fn maximal_lower(ctx: &Context, rule: &BallRule, t: f64, z: &Point, radii: &[f64]) -> f64 {
    let d = ctx.dim();
    max_of(radii.iter().map(|&rr| rule.average(z, rr, |p| frobenius(&ctx.field.gradient(t, p), d))))
}

fn mollify_estimates(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("mollify-estimates", true);
    let n = ctx.spec.monte_carlo.estimate_configs;
    let dom = ctx.domain;
    let d = ctx.dim();
    let l = dom.period();
    let phi = ctx.mollifier.sup_norm();
    let rule = BallRule::uniform(64, d);
    // (t, x, y, r, eps) per configuration; r = 0 marks the single-ball estimate
    let mut configs: Vec<(usize, f64, Point, Point, f64, f64)> = Vec::with_capacity(3 * n);
    for kind in 0..3 {
        for _ in 0..n {
            let eps = log_uniform(rng, l / 64.0, l / 16.0);
            let t = ctx.uniform_time(rng, 0.0);
            let x = ctx.uniform_point(rng);
            let y = add(&x, &scale(&unit_ball(rng, d), 2.0 * eps));
            let rr = match kind {
                0 => 0.0,
                1 => eps,
                _ => eps * (0.25 + 1.75 * rng.gen::<f64>()),
            };
            configs.push((kind, t, x, y, rr, eps));
        }
    }
    let ratios: Vec<(usize, f64, f64)> = configs
        .par_iter()
        .map(|&(kind, t, x, y, rr, eps)| {
            let lhs = frobenius(&mollified_gradient(&ctx.field, &ctx.mollifier, eps, t, &x), d);
            let front = phi * eps.powi(-(d as i32));
            let rhs = if kind == 0 {
                front * gradient_l1_on_ball(&ctx.field, &rule, t, &x, eps)
            } else {
                let k = (dom.distance(&y, &x) + rr + eps) / rr;
                let avg = rule.average(&y, rr, |z| {
                    let own = dom.distance(z, &x) + eps;
                    maximal_lower(ctx, &rule, t, z, &[own, k * rr, l / 8.0, l / 4.0])
                });
                front * k.powi(d as i32) * dom.ball_volume(rr) * avg
            };
            (kind, lhs, rhs)
        })
        .collect();
    for (kind, label) in ["grad_ball", "grad_maximal_same_radius", "grad_maximal"].iter().enumerate() {
        let rows: Vec<&(usize, f64, f64)> = ratios.iter().filter(|v| v.0 == kind).collect();
        let worst = max_of(rows.iter().map(|v| if v.2 > 0.0 { v.1 / v.2 } else { 0.0 }));
        let bad = rows.iter().filter(|v| v.1 > v.2 * (1.0 + ROUND_OFF)).count();
        r.metric(&format!("{label}_worst_ratio"), worst).metric(&format!("{label}_violations"), bad as f64);
        r.require(bad == 0, &format!("{label}: {bad} violations"));
    }
    r.metric("configs_per_estimate", n as f64).metric("phi_sup", phi);
    Ok(r)
}

fn flow_volume(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("flow-volume", true);
    let l = ctx.domain.period();
    let samples = ctx.spec.monte_carlo.samples;
    let mut worst = 0.0f64;
    let mut worst_sigma = 0.0f64;
    for _ in 0..4 {
        let eps = log_uniform(rng, l / 32.0, ctx.domain.max_radius());
        let s = ctx.uniform_time(rng, 0.0);
        let y = ctx.uniform_point(rng);
        let t = s + eps * eps * (2.0 * rng.gen::<f64>() - 1.0);
        let u = ctx.velocity(eps)?;
        let speed = u.speed_bound(&y, l);
        let est = image_measure(&u, speed, s, &y, t, samples, ctx.step_budget(), rng.gen())?;
        let vol = ctx.domain.ball_volume(eps);
        let dev = (est.value / vol - 1.0).abs();
        let sigma3 = 3.0 * est.std_error / vol;
        worst = worst.max(dev);
        worst_sigma = worst_sigma.max(sigma3);
        r.require(dev <= 0.02f64.max(sigma3), &format!("image of B_{eps:.4} off by {dev:.4}"));
    }
    r.metric("worst_relative_deviation", worst).metric("worst_3sigma", worst_sigma);
    Ok(r)
}

fn dual_measure(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("dual-measure", true);
    let l = ctx.domain.period();
    let samples = ctx.spec.monte_carlo.samples;
    let (mut worst, mut worst_sigma, mut mean) = (0.0f64, 0.0f64, 0.0);
    let n = ctx.spec.monte_carlo.dual_configs;
    for _ in 0..n {
        let eps = log_uniform(rng, l / 32.0, ctx.domain.max_radius());
        let s = ctx.uniform_time(rng, eps * eps);
        let y = ctx.uniform_point(rng);
        let u = ctx.velocity(eps)?;
        let speed = u.speed_bound(&y, l);
        let est = dual_cylinder_measure_with(&u, speed, s, &y, samples, ctx.step_budget(), rng.gen())?;
        let q = ctx.domain.cylinder_measure(eps);
        let ratio = est.value / q;
        worst = worst.max((ratio - 1.0).abs());
        worst_sigma = worst_sigma.max(3.0 * est.std_error / q);
        mean += ratio / n as f64;
    }
    r.metric("configs", n as f64)
        .metric("mean_ratio", mean)
        .metric("worst_relative_deviation", worst)
        .metric("worst_3sigma", worst_sigma);
    r.require(worst <= 0.02, "dual cylinder measure off by more than 2%");
    Ok(r)
}

fn existence(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("existence-sweep", true);
    let margin = ctx.domain.max_radius().powi(2);
    let pts: Vec<(f64, Point)> = (0..ctx.spec.monte_carlo.sweep_points)
        .map(|_| (ctx.uniform_time(rng, margin), ctx.uniform_point(rng)))
        .collect();
    let mut res = ctx.spec.grid.resolutions.clone();
    res.sort_unstable();
    res.dedup();
    let rows = existence_sweep_at(&ctx.field, &ctx.mollifier, ctx.spec.suite.eta, &res, &pts, &ctx.hl, &ctx.quad, ctx.step_budget())?;
    for row in &rows {
        r.metric(&format!("n{}_finest_eps", row.resolution), row.finest_eps)
            .metric(&format!("n{}_found", row.resolution), row.found)
            .metric(&format!("n{}_shrinking", row.resolution), row.shrinking);
    }
    let last = rows.last().expect("at least one resolution");
    r.require(last.found >= 0.99, "admissible radius found at fewer than 99% of points");
    r.require(last.shrinking == 1.0, "diameters not decreasing along the radius tail everywhere");
    r.require(rows.windows(2).all(|w| w[1].found >= w[0].found), "found fraction decreases under refinement");
    Ok(r)
}

/// Worst closeness ratios over sampled pairs of intersecting admissible
/// cylinders. Each ratio is normalized by its bound (1 means equality).
#[derive(Clone, Debug, Default, Serialize)]
pub struct ClosenessSummary {
    pub eta: f64,
    pub requested: usize,
    pub configs: usize,
    /// `|X_{eps_a}(t0, x0; t) - X^a(t)| / (2 eps_a)`.
    pub streamline_worst: f64,
    pub streamline_violations: usize,
    /// `|X_{eps_b}(t0, x0; t) - X_{eps_a}(t0, x0; t)| / eps_a`.
    pub pair_worst: f64,
    pub pair_violations: usize,
    /// `(|X^b(t) - X^a(t)| + eps_b) / (9 eps_a)`.
    pub closeness_worst: f64,
    pub closeness_violations: usize,
}

impl ClosenessSummary {
    pub fn violations(&self) -> usize {
        self.streamline_violations + self.pair_violations + self.closeness_violations
    }
}

/// Sample `n` pairs: an admissible `Q^a`, a point of it, and an admissible
/// `Q^b` through that point with `eps_b / eps_a` in `[1/4, 2)`.
pub fn closeness_sweep(ctx: &Context, rng: &mut ChaCha8Rng, eta: f64, n: usize) -> Result<ClosenessSummary> {
    let mut pairs: Vec<(SkewedCylinder, SkewedCylinder, (f64, Point))> = Vec::with_capacity(n);
    for _ in 0..n {
        let Some(a) = ctx.random_admissible(rng, eta, None)? else { continue };
        if let Some((b, seed)) = ctx.companion(rng, &a, eta, 0.25, 1.99)? {
            pairs.push((a, b, seed));
        }
    }
    let probes = ctx.probes();
    let rows: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|(a, b, seed)| -> Result<(f64, f64, f64)> {
            let s = streamline_closeness_check(&ctx.field, &ctx.mollifier, a, Some(b), std::slice::from_ref(seed), probes)?;
            let c = closeness_check(a, b, probes)?;
            Ok((s.worst_seed_ratio, s.worst_pair_ratio.unwrap_or(0.0), c.ratio / 9.0))
        })
        .collect::<Result<_>>()?;
    let worst = |k: usize| max_of(rows.iter().map(|v| [v.0, v.1, v.2][k]));
    let bad = |k: usize| rows.iter().filter(|v| [v.0, v.1, v.2][k] > 1.0).count();
    Ok(ClosenessSummary {
        eta,
        requested: n,
        configs: rows.len(),
        streamline_worst: worst(0),
        streamline_violations: bad(0),
        pair_worst: worst(1),
        pair_violations: bad(1),
        closeness_worst: worst(2),
        closeness_violations: bad(2),
    })
}

fn closeness(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let eta = ctx.spec.suite.eta;
    let mut r = CheckResult::new("closeness", eta <= 0.01);
    let s = closeness_sweep(ctx, rng, eta, ctx.spec.monte_carlo.closeness_configs)?;
    r.metric("configs", s.configs as f64)
        .metric("streamline_worst_ratio", s.streamline_worst)
        .metric("streamline_violations", s.streamline_violations as f64)
        .metric("pair_worst_ratio", s.pair_worst)
        .metric("pair_violations", s.pair_violations as f64)
        .metric("closeness_worst_ratio", s.closeness_worst)
        .metric("closeness_violations", s.closeness_violations as f64);
    r.require(s.configs == s.requested, "could not sample every configuration");
    r.require(s.streamline_violations == 0, "streamline left 2 eps_a of the centerline");
    r.require(s.pair_violations == 0, "streamlines of two radii drifted beyond eps_a");
    r.require(s.closeness_violations == 0, "B^b(t) not inside 9 B^a(t)");
    Ok(r)
}

/// Admissible cylinders centered near the middle of spacetime.
fn central_region(ctx: &Context) -> (f64, f64) {
    (0.1 * ctx.domain.duration(), 0.15 * ctx.domain.period())
}

fn satellites(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("satellite-union", true);
    let eta = ctx.spec.suite.eta;
    let mc = &ctx.spec.monte_carlo;
    let (mut worst, mut worst_middle, mut anchors, mut total) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..mc.satellite_anchors {
        let Some(a) = ctx.random_admissible(rng, eta, Some(central_region(ctx)))? else { continue };
        let mut sats = Vec::with_capacity(mc.satellites);
        for _ in 0..mc.satellites {
            if let Some((b, _)) = ctx.companion(rng, &a, eta, 0.1, 1.99)? {
                sats.push(b);
            }
        }
        let opts = CoverOptions { n_probe: ctx.probes(), n_mc: mc.samples, seed: rng.gen() };
        let rep = satellite_union_check(&a, &sats, &ctx.quad, &opts)?;
        anchors += 1;
        total += sats.len();
        worst = worst.max(rep.ratio);
        worst_middle = worst_middle.max(rep.worst_middle_ratio);
        r.require(rep.holds(), &format!("anchor {anchors}: union ratio {:.3} or middle slab escapes 9 Q", rep.ratio));
    }
    r.metric("anchors", anchors as f64)
        .metric("satellites", total as f64)
        .metric("worst_union_ratio", worst)
        .metric("worst_middle_ratio", worst_middle)
        .metric("bound", satellite_bound(ctx.dim()));
    r.require(anchors == mc.satellite_anchors, "could not sample every anchor");
    Ok(r)
}

/// Small enough that the family overlaps heavily (cylinder spans are at
/// most `(L/8)^2` long).
fn cover_region(ctx: &Context) -> (f64, f64) {
    (0.005 * ctx.domain.duration(), 0.05 * ctx.domain.period())
}

fn cover(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("greedy-cover", true);
    let eta = ctx.spec.suite.eta;
    let mc = &ctx.spec.monte_carlo;
    let mut family = Vec::with_capacity(mc.family_size);
    for _ in 0..mc.family_size {
        if let Some(c) = ctx.random_admissible(rng, eta, Some(cover_region(ctx)))? {
            family.push(c);
        }
    }
    let opts = CoverOptions { n_probe: ctx.probes(), n_mc: mc.samples, seed: rng.gen() };
    let rep = greedy_cover(&family, &opts)?;
    let sel = &rep.selection;
    let radius_rule = sel.removals.iter().all(|m| family[m.index].eps() < 2.0 * family[sel.selected[m.step]].eps());
    let bound = satellite_bound(ctx.dim());
    r.metric("family", family.len() as f64)
        .metric("selected", sel.selected.len() as f64)
        .metric("disjointness_violations", rep.disjointness_violations as f64)
        .metric("selected_measure", rep.selected_measure)
        .metric("union_estimate", rep.union_estimate)
        .metric("empirical_constant", rep.constant)
        .metric("bound", bound);
    r.require(family.len() == mc.family_size, "could not sample the whole family");
    r.require(rep.disjointness_violations == 0, "selected cylinders intersect");
    r.require(radius_rule, "a removed member is not below twice its selector's radius");
    r.require(rep.union_estimate <= bound * rep.selected_measure, "union exceeds the explicit covering bound");
    Ok(r)
}

/// Test functions around the middle of spacetime: box indicator (half-width
/// `0.05 L`, half-duration `0.05 (T - S)`), a bump, and an off-center
/// negative bump; the bumps are wide enough to be resolved by the default
/// radius grid.
fn test_functions(ctx: &Context) -> Vec<(&'static str, Box<dyn SpacetimeFn>, f64)> {
    let dom = ctx.domain;
    let (l, dur) = (dom.period(), dom.duration());
    let mid = 0.5 * (dom.start() + dom.end());
    let mut c = ORIGIN;
    let mut off = ORIGIN;
    for a in 0..dom.dim() {
        c[a] = 0.5 * l;
        off[a] = 0.35 * l;
    }
    vec![
        ("box", Box::new(BoxIndicator::new(dom, mid, 0.05 * dur, c, 0.05 * l)), 1.0),
        ("bump", Box::new(SmoothBump::new(dom, mid, 0.2 * dur, c, 0.2 * l, 1.0)), 1.0),
        ("bump_negative", Box::new(SmoothBump::new(dom, mid + 0.05 * dur, 0.15 * dur, off, 0.15 * l, -2.0)), 2.0),
    ]
}

/// Grid window on the lattice of `n / stride` nodes per axis (and
/// `dt = h (T - S) / L` for that spacing `h`) that contains every point
/// whose cylinders can reach the support box of `f`.
fn window(ctx: &Context, f: &dyn SpacetimeFn, n: usize, eps_max: f64) -> Result<SpacetimeGrid> {
    let dom = ctx.domain;
    let l = dom.period();
    let nodes = n / ctx.spec.grid.stride;
    let h = l / nodes as f64;
    let dt = h * dom.duration() / l;
    let sup = f.support().expect("test functions have a support box");
    let speed = ctx.field.speed_bound(&ORIGIN, l);
    let reach = eps_max + speed * eps_max * eps_max + h;
    let (mut lo, mut hi) = (ORIGIN, ORIGIN);
    for a in 0..dom.dim() {
        lo[a] = sup.lo[a] - reach;
        hi[a] = sup.hi[a] + reach;
    }
    let tr = eps_max * eps_max + dt;
    SpacetimeGrid::window(&dom, nodes, dt, sup.t_lo - tr, sup.t_hi + tr, &lo, &hi)
}

struct MaximalRun {
    grid: SpacetimeGrid,
    eps_grid: Vec<f64>,
    values: Vec<f64>,
    f_values: Vec<f64>,
    flagged: f64,
}

fn maximal_run(ctx: &Context, f: &dyn SpacetimeFn, n: usize) -> Result<MaximalRun> {
    let l = ctx.domain.period();
    let eps_grid = dyadic_eps_grid(&ctx.domain, l / n as f64);
    let grid = window(ctx, f, n, eps_grid[0])?;
    let mut opts = MaximalOptions::new(ctx.dim(), ctx.spec.suite.eta, eps_grid.clone());
    opts.quad = ctx.quad.clone();
    opts.step_budget = ctx.step_budget();
    let mf = skewed_maximal_with(&ctx.field, &ctx.mollifier, f, &grid, &opts, &ctx.hl)?;
    let f_values = grid.sample(f);
    Ok(MaximalRun { flagged: mf.flagged_fraction(), values: mf.values().to_vec(), f_values, grid, eps_grid })
}

fn maximal_linf(ctx: &Context) -> Result<CheckResult> {
    let mut r = CheckResult::new("maximal-linf", true);
    for (name, f, sup) in test_functions(ctx) {
        let run = maximal_run(ctx, f.as_ref(), ctx.spec.grid.spatial)?;
        let m = max_of(run.values.iter().copied());
        r.metric(&format!("{name}_sup_ratio"), m / sup).metric(&format!("{name}_flagged_fraction"), run.flagged);
        r.require(m <= sup, &format!("{name}: sup of M_Q f exceeds sup |f|"));
        r.require(run.flagged < 1.0, &format!("{name}: no admissible radius anywhere (raise grid.spatial)"));
    }
    Ok(r)
}

fn maximal_constants(ctx: &Context) -> Result<CheckResult> {
    let mut r = CheckResult::new("maximal-constants", false);
    let n = ctx.spec.grid.spatial;
    let lambdas = log_grid(0.01, 0.9, 10);
    let zero = ctx.field.name() == "zero";
    for (name, f, _) in test_functions(ctx) {
        let mut c2 = Vec::new();
        for (k, res) in [n, 2 * n].into_iter().enumerate() {
            let run = maximal_run(ctx, f.as_ref(), res)?;
            let strong = strong_type_ratio(&run.values, &run.f_values, &run.grid, 2.0)?;
            r.metric(&format!("{name}_n{res}_c2"), strong).metric(&format!("{name}_n{res}_flagged"), run.flagged);
            c2.push(strong);
            if name == "box" {
                let w = weak_type(&run.values, &run.grid, run.grid.l1_norm(&run.f_values), &lambdas)?;
                r.metric(&format!("box_n{res}_c1"), w.constant);
                if k == 1 {
                    let c1_prev = r.get(&format!("box_n{n}_c1")).expect("recorded above");
                    let change = (w.constant - c1_prev).abs() / c1_prev;
                    r.metric("box_c1_relative_change", change);
                    r.require(change <= 0.2, "C1 moved by more than 20% under refinement");
                }
            }
            if zero && k == 0 {
                let up = upright_maximal(f.as_ref(), &ctx.domain, &run.grid, &run.eps_grid, &ctx.quad)?;
                let up_c2 = strong_type_ratio(&up, &run.f_values, &run.grid, 2.0)?;
                let dev = (strong - up_c2).abs() / up_c2;
                r.metric(&format!("{name}_upright_c2_deviation"), dev);
                r.require(dev <= 0.01, &format!("{name}: C2 differs from the upright value by more than 1%"));
            }
        }
        let change = (c2[1] - c2[0]).abs() / c2[0];
        r.metric(&format!("{name}_c2_relative_change"), change);
        r.require(change <= 0.2, &format!("{name}: C2 moved by more than 20% under refinement"));
    }
    Ok(r)
}

/// Smooth, nonnegative test function: a time bump times
/// `1 + prod cos(2 pi x_a / L)`.
fn smooth_test(ctx: &Context) -> impl SpacetimeFn + '_ {
    let dom = ctx.domain;
    let mid = 0.5 * (dom.start() + dom.end());
    let half = 0.4 * dom.duration();
    move |t: f64, x: &Point| {
        let a = (t - mid) / half;
        if a.abs() >= 1.0 {
            return 0.0;
        }
        let w = (-1.0 / (1.0 - a * a)).exp();
        let c: f64 = (0..dom.dim()).map(|k| (2.0 * std::f64::consts::PI * x[k] / dom.period()).cos()).product();
        w * (1.0 + c)
    }
}

fn convergence_grid(ctx: &Context) -> Result<SpacetimeGrid> {
    let cap = if ctx.dim() == 3 { 12 } else { 32 };
    SpacetimeGrid::full(&ctx.domain, ctx.spec.grid.spatial.min(cap), ctx.spec.grid.times.max(64))
}

/// `eps_k = 0.8 (L/8) 2^-k`, `k = 0..4`.
fn convergence_radii(ctx: &Context) -> Vec<f64> {
    (0..5).map(|k| 0.8 * ctx.domain.max_radius() * 0.5f64.powi(k)).collect()
}

fn l1_boundedness(ctx: &Context) -> Result<CheckResult> {
    let mut r = CheckResult::new("l1-boundedness", true);
    let grid = convergence_grid(ctx)?;
    let f = smooth_test(ctx);
    let f_l1 = grid.l1_norm(&grid.sample(&f));
    let mut worst = 0.0f64;
    for eps in convergence_radii(ctx) {
        let fe = f_epsilon(&ctx.field, &ctx.mollifier, &f, eps, &grid, &ctx.quad)?;
        worst = worst.max(grid.l1_norm(&fe) / f_l1);
    }
    r.metric("worst_l1_ratio", worst);
    r.require(worst <= 1.0 + 1e-6, "||f_eps||_1 exceeds ||f||_1 (1 + 1e-6)");
    Ok(r)
}

fn convergence(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("convergence", false);
    let grid = convergence_grid(ctx)?;
    let f = smooth_test(ctx);
    let fv = grid.sample(&f);
    let f_l1 = grid.l1_norm(&fv);
    let radii = convergence_radii(ctx);
    let mut errs = Vec::new();
    for (k, &eps) in radii.iter().enumerate() {
        let fe = f_epsilon(&ctx.field, &ctx.mollifier, &f, eps, &grid, &ctx.quad)?;
        let diff: Vec<f64> = fe.iter().zip(&fv).map(|(a, b)| a - b).collect();
        let e = grid.l1_norm(&diff) / f_l1;
        r.metric(&format!("l1_error_k{k}"), e);
        errs.push(e);
    }
    r.require(errs.windows(2).all(|w| w[1] <= 1.05 * w[0]), "L1 error not decreasing within 5%");
    r.require(*errs.last().expect("five radii") < 1e-2, "final L1 error above 1e-2");

    // Q-Lebesgue points of the smooth function
    let pts = random_points(ctx, rng, 32);
    let mut lebesgue = Vec::new();
    for (k, &eps) in radii.iter().enumerate() {
        let u = ctx.velocity(eps)?;
        let vals: Vec<f64> = pts
            .par_iter()
            .map(|(t, x)| -> Result<f64> {
                let c = SkewedCylinder::build(&u, *t, x, ctx.step_budget())?;
                let f0 = f.eval(*t, x);
                ctx.quad.average(&c, &|s: f64, y: &Point| (f.eval(s, y) - f0).abs())
            })
            .collect::<Result<_>>()?;
        let worst = max_of(vals.into_iter());
        r.metric(&format!("lebesgue_worst_k{k}"), worst);
        lebesgue.push(worst);
    }
    r.require(lebesgue.windows(2).all(|w| w[1] <= 1.05 * w[0]), "Q-Lebesgue averages not decreasing");

    // pointwise convergence for a box: the set where f_eps is far from f shrinks
    let dom = ctx.domain;
    let mid = 0.5 * (dom.start() + dom.end());
    let mut c = ORIGIN;
    for v in c.iter_mut().take(dom.dim()) {
        *v = 0.5 * dom.period();
    }
    let b = BoxIndicator::new(dom, mid, 0.2 * dom.duration(), c, 0.2 * dom.period());
    let bv = grid.sample(&b);
    let mut far = Vec::new();
    for (k, &eps) in radii.iter().enumerate() {
        let fe = f_epsilon(&ctx.field, &ctx.mollifier, &b, eps, &grid, &ctx.quad)?;
        let frac = fe.iter().zip(&bv).filter(|(a, b)| (*a - *b).abs() > 0.25).count() as f64 / grid.len() as f64;
        r.metric(&format!("box_far_fraction_k{k}"), frac);
        far.push(frac);
    }
    r.require(far.windows(2).all(|w| w[1] <= w[0]), "box: far set not shrinking");
    Ok(r)
}

fn escalation(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut r = CheckResult::new("eta-escalation", false);
    let n = (ctx.spec.monte_carlo.closeness_configs / 4).max(10);
    // 0 stands for "no violation at any level"
    let (mut first, mut first_any) = (0.0, 0.0);
    let mut levels = ctx.spec.suite.escalation.clone();
    levels.sort_by(f64::total_cmp);
    for eta in levels {
        let s = closeness_sweep(ctx, rng, eta, n)?;
        r.metric(&format!("eta{eta}_configs"), s.configs as f64)
            .metric(&format!("eta{eta}_streamline_worst"), s.streamline_worst)
            .metric(&format!("eta{eta}_pair_worst"), s.pair_worst)
            .metric(&format!("eta{eta}_closeness_worst"), s.closeness_worst);
        if first == 0.0 && s.streamline_violations > 0 {
            first = eta;
        }
        if first_any == 0.0 && s.violations() > 0 {
            first_any = eta;
        }
    }
    r.metric("first_eta_violating_2eps", first).metric("first_eta_violating_any", first_any);
    r.note = if first_any == 0.0 {
        "no violation at any level".into()
    } else {
        format!("conclusions first fail at eta = {first_any}")
    };
    Ok(r)
}
