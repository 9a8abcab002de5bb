//! Named, seeded experiments over the other modules, collected into a
//! [`VerifyReport`].

mod checks;
mod config;
mod report;
mod sweep;

pub use checks::{closeness_sweep, ClosenessSummary, CHECK_NAMES};
pub use config::{CoverCmd, ExperimentSpec, FieldSpec, FlowCmd, GridSpec, MaximalCmd, MollifyCmd, MonteCarloSpec, QuadratureSpec, SuiteSpec};
pub use report::{CheckResult, VerifyReport};
pub use sweep::{existence_sweep, existence_sweep_at, SweepRow};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cylinder::{intersection_witness, is_admissible, CylinderQuadrature, SkewedCylinder};
use crate::domain::{Domain, Point, ORIGIN};
use crate::error::{Error, Result};
use crate::field::{Source, VelocityField};
use crate::flow::{flow_to, MollifiedVelocity};
use crate::maximal::GradientMaximal;
use crate::mollify::Mollifier;

/// Lattice size for `M(|grad u|)` of a catalog field: the configured size,
/// capped at 32 per axis in three dimensions.
pub fn hl_nodes(spec: &ExperimentSpec) -> usize {
    if spec.field.dim == 3 {
        spec.grid.hl_nodes.min(32)
    } else {
        spec.grid.hl_nodes
    }
}

/// Everything the checks share: the field, its mollifier, `M(|grad u|)` and
/// the cylinder quadrature.
pub struct Context {
    pub spec: ExperimentSpec,
    pub domain: Domain,
    pub field: VelocityField,
    pub mollifier: Mollifier,
    pub hl: GradientMaximal,
    pub quad: CylinderQuadrature,
}

impl Context {
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let field = spec.build_field()?;
        let domain = *field.domain();
        let mollifier = spec.build_mollifier()?;
        let hl = GradientMaximal::for_field(&field, hl_nodes(spec), 1.0)?;
        let q = &spec.quadrature;
        let quad = CylinderQuadrature::new(q.n_time, q.n_ball, domain.dim())?;
        Ok(Self { spec: spec.clone(), domain, field, mollifier, hl, quad })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn step_budget(&self) -> usize {
        self.spec.quadrature.step_budget
    }

    pub fn probes(&self) -> usize {
        self.spec.quadrature.probes
    }

    /// Independent random stream `stream` of the configured seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.spec.suite.seed);
        r.set_stream(stream);
        r
    }

    pub fn velocity(&self, eps: f64) -> Result<MollifiedVelocity<'_>> {
        MollifiedVelocity::new(&self.field, &self.mollifier, eps)
    }

    pub fn cylinder(&self, eps: f64, t: f64, x: &Point) -> Result<SkewedCylinder> {
        SkewedCylinder::build(&self.velocity(eps)?, t, x, self.step_budget())
    }

    pub fn admissible(&self, c: &SkewedCylinder, eta: f64) -> Result<bool> {
        Ok(is_admissible(c, eta, &self.hl, &self.quad)?.admissible)
    }

    pub fn is_gridded(&self) -> bool {
        matches!(self.field.source(), Source::Gridded(_))
    }

    pub fn uniform_point<R: Rng>(&self, rng: &mut R) -> Point {
        let mut p = ORIGIN;
        for v in p.iter_mut().take(self.dim()) {
            *v = rng.gen::<f64>() * self.domain.period();
        }
        p
    }

    pub fn uniform_time<R: Rng>(&self, rng: &mut R, margin: f64) -> f64 {
        let (s, t) = (self.domain.start() + margin, self.domain.end() - margin);
        s + (t - s) * rng.gen::<f64>()
    }

    /// Admissible cylinder with log-uniform radius in `[L/128, L/8]`,
    /// centered within `region = (half time, half width)` of the middle of
    /// spacetime (anywhere when `None`). `None` after 400 failed draws.
    pub fn random_admissible<R: Rng>(&self, rng: &mut R, eta: f64, region: Option<(f64, f64)>) -> Result<Option<SkewedCylinder>> {
        let l = self.domain.period();
        let mid_t = 0.5 * (self.domain.start() + self.domain.end());
        for _ in 0..400 {
            let eps = log_uniform(rng, l / 128.0, self.domain.max_radius());
            let e2 = eps * eps;
            let (t, x) = match region {
                None => (self.uniform_time(rng, e2), self.uniform_point(rng)),
                Some((ht, hx)) => {
                    let t = mid_t + ht * (2.0 * rng.gen::<f64>() - 1.0);
                    let mut x = ORIGIN;
                    for v in x.iter_mut().take(self.dim()) {
                        *v = 0.5 * l + hx * (2.0 * rng.gen::<f64>() - 1.0);
                    }
                    (t, x)
                }
            };
            if t - e2 < self.domain.start() || t + e2 > self.domain.end() {
                continue;
            }
            let c = self.cylinder(eps, t, &x)?;
            if self.admissible(&c, eta)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    /// Admissible cylinder that shares a point `(t0, x0)` with `a` (and meets
    /// it on the probes), with radius `eps_a * U(lo, hi)`. The companion is
    /// centered on the flow of `x0 + eps_b w` for a random `|w| < 0.95`, so
    /// `(t0, x0)` lies inside it. `None` after 400 failed draws.
    pub fn companion<R: Rng>(
        &self,
        rng: &mut R,
        a: &SkewedCylinder,
        eta: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Option<(SkewedCylinder, (f64, Point))>> {
        let ea = a.eps();
        let d = self.dim();
        for _ in 0..400 {
            let eb = (ea * (lo + (hi - lo) * rng.gen::<f64>())).min(self.domain.max_radius());
            let t0 = a.center_time() + ea * ea * 0.95 * (2.0 * rng.gen::<f64>() - 1.0);
            let v = unit_ball(rng, d);
            let axis = a.axis(t0);
            let mut x0 = ORIGIN;
            for k in 0..d {
                x0[k] = axis[k] + 0.95 * ea * v[k];
            }
            if !a.contains(t0, &x0) {
                continue;
            }
            let tb = t0 + eb * eb * 0.95 * (2.0 * rng.gen::<f64>() - 1.0);
            let w = unit_ball(rng, d);
            let mut start = x0;
            for k in 0..d {
                start[k] += 0.95 * eb * w[k];
            }
            let u = self.velocity(eb)?;
            if !self.domain.contains_time(tb) {
                continue;
            }
            let xb = flow_to(&u, t0, &start, tb, self.step_budget())?;
            let b = SkewedCylinder::build(&u, tb, &xb, self.step_budget())?;
            if !b.contains(t0, &x0) || !b.within_horizon() || intersection_witness(a, &b, self.probes()).is_none() {
                continue;
            }
            if self.admissible(&b, eta)? {
                return Ok(Some((b, (t0, x0))));
            }
        }
        Ok(None)
    }
}

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.gen::<f64>()).exp()
}

/// Uniform point of the open unit ball in dimension `d`.
pub fn unit_ball<R: Rng>(rng: &mut R, d: usize) -> Point {
    loop {
        let mut p = ORIGIN;
        for v in p.iter_mut().take(d) {
            *v = 2.0 * rng.gen::<f64>() - 1.0;
        }
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            return p;
        }
    }
}

/// Run the selected checks in their fixed order. A precondition violation
/// inside a check aborts the suite with the check's name attached.
pub fn run_suite(spec: &ExperimentSpec) -> Result<VerifyReport> {
    let ctx = Context::new(spec)?;
    let selected = |name: &str| spec.suite.checks.is_empty() || spec.suite.checks.iter().any(|c| c == name);
    for name in &spec.suite.checks {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::InvalidParameter(format!("unknown check `{name}`")));
        }
    }
    let mut report = VerifyReport {
        field: spec.field.file.clone().unwrap_or_else(|| spec.field.name.clone()),
        dim: ctx.dim(),
        eta: spec.suite.eta,
        seed: spec.suite.seed,
        checks: Vec::new(),
        runtimes: Vec::new(),
    };
    for (k, name) in CHECK_NAMES.iter().enumerate() {
        if !selected(name) {
            continue;
        }
        let clock = Instant::now();
        let result = checks::run_check(&ctx, name, k as u64 + 1)
            .map_err(|e| Error::Check { check: name.to_string(), source: Box::new(e) })?;
        report.runtimes.push((name.to_string(), clock.elapsed().as_secs_f64()));
        report.checks.push(result);
    }
    Ok(report)
}
