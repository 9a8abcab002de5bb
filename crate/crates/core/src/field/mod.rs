//! Divergence-free velocity fields on the periodic box: an analytic catalog
//! and gridded samples.
//!
//! Fields vanish outside the time span `[S, T]`, so flows started near the
//! horizon simply stop moving once they leave it.

mod catalog;
mod gridded;
pub mod io;
mod projection;

pub use catalog::{AnalyticField, MollifierAction, CATALOG};
pub use gridded::GriddedField;
pub use projection::{project_divergence_free, project_samples};

pub(crate) use gridded::sample_time;

use crate::domain::{frobenius, trace, Domain, Jacobian, Point, ORIGIN, ZERO_JACOBIAN};
use crate::error::Result;

#[derive(Clone, Debug)]
pub enum Source {
    Analytic(AnalyticField),
    Gridded(GriddedField),
}

/// A velocity field `u(t, x)` together with its spatial gradient.
/// Immutable after construction; all queries are pure.
#[derive(Clone, Debug)]
pub struct VelocityField {
    domain: Domain,
    source: Source,
}

/// Build a catalog field (`zero`, `constant`, `linear-shear`, `taylor-green`,
/// `abc`) on `domain`.
pub fn make_analytic_field(name: &str, params: &[f64], domain: Domain) -> Result<VelocityField> {
    let field = AnalyticField::from_catalog(name, params, domain.dim())?;
    Ok(VelocityField { domain, source: Source::Analytic(field) })
}

impl VelocityField {
    pub fn analytic(field: AnalyticField, domain: Domain) -> Self {
        Self { domain, source: Source::Analytic(field) }
    }

    pub fn from_gridded(samples: GriddedField) -> Self {
        Self { domain: *samples.domain(), source: Source::Gridded(samples) }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn name(&self) -> &'static str {
        match &self.source {
            Source::Analytic(a) => a.name(),
            Source::Gridded(_) => "gridded",
        }
    }

    pub fn is_periodic(&self) -> bool {
        match &self.source {
            Source::Analytic(a) => a.is_periodic(),
            Source::Gridded(_) => true,
        }
    }

    /// Time-independent inside `[S, T]`.
    pub fn is_steady(&self) -> bool {
        match &self.source {
            Source::Analytic(_) => true,
            Source::Gridded(g) => g.is_steady(),
        }
    }

    pub fn mollifier_action(&self) -> MollifierAction {
        match &self.source {
            Source::Analytic(a) => a.mollifier_action(&self.domain),
            Source::Gridded(_) => MollifierAction::General,
        }
    }

    /// `u(t, x)`; zero for `t` outside `[S, T]`.
    #[inline]
    pub fn evaluate(&self, t: f64, x: &Point) -> Point {
        if !self.domain.contains_time(t) {
            return ORIGIN;
        }
        match &self.source {
            Source::Analytic(a) => a.velocity(&self.domain, x),
            Source::Gridded(g) => g.velocity(t, x),
        }
    }

    /// `grad u(t, x)` with `jac[i][j] = d u_i / d x_j`; zero outside `[S, T]`.
    #[inline]
    pub fn gradient(&self, t: f64, x: &Point) -> Jacobian {
        if !self.domain.contains_time(t) {
            return ZERO_JACOBIAN;
        }
        match &self.source {
            Source::Analytic(a) => a.gradient(&self.domain, x),
            Source::Gridded(g) => g.gradient(t, x),
        }
    }

    /// Frobenius norm of the gradient.
    #[inline]
    pub fn gradient_norm(&self, t: f64, x: &Point) -> f64 {
        frobenius(&self.gradient(t, x), self.dim())
    }

    pub fn divergence(&self, t: f64, x: &Point) -> f64 {
        trace(&self.gradient(t, x), self.dim())
    }

    /// Upper bound on `|u|` over the ball of radius `radius` around `center`
    /// at any time.
    pub fn speed_bound(&self, center: &Point, radius: f64) -> f64 {
        match &self.source {
            Source::Analytic(a) => a.speed_bound(center, radius),
            Source::Gridded(g) => g.max_speed(),
        }
    }

    /// Upper bound on `|grad u|` over the whole domain.
    pub fn gradient_bound(&self) -> f64 {
        match &self.source {
            Source::Analytic(a) => a.gradient_bound(&self.domain),
            Source::Gridded(g) => g.max_gradient(),
        }
    }
}
