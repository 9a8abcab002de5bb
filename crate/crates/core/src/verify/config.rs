//! Experiment configuration: a flat `key = value` file with `[section]`
//! headers (a TOML subset). Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::io::load_gridded;
use crate::field::{make_analytic_field, project_divergence_free, VelocityField};
use crate::mollify::Mollifier;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    /// Catalog name; ignored when `file` is set.
    pub name: String,
    pub params: Vec<f64>,
    pub dim: usize,
    pub period: f64,
    pub start: f64,
    pub end: f64,
    /// Gridded samples to load instead of a catalog field.
    pub file: Option<String>,
    /// Project gridded samples onto divergence-free fields after loading.
    pub project: bool,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            name: "taylor-green".into(),
            params: Vec::new(),
            dim: 2,
            period: 1.0,
            start: 0.0,
            end: 1.0,
            file: None,
            project: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Spatial resolution: nodes per axis of spacetime sample grids; the
    /// radius grids of maximal functions reach down to `2 L / spatial`.
    pub spatial: usize,
    /// Maximal-function grids sample every `stride`-th node of the
    /// `spatial` lattice (radii are unaffected); 4 keeps three-dimensional
    /// runs at 128 nodes affordable.
    pub stride: usize,
    /// Time samples of spacetime grids.
    pub times: usize,
    /// Lattice nodes per axis for `M(|grad u|)` of catalog fields.
    pub hl_nodes: usize,
    /// Resolutions of the existence sweep; the radius grid of resolution
    /// `n` reaches down to `2 L / n`.
    pub resolutions: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { spatial: 64, stride: 1, times: 8, hl_nodes: 64, resolutions: vec![16, 32, 64, 128] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Total mollifier nodes; the standard rule when absent.
    pub mollifier_nodes: Option<usize>,
    pub n_time: usize,
    pub n_ball: usize,
    pub step_budget: usize,
    pub probes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { mollifier_nodes: None, n_time: 8, n_ball: 32, step_budget: 64, probes: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub samples: usize,
    pub dual_configs: usize,
    pub estimate_configs: usize,
    pub closeness_configs: usize,
    pub family_size: usize,
    pub satellite_anchors: usize,
    pub satellites: usize,
    pub sweep_points: usize,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            samples: 65_536,
            dual_configs: 10,
            estimate_configs: 500,
            closeness_configs: 200,
            family_size: 200,
            satellite_anchors: 4,
            satellites: 16,
            sweep_points: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub seed: u64,
    pub eta: f64,
    /// Names of the checks to run (all when empty).
    pub checks: Vec<String>,
    /// Rerun the closeness checks at each of these `eta` values.
    pub escalation: Vec<f64>,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self { seed: 0, eta: 0.01, checks: Vec::new(), escalation: vec![0.001, 0.01, 0.1, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollifyCmd {
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
}

impl Default for MollifyCmd {
    fn default() -> Self {
        Self { eps: vec![0.05, 0.1], times: vec![0.5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowCmd {
    pub eps: f64,
    /// Seeds per axis on a uniform lattice.
    pub seeds: usize,
    pub t: f64,
    pub s: f64,
}

impl Default for FlowCmd {
    fn default() -> Self {
        Self { eps: 0.05, seeds: 4, t: 0.25, s: 0.75 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalCmd {
    /// `box`, `bump` or `constant`.
    pub function: String,
    /// Half-width (box) or radius (bump) in space and time.
    pub radius: f64,
    pub amplitude: f64,
}

impl Default for MaximalCmd {
    fn default() -> Self {
        Self { function: "box".into(), radius: 0.1, amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct CoverCmd {
    /// Family file (`t,x_1..x_d,epsilon`); a random admissible family when
    /// absent.
    pub family: Option<String>,
}


/// Everything an experiment needs; a fixed seed fixes every output byte.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub field: FieldSpec,
    pub grid: GridSpec,
    pub quadrature: QuadratureSpec,
    pub monte_carlo: MonteCarloSpec,
    pub suite: SuiteSpec,
    pub mollify: MollifyCmd,
    pub flow: FlowCmd,
    pub maximal: MaximalCmd,
    pub cover: CoverCmd,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The configuration as text that [`ExperimentSpec::parse`] reads back.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("plain data always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        Domain::new(self.field.dim, self.field.period, self.field.start, self.field.end)?;
        let g = &self.grid;
        if g.spatial < 4 || g.times == 0 || g.hl_nodes < 8 || g.resolutions.iter().any(|&n| n < 8) {
            return bad("grid sizes too small (spatial >= 4, times >= 1, hl_nodes >= 8, resolutions >= 8)".into());
        }
        if g.stride == 0 || !g.spatial.is_multiple_of(g.stride) || g.spatial / g.stride < 4 {
            return bad(format!("grid.stride = {} must divide spatial = {} leaving >= 4 nodes", g.stride, g.spatial));
        }
        let q = &self.quadrature;
        if q.n_time < 8 || q.n_ball < 32 || q.step_budget == 0 || q.probes == 0 {
            return bad("quadrature: n_time >= 8, n_ball >= 32, step_budget >= 1, probes >= 1".into());
        }
        if self.monte_carlo.samples < 65_536 {
            return bad(format!("monte_carlo.samples = {} below 65536", self.monte_carlo.samples));
        }
        if !(self.suite.eta > 0.0) || self.suite.escalation.iter().any(|e| !(*e > 0.0)) {
            return bad("eta values must be positive".into());
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.field.dim, self.field.period, self.field.start, self.field.end)
    }

    pub fn build_field(&self) -> Result<VelocityField> {
        match &self.field.file {
            Some(path) => {
                let g = load_gridded(Path::new(path))?;
                if self.field.project {
                    project_divergence_free(&g)
                } else {
                    Ok(VelocityField::from_gridded(g))
                }
            }
            None => make_analytic_field(&self.field.name, &self.field.params, self.domain()?),
        }
    }

    pub fn build_mollifier(&self) -> Result<Mollifier> {
        match self.quadrature.mollifier_nodes {
            Some(n) => Mollifier::new(n, self.field.dim),
            None => Mollifier::standard(self.field.dim),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let spec = ExperimentSpec::default();
        assert_eq!(ExperimentSpec::parse(&spec.to_text()).unwrap(), spec);
        assert_eq!(ExperimentSpec::parse("").unwrap(), spec);
    }

    #[test]
    fn sections_and_errors() {
        let s = ExperimentSpec::parse("[field]\nname = \"abc\"\ndim = 3\n\n[suite]\nseed = 7\n").unwrap();
        assert_eq!((s.field.dim, s.suite.seed), (3, 7));
        assert!(s.build_field().is_ok());
        assert!(matches!(ExperimentSpec::parse("[field]\nbogus = 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(ExperimentSpec::parse("[monte_carlo]\nsamples = 10\n"), Err(Error::InvalidParameter(_))));
        let e = ExperimentSpec::parse("[grid]\nspatial = 32\ntimes = \"x\"\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
    }
}
