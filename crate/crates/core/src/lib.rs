pub mod covering;
pub mod cylinder;
pub mod domain;
pub mod error;
pub mod field;
pub mod flow;
pub mod lattice;
pub mod maximal;
pub mod mollify;
pub mod quadrature;
pub mod spacetime;
pub mod verify;

pub use domain::{Domain, Jacobian, Point};
pub use error::{Error, Result};
pub use field::{make_analytic_field, project_divergence_free, GriddedField, VelocityField};
