//! Symmetric quadrature rules on simplices and the diagonal-norm
//! summation-by-parts operators built from them.

pub mod advection;
pub mod archive;
pub mod cubature;
pub mod error;
pub mod gauss;
pub mod geometry;
pub mod pkd;
pub mod rule;
pub mod sbp;
pub mod scalar;
pub mod search;
pub mod shipped;

pub use advection::{max_stable_dt, run_convergence, MeshedProblem, SatKind, Wave};
pub use error::{Error, Result};
pub use geometry::{assemble_nodes, expand_orbit, facet_restriction, min_node_spacing, reference_simplex, Domain, FacetKind, GeometryError, GroupSignature, NodeSet, OrbitKind, ReferenceSimplex, SymmetryOrbit};
pub use rule::{check_rule, Provenance, QuadratureRule, RuleReport};
pub use sbp::{build_sbp, verify_sbp, SbpOperator, SbpReport};
pub use scalar::Real;
pub use search::{find_rule, FindOptions, FoundRule};

pub type QuadratureRule64 = QuadratureRule<f64>;
pub type QuadratureRule32 = QuadratureRule<f32>;
pub type SbpOperator64 = SbpOperator<f64>;
pub type SbpOperator32 = SbpOperator<f32>;
pub type MeshedProblem64 = MeshedProblem<f64>;
pub type MeshedProblem32 = MeshedProblem<f32>;
