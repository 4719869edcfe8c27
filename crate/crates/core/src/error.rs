use thiserror::Error;

use crate::geometry::GeometryError;
use crate::pkd::BasisError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible design vector: {0}")]
    Infeasible(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("facet rule degree {got} is below the required {required}")]
    FacetDegree { got: usize, required: usize },
    #[error("facet node {0} is not collocated with any volume node")]
    FacetNotCollocated(usize),
    #[error("accuracy conditions are inconsistent (residual {0:.3e})")]
    InconsistentAccuracy(f64),
    #[error("search failed: best residual {residual:.3e} after {attempts} attempts")]
    SearchFailed { residual: f64, attempts: usize },
    #[error("periodic facet pairing failed for element {element}, facet {facet}")]
    FacetPairing { element: usize, facet: usize },
    #[error("no unstable time step found below {0}")]
    NoUnstableStep(f64),
    #[error("archive: {0}")]
    Archive(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
