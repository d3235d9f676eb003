pub mod error;
pub mod manifold;

pub use error::{ElasticaError, Result};
pub use manifold::{ChartPoint, Christoffel, ManifoldModel, ModelKind, TangentVector};
pub mod curve;
pub mod functionals;
mod banded;
pub mod verifier;
pub mod optimizer;
pub mod continuation;
pub mod io;
