//! Exact-arithmetic laboratory for the Penttila-Williford 4-class
//! association scheme: builds the classical quadrangle model, the scheme on
//! its outer points, verifies every parameter, eigenmatrix, Krein, triple
//! intersection, clique and partition claim, and reconstructs the
//! quadrangle from the scheme data.

pub mod bits;
pub mod cliques;
pub mod error;
pub mod field;
pub mod geometry;
pub mod incidence;
pub mod linalg;
pub mod parallel;
pub mod pipeline;
pub mod reconstruct;
pub mod report;
pub mod scheme;
pub mod spectral;
pub mod triples;

pub use error::{PwError, PwResult};
pub use pipeline::{run_pipeline, RunConfig};
pub use scheme::AssociationScheme;
