//! Maximum likelihood estimation in Gaussian DAG models, sample stabilisation
//! through complete collineations, and limits of the stabilised estimate.

pub mod error;
pub mod graph;
pub mod limits;
pub mod linalg;
pub mod mle;
pub mod stabilise;
pub mod varieties;

pub use error::{Error, Result};
pub use graph::{Dag, Regime};
pub use linalg::{Matrix, Vector, DEFAULT_TOL};
pub use mle::{Classification, ClassificationReport, LambdaEstimate, MleEstimate, SampleMatrix};
