//! Critical random-cluster model with cluster weight 4: sampling, loop
//! representation, height function, observables and Gaussian free field
//! predictions.

pub mod analysis;
pub mod campaign;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod gffpredict;
pub mod heightfield;
pub mod lattice;
pub mod loops;
pub mod observables;
pub mod quadrature;
pub mod sampler;
pub mod testfn;
pub mod unionfind;
pub mod verify;

pub use error::{Error, Result};
pub use estimator::{Accumulator, EstimatorResult};
pub use lattice::{BoundarySpec, Domain, EdgeGraph, EdgeId, MedialGraph, Scale, SmallGraph};
pub use sampler::{FkConfig, ModelParams, PottsConfig};
pub use testfn::TestFunction;
