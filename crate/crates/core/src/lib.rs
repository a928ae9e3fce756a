//! Generative compressed sensing with subsampled unitary measurements.

pub mod coherence;
pub mod error;
pub mod gnn;
pub mod linops;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod training;
pub mod transforms;

pub use error::{GcsError, Result};
pub use linops::{AnyMatrix, ComplexMatrix, DenseMatrix, RealMatrix};
pub use transforms::UnitaryOperator;
