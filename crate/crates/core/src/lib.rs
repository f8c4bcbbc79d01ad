//! Resolvable expressive capacity and eigentasks for finitely-sampled
//! physical feature generators.
//!
//! The crate simulates three kinds of stochastic feature generators (qubit
//! circuits, spin Hamiltonians, a classical optical pipeline), estimates
//! their Gram/covariance moments under shot noise, solves the noise-to-signal
//! eigenproblem for eigentasks, and demonstrates noise-aware truncated
//! learning on a reference classification task.

pub mod acceptance;
pub mod analytic;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod learning;
pub mod map;
pub mod optical;
pub mod quantum;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use ensemble::{EnsembleKind, InputEnsemble};
pub use error::{Error, Result};
pub use map::{Generator, NoiseModel, ProbabilityTable, Provenance};
pub use sampling::{FeatureMatrix, ShotData, ShotRecord, Shots};
pub use spectral::{EigentaskTable, MomentEstimates, NsrSpectrum, RecCurve};
