//! Distribution-shift diagnostics for generated dialogue.
//!
//! Discrete energy distance, k-means coarsening, test functions and test
//! divergence, plus exact evaluation of an energy-based adaptation bound and
//! brute-force oracles for the identities it rests on.

#![forbid(unsafe_code)]

pub mod bound;
pub mod coarsening;
pub mod dist;
pub mod energy;
pub mod error;
pub mod io;
pub mod oracle;
pub mod testdiv;
pub mod testfns;

pub use bound::{evaluate_bound, BoundReport, GFunction};
pub use coarsening::{fit_kmeans, CoarseningFunction, EmbeddingTable};
pub use dist::{enumerate_joint, pmf_from_samples, sample, JointModel, OutcomeSpace, Pmf, SampleSet};
pub use energy::{energy_coarsened, energy_estimate, energy_exact, Coarsening, Distribution, EnergyValue};
pub use error::{Error, Result};
pub use testdiv::{td_change, test_divergence, PairedItem, TDReport};
pub use testfns::{Dialogue, TestFunction, Turn};
