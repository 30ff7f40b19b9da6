//! Finite-domain differential-privacy laboratory.
//!
//! Mechanisms over small domains are represented explicitly so that privacy
//! definitions (approximate DP, Rényi DP, TV-stability) can be verified
//! exactly. On top of that sit the composition calculus, seven privacy
//! measures with an axiom-audit harness, a reconstruction adversary, the
//! random-walk coupling, DP selection primitives, and the
//! replicability-to-DP reduction.

pub mod adversary;
pub mod composition;
pub mod coupling;
pub mod dp_analysis;
pub mod error;
pub mod finite_prob;
pub mod measures;
pub mod mechanisms;
pub mod seeding;
pub mod selection;
pub mod stability;

pub use error::{Error, Result};
pub use finite_prob::{tv_distance, FiniteDistribution, HypergeometricParams, ETA};
pub use mechanisms::{Dataset, Preprocessor, SampledMechanism, TabularMechanism};
