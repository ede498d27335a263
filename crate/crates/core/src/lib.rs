//! Consensus sampling over groups of generative models.
//!
//! A model group answers one prompt with `n` finite output distributions,
//! `s` of which are presumed safe and the rest Byzantine. This crate
//! implements the sampling protocols that pick one response from such a
//! group — the abstaining consensus-sampling baseline, reliable consensus
//! sampling with its trace phase, the local-coin hybrid, and the
//! feedback-optimized variant that excludes implicated models over time —
//! together with the adversary generators and the closed-form risk
//! diagnostics used to check the protocols against theory.
//!
//! All probability math is generic over a [`Scalar`] so the same code runs
//! on `f64` for Monte Carlo work and on `BigRational` when an enumeration
//! must be exact.
//!
//! ```
//! use rand::SeedableRng;
//! use rcs_core::protocols::{run_rcs, LatencyModel};
//! use rcs_core::{FiniteDistribution, ModelGroup, OutputSpace};
//!
//! // Responses {0, 1} are safe, {2} is unsafe; two agreeing models plus
//! // one concentrated entirely on the unsafe response.
//! let space = OutputSpace::new(3, [2])?;
//! let group = ModelGroup::new(
//!     space,
//!     vec![
//!         FiniteDistribution::new(vec![0.5, 0.5, 0.0])?,
//!         FiniteDistribution::new(vec![0.5, 0.5, 0.0])?,
//!         FiniteDistribution::new(vec![0.0, 0.0, 1.0])?,
//!     ],
//!     2, // declared safe count
//! )?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let outcome = run_rcs(&group, 4, &LatencyModel::default(), &mut rng);
//! assert!(!outcome.is_abstain()); // the trace phase rules abstention out
//! # Ok::<(), rcs_core::CoreError>(())
//! ```

pub mod adversary;
pub mod analysis;
pub mod dist;
pub mod error;
pub mod feedback;
pub mod group;
pub mod protocols;
pub mod scalar;
pub mod space;
pub mod stream;

pub use dist::FiniteDistribution;
pub use error::{CoreError, Result};
pub use group::{LabeledGroup, MixtureDraw, ModelGroup, ModelLabel, SigmaStats};
pub use protocols::{BufferEntry, LatencyModel, Outcome, Phase, RunResult};
pub use scalar::Scalar;
pub use space::OutputSpace;

/// Absolute tolerance on |sum - 1| when validating a distribution.
pub const PROB_TOL: f64 = 1e-9;

/// Looser tolerance applied to ingested files before renormalization.
pub const INGEST_TOL: f64 = 1e-6;

/// Exact scalar used by the enumeration oracle.
pub type ExactScalar = num_rational::BigRational;

pub type Dist64 = FiniteDistribution<f64>;
pub type Group64 = ModelGroup<f64>;
pub type LabeledGroup64 = LabeledGroup<f64>;
pub type ExactDist = FiniteDistribution<ExactScalar>;
pub type ExactGroup = ModelGroup<ExactScalar>;
