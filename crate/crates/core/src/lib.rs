//! Alarm latency in a slotted CDMA uplink, and K-bit finite-memory
//! sequential learning that lets periodic reporters step off the alarm code.
//!
//! The crate is split the same way the model is:
//!
//! - [`analytics`]: closed-form collision, delay and belief formulas, generic
//!   over the scalar type, plus an exact enumeration oracle.
//! - [`topology`]: Poisson deployment, grid-bucketed neighbor graph and the
//!   observation disk around the abnormality.
//! - [`learning`]: private signals, private beliefs, the K-bit message and the
//!   slot-synchronous propagation of learning sequences.
//! - [`mac`]: per-slot code selection, unique-code success and full episodes.
//! - [`harness`]: configuration, seeded sweeps, CSV output and the validation
//!   suites.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod learning;
pub mod mac;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod topology;

pub use error::{Error, Result};
pub use learning::{BeliefRule, BeliefState, LearningMessage, SequenceState};
pub use mac::{EpisodeMetrics, Mode, SlotOutcome, TrafficState};
pub use params::{PhaseAssignment, SystemParams};
pub use scalar::{Probability, Scalar};
pub use topology::{Node, Point, Topology};

/// Default floating-point scalar used by the simulator.
pub type Real = f64;

/// Exact rational scalar used by the enumeration oracle.
pub type Exact = num_rational::BigRational;

/// Success-count distribution in double precision.
pub type ThroughputDistributionF64 = analytics::ThroughputDistribution<f64>;

/// Success-count distribution in single precision.
pub type ThroughputDistributionF32 = analytics::ThroughputDistribution<f32>;

/// Success-count distribution in exact rationals.
pub type ThroughputDistributionExact = analytics::ThroughputDistribution<Exact>;
