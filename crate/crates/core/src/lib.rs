//! Seed-based multipartite Bell inequalities.
//!
//! The crate is organised bottom-up:
//!
//! - [`correlation`]: behaviors `P(a|x)` for `n` binary-input/binary-output
//!   parties, deterministic strategies, the bipartite no-signalling vertices
//!   and the `n`-party PR-type box.
//! - [`quantum`]: pure qubit states, projective measurements and the Born rule.
//! - [`forge`]: Bell functionals with exact rational coefficients, seeds,
//!   lifting and every inequality family built from a seed.
//! - [`bounds`]: local / tripartite biseparable bounds by exact enumeration
//!   and sampled `m`-separable bounds.
//! - [`analytic`]: closed-form violations (GHZ family, Hardy measurements,
//!   the symmetric three-qubit construction).
//! - [`optimizer`]: measurement search on a fixed pure state.
//!
//! Party 1 is always the most significant bit of a setting or outcome index.

pub mod analytic;
pub mod bounds;
pub mod correlation;
pub mod forge;
pub mod optimizer;
pub mod quantum;
pub mod rational;
pub mod rng;

pub use correlation::{Behavior, DeterministicStrategy, ExactBehavior, Grouping};
pub use forge::{BellFunctional, Seed};
pub use quantum::{MeasurementAssignment, PureState, QubitMeasurement};
pub use rational::Rational;
