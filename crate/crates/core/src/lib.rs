//! Unified Lagrangian–Hamiltonian (Skinner–Rusk) mechanics for
//! time-dependent contact systems.
//!
//! Start from a Lagrangian `L(t, q, v, s)` ([`mechanics::LagrangianSystem`],
//! built natively or from the [`dsl`]), run the constraint algorithm on the
//! Pontryagin bundle ([`skinner_rusk::run_constraint_algorithm`]), and
//! integrate the resulting vector field ([`dynamics::integrate`]). The
//! [`systems`] module ships ready-made examples and [`verify`] bundles the
//! numerical identity checks.

pub mod dsl;
pub mod dynamics;
pub mod error;
pub mod jets;
pub mod linalg;
pub mod mechanics;
pub mod skinner_rusk;
pub mod systems;
pub mod taylor;
pub mod verify;

pub use error::EvalError;
pub use jets::{eval_jet, CoordinateSpace, Jet, ScalarField};
pub use mechanics::{HamiltonianPoint, LagrangianPoint, LagrangianSystem};
pub use skinner_rusk::{ConstraintLadder, PontryaginPoint, ZCoefficients};
pub use taylor::Taylor;
