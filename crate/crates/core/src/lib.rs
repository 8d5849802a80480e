//! Solvers for history-dependent rate-independent systems
//!
//! ```text
//! −∂_q E(t, q(t)) ∈ ∂₂R(H(q)(t), q̇(t)),   q(0) = 0,
//! ```
//!
//! with a quadratic H¹ energy, a Volterra history operator `H`, and a
//! state-dependent dissipation potential `R`. Solutions are obtained as
//! vanishing-viscosity limits of the viscous regularization.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision instantiation.

pub mod control;
pub mod dissipation;
pub mod error;
pub mod expr;
pub mod history;
pub mod linalg;
pub mod qp;
pub mod scalar;
pub mod scenario;
pub mod spatial;
pub mod table;
pub mod trajectory;
pub mod verify;
pub mod viscous;
pub mod vv;

pub use dissipation::{DissipationKind, DissipationSpec, ExtReal};
pub use error::{Error, Result};
pub use history::{KernelKind, KernelSpec};
pub use scalar::{Scalar, ScalarFn};
pub use scenario::{LoadSpec, LoadTerm, Scenario};
pub use spatial::{DualField, Field, Mesh};
pub use trajectory::Trajectory;
pub use viscous::{solve_viscous, SolveReport};

pub type Mesh64 = Mesh<f64>;
pub type Field64 = Field<f64>;
pub type DualField64 = DualField<f64>;
pub type Scenario64 = Scenario<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type DissipationSpec64 = DissipationSpec<f64>;

pub type Mesh32 = Mesh<f32>;
pub type Field32 = Field<f32>;
pub type Scenario32 = Scenario<f32>;
pub type Trajectory32 = Trajectory<f32>;
