//! Fixed-point, linear-stability, invariant-manifold and normal-form
//! analysis of a two-link planar arm modeled as a double pendulum under
//! constant joint torques, with symplectic and adaptive integrators.

pub mod error;
pub mod integrate;
pub mod model;
pub mod normal_form;
pub mod cli;
pub mod equilibria;
pub mod linear;
pub mod manifolds;
pub mod printed;

pub use error::{Error, Result};
pub use model::{canonicalize_angles, Arm, ArmParams, Canonicalized, State, Torques};
