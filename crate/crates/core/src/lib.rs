//! Propagation of exceptional points of parametric non-Hermitian
//! Hamiltonians through the complex coupling plane.

// `!(x <= tol)` rejects NaN along with large values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eom;
pub mod ics;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod record;

pub use eom::{EpRates, EpState, Integrator, PropagationSettings, ResidualReport, TrajectoryRecord};
pub use linalg::{CMatrix, CVector, C64};
pub use model::{HamiltonianFamily, Parity, ToyModel, ToyModelSpec};
