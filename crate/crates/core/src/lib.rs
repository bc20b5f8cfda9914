//! Leapfrog simulation and operator-valued scattering coefficients for the
//! 1+1 wave equation `D_t^2 u - a B D_t u - D_x^2 u = 0` with a
//! time-dependent permittivity and exponential memory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops index several arrays with the same node.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod field;
pub mod freqdomain;
pub mod grid;
pub mod krylov;
pub mod packet;
pub mod potential;
pub mod scattering;
pub mod timedomain;

pub use error::{Error, Result};
pub use field::{FieldState, MemoryAccumulator};
pub use grid::{Grid1D, TimeAxis};
pub use packet::{eval_packet, eval_packet_derivative, WavePacket};
pub use potential::{eval_a, eval_potential, PermittivityModel, StepPotential};
