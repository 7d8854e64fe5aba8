//! Exponential-stability certificates and numerical validation for delayed
//! recurrent networks with almost-periodic coefficients.
//!
//! * [`model`]: coefficient signals, delay kernels, activations and the bounds
//!   derived from them.
//! * [`certificate`]: feasibility of the weighted row-dominance criterion,
//!   witness construction and maximization of the decay rate.
//! * [`integrator`]: fixed-step RK4 for the delayed system with dense history.
//! * [`analysis`]: weighted norms, decay-rate fits, boundedness and
//!   almost-period diagnostics on trajectories.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod certificate;
pub mod integrator;
pub mod model;
pub mod presets;
