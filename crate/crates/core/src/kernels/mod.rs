//! Numerical kernels: interpolation, the implicit mover, moment deposition
//! and the field-phase stand-in.

mod interp;
mod moments;
mod mover;
mod smooth;

pub use interp::{gather_at, gather_field, trilinear_weights, NodeWeights};
pub use moments::{deposit_moments, MomentMesh};
pub use mover::{implicit_velocity, move_batch, move_particles, MoverParams};
pub use smooth::{field_phase_stub, field_phase_stub_threaded};

pub(crate) use mover::move_particles_threaded;
