//! Particle-in-cell cycle with offloaded particle movers.
//!
//! A simulation alternates a field phase, a mover phase, moment deposition
//! and a particle exchange between workers. The mover can run on the host or
//! on a simulated accelerator reached through a bandwidth-limited link, with
//! three transfer strategies of increasing sophistication.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod init;
pub mod kernels;
pub mod offload;
pub mod particles;
pub mod runtime;

pub use config::{EngineSelect, GemParams, SimConfig};
pub use error::{Error, Result};
pub use fields::FieldMesh;
pub use geometry::{Grid, Vec3};
pub use particles::{ParticleBatch, Species};
