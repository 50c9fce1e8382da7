//! Multi-worker execution of the simulation cycle.

mod decomp;
mod sim;

pub use decomp::{decompose, exchange_particles, owner_of, Subdomain};
pub use sim::{CycleTimings, Simulation};
