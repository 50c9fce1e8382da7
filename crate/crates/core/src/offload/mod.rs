//! Simulated accelerator: device memory, an in-order command queue with its
//! own executor thread, a transfer cost model and the mover engines.

pub mod arena;
mod engine;
mod model;
pub mod queue;

pub use arena::{transfer, DeviceArena};
pub use engine::{engine_acceleration, particle_capacity, HostWork, MoverEngine, MoverTimings};
pub use model::{HostMemory, TransferModel, DEFAULT_BANDWIDTH};
pub use queue::{log_to_csv, Command, CommandQueue, LogEntry, Payload, LOG_HEADER};
