//! Cost model for host/device transfers.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Host-side memory kind of a transfer endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostMemory {
    /// Pageable memory: the copy goes through a staging buffer first.
    Pageable,
    /// Page-locked memory: direct copy.
    Pinned,
}

impl HostMemory {
    pub fn is_pinned(self) -> bool {
        self == HostMemory::Pinned
    }
}

/// Interconnect parameters that make transfer costs explicit.
///
/// Modeled time of one transfer is
/// `per_call_latency_s + nbytes / bandwidth_bytes_per_s × penalty`, with
/// `penalty = staging_penalty` for pageable memory and 1 for pinned memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferModel {
    pub bandwidth_bytes_per_s: f64,
    pub per_call_latency_s: f64,
    pub staging_penalty: f64,
    /// Sleep so that each transfer takes at least its modeled time.
    pub throttle: bool,
}

impl Default for TransferModel {
    fn default() -> Self {
        TransferModel {
            bandwidth_bytes_per_s: DEFAULT_BANDWIDTH,
            per_call_latency_s: 100e-6,
            staging_penalty: 1.5,
            throttle: true,
        }
    }
}

/// Default modeled interconnect bandwidth in bytes per second.
///
/// The "device" mover runs at host CPU speed, roughly an order of magnitude
/// slower than an accelerator, so the link is scaled down by the same factor
/// to keep the transfer-to-kernel time ratio accelerator-like.
pub const DEFAULT_BANDWIDTH: f64 = 1.0e9;

impl TransferModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_bytes_per_s.is_finite() && self.bandwidth_bytes_per_s > 0.0) {
            return Err(Error::config("bandwidth_bytes_per_s", "must be positive"));
        }
        if !(self.per_call_latency_s.is_finite() && self.per_call_latency_s >= 0.0) {
            return Err(Error::config("per_call_latency_s", "must be non-negative"));
        }
        if !(self.staging_penalty.is_finite() && self.staging_penalty >= 1.0) {
            return Err(Error::config("staging_penalty", "must be at least 1"));
        }
        Ok(())
    }

    /// Modeled duration of moving `nbytes` from or to `memory`.
    pub fn modeled_secs(&self, nbytes: usize, memory: HostMemory) -> f64 {
        let penalty = if memory.is_pinned() {
            1.0
        } else {
            self.staging_penalty
        };
        self.per_call_latency_s + nbytes as f64 / self.bandwidth_bytes_per_s * penalty
    }

    /// Sleeps out whatever remains of `modeled` since `started`.
    pub(crate) fn pace(&self, started: Instant, modeled: f64) {
        if !self.throttle {
            return;
        }
        let target = Duration::from_secs_f64(modeled);
        let spent = started.elapsed();
        if target > spent {
            std::thread::sleep(target - spent);
        }
    }
}
