//! Mover engines: the host reference and three offload strategies.
//!
//! * naive: blocking copies through pageable memory, one species at a time;
//! * pinned: the same schedule with pinned memory;
//! * prefetch: pinned memory, and species `s+1` is uploaded and moved while
//!   the host processes the results of species `s`. The first species is
//!   uploaded during the field phase.

use std::sync::Arc;
use std::time::Instant;

use crate::config::{EngineSelect, SimConfig};
use crate::error::{Error, Result};
use crate::fields::FieldMesh;
use crate::geometry::Grid;
use crate::kernels::{move_batch, MoverParams};
use crate::offload::arena::{DeviceArena, PARTICLE_BYTES};
use crate::offload::model::HostMemory;
use crate::offload::queue::{Command, CommandQueue, LogEntry, Payload};
use crate::particles::ParticleBatch;

/// Wall time of one mover phase, split into mover work and the host
/// callback run between species.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MoverTimings {
    pub mover_s: f64,
    pub host_s: f64,
}

/// Per-species particle capacity of a device with `capacity_bytes`, after the
/// grid constants and the packed field mesh are placed.
pub fn particle_capacity(grid: &Grid, nspecies: usize, capacity_bytes: u64) -> Result<usize> {
    let fixed = 48 + (PARTICLE_BYTES * grid.node_count()) as u64;
    let per = capacity_bytes.saturating_sub(fixed) / nspecies.max(1) as u64 / PARTICLE_BYTES as u64;
    if per == 0 {
        return Err(Error::Allocation(format!(
            "device capacity of {capacity_bytes} bytes leaves no room for particles"
        )));
    }
    Ok(per as usize)
}

/// Host callback invoked once per species, after that species has moved.
pub type HostWork<'a> = dyn FnMut(&ParticleBatch) -> Result<()> + 'a;

pub struct HostEngine {
    grid: Grid,
}

pub struct OffloadEngine {
    select: EngineSelect,
    queue: CommandQueue,
    staged_first: bool,
}

pub enum MoverEngine {
    Host(HostEngine, usize),
    Offload(OffloadEngine, usize, bool),
}

impl MoverEngine {
    pub fn new(select: EngineSelect, cfg: &SimConfig) -> Result<Self> {
        let nspecies = cfg.species().len();
        let capacity = particle_capacity(&cfg.grid, nspecies, cfg.device_capacity_bytes)?;
        if select == EngineSelect::Cpu {
            return Ok(MoverEngine::Host(HostEngine { grid: cfg.grid }, capacity));
        }
        let mut arena = DeviceArena::new(cfg.device_capacity_bytes);
        arena.upload_grid(&cfg.grid)?;
        arena.alloc_fields(cfg.grid.node_count())?;
        let per = arena.alloc_particle_regions(nspecies)?;
        debug_assert_eq!(per, capacity);
        let queue = CommandQueue::new(arena, cfg.transfer, cfg.kernel_threads);
        Ok(MoverEngine::Offload(
            OffloadEngine {
                select,
                queue,
                staged_first: false,
            },
            per,
            true,
        ))
    }

    pub fn select(&self) -> EngineSelect {
        match self {
            MoverEngine::Host(..) => EngineSelect::Cpu,
            MoverEngine::Offload(e, ..) => e.select,
        }
    }

    /// Largest batch any one species may hold.
    pub fn particle_capacity(&self) -> usize {
        match self {
            MoverEngine::Host(_, c) | MoverEngine::Offload(_, c, _) => *c,
        }
    }

    pub fn is_valid(&self) -> bool {
        !matches!(self, MoverEngine::Offload(_, _, false))
    }

    pub fn queue(&self) -> Option<&CommandQueue> {
        match self {
            MoverEngine::Offload(e, ..) => Some(&e.queue),
            MoverEngine::Host(..) => None,
        }
    }

    pub fn log(&self) -> Vec<LogEntry> {
        self.queue().map(CommandQueue::log).unwrap_or_default()
    }

    /// Work issued before the field phase. The prefetch engine starts
    /// uploading the first species here.
    pub fn begin_cycle(&mut self, batches: &mut [ParticleBatch]) -> Result<()> {
        let MoverEngine::Offload(e, _, valid) = self else {
            return Ok(());
        };
        if !*valid {
            return Err(invalid());
        }
        if e.select == EngineSelect::Prefetch && !batches.is_empty() && !e.staged_first {
            e.queue.enqueue(Command::CopyToDevice {
                payload: Payload::Particles(std::mem::take(&mut batches[0])),
                memory: HostMemory::Pinned,
            });
            e.staged_first = true;
        }
        Ok(())
    }

    /// Moves every species one step, calling `host` on each species as soon
    /// as its moved particles are back in host memory.
    pub fn mover_phase(
        &mut self,
        batches: &mut [ParticleBatch],
        fields: &Arc<FieldMesh>,
        params: &[MoverParams],
        host: &mut HostWork<'_>,
    ) -> Result<MoverTimings> {
        if params.len() != batches.len() {
            return Err(Error::EngineFault(format!(
                "{} mover parameter sets for {} species",
                params.len(),
                batches.len()
            )));
        }
        let started = Instant::now();
        let mut host_s = 0.0;
        let mut timed_host = |b: &ParticleBatch| -> Result<()> {
            let t = Instant::now();
            let r = host(b);
            host_s += t.elapsed().as_secs_f64();
            r
        };
        match self {
            MoverEngine::Host(h, _) => {
                for (b, mp) in batches.iter_mut().zip(params) {
                    move_batch(b, fields, &h.grid, mp)?;
                    timed_host(b)?;
                }
            }
            MoverEngine::Offload(e, _, valid) => {
                if !*valid {
                    return Err(invalid());
                }
                let result = match e.select {
                    EngineSelect::Prefetch => {
                        e.run_prefetch(batches, fields, params, &mut timed_host)
                    }
                    EngineSelect::Pinned => {
                        e.run_blocking(batches, fields, params, HostMemory::Pinned, &mut timed_host)
                    }
                    _ => e.run_blocking(
                        batches,
                        fields,
                        params,
                        HostMemory::Pageable,
                        &mut timed_host,
                    ),
                };
                if result.is_err() {
                    *valid = false;
                }
                result?;
            }
        }
        let total = started.elapsed().as_secs_f64();
        Ok(MoverTimings {
            mover_s: (total - host_s).max(0.0),
            host_s,
        })
    }
}

fn invalid() -> Error {
    Error::EngineFault("engine is unusable after an earlier fault".into())
}

impl OffloadEngine {
    fn upload(&mut self, batches: &mut [ParticleBatch], s: usize, memory: HostMemory) {
        self.queue.enqueue(Command::CopyToDevice {
            payload: Payload::Particles(std::mem::take(&mut batches[s])),
            memory,
        });
    }

    fn download(
        &mut self,
        batches: &mut [ParticleBatch],
        s: usize,
        memory: HostMemory,
    ) -> Result<()> {
        self.queue
            .enqueue(Command::CopyToHost { species: s, memory });
        batches[s] = self.queue.wait_batch()?;
        Ok(())
    }

    /// Naive and pinned schedules: every copy and kernel completes before
    /// the next one is issued.
    fn run_blocking(
        &mut self,
        batches: &mut [ParticleBatch],
        fields: &Arc<FieldMesh>,
        params: &[MoverParams],
        memory: HostMemory,
        host: &mut HostWork<'_>,
    ) -> Result<()> {
        self.queue.enqueue(Command::CopyToDevice {
            payload: Payload::Fields(Arc::clone(fields)),
            memory,
        });
        self.queue.synchronize()?;
        for s in 0..batches.len() {
            self.upload(batches, s, memory);
            self.queue.synchronize()?;
            self.queue.enqueue(Command::RunMover {
                species: s,
                params: params[s],
            });
            self.queue.synchronize()?;
            self.download(batches, s, memory)?;
            host(&batches[s])?;
        }
        Ok(())
    }

    fn run_prefetch(
        &mut self,
        batches: &mut [ParticleBatch],
        fields: &Arc<FieldMesh>,
        params: &[MoverParams],
        host: &mut HostWork<'_>,
    ) -> Result<()> {
        let n = batches.len();
        if n == 0 {
            return Ok(());
        }
        let memory = HostMemory::Pinned;
        if !std::mem::take(&mut self.staged_first) {
            self.upload(batches, 0, memory);
        }
        self.queue.enqueue(Command::CopyToDevice {
            payload: Payload::Fields(Arc::clone(fields)),
            memory,
        });
        self.queue.enqueue(Command::RunMover {
            species: 0,
            params: params[0],
        });
        for s in 0..n {
            self.queue.synchronize()?;
            self.download(batches, s, memory)?;
            if s + 1 < n {
                self.upload(batches, s + 1, memory);
                self.queue.enqueue(Command::RunMover {
                    species: s + 1,
                    params: params[s + 1],
                });
            }
            host(&batches[s])?;
        }
        Ok(())
    }
}

/// Ratio of two mover throughputs, `reference_s / candidate_s`.
pub fn engine_acceleration(reference_s: f64, candidate_s: f64) -> Result<f64> {
    if !(reference_s > 0.0 && candidate_s > 0.0)
        || !reference_s.is_finite()
        || !candidate_s.is_finite()
    {
        return Err(Error::Metric(format!(
            "mover times must be positive and finite, got {reference_s} and {candidate_s}"
        )));
    }
    Ok(reference_s / candidate_s)
}
