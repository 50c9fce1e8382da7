//! In-order command queue executed by a dedicated device thread.
//!
//! Commands run strictly in submission order, one at a time, like a single
//! accelerator stream. Host batches handed to the queue are parked on the
//! device side and come back through [`CommandQueue::wait_batch`].

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fields::FieldMesh;
use crate::kernels::{move_particles_threaded, MoverParams};
use crate::offload::arena::DeviceArena;
use crate::offload::model::{HostMemory, TransferModel};
use crate::particles::ParticleBatch;

pub enum Payload {
    Fields(Arc<FieldMesh>),
    Particles(ParticleBatch),
}

pub enum Command {
    CopyToDevice {
        payload: Payload,
        memory: HostMemory,
    },
    CopyToHost {
        species: usize,
        memory: HostMemory,
    },
    RunMover {
        species: usize,
        params: MoverParams,
    },
    Marker,
}

impl Command {
    fn label(&self) -> String {
        match self {
            Command::CopyToDevice {
                payload: Payload::Fields(_),
                ..
            } => "copy_to_device:fields".into(),
            Command::CopyToDevice {
                payload: Payload::Particles(b),
                ..
            } => format!("copy_to_device:species{}", b.species()),
            Command::CopyToHost { species, .. } => format!("copy_to_host:species{species}"),
            Command::RunMover { species, .. } => format!("run_mover:species{species}"),
            Command::Marker => "marker".into(),
        }
    }
}

/// One executed command. Times are seconds since the queue was created.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub seq: u64,
    pub command: String,
    pub bytes: usize,
    pub enqueue_t: f64,
    pub start_t: f64,
    pub end_t: f64,
}

pub const LOG_HEADER: &str = "seq,command,bytes,enqueue_t,start_t,end_t";

pub fn log_to_csv(entries: &[LogEntry]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(
            s,
            "{},{},{},{:.9},{:.9},{:.9}",
            e.seq, e.command, e.bytes, e.enqueue_t, e.start_t, e.end_t
        );
    }
    s
}

struct Envelope {
    seq: u64,
    enqueue_t: f64,
    command: Command,
}

enum Completion {
    Marker(u64),
    Batch(Option<ParticleBatch>),
}

struct Executor {
    arena: Arc<Mutex<DeviceArena>>,
    model: TransferModel,
    kernel_threads: usize,
    staging: Vec<f64>,
    parked: Vec<Option<ParticleBatch>>,
    fault: Arc<Mutex<Option<Error>>>,
    log: Arc<Mutex<Vec<LogEntry>>>,
    done: Sender<Completion>,
    epoch: Instant,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Executor {
    fn run(mut self, rx: Receiver<Envelope>) {
        while let Ok(env) = rx.recv() {
            let start_t = self.epoch.elapsed().as_secs_f64();
            let command = env.command.label();
            let faulted = lock(&self.fault).is_some();
            let (bytes, result, completion) = self.execute(env.seq, env.command, faulted);
            let end_t = self.epoch.elapsed().as_secs_f64();
            lock(&self.log).push(LogEntry {
                seq: env.seq,
                command,
                bytes,
                enqueue_t: env.enqueue_t,
                start_t,
                end_t,
            });
            if let Err(e) = result {
                let mut f = lock(&self.fault);
                if f.is_none() {
                    *f = Some(match e {
                        Error::EngineFault(_) => e,
                        other => Error::EngineFault(other.to_string()),
                    });
                }
            }
            if let Some(c) = completion {
                let _ = self.done.send(c);
            }
        }
    }

    fn park(&mut self, batch: ParticleBatch) -> Result<()> {
        let s = batch.species();
        if self.parked.len() <= s {
            self.parked.resize_with(s + 1, || None);
        }
        if self.parked[s].is_some() {
            return Err(Error::EngineFault(format!(
                "species {s} already resident on device"
            )));
        }
        self.parked[s] = Some(batch);
        Ok(())
    }

    fn execute(
        &mut self,
        seq: u64,
        command: Command,
        faulted: bool,
    ) -> (usize, Result<()>, Option<Completion>) {
        match command {
            Command::Marker => (0, Ok(()), Some(Completion::Marker(seq))),
            Command::CopyToDevice {
                payload: Payload::Fields(mesh),
                memory,
            } => {
                let bytes = 6 * 8 * mesh.node_count();
                if faulted {
                    return (0, Ok(()), None);
                }
                (bytes, self.load_fields(&mesh, memory), None)
            }
            Command::CopyToDevice {
                payload: Payload::Particles(batch),
                memory,
            } => {
                let bytes = batch.active_bytes();
                let loaded = if faulted {
                    Ok(())
                } else {
                    let mut arena = lock(&self.arena);
                    arena
                        .load_particles(
                            batch.species(),
                            batch.arrays(),
                            batch.len(),
                            memory,
                            &mut self.staging,
                            &self.model,
                        )
                        .map(|_| ())
                };
                let parked = self.park(batch);
                (bytes, loaded.and(parked), None)
            }
            Command::CopyToHost { species, memory } => {
                let Some(mut batch) = self.parked.get_mut(species).and_then(Option::take) else {
                    let e = Error::EngineFault(format!("species {species} is not on device"));
                    return (0, Err(e), Some(Completion::Batch(None)));
                };
                let result = if faulted {
                    Ok(0)
                } else {
                    self.store(species, &mut batch, memory)
                };
                let done = Some(Completion::Batch(Some(batch)));
                match result {
                    Ok(bytes) => (bytes, Ok(()), done),
                    Err(e) => (0, Err(e), done),
                }
            }
            Command::RunMover { species, params } => {
                if faulted {
                    return (0, Ok(()), None);
                }
                let mut arena = lock(&self.arena);
                let result = arena
                    .kernel_view(species)
                    .and_then(|(fields, grid, region)| {
                        move_particles_threaded(
                            region.soa_mut(),
                            &fields,
                            grid,
                            &params,
                            species,
                            self.kernel_threads,
                        )
                    });
                (0, result, None)
            }
        }
    }

    fn load_fields(&mut self, mesh: &FieldMesh, memory: HostMemory) -> Result<()> {
        let mut arena = lock(&self.arena);
        let region = arena.field_region_mut();
        if region.len() != 6 * mesh.node_count() {
            return Err(Error::EngineFault(format!(
                "field mesh of {} nodes does not match device field region",
                mesh.node_count()
            )));
        }
        let bytes = 8 * region.len();
        let started = Instant::now();
        match memory {
            HostMemory::Pinned => mesh.pack_into(region),
            HostMemory::Pageable => {
                self.staging.resize(region.len(), 0.0);
                mesh.pack_into(&mut self.staging);
                region.copy_from_slice(&self.staging);
            }
        }
        self.model
            .pace(started, self.model.modeled_secs(bytes, memory));
        Ok(())
    }

    fn store(
        &mut self,
        species: usize,
        batch: &mut ParticleBatch,
        memory: HostMemory,
    ) -> Result<usize> {
        let arena = lock(&self.arena);
        let count = arena.region(species)?.count();
        let dst = batch.resize_for_load(count)?;
        arena.store_particles(species, dst, memory, &mut self.staging, &self.model)?;
        Ok(6 * 8 * count)
    }
}

/// Host handle to the device thread.
pub struct CommandQueue {
    tx: Option<Sender<Envelope>>,
    rx: Receiver<Completion>,
    worker: Option<JoinHandle<()>>,
    arena: Arc<Mutex<DeviceArena>>,
    fault: Arc<Mutex<Option<Error>>>,
    log: Arc<Mutex<Vec<LogEntry>>>,
    returned: VecDeque<Option<ParticleBatch>>,
    next_seq: u64,
    epoch: Instant,
}

impl CommandQueue {
    pub fn new(arena: DeviceArena, model: TransferModel, kernel_threads: usize) -> Self {
        let (tx, cmd_rx) = channel();
        let (done, rx) = channel();
        let arena = Arc::new(Mutex::new(arena));
        let fault = Arc::new(Mutex::new(None));
        let log = Arc::new(Mutex::new(Vec::new()));
        let epoch = Instant::now();
        let exec = Executor {
            arena: Arc::clone(&arena),
            model,
            kernel_threads: kernel_threads.max(1),
            staging: Vec::new(),
            parked: Vec::new(),
            fault: Arc::clone(&fault),
            log: Arc::clone(&log),
            done,
            epoch,
        };
        let worker = std::thread::Builder::new()
            .name("device".into())
            .spawn(move || exec.run(cmd_rx))
            .expect("spawn device thread");
        CommandQueue {
            tx: Some(tx),
            rx,
            worker: Some(worker),
            arena,
            fault,
            log,
            returned: VecDeque::new(),
            next_seq: 0,
            epoch,
        }
    }

    /// Submits a command and returns its sequence number.
    pub fn enqueue(&mut self, command: Command) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        let env = Envelope {
            seq,
            enqueue_t: self.epoch.elapsed().as_secs_f64(),
            command,
        };
        if let Some(tx) = &self.tx {
            if tx.send(env).is_err() {
                self.set_fault(Error::EngineFault("device thread is gone".into()));
            }
        }
        seq
    }

    fn set_fault(&self, e: Error) {
        let mut f = lock(&self.fault);
        if f.is_none() {
            *f = Some(e);
        }
    }

    fn check(&self) -> Result<()> {
        match lock(&self.fault).as_ref() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    fn recv(&self) -> Result<Completion> {
        self.rx.recv().map_err(|_| {
            let e = Error::EngineFault("device thread stopped".into());
            self.set_fault(e.clone());
            e
        })
    }

    /// Blocks until every previously enqueued command has completed, then
    /// reports any device fault.
    pub fn synchronize(&mut self) -> Result<()> {
        let seq = self.enqueue(Command::Marker);
        loop {
            match self.recv()? {
                Completion::Marker(s) if s == seq => break,
                Completion::Marker(_) => {}
                Completion::Batch(b) => self.returned.push_back(b),
            }
        }
        self.check()
    }

    /// Blocks until the next batch handed back by a `CopyToHost` arrives.
    pub fn wait_batch(&mut self) -> Result<ParticleBatch> {
        let batch = match self.returned.pop_front() {
            Some(b) => b,
            None => loop {
                if let Completion::Batch(b) = self.recv()? {
                    break b;
                }
            },
        };
        self.check()?;
        batch.ok_or_else(|| Error::EngineFault("no batch returned".into()))
    }

    pub fn fault(&self) -> Option<Error> {
        lock(&self.fault).clone()
    }

    /// Read access to device memory. Call after [`Self::synchronize`] to
    /// see a settled state.
    pub fn with_arena<R>(&self, f: impl FnOnce(&DeviceArena) -> R) -> R {
        f(&lock(&self.arena))
    }

    pub fn log(&self) -> Vec<LogEntry> {
        lock(&self.log).clone()
    }

    pub fn clear_log(&self) {
        lock(&self.log).clear();
    }

    pub fn write_log_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, log_to_csv(&self.log()))?;
        Ok(())
    }
}

impl Drop for CommandQueue {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, Vec3};

    fn setup(throttle: bool) -> (Grid, CommandQueue) {
        let g = Grid::new(4, 4, 4, 4.0, 4.0, 4.0).unwrap();
        let mut a = DeviceArena::new(1 << 20);
        a.upload_grid(&g).unwrap();
        a.alloc_fields(g.node_count()).unwrap();
        a.alloc_particle_regions(2).unwrap();
        let model = TransferModel {
            throttle,
            ..TransferModel::default()
        };
        (g, CommandQueue::new(a, model, 1))
    }

    fn batch(species: usize, n: usize) -> ParticleBatch {
        let mut b = ParticleBatch::with_capacity(species, 1.0, 1.0, n);
        for p in 0..n {
            let f = p as f64 / n as f64;
            b.push(Vec3::new(4.0 * f, 1.0, 2.0), Vec3::new(1.0, 0.0, 0.0))
                .unwrap();
        }
        b
    }

    #[test]
    fn round_trip_moves_particles() {
        let (g, mut q) = setup(false);
        let mesh = Arc::new(FieldMesh::zeros(&g));
        let host = batch(1, 50);
        let mut expect = host.clone();
        let mp = MoverParams::new(0.1, 1.0, 3).unwrap();
        crate::kernels::move_batch(&mut expect, &mesh, &g, &mp).unwrap();
        q.enqueue(Command::CopyToDevice {
            payload: Payload::Fields(mesh),
            memory: HostMemory::Pinned,
        });
        q.enqueue(Command::CopyToDevice {
            payload: Payload::Particles(host),
            memory: HostMemory::Pageable,
        });
        q.enqueue(Command::RunMover {
            species: 1,
            params: mp,
        });
        q.enqueue(Command::CopyToHost {
            species: 1,
            memory: HostMemory::Pageable,
        });
        let back = q.wait_batch().unwrap();
        assert_eq!(back, expect);
        q.synchronize().unwrap();
    }

    #[test]
    fn marker_completes_after_everything_before_it() {
        let (_, mut q) = setup(true);
        for s in 0..2 {
            q.enqueue(Command::CopyToDevice {
                payload: Payload::Particles(batch(s, 1000)),
                memory: HostMemory::Pageable,
            });
        }
        for s in 0..2 {
            q.enqueue(Command::CopyToHost {
                species: s,
                memory: HostMemory::Pinned,
            });
        }
        q.synchronize().unwrap();
        let log = q.log();
        assert_eq!(log.len(), 5);
        for (i, e) in log.iter().enumerate() {
            assert_eq!(e.seq, i as u64);
            assert!(e.start_t >= e.enqueue_t && e.end_t >= e.start_t);
            if i > 0 {
                assert!(e.start_t >= log[i - 1].end_t);
            }
        }
        assert_eq!(log[4].command, "marker");
        assert!(
            log[0].end_t - log[0].start_t
                >= TransferModel::default().modeled_secs(48_000, HostMemory::Pageable)
        );
        assert!(log_to_csv(&log).starts_with(LOG_HEADER));
    }

    #[test]
    fn faults_surface_at_synchronize() {
        let (g, mut q) = setup(false);
        q.enqueue(Command::CopyToDevice {
            payload: Payload::Fields(Arc::new(FieldMesh::zeros(&g))),
            memory: HostMemory::Pinned,
        });
        let mut bad = batch(0, 4);
        bad.set(2, Vec3::new(1.0, 1.0, 1.0), Vec3::new(f64::NAN, 0.0, 0.0));
        q.enqueue(Command::CopyToDevice {
            payload: Payload::Particles(bad),
            memory: HostMemory::Pinned,
        });
        q.enqueue(Command::RunMover {
            species: 0,
            params: MoverParams::new(0.1, 1.0, 3).unwrap(),
        });
        let err = q.synchronize().unwrap_err();
        assert!(
            matches!(&err, Error::EngineFault(m) if m.contains("particle 2")),
            "{err}"
        );
        assert!(q.synchronize().is_err());
        q.enqueue(Command::CopyToHost {
            species: 0,
            memory: HostMemory::Pinned,
        });
        assert!(q.wait_batch().is_err());
    }

    #[test]
    fn missing_species_is_a_fault_not_a_hang() {
        let (_, mut q) = setup(false);
        q.enqueue(Command::CopyToHost {
            species: 1,
            memory: HostMemory::Pinned,
        });
        assert!(q.wait_batch().is_err());
    }
}
