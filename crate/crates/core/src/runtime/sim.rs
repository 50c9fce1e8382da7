//! The simulation cycle: field phase, mover phase with per-species moment
//! deposition, moment reduction, and particle exchange.

use std::sync::Arc;
use std::time::Instant;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::fields::FieldMesh;
use crate::init::init_gem;
use crate::kernels::{deposit_moments, field_phase_stub_threaded, MomentMesh, MoverParams};
use crate::offload::{LogEntry, MoverEngine, MoverTimings};
use crate::particles::ParticleBatch;
use crate::runtime::decomp::{decompose, exchange_particles, owner_of, Subdomain};

/// Wall-clock seconds spent in each phase of one cycle. With several
/// workers, mover and moment times are those of the slowest worker.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CycleTimings {
    pub field_s: f64,
    pub mover_s: f64,
    pub moments_s: f64,
    pub exchange_s: f64,
}

impl CycleTimings {
    pub fn total(&self) -> f64 {
        self.field_s + self.mover_s + self.moments_s + self.exchange_s
    }
}

struct Worker {
    sub: Subdomain,
    batches: Vec<ParticleBatch>,
    engine: MoverEngine,
    moments: MomentMesh,
}

pub struct Simulation {
    cfg: SimConfig,
    fields: Arc<FieldMesh>,
    params: Vec<MoverParams>,
    workers: Vec<Worker>,
    moments: MomentMesh,
    cycle: usize,
    valid: bool,
}

impl Simulation {
    /// Current-sheet setup from the configuration.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let (fields, batches) = init_gem(cfg, &cfg.gem)?;
        Self::from_state(cfg, fields, &batches)
    }

    /// Distributes a global initial state over `cfg.workers` slabs.
    pub fn from_state(
        cfg: &SimConfig,
        fields: FieldMesh,
        batches: &[ParticleBatch],
    ) -> Result<Self> {
        fields.validate(&cfg.grid)?;
        let subs = decompose(&cfg.grid, cfg.workers)?;
        let species = cfg.species();
        if batches.len() != species.len() {
            return Err(Error::config(
                "species",
                format!("{} batches for {} species", batches.len(), species.len()),
            ));
        }
        let params = species
            .iter()
            .map(|s| MoverParams::new(cfg.dt, s.qom, cfg.pc_iterations))
            .collect::<Result<Vec<_>>>()?;
        let nw = subs.len();
        let mut workers = Vec::with_capacity(nw);
        for sub in subs {
            let engine = MoverEngine::new(cfg.engine, cfg)?;
            let cap = engine.particle_capacity();
            workers.push(Worker {
                sub,
                batches: batches.iter().map(|b| b.empty_like(cap)).collect(),
                engine,
                moments: MomentMesh::new(&cfg.grid, cfg.pressure),
            });
        }
        for b in batches {
            let s = b.species();
            let [_, y, ..] = b.arrays();
            for (p, &yp) in y.iter().enumerate() {
                let w = owner_of(yp, &cfg.grid, nw);
                workers[w].batches[s].push_from(b, p)?;
            }
        }
        Ok(Simulation {
            cfg: cfg.clone(),
            fields: Arc::new(fields),
            params,
            workers,
            moments: MomentMesh::new(&cfg.grid, cfg.pressure),
            cycle: 0,
            valid: true,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn fields(&self) -> &FieldMesh {
        &self.fields
    }

    /// Moments deposited during the last cycle, summed over workers.
    pub fn moments(&self) -> &MomentMesh {
        &self.moments
    }

    pub fn cycles_done(&self) -> usize {
        self.cycle
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn subdomains(&self) -> Vec<Subdomain> {
        self.workers.iter().map(|w| w.sub).collect()
    }

    pub fn particle_count(&self) -> usize {
        self.workers
            .iter()
            .flat_map(|w| &w.batches)
            .map(ParticleBatch::len)
            .sum()
    }

    /// Particles of worker `w`, by species.
    pub fn worker_particles(&self, w: usize) -> &[ParticleBatch] {
        &self.workers[w].batches
    }

    /// All particles of each species, concatenated in worker order.
    pub fn gather_particles(&self) -> Vec<ParticleBatch> {
        let nspecies = self.params.len();
        (0..nspecies)
            .map(|s| {
                let total: usize = self.workers.iter().map(|w| w.batches[s].len()).sum();
                let mut out = self.workers[0].batches[s].empty_like(total);
                for w in &self.workers {
                    let b = &w.batches[s];
                    for p in 0..b.len() {
                        out.push_from(b, p).expect("sized to fit");
                    }
                }
                out
            })
            .collect()
    }

    /// Executor log of worker `w`'s device, empty for the host engine.
    pub fn engine_log(&self, w: usize) -> Vec<LogEntry> {
        self.workers[w].engine.log()
    }

    pub fn run(&mut self, cycles: usize) -> Result<Vec<CycleTimings>> {
        (0..cycles).map(|_| self.run_cycle()).collect()
    }

    /// Advances one cycle. After any failure the simulation refuses to
    /// continue.
    pub fn run_cycle(&mut self) -> Result<CycleTimings> {
        if !self.valid {
            return Err(Error::EngineFault(
                "simulation stopped after an earlier fault".into(),
            ));
        }
        let r = self.cycle_inner();
        match r {
            Ok(_) => self.cycle += 1,
            Err(_) => self.valid = false,
        }
        r
    }

    fn cycle_inner(&mut self) -> Result<CycleTimings> {
        let grid = self.cfg.grid;
        let nw = self.workers.len();

        for w in &mut self.workers {
            w.engine.begin_cycle(&mut w.batches)?;
        }

        let t = Instant::now();
        let mesh = Arc::get_mut(&mut self.fields)
            .ok_or_else(|| Error::EngineFault("field mesh still referenced by a device".into()))?;
        field_phase_stub_threaded(mesh, &grid, self.cfg.field_passes, nw);
        let field_s = t.elapsed().as_secs_f64();

        let fields = &self.fields;
        let params = &self.params;
        let move_one = |w: &mut Worker| -> Result<MoverTimings> {
            w.moments.clear();
            let moments = &mut w.moments;
            w.engine
                .mover_phase(&mut w.batches, fields, params, &mut |b| {
                    deposit_moments(b, &grid, moments);
                    Ok(())
                })
        };
        let timings: Vec<Result<MoverTimings>> = if nw == 1 {
            vec![move_one(&mut self.workers[0])]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .map(|w| scope.spawn(move || move_one(w)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker thread panicked"))
                    .collect()
            })
        };
        let mut mover_s: f64 = 0.0;
        let mut host_s: f64 = 0.0;
        for t in timings {
            let t = t?;
            mover_s = mover_s.max(t.mover_s);
            host_s = host_s.max(t.host_s);
        }

        let t = Instant::now();
        self.moments.clear();
        for w in &self.workers {
            self.moments.accumulate(&w.moments);
        }
        let moments_s = host_s + t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut all: Vec<Vec<ParticleBatch>> = self
            .workers
            .iter_mut()
            .map(|w| std::mem::take(&mut w.batches))
            .collect();
        let exchanged = exchange_particles(&mut all, &grid);
        for (w, b) in self.workers.iter_mut().zip(all) {
            w.batches = b;
        }
        exchanged?;
        let exchange_s = t.elapsed().as_secs_f64();

        Ok(CycleTimings {
            field_s,
            mover_s,
            moments_s,
            exchange_s,
        })
    }
}
