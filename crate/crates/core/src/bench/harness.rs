//! Benchmark drivers and their CSV outputs.

use std::path::Path;

use crate::bench::metrics::{aggregate_runs, mpa_from_cycles, speedup_efficiency};
use crate::config::{EngineSelect, SimConfig};
use crate::error::{Error, Result};
use crate::init::init_gem;
use crate::runtime::{CycleTimings, Simulation};

/// Runs excluded from statistics at the start of every benchmark.
pub const WARMUP_RUNS: usize = 1;

/// One row of `bench.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub engine: EngineSelect,
    pub workers: usize,
    pub ppc: usize,
    pub rep: usize,
    pub cycle: usize,
    pub t: CycleTimings,
}

/// All repetitions of one (engine, workers, ppc) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub engine: EngineSelect,
    pub workers: usize,
    pub ppc: usize,
    pub reps: usize,
    pub particles: usize,
    /// Mean mover time per cycle of each repetition, warmup included.
    pub per_cycle_mover_s: Vec<f64>,
    pub per_run_mpa: Vec<f64>,
    /// Harmonic mean over retained repetitions.
    pub mpa_per_s: f64,
    pub stddev: f64,
    pub cycles: Vec<CycleRecord>,
}

impl BenchRecord {
    /// Cycle records of the repetitions that count towards statistics.
    pub fn retained(&self) -> impl Iterator<Item = &CycleRecord> {
        self.cycles.iter().filter(|c| c.rep >= WARMUP_RUNS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub engine: EngineSelect,
    pub n_workers: usize,
    pub perf: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

/// One row of `summary.csv`. Speedup and efficiency are present when a
/// one-worker run of the same engine and ppc is available.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub engine: EngineSelect,
    pub workers: usize,
    pub ppc: usize,
    pub mpa: f64,
    pub stddev: f64,
    pub speedup: Option<f64>,
    pub efficiency: Option<f64>,
}

/// One row of `profile.csv`: share of cycle time per phase, in percent.
/// Particle exchange is not counted.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub ppc: usize,
    pub field_pct: f64,
    pub mover_pct: f64,
    pub moments_pct: f64,
}

/// Benchmarks `cfg` as given: `cfg.repetitions` fresh simulations of
/// `cfg.cycles` cycles each, all from the same initial state.
pub fn run_bench(cfg: &SimConfig) -> Result<BenchRecord> {
    cfg.validate()?;
    let (fields, batches) = init_gem(cfg, &cfg.gem)?;
    let mut cycles = Vec::with_capacity(cfg.repetitions * cfg.cycles);
    let mut per_cycle_mover_s = Vec::with_capacity(cfg.repetitions);
    let mut per_run_mpa = Vec::with_capacity(cfg.repetitions);
    let mut particles = 0;
    for rep in 0..cfg.repetitions {
        let mut sim = Simulation::from_state(cfg, fields.clone(), &batches)?;
        particles = sim.particle_count();
        let timings = sim.run(cfg.cycles)?;
        let mover: Vec<f64> = timings.iter().map(|t| t.mover_s).collect();
        per_cycle_mover_s.push(mover.iter().sum::<f64>() / mover.len() as f64);
        per_run_mpa.push(mpa_from_cycles(particles, &mover)?);
        cycles.extend(
            timings
                .into_iter()
                .enumerate()
                .map(|(cycle, t)| CycleRecord {
                    engine: cfg.engine,
                    workers: cfg.workers,
                    ppc: cfg.ppc,
                    rep,
                    cycle,
                    t,
                }),
        );
    }
    let (mpa_per_s, stddev) = aggregate_runs(&per_run_mpa, WARMUP_RUNS)?;
    Ok(BenchRecord {
        engine: cfg.engine,
        workers: cfg.workers,
        ppc: cfg.ppc,
        reps: cfg.repetitions,
        particles,
        per_cycle_mover_s,
        per_run_mpa,
        mpa_per_s,
        stddev,
        cycles,
    })
}

fn check_workers(cfg: &SimConfig, counts: &[usize]) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::config("workers", "empty worker list"));
    }
    counts.iter().try_for_each(|&n| cfg.validate_workers(n))
}

/// Strong scaling: the same global problem on each worker count.
/// Speedups are relative to one worker, which is run even when not listed.
pub fn scaling_sweep(
    cfg: &SimConfig,
    engine: EngineSelect,
    worker_counts: &[usize],
) -> Result<(Vec<BenchRecord>, Vec<ScalingRecord>)> {
    check_workers(cfg, worker_counts)?;
    let bench_for = |n: usize| {
        run_bench(&SimConfig {
            engine,
            workers: n,
            ..cfg.clone()
        })
    };
    let mut records = Vec::with_capacity(worker_counts.len());
    for &n in worker_counts {
        records.push(bench_for(n)?);
    }
    let base = match records.iter().find(|r| r.workers == 1) {
        Some(r) => r.mpa_per_s,
        None => bench_for(1)?.mpa_per_s,
    };
    let scaling = records
        .iter()
        .map(|r| {
            let (speedup, efficiency) = speedup_efficiency(base, r.mpa_per_s, r.workers)?;
            Ok(ScalingRecord {
                engine,
                n_workers: r.workers,
                perf: r.mpa_per_s,
                speedup,
                efficiency,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, scaling))
}

/// Phase shares of a benchmark's retained cycles.
pub fn profile_of(record: &BenchRecord) -> ProfileRecord {
    let (mut f, mut m, mut d) = (0.0, 0.0, 0.0);
    for c in record.retained() {
        f += c.t.field_s;
        m += c.t.mover_s;
        d += c.t.moments_s;
    }
    let total = f + m + d;
    let pct = |x: f64| if total > 0.0 { 100.0 * x / total } else { 0.0 };
    ProfileRecord {
        ppc: record.ppc,
        field_pct: pct(f),
        mover_pct: pct(m),
        moments_pct: pct(d),
    }
}

/// Host-engine phase profile at each particles-per-cell value.
pub fn phase_profile(
    cfg: &SimConfig,
    ppc_list: &[usize],
) -> Result<(Vec<BenchRecord>, Vec<ProfileRecord>)> {
    if let Some(bad) = ppc_list.iter().find(|&&p| p == 0) {
        return Err(Error::config(
            "ppc",
            format!("{bad} is not a valid particle count"),
        ));
    }
    let mut records = Vec::with_capacity(ppc_list.len());
    for &ppc in ppc_list {
        records.push(run_bench(&SimConfig {
            ppc,
            engine: EngineSelect::Cpu,
            ..cfg.clone()
        })?);
    }
    let profiles = records.iter().map(profile_of).collect();
    Ok((records, profiles))
}

/// Prefetch-engine throughput for every (ppc, workers) pair.
pub fn ppc_sweep(
    cfg: &SimConfig,
    ppc_list: &[usize],
    worker_counts: &[usize],
) -> Result<Vec<BenchRecord>> {
    check_workers(cfg, worker_counts)?;
    let mut out = Vec::with_capacity(ppc_list.len() * worker_counts.len());
    for &ppc in ppc_list {
        for &workers in worker_counts {
            out.push(run_bench(&SimConfig {
                ppc,
                workers,
                engine: EngineSelect::Prefetch,
                ..cfg.clone()
            })?);
        }
    }
    Ok(out)
}

/// Summary rows, with speedup relative to the one-worker record of the
/// same engine and ppc when the set contains one.
pub fn summary_rows(records: &[BenchRecord]) -> Vec<SummaryRow> {
    records
        .iter()
        .map(|r| {
            let base = records
                .iter()
                .find(|b| b.workers == 1 && b.engine == r.engine && b.ppc == r.ppc);
            let se =
                base.and_then(|b| speedup_efficiency(b.mpa_per_s, r.mpa_per_s, r.workers).ok());
            SummaryRow {
                engine: r.engine,
                workers: r.workers,
                ppc: r.ppc,
                mpa: r.mpa_per_s,
                stddev: r.stddev,
                speedup: se.map(|x| x.0),
                efficiency: se.map(|x| x.1),
            }
        })
        .collect()
}

/// Summary rows for a scaling sweep, including the baseline-derived
/// speedups even when one worker was not listed.
pub fn scaling_summary(records: &[BenchRecord], scaling: &[ScalingRecord]) -> Vec<SummaryRow> {
    records
        .iter()
        .zip(scaling)
        .map(|(r, s)| SummaryRow {
            engine: r.engine,
            workers: r.workers,
            ppc: r.ppc,
            mpa: r.mpa_per_s,
            stddev: r.stddev,
            speedup: Some(s.speedup),
            efficiency: Some(s.efficiency),
        })
        .collect()
}

pub const BENCH_HEADER: [&str; 9] = [
    "engine",
    "workers",
    "ppc",
    "rep",
    "cycle",
    "t_field",
    "t_mover",
    "t_moments",
    "t_exchange",
];
pub const SUMMARY_HEADER: [&str; 7] = [
    "engine",
    "workers",
    "ppc",
    "mpa",
    "stddev",
    "speedup",
    "efficiency",
];
pub const PROFILE_HEADER: [&str; 4] = ["ppc", "field_pct", "mover_pct", "moments_pct"];

fn secs(x: f64) -> String {
    format!("{x:.9}")
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let rows = records.iter().flat_map(|r| &r.cycles).map(|c| {
        vec![
            c.engine.to_string(),
            c.workers.to_string(),
            c.ppc.to_string(),
            c.rep.to_string(),
            c.cycle.to_string(),
            secs(c.t.field_s),
            secs(c.t.mover_s),
            secs(c.t.moments_s),
            secs(c.t.exchange_s),
        ]
    });
    write_rows(path, &BENCH_HEADER, rows)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    let rows = rows.iter().map(|r| {
        vec![
            r.engine.to_string(),
            r.workers.to_string(),
            r.ppc.to_string(),
            format!("{:.4}", r.mpa),
            format!("{:.4}", r.stddev),
            opt(r.speedup),
            opt(r.efficiency),
        ]
    });
    write_rows(path, &SUMMARY_HEADER, rows)
}

pub fn write_profile_csv(path: &Path, rows: &[ProfileRecord]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.ppc.to_string(),
            format!("{:.2}", r.field_pct),
            format!("{:.2}", r.mover_pct),
            format!("{:.2}", r.moments_pct),
        ]
    });
    write_rows(path, &PROFILE_HEADER, rows)
}
