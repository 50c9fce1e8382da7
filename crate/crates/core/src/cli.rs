//! Command-line interface and the flat `key = value` configuration format.
//!
//! Configuration keys mirror [`SimConfig`] field names. Grid and nested
//! settings use the names `nx ny nz lx ly lz`, `transfer.*` and `gem.*`.
//! An optional `preset` key (`default`, `desk`, `small`) picks the starting
//! point before the other keys apply, regardless of where it appears.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    phase_profile, ppc_sweep, run_bench, scaling_summary, scaling_sweep, summary_rows,
    write_bench_csv, write_profile_csv, write_summary_csv, BenchRecord, CycleRecord, ProfileRecord,
    SummaryRow,
};
use crate::config::{EngineSelect, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::offload::log_to_csv;
use crate::runtime::Simulation;

#[derive(Debug, Parser)]
#[command(
    name = "pic-offload",
    version,
    about = "Particle-in-cell cycle with offloaded particle movers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation and write per-cycle timings and device logs.
    Run(Flags),
    /// Benchmark each selected engine, worker count and ppc.
    Bench(Flags),
    /// Strong scaling over worker counts (default 1,2,4,8).
    Scale(Flags),
    /// Host-engine phase shares per ppc (default 27,64,125,216,343).
    Profile(Flags),
    /// Prefetch throughput for every (ppc, workers) pair.
    #[command(name = "ppc-sweep")]
    PpcSweep(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

/// Flags shared by all subcommands; each overrides the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// cpu, naive, pinned or prefetch; a comma-separated list for bench and scale
    #[arg(long, value_delimiter = ',')]
    pub engine: Vec<EngineSelect>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub workers: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub ppc: Vec<usize>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub throttle: Option<Toggle>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected on/off, got {value:?}"),
        )),
    }
}

/// Parses configuration text into `(key, value)` pairs.
fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", n + 1),
                format!("expected key = value, got {line:?}"),
            ));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn preset(name: &str) -> Result<SimConfig> {
    match name {
        "default" => Ok(SimConfig::default()),
        "desk" => Ok(SimConfig::desk()),
        "small" => Ok(SimConfig::small()),
        _ => Err(Error::config("preset", format!("unknown preset {name:?}"))),
    }
}

/// Applies configuration text on top of the defaults.
pub fn config_from_str(text: &str) -> Result<SimConfig> {
    let pairs = parse_pairs(text)?;
    let mut cfg = match pairs.iter().rev().find(|(k, _)| k == "preset") {
        Some((_, v)) => preset(v)?,
        None => SimConfig::default(),
    };
    let g = cfg.grid;
    let (mut n, mut l) = ([g.nx, g.ny, g.nz], [g.lx, g.ly, g.lz]);
    for (key, v) in &pairs {
        let k = key.as_str();
        match k {
            "preset" => {}
            "nx" => n[0] = parse_value(k, v)?,
            "ny" => n[1] = parse_value(k, v)?,
            "nz" => n[2] = parse_value(k, v)?,
            "lx" => l[0] = parse_value(k, v)?,
            "ly" => l[1] = parse_value(k, v)?,
            "lz" => l[2] = parse_value(k, v)?,
            "dt" => cfg.dt = parse_value(k, v)?,
            "ppc" => cfg.ppc = parse_value(k, v)?,
            "pc_iterations" => cfg.pc_iterations = parse_value(k, v)?,
            "cycles" => cfg.cycles = parse_value(k, v)?,
            "repetitions" => cfg.repetitions = parse_value(k, v)?,
            "seed" => cfg.seed = parse_value(k, v)?,
            "engine" => cfg.engine = parse_value(k, v)?,
            "workers" => cfg.workers = parse_value(k, v)?,
            "device_capacity_bytes" => cfg.device_capacity_bytes = parse_value(k, v)?,
            "uth_e" => cfg.uth_e = parse_value(k, v)?,
            "uth_i" => cfg.uth_i = parse_value(k, v)?,
            "field_passes" => cfg.field_passes = parse_value(k, v)?,
            "kernel_threads" => cfg.kernel_threads = parse_value(k, v)?,
            "pressure" => cfg.pressure = parse_bool(k, v)?,
            "transfer.bandwidth_bytes_per_s" => {
                cfg.transfer.bandwidth_bytes_per_s = parse_value(k, v)?
            }
            "transfer.per_call_latency_s" => cfg.transfer.per_call_latency_s = parse_value(k, v)?,
            "transfer.staging_penalty" => cfg.transfer.staging_penalty = parse_value(k, v)?,
            "transfer.throttle" => cfg.transfer.throttle = parse_bool(k, v)?,
            "gem.b0" => cfg.gem.b0 = parse_value(k, v)?,
            "gem.lambda" => cfg.gem.lambda = parse_value(k, v)?,
            "gem.nb_over_n0" => cfg.gem.nb_over_n0 = parse_value(k, v)?,
            "gem.psi0" => cfg.gem.psi0 = parse_value(k, v)?,
            "gem.ti_over_te" => cfg.gem.ti_over_te = parse_value(k, v)?,
            "gem.mass_ratio" => cfg.gem.mass_ratio = parse_value(k, v)?,
            _ => return Err(Error::config(k, "unknown configuration key")),
        }
    }
    cfg.grid = Grid::new(n[0], n[1], n[2], l[0], l[1], l[2])?;
    Ok(cfg)
}

/// Reads the configuration file (if any), applies flag overrides and
/// validates the result. List flags contribute their first entry.
pub fn parse_config(path: Option<&Path>, flags: &Flags) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config("config", format!("{}: {e}", p.display())))?;
            config_from_str(&text)?
        }
        None => SimConfig::default(),
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(&e) = flags.engine.first() {
        cfg.engine = e;
    }
    if let Some(&w) = flags.workers.first() {
        cfg.workers = w;
    }
    if let Some(&p) = flags.ppc.first() {
        cfg.ppc = p;
    }
    if let Some(c) = flags.cycles {
        cfg.cycles = c;
    }
    if let Some(r) = flags.reps {
        cfg.repetitions = r;
    }
    if let Some(t) = flags.throttle {
        cfg.transfer.throttle = t == Toggle::On;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list_or<T: Copy>(given: &[T], fallback: &[T]) -> Vec<T> {
    if given.is_empty() {
        fallback.to_vec()
    } else {
        given.to_vec()
    }
}

fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<9} {:>7} {:>5} {:>10} {:>9} {:>8} {:>10}\n",
        "engine", "workers", "ppc", "MPA/s", "stddev", "speedup", "efficiency"
    );
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
    for r in rows {
        let _ = writeln!(
            s,
            "{:<9} {:>7} {:>5} {:>10.4} {:>9.4} {:>8} {:>10}",
            r.engine.as_str(),
            r.workers,
            r.ppc,
            r.mpa,
            r.stddev,
            opt(r.speedup),
            opt(r.efficiency)
        );
    }
    s
}

fn profile_table(rows: &[ProfileRecord]) -> String {
    let mut s = format!(
        "{:>5} {:>8} {:>8} {:>9}\n",
        "ppc", "field%", "mover%", "moments%"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>5} {:>8.2} {:>8.2} {:>9.2}",
            r.ppc, r.field_pct, r.mover_pct, r.moments_pct
        );
    }
    s
}

fn run(flags: &Flags, cfg: &SimConfig) -> Result<String> {
    let mut sim = Simulation::new(cfg)?;
    let timings = sim.run(cfg.cycles)?;
    let record = BenchRecord {
        engine: cfg.engine,
        workers: cfg.workers,
        ppc: cfg.ppc,
        reps: 1,
        particles: sim.particle_count(),
        per_cycle_mover_s: vec![
            timings.iter().map(|t| t.mover_s).sum::<f64>() / timings.len() as f64,
        ],
        per_run_mpa: Vec::new(),
        mpa_per_s: 0.0,
        stddev: 0.0,
        cycles: timings
            .iter()
            .enumerate()
            .map(|(cycle, &t)| CycleRecord {
                engine: cfg.engine,
                workers: cfg.workers,
                ppc: cfg.ppc,
                rep: 0,
                cycle,
                t,
            })
            .collect(),
    };
    write_bench_csv(&flags.out.join("bench.csv"), std::slice::from_ref(&record))?;
    if cfg.engine != EngineSelect::Cpu {
        for w in 0..cfg.workers {
            std::fs::write(
                flags.out.join(format!("executor_{w}.csv")),
                log_to_csv(&sim.engine_log(w)),
            )?;
        }
    }
    let mut s = format!(
        "{} particles, {} cycles, engine {}, {} worker(s)\n{:>5} {:>10} {:>10} {:>10} {:>10}\n",
        record.particles,
        cfg.cycles,
        cfg.engine,
        cfg.workers,
        "cycle",
        "field_s",
        "mover_s",
        "moments_s",
        "exchange_s"
    );
    for (c, t) in timings.iter().enumerate() {
        let _ = writeln!(
            s,
            "{c:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            t.field_s, t.mover_s, t.moments_s, t.exchange_s
        );
    }
    let mean = record.per_cycle_mover_s[0];
    if mean > 0.0 {
        let _ = writeln!(s, "MPA/s {:.4}", crate::bench::mpa(record.particles, mean)?);
    }
    Ok(s)
}

fn execute(command: &Command) -> Result<String> {
    let flags = match command {
        Command::Run(f)
        | Command::Bench(f)
        | Command::Scale(f)
        | Command::Profile(f)
        | Command::PpcSweep(f) => f,
    };
    let cfg = parse_config(flags.config.as_deref(), flags)?;
    let workers = list_or(&flags.workers, &[cfg.workers]);
    let ppcs = list_or(&flags.ppc, &[cfg.ppc]);
    for &w in &workers {
        cfg.validate_workers(w)?;
    }
    std::fs::create_dir_all(&flags.out)?;
    let out = |name: &str| flags.out.join(name);
    match command {
        Command::Run(_) => run(flags, &cfg),
        Command::Bench(_) => {
            let engines = list_or(&flags.engine, &[cfg.engine]);
            let mut records = Vec::new();
            for &engine in &engines {
                for &workers in &workers {
                    for &ppc in &ppcs {
                        records.push(run_bench(&SimConfig {
                            engine,
                            workers,
                            ppc,
                            ..cfg.clone()
                        })?);
                    }
                }
            }
            let rows = summary_rows(&records);
            write_bench_csv(&out("bench.csv"), &records)?;
            write_summary_csv(&out("summary.csv"), &rows)?;
            Ok(summary_table(&rows))
        }
        Command::Scale(_) => {
            let counts = list_or(&flags.workers, &[1, 2, 4, 8]);
            let engines = list_or(&flags.engine, &[cfg.engine]);
            let mut records = Vec::new();
            let mut rows = Vec::new();
            for &engine in &engines {
                let (r, s) = scaling_sweep(&cfg, engine, &counts)?;
                rows.extend(scaling_summary(&r, &s));
                records.extend(r);
            }
            write_bench_csv(&out("bench.csv"), &records)?;
            write_summary_csv(&out("summary.csv"), &rows)?;
            Ok(summary_table(&rows))
        }
        Command::Profile(_) => {
            let list = list_or(&flags.ppc, &[27, 64, 125, 216, 343]);
            let (records, profile) = phase_profile(&cfg, &list)?;
            write_bench_csv(&out("bench.csv"), &records)?;
            write_profile_csv(&out("profile.csv"), &profile)?;
            Ok(profile_table(&profile))
        }
        Command::PpcSweep(_) => {
            let list = list_or(&flags.ppc, &[27, 64, 125, 216, 343]);
            let records = ppc_sweep(&cfg, &list, &workers)?;
            let rows = summary_rows(&records);
            write_bench_csv(&out("bench.csv"), &records)?;
            write_summary_csv(&out("summary.csv"), &rows)?;
            Ok(summary_table(&rows))
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 on a runtime fault, 2 on a usage or configuration
/// error.
pub fn run_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}
