//! Python bindings for the `pic_offload` crate.

use pic_offload::bench::{
    aggregate_runs as agg, mpa as mpa_rs, run_bench, speedup_efficiency as se,
};
use pic_offload::cli::{config_from_str, parse_config, Flags};
use pic_offload::runtime::Simulation as RsSimulation;
use pic_offload::{EngineSelect, Error, SimConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Simulation configuration. Presets: "default", "desk", "small".
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: SimConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (preset = "default"))]
    fn new(preset: &str) -> PyResult<Self> {
        let inner = config_from_str(&format!("preset = {preset}")).map_err(to_py)?;
        Ok(Config { inner })
    }

    /// Reads a `key = value` configuration file.
    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let inner = parse_config(Some(&path), &Flags::default()).map_err(to_py)?;
        Ok(Config { inner })
    }

    /// Parses configuration text in the file format.
    #[staticmethod]
    fn from_str(text: &str) -> PyResult<Self> {
        Ok(Config {
            inner: config_from_str(text).map_err(to_py)?,
        })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn cells(&self) -> (usize, usize, usize) {
        let g = &self.inner.grid;
        (g.nx, g.ny, g.nz)
    }

    #[getter]
    fn engine(&self) -> String {
        self.inner.engine.to_string()
    }

    #[setter]
    fn set_engine(&mut self, name: &str) -> PyResult<()> {
        self.inner.engine = name.parse::<EngineSelect>().map_err(to_py)?;
        Ok(())
    }

    #[getter]
    fn ppc(&self) -> usize {
        self.inner.ppc
    }

    #[setter]
    fn set_ppc(&mut self, v: usize) {
        self.inner.ppc = v;
    }

    #[getter]
    fn workers(&self) -> usize {
        self.inner.workers
    }

    #[setter]
    fn set_workers(&mut self, v: usize) {
        self.inner.workers = v;
    }

    #[getter]
    fn cycles(&self) -> usize {
        self.inner.cycles
    }

    #[setter]
    fn set_cycles(&mut self, v: usize) {
        self.inner.cycles = v;
    }

    #[getter]
    fn repetitions(&self) -> usize {
        self.inner.repetitions
    }

    #[setter]
    fn set_repetitions(&mut self, v: usize) {
        self.inner.repetitions = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn throttle(&self) -> bool {
        self.inner.transfer.throttle
    }

    #[setter]
    fn set_throttle(&mut self, v: bool) {
        self.inner.transfer.throttle = v;
    }

    fn __repr__(&self) -> String {
        let (nx, ny, nz) = self.cells();
        format!(
            "Config(cells={nx}x{ny}x{nz}, ppc={}, engine={}, workers={}, cycles={})",
            self.inner.ppc, self.inner.engine, self.inner.workers, self.inner.cycles
        )
    }
}

#[pyclass(name = "Simulation", unsendable)]
struct Simulation {
    inner: RsSimulation,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(config: &Config) -> PyResult<Self> {
        Ok(Simulation {
            inner: RsSimulation::new(&config.inner).map_err(to_py)?,
        })
    }

    /// Runs `cycles` cycles; returns one timing dict per cycle.
    fn run<'py>(&mut self, py: Python<'py>, cycles: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let timings = self.inner.run(cycles).map_err(to_py)?;
        timings
            .iter()
            .map(|t| {
                let d = PyDict::new(py);
                d.set_item("field_s", t.field_s)?;
                d.set_item("mover_s", t.mover_s)?;
                d.set_item("moments_s", t.moments_s)?;
                d.set_item("exchange_s", t.exchange_s)?;
                Ok(d)
            })
            .collect()
    }

    #[getter]
    fn particle_count(&self) -> usize {
        self.inner.particle_count()
    }

    #[getter]
    fn cycles_done(&self) -> usize {
        self.inner.cycles_done()
    }

    /// `(x, y, z, vx, vy, vz)` of every particle of `species`, gathered
    /// over workers.
    fn particles(&self, species: usize) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
        let all = self.inner.gather_particles();
        let b = all
            .get(species)
            .ok_or_else(|| PyValueError::new_err(format!("no species {species}")))?;
        Ok((0..b.len())
            .map(|p| {
                let (x, v) = (b.position(p), b.velocity(p));
                (x.x, x.y, x.z, v.x, v.y, v.z)
            })
            .collect())
    }

    /// Total deposited charge of the last cycle.
    fn total_charge(&self) -> f64 {
        self.inner.moments().total_charge(&self.inner.config().grid)
    }
}

/// Benchmarks a configuration; returns MPA/s statistics.
#[pyfunction]
#[pyo3(name = "bench")]
fn run_benchmark<'py>(py: Python<'py>, config: &Config) -> PyResult<Bound<'py, PyDict>> {
    let r = run_bench(&config.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("engine", r.engine.to_string())?;
    d.set_item("particles", r.particles)?;
    d.set_item("mpa", r.mpa_per_s)?;
    d.set_item("stddev", r.stddev)?;
    d.set_item("per_run_mpa", r.per_run_mpa)?;
    d.set_item("per_cycle_mover_s", r.per_cycle_mover_s)?;
    Ok(d)
}

#[pyfunction]
fn mpa(particles: usize, mean_mover_s: f64) -> PyResult<f64> {
    mpa_rs(particles, mean_mover_s).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (per_run_mpa, warmup = 1))]
fn aggregate_runs(per_run_mpa: Vec<f64>, warmup: usize) -> PyResult<(f64, f64)> {
    agg(&per_run_mpa, warmup).map_err(to_py)
}

#[pyfunction]
fn speedup_efficiency(perf_1: f64, perf_n: f64, n: usize) -> PyResult<(f64, f64)> {
    se(perf_1, perf_n, n).map_err(to_py)
}

#[pymodule]
fn picoffload(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(mpa, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_runs, m)?)?;
    m.add_function(wrap_pyfunction!(speedup_efficiency, m)?)?;
    Ok(())
}
