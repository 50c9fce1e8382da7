//! Simulation configuration with documented defaults.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Vec3};
use crate::offload::TransferModel;
use crate::particles::{Population, Species};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_190_501;

/// Mover execution strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineSelect {
    /// Mover on the host, no offload boundary.
    Cpu,
    /// Blocking pageable transfers.
    Naive,
    /// Blocking pinned transfers.
    Pinned,
    /// Pinned transfers overlapped with host work.
    Prefetch,
}

impl EngineSelect {
    pub const ALL: [EngineSelect; 4] = [
        EngineSelect::Cpu,
        EngineSelect::Naive,
        EngineSelect::Pinned,
        EngineSelect::Prefetch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EngineSelect::Cpu => "cpu",
            EngineSelect::Naive => "naive",
            EngineSelect::Pinned => "pinned",
            EngineSelect::Prefetch => "prefetch",
        }
    }
}

impl fmt::Display for EngineSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineSelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpu" => Ok(EngineSelect::Cpu),
            "naive" => Ok(EngineSelect::Naive),
            "pinned" => Ok(EngineSelect::Pinned),
            "prefetch" => Ok(EngineSelect::Prefetch),
            other => Err(Error::config("engine", format!("unknown engine `{other}`"))),
        }
    }
}

/// Harris-sheet reconnection setup parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GemParams {
    pub b0: f64,
    /// Sheet half-thickness.
    pub lambda: f64,
    pub nb_over_n0: f64,
    /// Flux perturbation amplitude.
    pub psi0: f64,
    pub ti_over_te: f64,
    pub mass_ratio: f64,
}

impl Default for GemParams {
    fn default() -> Self {
        GemParams {
            b0: 1.0,
            lambda: 0.5,
            nb_over_n0: 0.2,
            psi0: 0.1,
            ti_over_te: 5.0,
            mass_ratio: 25.0,
        }
    }
}

impl GemParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let positive = [
            ("b0", self.b0),
            ("lambda", self.lambda),
            ("nb_over_n0", self.nb_over_n0),
            ("ti_over_te", self.ti_over_te),
            ("mass_ratio", self.mass_ratio),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.psi0.is_finite() && self.psi0 >= 0.0) {
            return Err(Error::config("psi0", "must be non-negative"));
        }
        if self.lambda >= grid.ly / 2.0 {
            return Err(Error::config(
                "lambda",
                "sheet must be thinner than half the box",
            ));
        }
        Ok(())
    }

    /// Ion drift along z carrying the Harris current `J = (∇×B)/4π` with
    /// peak sheet density 1.
    pub fn ion_drift(&self) -> f64 {
        -(self.b0 / self.lambda) / (4.0 * PI * (1.0 + 1.0 / self.ti_over_te))
    }

    pub fn electron_drift(&self) -> f64 {
        -self.ion_drift() / self.ti_over_te
    }
}

/// Complete, validated description of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid,
    pub dt: f64,
    /// Particles per cell for every species.
    pub ppc: usize,
    pub pc_iterations: usize,
    pub cycles: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub engine: EngineSelect,
    pub workers: usize,
    pub transfer: TransferModel,
    pub device_capacity_bytes: u64,
    pub gem: GemParams,
    pub uth_e: f64,
    pub uth_i: f64,
    /// Smoothing passes of the field-phase stand-in.
    pub field_passes: usize,
    /// Threads the device executor uses for the mover kernel.
    pub kernel_threads: usize,
    /// Accumulate the pressure tensor with the moments.
    pub pressure: bool,
}

impl Default for SimConfig {
    /// Full-scale benchmark: 64×64×32 cells, 4 species, 216 ppc.
    fn default() -> Self {
        SimConfig {
            grid: Grid::new(64, 64, 32, 25.6, 12.8, 6.4).expect("default grid"),
            dt: 0.125,
            ppc: 216,
            pc_iterations: 3,
            cycles: 10,
            repetitions: 6,
            seed: DEFAULT_SEED,
            engine: EngineSelect::Prefetch,
            workers: 1,
            transfer: TransferModel::default(),
            device_capacity_bytes: 1 << 30,
            gem: GemParams::default(),
            uth_e: 0.045,
            uth_i: 0.0126,
            field_passes: DEFAULT_FIELD_PASSES,
            kernel_threads: 1,
            pressure: false,
        }
    }
}

/// Field-phase smoothing passes; sized so the stand-in takes a few percent
/// of the cycle at low particle counts and well under one percent at high.
pub const DEFAULT_FIELD_PASSES: usize = 90;

impl SimConfig {
    /// 1/16-scale benchmark: 32×32×16 cells, 64 ppc, same box.
    pub fn desk() -> Self {
        let d = SimConfig::default();
        SimConfig {
            grid: Grid::new(32, 32, 16, d.grid.lx, d.grid.ly, d.grid.lz).expect("desk grid"),
            ppc: 64,
            ..d
        }
    }

    /// Small deterministic run used by equivalence checks: 8×8×8 cells, 8 ppc.
    pub fn small() -> Self {
        let d = SimConfig::default();
        SimConfig {
            grid: Grid::new(8, 8, 8, 6.4, 6.4, 6.4).expect("small grid"),
            ppc: 8,
            cycles: 5,
            repetitions: 2,
            gem: GemParams {
                lambda: 0.8,
                ..GemParams::default()
            },
            field_passes: 2,
            device_capacity_bytes: 64 << 20,
            ..d
        }
    }

    /// Replaces the grid cell counts, keeping the box lengths.
    pub fn with_cells(mut self, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        self.grid = Grid::new(nx, ny, nz, self.grid.lx, self.grid.ly, self.grid.lz)?;
        Ok(self)
    }

    /// The four species: sheet electrons, sheet ions, background electrons,
    /// background ions. Macro-charges give peak sheet density 1 and background
    /// density `nb_over_n0`.
    pub fn species(&self) -> Vec<Species> {
        let g = &self.gem;
        let vol = self.grid.cell_volume();
        let ppc = self.ppc.max(1) as f64;
        let q_sheet = vol / ppc;
        let q_bg = g.nb_over_n0 * vol / ppc;
        let iso = |u: f64| Vec3::new(u, u, u);
        let mk = |id, qom, q, uth, u0, population| Species {
            id,
            qom,
            q_per_particle: q,
            ppc: self.ppc,
            uth,
            u0,
            population,
        };
        vec![
            mk(
                0,
                -g.mass_ratio,
                -q_sheet,
                iso(self.uth_e),
                Vec3::new(0.0, 0.0, g.electron_drift()),
                Population::Sheet,
            ),
            mk(
                1,
                1.0,
                q_sheet,
                iso(self.uth_i),
                Vec3::new(0.0, 0.0, g.ion_drift()),
                Population::Sheet,
            ),
            mk(
                2,
                -g.mass_ratio,
                -q_bg,
                iso(self.uth_e),
                Vec3::ZERO,
                Population::Background,
            ),
            mk(
                3,
                1.0,
                q_bg,
                iso(self.uth_i),
                Vec3::ZERO,
                Population::Background,
            ),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        if self.ppc == 0 {
            return Err(Error::config("ppc", "must be at least 1"));
        }
        if self.pc_iterations == 0 {
            return Err(Error::config("pc_iterations", "must be at least 1"));
        }
        if self.cycles == 0 {
            return Err(Error::config("cycles", "must be at least 1"));
        }
        if self.repetitions < 2 {
            return Err(Error::config(
                "repetitions",
                "need a warmup run plus at least one more",
            ));
        }
        if self.kernel_threads == 0 {
            return Err(Error::config("kernel_threads", "must be at least 1"));
        }
        self.validate_workers(self.workers)?;
        self.transfer.validate()?;
        if self.device_capacity_bytes == 0 {
            return Err(Error::config("device_capacity_bytes", "must be positive"));
        }
        for (key, u) in [("uth_e", self.uth_e), ("uth_i", self.uth_i)] {
            if !(u.is_finite() && u >= 0.0) {
                return Err(Error::config(key, "must be non-negative"));
            }
        }
        self.gem.validate(&self.grid)
    }

    /// A worker count is usable when it splits `ny` into equal slabs of at
    /// least two cells.
    pub fn validate_workers(&self, workers: usize) -> Result<()> {
        let ny = self.grid.ny;
        if workers == 0 || ny % workers != 0 {
            return Err(Error::config(
                "workers",
                format!("{workers} workers do not divide ny={ny}"),
            ));
        }
        if ny / workers < 2 {
            return Err(Error::config(
                "workers",
                format!("{workers} workers leave slabs thinner than 2 cells"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_benchmark_setup() {
        let c = SimConfig::default();
        assert_eq!((c.grid.nx, c.grid.ny, c.grid.nz), (64, 64, 32));
        assert_eq!(c.ppc, 216);
        assert_eq!(c.pc_iterations, 3);
        assert_eq!(c.cycles, 10);
        assert_eq!(c.repetitions, 6);
        assert_eq!(c.species().len(), 4);
        c.validate().unwrap();
        SimConfig::desk().validate().unwrap();
        SimConfig::small().validate().unwrap();
    }

    #[test]
    fn worker_validation_names_key() {
        let c = SimConfig {
            workers: 5,
            ..SimConfig::default()
        };
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "workers"),
            other => panic!("expected config error, got {other:?}"),
        }
        assert!(c.validate_workers(8).is_ok());
        assert!(c.validate_workers(64).is_err());
    }

    #[test]
    fn harris_drifts_carry_the_sheet_current() {
        let g = GemParams::default();
        // J = n (u_i - u_e) must equal -(b0/lambda)/(4 pi) at the sheet center
        let j = g.ion_drift() - g.electron_drift();
        assert!((j + g.b0 / g.lambda / (4.0 * PI)).abs() < 1e-15);
        assert!((g.electron_drift() / g.ion_drift() + 1.0 / g.ti_over_te).abs() < 1e-15);
    }

    #[test]
    fn engine_names_round_trip() {
        for e in EngineSelect::ALL {
            assert_eq!(e.as_str().parse::<EngineSelect>().unwrap(), e);
        }
        assert!("gpu".parse::<EngineSelect>().is_err());
    }
}
