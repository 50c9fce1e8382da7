//! Initial particle distributions and fields.
//!
//! Every species draws from its own ChaCha stream (`stream = species id`)
//! seeded by the configuration seed, so initial states are bitwise
//! reproducible no matter how species are scheduled.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{GemParams, SimConfig};
use crate::error::{Error, Result};
use crate::fields::FieldMesh;
use crate::geometry::{wrap_periodic, Grid, Vec3};
use crate::particles::{ParticleBatch, Population, Species};

fn species_rng(seed: u64, species: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(species as u64);
    rng
}

fn maxwellian(rng: &mut ChaCha8Rng, s: &Species) -> Vec3 {
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let nz: f64 = rng.sample(StandardNormal);
    Vec3::new(
        s.u0.x + s.uth.x * nx,
        s.u0.y + s.uth.y * ny,
        s.u0.z + s.uth.z * nz,
    )
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// Samples one species: `ppc` candidates per cell, each accepted with
/// probability `accept(y)`.
fn sample_species(
    grid: &Grid,
    s: &Species,
    seed: u64,
    accept: impl Fn(f64) -> f64,
    rejection: bool,
) -> Result<ParticleBatch> {
    let mut rng = species_rng(seed, s.id);
    let mut batch = ParticleBatch::for_species(s, s.ppc * grid.cell_count());
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                for _ in 0..s.ppc {
                    let r: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                    let pos = wrap_periodic(
                        Vec3::new(
                            (i as f64 + r[0]) * grid.dx,
                            (j as f64 + r[1]) * grid.dy,
                            (k as f64 + r[2]) * grid.dz,
                        ),
                        grid,
                    );
                    if rejection {
                        let u: f64 = rng.random();
                        if u >= accept(pos.y) {
                            continue;
                        }
                    }
                    let vel = maxwellian(&mut rng, s);
                    batch.push(pos, vel)?;
                }
            }
        }
    }
    Ok(batch)
}

fn sample_all(
    grid: &Grid,
    species: &[Species],
    seed: u64,
    sheet: impl Fn(f64) -> f64 + Sync,
    honor_population: bool,
) -> Result<Vec<ParticleBatch>> {
    let sheet = &sheet;
    std::thread::scope(|scope| {
        let handles: Vec<_> = species
            .iter()
            .map(|s| {
                let rejection = honor_population && s.population == Population::Sheet;
                scope.spawn(move || sample_species(grid, s, seed, sheet, rejection))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("species initialization panicked"))
            .collect()
    })
}

/// Harris current sheet with a flux perturbation.
///
/// `Bx = b0·tanh((y−ly/2)/λ) + ∂ψ/∂y`, `By = −∂ψ/∂x` with
/// `ψ = psi0·cos(2πx/lx)·cos(π(y−ly/2)/ly)`, and `E = 0`. Sheet species are
/// rejection-sampled against `sech²((y−ly/2)/λ)`; background species are
/// uniform with exactly `ppc` particles per cell.
pub fn init_gem(cfg: &SimConfig, p: &GemParams) -> Result<(FieldMesh, Vec<ParticleBatch>)> {
    let species = cfg.species();
    if species.len() != 4 {
        return Err(Error::config(
            "species",
            format!("expected 4 species, got {}", species.len()),
        ));
    }
    let fields = gem_fields(&cfg.grid, p);
    let (ly, lambda) = (cfg.grid.ly, p.lambda);
    let batches = sample_all(
        &cfg.grid,
        &species,
        cfg.seed,
        move |y| sech2((y - ly / 2.0) / lambda),
        true,
    )?;
    Ok((fields, batches))
}

pub fn gem_fields(grid: &Grid, p: &GemParams) -> FieldMesh {
    let (lx, ly) = (grid.lx, grid.ly);
    FieldMesh::from_fn(grid, |pos| {
        let yc = pos.y - ly / 2.0;
        let kx = 2.0 * PI / lx;
        let ky = PI / ly;
        let dpsi_dy = -p.psi0 * (kx * pos.x).cos() * ky * (ky * yc).sin();
        let dpsi_dx = -p.psi0 * kx * (kx * pos.x).sin() * (ky * yc).cos();
        let b = Vec3::new(p.b0 * (yc / p.lambda).tanh() + dpsi_dy, -dpsi_dx, 0.0);
        (Vec3::ZERO, b)
    })
}

/// Constant fields and spatially uniform particles for every species.
pub fn init_uniform(
    cfg: &SimConfig,
    e0: Vec3,
    b0: Vec3,
) -> Result<(FieldMesh, Vec<ParticleBatch>)> {
    let fields = FieldMesh::uniform(&cfg.grid, e0, b0);
    let batches = sample_all(&cfg.grid, &cfg.species(), cfg.seed, |_| 1.0, false)?;
    Ok((fields, batches))
}

/// Expected sheet-species population: `ppc·nx·nz/dy · ∫ sech²((y−ly/2)/λ) dy`.
pub fn expected_sheet_count(cfg: &SimConfig) -> f64 {
    let g = &cfg.grid;
    let integral = 2.0 * cfg.gem.lambda * (g.ly / (2.0 * cfg.gem.lambda)).tanh();
    cfg.ppc as f64 * (g.nx * g.nz) as f64 * integral / g.dy
}
