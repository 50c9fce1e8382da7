//! Semi-implicit predictor-corrector particle mover.

use crate::error::{Error, Result};
use crate::fields::{FieldMesh, NodeFields};
use crate::geometry::{wrap_axis, Grid, Vec3};
use crate::kernels::interp::gather_at;
use crate::particles::{ParticleBatch, SoaMut};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoverParams {
    pub dt: f64,
    pub qom: f64,
    pub pc_iterations: usize,
    /// `qom·dt/2`
    pub beta: f64,
}

impl MoverParams {
    pub fn new(dt: f64, qom: f64, pc_iterations: usize) -> Result<Self> {
        let beta = qom * dt / 2.0;
        if !beta.is_finite() {
            return Err(Error::config("dt", "qom·dt/2 is not finite"));
        }
        if pc_iterations == 0 {
            return Err(Error::config("pc_iterations", "must be at least 1"));
        }
        Ok(MoverParams {
            dt,
            qom,
            pc_iterations,
            beta,
        })
    }
}

/// Time-centered velocity from the implicit half-step rotation:
/// `ṽ = vⁿ + β·E`, `v̄ = (ṽ + β·ṽ×B + β²·(ṽ·B)·B) / (1 + β²·|B|²)`.
#[inline(always)]
pub fn implicit_velocity(vn: Vec3, ep: Vec3, bp: Vec3, mp: &MoverParams) -> Vec3 {
    let beta = mp.beta;
    let vt = vn + ep * beta;
    let num = vt + vt.cross(bp) * beta + bp * (beta * beta * vt.dot(bp));
    num * (1.0 / (1.0 + beta * beta * bp.norm_sq()))
}

#[inline(always)]
fn wrap(p: Vec3, g: &Grid) -> Vec3 {
    Vec3::new(
        wrap_axis(p.x, g.lx),
        wrap_axis(p.y, g.ly),
        wrap_axis(p.z, g.lz),
    )
}

#[inline(always)]
fn advance_one<F: NodeFields + ?Sized>(
    xn: Vec3,
    vn: Vec3,
    fields: &F,
    grid: &Grid,
    mp: &MoverParams,
) -> (Vec3, Vec3) {
    let half = mp.dt / 2.0;
    let mut xt = xn;
    let mut vbar = vn;
    for _ in 0..mp.pc_iterations {
        let (ep, bp) = gather_at(fields, xt, grid);
        vbar = implicit_velocity(vn, ep, bp, mp);
        xt = wrap(xn + vbar * half, grid);
    }
    (wrap(xn + vbar * mp.dt, grid), vbar * 2.0 - vn)
}

/// Advances every particle in `soa` by one step; particles are independent.
///
/// Returns a numerical fault naming the first particle whose new state is
/// not finite. Particles before it have already been updated.
pub fn move_particles<F: NodeFields + ?Sized>(
    soa: SoaMut<'_>,
    fields: &F,
    grid: &Grid,
    mp: &MoverParams,
    species: usize,
) -> Result<()> {
    let SoaMut { x, y, z, u, v, w } = soa;
    let n = x.len();
    let (y, z, u, v, w) = (
        &mut y[..n],
        &mut z[..n],
        &mut u[..n],
        &mut v[..n],
        &mut w[..n],
    );
    for p in 0..n {
        let xn = Vec3::new(x[p], y[p], z[p]);
        let vn = Vec3::new(u[p], v[p], w[p]);
        let (x1, v1) = advance_one(xn, vn, fields, grid, mp);
        if !(x1.is_finite() && v1.is_finite()) {
            return Err(Error::NumericalFault { species, index: p });
        }
        x[p] = x1.x;
        y[p] = x1.y;
        z[p] = x1.z;
        u[p] = v1.x;
        v[p] = v1.y;
        w[p] = v1.z;
    }
    Ok(())
}

/// Splits the arrays into `threads` contiguous chunks moved concurrently.
pub(crate) fn move_particles_threaded<F: NodeFields + Sync + ?Sized>(
    soa: SoaMut<'_>,
    fields: &F,
    grid: &Grid,
    mp: &MoverParams,
    species: usize,
    threads: usize,
) -> Result<()> {
    let n = soa.len();
    if threads <= 1 || n < 2 * threads {
        return move_particles(soa, fields, grid, mp, species);
    }
    let chunk = n.div_ceil(threads);
    let SoaMut { x, y, z, u, v, w } = soa;
    std::thread::scope(|scope| {
        let handles: Vec<_> =
            x.chunks_mut(chunk)
                .zip(y.chunks_mut(chunk))
                .zip(z.chunks_mut(chunk))
                .zip(u.chunks_mut(chunk))
                .zip(v.chunks_mut(chunk))
                .zip(w.chunks_mut(chunk))
                .enumerate()
                .map(|(t, (((((x, y), z), u), v), w))| {
                    scope.spawn(move || {
                        move_particles(SoaMut { x, y, z, u, v, w }, fields, grid, mp, species)
                            .map_err(|e| match e {
                                Error::NumericalFault { species, index } => Error::NumericalFault {
                                    species,
                                    index: index + t * chunk,
                                },
                                other => other,
                            })
                    })
                })
                .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("mover thread panicked"))
            .collect::<Result<Vec<()>>>()
            .map(|_| ())
    })
}

/// Host-side mover over a whole batch.
pub fn move_batch(
    batch: &mut ParticleBatch,
    mesh: &FieldMesh,
    grid: &Grid,
    mp: &MoverParams,
) -> Result<()> {
    let species = batch.species();
    move_particles(batch.soa_mut(), mesh, grid, mp, species)
}
