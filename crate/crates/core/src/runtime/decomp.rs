//! Slab decomposition along y and particle exchange between slabs.

use crate::error::{Error, Result};
use crate::geometry::{axis_cell, Grid};
use crate::particles::ParticleBatch;

/// The part of the domain one worker owns: all x and z, and cells
/// `j_lo..j_hi` in y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subdomain {
    pub worker: usize,
    pub workers: usize,
    pub j_lo: usize,
    pub j_hi: usize,
    pub y_lo: f64,
    pub y_hi: f64,
}

/// Splits `ny` cells into `workers` equal slabs of at least two cells.
pub fn decompose(grid: &Grid, workers: usize) -> Result<Vec<Subdomain>> {
    if workers == 0 || grid.ny % workers != 0 {
        return Err(Error::config(
            "workers",
            format!("{workers} workers do not divide ny={}", grid.ny),
        ));
    }
    let cells = grid.ny / workers;
    if cells < 2 {
        return Err(Error::config(
            "workers",
            format!("{workers} workers leave slabs thinner than 2 cells"),
        ));
    }
    Ok((0..workers)
        .map(|w| Subdomain {
            worker: w,
            workers,
            j_lo: w * cells,
            j_hi: (w + 1) * cells,
            y_lo: (w * cells) as f64 * grid.dy,
            y_hi: ((w + 1) * cells) as f64 * grid.dy,
        })
        .collect())
}

/// Worker owning position `y`, consistent with the cell a particle is
/// deposited from.
#[inline]
pub fn owner_of(y: f64, grid: &Grid, workers: usize) -> usize {
    let (j, _) = axis_cell(y, grid.dy, grid.ny);
    j / (grid.ny / workers)
}

/// Moves particles that left their slab to the neighbouring worker.
///
/// `batches[w][s]` holds species `s` on worker `w`. Afterwards every worker
/// holds its retained particles in their original order, followed by
/// arrivals ordered by source worker and then by index on the source. A
/// particle that skipped past a neighbour slab is a [`Error::CflViolation`];
/// in that case nothing is moved. Returns the number of particles moved.
pub fn exchange_particles(batches: &mut [Vec<ParticleBatch>], grid: &Grid) -> Result<usize> {
    let nw = batches.len();
    if nw <= 1 {
        return Ok(0);
    }
    let nspecies = batches[0].len();
    // destination of every particle, or None when it stays
    let mut plan: Vec<Vec<Vec<Option<usize>>>> = Vec::with_capacity(nspecies);
    for s in 0..nspecies {
        let mut dest = Vec::with_capacity(nw);
        for (w, worker) in batches.iter().enumerate() {
            let [_, y, ..] = worker[s].arrays();
            let mut d = Vec::with_capacity(y.len());
            for (p, &yp) in y.iter().enumerate() {
                let o = owner_of(yp, grid, nw);
                if o == w {
                    d.push(None);
                } else if o == (w + 1) % nw || o == (w + nw - 1) % nw {
                    d.push(Some(o));
                } else {
                    return Err(Error::CflViolation {
                        worker: w,
                        species: s,
                        index: p,
                    });
                }
            }
            dest.push(d);
        }
        plan.push(dest);
    }

    let mut moved = 0;
    for (s, dest) in plan.iter().enumerate() {
        // outbox[src][dst]
        let mut outbox: Vec<Vec<Option<ParticleBatch>>> = vec![Vec::new(); nw];
        for (w, d) in dest.iter().enumerate() {
            let leaving = d.iter().filter(|x| x.is_some()).count();
            let mut boxes: Vec<Option<ParticleBatch>> = (0..nw).map(|_| None).collect();
            if leaving > 0 {
                let b = &mut batches[w][s];
                for (p, target) in d.iter().enumerate() {
                    if let Some(t) = *target {
                        boxes[t]
                            .get_or_insert_with(|| b.empty_like(leaving))
                            .push_from(b, p)?;
                    }
                }
                b.retain_indices(|p| d[p].is_none());
                moved += leaving;
            }
            outbox[w] = boxes;
        }

        for dst in 0..nw {
            for src in 0..nw {
                if let Some(incoming) = outbox[src][dst].take() {
                    let b = &mut batches[dst][s];
                    for p in 0..incoming.len() {
                        b.push_from(&incoming, p)?;
                    }
                }
            }
        }
    }
    Ok(moved)
}
