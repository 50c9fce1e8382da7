//! Stand-in for the field solve: a non-physical smoothing of E whose cost
//! depends only on the grid size. It occupies the field phase of the cycle
//! so that timing ratios between phases stay meaningful.

use crate::fields::FieldMesh;
use crate::geometry::{Grid, Vec3};

fn smooth_planes(src: &[Vec3], dst: &mut [Vec3], k_range: std::ops::Range<usize>, grid: &Grid) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let plane = (nx + 1) * (ny + 1);
    let k0 = k_range.start;
    for k in k_range {
        let (km, kp) = ((k + nz - 1) % nz, (k + 1) % nz);
        for j in 0..ny {
            let (jm, jp) = ((j + ny - 1) % ny, (j + 1) % ny);
            for i in 0..nx {
                let (im, ip) = ((i + nx - 1) % nx, (i + 1) % nx);
                let at = |i: usize, j: usize, k: usize| src[grid.node_index(i, j, k)];
                let nb = at(im, j, k)
                    + at(ip, j, k)
                    + at(i, jm, k)
                    + at(i, jp, k)
                    + at(i, j, km)
                    + at(i, j, kp);
                let out = at(i, j, k) * 0.5 + nb / 12.0;
                dst[(k - k0) * plane + i + (nx + 1) * j] = out;
            }
        }
    }
}

fn sync_e_images(e: &mut [Vec3], grid: &Grid) {
    let (ni, nj, nk) = grid.node_dims();
    for k in 0..nk {
        for j in 0..nj {
            for i in 0..ni {
                if i < grid.nx && j < grid.ny && k < grid.nz {
                    continue;
                }
                e[grid.node_index(i, j, k)] =
                    e[grid.node_index(i % grid.nx, j % grid.ny, k % grid.nz)];
            }
        }
    }
}

/// Applies `passes` rounds of periodic 7-point averaging to E
/// (weight 1/2 on the node, 1/12 on each neighbor). B is untouched.
pub fn field_phase_stub(mesh: &mut FieldMesh, grid: &Grid, passes: usize) {
    field_phase_stub_threaded(mesh, grid, passes, 1);
}

/// Same as [`field_phase_stub`], splitting z-planes across `threads`.
/// Results do not depend on the thread count.
pub fn field_phase_stub_threaded(mesh: &mut FieldMesh, grid: &Grid, passes: usize, threads: usize) {
    if passes == 0 {
        return;
    }
    let plane = (grid.nx + 1) * (grid.ny + 1);
    let threads = threads.clamp(1, grid.nz);
    let per = grid.nz.div_ceil(threads);
    let mut scratch = mesh.e.clone();
    for _ in 0..passes {
        let src = &mesh.e;
        let logical = &mut scratch[..plane * grid.nz];
        if threads == 1 {
            smooth_planes(src, logical, 0..grid.nz, grid);
        } else {
            std::thread::scope(|scope| {
                for (t, chunk) in logical.chunks_mut(per * plane).enumerate() {
                    let k0 = t * per;
                    let k1 = (k0 + per).min(grid.nz);
                    scope.spawn(move || smooth_planes(src, chunk, k0..k1, grid));
                }
            });
        }
        sync_e_images(&mut scratch, grid);
        std::mem::swap(&mut mesh.e, &mut scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(6, 5, 4, 6.0, 5.0, 4.0).unwrap()
    }

    #[test]
    fn zero_passes_is_identity() {
        let g = grid();
        let mut m = FieldMesh::from_fn(&g, |p| (p, p));
        let before = m.clone();
        field_phase_stub(&mut m, &g, 0);
        assert_eq!(m, before);
    }

    #[test]
    fn uniform_is_fixed_point() {
        let g = grid();
        let mut m = FieldMesh::uniform(&g, Vec3::new(1.0, -2.0, 0.5), Vec3::new(0.0, 0.0, 1.0));
        let before = m.clone();
        field_phase_stub(&mut m, &g, 7);
        assert_eq!(m, before);
        let c = Vec3::new(0.1, 0.3, -0.7);
        let mut u = FieldMesh::uniform(&g, c, Vec3::ZERO);
        field_phase_stub(&mut u, &g, 7);
        assert!(u.e.iter().all(|v| (*v - c).norm() <= 4e-16));
    }

    #[test]
    fn impulse_response() {
        let g = grid();
        let mut m = FieldMesh::zeros(&g);
        let (i, j, k) = (2, 2, 1);
        m.e[g.node_index(i, j, k)] = Vec3::new(1.0, 0.0, 0.0);
        field_phase_stub(&mut m, &g, 1);
        assert_eq!(m.e[g.node_index(i, j, k)].x, 0.5);
        for (a, b, c) in [
            (1, 2, 1),
            (3, 2, 1),
            (2, 1, 1),
            (2, 3, 1),
            (2, 2, 0),
            (2, 2, 2),
        ] {
            assert_eq!(m.e[g.node_index(a, b, c)].x, 1.0 / 12.0);
        }
        let mut total = 0.0;
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    total += m.e[g.node_index(i, j, k)].x;
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_neighbors_and_images() {
        let g = grid();
        let mut m = FieldMesh::zeros(&g);
        m.e[g.node_index(0, 0, 0)] = Vec3::new(0.0, 12.0, 0.0);
        field_phase_stub(&mut m, &g, 1);
        assert_eq!(m.e[g.node_index(g.nx - 1, 0, 0)].y, 1.0);
        assert_eq!(m.e[g.node_index(g.nx, 0, 0)].y, 6.0);
        assert_eq!(m.e[g.node_index(0, 0, g.nz - 1)].y, 1.0);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let g = grid();
        let base = FieldMesh::from_fn(&g, |p| {
            (Vec3::new(p.x.sin(), p.y * p.z, p.x - p.z), Vec3::ZERO)
        });
        let mut a = base.clone();
        let mut b = base;
        field_phase_stub_threaded(&mut a, &g, 3, 1);
        field_phase_stub_threaded(&mut b, &g, 3, 3);
        assert_eq!(a, b);
    }
}
