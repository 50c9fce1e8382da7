//! Charge, current and (optionally) pressure deposition.

use crate::geometry::{cell_of_unchecked, Grid};
use crate::particles::ParticleBatch;

/// Grid moments on the node mesh.
///
/// Deposition writes only logical nodes (`i < nx`, `j < ny`, `k < nz`);
/// image nodes on the upper faces mirror their periodic partners.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMesh {
    pub rho: Vec<f64>,
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
    pub jz: Vec<f64>,
    /// `Pxx, Pxy, Pxz, Pyy, Pyz, Pzz` per node, when enabled.
    pub pressure: Option<[Vec<f64>; 6]>,
}

impl MomentMesh {
    pub fn new(grid: &Grid, pressure: bool) -> Self {
        let n = grid.node_count();
        MomentMesh {
            rho: vec![0.0; n],
            jx: vec![0.0; n],
            jy: vec![0.0; n],
            jz: vec![0.0; n],
            pressure: pressure.then(|| std::array::from_fn(|_| vec![0.0; n])),
        }
    }

    pub fn clear(&mut self) {
        for a in self.arrays_mut() {
            a.fill(0.0);
        }
    }

    fn arrays_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.rho, &mut self.jx, &mut self.jy, &mut self.jz];
        if let Some(p) = self.pressure.as_mut() {
            out.extend(p.iter_mut());
        }
        out
    }

    fn arrays(&self) -> Vec<&Vec<f64>> {
        let mut out = vec![&self.rho, &self.jx, &self.jy, &self.jz];
        if let Some(p) = self.pressure.as_ref() {
            out.extend(p.iter());
        }
        out
    }

    /// Element-wise accumulation of another mesh of the same shape.
    pub fn accumulate(&mut self, other: &MomentMesh) {
        for (dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    /// `Σ rho·V` over logical nodes.
    pub fn total_charge(&self, grid: &Grid) -> f64 {
        let mut sum = 0.0;
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    sum += self.rho[grid.node_index(i, j, k)];
                }
            }
        }
        sum * grid.cell_volume()
    }

    /// Copies logical node values onto the image nodes of the upper faces.
    pub fn sync_images(&mut self, grid: &Grid) {
        let (ni, nj, nk) = grid.node_dims();
        for a in self.arrays_mut() {
            for k in 0..nk {
                for j in 0..nj {
                    for i in 0..ni {
                        if i < grid.nx && j < grid.ny && k < grid.nz {
                            continue;
                        }
                        let src = grid.node_index(i % grid.nx, j % grid.ny, k % grid.nz);
                        a[grid.node_index(i, j, k)] = a[src];
                    }
                }
            }
        }
    }
}

/// Scatters the batch's charge, current and optional pressure onto `out`
/// with trilinear weights, wrapping corners onto their periodic nodes.
pub fn deposit_moments(batch: &ParticleBatch, grid: &Grid, out: &mut MomentMesh) {
    let inv_vol = 1.0 / grid.cell_volume();
    let qv = batch.q_per_particle() * inv_vol;
    let [x, y, z, u, v, w] = batch.arrays();
    let sy = grid.nx + 1;
    let sz = (grid.nx + 1) * (grid.ny + 1);
    for p in 0..batch.len() {
        let c = cell_of_unchecked(crate::geometry::Vec3::new(x[p], y[p], z[p]), grid);
        let ii = [c.i, (c.i + 1) % grid.nx];
        let jj = [c.j, (c.j + 1) % grid.ny];
        let kk = [c.k, (c.k + 1) % grid.nz];
        let wx = [1.0 - c.fx, c.fx];
        let wy = [1.0 - c.fy, c.fy];
        let wz = [1.0 - c.fz, c.fz];
        let (up, vp, wp) = (u[p], v[p], w[p]);
        for corner in 0..8 {
            let (a, b, d) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let n = ii[a] + sy * jj[b] + sz * kk[d];
            let q = qv * (wx[a] * wy[b] * wz[d]);
            out.rho[n] += q;
            out.jx[n] += q * up;
            out.jy[n] += q * vp;
            out.jz[n] += q * wp;
            if let Some(pr) = out.pressure.as_mut() {
                pr[0][n] += q * up * up;
                pr[1][n] += q * up * vp;
                pr[2][n] += q * up * wp;
                pr[3][n] += q * vp * vp;
                pr[4][n] += q * vp * wp;
                pr[5][n] += q * wp * wp;
            }
        }
    }
    out.sync_images(grid);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(4, 4, 4, 2.0, 4.0, 6.0).unwrap()
    }

    #[test]
    fn particle_on_interior_node() {
        let g = grid();
        let q = 0.7;
        let mut b = ParticleBatch::with_capacity(0, 1.0, q, 1);
        b.push(g.node_position(2, 1, 3), Vec3::ZERO).unwrap();
        let mut m = MomentMesh::new(&g, false);
        deposit_moments(&b, &g, &mut m);
        let n = g.node_index(2, 1, 3);
        assert_eq!(m.rho[n], q / g.cell_volume());
        let others: f64 = m
            .rho
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != n)
            .map(|(_, r)| r.abs())
            .sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn cell_center_splits_evenly() {
        let g = grid();
        let q = 2.0;
        let mut b = ParticleBatch::with_capacity(0, 1.0, q, 1);
        b.push(
            Vec3::new(1.5 * g.dx, 1.5 * g.dy, 1.5 * g.dz),
            Vec3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        let mut m = MomentMesh::new(&g, true);
        deposit_moments(&b, &g, &mut m);
        let expect = q / (8.0 * g.cell_volume());
        for (i, j, k) in [(1, 1, 1), (2, 1, 1), (1, 2, 1), (2, 2, 2)] {
            let n = g.node_index(i, j, k);
            assert!((m.rho[n] - expect).abs() < 1e-15);
            assert!((m.jx[n] - expect).abs() < 1e-15);
            assert_eq!(m.jy[n], 0.0);
            assert!((m.pressure.as_ref().unwrap()[0][n] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn upper_corner_wraps_to_origin() {
        let g = grid();
        let mut b = ParticleBatch::with_capacity(0, 1.0, 1.0, 1);
        b.push(Vec3::new(2.0 - 1e-12, 4.0 - 1e-12, 6.0 - 1e-12), Vec3::ZERO)
            .unwrap();
        let mut m = MomentMesh::new(&g, false);
        deposit_moments(&b, &g, &mut m);
        let origin = m.rho[g.node_index(0, 0, 0)];
        assert!((origin - 1.0 / g.cell_volume()).abs() < 1e-9);
        assert_eq!(m.rho[g.node_index(4, 4, 4)], origin);
        assert!((m.total_charge(&g) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn charge_is_conserved(
            pts in proptest::collection::vec((0f64..2.0, 0f64..4.0, 0f64..6.0), 1..200),
            q in -3f64..3.0,
        ) {
            let g = grid();
            let mut b = ParticleBatch::with_capacity(0, 1.0, q, pts.len());
            for (x, y, z) in &pts {
                b.push(Vec3::new(*x, *y, *z), Vec3::new(0.1, 0.2, 0.3)).unwrap();
            }
            let mut m = MomentMesh::new(&g, false);
            deposit_moments(&b, &g, &mut m);
            let total = b.total_charge();
            prop_assert!((m.total_charge(&g) - total).abs() <= 1e-12 * total.abs().max(1e-300));
        }
    }
}
