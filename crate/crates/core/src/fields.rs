//! Node-centered electromagnetic field storage.

use crate::error::{Error, Result};
use crate::geometry::{Grid, Vec3};

/// Read access to node-centered E and B, whatever the storage layout.
pub trait NodeFields {
    fn e_at(&self, node: usize) -> Vec3;
    fn b_at(&self, node: usize) -> Vec3;

    /// `(E, B)` at `node` and at its +x neighbour `node + 1`.
    #[inline(always)]
    fn pair_at(&self, node: usize) -> [(Vec3, Vec3); 2] {
        [
            (self.e_at(node), self.b_at(node)),
            (self.e_at(node + 1), self.b_at(node + 1)),
        ]
    }
}

/// E and B at every grid node, indexed `i + j·(nx+1) + k·(nx+1)·(ny+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMesh {
    pub e: Vec<Vec3>,
    pub b: Vec<Vec3>,
}

impl FieldMesh {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.node_count();
        FieldMesh {
            e: vec![Vec3::ZERO; n],
            b: vec![Vec3::ZERO; n],
        }
    }

    pub fn uniform(grid: &Grid, e0: Vec3, b0: Vec3) -> Self {
        let n = grid.node_count();
        FieldMesh {
            e: vec![e0; n],
            b: vec![b0; n],
        }
    }

    /// Builds a mesh by evaluating `f(node_position) -> (E, B)` at each node.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(Vec3) -> (Vec3, Vec3)) -> Self {
        let (ni, nj, nk) = grid.node_dims();
        let mut mesh = FieldMesh::zeros(grid);
        for k in 0..nk {
            for j in 0..nj {
                for i in 0..ni {
                    let n = grid.node_index(i, j, k);
                    let (e, b) = f(grid.node_position(i, j, k));
                    mesh.e[n] = e;
                    mesh.b[n] = b;
                }
            }
        }
        mesh
    }

    pub fn node_count(&self) -> usize {
        self.e.len()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let n = grid.node_count();
        if self.e.len() != n || self.b.len() != n {
            return Err(Error::config(
                "fields",
                format!("mesh has {} nodes, grid needs {n}", self.e.len()),
            ));
        }
        if let Some(bad) = self.e.iter().chain(&self.b).position(|v| !v.is_finite()) {
            return Err(Error::config(
                "fields",
                format!("non-finite value at node {}", bad % n),
            ));
        }
        Ok(())
    }

    /// Packs into the device layout: `[ex, ey, ez, bx, by, bz]` per node.
    pub fn pack_into(&self, out: &mut [f64]) {
        for ((dst, e), b) in out.chunks_exact_mut(6).zip(&self.e).zip(&self.b) {
            dst.copy_from_slice(&[e.x, e.y, e.z, b.x, b.y, b.z]);
        }
    }
}

impl NodeFields for FieldMesh {
    #[inline(always)]
    fn e_at(&self, node: usize) -> Vec3 {
        self.e[node]
    }

    #[inline(always)]
    fn b_at(&self, node: usize) -> Vec3 {
        self.b[node]
    }

    #[inline(always)]
    fn pair_at(&self, node: usize) -> [(Vec3, Vec3); 2] {
        let (e, b) = (&self.e[node..node + 2], &self.b[node..node + 2]);
        [(e[0], b[0]), (e[1], b[1])]
    }
}

/// Borrowed view of node-interleaved field data, six doubles per node.
#[derive(Debug, Clone, Copy)]
pub struct PackedFields<'a>(pub &'a [f64]);

impl NodeFields for PackedFields<'_> {
    #[inline(always)]
    fn e_at(&self, node: usize) -> Vec3 {
        let s = &self.0[6 * node..6 * node + 3];
        Vec3::new(s[0], s[1], s[2])
    }

    #[inline(always)]
    fn b_at(&self, node: usize) -> Vec3 {
        let s = &self.0[6 * node + 3..6 * node + 6];
        Vec3::new(s[0], s[1], s[2])
    }

    #[inline(always)]
    fn pair_at(&self, node: usize) -> [(Vec3, Vec3); 2] {
        let s: &[f64; 12] = self.0[6 * node..6 * node + 12]
            .try_into()
            .expect("two nodes");
        let v = |o: usize| Vec3::new(s[o], s[o + 1], s[o + 2]);
        [(v(0), v(3)), (v(6), v(9))]
    }
}
