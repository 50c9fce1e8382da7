use crate::error::Result;
use crate::fields::NodeFields;
use crate::geometry::{cell_of_unchecked, grid_cell_of, CellCoord, Grid, Vec3};

/// Trilinear weights of the eight corners of the cell enclosing a position.
///
/// Corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)` from the
/// cell's lower node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeWeights {
    pub idx: [usize; 8],
    pub w: [f64; 8],
}

impl NodeWeights {
    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

#[inline(always)]
pub(crate) fn weights_from_cell(c: &CellCoord, grid: &Grid) -> NodeWeights {
    let sx = 1;
    let sy = grid.nx + 1;
    let sz = (grid.nx + 1) * (grid.ny + 1);
    let base = grid.node_index(c.i, c.j, c.k);
    let wx = [1.0 - c.fx, c.fx];
    let wy = [1.0 - c.fy, c.fy];
    let wz = [1.0 - c.fz, c.fz];
    let mut idx = [0usize; 8];
    let mut w = [0f64; 8];
    for corner in 0..8 {
        let (a, b, d) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        idx[corner] = base + a * sx + b * sy + d * sz;
        w[corner] = wx[a] * wy[b] * wz[d];
    }
    NodeWeights { idx, w }
}

pub fn trilinear_weights(pos: Vec3, grid: &Grid) -> Result<NodeWeights> {
    Ok(weights_from_cell(&grid_cell_of(pos, grid)?, grid))
}

/// Interpolates E and B at the weighted position.
#[inline(always)]
pub fn gather_field<F: NodeFields + ?Sized>(mesh: &F, wts: &NodeWeights) -> (Vec3, Vec3) {
    let mut e = Vec3::ZERO;
    let mut b = Vec3::ZERO;
    for c in 0..8 {
        let n = wts.idx[c];
        let w = wts.w[c];
        e += mesh.e_at(n) * w;
        b += mesh.b_at(n) * w;
    }
    (e, b)
}

#[inline(always)]
fn lerp(a: Vec3, b: Vec3, f: f64) -> Vec3 {
    a + (b - a) * f
}

#[inline(always)]
fn lerp2(a: (Vec3, Vec3), b: (Vec3, Vec3), f: f64) -> (Vec3, Vec3) {
    (lerp(a.0, b.0, f), lerp(a.1, b.1, f))
}

/// Trilinear interpolation of E and B at `pos`, evaluated as nested linear
/// interpolations along x, then y, then z. Equal to [`gather_field`] up to
/// rounding, and exact wherever the corner values coincide.
#[inline(always)]
pub fn gather_at<F: NodeFields + ?Sized>(mesh: &F, pos: Vec3, grid: &Grid) -> (Vec3, Vec3) {
    let c = cell_of_unchecked(pos, grid);
    let sy = grid.nx + 1;
    let sz = (grid.nx + 1) * (grid.ny + 1);
    let base = c.i + sy * (c.j + (grid.ny + 1) * c.k);
    let edge = |n: usize| {
        let [a, b] = mesh.pair_at(n);
        lerp2(a, b, c.fx)
    };
    let y0 = lerp2(edge(base), edge(base + sy), c.fy);
    let y1 = lerp2(edge(base + sz), edge(base + sz + sy), c.fy);
    lerp2(y0, y1, c.fz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldMesh;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(8, 6, 4, 4.0, 3.0, 2.0).unwrap()
    }

    #[test]
    fn node_position_gets_full_weight() {
        let g = grid();
        let w = trilinear_weights(g.node_position(3, 2, 1), &g).unwrap();
        assert_eq!(w.w[0], 1.0);
        assert!(w.w[1..].iter().all(|&x| x == 0.0));
        assert_eq!(w.idx[0], g.node_index(3, 2, 1));
    }

    #[test]
    fn cell_center_is_symmetric() {
        let g = grid();
        let p = Vec3::new(2.5 * g.dx, 1.5 * g.dy, 0.5 * g.dz);
        let w = trilinear_weights(p, &g).unwrap();
        assert!(w.w.iter().all(|&x| x == 0.125));
    }

    #[test]
    fn product_weights_by_direct_evaluation() {
        let g = Grid::new(4, 4, 4, 4.0, 4.0, 4.0).unwrap();
        let w = trilinear_weights(Vec3::new(1.25, 2.5, 3.75), &g).unwrap();
        assert_eq!(w.w[0], 0.75 * 0.5 * 0.25);
        assert_eq!(w.w[0], 0.09375);
        // independent evaluation of each corner product
        let f = [0.25, 0.5, 0.75];
        for c in 0..8 {
            let mut prod = 1.0;
            for d in 0..3 {
                prod *= if (c >> d) & 1 == 1 { f[d] } else { 1.0 - f[d] };
            }
            assert_eq!(w.w[c], prod);
        }
        assert!((w.sum() - 1.0).abs() <= 1e-15);
        assert_eq!(w.idx[7], g.node_index(2, 3, 4));
    }

    #[test]
    fn out_of_domain_rejected() {
        assert!(trilinear_weights(Vec3::new(0.0, -1.0, 0.0), &grid()).is_err());
    }

    #[test]
    fn gather_uniform_and_zero() {
        let g = grid();
        let f = Vec3::new(0.3, -1.7, 2.25);
        let mesh = FieldMesh::uniform(&g, f, f * 2.0);
        let w = trilinear_weights(Vec3::new(1.1, 2.2, 0.3), &g).unwrap();
        let (e, _) = gather_field(&mesh, &w);
        assert!((e - f).norm() <= 1e-15 * f.norm());
        // exact for weights summing to 1 exactly at a node
        let wn = trilinear_weights(g.node_position(1, 1, 1), &g).unwrap();
        assert_eq!(gather_field(&mesh, &wn), (f, f * 2.0));
        let zero = FieldMesh::zeros(&g);
        assert_eq!(gather_field(&zero, &w), (Vec3::ZERO, Vec3::ZERO));
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0f64..4.0, y in 0f64..3.0, z in 0f64..2.0) {
            let w = trilinear_weights(Vec3::new(x, y, z), &grid()).unwrap();
            prop_assert!((w.sum() - 1.0).abs() <= 1e-15);
            prop_assert!(w.w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn affine_fields_are_reproduced(
            x in 0f64..4.0, y in 0f64..3.0, z in 0f64..2.0,
            a in -3f64..3.0, b in -3f64..3.0, c in -3f64..3.0, d in 1f64..5.0,
        ) {
            let g = grid();
            let affine = |p: Vec3| Vec3::new(a * p.x + b * p.y + c * p.z + d, d - a * p.x, b * p.z + d);
            let mesh = FieldMesh::from_fn(&g, |p| (affine(p), affine(p) * 0.5));
            let pos = Vec3::new(x, y, z);
            let (e, bf) = gather_field(&mesh, &trilinear_weights(pos, &g).unwrap());
            let exact = affine(pos);
            let scale = 3.0 * 4.0 * 3.0 + d;
            prop_assert!((e - exact).norm() <= 1e-13 * scale);
            prop_assert!((bf - exact * 0.5).norm() <= 1e-13 * scale);
        }

        #[test]
        fn nested_and_weighted_gathers_agree(x in 0f64..4.0, y in 0f64..3.0, z in 0f64..2.0) {
            let g = grid();
            let mesh = FieldMesh::from_fn(&g, |p| (Vec3::new(p.x.sin(), p.y * p.z, 1.0), Vec3::new(p.z, -p.x, p.y.cos())));
            let pos = Vec3::new(x, y, z);
            let (e1, b1) = gather_field(&mesh, &trilinear_weights(pos, &g).unwrap());
            let (e2, b2) = gather_at(&mesh, pos, &g);
            prop_assert!((e1 - e2).norm() <= 1e-14 && (b1 - b2).norm() <= 1e-14);
        }

        #[test]
        fn nested_gather_is_exact_for_uniform_fields(x in 0f64..4.0, y in 0f64..3.0, z in 0f64..2.0) {
            let g = grid();
            let (e0, b0) = (Vec3::new(0.1, -0.3, 0.7), Vec3::new(1.0 / 3.0, 0.2, -5.0));
            let mesh = FieldMesh::uniform(&g, e0, b0);
            prop_assert_eq!(gather_at(&mesh, Vec3::new(x, y, z), &g), (e0, b0));
        }
    }
}
