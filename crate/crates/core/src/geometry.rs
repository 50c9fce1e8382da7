//! Vectors, the uniform Cartesian grid and periodic position handling.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Double precision 3-vector in normalized simulation units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[repr(C)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Uniform Cartesian grid over a periodic box `[0,lx)×[0,ly)×[0,lz)`.
///
/// Nodes are numbered `i + j·(nx+1) + k·(nx+1)·(ny+1)`; the last node along
/// each axis is the periodic image of the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64, lz: f64) -> Result<Self> {
        for (key, n) in [("nx", nx), ("ny", ny), ("nz", nz)] {
            if n < 2 {
                return Err(Error::config(
                    key,
                    format!("need at least 2 cells, got {n}"),
                ));
            }
        }
        for (key, l) in [("lx", lx), ("ly", ly), ("lz", lz)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::config(
                    key,
                    format!("length must be positive, got {l}"),
                ));
            }
        }
        Ok(Grid {
            nx,
            ny,
            nz,
            lx,
            ly,
            lz,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            dz: lz / nz as f64,
        })
    }

    #[inline]
    pub fn node_dims(&self) -> (usize, usize, usize) {
        (self.nx + 1, self.ny + 1, self.nz + 1)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx + 1) * (j + (self.ny + 1) * k)
    }

    /// Physical coordinates of node `(i, j, k)`.
    #[inline]
    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(i as f64 * self.dx, j as f64 * self.dy, k as f64 * self.dz)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..self.lx).contains(&p.x)
            && (0.0..self.ly).contains(&p.y)
            && (0.0..self.lz).contains(&p.z)
    }

    /// Fixed-width byte image of the grid constants, as resident on the device.
    pub fn to_bytes(&self) -> [u8; 48] {
        let mut out = [0u8; 48];
        let words = [
            self.nx as u64,
            self.ny as u64,
            self.nz as u64,
            self.lx.to_bits(),
            self.ly.to_bits(),
            self.lz.to_bits(),
        ];
        for (chunk, w) in out.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 48]) -> Result<Self> {
        let mut w = [0u64; 6];
        for (slot, chunk) in w.iter_mut().zip(bytes.chunks_exact(8)) {
            *slot = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Grid::new(
            w[0] as usize,
            w[1] as usize,
            w[2] as usize,
            f64::from_bits(w[3]),
            f64::from_bits(w[4]),
            f64::from_bits(w[5]),
        )
    }
}

/// Cell indices and fractional offsets of a position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCoord {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

#[inline(always)]
pub(crate) fn axis_cell(x: f64, d: f64, n: usize) -> (usize, f64) {
    let s = x * (1.0 / d);
    // s can round up to n for x within an ulp of the upper edge
    let i = (s.floor() as usize).min(n - 1);
    (i, s - i as f64)
}

/// Locates the cell containing `pos`.
pub fn grid_cell_of(pos: Vec3, grid: &Grid) -> Result<CellCoord> {
    if !grid.contains(pos) {
        return Err(Error::Domain {
            x: pos.x,
            y: pos.y,
            z: pos.z,
        });
    }
    Ok(cell_of_unchecked(pos, grid))
}

#[inline(always)]
pub(crate) fn cell_of_unchecked(pos: Vec3, grid: &Grid) -> CellCoord {
    let (i, fx) = axis_cell(pos.x, grid.dx, grid.nx);
    let (j, fy) = axis_cell(pos.y, grid.dy, grid.ny);
    let (k, fz) = axis_cell(pos.z, grid.dz, grid.nz);
    CellCoord {
        i,
        j,
        k,
        fx,
        fy,
        fz,
    }
}

#[inline(always)]
pub(crate) fn wrap_axis(x: f64, l: f64) -> f64 {
    // one box length either side is the common case; both branches
    // reproduce rem_euclid exactly there
    if (0.0..l).contains(&x) {
        return x;
    }
    if x > -l && x < 0.0 {
        let r = x + l;
        return if r >= l { 0.0 } else { r };
    }
    if x >= l && x < 2.0 * l {
        return x - l;
    }
    let r = x.rem_euclid(l);
    if r >= l {
        0.0
    } else {
        r
    }
}

/// Maps a position back into the periodic box.
#[inline]
pub fn wrap_periodic(pos: Vec3, grid: &Grid) -> Vec3 {
    Vec3::new(
        wrap_axis(pos.x, grid.lx),
        wrap_axis(pos.y, grid.ly),
        wrap_axis(pos.z, grid.lz),
    )
}
