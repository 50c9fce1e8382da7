//! Structure-of-arrays particle storage and species descriptions.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Which initial spatial profile a species follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    /// Harris current sheet, density ∝ sech².
    Sheet,
    /// Uniform background.
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: usize,
    /// Charge-to-mass ratio.
    pub qom: f64,
    /// Macro-particle charge.
    pub q_per_particle: f64,
    /// Particles per cell (candidates per cell for sheet species).
    pub ppc: usize,
    pub uth: Vec3,
    pub u0: Vec3,
    pub population: Population,
}

/// Mutable borrow of the six active particle arrays.
#[derive(Debug)]
pub struct SoaMut<'a> {
    pub x: &'a mut [f64],
    pub y: &'a mut [f64],
    pub z: &'a mut [f64],
    pub u: &'a mut [f64],
    pub v: &'a mut [f64],
    pub w: &'a mut [f64],
}

impl SoaMut<'_> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Positions and velocities of one species, stored as parallel arrays.
///
/// Capacity is fixed when the batch is allocated; pushing beyond it fails.
#[derive(Debug, Default)]
pub struct ParticleBatch {
    species: usize,
    qom: f64,
    q_per_particle: f64,
    capacity: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl ParticleBatch {
    pub fn with_capacity(species: usize, qom: f64, q_per_particle: f64, capacity: usize) -> Self {
        let arr = || Vec::with_capacity(capacity);
        ParticleBatch {
            species,
            qom,
            q_per_particle,
            capacity,
            x: arr(),
            y: arr(),
            z: arr(),
            u: arr(),
            v: arr(),
            w: arr(),
        }
    }

    pub fn for_species(s: &Species, capacity: usize) -> Self {
        Self::with_capacity(s.id, s.qom, s.q_per_particle, capacity)
    }

    /// Empty batch with the same species metadata.
    pub fn empty_like(&self, capacity: usize) -> Self {
        Self::with_capacity(self.species, self.qom, self.q_per_particle, capacity)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn qom(&self) -> f64 {
        self.qom
    }

    pub fn q_per_particle(&self) -> f64 {
        self.q_per_particle
    }

    pub fn push(&mut self, pos: Vec3, vel: Vec3) -> Result<()> {
        if self.len() == self.capacity {
            return Err(Error::Allocation(format!(
                "species {} batch full at capacity {}",
                self.species, self.capacity
            )));
        }
        self.x.push(pos.x);
        self.y.push(pos.y);
        self.z.push(pos.z);
        self.u.push(vel.x);
        self.v.push(vel.y);
        self.w.push(vel.z);
        Ok(())
    }

    #[inline]
    pub fn position(&self, p: usize) -> Vec3 {
        Vec3::new(self.x[p], self.y[p], self.z[p])
    }

    #[inline]
    pub fn velocity(&self, p: usize) -> Vec3 {
        Vec3::new(self.u[p], self.v[p], self.w[p])
    }

    pub fn set(&mut self, p: usize, pos: Vec3, vel: Vec3) {
        self.x[p] = pos.x;
        self.y[p] = pos.y;
        self.z[p] = pos.z;
        self.u[p] = vel.x;
        self.v[p] = vel.y;
        self.w[p] = vel.z;
    }

    pub fn clear(&mut self) {
        for a in self.arrays_mut() {
            a.clear();
        }
    }

    /// The six active arrays in `x, y, z, u, v, w` order.
    pub fn arrays(&self) -> [&[f64]; 6] {
        [&self.x, &self.y, &self.z, &self.u, &self.v, &self.w]
    }

    fn arrays_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.x,
            &mut self.y,
            &mut self.z,
            &mut self.u,
            &mut self.v,
            &mut self.w,
        ]
    }

    pub fn soa_mut(&mut self) -> SoaMut<'_> {
        SoaMut {
            x: &mut self.x,
            y: &mut self.y,
            z: &mut self.z,
            u: &mut self.u,
            v: &mut self.v,
            w: &mut self.w,
        }
    }

    /// Replaces the active contents with `count` particles read from `src`
    /// arrays (`x, y, z, u, v, w`).
    pub fn fill_from(&mut self, src: [&[f64]; 6], count: usize) -> Result<()> {
        if count > self.capacity || src.iter().any(|a| a.len() < count) {
            return Err(Error::Allocation(format!(
                "cannot load {count} particles into species {} batch (capacity {})",
                self.species, self.capacity
            )));
        }
        for (dst, s) in self.arrays_mut().into_iter().zip(src) {
            dst.clear();
            dst.extend_from_slice(&s[..count]);
        }
        Ok(())
    }

    /// Sets the active length to `count` and exposes the arrays for an
    /// external writer. Existing values are kept, new slots are zero.
    pub(crate) fn resize_for_load(&mut self, count: usize) -> Result<[&mut [f64]; 6]> {
        if count > self.capacity {
            return Err(Error::Allocation(format!(
                "cannot load {count} particles into species {} batch (capacity {})",
                self.species, self.capacity
            )));
        }
        let arrays = self.arrays_mut();
        Ok(arrays.map(|a| {
            a.resize(count, 0.0);
            &mut a[..]
        }))
    }

    /// Appends particle `p` of `other`.
    pub fn push_from(&mut self, other: &ParticleBatch, p: usize) -> Result<()> {
        self.push(other.position(p), other.velocity(p))
    }

    /// Keeps only the particles for which `keep(index)` holds, preserving order.
    pub fn retain_indices(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let mask: Vec<bool> = (0..self.len()).map(&mut keep).collect();
        for a in self.arrays_mut() {
            let mut it = mask.iter();
            a.retain(|_| *it.next().expect("mask covers array"));
        }
    }

    /// Total macro-charge carried by the batch.
    pub fn total_charge(&self) -> f64 {
        self.q_per_particle * self.len() as f64
    }

    /// Bytes moved when the active particles cross the offload boundary.
    pub fn active_bytes(&self) -> usize {
        6 * std::mem::size_of::<f64>() * self.len()
    }

    /// `(position, velocity)` bit patterns of every particle, for exact
    /// multiset comparisons.
    pub fn state_bits(&self) -> Vec<[u64; 6]> {
        (0..self.len())
            .map(|p| {
                [
                    self.x[p].to_bits(),
                    self.y[p].to_bits(),
                    self.z[p].to_bits(),
                    self.u[p].to_bits(),
                    self.v[p].to_bits(),
                    self.w[p].to_bits(),
                ]
            })
            .collect()
    }
}

impl Clone for ParticleBatch {
    /// Preserves the fixed capacity while copying only active particles.
    fn clone(&self) -> Self {
        let mut out = self.empty_like(self.capacity);
        out.fill_from(self.arrays(), self.len())
            .expect("clone fits its own capacity");
        out
    }
}

impl PartialEq for ParticleBatch {
    /// Bitwise comparison of active particles and species metadata.
    fn eq(&self, other: &Self) -> bool {
        self.species == other.species
            && self.qom.to_bits() == other.qom.to_bits()
            && self.q_per_particle.to_bits() == other.q_per_particle.to_bits()
            && self.state_bits() == other.state_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_respects_capacity() {
        let mut b = ParticleBatch::with_capacity(0, -25.0, -1e-3, 2);
        b.push(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        b.push(Vec3::ZERO, Vec3::ZERO).unwrap();
        assert!(matches!(
            b.push(Vec3::ZERO, Vec3::ZERO),
            Err(Error::Allocation(_))
        ));
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn clone_keeps_capacity() {
        let mut b = ParticleBatch::with_capacity(1, 1.0, 1.0, 100);
        b.push(Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0))
            .unwrap();
        let c = b.clone();
        assert_eq!(c.capacity(), 100);
        assert_eq!(c, b);
    }

    #[test]
    fn fill_rejects_overflow() {
        let mut b = ParticleBatch::with_capacity(0, 1.0, 1.0, 1);
        let data = [1.0, 2.0];
        let src = [&data[..]; 6];
        assert!(b.fill_from(src, 2).is_err());
        b.fill_from(src, 1).unwrap();
        assert_eq!(b.position(0), Vec3::new(1.0, 1.0, 1.0));
    }

    proptest! {
        #[test]
        fn arrays_stay_parallel(ops in proptest::collection::vec((any::<bool>(), 0.0f64..1.0), 0..60)) {
            let mut b = ParticleBatch::with_capacity(0, 1.0, 1.0, 40);
            for (push, val) in ops {
                if push {
                    let _ = b.push(Vec3::new(val, val, val), Vec3::ZERO);
                } else {
                    b.retain_indices(|i| i % 2 == 0);
                }
                let lens: Vec<usize> = b.arrays().iter().map(|a| a.len()).collect();
                prop_assert!(lens.iter().all(|&l| l == b.len()));
                prop_assert!(b.len() <= b.capacity());
            }
        }
    }
}
