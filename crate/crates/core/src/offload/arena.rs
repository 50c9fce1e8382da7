//! The "device": a memory arena distinct from host memory, and the byte
//! movement between the two.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fields::PackedFields;
use crate::geometry::Grid;
use crate::offload::model::{HostMemory, TransferModel};
use crate::particles::SoaMut;

const F64: usize = std::mem::size_of::<f64>();
/// Bytes per particle on the device: three positions, three velocities.
pub const PARTICLE_BYTES: usize = 6 * F64;
const GRID_BYTES: usize = 48;

/// Fixed-size particle storage for one species, laid out as six blocks
/// (`x, y, z, u, v, w`) of `capacity` doubles each.
#[derive(Debug)]
pub struct ParticleRegion {
    capacity: usize,
    count: usize,
    data: Vec<f64>,
}

impl ParticleRegion {
    fn new(capacity: usize) -> Self {
        ParticleRegion {
            capacity,
            count: 0,
            data: vec![0.0; 6 * capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The active part of each of the six blocks.
    pub fn arrays(&self) -> [&[f64]; 6] {
        let (cap, n) = (self.capacity, self.count);
        std::array::from_fn(|c| &self.data[c * cap..c * cap + n])
    }

    /// Whole blocks (active or not), for writing `count` new particles.
    fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        let cap = self.capacity.max(1);
        let mut it = self.data.chunks_mut(cap);
        std::array::from_fn(|_| it.next().unwrap_or(&mut []))
    }

    pub fn soa_mut(&mut self) -> SoaMut<'_> {
        let n = self.count;
        let [x, y, z, u, v, w] = self.blocks_mut();
        SoaMut {
            x: &mut x[..n],
            y: &mut y[..n],
            z: &mut z[..n],
            u: &mut u[..n],
            v: &mut v[..n],
            w: &mut w[..n],
        }
    }
}

/// Device memory: grid constants, packed fields and one particle region per
/// species, all carved from a fixed byte budget.
#[derive(Debug)]
pub struct DeviceArena {
    capacity_bytes: u64,
    used_bytes: u64,
    grid_region: Option<[u8; GRID_BYTES]>,
    grid: Option<Grid>,
    field_region: Vec<f64>,
    particle_regions: Vec<ParticleRegion>,
}

/// FNV-1a over a byte string.
pub fn checksum(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl DeviceArena {
    pub fn new(capacity_bytes: u64) -> Self {
        DeviceArena {
            capacity_bytes,
            used_bytes: 0,
            grid_region: None,
            grid: None,
            field_region: Vec::new(),
            particle_regions: Vec::new(),
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    fn reserve(&mut self, bytes: u64, what: &str) -> Result<()> {
        if self.used_bytes + bytes > self.capacity_bytes {
            return Err(Error::Allocation(format!(
                "{what} needs {bytes} bytes, {} of {} free",
                self.capacity_bytes - self.used_bytes,
                self.capacity_bytes
            )));
        }
        self.used_bytes += bytes;
        Ok(())
    }

    /// Copies the grid constants to the device once; later calls are no-ops.
    pub fn upload_grid(&mut self, grid: &Grid) -> Result<()> {
        if self.grid_region.is_some() {
            return Ok(());
        }
        self.reserve(GRID_BYTES as u64, "grid region")?;
        let bytes = grid.to_bytes();
        self.grid = Some(Grid::from_bytes(&bytes)?);
        self.grid_region = Some(bytes);
        Ok(())
    }

    /// Grid as decoded from the device-resident bytes.
    pub fn grid(&self) -> Result<&Grid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::EngineFault("grid not uploaded".into()))
    }

    pub fn grid_checksum(&self) -> Option<u64> {
        self.grid_region.as_ref().map(|b| checksum(b))
    }

    pub fn alloc_fields(&mut self, nodes: usize) -> Result<()> {
        self.reserve((6 * nodes * F64) as u64, "field region")?;
        self.field_region = vec![0.0; 6 * nodes];
        Ok(())
    }

    /// Splits all remaining memory evenly into `nspecies` particle regions.
    /// Returns the per-species capacity in particles.
    pub fn alloc_particle_regions(&mut self, nspecies: usize) -> Result<usize> {
        if nspecies == 0 {
            return Ok(0);
        }
        let free = self.capacity_bytes - self.used_bytes;
        let per = (free / nspecies as u64) as usize / PARTICLE_BYTES;
        if per == 0 {
            return Err(Error::Allocation(format!(
                "{free} free bytes cannot hold a particle region per species"
            )));
        }
        self.reserve((per * PARTICLE_BYTES * nspecies) as u64, "particle regions")?;
        self.particle_regions = (0..nspecies).map(|_| ParticleRegion::new(per)).collect();
        Ok(per)
    }

    pub fn region(&self, species: usize) -> Result<&ParticleRegion> {
        self.particle_regions
            .get(species)
            .ok_or_else(|| Error::EngineFault(format!("no device region for species {species}")))
    }

    pub fn field_view(&self) -> PackedFields<'_> {
        PackedFields(&self.field_region)
    }

    pub(crate) fn field_region_mut(&mut self) -> &mut [f64] {
        &mut self.field_region
    }

    /// Split borrow used by the mover: packed fields, grid and one region.
    pub(crate) fn kernel_view(
        &mut self,
        species: usize,
    ) -> Result<(PackedFields<'_>, &Grid, &mut ParticleRegion)> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::EngineFault("grid not uploaded".into()))?;
        let region = self
            .particle_regions
            .get_mut(species)
            .ok_or_else(|| Error::EngineFault(format!("no device region for species {species}")))?;
        Ok((PackedFields(&self.field_region), grid, region))
    }

    /// Host → device copy of `count` particles.
    pub fn load_particles(
        &mut self,
        species: usize,
        src: [&[f64]; 6],
        count: usize,
        memory: HostMemory,
        staging: &mut Vec<f64>,
        model: &TransferModel,
    ) -> Result<f64> {
        let region = self
            .particle_regions
            .get_mut(species)
            .ok_or_else(|| Error::EngineFault(format!("no device region for species {species}")))?;
        if count > region.capacity {
            return Err(Error::Allocation(format!(
                "species {species}: {count} particles exceed device region of {}",
                region.capacity
            )));
        }
        let blocks = region.blocks_mut();
        let pairs: Vec<(&[f64], &mut [f64])> = src
            .into_iter()
            .zip(blocks)
            .map(|(s, d)| (&s[..count], d))
            .collect();
        let t = transfer(pairs, memory, staging, model)?;
        region.count = count;
        Ok(t)
    }

    /// Device → host copy of a region into six destination arrays.
    pub fn store_particles(
        &self,
        species: usize,
        dst: [&mut [f64]; 6],
        memory: HostMemory,
        staging: &mut Vec<f64>,
        model: &TransferModel,
    ) -> Result<f64> {
        let region = self.region(species)?;
        let pairs: Vec<(&[f64], &mut [f64])> = region.arrays().into_iter().zip(dst).collect();
        transfer(pairs, memory, staging, model)
    }
}

/// Copies each `(src, dst)` pair, routing through `staging` for pageable
/// memory, and returns the modeled elapsed time. Nothing is written unless
/// every destination is large enough.
pub fn transfer(
    pairs: Vec<(&[f64], &mut [f64])>,
    memory: HostMemory,
    staging: &mut Vec<f64>,
    model: &TransferModel,
) -> Result<f64> {
    if let Some((s, d)) = pairs.iter().find(|(s, d)| s.len() > d.len()) {
        return Err(Error::Allocation(format!(
            "transfer of {} doubles into a region of {}",
            s.len(),
            d.len()
        )));
    }
    let nbytes: usize = pairs.iter().map(|(s, _)| s.len() * F64).sum();
    let started = Instant::now();
    for (src, dst) in pairs {
        let n = src.len();
        match memory {
            HostMemory::Pinned => dst[..n].copy_from_slice(src),
            HostMemory::Pageable => {
                staging.clear();
                staging.extend_from_slice(src);
                dst[..n].copy_from_slice(staging);
            }
        }
    }
    let modeled = model.modeled_secs(nbytes, memory);
    model.pace(started, modeled);
    Ok(modeled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unthrottled() -> TransferModel {
        TransferModel {
            throttle: false,
            ..TransferModel::default()
        }
    }

    #[test]
    fn grid_upload_is_idempotent_and_checksummed() {
        let g = Grid::new(8, 8, 4, 1.0, 2.0, 3.0).unwrap();
        let mut a = DeviceArena::new(1 << 20);
        a.upload_grid(&g).unwrap();
        let used = a.used_bytes();
        a.upload_grid(&g).unwrap();
        assert_eq!(a.used_bytes(), used);
        assert_eq!(a.grid_checksum(), Some(checksum(&g.to_bytes())));
        assert_eq!(a.grid().unwrap(), &g);
    }

    #[test]
    fn grid_upload_fails_without_partial_write() {
        let g = Grid::new(8, 8, 4, 1.0, 2.0, 3.0).unwrap();
        let mut a = DeviceArena::new(16);
        assert!(matches!(a.upload_grid(&g), Err(Error::Allocation(_))));
        assert_eq!(a.grid_checksum(), None);
        assert_eq!(a.used_bytes(), 0);
        assert!(a.grid().is_err());
    }

    #[test]
    fn regions_fit_inside_capacity() {
        let mut a = DeviceArena::new(10_000);
        a.upload_grid(&Grid::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap())
            .unwrap();
        a.alloc_fields(27).unwrap();
        let per = a.alloc_particle_regions(4).unwrap();
        assert_eq!(per, (10_000 - 48 - 27 * 48) / 4 / 48);
        assert!(a.used_bytes() <= a.capacity_bytes());
        assert!(DeviceArena::new(100).alloc_particle_regions(4).is_err());
    }

    #[test]
    fn zero_byte_transfer_costs_latency_only() {
        let m = unthrottled();
        let mut staging = Vec::new();
        let mut dst = [7.0; 4];
        let t = transfer(
            vec![(&[][..], &mut dst[..])],
            HostMemory::Pageable,
            &mut staging,
            &m,
        )
        .unwrap();
        assert_eq!(t, m.per_call_latency_s);
        assert_eq!(dst, [7.0; 4]);
    }

    #[test]
    fn oversize_transfer_writes_nothing() {
        let m = unthrottled();
        let mut staging = Vec::new();
        let mut small = [0.0; 2];
        let mut big = [0.0; 8];
        let pairs = vec![
            (&[1.0; 4][..], &mut big[..]),
            (&[1.0; 4][..], &mut small[..]),
        ];
        assert!(transfer(pairs, HostMemory::Pinned, &mut staging, &m).is_err());
        assert_eq!(big, [0.0; 8]);
    }

    #[test]
    fn particles_round_trip_bytes_exactly() {
        let m = unthrottled();
        let mut a = DeviceArena::new(1 << 16);
        a.alloc_particle_regions(2).unwrap();
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|c| (0..10).map(|p| (c * 10 + p) as f64 * 0.1).collect())
            .collect();
        let src: [&[f64]; 6] = std::array::from_fn(|c| &cols[c][..]);
        let mut staging = Vec::new();
        a.load_particles(1, src, 10, HostMemory::Pageable, &mut staging, &m)
            .unwrap();
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; 10]; 6];
        {
            let mut it = out.iter_mut();
            let dst: [&mut [f64]; 6] = std::array::from_fn(|_| &mut it.next().unwrap()[..]);
            a.store_particles(1, dst, HostMemory::Pinned, &mut staging, &m)
                .unwrap();
        }
        assert_eq!(out, cols);
        let too_many = a.region(1).unwrap().capacity() + 1;
        assert!(a
            .load_particles(1, src, too_many, HostMemory::Pinned, &mut staging, &m)
            .is_err());
    }
}
