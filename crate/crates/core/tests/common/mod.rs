#![allow(dead_code)]

use pic_offload::kernels::{move_batch, MoverParams};
use pic_offload::{FieldMesh, Grid, ParticleBatch, SimConfig, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar reference mover for uniform fields, written on plain arrays.
/// Every predictor iteration sees the same fields, so one pass suffices.
pub fn reference_step(
    x: [f64; 3],
    v: [f64; 3],
    e: [f64; 3],
    b: [f64; 3],
    qom: f64,
    dt: f64,
    l: [f64; 3],
) -> ([f64; 3], [f64; 3]) {
    let beta = qom * dt / 2.0;
    let vt = [v[0] + beta * e[0], v[1] + beta * e[1], v[2] + beta * e[2]];
    let cross = [
        vt[1] * b[2] - vt[2] * b[1],
        vt[2] * b[0] - vt[0] * b[2],
        vt[0] * b[1] - vt[1] * b[0],
    ];
    let vb = vt[0] * b[0] + vt[1] * b[1] + vt[2] * b[2];
    let bb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    let denom = 1.0 + beta * beta * bb;
    let mut vbar = [0.0; 3];
    for k in 0..3 {
        vbar[k] = (vt[k] + beta * cross[k] + beta * beta * vb * b[k]) / denom;
    }
    let mut xn = [0.0; 3];
    let mut vn = [0.0; 3];
    for k in 0..3 {
        xn[k] = (x[k] + vbar[k] * dt).rem_euclid(l[k]);
        vn[k] = 2.0 * vbar[k] - v[k];
    }
    (xn, vn)
}

/// Per-species sorted bit patterns of every particle.
pub fn multiset(batches: &[ParticleBatch]) -> Vec<Vec<[u64; 6]>> {
    batches
        .iter()
        .map(|b| {
            let mut s = b.state_bits();
            s.sort_unstable();
            s
        })
        .collect()
}

pub fn small_with(engine: pic_offload::EngineSelect, workers: usize) -> SimConfig {
    SimConfig {
        engine,
        workers,
        ..SimConfig::small()
    }
}

fn vec(rng: &mut ChaCha8Rng, a: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-a..a),
        rng.random_range(-a..a),
        rng.random_range(-a..a),
    )
}

/// Largest per-component difference between the batched mover and the
/// scalar reference over `n` random particles in `sets` random fields.
pub fn oracle_gap(seed: u64, sets: usize, n: usize) -> f64 {
    let g = Grid::new(8, 8, 8, 2.0, 2.0, 2.0).unwrap();
    let l = [g.lx, g.ly, g.lz];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..sets {
        let (e, b) = (vec(&mut rng, 0.1), vec(&mut rng, 1.0));
        let qom = rng.random_range(-30.0..30.0);
        let dt = rng.random_range(0.01..0.2);
        let mesh = FieldMesh::uniform(&g, e, b);
        let mut batch = ParticleBatch::with_capacity(0, qom, 1.0, n);
        for _ in 0..n {
            let x = Vec3::new(
                rng.random_range(0.0..g.lx),
                rng.random_range(0.0..g.ly),
                rng.random_range(0.0..g.lz),
            );
            batch.push(x, vec(&mut rng, 0.3)).unwrap();
        }
        let before = batch.clone();
        move_batch(
            &mut batch,
            &mesh,
            &g,
            &MoverParams::new(dt, qom, 3).unwrap(),
        )
        .unwrap();
        for p in 0..n {
            let (x, v) = reference_step(
                before.position(p).to_array(),
                before.velocity(p).to_array(),
                e.to_array(),
                b.to_array(),
                qom,
                dt,
                l,
            );
            let (gx, gv) = (batch.position(p).to_array(), batch.velocity(p).to_array());
            for k in 0..3 {
                let dx = (gx[k] - x[k]).abs();
                // a wrap landing on opposite sides of the boundary is the same point
                let dx = dx.min((dx - l[k]).abs());
                worst = worst.max(dx).max((gv[k] - v[k]).abs());
            }
        }
    }
    worst
}
