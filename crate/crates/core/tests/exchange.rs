use pic_offload::runtime::{decompose, exchange_particles, owner_of};
use pic_offload::{Error, Grid, ParticleBatch, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scattered(grid: &Grid, workers: usize, per_worker: usize, seed: u64) -> Vec<Vec<ParticleBatch>> {
    let subs = decompose(grid, workers).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slab = grid.ly / workers as f64;
    subs.iter()
        .map(|s| {
            (0..2)
                .map(|sp| {
                    let mut b = ParticleBatch::with_capacity(sp, 1.0, 1.0, per_worker * 3);
                    for _ in 0..per_worker {
                        // own slab or one of its neighbours
                        let y = (s.y_lo + rng.random_range(-slab..2.0 * slab)).rem_euclid(grid.ly);
                        let x = Vec3::new(
                            rng.random_range(0.0..grid.lx),
                            y,
                            rng.random_range(0.0..grid.lz),
                        );
                        b.push(x, Vec3::new(rng.random(), rng.random(), rng.random()))
                            .unwrap();
                    }
                    b
                })
                .collect()
        })
        .collect()
}

fn flatten(batches: &[Vec<ParticleBatch>]) -> Vec<Vec<[u64; 6]>> {
    let mut out = vec![Vec::new(); batches[0].len()];
    for w in batches {
        for (s, b) in w.iter().enumerate() {
            out[s].extend(b.state_bits());
        }
    }
    for s in &mut out {
        s.sort_unstable();
    }
    out
}

#[test]
fn exchange_keeps_the_particle_multiset() {
    let g = Grid::new(8, 16, 4, 3.2, 6.4, 1.6).unwrap();
    let workers = 4;
    let mut batches = scattered(&g, workers, 12_500, 3);
    let before = flatten(&batches);
    assert_eq!(before.iter().map(Vec::len).sum::<usize>(), 100_000);
    let moved = exchange_particles(&mut batches, &g).unwrap();
    assert!(moved > 0);
    assert_eq!(flatten(&batches), before);
    for (w, wb) in batches.iter().enumerate() {
        for b in wb {
            assert!((0..b.len()).all(|p| owner_of(b.position(p).y, &g, workers) == w));
        }
    }
    assert_eq!(exchange_particles(&mut batches, &g).unwrap(), 0);
}

#[test]
fn exchange_is_deterministic() {
    let g = Grid::new(4, 8, 4, 1.6, 3.2, 1.6).unwrap();
    let mut a = scattered(&g, 2, 500, 9);
    let mut b = a.clone();
    exchange_particles(&mut a, &g).unwrap();
    exchange_particles(&mut b, &g).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x
        .iter()
        .zip(y)
        .all(|(p, q)| p.state_bits() == q.state_bits())));
}

#[test]
fn skipping_slabs_is_rejected() {
    let g = Grid::new(4, 8, 4, 1.6, 3.2, 1.6).unwrap();
    let mut batches = scattered(&g, 4, 10, 1);
    let far = Vec3::new(0.1, g.ly * 0.6, 0.1);
    let v = batches[0][1].velocity(0);
    batches[0][1].set(0, far, v);
    let before = flatten(&batches);
    assert!(matches!(
        exchange_particles(&mut batches, &g),
        Err(Error::CflViolation {
            worker: 0,
            species: 1,
            ..
        })
    ));
    assert_eq!(flatten(&batches), before);
}
