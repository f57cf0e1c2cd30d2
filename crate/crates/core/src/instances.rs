//! Seeded instance generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metric::{Geometry, MetricInstance, RawInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CloudShape {
    pub n: usize,
    pub subset_size: usize,
    pub dim: usize,
}

impl CloudShape {
    /// A random shape with `n ≤ max_n`, `|C| ≤ max_subset`, `dim ≤ max_dim`.
    pub fn random(seed: u64, max_n: usize, max_subset: usize, max_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a9e);
        let n = rng.gen_range(2..=max_n.max(2));
        let subset_size = rng.gen_range(2..=max_subset.clamp(2, n));
        let dim = rng.gen_range(1..=max_dim.max(1));
        Self { n, subset_size, dim }
    }
}

/// Uniform points in the unit cube with `g(x) = Σ sin(3 x_i)` plus a small
/// perturbation; `C` is a random subset.
pub fn random_cloud(seed: u64, shape: CloudShape) -> RawInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Vec<f64>> = (0..shape.n)
        .map(|_| (0..shape.dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut idx: Vec<usize> = (0..shape.n).collect();
    for i in 0..shape.subset_size.min(shape.n) {
        let j = rng.gen_range(i..shape.n);
        idx.swap(i, j);
    }
    let mut subset = idx[..shape.subset_size.min(shape.n)].to_vec();
    subset.sort_unstable();
    let values = subset
        .iter()
        .map(|&i| coords[i].iter().map(|c| (3.0 * c).sin()).sum::<f64>() + 0.1 * rng.gen_range(-1.0..1.0))
        .collect();
    RawInstance { geometry: Geometry::Euclidean { coords }, subset, values, lipschitz: None, labels: None }
}

/// The uniform grid of `[0, 1]` with `n` points, `C = {0, 1}` and `g = id`.
pub fn unit_interval_grid(n: usize) -> RawInstance {
    let n = n.max(2);
    let coords = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
    RawInstance {
        geometry: Geometry::Euclidean { coords },
        subset: vec![0, n - 1],
        values: vec![0.0, 1.0],
        lipschitz: None,
        labels: None,
    }
}

/// Masses uniform in `[0.1, 1)` on `C`, zero elsewhere.
pub fn random_masses(instance: &MetricInstance, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![0.0; instance.len()];
    for &c in instance.subset() {
        m[c] = rng.gen_range(0.1..1.0);
    }
    m
}

/// A random Lipschitz function on all points: a min of a few random cones
/// plus a linear term in the first coordinate (or the distance to point 0).
pub fn random_lipschitz(instance: &MetricInstance, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = instance.len();
    let cones: Vec<(usize, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..3.0)))
        .collect();
    let tilt = rng.gen_range(-2.0..2.0);
    (0..n)
        .map(|y| {
            let cone = cones
                .iter()
                .map(|&(c, h, s)| h + s * instance.distance(c, y))
                .fold(f64::INFINITY, f64::min);
            cone + tilt * instance.distance(0, y)
        })
        .collect()
}
