//! Deterministic synthetic point clouds for benchmarks.

use pcqa::cloud::quantize_and_dedup;
use pcqa::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Points on a sphere inscribed in the `2^bit_depth` voxel grid, quantized and
/// deduplicated, coloured by position. The result has at most `n` points.
pub fn sphere_cloud(n: usize, bit_depth: u32, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = ((1u64 << bit_depth) - 1) as f64 / 2.0;
    let radius = half * 0.95;
    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        let p = [
            half + radius * r * phi.cos(),
            half + radius * r * phi.sin(),
            half + radius * z,
        ];
        colors.push([
            (p[0] / (2.0 * half) * 255.0) as u8,
            (p[1] / (2.0 * half) * 255.0) as u8,
            (p[2] / (2.0 * half) * 255.0) as u8,
        ]);
        positions.push(p);
    }
    let cloud = PointCloud::new(positions)
        .with_colors(colors)
        .expect("one colour per point")
        .with_bit_depth(bit_depth);
    quantize_and_dedup(&cloud)
}

/// Gaussian position jitter (re-quantized) and colour noise.
pub fn jitter(cloud: &PointCloud, sigma: f64, color_sigma: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = Normal::new(0.0, sigma).expect("valid sigma");
    let col = Normal::new(0.0, color_sigma).expect("valid sigma");
    let positions = cloud
        .positions
        .iter()
        .map(|p| p.map(|c| c + pos.sample(&mut rng)))
        .collect();
    let mut out = PointCloud::new(positions).with_bit_depth(cloud.bit_depth);
    if let Some(c) = &cloud.colors {
        let noisy = c
            .iter()
            .map(|rgb| rgb.map(|v| (f64::from(v) + col.sample(&mut rng)).round().clamp(0.0, 255.0) as u8))
            .collect();
        out = out.with_colors(noisy).expect("one colour per point");
    }
    quantize_and_dedup(&out)
}
