//! Universal image quality index over 8x8 uniform windows.

use super::filter::{masked_mean, separable};
use crate::{Image, Result};

pub const UQI_WINDOW: usize = 8;

/// Variance and mean-square terms below this are treated as zero.
const FLAT_EPS: f64 = 1e-9;

pub fn uqi(reference: &Image, distorted: &Image) -> Result<f64> {
    super::iqa_score(super::IqaMetricId::Uqi, reference, distorted)
}

pub(crate) fn uqi_plane(a: &[f64], b: &[f64], w: usize, h: usize, mask: Option<&[bool]>) -> f64 {
    let k = [1.0 / UQI_WINDOW as f64; UQI_WINDOW];
    let o = UQI_WINDOW / 2;
    let mu_a = separable(a, w, h, &k, o);
    let mu_b = separable(b, w, h, &k, o);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let e_aa = separable(&aa, w, h, &k, o);
    let e_bb = separable(&bb, w, h, &k, o);
    let e_ab = separable(&ab, w, h, &k, o);

    let q: Vec<f64> = (0..w * h)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = (e_aa[i] - ma * ma).max(0.0);
            let var_b = (e_bb[i] - mb * mb).max(0.0);
            let cov = e_ab[i] - ma * mb;
            // Q = (2·cov / (var_a + var_b)) · (2·ma·mb / (ma² + mb²))
            let contrast_den = var_a + var_b;
            let mean_den = ma * ma + mb * mb;
            let flat = contrast_den <= FLAT_EPS;
            let dark = mean_den <= FLAT_EPS;
            match (flat, dark) {
                (false, false) => ((2.0 * cov) * (2.0 * (ma * mb))) / (contrast_den * mean_den),
                (true, false) => (2.0 * (ma * mb)) / mean_den,
                (false, true) => (2.0 * cov) / contrast_den,
                (true, true) => 1.0,
            }
        })
        .collect();
    masked_mean(&q, mask)
}
