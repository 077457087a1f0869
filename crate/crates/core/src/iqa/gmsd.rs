//! Gradient magnitude similarity deviation.

use super::filter::{downsample2, downsample_mask, reflect};
use crate::{Image, Result};

/// Stability constant on the 8-bit scale.
pub const GMSD_C: f64 = 170.0;
pub(crate) const MIN_SIDE: usize = 4;

pub fn gmsd(reference: &Image, distorted: &Image) -> Result<f64> {
    super::iqa_score(super::IqaMetricId::Gmsd, reference, distorted)
}

/// Prewitt gradient magnitude of a plane.
fn gradient_magnitude(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let smooth = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    let diff = [1.0, 0.0, -1.0];
    // Separable Prewitt: difference along one axis, average along the other.
    let gx = separable_xy(p, w, h, &diff, &smooth);
    let gy = separable_xy(p, w, h, &smooth, &diff);
    gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect()
}

fn separable_xy(p: &[f64], w: usize, h: usize, kx: &[f64; 3], ky: &[f64; 3]) -> Vec<f64> {
    let rows = separable_rows(p, w, h, kx);
    let t = transpose(&rows, w, h);
    let cols = separable_rows(&t, h, w, ky);
    transpose(&cols, h, w)
}

fn separable_rows(p: &[f64], w: usize, h: usize, k: &[f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, c) in k.iter().enumerate() {
                let xx = reflect(x as isize + i as isize - 1, w);
                acc += c * p[y * w + xx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn transpose(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = p[y * w + x];
        }
    }
    out
}

pub(crate) fn gmsd_plane(a: &[f64], b: &[f64], w: usize, h: usize, mask: Option<&[bool]>) -> f64 {
    let (a, nw, nh) = downsample2(a, w, h);
    let (b, _, _) = downsample2(b, w, h);
    let mask = mask.map(|m| downsample_mask(m, w, h));
    let ga = gradient_magnitude(&a, nw, nh);
    let gb = gradient_magnitude(&b, nw, nh);
    let gms: Vec<f64> = ga
        .iter()
        .zip(&gb)
        .map(|(x, y)| (2.0 * (x * y) + GMSD_C) / (x * x + y * y + GMSD_C))
        .collect();
    let selected: Vec<f64> = match mask.as_deref() {
        Some(m) if m.iter().any(|&v| v) => gms.iter().zip(m).filter(|(_, &k)| k).map(|(v, _)| *v).collect(),
        _ => gms,
    };
    sample_std(&selected)
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}
