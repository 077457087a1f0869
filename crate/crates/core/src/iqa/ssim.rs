//! SSIM (11x11 Gaussian window, σ = 1.5) and five-scale MS-SSIM.

use super::filter::{downsample2, downsample_mask, gaussian_kernel, masked_mean, separable};
use crate::{Image, Result};

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub(crate) const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const PEAK: f64 = 255.0;

/// Per-scale exponents, finest scale first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

pub fn ssim(reference: &Image, distorted: &Image) -> Result<f64> {
    super::iqa_score(super::IqaMetricId::Ssim, reference, distorted)
}

pub fn ms_ssim(reference: &Image, distorted: &Image) -> Result<f64> {
    super::iqa_score(super::IqaMetricId::MsSsim, reference, distorted)
}

/// MS-SSIM with caller-supplied per-scale exponents (one scale per weight).
pub fn ms_ssim_with_weights(reference: &Image, distorted: &Image, weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(crate::Error::InvalidArgument(
            "MS-SSIM needs at least one scale".into(),
        ));
    }
    struct Custom(usize);
    impl super::IqaMetric for Custom {
        fn name(&self) -> &str {
            "ms_ssim"
        }
        fn min_side(&self) -> usize {
            WINDOW << (self.0 - 1)
        }
        fn score(&self, _: &Image, _: &Image, _: Option<&[bool]>) -> Result<f64> {
            unreachable!()
        }
    }
    super::check_pair(&Custom(weights.len()), reference, distorted, None)?;
    let (r, d) = (reference.luminance(), distorted.luminance());
    Ok(ms_ssim_plane(
        r.data(),
        d.data(),
        r.width(),
        r.height(),
        None,
        weights,
    ))
}

struct Maps {
    ssim: Vec<f64>,
    cs: Vec<f64>,
}

fn ssim_maps(a: &[f64], b: &[f64], w: usize, h: usize) -> Maps {
    let g = gaussian_kernel(WINDOW / 2, SIGMA);
    let o = WINDOW / 2;
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);

    let mu_a = separable(a, w, h, &g, o);
    let mu_b = separable(b, w, h, &g, o);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let e_aa = separable(&aa, w, h, &g, o);
    let e_bb = separable(&bb, w, h, &g, o);
    let e_ab = separable(&ab, w, h, &g, o);

    let mut ssim = Vec::with_capacity(w * h);
    let mut cs = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let contrast = (2.0 * cov + c2) / (var_a + var_b + c2);
        let luminance = (2.0 * (ma * mb) + c1) / (ma * ma + mb * mb + c1);
        ssim.push(luminance * contrast);
        cs.push(contrast);
    }
    Maps { ssim, cs }
}

pub(crate) fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, mask: Option<&[bool]>) -> f64 {
    masked_mean(&ssim_maps(a, b, w, h).ssim, mask)
}

/// Product over scales of the contrast-structure means, with the full SSIM
/// mean at the coarsest scale. Negative per-scale values are clamped to zero
/// before exponentiation.
pub(crate) fn ms_ssim_plane(
    a: &[f64],
    b: &[f64],
    w: usize,
    h: usize,
    mask: Option<&[bool]>,
    weights: &[f64],
) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    let mut mask = mask.map(<[bool]>::to_vec);
    let (mut w, mut h) = (w, h);
    let mut result = 1.0;
    for (scale, &weight) in weights.iter().enumerate() {
        let maps = ssim_maps(&a, &b, w, h);
        let last = scale + 1 == weights.len();
        let value = if last {
            masked_mean(&maps.ssim, mask.as_deref())
        } else {
            masked_mean(&maps.cs, mask.as_deref())
        };
        result *= value.max(0.0).powf(weight);
        if !last {
            let (na, nw, nh) = downsample2(&a, w, h);
            let (nb, _, _) = downsample2(&b, w, h);
            mask = mask.map(|m| downsample_mask(&m, w, h));
            a = na;
            b = nb;
            w = nw;
            h = nh;
        }
    }
    result
}
