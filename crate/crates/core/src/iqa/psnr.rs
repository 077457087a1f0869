use super::filter::masked_mean;
use crate::Image;

/// `10·log10(255² / MSE)` on luma; `+inf` for identical planes.
pub fn psnr(reference: &Image, distorted: &Image) -> crate::Result<f64> {
    super::iqa_score(super::IqaMetricId::Psnr, reference, distorted)
}

pub(crate) fn psnr_plane(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    let mse = masked_mean(&sq, mask);
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}
