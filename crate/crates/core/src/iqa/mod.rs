//! Full-reference image quality metrics for projected view pairs.
//!
//! All built-in metrics are luma-defined: RGB inputs are converted with the
//! BT.709 weights before scoring. Scores cover the full raster by default; an
//! occupancy mask restricts pooling to the given pixels.

mod filter;
mod gmsd;
mod psnr;
mod ssim;
mod uqi;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Image, Result};

pub use gmsd::{gmsd, GMSD_C};
pub use psnr::psnr;
pub use ssim::{ms_ssim, ms_ssim_with_weights, ssim, MS_SSIM_WEIGHTS, SSIM_K1, SSIM_K2};
pub use uqi::{uqi, UQI_WINDOW};

/// A full-reference image metric.
///
/// Third-party metrics implement this trait and are added to a
/// [`MetricRegistry`] to become available to the projection pipeline.
pub trait IqaMetric: Send + Sync {
    fn name(&self) -> &str;

    /// Direction of merit; `false` for distortion measures such as GMSD.
    fn higher_is_better(&self) -> bool {
        true
    }

    /// Smallest supported image side in pixels.
    fn min_side(&self) -> usize {
        1
    }

    /// Scores `distorted` against `reference`, optionally pooling only over
    /// pixels where `mask` is set.
    fn score(&self, reference: &Image, distorted: &Image, mask: Option<&[bool]>) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IqaMetricId {
    Psnr,
    Uqi,
    Ssim,
    MsSsim,
    Gmsd,
}

impl IqaMetricId {
    pub const ALL: [IqaMetricId; 5] = [
        IqaMetricId::Psnr,
        IqaMetricId::Uqi,
        IqaMetricId::Ssim,
        IqaMetricId::MsSsim,
        IqaMetricId::Gmsd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IqaMetricId::Psnr => "psnr",
            IqaMetricId::Uqi => "uqi",
            IqaMetricId::Ssim => "ssim",
            IqaMetricId::MsSsim => "ms_ssim",
            IqaMetricId::Gmsd => "gmsd",
        }
    }
}

impl fmt::Display for IqaMetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IqaMetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        IqaMetricId::ALL
            .into_iter()
            .find(|id| id.as_str() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown image metric '{s}'")))
    }
}

impl IqaMetric for IqaMetricId {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn higher_is_better(&self) -> bool {
        !matches!(self, IqaMetricId::Gmsd)
    }

    fn min_side(&self) -> usize {
        match self {
            IqaMetricId::Psnr => 1,
            IqaMetricId::Uqi => UQI_WINDOW,
            IqaMetricId::Ssim => ssim::WINDOW,
            IqaMetricId::MsSsim => ssim::WINDOW << (MS_SSIM_WEIGHTS.len() - 1),
            IqaMetricId::Gmsd => gmsd::MIN_SIDE,
        }
    }

    fn score(&self, reference: &Image, distorted: &Image, mask: Option<&[bool]>) -> Result<f64> {
        check_pair(self, reference, distorted, mask)?;
        let (r, d) = (reference.luminance(), distorted.luminance());
        let (w, h) = (r.width(), r.height());
        Ok(match self {
            IqaMetricId::Psnr => psnr::psnr_plane(r.data(), d.data(), mask),
            IqaMetricId::Uqi => uqi::uqi_plane(r.data(), d.data(), w, h, mask),
            IqaMetricId::Ssim => ssim::ssim_plane(r.data(), d.data(), w, h, mask),
            IqaMetricId::MsSsim => ssim::ms_ssim_plane(r.data(), d.data(), w, h, mask, &MS_SSIM_WEIGHTS),
            IqaMetricId::Gmsd => gmsd::gmsd_plane(r.data(), d.data(), w, h, mask),
        })
    }
}

/// Validates shapes and the metric's minimum support.
pub fn check_pair(
    metric: &(impl IqaMetric + ?Sized),
    reference: &Image,
    distorted: &Image,
    mask: Option<&[bool]>,
) -> Result<()> {
    if !reference.same_shape(distorted) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} reference vs {}x{} distorted",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    let min = metric.min_side();
    if reference.width() < min || reference.height() < min {
        return Err(Error::ImageTooSmall {
            metric: metric.name().to_string(),
            min_side: min,
            width: reference.width(),
            height: reference.height(),
        });
    }
    if let Some(m) = mask {
        if m.len() != reference.width() * reference.height() {
            return Err(Error::DimensionMismatch(
                "mask size differs from image size".into(),
            ));
        }
    }
    Ok(())
}

/// Scores a pair with a built-in metric over the full raster.
pub fn iqa_score(id: IqaMetricId, reference: &Image, distorted: &Image) -> Result<f64> {
    id.score(reference, distorted, None)
}

/// Name-indexed set of available metrics, pre-populated with the built-ins.
#[derive(Clone)]
pub struct MetricRegistry {
    metrics: BTreeMap<String, Arc<dyn IqaMetric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut r = Self {
            metrics: BTreeMap::new(),
        };
        for id in IqaMetricId::ALL {
            r.register(Arc::new(id));
        }
        r
    }
}

impl MetricRegistry {
    /// Adds or replaces a metric under its [`IqaMetric::name`].
    pub fn register(&mut self, metric: Arc<dyn IqaMetric>) {
        self.metrics.insert(metric.name().to_ascii_lowercase(), metric);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn IqaMetric>> {
        let key = name.to_ascii_lowercase().replace('-', "_");
        self.metrics
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown image metric '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }
}

impl fmt::Debug for MetricRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.metrics.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(w: usize, h: usize, seed: u64) -> Image {
        let mut s = seed;
        let data = (0..w * h)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((s >> 33) % 256) as f64
            })
            .collect();
        Image::gray(w, h, data).unwrap()
    }

    #[test]
    fn identity_scores() {
        let img = noise_image(200, 190, 3);
        assert_eq!(iqa_score(IqaMetricId::Ssim, &img, &img).unwrap(), 1.0);
        assert_eq!(iqa_score(IqaMetricId::MsSsim, &img, &img).unwrap(), 1.0);
        assert_eq!(iqa_score(IqaMetricId::Uqi, &img, &img).unwrap(), 1.0);
        assert_eq!(iqa_score(IqaMetricId::Gmsd, &img, &img).unwrap(), 0.0);
        assert_eq!(iqa_score(IqaMetricId::Psnr, &img, &img).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_offset_psnr() {
        let a = Image::filled(16, 16, 128.0).unwrap();
        let b = Image::filled(16, 16, 129.0).unwrap();
        let p = iqa_score(IqaMetricId::Psnr, &a, &b).unwrap();
        assert!((p - 10.0 * 65025f64.log10()).abs() < 1e-12);
        assert!((p - 48.13).abs() < 0.005);
    }

    #[test]
    fn size_and_shape_errors() {
        let a = noise_image(20, 20, 1);
        let b = noise_image(21, 20, 1);
        assert!(matches!(
            iqa_score(IqaMetricId::Ssim, &a, &b),
            Err(Error::DimensionMismatch(_))
        ));
        match iqa_score(IqaMetricId::MsSsim, &a, &a) {
            Err(Error::ImageTooSmall { min_side, .. }) => assert_eq!(min_side, 176),
            other => panic!("{other:?}"),
        }
        let tiny = noise_image(5, 5, 2);
        assert!(iqa_score(IqaMetricId::Ssim, &tiny, &tiny).is_err());
        assert!(iqa_score(IqaMetricId::Psnr, &tiny, &tiny).is_ok());
    }

    #[test]
    fn symmetric_metrics() {
        let a = noise_image(40, 30, 5);
        let b = noise_image(40, 30, 6);
        for id in [
            IqaMetricId::Ssim,
            IqaMetricId::Uqi,
            IqaMetricId::Gmsd,
            IqaMetricId::Psnr,
        ] {
            let ab = iqa_score(id, &a, &b).unwrap();
            let ba = iqa_score(id, &b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12, "{id}: {ab} vs {ba}");
        }
    }

    #[test]
    fn registry_accepts_custom_metrics() {
        struct Mae;
        impl IqaMetric for Mae {
            fn name(&self) -> &str {
                "mae"
            }
            fn higher_is_better(&self) -> bool {
                false
            }
            fn score(&self, r: &Image, d: &Image, _: Option<&[bool]>) -> Result<f64> {
                check_pair(self, r, d, None)?;
                let (r, d) = (r.luminance(), d.luminance());
                Ok(r.data()
                    .iter()
                    .zip(d.data())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / r.data().len() as f64)
            }
        }
        let mut reg = MetricRegistry::default();
        reg.register(Arc::new(Mae));
        let m = reg.get("MAE").unwrap();
        let a = Image::filled(4, 4, 10.0).unwrap();
        let b = Image::filled(4, 4, 13.0).unwrap();
        assert_eq!(m.score(&a, &b, None).unwrap(), 3.0);
        assert!(!m.higher_is_better());
        assert!(reg.get("ms-ssim").is_ok());
        assert!(reg.get("vif").is_err());
        assert_eq!("MS-SSIM".parse::<IqaMetricId>().unwrap(), IqaMetricId::MsSsim);
    }
}
