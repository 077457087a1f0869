//! Content descriptors of a rendered view set: spatial information (SI) and
//! colourfulness (CF).

use crate::color::luma;
use crate::projection::View;
use crate::ViewSet;

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Population std of the Sobel gradient magnitude over the interior pixels
/// of one view's luma raster.
pub(crate) fn view_si(view: &View) -> f64 {
    let (w, h) = (view.width, view.height);
    if w < 3 || h < 3 {
        return 0.0;
    }
    let y: Vec<f64> = view
        .rgb
        .iter()
        .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64))
        .collect();
    let at = |r: usize, c: usize| y[r * w + c];
    let mut mags = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
            mags.push((gx * gx + gy * gy).sqrt());
        }
    }
    population_std(&mags)
}

/// Largest per-view SI over the six views.
pub fn spatial_information(views: &ViewSet) -> f64 {
    views.views.iter().map(view_si).fold(0.0, f64::max)
}

/// Hasler–Süsstrunk colourfulness over the occupied pixels of one view.
pub(crate) fn view_cf(view: &View) -> f64 {
    let (mut rg, mut yb) = (Vec::new(), Vec::new());
    for (p, occupied) in view.rgb.iter().zip(&view.occupancy) {
        if *occupied {
            let [r, g, b] = p.map(f64::from);
            rg.push(r - g);
            yb.push(0.5 * (r + g) - b);
        }
    }
    if rg.is_empty() {
        return 0.0;
    }
    let n = rg.len() as f64;
    let (m_rg, m_yb) = (rg.iter().sum::<f64>() / n, yb.iter().sum::<f64>() / n);
    let (s_rg, s_yb) = (population_std(&rg), population_std(&yb));
    (s_rg * s_rg + s_yb * s_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt()
}

/// Mean per-view CF over the six views.
pub fn colorfulness(views: &ViewSet) -> f64 {
    views.views.iter().map(view_cf).sum::<f64>() / views.views.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{project_six_views, ProjectionOptions, ViewKind};
    use crate::{BoundingBox, PointCloud};

    fn view(w: usize, h: usize, rgb: Vec<[u8; 3]>) -> View {
        View {
            kind: ViewKind::Front,
            width: w,
            height: h,
            occupancy: vec![true; rgb.len()],
            depth: vec![0.0; rgb.len()],
            rgb,
        }
    }

    #[test]
    fn flat_view_has_zero_si() {
        assert_eq!(view_si(&view(5, 4, vec![[90, 10, 200]; 20])), 0.0);
    }

    #[test]
    fn checkerboard_matches_direct_sobel() {
        let (w, h) = (6, 5);
        let rgb: Vec<[u8; 3]> = (0..w * h)
            .map(|k| {
                if (k % w + k / w) % 2 == 0 {
                    [255; 3]
                } else {
                    [0; 3]
                }
            })
            .collect();
        // Reference: explicit 3x3 kernel correlation.
        let lum: Vec<f64> = rgb.iter().map(|p| p[0] as f64).collect();
        let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let mut mags = Vec::new();
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let (mut gx, mut gy) = (0.0, 0.0);
                for dr in 0..3 {
                    for dc in 0..3 {
                        let v = lum[(r + dr - 1) * w + c + dc - 1];
                        gx += kx[dr][dc] * v;
                        gy += kx[dc][dr] * v;
                    }
                }
                mags.push((gx * gx + gy * gy).sqrt());
            }
        }
        let expect = population_std(&mags);
        assert!((view_si(&view(w, h, rgb)) - expect).abs() < 1e-12);
    }

    #[test]
    fn gray_cloud_has_zero_cf() {
        let pts: Vec<[f64; 3]> = (0..27)
            .map(|i| [(i % 3) as f64, (i / 3 % 3) as f64, (i / 9) as f64])
            .collect();
        let colors = (0..27).map(|i| [(i * 9) as u8; 3]).collect();
        let c = PointCloud::new(pts).with_colors(colors).unwrap();
        let vs = project_six_views(
            &c,
            &BoundingBox::new([0.0; 3], [2.0; 3]).unwrap(),
            &ProjectionOptions::default(),
        )
        .unwrap();
        assert_eq!(colorfulness(&vs), 0.0);
        assert!(spatial_information(&vs) >= 0.0);
    }

    #[test]
    fn pure_red_cf() {
        let v = view(2, 1, vec![[255, 0, 0]; 2]);
        // rg = 255, yb = 127.5, no spread.
        let expect = 0.3 * (255.0f64.powi(2) + 127.5f64.powi(2)).sqrt();
        assert!((view_cf(&v) - expect).abs() < 1e-12);
    }
}
