//! Point-based objective metrics: D1 (point-to-point), D2 (point-to-plane),
//! Hausdorff variants, geometry PSNR and YUV colour PSNR.
//!
//! Correspondences follow the usual convention: for every point of the cloud
//! being iterated, its nearest neighbour in the other cloud. The forward
//! direction iterates the reference, the backward direction the distorted
//! cloud; the symmetric value is the larger of the two.
//!
//! Per-point errors are computed in parallel and reduced sequentially in point
//! order, so results do not depend on the thread count.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::rgb_to_yuv;
use crate::kdtree::NnIndex;
use crate::{Error, Point3, PointCloud, Result};

/// Geometry distortion in squared voxel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryError {
    pub forward_mse: f64,
    pub backward_mse: f64,
    pub symmetric_mse: f64,
    pub forward_haus: f64,
    pub backward_haus: f64,
    pub symmetric_haus: f64,
}

impl GeometryError {
    fn from_directions(forward: Directional, backward: Directional) -> Self {
        Self {
            forward_mse: forward.mean,
            backward_mse: backward.mean,
            symmetric_mse: forward.mean.max(backward.mean),
            forward_haus: forward.max,
            backward_haus: backward.max,
            symmetric_haus: forward.max.max(backward.max),
        }
    }
}

/// Symmetric per-channel colour MSE in squared 8-bit code values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorError {
    pub mse_y: f64,
    pub mse_u: f64,
    pub mse_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YuvPsnr {
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub yuv: f64,
}

/// Which of the three pooled directions a reported value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
    #[default]
    Symmetric,
}

impl GeometryError {
    pub fn mse(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Forward => self.forward_mse,
            Direction::Backward => self.backward_mse,
            Direction::Symmetric => self.symmetric_mse,
        }
    }

    pub fn hausdorff(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Forward => self.forward_haus,
            Direction::Backward => self.backward_haus,
            Direction::Symmetric => self.symmetric_haus,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Directional {
    mean: f64,
    max: f64,
}

fn pool(errors: &[f64]) -> Directional {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for &e in errors {
        sum += e;
        max = max.max(e);
    }
    Directional {
        mean: sum / errors.len() as f64,
        max,
    }
}

/// Nearest neighbour in `target` of every point of `source`.
pub fn correspondences(source: &[Point3], target: &NnIndex) -> Vec<(usize, f64)> {
    source.par_iter().map(|p| target.nearest(p)).collect()
}

fn require_points(c: &PointCloud, what: &'static str) -> Result<()> {
    if c.is_empty() {
        Err(Error::Empty(what))
    } else {
        Ok(())
    }
}

/// Point-to-point error.
pub fn d1_error(reference: &PointCloud, distorted: &PointCloud) -> Result<GeometryError> {
    require_points(reference, "reference cloud")?;
    require_points(distorted, "distorted cloud")?;
    let ref_index = NnIndex::build(&reference.positions)?;
    let dist_index = NnIndex::build(&distorted.positions)?;
    Ok(d1_with_indices(reference, distorted, &ref_index, &dist_index))
}

fn d1_with_indices(
    reference: &PointCloud,
    distorted: &PointCloud,
    ref_index: &NnIndex,
    dist_index: &NnIndex,
) -> GeometryError {
    let direction = |src: &PointCloud, idx: &NnIndex| {
        let errs: Vec<f64> = correspondences(&src.positions, idx)
            .into_iter()
            .map(|(_, d)| d)
            .collect();
        pool(&errs)
    };
    GeometryError::from_directions(direction(reference, dist_index), direction(distorted, ref_index))
}

/// Point-to-plane error: squared projection of each correspondence's error
/// vector onto the normal of the point being iterated. The forward direction
/// needs reference normals, the backward direction distorted normals.
pub fn d2_error(reference: &PointCloud, distorted: &PointCloud) -> Result<GeometryError> {
    require_points(reference, "reference cloud")?;
    require_points(distorted, "distorted cloud")?;
    let ref_normals = reference
        .normals
        .as_ref()
        .ok_or(Error::MissingAttribute("reference normals"))?;
    let dist_normals = distorted
        .normals
        .as_ref()
        .ok_or(Error::MissingAttribute("distorted normals"))?;
    let ref_index = NnIndex::build(&reference.positions)?;
    let dist_index = NnIndex::build(&distorted.positions)?;

    let direction = |src: &PointCloud, normals: &[Point3], other: &PointCloud, idx: &NnIndex| {
        let errs: Vec<f64> = src
            .positions
            .par_iter()
            .zip(normals.par_iter())
            .map(|(p, n)| {
                let (j, _) = idx.nearest(p);
                let q = other.positions[j];
                let e = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
                let proj = e[0] * n[0] + e[1] * n[1] + e[2] * n[2];
                proj * proj
            })
            .collect();
        pool(&errs)
    };
    Ok(GeometryError::from_directions(
        direction(reference, ref_normals, distorted, &dist_index),
        direction(distorted, dist_normals, reference, &ref_index),
    ))
}

/// Default geometry peak: the largest coordinate at the given bit depth.
pub fn geometry_peak(bit_depth: u32) -> f64 {
    ((1u64 << bit_depth) - 1) as f64
}

/// `10·log10(3·p² / mse)`; `+inf` when `mse == 0`.
pub fn geometry_psnr(mse: f64, bit_depth: u32) -> f64 {
    geometry_psnr_with_peak(mse, geometry_peak(bit_depth))
}

pub fn geometry_psnr_with_peak(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (3.0 * peak * peak / mse).log10()
}

/// Per-channel YUV error between the two clouds' colours.
pub fn color_error(reference: &PointCloud, distorted: &PointCloud) -> Result<ColorError> {
    require_points(reference, "reference cloud")?;
    require_points(distorted, "distorted cloud")?;
    let ref_index = NnIndex::build(&reference.positions)?;
    let dist_index = NnIndex::build(&distorted.positions)?;
    color_error_with_indices(reference, distorted, &ref_index, &dist_index)
}

fn color_error_with_indices(
    reference: &PointCloud,
    distorted: &PointCloud,
    ref_index: &NnIndex,
    dist_index: &NnIndex,
) -> Result<ColorError> {
    let rc = reference
        .colors
        .as_ref()
        .ok_or(Error::MissingAttribute("reference colors"))?;
    let dc = distorted
        .colors
        .as_ref()
        .ok_or(Error::MissingAttribute("distorted colors"))?;

    let direction = |src: &PointCloud, src_colors: &[[u8; 3]], other_colors: &[[u8; 3]], idx: &NnIndex| {
        let errs: Vec<[f64; 3]> = src
            .positions
            .par_iter()
            .zip(src_colors.par_iter())
            .map(|(p, c)| {
                let (j, _) = idx.nearest(p);
                let a = rgb_to_yuv(*c);
                let b = rgb_to_yuv(other_colors[j]);
                [0, 1, 2].map(|k| (a[k] - b[k]) * (a[k] - b[k]))
            })
            .collect();
        let mut sum = [0.0; 3];
        for e in &errs {
            for k in 0..3 {
                sum[k] += e[k];
            }
        }
        sum.map(|s| s / errs.len() as f64)
    };
    let fwd = direction(reference, rc, dc, dist_index);
    let bwd = direction(distorted, dc, rc, ref_index);
    Ok(ColorError {
        mse_y: fwd[0].max(bwd[0]),
        mse_u: fwd[1].max(bwd[1]),
        mse_v: fwd[2].max(bwd[2]),
    })
}

/// `10·log10(255² / mse)` per channel; `psnr_yuv` weights Y:U:V as 6:1:1.
pub fn yuv_psnr(err: &ColorError) -> YuvPsnr {
    let p = |mse: f64| {
        if mse == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (255.0 * 255.0 / mse).log10()
        }
    };
    let (y, u, v) = (p(err.mse_y), p(err.mse_u), p(err.mse_v));
    YuvPsnr {
        y,
        u,
        v,
        yuv: (6.0 * y + u + v) / 8.0,
    }
}

/// Normal estimation result: a cloud carrying unit normals plus a per-point
/// flag set where the neighbourhood covariance was rank deficient (collinear
/// or coincident neighbours) and the normal direction is arbitrary.
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub low_confidence: Vec<bool>,
}

/// PCA normals from each point and its `k` nearest other points.
///
/// The normal is the eigenvector of the smallest covariance eigenvalue,
/// oriented to point away from the cloud centroid.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimate> {
    let n = cloud.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "normal estimation needs k >= 2, got {k}"
        )));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be smaller than the point count {n}"
        )));
    }
    if k + 1 > crate::kdtree::MAX_K {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the supported neighbourhood size {}",
            crate::kdtree::MAX_K - 1
        )));
    }
    let index = NnIndex::build(&cloud.positions)?;
    let mut centroid = [0.0; 3];
    for p in &cloud.positions {
        for a in 0..3 {
            centroid[a] += p[a];
        }
    }
    let centroid = centroid.map(|c| c / n as f64);

    let results: Vec<(Point3, bool)> = cloud
        .positions
        .par_iter()
        .map(|p| {
            let nbrs = index.k_nearest(p, k + 1).expect("k validated above");
            let pts: Vec<Point3> = nbrs.iter().map(|&(j, _)| cloud.positions[j]).collect();
            let (normal, degenerate) = plane_normal(&pts);
            let outward = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
            (orient(normal, outward), degenerate)
        })
        .collect();

    let (normals, low_confidence): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(NormalEstimate {
        cloud: out,
        low_confidence,
    })
}

/// Smallest-eigenvalue eigenvector of the neighbourhood covariance.
fn plane_normal(pts: &[Point3]) -> (Point3, bool) {
    let m = pts.len() as f64;
    let mut mean = [0.0; 3];
    for p in pts {
        for a in 0..3 {
            mean[a] += p[a] / m;
        }
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in pts {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c] / m;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1, l2) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    let scale = l2.abs().max(f64::MIN_POSITIVE);
    // Rank < 2: the two smallest eigenvalues both vanish, so the plane is undefined.
    let degenerate = l1 <= 1e-12 * scale || (l1 - l0) <= 1e-12 * scale;
    let v = eig.eigenvectors.column(order[0]);
    let mut normal = [v[0], v[1], v[2]];
    let len = crate::cloud::norm(normal);
    if len > 0.0 {
        normal = normal.map(|c| c / len);
    } else {
        normal = [0.0, 0.0, 1.0];
    }
    (normal, degenerate)
}

fn orient(n: Point3, outward: Point3) -> Point3 {
    let dot = n[0] * outward[0] + n[1] * outward[1] + n[2] * outward[2];
    let flip = if dot != 0.0 {
        dot < 0.0
    } else {
        // Tangent to the centroid direction: make the first non-zero component positive.
        n.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
    };
    if flip {
        n.map(|c| -c)
    } else {
        n
    }
}

/// All point-based metrics for one (reference, distorted) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetricSet {
    pub d1: GeometryError,
    pub d2: Option<GeometryError>,
    pub color: Option<ColorError>,
}

impl PointMetricSet {
    /// Computes D1 always, D2 when both clouds carry normals and colour error
    /// when both carry colours. Each KD-tree is built once.
    pub fn compute(reference: &PointCloud, distorted: &PointCloud) -> Result<Self> {
        require_points(reference, "reference cloud")?;
        require_points(distorted, "distorted cloud")?;
        let ref_index = NnIndex::build(&reference.positions)?;
        let dist_index = NnIndex::build(&distorted.positions)?;
        let d1 = d1_with_indices(reference, distorted, &ref_index, &dist_index);
        let d2 = if reference.normals.is_some() && distorted.normals.is_some() {
            Some(d2_error(reference, distorted)?)
        } else {
            None
        };
        let color = if reference.colors.is_some() && distorted.colors.is_some() {
            Some(color_error_with_indices(
                reference,
                distorted,
                &ref_index,
                &dist_index,
            )?)
        } else {
            None
        };
        Ok(Self { d1, d2, color })
    }

    /// Named metric rows in a fixed order, using `peak` for geometry PSNR.
    pub fn rows(&self, direction: Direction, peak: f64) -> Vec<(String, f64)> {
        let mut rows = vec![
            ("d1_mse".to_string(), self.d1.mse(direction)),
            (
                "d1_psnr".to_string(),
                geometry_psnr_with_peak(self.d1.mse(direction), peak),
            ),
            ("d1_hausdorff".to_string(), self.d1.hausdorff(direction)),
            (
                "d1_hausdorff_psnr".to_string(),
                geometry_psnr_with_peak(self.d1.hausdorff(direction), peak),
            ),
        ];
        if let Some(d2) = &self.d2 {
            rows.push(("d2_mse".into(), d2.mse(direction)));
            rows.push(("d2_psnr".into(), geometry_psnr_with_peak(d2.mse(direction), peak)));
            rows.push(("d2_hausdorff".into(), d2.hausdorff(direction)));
            rows.push((
                "d2_hausdorff_psnr".into(),
                geometry_psnr_with_peak(d2.hausdorff(direction), peak),
            ));
        }
        if let Some(c) = &self.color {
            let p = yuv_psnr(c);
            rows.push(("psnr_y".into(), p.y));
            rows.push(("psnr_u".into(), p.u));
            rows.push(("psnr_v".into(), p.v));
            rows.push(("psnr_yuv".into(), p.yuv));
        }
        rows
    }
}

/// Formats a metric value for CSV output; infinite sentinels print as `inf`.
pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Writes metric rows as `sequence,gQP,tQP,metric_name,value`.
pub fn write_metric_csv<W: std::io::Write>(out: W, rows: &[(String, i32, i32, String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sequence", "gQP", "tQP", "metric_name", "value"])?;
    for (seq, g, t, name, v) in rows {
        w.write_record([
            seq.clone(),
            g.to_string(),
            t.to_string(),
            name.clone(),
            format_value(*v),
        ])?;
    }
    w.flush()?;
    Ok(())
}
