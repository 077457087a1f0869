//! Point cloud data model and voxel pre-processing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Point3, Result, Rgb};

/// Geometry precision of the test material (10-bit voxel grids).
pub const DEFAULT_BIT_DEPTH: u32 = 10;

/// A static point cloud: positions with optional per-point colours and normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub positions: Vec<Point3>,
    pub colors: Option<Vec<Rgb>>,
    pub normals: Option<Vec<Point3>>,
    /// Geometry precision in bits; coordinates live in `[0, 2^bit_depth - 1]`
    /// after [`quantize_and_dedup`].
    pub bit_depth: u32,
}

impl Default for PointCloud {
    fn default() -> Self {
        Self {
            positions: Vec::new(),
            colors: None,
            normals: None,
            bit_depth: DEFAULT_BIT_DEPTH,
        }
    }
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>) -> Self {
        Self {
            positions,
            ..Self::default()
        }
    }

    pub fn with_colors(mut self, colors: Vec<Rgb>) -> Result<Self> {
        if colors.len() != self.positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} colors for {} points",
                colors.len(),
                self.positions.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Point3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} normals for {} points",
                normals.len(),
                self.positions.len()
            )));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_bit_depth(mut self, bit_depth: u32) -> Self {
        self.bit_depth = bit_depth;
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest representable coordinate at this cloud's bit depth.
    pub fn max_coordinate(&self) -> f64 {
        ((1u64 << self.bit_depth) - 1) as f64
    }

    /// Checks the structural invariants: attribute lengths and unit normals.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} colors for {n} points",
                    c.len()
                )));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} normals for {n} points",
                    normals.len()
                )));
            }
            if let Some(i) = normals.iter().position(|v| (norm(*v) - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidArgument(format!("normal {i} is not unit length")));
            }
        }
        if let Some(i) = self
            .positions
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(())
    }

    /// Applies the same rigid translation to every point.
    pub fn translated(&self, offset: Point3) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            for k in 0..3 {
                p[k] += offset[k];
            }
        }
        out
    }
}

/// Axis-aligned box in voxel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_corner: Point3,
    pub max_corner: Point3,
}

impl BoundingBox {
    pub fn new(min_corner: Point3, max_corner: Point3) -> Result<Self> {
        if (0..3).any(|k| max_corner[k] < min_corner[k]) {
            return Err(Error::InvalidArgument(format!(
                "box max {max_corner:?} below min {min_corner:?}"
            )));
        }
        Ok(Self {
            min_corner,
            max_corner,
        })
    }

    /// Box anchored at the origin with the given extents.
    pub fn from_extent(extent: Point3) -> Result<Self> {
        Self::new([0.0; 3], extent)
    }

    pub fn extent(&self) -> Point3 {
        [
            self.max_corner[0] - self.min_corner[0],
            self.max_corner[1] - self.min_corner[1],
            self.max_corner[2] - self.min_corner[2],
        ]
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| p[k] >= self.min_corner[k] && p[k] <= self.max_corner[k])
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.contains(&other.min_corner) && self.contains(&other.max_corner)
    }
}

/// Componentwise min/max of the cloud's positions.
pub fn bounding_box(cloud: &PointCloud) -> Result<BoundingBox> {
    let mut it = cloud.positions.iter();
    let first = it.next().ok_or(Error::Empty("bounding box of an empty cloud"))?;
    let (mut lo, mut hi) = (*first, *first);
    for p in it {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Ok(BoundingBox {
        min_corner: lo,
        max_corner: hi,
    })
}

pub fn union_box(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    let mut out = *a;
    for k in 0..3 {
        out.min_corner[k] = a.min_corner[k].min(b.min_corner[k]);
        out.max_corner[k] = a.max_corner[k].max(b.max_corner[k]);
    }
    out
}

/// Rounds coordinates to the voxel grid and merges points falling into the
/// same voxel.
///
/// Rounding is half-away-from-zero. Coordinates are clamped into
/// `[0, 2^bit_depth - 1]`. The first point mapped to a voxel survives (output
/// keeps first-occurrence order) and takes the rounded componentwise mean of
/// all merged colours; normals are kept from the survivor.
pub fn quantize_and_dedup(cloud: &PointCloud) -> PointCloud {
    let max = cloud.max_coordinate();
    let mut clamped = 0usize;
    let mut slot_of: HashMap<[i64; 3], usize> = HashMap::with_capacity(cloud.len());
    let mut positions: Vec<Point3> = Vec::with_capacity(cloud.len());
    let mut color_sums: Vec<([u64; 3], u64)> = Vec::new();
    let mut normals: Vec<Point3> = Vec::new();

    for (i, p) in cloud.positions.iter().enumerate() {
        let q = p.map(|c| {
            let r = c.round();
            if r < 0.0 || r > max {
                clamped += 1;
            }
            r.clamp(0.0, max)
        });
        let key = q.map(|c| c as i64);
        let slot = *slot_of.entry(key).or_insert_with(|| {
            positions.push(q);
            if cloud.colors.is_some() {
                color_sums.push(([0; 3], 0));
            }
            if let Some(n) = &cloud.normals {
                normals.push(n[i]);
            }
            positions.len() - 1
        });
        if let Some(colors) = &cloud.colors {
            let (sum, count) = &mut color_sums[slot];
            for k in 0..3 {
                sum[k] += u64::from(colors[i][k]);
            }
            *count += 1;
        }
    }
    if clamped > 0 {
        log::warn!(
            "{clamped} coordinates clamped into the {}-bit range",
            cloud.bit_depth
        );
    }

    let colors = cloud.colors.as_ref().map(|_| {
        color_sums
            .iter()
            .map(|(sum, count)| sum.map(|s| (s as f64 / *count as f64).round() as u8))
            .collect()
    });
    PointCloud {
        positions,
        colors,
        normals: cloud.normals.as_ref().map(|_| normals),
        bit_depth: cloud.bit_depth,
    }
}

/// Uniformly scales and translates the cloud so that its bounding box fits
/// inside `target`, with the binding axis filling the target extent, then
/// re-quantizes.
pub fn normalize_to_box(cloud: &PointCloud, target: &BoundingBox) -> Result<PointCloud> {
    let bbox = bounding_box(cloud)?;
    let src = bbox.extent();
    let dst = target.extent();
    let scale = (0..3)
        .filter(|&k| src[k] > 0.0)
        .map(|k| dst[k] / src[k])
        .fold(f64::INFINITY, f64::min);
    if !scale.is_finite() {
        return Err(Error::Degenerate(
            "cloud occupies a single position; no scale can be derived".into(),
        ));
    }

    let mut out = cloud.clone();
    for p in &mut out.positions {
        for (k, c) in p.iter_mut().enumerate() {
            let v = (*c - bbox.min_corner[k]) * scale + target.min_corner[k];
            *c = v.round().clamp(target.min_corner[k], target.max_corner[k]);
        }
    }
    let needed_bits = target.max_corner.iter().map(|&c| bits_for(c)).max().unwrap_or(0);
    out.bit_depth = out.bit_depth.max(needed_bits);
    Ok(quantize_and_dedup(&out))
}

fn bits_for(max_coordinate: f64) -> u32 {
    let v = max_coordinate.max(0.0).ceil() as u64;
    64 - v.leading_zeros()
}

pub(crate) fn norm(v: Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_splits_neighbours() {
        let c = PointCloud::new(vec![[0.4, 0.0, 0.0], [0.6, 0.0, 0.0]]);
        let q = quantize_and_dedup(&c);
        assert_eq!(q.positions, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn duplicate_colors_are_averaged() {
        let c = PointCloud::new(vec![[0.4, 0.0, 0.0], [0.4, 0.0, 0.0]])
            .with_colors(vec![[0, 0, 0], [255, 255, 255]])
            .unwrap();
        let q = quantize_and_dedup(&c);
        assert_eq!(q.positions, vec![[0.0, 0.0, 0.0]]);
        // 127.5 rounds away from zero
        assert_eq!(q.colors.unwrap(), vec![[128, 128, 128]]);
    }

    #[test]
    fn integer_cloud_is_unchanged() {
        let c = PointCloud::new(vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
            .with_colors(vec![[1, 2, 3], [4, 5, 6]])
            .unwrap();
        assert_eq!(quantize_and_dedup(&c), c);
    }

    #[test]
    fn half_rounds_away_from_zero() {
        let c = PointCloud::new(vec![[2.5, 0.5, 1.5]]);
        assert_eq!(quantize_and_dedup(&c).positions, vec![[3.0, 1.0, 2.0]]);
    }

    #[test]
    fn unit_cube_scales_by_smallest_ratio() {
        let corners: Vec<Point3> = (0..8)
            .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
            .collect();
        let target = BoundingBox::from_extent([600.0, 1000.0, 400.0]).unwrap();
        let out = normalize_to_box(&PointCloud::new(corners), &target).unwrap();
        let b = bounding_box(&out).unwrap();
        assert_eq!(b.max_corner, [400.0, 400.0, 400.0]);
        assert_eq!(b.min_corner, [0.0; 3]);
    }

    #[test]
    fn cloud_equal_to_target_is_identity() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [600.0, 1000.0, 400.0], [10.0, 20.0, 30.0]]);
        let target = BoundingBox::from_extent([600.0, 1000.0, 400.0]).unwrap();
        assert_eq!(normalize_to_box(&c, &target).unwrap().positions, c.positions);
    }

    #[test]
    fn single_point_normalize_is_degenerate() {
        let c = PointCloud::new(vec![[1.0, 1.0, 1.0]]);
        let target = BoundingBox::from_extent([600.0, 1000.0, 400.0]).unwrap();
        assert!(matches!(normalize_to_box(&c, &target), Err(Error::Degenerate(_))));
    }

    #[test]
    fn boxes() {
        let c = PointCloud::new(vec![[1.0, 2.0, 3.0]]);
        let b = bounding_box(&c).unwrap();
        assert_eq!((b.min_corner, b.max_corner), ([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]));

        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [5.0, 1.0, 2.0]]);
        let b = bounding_box(&c).unwrap();
        assert_eq!((b.min_corner, b.max_corner), ([0.0; 3], [5.0, 1.0, 2.0]));

        let a = BoundingBox::new([0.0; 3], [1.0; 3]).unwrap();
        let b = BoundingBox::new([2.0; 3], [3.0; 3]).unwrap();
        let u = union_box(&a, &b);
        assert_eq!((u.min_corner, u.max_corner), ([0.0; 3], [3.0; 3]));
        assert!(u.contains_box(&a) && u.contains_box(&b));

        assert!(bounding_box(&PointCloud::default()).is_err());
    }

    #[test]
    fn attribute_length_mismatch_is_rejected() {
        let c = PointCloud::new(vec![[0.0; 3]; 2]);
        assert!(c.clone().with_colors(vec![[0, 0, 0]]).is_err());
        assert!(c.with_normals(vec![[0.0, 0.0, 1.0]; 3]).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_cloud() -> impl Strategy<Value = PointCloud> {
            prop::collection::vec(
                (
                    prop::array::uniform3(-5.0f64..1100.0),
                    prop::array::uniform3(any::<u8>()),
                ),
                1..80,
            )
            .prop_map(|pts| {
                let (p, c): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
                PointCloud::new(p).with_colors(c).unwrap()
            })
        }

        proptest! {
            #[test]
            fn quantize_is_idempotent(c in arb_cloud()) {
                let once = quantize_and_dedup(&c);
                prop_assert_eq!(quantize_and_dedup(&once), once.clone());
                let max = once.max_coordinate();
                let mut seen = std::collections::HashSet::new();
                for p in &once.positions {
                    prop_assert!(p.iter().all(|&v| v.fract() == 0.0 && (0.0..=max).contains(&v)));
                    prop_assert!(seen.insert(p.map(|v| v as i64)));
                }
            }

            #[test]
            fn normalized_cloud_fits_target(c in arb_cloud(), ext in prop::array::uniform3(10.0f64..1000.0)) {
                let target = BoundingBox::from_extent(ext.map(f64::round)).unwrap();
                if let Ok(out) = normalize_to_box(&c, &target) {
                    let b = bounding_box(&out).unwrap();
                    prop_assert!(target.contains_box(&b));
                }
            }
        }
    }
}
