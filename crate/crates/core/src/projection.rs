//! Six-view orthographic rendering of a point cloud onto the faces of a
//! bounding box.
//!
//! Y is up. Front/back look along ∓Z, right/left along ∓X and top/bottom
//! along ∓Y. Every view keeps, per pixel, the point nearest to its viewing
//! plane; equal depths resolve to the smaller point id.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{bounding_box, union_box};
use crate::image::{encode_pgm, encode_ppm};
use crate::{BoundingBox, Error, Image, Point3, PointCloud, Result, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Front,
    Back,
    Left,
    Right,
    Top,
    Bottom,
}

impl ViewKind {
    pub const ALL: [ViewKind; 6] = [
        ViewKind::Front,
        ViewKind::Back,
        ViewKind::Left,
        ViewKind::Right,
        ViewKind::Top,
        ViewKind::Bottom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Front => "front",
            ViewKind::Back => "back",
            ViewKind::Left => "left",
            ViewKind::Right => "right",
            ViewKind::Top => "top",
            ViewKind::Bottom => "bottom",
        }
    }

    /// Maps a point to (column, row, depth) in box-relative voxel units.
    fn map(self, p: &Point3, lo: &Point3, hi: &Point3) -> (f64, f64, f64) {
        let [x, y, z] = *p;
        match self {
            ViewKind::Front => (x - lo[0], hi[1] - y, hi[2] - z),
            ViewKind::Back => (hi[0] - x, hi[1] - y, z - lo[2]),
            ViewKind::Right => (hi[2] - z, hi[1] - y, hi[0] - x),
            ViewKind::Left => (z - lo[2], hi[1] - y, x - lo[0]),
            ViewKind::Top => (x - lo[0], z - lo[2], hi[1] - y),
            ViewKind::Bottom => (x - lo[0], hi[2] - z, y - lo[1]),
        }
    }

    /// (horizontal axis, vertical axis) of the raster in world coordinates.
    fn raster_axes(self) -> (usize, usize) {
        match self {
            ViewKind::Front | ViewKind::Back => (0, 1),
            ViewKind::Left | ViewKind::Right => (2, 1),
            ViewKind::Top | ViewKind::Bottom => (0, 2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOptions {
    /// Half-size of the square splat in pixels; 0 paints a single pixel.
    pub splat_radius: usize,
    pub background: Rgb,
    /// Pixels per voxel unit.
    pub resolution: f64,
    /// Colour used for clouds without colour attributes.
    pub default_color: Rgb,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            splat_radius: 1,
            background: [128, 128, 128],
            resolution: 1.0,
            default_color: [255, 255, 255],
        }
    }
}

/// One rendered view: colour raster, occupancy mask and depth buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub kind: ViewKind,
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<Rgb>,
    pub occupancy: Vec<bool>,
    /// Distance to the viewing plane; `+inf` where unoccupied.
    pub depth: Vec<f64>,
}

impl View {
    pub fn to_image(&self) -> Image {
        Image::from_rgb8(self.width, self.height, &self.rgb).expect("view dimensions are non-zero")
    }

    pub fn occupied_pixels(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        encode_ppm(self.width, self.height, &self.rgb)
    }

    pub fn mask_to_pgm(&self) -> Vec<u8> {
        let mask: Vec<u8> = self.occupancy.iter().map(|&o| if o { 255 } else { 0 }).collect();
        encode_pgm(self.width, self.height, &mask)
    }
}

/// Six views rendered from one bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub views: [View; 6],
    pub bbox: BoundingBox,
    pub resolution: f64,
}

impl ViewSet {
    pub fn view(&self, kind: ViewKind) -> &View {
        &self.views[ViewKind::ALL.iter().position(|k| *k == kind).unwrap()]
    }

    /// Writes `<view>.ppm` and `<view>_mask.pgm` for each of the six views.
    pub fn write_pnm(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for v in &self.views {
            std::fs::write(dir.join(format!("{}.ppm", v.kind.name())), v.to_ppm())?;
            std::fs::write(dir.join(format!("{}_mask.pgm", v.kind.name())), v.mask_to_pgm())?;
        }
        Ok(())
    }
}

fn raster_size(extent: f64, resolution: f64) -> usize {
    (extent * resolution).ceil() as usize + 1
}

fn render_view(kind: ViewKind, cloud: &PointCloud, bbox: &BoundingBox, opts: &ProjectionOptions) -> View {
    let extent = bbox.extent();
    let (ha, va) = kind.raster_axes();
    let width = raster_size(extent[ha], opts.resolution);
    let height = raster_size(extent[va], opts.resolution);
    let mut rgb = vec![opts.background; width * height];
    let mut occupancy = vec![false; width * height];
    let mut depth = vec![f64::INFINITY; width * height];
    let r = opts.splat_radius as isize;
    let (lo, hi) = (&bbox.min_corner, &bbox.max_corner);

    for (i, p) in cloud.positions.iter().enumerate() {
        let (u, v, d) = kind.map(p, lo, hi);
        let col = (u * opts.resolution).round() as isize;
        let row = (v * opts.resolution).round() as isize;
        let color = cloud.colors.as_ref().map_or(opts.default_color, |c| c[i]);
        let rows = (row - r).max(0)..=(row + r).min(height as isize - 1);
        for y in rows {
            let base = y as usize * width;
            for x in (col - r).max(0)..=(col + r).min(width as isize - 1) {
                let k = base + x as usize;
                // Points are visited in id order, so a strict test keeps the smaller id on ties.
                if d < depth[k] {
                    depth[k] = d;
                    rgb[k] = color;
                    occupancy[k] = true;
                }
            }
        }
    }
    View {
        kind,
        width,
        height,
        rgb,
        occupancy,
        depth,
    }
}

/// Renders the cloud onto the six faces of `bbox`.
pub fn project_six_views(
    cloud: &PointCloud,
    bbox: &BoundingBox,
    opts: &ProjectionOptions,
) -> Result<ViewSet> {
    if cloud.is_empty() {
        return Err(Error::Empty("cannot project an empty cloud"));
    }
    if !(opts.resolution > 0.0 && opts.resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!("resolution {}", opts.resolution)));
    }
    if let Some(i) = cloud.positions.iter().position(|p| !bbox.contains(p)) {
        return Err(Error::InvalidArgument(format!(
            "point {i} at {:?} lies outside the projection box",
            cloud.positions[i]
        )));
    }
    let views: Vec<View> = ViewKind::ALL
        .par_iter()
        .map(|&k| render_view(k, cloud, bbox, opts))
        .collect();
    Ok(ViewSet {
        views: views.try_into().expect("six views"),
        bbox: *bbox,
        resolution: opts.resolution,
    })
}

/// Renders both clouds on their union box so the two view sets are pixel aligned.
pub fn project_pair(
    reference: &PointCloud,
    distorted: &PointCloud,
    opts: &ProjectionOptions,
) -> Result<(ViewSet, ViewSet)> {
    let bbox = union_box(&bounding_box(reference)?, &bounding_box(distorted)?);
    let (a, b) = rayon::join(
        || project_six_views(reference, &bbox, opts),
        || project_six_views(distorted, &bbox, opts),
    );
    Ok((a?, b?))
}
