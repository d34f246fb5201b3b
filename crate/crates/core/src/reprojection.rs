//! Exocentric observation to egocentric sparse map, and 2D pose-map rendering.

use serde::{Deserialize, Serialize};

use crate::alignment::{exo_to_ego_transform, HandLayout, HandPose};
use crate::calibration::{apply_scale, compute_scale, hand_region_from_depth, ScaleFactor};
use crate::error::{Error, Result};
use crate::geometry::{apply_transform, project_points, unproject, CameraIntrinsics, SimilarityTransform};
use crate::image::{ensure_dims, DepthMap, RgbImage};

pub use crate::geometry::SparseEgoMap;

/// Parent of each keypoint in the 21-keypoint hand tree (wrist = 0, then
/// thumb, index, middle, ring and little finger, four joints each).
pub const HAND_PARENTS: [Option<usize>; 21] = [
    None,
    Some(0), Some(1), Some(2), Some(3),
    Some(0), Some(5), Some(6), Some(7),
    Some(0), Some(9), Some(10), Some(11),
    Some(0), Some(13), Some(14), Some(15),
    Some(0), Some(17), Some(18), Some(19),
];

/// Bones of one hand as `(parent, child)` keypoint pairs.
pub fn hand_bones() -> impl Iterator<Item = (usize, usize)> {
    HAND_PARENTS
        .iter()
        .enumerate()
        .filter_map(|(child, parent)| parent.map(|p| (p, child)))
}

/// 0 = wrist, 1..=5 = thumb..little finger.
pub fn finger_of(keypoint: usize) -> usize {
    match keypoint % 21 {
        0 => 0,
        k => (k - 1) / 4 + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorScheme {
    /// One hue per finger, shared by both hands.
    FingerHue,
    /// One hue per finger, darker shade for the second hand.
    FingerHueByHand,
}

impl ColorScheme {
    /// Color of a keypoint (and of the bone ending at it).
    pub fn color(self, keypoint: usize) -> [f64; 3] {
        const FINGERS: [[f64; 3]; 6] = [
            [1.0, 1.0, 1.0], // wrist
            [1.0, 0.0, 0.0], // thumb
            [1.0, 1.0, 0.0], // index
            [0.0, 1.0, 0.0], // middle
            [0.0, 1.0, 1.0], // ring
            [0.0, 0.0, 1.0], // little
        ];
        let base = FINGERS[finger_of(keypoint)];
        match self {
            ColorScheme::FingerHueByHand if keypoint >= 21 => base.map(|c| c * 0.6),
            _ => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseMapStyle {
    pub keypoint_radius: u32,
    pub bone_thickness: u32,
    pub color_scheme: ColorScheme,
    pub background: [f64; 3],
}

impl Default for PoseMapStyle {
    fn default() -> Self {
        Self {
            keypoint_radius: 4,
            bone_thickness: 3,
            color_scheme: ColorScheme::FingerHue,
            background: [0.0, 0.0, 0.0],
        }
    }
}

impl PoseMapStyle {
    pub fn validate(&self) -> Result<()> {
        if self.keypoint_radius < 1 {
            return Err(Error::validation("keypoint_radius", "must be >= 1"));
        }
        if self.bone_thickness < 1 {
            return Err(Error::validation("bone_thickness", "must be >= 1"));
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::validation("background", "channels must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Inputs to the sparse-map stage.
#[derive(Debug, Clone, Copy)]
pub struct ExoObservation<'a> {
    pub image: &'a RgbImage,
    pub depth: &'a DepthMap,
    pub intrinsics: &'a CameraIntrinsics,
    pub hand_pose: &'a HandPose,
    /// Metric hand depth rendered in the exocentric view; `None` means the
    /// depth is already metric.
    pub hand_depth: Option<&'a DepthMap>,
}

#[derive(Debug, Clone)]
pub struct SparseMapResult {
    pub map: SparseEgoMap,
    pub scale: ScaleFactor,
    pub exo_to_ego: SimilarityTransform,
    pub point_count: usize,
}

/// Calibrates depth, lifts the exocentric view to a point cloud, moves it
/// into the egocentric frame estimated from the hand poses and projects it.
pub fn build_sparse_ego_map(
    exo: &ExoObservation<'_>,
    ego_pose: &HandPose,
    ego_intrinsics: &CameraIntrinsics,
    delta: f64,
    splat_radius: usize,
) -> Result<SparseMapResult> {
    ensure_dims("exocentric depth", exo.image.dims(), exo.depth.dims())?;
    ensure_dims("exocentric intrinsics", exo.intrinsics.dims(), exo.image.dims())?;
    if exo.hand_pose.layout() != ego_pose.layout() {
        return Err(Error::validation("layout", "exocentric and egocentric poses differ in layout"));
    }

    let scale = match exo.hand_depth {
        Some(hand) => {
            let region = hand_region_from_depth(hand);
            compute_scale(hand, exo.depth, &region, delta)?
        }
        None => ScaleFactor::unit(),
    };
    let metric_depth = apply_scale(exo.depth, &scale);
    let cloud_exo = unproject(&metric_depth, exo.image, exo.intrinsics)?;
    if cloud_exo.is_empty() {
        return Err(Error::NoValidDepth);
    }
    let exo_to_ego = exo_to_ego_transform(exo.hand_pose, ego_pose)?;
    let cloud_ego = apply_transform(&cloud_exo, &exo_to_ego);
    let map = project_points(&cloud_ego, ego_intrinsics, splat_radius);
    Ok(SparseMapResult {
        map,
        scale,
        exo_to_ego,
        point_count: cloud_exo.len(),
    })
}

/// Renders keypoint disks and skeleton bones of a camera-frame hand pose.
pub fn rasterize_pose_map(
    pose: &HandPose,
    intrinsics: &CameraIntrinsics,
    style: &PoseMapStyle,
) -> Result<RgbImage> {
    style.validate()?;
    let (w, h) = intrinsics.dims();
    let mut img = RgbImage::filled(w, h, style.background);
    let pixels: Vec<Option<(i64, i64)>> = pose
        .keypoints()
        .iter()
        .map(|p| intrinsics.project_pixel(p))
        .collect();
    let hands = match pose.layout() {
        HandLayout::SingleHand21 => 1,
        HandLayout::TwoHands42 => 2,
    };

    let half = style.bone_thickness as f64 / 2.0;
    for hand in 0..hands {
        let off = hand * 21;
        for (a, b) in hand_bones() {
            if let (Some(pa), Some(pb)) = (pixels[off + a], pixels[off + b]) {
                let color = style.color_scheme.color(off + b);
                draw_segment(&mut img, pa, pb, half, color);
            }
        }
    }
    let r = style.keypoint_radius as i64;
    for (k, px) in pixels.iter().enumerate() {
        if let Some(c) = px {
            draw_disk(&mut img, *c, r, style.color_scheme.color(k));
        }
    }
    Ok(img)
}

fn clip_range(lo: i64, hi: i64, len: usize) -> Option<(usize, usize)> {
    let lo = lo.max(0);
    let hi = hi.min(len as i64 - 1);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

fn draw_disk(img: &mut RgbImage, (cx, cy): (i64, i64), r: i64, color: [f64; 3]) {
    let (w, h) = img.dims();
    let (Some((x0, x1)), Some((y0, y1))) = (
        clip_range(cx.saturating_sub(r), cx.saturating_add(r), w),
        clip_range(cy.saturating_sub(r), cy.saturating_add(r), h),
    ) else {
        return;
    };
    for y in y0..=y1 {
        let dy = y as i64 - cy;
        for x in x0..=x1 {
            let dx = x as i64 - cx;
            if dx * dx + dy * dy <= r * r {
                img.set(x, y, color);
            }
        }
    }
}

/// Paints every pixel center within `half_width` of the segment.
fn draw_segment(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), half_width: f64, color: [f64; 3]) {
    let (w, h) = img.dims();
    let pad = half_width.ceil() as i64;
    let (Some((x0, x1)), Some((y0, y1))) = (
        clip_range(a.0.min(b.0).saturating_sub(pad), a.0.max(b.0).saturating_add(pad), w),
        clip_range(a.1.min(b.1).saturating_sub(pad), a.1.max(b.1).saturating_add(pad), h),
    ) else {
        return;
    };
    let (ax, ay) = (a.0 as f64, a.1 as f64);
    let (ex, ey) = ((b.0 - a.0) as f64, (b.1 - a.1) as f64);
    let len2 = ex * ex + ey * ey;
    let limit = half_width * half_width;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (px, py) = (x as f64 - ax, y as f64 - ay);
            let t = if len2 > 0.0 {
                ((px * ex + py * ey) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (dx, dy) = (px - t * ex, py - t * ey);
            if dx * dx + dy * dy <= limit {
                img.set(x, y, color);
            }
        }
    }
}
