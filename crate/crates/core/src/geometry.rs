//! Pinhole cameras, colored point clouds, similarity transforms and
//! z-buffered projection of point clouds into sparse image grids.
//!
//! Pixel indices denote pixel centers. Projection rounds to the nearest
//! integer with ties to even, so `unproject` followed by `project_points`
//! lands every point back on its source pixel.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_dims, DepthMap, Mask, RgbImage};

/// Points at or in front of this camera-frame depth (meters) are discarded.
pub const NEAR_PLANE: f64 = 1e-6;

pub const DEFAULT_SPLAT_RADIUS: usize = 1;

/// RGB fill written to pixels of a sparse map that received no point.
pub const INVALID_FILL: [f64; 3] = [0.5, 0.5, 0.5];

const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0) {
            return Err(Error::validation("fx", "must be finite and > 0"));
        }
        if !(self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::validation("fy", "must be finite and > 0"));
        }
        if !self.cx.is_finite() {
            return Err(Error::validation("cx", "must be finite"));
        }
        if !self.cy.is_finite() {
            return Err(Error::validation("cy", "must be finite"));
        }
        if self.width == 0 {
            return Err(Error::validation("width", "must be >= 1"));
        }
        if self.height == 0 {
            return Err(Error::validation("height", "must be >= 1"));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// The 3x3 calibration matrix.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Continuous image coordinates of a camera-frame point, or `None` behind the near plane.
    pub fn project_continuous(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if !(p.z > NEAR_PLANE) {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Nearest pixel index (ties to even) of a camera-frame point. The result
    /// may lie outside the image.
    pub fn project_pixel(&self, p: &Vector3<f64>) -> Option<(i64, i64)> {
        let (u, v) = self.project_continuous(p)?;
        let (u, v) = (u.round_ties_even(), v.round_ties_even());
        if !(u.is_finite() && v.is_finite()) || u.abs() > 1e15 || v.abs() > 1e15 {
            return None;
        }
        Some((u as i64, v as i64))
    }

    /// Camera-frame point at pixel center `(x, y)` with depth `d`.
    pub fn back_project(&self, x: usize, y: usize, d: f64) -> Vector3<f64> {
        Vector3::new(
            (x as f64 - self.cx) * d / self.fx,
            (y as f64 - self.cy) * d / self.fy,
            d,
        )
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as u64) < self.width as u64 && (v as u64) < self.height as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub position: Vector3<f64>,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<ColoredPoint>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, position: Vector3<f64>, color: [f64; 3]) {
        self.points.push(ColoredPoint { position, color });
    }
}

/// Map `p -> scale * rotation * p + translation` with a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::validation("scale", "must be finite and > 0"));
        }
        if rotation.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("rotation", "entries must be finite"));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if ortho > ROTATION_TOLERANCE {
            return Err(Error::validation(
                "rotation",
                format!("not orthonormal (|R^T R - I|_F = {ortho:e})"),
            ));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::validation(
                "rotation",
                format!("determinant {det} is not +1"),
            ));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("translation", "entries must be finite"));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub(crate) fn from_parts_unchecked(
        scale: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Self {
        Self {
            scale,
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts_unchecked(1.0, Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::from_parts_unchecked(1.0, Matrix3::identity(), t)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        Self::from_parts_unchecked(
            self.scale * other.scale,
            self.rotation * other.rotation,
            self.scale * (self.rotation * other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> SimilarityTransform {
        invert_transform(self)
    }

    /// Homogeneous 4x4 form.
    pub fn to_matrix4(&self) -> nalgebra::Matrix4<f64> {
        let mut m = nalgebra::Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.rotation * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

pub fn invert_transform(t: &SimilarityTransform) -> SimilarityTransform {
    let inv_scale = 1.0 / t.scale;
    let rt = t.rotation.transpose();
    SimilarityTransform::from_parts_unchecked(inv_scale, rt, -(inv_scale * (rt * t.translation)))
}

/// Back-projects every valid depth pixel into a colored camera-frame point,
/// in row-major pixel order.
pub fn unproject(
    depth: &DepthMap,
    color: &RgbImage,
    intrinsics: &CameraIntrinsics,
) -> Result<PointCloud> {
    ensure_dims("unproject color", depth.dims(), color.dims())?;
    ensure_dims("unproject intrinsics", intrinsics.dims(), depth.dims())?;
    let mut cloud = PointCloud::new();
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if depth.is_valid(x, y) {
                cloud.push(intrinsics.back_project(x, y, depth.get(x, y)), color.get(x, y));
            }
        }
    }
    Ok(cloud)
}

pub fn apply_transform(cloud: &PointCloud, t: &SimilarityTransform) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| ColoredPoint {
                position: t.apply(&p.position),
                color: p.color,
            })
            .collect(),
    }
}

/// Sparse image produced by projecting a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEgoMap {
    pub rgb: RgbImage,
    pub validity: Mask,
    pub depth_buffer: DepthMap,
}

impl SparseEgoMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            rgb: RgbImage::filled(width, height, INVALID_FILL),
            validity: Mask::new(width, height, false),
            depth_buffer: DepthMap::invalid(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.rgb.dims()
    }

    pub fn valid_count(&self) -> usize {
        self.validity.count()
    }

    pub fn valid_fraction(&self) -> f64 {
        let (w, h) = self.dims();
        self.valid_count() as f64 / (w * h) as f64
    }
}

/// Z-buffered projection. Each point paints a `(2r+1)^2` square around its
/// pixel; a pixel keeps the point with the smallest depth, ties going to the
/// lower point index.
pub fn project_points(
    cloud: &PointCloud,
    intrinsics: &CameraIntrinsics,
    splat_radius: usize,
) -> SparseEgoMap {
    let (w, h) = intrinsics.dims();
    // (depth, point index) of the current winner per pixel
    let mut winner: Vec<Option<(f64, usize)>> = vec![None; w * h];
    let r = splat_radius as i64;

    for (idx, p) in cloud.points.iter().enumerate() {
        let Some((u, v)) = intrinsics.project_pixel(&p.position) else {
            continue;
        };
        let z = p.position.z;
        for dv in -r..=r {
            for du in -r..=r {
                let (px, py) = (u + du, v + dv);
                if !intrinsics.contains(px, py) {
                    continue;
                }
                let slot = &mut winner[py as usize * w + px as usize];
                let replace = match *slot {
                    None => true,
                    Some((zd, zi)) => z < zd || (z == zd && idx < zi),
                };
                if replace {
                    *slot = Some((z, idx));
                }
            }
        }
    }

    let mut out = SparseEgoMap::empty(w, h);
    for (i, slot) in winner.iter().enumerate() {
        if let Some((z, idx)) = *slot {
            let (x, y) = (i % w, i / w);
            out.rgb.set(x, y, cloud.points[idx].color);
            out.validity.set(x, y, true);
            out.depth_buffer.set(x, y, z);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k(fx: f64, cx: f64, w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::new(fx, fx, cx, cx, w, h).unwrap()
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, f64::NAN, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn unproject_single_pixel_on_axis() {
        let depth = DepthMap::filled(1, 1, 2.0);
        let color = RgbImage::filled(1, 1, [0.2, 0.4, 0.6]);
        let cloud = unproject(&depth, &color, &k(1.0, 0.0, 1, 1)).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].position, Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(cloud.points[0].color, [0.2, 0.4, 0.6]);
    }

    #[test]
    fn unproject_all_invalid_is_empty() {
        let depth = DepthMap::invalid(3, 2);
        let color = RgbImage::filled(3, 2, [0.0; 3]);
        let cloud = unproject(&depth, &color, &k(1.0, 0.0, 3, 2)).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn unproject_dimension_mismatch() {
        let depth = DepthMap::filled(3, 2, 1.0);
        let color = RgbImage::filled(2, 3, [0.0; 3]);
        assert!(matches!(
            unproject(&depth, &color, &k(1.0, 0.0, 3, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let color = RgbImage::filled(3, 2, [0.0; 3]);
        assert!(unproject(&depth, &color, &k(1.0, 0.0, 4, 2)).is_err());
    }

    #[test]
    fn unproject_project_round_trip_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..16).map(|_| rng.random_range(0.5..3.0)).collect();
        let depth = DepthMap::from_values(4, 4, values).unwrap();
        let pixels: Vec<[f64; 3]> = (0..16)
            .map(|i| [i as f64 / 16.0, 0.5, 1.0 - i as f64 / 16.0])
            .collect();
        let color = RgbImage::from_pixels(4, 4, pixels).unwrap();
        let intr = k(100.0, 2.0, 4, 4);
        let cloud = unproject(&depth, &color, &intr).unwrap();
        assert_eq!(cloud.len(), 16);
        for (i, p) in cloud.points.iter().enumerate() {
            let (u, v) = intr.project_pixel(&p.position).unwrap();
            assert_eq!((u, v), ((i % 4) as i64, (i / 4) as i64));
        }
        let map = project_points(&cloud, &intr, 0);
        assert_eq!(map.valid_count(), 16);
        for y in 0..4 {
            for x in 0..4 {
                let d = depth.get(x, y);
                assert!((map.depth_buffer.get(x, y) - d).abs() <= 1e-9 * d);
                assert_eq!(map.rgb.get(x, y), color.get(x, y));
            }
        }
    }

    #[test]
    fn apply_transform_examples() {
        let mut cloud = PointCloud::new();
        cloud.push(Vector3::new(0.0, 0.0, 2.0), [1.0, 0.0, 0.0]);
        assert_eq!(apply_transform(&cloud, &SimilarityTransform::identity()), cloud);

        let t = SimilarityTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(
            apply_transform(&cloud, &t).points[0].position,
            Vector3::new(1.0, 0.0, 2.0)
        );

        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let t = SimilarityTransform::new(2.0, *rz.matrix(), Vector3::zeros()).unwrap();
        let p = t.apply(&Vector3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn transform_rejects_improper_rotation() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(SimilarityTransform::new(1.0, reflect, Vector3::zeros()).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(SimilarityTransform::new(1.0, skew, Vector3::zeros()).is_err());
        assert!(SimilarityTransform::new(0.0, Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn invert_examples() {
        let id = SimilarityTransform::identity();
        assert_eq!(invert_transform(&id), id);
        let t = SimilarityTransform::from_translation(Vector3::new(1.0, -2.0, 3.0));
        let inv = invert_transform(&t);
        assert_eq!(inv.translation(), &Vector3::new(-1.0, 2.0, -3.0));
        assert_eq!(inv.scale(), 1.0);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let r = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let t = SimilarityTransform::new(1.7, *r.matrix(), Vector3::new(0.5, 2.0, -1.0)).unwrap();
        let c = t.compose(&t.inverse());
        assert_abs_diff_eq!(c.scale(), 1.0, epsilon = 1e-12);
        assert!((c.rotation() - Matrix3::identity()).norm() < 1e-9);
        assert!(c.translation().norm() < 1e-9);
        let m = t.to_matrix4() * t.inverse().to_matrix4();
        assert!((m - nalgebra::Matrix4::identity()).norm() < 1e-9);
    }

    #[test]
    fn project_optical_axis_point() {
        let mut cloud = PointCloud::new();
        cloud.push(Vector3::new(0.0, 0.0, 2.0), [0.1, 0.2, 0.3]);
        let map = project_points(&cloud, &k(64.0, 32.0, 64, 64), 0);
        assert_eq!(map.valid_count(), 1);
        assert!(map.validity.get(32, 32));
        assert_eq!(map.rgb.get(32, 32), [0.1, 0.2, 0.3]);
        assert_eq!(map.rgb.get(0, 0), INVALID_FILL);
    }

    #[test]
    fn nearer_point_wins() {
        let intr = k(64.0, 32.0, 64, 64);
        let mut cloud = PointCloud::new();
        cloud.push(Vector3::new(0.0, 0.0, 2.0), [1.0, 0.0, 0.0]);
        cloud.push(Vector3::new(0.0, 0.0, 1.0), [0.0, 1.0, 0.0]);
        let map = project_points(&cloud, &intr, 0);
        assert_eq!(map.rgb.get(32, 32), [0.0, 1.0, 0.0]);
        assert_eq!(map.depth_buffer.get(32, 32), 1.0);
    }

    #[test]
    fn equal_depth_goes_to_lower_index() {
        let intr = k(64.0, 32.0, 64, 64);
        let mut cloud = PointCloud::new();
        cloud.push(Vector3::new(0.0, 0.0, 1.0), [1.0, 0.0, 0.0]);
        cloud.push(Vector3::new(0.0, 0.0, 1.0), [0.0, 1.0, 0.0]);
        assert_eq!(project_points(&cloud, &intr, 1).rgb.get(32, 32), [1.0, 0.0, 0.0]);
        cloud.points.reverse();
        assert_eq!(project_points(&cloud, &intr, 1).rgb.get(32, 32), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn splat_paints_neighborhood_and_clips() {
        let intr = k(64.0, 32.0, 64, 64);
        let mut cloud = PointCloud::new();
        cloud.push(Vector3::new(0.0, 0.0, 2.0), [1.0, 1.0, 1.0]);
        assert_eq!(project_points(&cloud, &intr, 1).valid_count(), 9);
        assert_eq!(project_points(&cloud, &intr, 2).valid_count(), 25);
        // corner point: only the in-bounds quarter survives
        let corner = CameraIntrinsics::new(64.0, 64.0, 0.0, 0.0, 64, 64).unwrap();
        assert_eq!(project_points(&cloud, &corner, 1).valid_count(), 4);
    }

    #[test]
    fn near_plane_and_empty_cloud() {
        let intr = k(64.0, 32.0, 64, 64);
        let mut cloud = PointCloud::new();
        assert_eq!(project_points(&cloud, &intr, 1).valid_count(), 0);
        cloud.push(Vector3::new(0.0, 0.0, 1e-7), [1.0; 3]);
        cloud.push(Vector3::new(0.0, 0.0, -1.0), [1.0; 3]);
        assert_eq!(project_points(&cloud, &intr, 1).valid_count(), 0);
    }

    #[test]
    fn projection_rounds_ties_to_even() {
        let intr = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 8, 8).unwrap();
        assert_eq!(intr.project_pixel(&Vector3::new(2.5, 3.5, 1.0)), Some((2, 4)));
    }
}
