//! Seeded synthetic scenes with two calibrated cameras and two hands.
//!
//! Geometry is a set of colored surfels in a world frame whose y axis points
//! down and z axis forward (the camera convention). A scene holds a textured
//! back wall, a textured table top, a box standing on the table and two
//! hands described by 42 keypoints and surfel "flesh" around them.
//!
//! [`oracle_render`] rasterizes surfels with its own transform, rounding and
//! z-buffer loop; it does not call into [`crate::geometry`], so agreement
//! with the reprojection pipeline is an independent check.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{HandLayout, HandPose};
use crate::geometry::{invert_transform, CameraIntrinsics, PointCloud, SimilarityTransform};
use crate::image::{DepthMap, RgbImage};
use crate::reprojection::HAND_PARENTS;

/// Splat radius used by the oracle renderer.
pub const ORACLE_SPLAT_RADIUS: i64 = 1;

/// Oracle-render background color for pixels no surfel reached.
pub const EMPTY_COLOR: [f64; 3] = [0.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels, shared by both cameras.
    pub focal_length: f64,
    /// Surfel spacing (meters) on near geometry; the back wall uses twice this.
    pub surfel_spacing: f64,
    /// Checker cell size (meters) of the wall and table textures.
    pub texture_cell: f64,
    /// Amplitude (meters) of seeded perturbations of camera and object placement.
    pub jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            focal_length: 420.0,
            surfel_spacing: 0.0025,
            texture_cell: 0.3,
            jitter: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfelKind {
    Wall,
    Table,
    Box,
    Hand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    /// World to camera, rigid.
    pub pose: SimilarityTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub surfels: PointCloud,
    pub kinds: Vec<SurfelKind>,
    pub hand_keypoints_world: Vec<Vector3<f64>>,
    pub exo_camera: Camera,
    pub ego_camera: Camera,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Exo,
    Ego,
}

impl SyntheticScene {
    pub fn camera(&self, which: View) -> &Camera {
        match which {
            View::Exo => &self.exo_camera,
            View::Ego => &self.ego_camera,
        }
    }

    /// Hand keypoints expressed in the selected camera frame.
    pub fn hand_pose(&self, which: View) -> HandPose {
        let pose = self.camera(which).pose;
        HandPose::new(
            HandLayout::TwoHands42,
            self.hand_keypoints_world.iter().map(|p| pose.apply(p)).collect(),
        )
        .expect("scene keypoints are finite and 42 long")
    }
}

fn quantize(c: f64) -> f64 {
    (c.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn random_color(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> [f64; 3] {
    [
        quantize(rng.random_range(lo..hi)),
        quantize(rng.random_range(lo..hi)),
        quantize(rng.random_range(lo..hi)),
    ]
}

/// World-to-camera rigid pose looking from `eye` at `target`, y axis down.
fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> SimilarityTransform {
    let z = (target - eye).normalize();
    let up = Vector3::new(0.0, -1.0, 0.0);
    let x = z.cross(&up).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    SimilarityTransform::new(1.0, r, -(r * eye)).expect("look_at builds a proper rotation")
}

struct Builder {
    cloud: PointCloud,
    kinds: Vec<SurfelKind>,
}

impl Builder {
    fn push(&mut self, p: Vector3<f64>, color: [f64; 3], kind: SurfelKind) {
        self.cloud.push(p, color);
        self.kinds.push(kind);
    }

    /// Rectangle `origin + a*u + b*v` for `a in [0, |u|]`, `b in [0, |v|]`,
    /// colored by `color(a, b)`.
    fn rect(
        &mut self,
        origin: Vector3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        spacing: f64,
        kind: SurfelKind,
        color: impl Fn(f64, f64) -> [f64; 3],
    ) {
        let (lu, lv) = (u.norm(), v.norm());
        let (du, dv) = (u / lu, v / lv);
        let nu = (lu / spacing).ceil() as usize;
        let nv = (lv / spacing).ceil() as usize;
        for j in 0..=nv {
            let b = lv * j as f64 / nv as f64;
            for i in 0..=nu {
                let a = lu * i as f64 / nu as f64;
                self.push(origin + du * a + dv * b, color(a, b), kind);
            }
        }
    }

    fn sphere(&mut self, center: Vector3<f64>, radius: f64, spacing: f64, color: [f64; 3]) {
        let area = 4.0 * std::f64::consts::PI * radius * radius;
        let n = ((area / (spacing * spacing)).ceil() as usize).max(16);
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            let d = Vector3::new(r * th.cos(), y, r * th.sin());
            self.push(center + d * radius, color, SurfelKind::Hand);
        }
    }

    fn capsule_body(&mut self, a: Vector3<f64>, b: Vector3<f64>, radius: f64, spacing: f64, color: [f64; 3]) {
        let axis = b - a;
        let len = axis.norm();
        if len < 1e-9 {
            return;
        }
        let dir = axis / len;
        let helper = if dir.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = dir.cross(&helper).normalize();
        let e2 = dir.cross(&e1);
        let rings = (len / spacing).ceil() as usize;
        let around = ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize).max(8);
        for i in 0..=rings {
            let c = a + axis * (i as f64 / rings as f64);
            for k in 0..around {
                let th = 2.0 * std::f64::consts::PI * k as f64 / around as f64;
                self.push(c + (e1 * th.cos() + e2 * th.sin()) * radius, color, SurfelKind::Hand);
            }
        }
    }
}

/// One 21-keypoint hand in a local frame (meters): wrist at the origin,
/// fingers fanning toward -y, curling toward +z. `mirror` flips x.
fn hand_keypoints(rng: &mut ChaCha20Rng, mirror: bool) -> Vec<Vector3<f64>> {
    let sx = if mirror { -1.0 } else { 1.0 };
    let mut pts = vec![Vector3::zeros()];
    // (spread angle, palm length, phalanx lengths)
    let fingers: [(f64, f64, [f64; 3]); 5] = [
        (-0.9, 0.035, [0.032, 0.028, 0.024]),
        (-0.3, 0.085, [0.040, 0.025, 0.020]),
        (-0.05, 0.085, [0.044, 0.028, 0.021]),
        (0.2, 0.080, [0.040, 0.026, 0.020]),
        (0.45, 0.072, [0.032, 0.020, 0.018]),
    ];
    for (spread, palm, phal) in fingers {
        let spread = spread + rng.random_range(-0.05..0.05);
        let curl0: f64 = rng.random_range(0.1..0.5);
        let dir_in_plane = Vector3::new(sx * spread.sin(), -spread.cos(), 0.0);
        let mut p = dir_in_plane * palm;
        pts.push(p);
        let mut curl = curl0;
        for l in phal {
            let d = (dir_in_plane * curl.cos() + Vector3::new(0.0, 0.0, curl.sin())).normalize();
            p += d * l;
            pts.push(p);
            curl += rng.random_range(0.2..0.5);
        }
    }
    debug_assert_eq!(pts.len(), 21);
    pts
}

/// Builds a deterministic scene from `(seed, config)`.
pub fn make_scene(seed: u64, config: &SceneConfig) -> SyntheticScene {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let j = config.jitter;
    let jit = |rng: &mut ChaCha20Rng| Vector3::new(rng.random_range(-j..=j), rng.random_range(-j..=j), rng.random_range(-j..=j));

    let mut b = Builder {
        cloud: PointCloud::new(),
        kinds: Vec::new(),
    };
    let s = config.surfel_spacing;
    let cell = config.texture_cell;

    // checker palettes
    let wall_colors: Vec<[f64; 3]> = (0..64).map(|_| random_color(&mut rng, 0.15, 0.95)).collect();
    let table_colors: Vec<[f64; 3]> = (0..64).map(|_| random_color(&mut rng, 0.15, 0.95)).collect();
    let checker = |palette: &[[f64; 3]], a: f64, b: f64| -> [f64; 3] {
        let (i, k) = ((a / cell).floor() as usize, (b / cell).floor() as usize);
        palette[(i * 7 + k * 13) % palette.len()]
    };

    let table_y = 0.15 + rng.random_range(-j..=j);
    let wall_z = 2.2;

    // back wall, x in [-2.5, 2.5], y in [-2.5, table_y]
    b.rect(
        Vector3::new(-2.5, -2.5, wall_z),
        Vector3::new(5.0, 0.0, 0.0),
        Vector3::new(0.0, 2.5 + table_y, 0.0),
        2.0 * s,
        SurfelKind::Wall,
        |a, bb| checker(&wall_colors, a, bb),
    );
    // table top, x in [-1.5, 1.5], z in [0.2, wall_z]
    b.rect(
        Vector3::new(-1.5, table_y, 0.2),
        Vector3::new(3.0, 0.0, 0.0),
        Vector3::new(0.0, 0.0, wall_z - 0.2),
        s,
        SurfelKind::Table,
        |a, bb| checker(&table_colors, a, bb),
    );

    // box on the table, right of and behind the hands
    let size = Vector3::new(0.22, 0.18, 0.2) + jit(&mut rng) * 0.5;
    let corner = Vector3::new(0.18, table_y - size.y, 1.05) + Vector3::new(rng.random_range(-j..=j), 0.0, rng.random_range(-j..=j));
    let face_colors: Vec<[f64; 3]> = (0..6).map(|_| random_color(&mut rng, 0.1, 0.9)).collect();
    let (ex, ey, ez) = (Vector3::x() * size.x, Vector3::y() * size.y, Vector3::z() * size.z);
    let faces = [
        (corner, ex, ey),            // front
        (corner + ez, ex, ey),       // back
        (corner, ez, ey),            // left
        (corner + ex, ez, ey),       // right
        (corner, ex, ez),            // top
        (corner + ey, ex, ez),       // bottom
    ];
    for (f, (o, u, v)) in faces.into_iter().enumerate() {
        let c = face_colors[f];
        b.rect(o, u, v, s, SurfelKind::Box, |_, _| c);
    }

    // two hands above the table
    let hand_center = Vector3::new(-0.02, table_y - 0.12, 0.8) + jit(&mut rng);
    let mut keypoints = Vec::with_capacity(42);
    for (h, offset) in [(-0.11, false), (0.11, true)].into_iter().enumerate() {
        let (dx, mirror) = offset;
        let local = hand_keypoints(&mut rng, mirror);
        let rot = Rotation3::from_euler_angles(
            rng.random_range(-0.9..-0.5),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.2..0.2) + if h == 0 { 0.3 } else { -0.3 },
        );
        let base = hand_center + Vector3::new(dx, 0.0, rng.random_range(-0.03..0.03));
        keypoints.extend(local.iter().map(|p| base + rot * p));
    }
    let skin: Vec<[f64; 3]> = (0..2)
        .map(|_| {
            [
                quantize(rng.random_range(0.75..0.95)),
                quantize(rng.random_range(0.55..0.7)),
                quantize(rng.random_range(0.45..0.6)),
            ]
        })
        .collect();
    let flesh_spacing = 0.6 * s;
    for (k, p) in keypoints.iter().enumerate() {
        let color = skin[k / 21];
        b.sphere(*p, 0.009, flesh_spacing, color);
        if let Some(parent) = HAND_PARENTS[k % 21] {
            let q = keypoints[(k / 21) * 21 + parent];
            b.capsule_body(q, *p, 0.007, flesh_spacing, color);
        }
    }

    let intrinsics = CameraIntrinsics::new(
        config.focal_length,
        config.focal_length,
        (config.width as f64 - 1.0) / 2.0,
        (config.height as f64 - 1.0) / 2.0,
        config.width,
        config.height,
    )
    .expect("scene intrinsics are valid");

    let target = hand_center + Vector3::new(0.05, 0.02, 0.1);
    let exo_eye = Vector3::new(-0.45, -0.25, -0.05) + jit(&mut rng);
    let ego_eye = Vector3::new(0.05, -0.3, 0.2) + jit(&mut rng);
    SyntheticScene {
        surfels: b.cloud,
        kinds: b.kinds,
        hand_keypoints_world: keypoints,
        exo_camera: Camera {
            intrinsics,
            pose: look_at(exo_eye, target),
        },
        ego_camera: Camera {
            intrinsics,
            pose: look_at(ego_eye, target + jit(&mut rng)),
        },
        seed,
    }
}

/// Rasterizes the scene seen by `which`: z-buffered 3x3 splats, nearest
/// depth wins, ties to the lower surfel index.
pub fn oracle_render(scene: &SyntheticScene, which: View) -> (RgbImage, DepthMap) {
    oracle_render_filtered(scene, which, |_| true)
}

/// Metric depth of the hand surfels alone.
pub fn render_hand_depth(scene: &SyntheticScene, which: View) -> DepthMap {
    oracle_render_filtered(scene, which, |k| k == SurfelKind::Hand).1
}

fn oracle_render_filtered(
    scene: &SyntheticScene,
    which: View,
    keep: impl Fn(SurfelKind) -> bool,
) -> (RgbImage, DepthMap) {
    let cam = scene.camera(which);
    let k = cam.intrinsics;
    let (w, h) = (k.width as i64, k.height as i64);
    let r = cam.pose.rotation();
    let t = cam.pose.translation();
    let rows = [
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ];

    let mut zbuf = vec![f64::INFINITY; (w * h) as usize];
    let mut owner = vec![usize::MAX; (w * h) as usize];
    for (idx, s) in scene.surfels.points.iter().enumerate() {
        if !keep(scene.kinds[idx]) {
            continue;
        }
        let p = [s.position.x, s.position.y, s.position.z];
        let cam_p: Vec<f64> = (0..3)
            .map(|i| rows[i][0] * p[0] + rows[i][1] * p[1] + rows[i][2] * p[2] + t[i])
            .collect();
        let z = cam_p[2];
        if z <= 1e-6 {
            continue;
        }
        let u = (k.fx * cam_p[0] / z + k.cx).round_ties_even();
        let v = (k.fy * cam_p[1] / z + k.cy).round_ties_even();
        if !(u.abs() < 1e9 && v.abs() < 1e9) {
            continue;
        }
        let (u, v) = (u as i64, v as i64);
        for py in v - ORACLE_SPLAT_RADIUS..=v + ORACLE_SPLAT_RADIUS {
            if py < 0 || py >= h {
                continue;
            }
            for px in u - ORACLE_SPLAT_RADIUS..=u + ORACLE_SPLAT_RADIUS {
                if px < 0 || px >= w {
                    continue;
                }
                let i = (py * w + px) as usize;
                if z < zbuf[i] || (z == zbuf[i] && idx < owner[i]) {
                    zbuf[i] = z;
                    owner[i] = idx;
                }
            }
        }
    }

    let mut rgb = RgbImage::filled(w as usize, h as usize, EMPTY_COLOR);
    let mut depth = DepthMap::invalid(w as usize, h as usize);
    for i in 0..(w * h) as usize {
        if owner[i] != usize::MAX {
            let (x, y) = (i % w as usize, i / w as usize);
            rgb.set(x, y, scene.surfels.points[owner[i]].color);
            depth.set(x, y, zbuf[i]);
        }
    }
    (rgb, depth)
}

/// Exocentric camera frame to egocentric camera frame.
pub fn ground_truth_transform(scene: &SyntheticScene) -> SimilarityTransform {
    scene
        .ego_camera
        .pose
        .compose(&invert_transform(&scene.exo_camera.pose))
}

/// Pixels whose 3x3 neighborhood in `depth` spans more than `threshold`
/// meters or touches an invalid pixel.
pub fn occlusion_edges(depth: &DepthMap, threshold: f64) -> crate::image::Mask {
    let (w, h) = depth.dims();
    let mut edges = crate::image::Mask::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut edge = false;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let d = depth.get(nx, ny);
                    if !crate::image::is_valid_depth(d) {
                        edge = true;
                    }
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            edges.set(x, y, edge || hi - lo > threshold);
        }
    }
    edges
}
