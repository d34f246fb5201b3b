//! Least-squares similarity alignment of ordered hand keypoint sets.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{invert_transform, SimilarityTransform};

const MIN_SOURCE_VARIANCE: f64 = 1e-12;
const MIN_SINGULAR_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandLayout {
    #[serde(rename = "single_hand_21")]
    SingleHand21,
    #[serde(rename = "two_hands_42")]
    TwoHands42,
}

impl HandLayout {
    pub const KEYPOINTS_PER_HAND: usize = 21;

    pub fn keypoint_count(self) -> usize {
        self.hand_count() * Self::KEYPOINTS_PER_HAND
    }

    pub fn hand_count(self) -> usize {
        match self {
            HandLayout::SingleHand21 => 1,
            HandLayout::TwoHands42 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HandLayout::SingleHand21 => "single_hand_21",
            HandLayout::TwoHands42 => "two_hands_42",
        }
    }
}

/// Metric 3D keypoints of one or two hands, in a fixed keypoint order.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    layout: HandLayout,
    keypoints: Vec<Vector3<f64>>,
}

impl HandPose {
    pub fn new(layout: HandLayout, keypoints: Vec<Vector3<f64>>) -> Result<Self> {
        if keypoints.len() != layout.keypoint_count() {
            return Err(Error::validation(
                "keypoints",
                format!(
                    "layout {} needs {} keypoints, got {}",
                    layout.as_str(),
                    layout.keypoint_count(),
                    keypoints.len()
                ),
            ));
        }
        if let Some(i) = keypoints.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::validation(
                "keypoints",
                format!("keypoint {i} has a non-finite coordinate"),
            ));
        }
        Ok(Self { layout, keypoints })
    }

    pub fn layout(&self) -> HandLayout {
        self.layout
    }

    pub fn keypoints(&self) -> &[Vector3<f64>] {
        &self.keypoints
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> HandPose {
        HandPose {
            layout: self.layout,
            keypoints: self.keypoints.iter().map(|p| t.apply(p)).collect(),
        }
    }
}

/// Similarity transform `(s, R, t)` minimizing `Σ |target_i - (s R source_i + t)|²`.
pub fn umeyama(source: &HandPose, target: &HandPose) -> Result<SimilarityTransform> {
    umeyama_points(source.keypoints(), target.keypoints())
}

/// Point-slice form of [`umeyama`], for callers without a hand layout.
pub fn umeyama_points(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::validation(
            "keypoints",
            format!(
                "source has {} points, target has {}",
                source.len(),
                target.len()
            ),
        ));
    }
    let n = source.len();
    if n < 3 {
        return Err(Error::InsufficientPoints { found: n });
    }
    let inv_n = 1.0 / n as f64;

    let mean_src = source.iter().sum::<Vector3<f64>>() * inv_n;
    let mean_dst = target.iter().sum::<Vector3<f64>>() * inv_n;

    let mut var_src = 0.0;
    let mut cov = Matrix3::zeros();
    for (x, y) in source.iter().zip(target) {
        let dx = x - mean_src;
        let dy = y - mean_dst;
        var_src += dx.norm_squared();
        cov += dy * dx.transpose();
    }
    var_src *= inv_n;
    cov *= inv_n;

    if var_src < MIN_SOURCE_VARIANCE {
        return Err(Error::DegenerateConfiguration("source points coincide"));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let d = svd.singular_values;

    let (d_max, d_mid) = sorted_top_two(&d);
    if d_max <= 0.0 || d_mid / d_max < MIN_SINGULAR_RATIO {
        return Err(Error::DegenerateConfiguration(
            "cross-covariance rank <= 1 (collinear points)",
        ));
    }

    // Sign correction keeps R a proper rotation even for reflected inputs.
    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        // nalgebra does not sort singular values, so flip the smallest one
        let smallest = d.imin();
        sign[smallest] = -1.0;
    }
    let s_mat = Matrix3::from_diagonal(&sign);
    let rotation = u * s_mat * v_t;
    let scale = d.dot(&sign) / var_src;
    let translation = mean_dst - scale * (rotation * mean_src);

    SimilarityTransform::new(scale, rotation, translation)
}

fn sorted_top_two(d: &Vector3<f64>) -> (f64, f64) {
    let mut v = [d[0], d[1], d[2]];
    v.sort_by(|a, b| b.total_cmp(a));
    (v[0], v[1])
}

/// Exocentric-to-egocentric camera transform: the inverse of the fit that
/// maps egocentric keypoints onto exocentric ones.
pub fn exo_to_ego_transform(p_exo: &HandPose, p_ego: &HandPose) -> Result<SimilarityTransform> {
    if p_exo.layout() != p_ego.layout() {
        return Err(Error::validation(
            "layout",
            format!(
                "exocentric pose is {} but egocentric pose is {}",
                p_exo.layout().as_str(),
                p_ego.layout().as_str()
            ),
        ));
    }
    let ego_to_exo = umeyama(p_ego, p_exo)?;
    Ok(invert_transform(&ego_to_exo))
}

/// RMS distance (meters) between `target` and the transformed `source`.
pub fn alignment_residual(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    t: &SimilarityTransform,
) -> f64 {
    assert_eq!(source.len(), target.len(), "residual needs equal point counts");
    if source.is_empty() {
        return 0.0;
    }
    let sum: f64 = source
        .iter()
        .zip(target)
        .map(|(x, y)| (y - t.apply(x)).norm_squared())
        .sum();
    (sum / source.len() as f64).sqrt()
}
