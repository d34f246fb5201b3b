use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::alignment::{HandLayout, HandPose};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, SimilarityTransform};

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &[u8], line: usize, column: usize) -> u64 {
    let mut remaining = line.saturating_sub(1);
    let mut start = 0;
    if remaining > 0 {
        for (i, b) in text.iter().enumerate() {
            if *b == b'\n' {
                remaining -= 1;
                if remaining == 0 {
                    start = i + 1;
                    break;
                }
            }
        }
    }
    (start + column.saturating_sub(1)).min(text.len()) as u64
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(&bytes, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Pretty-printed with a trailing newline.
pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let k: CameraIntrinsics = load_json(path)?;
    k.validate()?;
    Ok(k)
}

pub fn save_intrinsics(k: &CameraIntrinsics, path: &Path) -> Result<()> {
    save_json(k, path)
}

/// Similarity transform on disk: rotation is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDocument {
    pub scale: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&SimilarityTransform> for TransformDocument {
    fn from(t: &SimilarityTransform) -> Self {
        let r = t.rotation();
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i * 3 + j] = r[(i, j)];
            }
        }
        let tr = t.translation();
        Self {
            scale: t.scale(),
            rotation,
            translation: [tr.x, tr.y, tr.z],
        }
    }
}

impl TryFrom<&TransformDocument> for SimilarityTransform {
    type Error = Error;

    fn try_from(d: &TransformDocument) -> Result<Self> {
        SimilarityTransform::new(
            d.scale,
            Matrix3::from_row_slice(&d.rotation),
            Vector3::from(d.translation),
        )
    }
}

pub fn load_transform(path: &Path) -> Result<SimilarityTransform> {
    let doc: TransformDocument = load_json(path)?;
    SimilarityTransform::try_from(&doc)
}

pub fn save_transform(t: &SimilarityTransform, path: &Path) -> Result<()> {
    save_json(&TransformDocument::from(t), path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDocument {
    pub layout: HandLayout,
    pub units: String,
    pub keypoints: Vec<[f64; 3]>,
}

impl From<&HandPose> for PoseDocument {
    fn from(p: &HandPose) -> Self {
        Self {
            layout: p.layout(),
            units: "meters".into(),
            keypoints: p.keypoints().iter().map(|k| [k.x, k.y, k.z]).collect(),
        }
    }
}

impl TryFrom<&PoseDocument> for HandPose {
    type Error = Error;

    fn try_from(d: &PoseDocument) -> Result<Self> {
        if d.units != "meters" {
            return Err(Error::validation(
                "units",
                format!("expected \"meters\", got {:?}", d.units),
            ));
        }
        HandPose::new(d.layout, d.keypoints.iter().map(|k| Vector3::from(*k)).collect())
    }
}

pub fn load_pose(path: &Path) -> Result<HandPose> {
    let doc: PoseDocument = load_json(path)?;
    HandPose::try_from(&doc)
}

pub fn save_pose(pose: &HandPose, path: &Path) -> Result<()> {
    save_json(&PoseDocument::from(pose), path)
}
