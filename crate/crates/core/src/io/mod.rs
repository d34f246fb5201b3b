//! On-disk formats.
//!
//! * RGB images: 8-bit RGB PNG, channel `c` stored as `round(c * 255)`.
//! * Masks: 8-bit grayscale PNG, 0 or 255.
//! * Depth maps: little-endian grayscale PFM (`Pf`, negative scale),
//!   invalid pixels stored as 0 or NaN.
//! * Intrinsics, transforms, poses, styles, scene configs and manifests:
//!   JSON documents.

mod docs;
mod manifest;
mod pfm;
mod png;

pub use self::docs::{
    load_intrinsics, load_json, load_pose, load_transform, save_intrinsics, save_json, save_pose,
    save_transform, PoseDocument, TransformDocument,
};
pub use self::manifest::{Manifest, ManifestEntry};
pub use self::pfm::{decode_pfm, encode_pfm, load_depth, save_depth};
pub use self::png::{byte_to_unit, load_mask, load_rgb, save_mask, save_rgb, unit_to_byte};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::SparseEgoMap;
use crate::image::is_valid_depth;

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Paths of the three files that store a sparse map under `dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMapPaths {
    pub rgb: PathBuf,
    pub mask: PathBuf,
    pub depth: PathBuf,
}

impl SparseMapPaths {
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            rgb: dir.join(format!("{stem}_rgb.png")),
            mask: dir.join(format!("{stem}_mask.png")),
            depth: dir.join(format!("{stem}_depth.pfm")),
        }
    }
}

pub fn save_sparse_map(map: &SparseEgoMap, paths: &SparseMapPaths) -> Result<()> {
    save_rgb(&map.rgb, &paths.rgb)?;
    save_mask(&map.validity, &paths.mask)?;
    save_depth(&map.depth_buffer, &paths.depth)
}

pub fn load_sparse_map(paths: &SparseMapPaths) -> Result<SparseEgoMap> {
    let rgb = load_rgb(&paths.rgb)?;
    let validity = load_mask(&paths.mask)?;
    let depth_buffer = load_depth(&paths.depth)?;
    if rgb.dims() != validity.dims() || rgb.dims() != depth_buffer.dims() {
        return Err(Error::validation(
            "sparse map",
            format!(
                "rgb {:?}, mask {:?} and depth {:?} differ in size",
                rgb.dims(),
                validity.dims(),
                depth_buffer.dims()
            ),
        ));
    }
    let consistent = validity
        .values()
        .iter()
        .zip(depth_buffer.values())
        .all(|(m, d)| *m == is_valid_depth(*d));
    if !consistent {
        return Err(Error::validation(
            "sparse map",
            "mask disagrees with depth validity",
        ));
    }
    Ok(SparseEgoMap {
        rgb,
        validity,
        depth_buffer,
    })
}
