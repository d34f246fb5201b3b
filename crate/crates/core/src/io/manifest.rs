use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_json, save_json};
use crate::error::{Error, Result};

/// One exocentric capture to reproject into the egocentric view.
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Report label; defaults to the entry's position in the file.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub exo_image_path: PathBuf,
    pub exo_depth_path: PathBuf,
    pub exo_intrinsics_path: PathBuf,
    pub exo_pose_path: PathBuf,
    pub ego_pose_path: PathBuf,
    pub ego_intrinsics_path: PathBuf,
    /// Ground-truth egocentric frame; enables PSNR and SSIM columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego_gt_image_path: Option<PathBuf>,
    /// Depth used for the hand-region scale; without it the depth is taken as metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_depth_path: Option<PathBuf>,
}

impl ManifestEntry {
    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            &mut self.exo_image_path,
            &mut self.exo_depth_path,
            &mut self.exo_intrinsics_path,
            &mut self.exo_pose_path,
            &mut self.ego_pose_path,
            &mut self.ego_intrinsics_path,
        ]
        .into_iter()
        .chain(self.ego_gt_image_path.as_mut())
        .chain(self.hand_depth_path.as_mut())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Loads and resolves every path against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: Manifest = load_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut names = std::collections::HashSet::new();
        for (i, e) in m.entries.iter_mut().enumerate() {
            if e.name.is_empty() {
                e.name = i.to_string();
            }
            if !names.insert(e.name.clone()) {
                return Err(Error::validation(
                    "name",
                    format!("duplicate entry name {:?}", e.name),
                ));
            }
            let name = e.name.clone();
            for p in e.paths_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if !p.is_file() {
                    return Err(Error::Io {
                        path: p.clone(),
                        source: std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            format!("referenced by manifest entry {name:?}"),
                        ),
                    });
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }
}
