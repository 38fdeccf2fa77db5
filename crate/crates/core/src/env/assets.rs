use std::path::{Path, PathBuf};

use crate::geometry::ObjectModel;
use crate::{Error, Result};

/// Environment variable naming the default asset directory.
pub const ASSET_DIR_ENV: &str = "CONTACT_INTENT_ASSET_DIR";

const BUNDLED: &[(&str, &str)] = &[
    ("cube", include_str!("../../assets/cube.toml")),
    ("letter_h", include_str!("../../assets/letter_h.toml")),
    ("letter_i", include_str!("../../assets/letter_i.toml")),
    ("letter_l", include_str!("../../assets/letter_l.toml")),
    ("letter_t", include_str!("../../assets/letter_t.toml")),
];

/// Resolves asset names: `<dir>/<name>.toml` when a directory is set and
/// the file exists, otherwise the bundled copy.
#[derive(Clone, Debug, Default)]
pub struct AssetLibrary {
    dir: Option<PathBuf>,
}

impl AssetLibrary {
    pub fn bundled() -> Self {
        Self { dir: None }
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    /// Uses the directory from [`ASSET_DIR_ENV`] if set.
    pub fn from_env() -> Self {
        Self {
            dir: std::env::var_os(ASSET_DIR_ENV).map(PathBuf::from),
        }
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn load(&self, name: &str) -> Result<ObjectModel> {
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{name}.toml"));
            if path.is_file() {
                return ObjectModel::load(&path);
            }
        }
        if let Some((_, src)) = BUNDLED.iter().find(|(n, _)| *n == name) {
            return ObjectModel::from_toml_str(src);
        }
        let path = Path::new(name);
        if path.is_file() {
            return ObjectModel::load(path);
        }
        Err(Error::InvalidAsset(format!("unknown asset '{name}'")))
    }
}
