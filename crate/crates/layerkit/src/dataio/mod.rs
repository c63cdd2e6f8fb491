//! Interchange formats.
//!
//! | format          | module        | content                                  |
//! |-----------------|---------------|------------------------------------------|
//! | binary PGM `P5` | [`pgm`]       | radargrams and class maps (gray = class) |
//! | CSV             | [`layers_csv`]| sparse layer curves                      |
//! | CSV             | [`manifest`]  | corpus listing                           |
//! | JSON            | [`report`]    | evaluation reports                       |
//! | `TSEG1`         | [`weights`]   | network weights                          |
//!
//! Readers reject malformed input instead of repairing it; errors name the
//! byte offset or line. Writers are deterministic and replace files
//! atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

pub mod layers_csv;
pub mod manifest;
pub mod pgm;
pub mod report;
pub mod weights;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PGM byte {offset}: {message}")]
    Pgm { offset: usize, message: String },

    #[error("layer CSV line {line}: {message}")]
    LayersCsv { line: usize, message: String },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("weights byte {offset}: {message}")]
    Weights { offset: usize, message: String },

    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] layerkit_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}
