use alloc::string::String;

use crate::types::LayerId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),

    #[error("layer {0} is not present")]
    UnknownLayer(LayerId),

    #[error("layer id must be in 1..=255, got {0}")]
    InvalidLayerId(u32),

    #[error("layer {layer} is incomplete (no row at column {column})")]
    IncompleteLayer { layer: LayerId, column: usize },

    #[error("layers cross: peak row {peak} is not above valley row {valley}")]
    Crossing { peak: u32, valley: u32 },

    #[error("crop box ({x1},{y1})-({x2},{y2}) does not fit a {height}x{width} image")]
    BoxOutOfBounds {
        x1: usize,
        y1: usize,
        x2: usize,
        y2: usize,
        height: usize,
        width: usize,
    },

    #[error("layer {layer} row {row} at column {column} lies outside rows {y1}..{y2}")]
    RowOutsideBox {
        layer: LayerId,
        column: usize,
        row: u32,
        y1: usize,
        y2: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fraction {0} is outside [0, 1]")]
    FractionOutOfRange(f64),

    #[error("nothing to compute: {0}")]
    Empty(&'static str),

    #[error("class {class} is outside the network's {num_classes} classes")]
    ClassOutOfRange { class: u8, num_classes: usize },
}
