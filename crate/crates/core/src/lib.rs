//! Radargram ice-layer labelling toolkit.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the pure
//! algorithms: annotation cleaning and cropping ([`labelproc`]), the inverse
//! reconstruction of layer curves from dense class maps ([`layerize`]),
//! evaluation ([`metrics`]), a deterministic synthetic data generator
//! ([`synth`]), learning-rate policies ([`sched`]) and a small fully
//! convolutional classifier ([`tinyseg`]). File formats and the command line
//! live in the `layerkit` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod labelproc;
pub mod layerize;
pub mod metrics;
pub mod sched;
pub mod synth;
pub mod tinyseg;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    is_complete, validate_layer_map, ClassId, CropBox, LabelSchema, LayerId, LayerMap, Radargram,
    SemanticMap, Violation, BACKGROUND, DEFAULT_CM_PER_PIXEL,
};
