//! Cardiac cine motion analysis from dense deformable registration fields.
//!
//! The pipeline: register consecutive frames of a cine sequence with a
//! variational solver (SSIM similarity plus a diffusion regularizer over a
//! coarse-to-fine pyramid), reduce the resulting motion fields to a
//! one-dimensional direction descriptor relative to a focus point, and
//! detect the five cardiac keyframes (ED, MS, ES, PF, MD) from that curve
//! with a rule set. A synthetic phantom generator provides analytic ground
//! truth for end-to-end verification, and the cyclic frame difference
//! scores predictions against references.
//!
//! All numerics are generic over the scalar type ([`Scalar`]: `f32` or
//! `f64`); the aliases below pin the common concrete choices. On-disk
//! volumes are always little-endian `f32` (see [`cvol`]).

pub mod config;
pub mod cvol;
pub mod descriptor;
pub mod error;
pub mod focus;
pub mod grid;
pub mod keyframes;
pub mod parallel;
pub mod phantom;
pub mod registration;
pub mod scalar;
pub mod sequence;
pub mod ssim;

pub use config::{DescriptorConfig, FocusSelector, RegistrationConfig, View};
pub use error::{Error, MaskFilter, Result};
pub use focus::{FocusKind, FocusPoint};
pub use grid::{trilinear_sample, Grid, VectorGrid, MAX_DIM};
pub use keyframes::{cfd, detect_keyframes, evaluate, Keyframe, KeyframeSet, KeyframeStatus};
pub use scalar::Scalar;
pub use sequence::{DisplacementFieldSequence, ImageSequence};

/// Single-precision grid, the on-disk element type.
pub type GridF32 = Grid<f32>;
/// Double-precision grid, the default compute type.
pub type GridF64 = Grid<f64>;
pub type VectorGridF32 = VectorGrid<f32>;
pub type VectorGridF64 = VectorGrid<f64>;
pub type ImageSequenceF32 = ImageSequence<f32>;
pub type ImageSequenceF64 = ImageSequence<f64>;
pub type FieldSequenceF32 = DisplacementFieldSequence<f32>;
pub type FieldSequenceF64 = DisplacementFieldSequence<f64>;
