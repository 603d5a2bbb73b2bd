//! Image transformations for synthesizing realistic test inputs.
//!
//! Linear (brightness, contrast), affine (translation, scale, shear,
//! rotation), blur (averaging, Gaussian, median, bilateral) and composite
//! weather effects (fog, rain). Every operation is a pure function from an
//! [`Image`] to a new [`Image`]; results are rounded half away from zero and
//! clamped to `[0, 255]` once, at the output.

pub mod affine;
pub mod blur;
pub mod image;
pub mod point;
pub mod transform;
pub mod weather;

pub use affine::{affine_transform, rotate, AffineMatrix};
pub use blur::{blur, gaussian_kernel, BlurFilter};
pub use image::Image;
pub use point::{adjust_brightness, adjust_contrast};
pub use transform::{apply, apply_chain, default_grid, dedup_specs, TransformKind, TransformSpec};
pub use weather::{add_fog, add_rain};
