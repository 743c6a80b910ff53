//! Deterministic CPU deferred renderer for meshes, surfels and point clouds.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod brdf;
pub mod effects;
pub mod error;
pub mod gbuffer;
pub mod geom;
pub mod ibl;
pub mod image;
pub mod math;
pub mod pipeline;
pub mod post;
pub mod primitives;
pub mod raster;
pub mod scene;
pub mod shade;
