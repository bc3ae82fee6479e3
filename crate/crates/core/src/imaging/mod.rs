//! Raster primitives shared by every stage of the detector.

mod color;
mod components;
pub mod filter;
mod morph;
mod warp;

pub use color::rgb_to_sv;
pub use components::{connected_components, Region};
pub use morph::{dilate, erode, morph_open};
pub use warp::{warp_nearest, warp_perspective, Interpolation};

pub(crate) use warp::for_each_bilinear_source;
