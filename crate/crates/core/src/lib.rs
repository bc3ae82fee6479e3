#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod detect;
pub mod error;
pub mod eval;
pub mod flow;
pub mod foreground;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod model;
pub mod plane;
pub mod registration;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, Homography, Point};
pub use plane::{BinaryMask, Plane};
