//! Pseudo-label denoising for LiDAR domain adaptation.
//!
//! Two independent tools live here. Post-training size normalization searches
//! for the scale that makes a source-trained detector's rescaled predictions
//! match an estimated target mean object size. Pseudo point cloud generation
//! replaces or augments the points inside pseudo boxes with virtual LiDAR scans
//! of fitted 3D models, either along the original rays (ray-constrained) or from
//! a relocated full sweep (constraint-free).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod frame;
pub mod geom;
pub mod io;
pub mod models;
pub mod ppcg;
pub mod procedural;
pub mod ptsn;
pub mod sensor;
pub mod toy;

pub use frame::Frame;
pub use geom::{Box3D, Point3, Ray, RayHit, TriangleMesh};
