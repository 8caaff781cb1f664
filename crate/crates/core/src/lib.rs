//! Spherical bounding regions and evaluation tooling for omnidirectional
//! object tracking on equirectangular (ERP) video.
//!
//! The crate is organized around a small set of geometric currencies:
//!
//! - [`sphere`] — the ideal spherical camera model: ERP pixels ↔
//!   longitude/latitude ↔ 3D unit vectors, axis rotations, great-circle
//!   distance.
//! - [`annotations`] — the four target-location representations:
//!   pixel boxes ([`Bbox`], rotated when `gamma != 0`) and angular bounding
//!   fields of view ([`Bfov`]), plus binary target [`Mask`]s.
//! - [`region`] — construction of the ERP region realized by a (r)BFoV,
//!   either from a tangent plane (small FoV) or a spherical surface patch
//!   (large FoV), with unwarping and back-projection.
//! - [`mask`] — conversion of per-pixel masks into unbiased (r)BBox and
//!   (r)BFoV ground truth.
//! - [`metrics`] — dual success/precision, angle precision, spherical IoU,
//!   one-pass-evaluation curves and sequence attributes.
//! - [`harness`] — a tracker-agnostic loop that feeds a local visual
//!   tracker unwarped search regions and lifts its box predictions back to
//!   global representations. Trackers attach as subprocesses speaking a
//!   newline-delimited JSON protocol (see [`harness::adapter`]).
//! - [`synth`] — deterministic synthetic sequences with analytic ground
//!   truth, used as a drop-in stand-in for real data.
//! - [`dataset`] — the on-disk sequence layout and annotation text formats.

pub mod annotations;
pub mod dataset;
pub mod draw;
pub mod error;
pub mod geom;
pub mod harness;
pub mod mask;
pub mod metrics;
pub mod region;
pub mod sphere;
pub mod synth;

pub use annotations::{Bbox, Bfov, FrameAnnotation, Mask};
pub use error::{Error, Result};
pub use region::{RegionMap, RegionMode};
pub use sphere::{ErpDims, LonLat, PixCoord, Rotation, UnitVec};
