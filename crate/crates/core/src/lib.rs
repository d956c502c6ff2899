//! Loop-free 3D skeleton reconstruction for tubular cells (glia) and
//! temporal propagation of those skeletons through a time series.
//!
//! The pipeline is:
//!
//! 1. [`tracer::trace_initial_skeleton`] builds the first skeleton from a
//!    segmentation mask by running Dijkstra over the implicit 26-connected
//!    voxel graph ([`graph`]) from the soma centroid to every detected tip.
//! 2. [`vesselness`] turns each subsequent frame into a penalized tubularity
//!    map (multiscale Hessian response, non-positive values replaced by the
//!    negative mean positive response).
//! 3. [`temporal::morph_skeleton`] moves the previous skeleton onto that map
//!    one segment at a time, lowest hierarchy first, under the root-pinning,
//!    no-overlap and bounded-bifurcation-shift constraints.
//! 4. [`metrics`] scores a skeleton against a ground truth.
//!
//! [`phantom`] generates synthetic tubular trees with known centerlines and
//! [`io`] covers volumes (TIFF stacks, NRRD, raw + sidecar), SWC skeletons
//! and JSON reports.

// NaN-rejecting `!(x > 0.0)` checks and indexed matrix loops are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod skeleton;
pub mod temporal;
pub mod tracer;
pub mod vesselness;
pub mod volume;

pub use error::{Error, Result};
pub use skeleton::{Segment, SkeletonGraph};
pub use volume::{SegMask, Volume3, VoxelId};
