//! Self-supervised spatiotemporal super-resolution of neuromorphic event streams.
//!
//! A single event stream is super-resolved by training two small networks on
//! the stream itself at test time:
//!
//! * a residual 3D CNN on a time-free voxel grid of polarity codes learns the
//!   stream's own cross-scale recurrence and predicts the spatially upscaled grid;
//! * an MLP regresses per-pixel timestamp sequences from normalized position and
//!   voxel column, then fills in timestamps for the new subpixels.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature only enables runtime
//! SIMD detection in the matrix kernels. File formats, rendering and the CLI live
//! in the `evsr` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assemble;
pub mod error;
pub mod event;
pub mod metrics;
pub mod nn;
pub mod resample;
pub mod spatial;
pub mod synth;
pub mod temporal;
pub mod voxel;

mod math;

pub use error::{Error, Result, Stage};
pub use event::{Event, EventStream, ImpulseTrain, Pixel, SensorGeometry};
pub use voxel::{VoxelCoding, VoxelGrid};
