//! Scene reconstruction from local latent SDF patches.
//!
//! The representation is a sparse voxel grid of small latent codes plus one
//! shared decoder network: each code conditions the decoder to reproduce the
//! truncated signed distance field inside its voxel (and a margin around it,
//! for border consistency). A prior is trained jointly over codes and decoder
//! weights on patches from random primitive scenes; unseen scenes are then
//! encoded by optimizing codes only, voxel by voxel, against their local SDF
//! samples. Meshes come out via masked marching cubes, and a classical TSDF
//! fusion baseline plus standard metrics (Chamfer, mesh accuracy, completion,
//! SDF RMSE) support head-to-head comparisons.
//!
//! Start with the runnable examples (`cargo run --release --example ...`) or
//! the `localsdf` binary; the `pipeline` module hosts the end-to-end runs
//! both of them use.

pub mod decoder;
pub mod demo2d;
pub mod error;
pub mod fusion;
pub mod io;
pub mod latent_grid;
pub mod math;
pub mod mesh;
pub mod meshing;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod sampling;
pub mod training;
pub mod inference;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
