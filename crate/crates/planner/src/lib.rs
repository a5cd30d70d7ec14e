//! Conditional generative path planning on grid mazes.
//!
//! Two iterative variants share one conditional U-Net backbone: a
//! diffusion planner sampled with deterministic DDIM, and a flow-matching
//! planner sampled with explicit Euler integration. A direct-prediction
//! CNN baseline shares the same backbone minus time conditioning. The
//! crate also carries the dataset builder (GPLN files), the four-metric
//! evaluation harness, and rendering.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod net;
pub mod nn;
pub mod render;
pub mod sample;
pub mod train;

pub use error::PlannerError;
pub use net::{
    forward_baseline, forward_denoiser, init_params, load_checkpoint, save_checkpoint,
    ModelParams, NetConfig, Variant,
};
