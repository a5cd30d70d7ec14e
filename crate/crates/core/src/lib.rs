//! Core primitives for generative grid-maze planning.
//!
//! This crate is `no_std` + `alloc` compatible. It holds everything that is
//! pure computation: grid mazes and their shortest-path oracles, the noise
//! schedule and corruption processes used by the diffusion and flow variants,
//! tensor encodings of maze instances, and the path-quality metrics. IO, the
//! network, training, and the CLI live in the companion `genplanner` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod dynamics;
mod error;
mod grid;
mod instance;
mod metrics;
mod schedule;
mod search;
mod tensor;

pub use dynamics::{
    diffuse_forward, estimate_x0_diff, estimate_x0_flow, flow_interpolate, flow_target_velocity,
    FlowTime,
};
pub use error::CoreError;
pub use grid::{generate_walls, sample_endpoints, Cell, CellPath, WallMask};
pub use instance::{generate_instance, DatasetConfig, MazeInstance};
pub use metrics::{
    component_count,
    branch_rate, count_endpoints, length_ratio, single_path, validity, MetricRow, PathMask,
};
pub use schedule::{make_schedule, NoiseSchedule};
pub use search::{astar_shortest_path, bfs_shortest_path};
pub use tensor::{binarize, encode_condition, encode_path_target, ConditionTensor, PathTensor};
