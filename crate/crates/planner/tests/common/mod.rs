//! Shared fixtures for the planner integration tests.
#![allow(dead_code)] // each test target uses a different subset

use genplanner::dataset::build_dataset;
use genplanner::nn::unet::UNet;
use genplanner_core::{
    encode_condition, encode_path_target, ConditionTensor, DatasetConfig, PathTensor,
};

pub fn tiny_batch(count: usize, seed: u64) -> Vec<(PathTensor, ConditionTensor)> {
    let config = DatasetConfig {
        grid_size: 8,
        train_count: count,
        eval_count: 1,
        min_path_len: 1,
        wall_prob: 0.15,
        seed,
    };
    let ds = build_dataset(&config).unwrap();
    ds.train()
        .iter()
        .map(|inst| (encode_path_target(inst), encode_condition(inst)))
        .collect()
}

/// Reads the parameter at flat position `gi` in `visit_params` order.
pub fn param_at(net: &mut UNet, gi: usize) -> f64 {
    let mut off = 0;
    let mut out = f64::NAN;
    net.visit_params(|_, _, p| {
        if gi >= off && gi < off + p.len() {
            out = p[gi - off];
        }
        off += p.len();
    });
    out
}

pub fn nudge_param(net: &mut UNet, gi: usize, delta: f64) {
    let mut off = 0;
    net.visit_params(|_, _, p| {
        if gi >= off && gi < off + p.len() {
            p[gi - off] += delta;
        }
        off += p.len();
    });
}

pub fn max_abs_diff(a: &PathTensor, b: &PathTensor) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}
