//! Training-loop behavior: determinism across reruns, loss decrease on a
//! tiny dataset, and guard rails around config/dataset mismatches.

mod common;

use genplanner::dataset::build_dataset;
use genplanner::train::{train, TrainConfig};
use genplanner::{NetConfig, Variant};
use genplanner_core::DatasetConfig;

fn small_train_config(variant: Variant, epochs: usize) -> TrainConfig {
    let mut net = NetConfig::with_defaults(8, variant);
    net.base_channels = 8;
    net.time_embed_dim = 16;
    let mut tc = TrainConfig::with_defaults(net);
    tc.epochs = epochs;
    tc.batch_size = 8;
    tc.learning_rate = 1e-3;
    tc.schedule_t = 100;
    tc.seed = 9;
    tc
}

fn small_dataset(train_count: usize) -> genplanner::dataset::Dataset {
    build_dataset(&DatasetConfig {
        grid_size: 8,
        train_count,
        eval_count: 2,
        min_path_len: 2,
        wall_prob: 0.15,
        seed: 61,
    })
    .unwrap()
}

#[test]
fn training_reduces_flow_loss() {
    let ds = small_dataset(16);
    let (params, trace) = train(&small_train_config(Variant::FlowVelocity, 6), &ds).unwrap();
    assert_eq!(trace.len(), 6);
    assert!(trace.iter().all(|s| s.mean_loss.is_finite()));
    let (first, last) = (trace[0].mean_loss, trace[5].mean_loss);
    assert!(
        last < first,
        "flow loss did not decrease: {first} -> {last}"
    );
    assert_eq!(params.step as usize, 6 * 2); // 16 samples / batch 8 = 2 steps
}

#[test]
fn training_reduces_baseline_loss() {
    let ds = small_dataset(16);
    let (_, trace) = train(&small_train_config(Variant::Baseline, 6), &ds).unwrap();
    let (first, last) = (trace[0].mean_loss, trace[5].mean_loss);
    assert!(
        last < first,
        "baseline loss did not decrease: {first} -> {last}"
    );
}

#[test]
fn training_reduces_diff_loss() {
    let ds = small_dataset(16);
    let (_, trace) = train(&small_train_config(Variant::DiffusionEps, 6), &ds).unwrap();
    let (first, last) = (trace[0].mean_loss, trace[5].mean_loss);
    assert!(
        last < first,
        "diffusion loss did not decrease: {first} -> {last}"
    );
}

#[test]
fn training_is_deterministic() {
    let ds = small_dataset(8);
    let tc = small_train_config(Variant::DiffusionEps, 2);
    let (a, trace_a) = train(&tc, &ds).unwrap();
    let (b, trace_b) = train(&tc, &ds).unwrap();
    assert_eq!(trace_a, trace_b);
    let mut equal = true;
    let mut an = a.net.clone();
    let mut flat_a = Vec::new();
    an.visit_params(|_, _, p| flat_a.extend_from_slice(p));
    let mut bn = b.net.clone();
    let mut flat_b = Vec::new();
    bn.visit_params(|_, _, p| flat_b.extend_from_slice(p));
    equal &= flat_a == flat_b;
    assert!(equal, "two identically-seeded runs diverged");
}

#[test]
fn training_rejects_mismatched_grid() {
    let ds = small_dataset(8);
    let mut net = NetConfig::with_defaults(16, Variant::FlowVelocity);
    net.base_channels = 8;
    let tc = TrainConfig::with_defaults(net);
    assert!(train(&tc, &ds).is_err());
}
