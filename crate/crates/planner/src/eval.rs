//! The four path-quality metrics aggregated over an evaluation split, plus
//! the step-sweep and conditioning-ablation harnesses.

use serde::{Deserialize, Serialize};

use genplanner_core::{
    binarize, branch_rate, length_ratio, make_schedule, single_path, validity, ConditionTensor,
    MazeInstance, MetricRow, PathMask,
};

use crate::dataset::Dataset;
use crate::error::PlannerError;
use crate::net::{forward_baseline, ModelParams, Variant};
use crate::sample::{ddim_sample, euler_sample};
use crate::train::{train, TrainConfig};

/// Metrics of a single generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub valid: bool,
    pub single: bool,
    pub length_ratio: Option<f64>,
    pub branch_rate: f64,
}

/// Aggregate report for one (model, step count) evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub steps: usize,
    pub seed: u64,
    pub per_sample: Vec<SampleRecord>,
    pub validity: f64,
    pub single_path: f64,
    /// Mean over valid samples only; `None` if nothing was valid.
    pub length_ratio: Option<f64>,
    pub branch_rate: f64,
}

impl EvalReport {
    pub fn metric_row(&self) -> MetricRow {
        MetricRow {
            validity: self.validity,
            single_path: self.single_path,
            length_ratio: self.length_ratio,
            branch_rate: self.branch_rate,
        }
    }

    /// One report table line: percents with two decimals,
    /// `N/A` for an undefined length ratio.
    pub fn table_line(&self) -> String {
        let ratio = self
            .length_ratio
            .map_or("N/A".to_string(), |r| format!("{r:.2}"));
        format!(
            "{:<12} {:>5} {:>10.2} {:>12.2} {:>8} {:>12.2}",
            self.model,
            self.steps,
            self.validity * 100.0,
            self.single_path * 100.0,
            ratio,
            self.branch_rate * 100.0
        )
    }
}

pub fn table_header() -> String {
    format!(
        "{:<12} {:>5} {:>10} {:>12} {:>8} {:>12}",
        "Model", "Steps", "Validity%", "Single-Path%", "Ratio", "Branch-Rate%"
    )
}

fn aggregate(model: String, steps: usize, seed: u64, per_sample: Vec<SampleRecord>) -> EvalReport {
    let n = per_sample.len() as f64;
    let ratios: Vec<f64> = per_sample.iter().filter_map(|r| r.length_ratio).collect();
    EvalReport {
        model,
        steps,
        seed,
        validity: per_sample.iter().filter(|r| r.valid).count() as f64 / n,
        single_path: per_sample.iter().filter(|r| r.single).count() as f64 / n,
        length_ratio: if ratios.is_empty() {
            None
        } else {
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
        },
        branch_rate: per_sample.iter().map(|r| r.branch_rate).sum::<f64>() / n,
        per_sample,
    }
}

/// Metrics of one mask against its instance.
pub fn score_mask(mask: &PathMask, instance: &MazeInstance) -> SampleRecord {
    SampleRecord {
        valid: validity(mask, instance),
        single: single_path(mask, instance),
        length_ratio: length_ratio(mask, instance),
        branch_rate: branch_rate(mask),
    }
}

/// Generates one path mask for an instance with the model's own sampler.
pub fn generate_mask(
    params: &ModelParams,
    c: &ConditionTensor,
    steps: usize,
    schedule_t: usize,
    seed: u64,
) -> Result<PathMask, PlannerError> {
    let tensor = match params.config.variant {
        Variant::FlowVelocity => euler_sample(params, c, steps, seed, false)?.final_state,
        Variant::DiffusionEps => {
            let sched = make_schedule(schedule_t)?;
            ddim_sample(params, c, steps, &sched, seed, false)?.final_state
        }
        Variant::Baseline => forward_baseline(params, c)?,
    };
    binarize(&tensor).map_err(PlannerError::Core)
}

/// Evaluates one generation per eval instance and aggregates the metrics.
pub fn evaluate(
    params: &ModelParams,
    eval_split: &[MazeInstance],
    steps: usize,
    schedule_t: usize,
    seed: u64,
) -> Result<EvalReport, PlannerError> {
    if eval_split.is_empty() {
        return Err(PlannerError::Config("evaluation split is empty".into()));
    }
    let mut per_sample = Vec::with_capacity(eval_split.len());
    for (i, inst) in eval_split.iter().enumerate() {
        if inst.height() != params.config.grid_size {
            return Err(PlannerError::Config(format!(
                "dataset grid {} does not match model grid {}",
                inst.height(),
                params.config.grid_size
            )));
        }
        let c = genplanner_core::encode_condition(inst);
        let sample_seed = crate::dataset::instance_seed(seed, i as u64);
        let mask = generate_mask(params, &c, steps, schedule_t, sample_seed)?;
        per_sample.push(score_mask(&mask, inst));
    }
    Ok(aggregate(
        params.config.variant.tag().to_string(),
        steps,
        seed,
        per_sample,
    ))
}

/// Evaluates at each step count with a shared seed (Table-4-style sweep).
pub fn steps_sweep(
    params: &ModelParams,
    eval_split: &[MazeInstance],
    steps_list: &[usize],
    schedule_t: usize,
    seed: u64,
) -> Result<Vec<EvalReport>, PlannerError> {
    steps_list
        .iter()
        .map(|&s| evaluate(params, eval_split, s, schedule_t, seed))
        .collect()
}

/// A conditioning configuration of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondConfig {
    pub start_goal: bool,
    pub walls: bool,
}

impl CondConfig {
    pub fn label(&self) -> &'static str {
        match (self.start_goal, self.walls) {
            (false, false) => "none",
            (true, false) => "startend",
            (false, true) => "walls",
            (true, true) => "full",
        }
    }

    pub fn from_label(s: &str) -> Option<CondConfig> {
        match s {
            "none" => Some(CondConfig { start_goal: false, walls: false }),
            "startend" => Some(CondConfig { start_goal: true, walls: false }),
            "walls" => Some(CondConfig { start_goal: false, walls: true }),
            "full" => Some(CondConfig { start_goal: true, walls: true }),
            _ => None,
        }
    }
}

/// Trains and evaluates one model per conditioning configuration; omitted
/// channels are zeroed during both training and evaluation.
pub fn conditioning_ablation(
    base: &TrainConfig,
    dataset: &Dataset,
    configs: &[CondConfig],
    steps: usize,
    eval_seed: u64,
) -> Result<Vec<(CondConfig, EvalReport)>, PlannerError> {
    let mut out = Vec::with_capacity(configs.len());
    for cond in configs {
        let mut cfg = *base;
        cfg.net.cond_start_goal = cond.start_goal;
        cfg.net.cond_walls = cond.walls;
        let (params, _) = train(&cfg, dataset)?;
        let mut report = evaluate(&params, dataset.eval(), steps, cfg.schedule_t, eval_seed)?;
        report.model = format!("{}-{}", cfg.net.variant.tag(), cond.label());
        out.push((*cond, report));
    }
    Ok(out)
}
