//! Loss computation and the optimization loop for all three variants.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use genplanner_core::{
    diffuse_forward, flow_interpolate, flow_target_velocity, make_schedule, ConditionTensor,
    FlowTime, NoiseSchedule, PathTensor,
};

use crate::dataset::Dataset;
use crate::error::PlannerError;
use crate::net::{assemble_condition, assemble_input, init_params, ModelParams, NetConfig, Variant};
use crate::nn::UNet;

/// One training sample: clean path target and its condition.
pub type Batch = [(PathTensor, ConditionTensor)];

/// Optimization settings. Architecture settings ride along in `net`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub net: NetConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub schedule_t: usize,
    pub grad_clip: f64,
}

impl TrainConfig {
    pub fn with_defaults(net: NetConfig) -> Self {
        TrainConfig {
            net,
            epochs: 20,
            batch_size: 32,
            learning_rate: 2e-4,
            seed: 0,
            schedule_t: 1000,
            grad_clip: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        self.net.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.schedule_t == 0 {
            return Err(PlannerError::Config(
                "epochs, batch_size, and schedule_t must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return Err(PlannerError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::dataset::instance_seed(seed, index))
}

fn standard_normal_like(x: &PathTensor, rng: &mut ChaCha8Rng) -> PathTensor {
    let vals: Vec<f64> = (0..x.values().len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    PathTensor::new(x.height(), x.width(), vals).unwrap()
}

/// The per-sample diffusion corruption draw: uniform timestep plus Gaussian
/// noise, shared by the loss evaluators and the training step.
pub struct DiffDraw {
    pub t: usize,
    pub eps: PathTensor,
    pub x_t: PathTensor,
}

pub fn draw_diff_corruption(
    x0: &PathTensor,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<DiffDraw, PlannerError> {
    let t = rng.gen_range(0..sched.len());
    let eps = standard_normal_like(x0, rng);
    let x_t = diffuse_forward(x0, &eps, t, sched)?;
    Ok(DiffDraw { t, eps, x_t })
}

/// The per-sample flow draw: uniform t in [0,1], Gaussian noise endpoint,
/// linear interpolant, and the target velocity.
pub struct FlowDraw {
    pub t: f64,
    pub x_t: PathTensor,
    pub velocity: PathTensor,
}

pub fn draw_flow_corruption(
    x0: &PathTensor,
    rng: &mut ChaCha8Rng,
) -> Result<FlowDraw, PlannerError> {
    let t = rng.gen_range(0.0..1.0);
    let x1 = standard_normal_like(x0, rng);
    let x_t = flow_interpolate(x0, &x1, FlowTime::new(t)?)?;
    let velocity = flow_target_velocity(x0, &x1)?;
    Ok(FlowDraw { t, x_t, velocity })
}

fn mse(a: &PathTensor, b: &PathTensor) -> f64 {
    let n = a.values().len() as f64;
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// Noise-matching loss with a pluggable predictor `(x_t, c, t_index, t_norm)
/// -> eps_hat`. The model-backed wrapper and the analytic-oracle tests share
/// this draw plumbing.
pub fn diff_loss_with(
    batch: &Batch,
    sched: &NoiseSchedule,
    seed: u64,
    mut predict: impl FnMut(&PathTensor, &ConditionTensor, usize, f64) -> PathTensor,
) -> Result<f64, PlannerError> {
    let mut total = 0.0;
    for (i, (x0, c)) in batch.iter().enumerate() {
        let mut rng = sample_rng(seed, i as u64);
        let draw = draw_diff_corruption(x0, sched, &mut rng)?;
        let t_norm = draw.t as f64 / sched.len() as f64;
        let eps_hat = predict(&draw.x_t, c, draw.t, t_norm);
        total += mse(&draw.eps, &eps_hat);
    }
    Ok(total / batch.len() as f64)
}

/// Velocity-matching loss with a pluggable predictor `(x_t, c, t) -> v_hat`.
pub fn flow_loss_with(
    batch: &Batch,
    seed: u64,
    mut predict: impl FnMut(&PathTensor, &ConditionTensor, f64) -> PathTensor,
) -> Result<f64, PlannerError> {
    let mut total = 0.0;
    for (i, (x0, c)) in batch.iter().enumerate() {
        let mut rng = sample_rng(seed, i as u64);
        let draw = draw_flow_corruption(x0, &mut rng)?;
        let v_hat = predict(&draw.x_t, c, draw.t);
        total += mse(&draw.velocity, &v_hat);
    }
    Ok(total / batch.len() as f64)
}

fn require_variant(params: &ModelParams, variant: Variant) -> Result<(), PlannerError> {
    if params.config.variant != variant {
        return Err(PlannerError::VariantMismatch(format!(
            "loss for {:?} called on a {:?} model",
            variant, params.config.variant
        )));
    }
    Ok(())
}

/// Mean over batch and pixels of the squared noise-prediction error.
pub fn diff_loss(
    batch: &Batch,
    params: &ModelParams,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<f64, PlannerError> {
    require_variant(params, Variant::DiffusionEps)?;
    diff_loss_with(batch, sched, seed, |x_t, c, _t, t_norm| {
        crate::net::forward_denoiser(params, x_t, c, t_norm).expect("variant checked")
    })
}

/// Mean over batch and pixels of the squared velocity error.
pub fn flow_loss(batch: &Batch, params: &ModelParams, seed: u64) -> Result<f64, PlannerError> {
    require_variant(params, Variant::FlowVelocity)?;
    flow_loss_with(batch, seed, |x_t, c, t| {
        crate::net::forward_denoiser(params, x_t, c, t).expect("variant checked")
    })
}

fn bce_with_logits(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Per-pixel binary cross entropy between sigmoid(logits) and the path mask.
pub fn baseline_loss(batch: &Batch, params: &ModelParams) -> Result<f64, PlannerError> {
    require_variant(params, Variant::Baseline)?;
    let mut total = 0.0;
    for (x0, c) in batch {
        let logits = crate::net::forward_baseline(params, c)?;
        let n = x0.values().len() as f64;
        let sample: f64 = logits
            .values()
            .iter()
            .zip(x0.values())
            .map(|(&l, &x)| bce_with_logits(l, if x > 0.0 { 1.0 } else { 0.0 }))
            .sum();
        total += sample / n;
    }
    Ok(total / batch.len() as f64)
}

/// Computes the batch loss and its analytic parameter gradient for the
/// variant of `params`. The gradient is exact; finite differences of the
/// loss functions above (same seed) must agree with it.
pub fn loss_and_grad(
    batch: &Batch,
    params: &ModelParams,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<(f64, UNet), PlannerError> {
    let mut grad = params.net.zeros_like();
    let b = batch.len() as f64;
    let mut total = 0.0;
    for (i, (x0, c)) in batch.iter().enumerate() {
        let mut rng = sample_rng(seed, i as u64);
        let n = x0.values().len() as f64;
        let (input, t_input, target): (Array3<f64>, Option<f64>, Vec<f64>) =
            match params.config.variant {
                Variant::DiffusionEps => {
                    let draw = draw_diff_corruption(x0, sched, &mut rng)?;
                    let t_norm = draw.t as f64 / sched.len() as f64;
                    (
                        assemble_input(&draw.x_t, c, &params.config),
                        Some(t_norm),
                        draw.eps.values().to_vec(),
                    )
                }
                Variant::FlowVelocity => {
                    let draw = draw_flow_corruption(x0, &mut rng)?;
                    (
                        assemble_input(&draw.x_t, c, &params.config),
                        Some(draw.t),
                        draw.velocity.values().to_vec(),
                    )
                }
                Variant::Baseline => (
                    assemble_condition(c, &params.config),
                    None,
                    x0.values().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
                ),
            };
        let (out, cache) = params.net.forward(&input, t_input);
        let out_flat = out.as_slice().unwrap();

        let mut dy = Array3::zeros(out.raw_dim());
        let dy_flat = dy.as_slice_mut().unwrap();
        let mut sample_loss = 0.0;
        match params.config.variant {
            Variant::Baseline => {
                for ((d, &l), &z) in dy_flat.iter_mut().zip(out_flat).zip(&target) {
                    sample_loss += bce_with_logits(l, z);
                    let sig = 1.0 / (1.0 + (-l).exp());
                    *d = (sig - z) / (n * b);
                }
            }
            _ => {
                for ((d, &o), &tgt) in dy_flat.iter_mut().zip(out_flat).zip(&target) {
                    let r = o - tgt;
                    sample_loss += r * r;
                    *d = 2.0 * r / (n * b);
                }
            }
        }
        total += sample_loss / n;
        params.net.backward(&cache, &dy, &mut grad);
    }
    Ok((total / b, grad))
}

/// Adam with global gradient-norm clipping.
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    clip: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    pub fn new(param_count: usize, lr: f64, clip: f64) -> Self {
        Adam {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            lr,
            clip,
        }
    }

    pub fn step(&mut self, params: &mut UNet, grad: &mut UNet) {
        let mut sq = 0.0;
        grad.visit_params(|_, _, g| sq += g.iter().map(|x| x * x).sum::<f64>());
        let norm = sq.sqrt();
        let scale = if norm > self.clip { self.clip / norm } else { 1.0 };

        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let mut offset = 0;
        let (m, v, lr) = (&mut self.m, &mut self.v, self.lr);
        let mut updates: Vec<f64> = Vec::new();
        grad.visit_params(|_, _, g| {
            for &gv in g.iter() {
                let gv = gv * scale;
                let idx = offset;
                m[idx] = ADAM_BETA1 * m[idx] + (1.0 - ADAM_BETA1) * gv;
                v[idx] = ADAM_BETA2 * v[idx] + (1.0 - ADAM_BETA2) * gv * gv;
                let mhat = m[idx] / bc1;
                let vhat = v[idx] / bc2;
                updates.push(lr * mhat / (vhat.sqrt() + ADAM_EPS));
                offset += 1;
            }
        });
        let mut cursor = 0;
        params.visit_params(|_, _, p| {
            for pv in p.iter_mut() {
                *pv -= updates[cursor];
                cursor += 1;
            }
        });
    }
}

/// One epoch's record in the loss trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Runs seeded mini-batch training over the dataset's train split and
/// returns the final parameters with the per-epoch loss trace.
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
) -> Result<(ModelParams, Vec<EpochStats>), PlannerError> {
    config.validate()?;
    if dataset.height != config.net.grid_size || dataset.width != config.net.grid_size {
        return Err(PlannerError::Config(format!(
            "dataset is {}x{} but the model expects {0}x{0}",
            dataset.height, dataset.width
        )));
    }
    let train_split = dataset.train();
    if train_split.is_empty() {
        return Err(PlannerError::Config("train split is empty".into()));
    }

    let sched = make_schedule(config.schedule_t)?;
    let mut params = init_params(&config.net, config.seed)?;
    let count = params.net.param_count();
    let mut opt = Adam::new(count, config.learning_rate, config.grad_clip);

    let samples: Vec<(PathTensor, ConditionTensor)> = train_split
        .iter()
        .map(|inst| {
            (
                genplanner_core::encode_path_target(inst),
                genplanner_core::encode_condition(inst),
            )
        })
        .collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5u64);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut draw_counter: u64 = 0;

    for epoch in 0..config.epochs {
        // Fisher-Yates with the epoch-persistent rng.
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(PathTensor, ConditionTensor)> =
                chunk.iter().map(|&i| samples[i].clone()).collect();
            let (loss, mut grad) =
                loss_and_grad(&batch, &params, &sched, config.seed ^ draw_counter)?;
            draw_counter = draw_counter.wrapping_add(0x9e3779b97f4a7c15);
            if !loss.is_finite() {
                return Err(PlannerError::Numerical(format!(
                    "non-finite loss at epoch {epoch}, step {}",
                    params.step
                )));
            }
            opt.step(&mut params.net, &mut grad);
            params.step += 1;
            epoch_loss += loss;
            batches += 1;
        }
        trace.push(EpochStats {
            epoch,
            mean_loss: epoch_loss / batches as f64,
        });
    }
    Ok((params, trace))
}
