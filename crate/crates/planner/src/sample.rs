//! Iterative generation: explicit Euler integration for the flow variant and
//! the deterministic DDIM reverse process for the diffusion variant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use genplanner_core::{
    estimate_x0_diff, estimate_x0_flow, ConditionTensor, FlowTime, NoiseSchedule, PathTensor,
};

use crate::error::PlannerError;
use crate::net::{forward_denoiser, ModelParams, Variant};

/// Generation output plus the optional clean-sample estimate trace, ordered
/// by decreasing noise level.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    pub final_state: PathTensor,
    /// `(t, x0_hat)` pairs; `t` is the flow time or the normalized
    /// diffusion timestep at which the estimate was formed.
    pub intermediates: Option<Vec<(f64, PathTensor)>>,
}

/// An abstract velocity field; the model implements it, and tests plug in
/// analytic oracles.
pub trait VelocityField {
    fn velocity(
        &self,
        x: &PathTensor,
        c: &ConditionTensor,
        t: f64,
    ) -> Result<PathTensor, PlannerError>;
}

/// An abstract noise predictor for the diffusion reverse process.
pub trait NoisePredictor {
    fn predict_eps(
        &self,
        x: &PathTensor,
        c: &ConditionTensor,
        t_index: usize,
        t_norm: f64,
    ) -> Result<PathTensor, PlannerError>;
}

impl VelocityField for ModelParams {
    fn velocity(
        &self,
        x: &PathTensor,
        c: &ConditionTensor,
        t: f64,
    ) -> Result<PathTensor, PlannerError> {
        forward_denoiser(self, x, c, t)
    }
}

impl NoisePredictor for ModelParams {
    fn predict_eps(
        &self,
        x: &PathTensor,
        c: &ConditionTensor,
        _t_index: usize,
        t_norm: f64,
    ) -> Result<PathTensor, PlannerError> {
        forward_denoiser(self, x, c, t_norm)
    }
}

/// The seeded Gaussian state both samplers start from.
pub fn initial_noise(h: usize, w: usize, seed: u64) -> PathTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..h * w).map(|_| rng.sample(StandardNormal)).collect();
    PathTensor::new(h, w, vals).unwrap()
}

/// Explicit Euler integration of the learned field from t=1 down to t=0 on a
/// uniform grid, left-endpoint evaluation.
pub fn euler_sample_with<F: VelocityField + ?Sized>(
    field: &F,
    c: &ConditionTensor,
    steps: usize,
    seed: u64,
    record: bool,
) -> Result<SampleTrace, PlannerError> {
    if steps == 0 {
        return Err(PlannerError::Config("step count must be >= 1".into()));
    }
    let mut x = initial_noise(c.height(), c.width(), seed);
    let dt = -1.0 / steps as f64;
    let mut intermediates = record.then(Vec::new);
    for k in 0..steps {
        let t = 1.0 - k as f64 / steps as f64;
        let v = field.velocity(&x, c, t)?;
        if let Some(frames) = intermediates.as_mut() {
            let x0_hat = estimate_x0_flow(&x, &v, FlowTime::new(t)?)?;
            frames.push((t, x0_hat));
        }
        x = x.zip(&v, |xi, vi| xi + dt * vi)?;
    }
    Ok(SampleTrace {
        final_state: x,
        intermediates,
    })
}

pub fn euler_sample(
    params: &ModelParams,
    c: &ConditionTensor,
    steps: usize,
    seed: u64,
    record: bool,
) -> Result<SampleTrace, PlannerError> {
    if params.config.variant != Variant::FlowVelocity {
        return Err(PlannerError::VariantMismatch(
            "euler_sample needs a flow-velocity model".into(),
        ));
    }
    euler_sample_with(params, c, steps, seed, record)
}

/// The uniformly-strided descending timestep subsequence visited by DDIM.
/// Includes `t_total - 1` and 0 whenever more than one step is taken.
pub fn ddim_timesteps(t_total: usize, steps: usize) -> Vec<usize> {
    if steps == 1 {
        return vec![t_total - 1];
    }
    let mut out: Vec<usize> = (0..steps)
        .map(|k| ((k as f64) * (t_total - 1) as f64 / (steps - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out.reverse();
    out
}

/// Deterministic DDIM: estimate the clean sample, then step to the previous
/// visited timestep reusing the predicted noise; no fresh noise after
/// initialization.
pub fn ddim_sample_with<P: NoisePredictor + ?Sized>(
    predictor: &P,
    c: &ConditionTensor,
    steps: usize,
    sched: &NoiseSchedule,
    seed: u64,
    record: bool,
) -> Result<SampleTrace, PlannerError> {
    let t_total = sched.len();
    if steps == 0 || steps > t_total {
        return Err(PlannerError::Config(format!(
            "step count must lie in 1..={t_total}, got {steps}"
        )));
    }
    let timesteps = ddim_timesteps(t_total, steps);
    let mut x = initial_noise(c.height(), c.width(), seed);
    let mut intermediates = record.then(Vec::new);
    for (j, &t) in timesteps.iter().enumerate() {
        let t_norm = t as f64 / t_total as f64;
        let eps_hat = predictor.predict_eps(&x, c, t, t_norm)?;
        let x0_hat = estimate_x0_diff(&x, &eps_hat, t, sched)?;
        if let Some(frames) = intermediates.as_mut() {
            frames.push((t_norm, x0_hat.clone()));
        }
        let t_prev: isize = timesteps.get(j + 1).map(|&p| p as isize).unwrap_or(-1);
        let ab_prev = sched.alpha_bar_or_one(t_prev)?;
        let (sa, sn) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
        x = x0_hat.zip(&eps_hat, |x0v, ev| sa * x0v + sn * ev)?;
    }
    Ok(SampleTrace {
        final_state: x,
        intermediates,
    })
}

pub fn ddim_sample(
    params: &ModelParams,
    c: &ConditionTensor,
    steps: usize,
    sched: &NoiseSchedule,
    seed: u64,
    record: bool,
) -> Result<SampleTrace, PlannerError> {
    if params.config.variant != Variant::DiffusionEps {
        return Err(PlannerError::VariantMismatch(
            "ddim_sample needs a diffusion-eps model".into(),
        ));
    }
    ddim_sample_with(params, c, steps, sched, seed, record)
}
