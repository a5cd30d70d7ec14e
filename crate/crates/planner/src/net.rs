//! Model configuration, parameter container, forward entry points, and the
//! version-stamped checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use genplanner_core::{ConditionTensor, PathTensor};

use crate::error::PlannerError;
use crate::nn::UNet;

/// Which prediction head the shared backbone carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Predicts the forward-process noise (DiffPlanner).
    DiffusionEps,
    /// Predicts the interpolation velocity (FlowPlanner).
    FlowVelocity,
    /// Directly predicts path logits from the condition alone (CNN baseline).
    Baseline,
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::DiffusionEps => "diff",
            Variant::FlowVelocity => "flow",
            Variant::Baseline => "cnn",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Variant> {
        match tag {
            "diff" => Some(Variant::DiffusionEps),
            "flow" => Some(Variant::FlowVelocity),
            "cnn" => Some(Variant::Baseline),
            _ => None,
        }
    }

    pub fn time_conditioned(&self) -> bool {
        !matches!(self, Variant::Baseline)
    }
}

/// Architecture hyperparameters plus the conditioning-channel mask used for
/// the ablation study. Defaults follow the declared backbone: base 64,
/// depth 2 below 32x32 and 3 at or above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub grid_size: usize,
    pub base_channels: usize,
    pub depth: usize,
    pub time_embed_dim: usize,
    pub variant: Variant,
    /// Conditioning channels kept active; omitted channels are zeroed.
    pub cond_start_goal: bool,
    pub cond_walls: bool,
}

impl NetConfig {
    pub fn with_defaults(grid_size: usize, variant: Variant) -> Self {
        NetConfig {
            grid_size,
            base_channels: 64,
            depth: if grid_size >= 32 { 3 } else { 2 },
            time_embed_dim: 64,
            variant,
            cond_start_goal: true,
            cond_walls: true,
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.base_channels < 8 {
            return Err(PlannerError::Config(format!(
                "base_channels must be >= 8, got {}",
                self.base_channels
            )));
        }
        if self.depth == 0 {
            return Err(PlannerError::Config("depth must be >= 1".into()));
        }
        let div = 1usize << self.depth;
        if !self.grid_size.is_multiple_of(div) || self.grid_size / div == 0 {
            return Err(PlannerError::Config(format!(
                "grid size {} is not divisible by 2^depth = {div}",
                self.grid_size
            )));
        }
        if self.time_embed_dim < 2 || !self.time_embed_dim.is_multiple_of(2) {
            return Err(PlannerError::Config(format!(
                "time_embed_dim must be a positive even number, got {}",
                self.time_embed_dim
            )));
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        match self.variant {
            Variant::Baseline => 3,
            _ => 4,
        }
    }
}

/// Network parameters together with their config and training-step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: NetConfig,
    pub step: u64,
    pub net: UNet,
}

/// Deterministically initializes a parameter set for the given config.
pub fn init_params(config: &NetConfig, seed: u64) -> Result<ModelParams, PlannerError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let time_dim = config.variant.time_conditioned().then_some(config.time_embed_dim);
    let net = UNet::init(
        config.in_channels(),
        config.base_channels,
        config.depth,
        time_dim,
        &mut rng,
    );
    Ok(ModelParams {
        config: *config,
        step: 0,
        net,
    })
}

/// Stacks the noisy map and the (possibly channel-masked) condition into the
/// network's input tensor: [x_t, walls, start, goal].
pub fn assemble_input(
    x_t: &PathTensor,
    c: &ConditionTensor,
    config: &NetConfig,
) -> Array3<f64> {
    let (h, w) = (x_t.height(), x_t.width());
    let masked = c.masked(config.cond_start_goal, config.cond_walls);
    let mut input = Array3::zeros((4, h, w));
    input
        .slice_mut(ndarray::s![0, .., ..])
        .assign(&ndarray::ArrayView2::from_shape((h, w), x_t.values()).unwrap());
    for ch in 0..3 {
        input
            .slice_mut(ndarray::s![ch + 1, .., ..])
            .assign(&ndarray::ArrayView2::from_shape((h, w), masked.channel(ch)).unwrap());
    }
    input
}

/// Condition-only input for the baseline variant.
pub fn assemble_condition(c: &ConditionTensor, config: &NetConfig) -> Array3<f64> {
    let (h, w) = (c.height(), c.width());
    let masked = c.masked(config.cond_start_goal, config.cond_walls);
    let mut input = Array3::zeros((3, h, w));
    for ch in 0..3 {
        input
            .slice_mut(ndarray::s![ch, .., ..])
            .assign(&ndarray::ArrayView2::from_shape((h, w), masked.channel(ch)).unwrap());
    }
    input
}

fn output_to_tensor(y: &Array3<f64>) -> PathTensor {
    let (h, w) = (y.shape()[1], y.shape()[2]);
    PathTensor::new(h, w, y.iter().copied().collect()).expect("output shape")
}

/// Noise / velocity prediction for the iterative variants. `t` is the
/// normalized time (diffusion: t/T; flow: t directly).
pub fn forward_denoiser(
    params: &ModelParams,
    x_t: &PathTensor,
    c: &ConditionTensor,
    t: f64,
) -> Result<PathTensor, PlannerError> {
    if params.config.variant == Variant::Baseline {
        return Err(PlannerError::VariantMismatch(
            "forward_denoiser called on a baseline model".into(),
        ));
    }
    check_spatial(params, x_t.height(), x_t.width())?;
    let input = assemble_input(x_t, c, &params.config);
    let (y, _) = params.net.forward(&input, Some(t));
    Ok(output_to_tensor(&y))
}

/// Path-logit prediction for the baseline variant.
pub fn forward_baseline(
    params: &ModelParams,
    c: &ConditionTensor,
) -> Result<PathTensor, PlannerError> {
    if params.config.variant != Variant::Baseline {
        return Err(PlannerError::VariantMismatch(
            "forward_baseline called on a time-conditioned model".into(),
        ));
    }
    check_spatial(params, c.height(), c.width())?;
    let input = assemble_condition(c, &params.config);
    let (y, _) = params.net.forward(&input, None);
    Ok(output_to_tensor(&y))
}

fn check_spatial(params: &ModelParams, h: usize, w: usize) -> Result<(), PlannerError> {
    if h != params.config.grid_size || w != params.config.grid_size {
        return Err(PlannerError::Config(format!(
            "input is {h}x{w} but the model was built for {0}x{0}",
            params.config.grid_size
        )));
    }
    Ok(())
}

const CKPT_MAGIC: &[u8; 4] = b"GPCK";
const CKPT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: NetConfig,
    variant: String,
    step: u64,
    arrays: Vec<(String, Vec<usize>)>,
}

/// Writes the checkpoint: magic, version, JSON header length + header, then
/// the parameter arrays as little-endian f64 in header order.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), PlannerError> {
    let mut net = params.net.clone();
    let mut arrays = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    net.visit_params(|name, shape, data| {
        arrays.push((name.to_string(), shape.to_vec()));
        for v in data.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    });
    let header = CheckpointHeader {
        config: params.config,
        variant: params.config.variant.tag().to_string(),
        step: params.step,
        arrays,
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&payload);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, PlannerError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 10 || &bytes[0..4] != CKPT_MAGIC {
        return Err(PlannerError::Format("not a GPCK checkpoint".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CKPT_VERSION {
        return Err(PlannerError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[10..10 + hlen])?;
    let mut params = init_params(&header.config, 0)?;
    params.step = header.step;

    let mut offset = 10 + hlen;
    let mut idx = 0usize;
    let mut err = None;
    params.net.visit_params(|name, shape, data| {
        if err.is_some() {
            return;
        }
        let (ref expect_name, ref expect_shape) = header.arrays[idx];
        if expect_name != name || expect_shape != &shape.to_vec() {
            err = Some(format!(
                "checkpoint array {idx} is {expect_name:?}{expect_shape:?}, model expects {name:?}{shape:?}"
            ));
            return;
        }
        for v in data.iter_mut() {
            let end = offset + 8;
            if end > bytes.len() {
                err = Some("checkpoint truncated".into());
                return;
            }
            *v = f64::from_le_bytes(bytes[offset..end].try_into().unwrap());
            offset += 8;
        }
        idx += 1;
    });
    if let Some(msg) = err {
        return Err(PlannerError::Format(msg));
    }
    if offset != bytes.len() {
        return Err(PlannerError::Format(
            "checkpoint has trailing bytes".into(),
        ));
    }
    Ok(params)
}
