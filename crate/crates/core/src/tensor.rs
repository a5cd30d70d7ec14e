use alloc::format;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::instance::MazeInstance;
use crate::metrics::PathMask;

/// Continuous H×W map holding clean targets, noised states, or clean-sample
/// estimates. Clean targets take values in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTensor {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl PathTensor {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != height * width {
            return Err(CoreError::InvalidArgument(format!(
                "tensor storage length {} != {height}*{width}",
                values.len()
            )));
        }
        Ok(PathTensor { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        PathTensor {
            height,
            width,
            values: alloc::vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &PathTensor) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PathTensor {
        PathTensor {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two same-shape tensors.
    pub fn zip(&self, other: &PathTensor, f: impl Fn(f64, f64) -> f64) -> Result<PathTensor, CoreError> {
        if !self.same_shape(other) {
            return Err(CoreError::InvalidArgument(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(PathTensor {
            height: self.height,
            width: self.width,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// The 3×H×W binary condition stack: walls, start, goal, in this order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTensor {
    height: usize,
    width: usize,
    /// Channel-major storage: [walls..., start..., goal...], row-major per channel.
    channels: Vec<f64>,
}

impl ConditionTensor {
    pub const CHANNELS: usize = 3;

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.channels[c * n..(c + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.channels
    }

    /// Zeroes out conditioning channels: channel 0 when `!walls`, channels
    /// 1 and 2 when `!start_goal`. Tensor shape is unchanged.
    pub fn masked(&self, start_goal: bool, walls: bool) -> ConditionTensor {
        let n = self.height * self.width;
        let mut channels = self.channels.clone();
        if !walls {
            channels[..n].fill(0.0);
        }
        if !start_goal {
            channels[n..].fill(0.0);
        }
        ConditionTensor {
            height: self.height,
            width: self.width,
            channels,
        }
    }
}

/// Encodes the walls/start/goal masks of an instance as the 3-channel
/// condition stack.
pub fn encode_condition(instance: &MazeInstance) -> ConditionTensor {
    let (h, w) = (instance.height(), instance.width());
    let n = h * w;
    let mut channels = alloc::vec![0.0; 3 * n];
    for (i, &wall) in instance.walls.bits().iter().enumerate() {
        if wall {
            channels[i] = 1.0;
        }
    }
    channels[n + instance.start.row * w + instance.start.col] = 1.0;
    channels[2 * n + instance.goal.row * w + instance.goal.col] = 1.0;
    ConditionTensor { height: h, width: w, channels }
}

/// Encodes the ground-truth path mask as a {-1,+1} target tensor.
pub fn encode_path_target(instance: &MazeInstance) -> PathTensor {
    let values = instance
        .path_mask_bits()
        .into_iter()
        .map(|on| if on { 1.0 } else { -1.0 })
        .collect();
    PathTensor {
        height: instance.height(),
        width: instance.width(),
        values,
    }
}

/// Thresholds a generated map into a path mask: a cell is path iff its
/// value is strictly greater than zero.
pub fn binarize(x: &PathTensor) -> Result<PathMask, CoreError> {
    if let Some(v) = x.values().iter().find(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite(format!(
            "cannot binarize tensor containing {v}"
        )));
    }
    Ok(PathMask::new(
        x.height(),
        x.width(),
        x.values().iter().map(|&v| v > 0.0).collect(),
    ))
}
