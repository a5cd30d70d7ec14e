use alloc::format;
use alloc::vec::Vec;

use crate::error::CoreError;

/// Cumulative signal coefficients of the forward diffusion process.
///
/// Built from a linear per-step beta ramp from 1e-4 to 0.02 with
/// `alpha_bar[t] = prod_{s<=t} (1 - beta_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;

/// Builds the cumulative-product schedule for `t_steps` timesteps.
pub fn make_schedule(t_steps: usize) -> Result<NoiseSchedule, CoreError> {
    if t_steps == 0 {
        return Err(CoreError::InvalidArgument(
            "schedule needs at least one timestep".into(),
        ));
    }
    let mut alpha_bar = Vec::with_capacity(t_steps);
    let mut prod = 1.0;
    for t in 0..t_steps {
        let frac = if t_steps == 1 {
            0.0
        } else {
            t as f64 / (t_steps - 1) as f64
        };
        let beta = BETA_START + (BETA_END - BETA_START) * frac;
        prod *= 1.0 - beta;
        alpha_bar.push(prod);
    }
    Ok(NoiseSchedule { alpha_bar })
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bar.is_empty()
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64, CoreError> {
        self.alpha_bar.get(t).copied().ok_or_else(|| {
            CoreError::InvalidArgument(format!(
                "timestep {t} out of range 0..{}",
                self.alpha_bar.len()
            ))
        })
    }

    /// `alpha_bar` at `t`, with `t = -1` denoting the clean endpoint
    /// (`alpha_bar = 1`). Used by the DDIM transition.
    pub fn alpha_bar_or_one(&self, t: isize) -> Result<f64, CoreError> {
        if t < 0 {
            Ok(1.0)
        } else {
            self.alpha_bar(t as usize)
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha_bar
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_near_one() {
        let sched = make_schedule(1000).unwrap();
        assert_eq!(sched.alpha_bar(0).unwrap(), 1.0 - 1e-4);
    }

    #[test]
    fn last_step_near_zero() {
        // Independent recomputation of the cumulative product.
        let mut prod = 1.0f64;
        for t in 0..1000 {
            prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * t as f64 / 999.0);
        }
        let sched = make_schedule(1000).unwrap();
        let last = sched.alpha_bar(999).unwrap();
        assert!((last - prod).abs() < 1e-12);
        assert!(last < 1e-4, "alpha_bar[999] = {last}");
    }

    #[test]
    fn strictly_decreasing_across_lengths() {
        for t_steps in [10usize, 100, 1000] {
            let sched = make_schedule(t_steps).unwrap();
            let v = sched.values();
            assert!(v.windows(2).all(|w| w[1] < w[0]));
            assert!(v.iter().all(|&a| a > 0.0 && a <= 1.0));
        }
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(make_schedule(0).is_err());
    }

    #[test]
    fn out_of_range_timestep() {
        let sched = make_schedule(10).unwrap();
        assert!(sched.alpha_bar(10).is_err());
        assert_eq!(sched.alpha_bar_or_one(-1).unwrap(), 1.0);
    }
}
