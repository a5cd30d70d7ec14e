use alloc::format;

use libm::sqrt;

use crate::error::CoreError;
use crate::schedule::NoiseSchedule;
use crate::tensor::PathTensor;

/// Continuous flow time in [0, 1]; 0 is data, 1 is noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowTime(f64);

impl FlowTime {
    pub fn new(t: f64) -> Result<Self, CoreError> {
        if !(0.0..=1.0).contains(&t) || !t.is_finite() {
            return Err(CoreError::InvalidArgument(format!(
                "flow time must lie in [0,1], got {t}"
            )));
        }
        Ok(FlowTime(t))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Variance-preserving forward corruption:
/// `sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps`.
pub fn diffuse_forward(
    x0: &PathTensor,
    eps: &PathTensor,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<PathTensor, CoreError> {
    let ab = sched.alpha_bar(t)?;
    let (sa, sn) = (sqrt(ab), sqrt(1.0 - ab));
    x0.zip(eps, |a, e| sa * a + sn * e)
}

/// Linear interpolation between data and noise: `(1 - t) * x0 + t * x1`.
pub fn flow_interpolate(
    x0: &PathTensor,
    x1: &PathTensor,
    t: FlowTime,
) -> Result<PathTensor, CoreError> {
    let t = t.value();
    x0.zip(x1, |a, b| (1.0 - t) * a + t * b)
}

/// Time derivative of the linear interpolation trajectory: `x1 - x0`.
pub fn flow_target_velocity(x0: &PathTensor, x1: &PathTensor) -> Result<PathTensor, CoreError> {
    x0.zip(x1, |a, b| b - a)
}

/// Clean-sample estimate for the flow variant: `x_t - t * v`.
pub fn estimate_x0_flow(
    x_t: &PathTensor,
    v: &PathTensor,
    t: FlowTime,
) -> Result<PathTensor, CoreError> {
    let t = t.value();
    x_t.zip(v, |x, vi| x - t * vi)
}

/// Clean-sample estimate for the diffusion variant:
/// `(x_t - sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_bar_t)`.
pub fn estimate_x0_diff(
    x_t: &PathTensor,
    eps_hat: &PathTensor,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<PathTensor, CoreError> {
    let ab = sched.alpha_bar(t)?;
    if ab <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "alpha_bar[{t}] = {ab} makes the clean-sample estimate singular"
        )));
    }
    let (sa, sn) = (sqrt(ab), sqrt(1.0 - ab));
    x_t.zip(eps_hat, |x, e| (x - sn * e) / sa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_schedule;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize) -> PathTensor {
        let vals: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-2.0..2.0)).collect();
        PathTensor::new(h, w, vals).unwrap()
    }

    #[test]
    fn diffuse_with_zero_noise_scales_signal() {
        let sched = make_schedule(100).unwrap();
        let x0 = PathTensor::new(1, 4, alloc::vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let eps = PathTensor::zeros(1, 4);
        let xt = diffuse_forward(&x0, &eps, 10, &sched).unwrap();
        let sa = sched.alpha_bar(10).unwrap().sqrt();
        for (a, b) in xt.values().iter().zip(x0.values()) {
            assert!((a - sa * b).abs() < 1e-12);
        }
    }

    #[test]
    fn diffuse_inversion_recovers_x0() {
        let sched = make_schedule(1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in [0usize, 17, 500, 999] {
            let x0 = random_tensor(&mut rng, 6, 6);
            let eps = random_tensor(&mut rng, 6, 6);
            let xt = diffuse_forward(&x0, &eps, t, &sched).unwrap();
            let rec = estimate_x0_diff(&xt, &eps, t, &sched).unwrap();
            for (a, b) in rec.values().iter().zip(x0.values()) {
                assert!((a - b).abs() < 1e-5, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn diffuse_noise_variance_matches_schedule() {
        // Monte Carlo: with x0 = 0, Var(x_t) = 1 - alpha_bar_t.
        let sched = make_schedule(1000).unwrap();
        let t = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = PathTensor::zeros(1, 1);
        let mut sum_sq = 0.0;
        let n = 10_000;
        for _ in 0..n {
            // Box-Muller standard normal.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos();
            let eps = PathTensor::new(1, 1, alloc::vec![z]).unwrap();
            let xt = diffuse_forward(&x0, &eps, t, &sched).unwrap();
            sum_sq += xt.values()[0] * xt.values()[0];
        }
        let var = sum_sq / n as f64;
        let expect = 1.0 - sched.alpha_bar(t).unwrap();
        assert!((var - expect).abs() / expect < 0.05, "{var} vs {expect}");
    }

    #[test]
    fn flow_interpolation_endpoints_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = random_tensor(&mut rng, 4, 4);
        let x1 = random_tensor(&mut rng, 4, 4);
        assert_eq!(flow_interpolate(&x0, &x1, FlowTime::new(0.0).unwrap()).unwrap(), x0);
        assert_eq!(flow_interpolate(&x0, &x1, FlowTime::new(1.0).unwrap()).unwrap(), x1);
        let mid = flow_interpolate(&x0, &x1, FlowTime::new(0.5).unwrap()).unwrap();
        for ((m, a), b) in mid.values().iter().zip(x0.values()).zip(x1.values()) {
            assert!((m - 0.5 * (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn target_velocity_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = random_tensor(&mut rng, 5, 5);
        let x1 = random_tensor(&mut rng, 5, 5);
        let v = flow_target_velocity(&x0, &x1).unwrap();
        for (t, h) in [(0.2, 1e-4), (0.7, 1e-3), (0.0, 1e-5)] {
            let a = flow_interpolate(&x0, &x1, FlowTime::new(t).unwrap()).unwrap();
            let b = flow_interpolate(&x0, &x1, FlowTime::new(t + h).unwrap()).unwrap();
            for ((va, vb), vv) in a.values().iter().zip(b.values()).zip(v.values()) {
                assert!(((vb - va) / h - vv).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn flow_x0_estimate_inverts_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = random_tensor(&mut rng, 4, 4);
        let x1 = random_tensor(&mut rng, 4, 4);
        let v = flow_target_velocity(&x0, &x1).unwrap();
        for t in [0.0, 0.3, 0.99, 1.0] {
            let ft = FlowTime::new(t).unwrap();
            let xt = flow_interpolate(&x0, &x1, ft).unwrap();
            let rec = estimate_x0_flow(&xt, &v, ft).unwrap();
            for (a, b) in rec.values().iter().zip(x0.values()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = PathTensor::zeros(2, 2);
        let b = PathTensor::zeros(3, 3);
        assert!(flow_target_velocity(&a, &b).is_err());
    }

    #[test]
    fn invalid_flow_time_rejected() {
        assert!(FlowTime::new(-0.1).is_err());
        assert!(FlowTime::new(1.1).is_err());
        assert!(FlowTime::new(f64::NAN).is_err());
    }
}
