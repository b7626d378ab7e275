//! LMS identification of an unknown 1-D Volterra system.
//!
//! An adaptive filter with the same structure as the plant is driven by
//! white noise; at each step the squared error `E_t = ½(d_t − y_t)²`
//! between plant and filter output yields the stochastic gradient
//!
//! ```text
//! ∂E_t/∂W^k[τ1..τk] = x_{t-τk}···x_{t-τ1}·(y_t − d_t)
//! W^k[τ1..τk] <- W^k[τ1..τk] − η·∂E_t/∂W^k[τ1..τk]
//! ```
//!
//! The plant output is noiseless, so for an identifiable target the error
//! floor is zero and the learned kernels converge to the plant's. Kernels
//! that weight `x_{t-τ1}x_{t-τ2}` and `x_{t-τ2}x_{t-τ1}` separately are
//! only identifiable up to that pairwise sum; plant kernels should be
//! symmetric when per-entry recovery matters.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VnnError};
use crate::oracle::{eval_point, VolterraWeights};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmsConfig {
    pub learning_rate: f64,
    pub samples: usize,
    pub seed: u64,
    /// White-noise input is uniform on `[-input_scale, input_scale]`.
    pub input_scale: f64,
    /// Trailing window over which the running MSE is computed.
    pub mse_window: usize,
}

impl Default for LmsConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            samples: 10_000,
            seed: 0,
            input_scale: 1.0,
            mse_window: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmsResult {
    pub learned: VolterraWeights,
    /// Running MSE sampled once per trailing window.
    pub mse_trace: Vec<f64>,
    /// Mean squared error over the final window.
    pub final_mse: f64,
    /// Largest absolute kernel-entry difference to the target.
    pub max_weight_error: f64,
}

/// Identify `target` by running LMS on white-noise input.
pub fn lms_sysid(target: &VolterraWeights, config: &LmsConfig) -> Result<LmsResult> {
    if target.order() > 2 || target.len_taps() > 3 {
        return Err(VnnError::Domain(format!(
            "system identification targets are limited to K <= 2, L <= 3; \
             got K = {}, L = {}",
            target.order(),
            target.len_taps()
        )));
    }
    if !config.learning_rate.is_finite() || config.learning_rate <= 0.0 {
        return Err(VnnError::Config(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if config.samples == 0 || config.mse_window == 0 {
        return Err(VnnError::Config(
            "sample count and MSE window must be at least 1".into(),
        ));
    }

    let len = target.len_taps();
    let mut learned = VolterraWeights::zeros(target.order(), len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut series: Vec<f64> = Vec::with_capacity(config.samples);
    let mut window_sq = Vec::with_capacity(config.mse_window);
    let mut mse_trace = Vec::new();

    for t in 0..config.samples {
        series.push(rng.random_range(-config.input_scale..=config.input_scale));
        let desired = eval_point(target, &series, t);
        let output = eval_point(&learned, &series, t);
        let error = output - desired;
        if !error.is_finite() || error * error > 1e12 {
            return Err(VnnError::Divergence {
                epoch: 0,
                step: t,
                message: format!(
                    "LMS error reached {error:e}; reduce the learning rate {} or the input scale",
                    config.learning_rate
                ),
            });
        }
        for order in 1..=learned.order() {
            let kernel = learned.kernel_mut(order);
            for flat in 0..kernel.len() {
                let mut product = 1.0;
                let mut rem = flat;
                for _ in 0..order {
                    let tap = rem % len;
                    rem /= len;
                    let x = if tap > t { 0.0 } else { series[t - tap] };
                    product *= x;
                }
                kernel[flat] -= config.learning_rate * product * error;
            }
        }
        window_sq.push(error * error);
        if window_sq.len() == config.mse_window {
            mse_trace.push(window_sq.iter().sum::<f64>() / window_sq.len() as f64);
            window_sq.clear();
        }
    }
    if !window_sq.is_empty() {
        mse_trace.push(window_sq.iter().sum::<f64>() / window_sq.len() as f64);
    }
    let final_mse = *mse_trace.last().unwrap();
    let max_weight_error = learned.max_abs_diff(target);
    Ok(LmsResult {
        learned,
        mse_trace,
        final_mse,
        max_weight_error,
    })
}
