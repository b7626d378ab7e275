//! Reference evaluators for the 1-D Volterra series.
//!
//! Two independent routes to the same series output:
//!
//! ```text
//! direct:  y_t = Σ_{τ1} W¹[τ1] x_{t-τ1}
//!              + Σ_{τ1,τ2} W²[τ1,τ2] x_{t-τ1} x_{t-τ2}
//!              + ... up to order K
//!
//! nested:  y_t = Σ_{τ1} x_{t-τ1} [ W¹[τ1] + Σ_{τ2} x_{t-τ2} [ W²[τ1,τ2] + ... ] ]
//! ```
//!
//! Both use causal zero extension: any term touching a sample before the
//! start of the series contributes nothing, so outputs are emitted for every
//! index of the input series. These evaluators are deliberately literal
//! nested loops at small scale (K ≤ 4, L ≤ 4); they are the ground truth the
//! layer implementations are checked against, and the plant/learner
//! representation for LMS system identification.

use crate::error::{Result, VnnError};

/// Kernels of a 1-D Volterra system up to some order K.
///
/// `kernels[k-1]` holds the order-k kernel as a flat row-major array over
/// `(τ_1, ..., τ_k)`, each tap in `0..len_taps`, so its length is
/// `len_taps^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraWeights {
    len_taps: usize,
    kernels: Vec<Vec<f64>>,
}

impl VolterraWeights {
    /// Zero system of the given order and filter length.
    pub fn zeros(order: usize, len_taps: usize) -> Result<Self> {
        if order == 0 || len_taps == 0 {
            return Err(VnnError::Domain(
                "order and filter length must be at least 1".into(),
            ));
        }
        let kernels = (1..=order)
            .map(|k| vec![0.0; len_taps.pow(k as u32)])
            .collect();
        Ok(Self { len_taps, kernels })
    }

    /// Wrap explicit kernels; `kernels[k-1]` must have `len_taps^k` entries.
    pub fn from_kernels(len_taps: usize, kernels: Vec<Vec<f64>>) -> Result<Self> {
        if kernels.is_empty() || len_taps == 0 {
            return Err(VnnError::Domain(
                "order and filter length must be at least 1".into(),
            ));
        }
        for (i, kernel) in kernels.iter().enumerate() {
            let expected = len_taps.pow((i + 1) as u32);
            if kernel.len() != expected {
                return Err(VnnError::Shape(format!(
                    "order-{} kernel has {} entries, expected {}",
                    i + 1,
                    kernel.len(),
                    expected
                )));
            }
        }
        Ok(Self { len_taps, kernels })
    }

    pub fn order(&self) -> usize {
        self.kernels.len()
    }

    pub fn len_taps(&self) -> usize {
        self.len_taps
    }

    pub fn kernel(&self, order: usize) -> &[f64] {
        &self.kernels[order - 1]
    }

    pub fn kernel_mut(&mut self, order: usize) -> &mut [f64] {
        &mut self.kernels[order - 1]
    }

    /// Largest absolute entry difference across all kernels of two systems
    /// with identical geometry.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.kernels
            .iter()
            .flatten()
            .zip(other.kernels.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn check_oracle_scale(weights: &VolterraWeights) -> Result<()> {
    if weights.order() > 4 || weights.len_taps() > 4 {
        return Err(VnnError::Domain(format!(
            "oracle scale is K <= 4, L <= 4; got K = {}, L = {}",
            weights.order(),
            weights.len_taps()
        )));
    }
    Ok(())
}

/// Sample `x[t - tap]` with causal zero extension.
fn delayed(series: &[f64], t: usize, tap: usize) -> f64 {
    if tap > t {
        0.0
    } else {
        series[t - tap]
    }
}

/// Series output at one time step, enumerating every tap tuple of every
/// order through its flat kernel index.
pub(crate) fn eval_point(weights: &VolterraWeights, series: &[f64], t: usize) -> f64 {
    let len = weights.len_taps();
    let mut y = 0.0;
    for (order_idx, kernel) in weights.kernels.iter().enumerate() {
        let order = order_idx + 1;
        for (flat, &w) in kernel.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut product = w;
            let mut rem = flat;
            for _ in 0..order {
                let tap = rem % len;
                rem /= len;
                product *= delayed(series, t, tap);
            }
            y += product;
        }
    }
    y
}

/// Literal K-nested-loop evaluation of the series, one output per input
/// sample.
pub fn oracle_direct(weights: &VolterraWeights, series: &[f64]) -> Result<Vec<f64>> {
    check_oracle_scale(weights)?;
    Ok((0..series.len())
        .map(|t| eval_point(weights, series, t))
        .collect())
}

/// Horner-style nested evaluation: each bracket is the output of a linear
/// FIR stage feeding the next order. Must agree with [`oracle_direct`].
pub fn oracle_nested(weights: &VolterraWeights, series: &[f64]) -> Result<Vec<f64>> {
    check_oracle_scale(weights)?;
    let mut output = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        output.push(nested_bracket(weights, series, t, 1, 0));
    }
    Ok(output)
}

/// Value of `Σ_{τ} x_{t-τ} [ W^order[prefix, τ] + deeper bracket ]`, where
/// `prefix_flat` encodes the taps already fixed by the enclosing levels.
fn nested_bracket(
    weights: &VolterraWeights,
    series: &[f64],
    t: usize,
    order: usize,
    prefix_flat: usize,
) -> f64 {
    let len = weights.len_taps();
    let mut sum = 0.0;
    for tap in 0..len {
        let x = delayed(series, t, tap);
        if x == 0.0 {
            continue;
        }
        let flat = prefix_flat * len + tap;
        let mut bracket = weights.kernels[order - 1][flat];
        if order < weights.order() {
            bracket += nested_bracket(weights, series, t, order + 1, flat);
        }
        sum += x * bracket;
    }
    sum
}
