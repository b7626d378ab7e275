//! Linear classifier head, softmax probabilities, cross-entropy loss with
//! weight decay, and their gradients.
//!
//! Scores are `W^cl·F + b^cl`; softmax converts them into a probability
//! measure. The training objective is mean cross-entropy over the batch plus
//! `(λ/2)[Σ‖W‖² + ‖W^cl‖²]` where the sum runs over every layer kernel;
//! biases are exempt from decay.

use rand::Rng;

use crate::error::{Result, VnnError};

/// Probabilities below this are clamped before the log in cross-entropy.
const PROB_FLOOR: f64 = 1e-300;

/// Linear classifier: `I × D` weights plus `I` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    weights: Vec<f64>,
    biases: Vec<f64>,
    classes: usize,
    feature_dim: usize,
}

impl ClassifierHead {
    pub fn zeros(classes: usize, feature_dim: usize) -> Result<Self> {
        if classes < 2 {
            return Err(VnnError::Config(format!(
                "classifier needs at least 2 classes, got {classes}"
            )));
        }
        if feature_dim == 0 {
            return Err(VnnError::Config("feature dimension must be positive".into()));
        }
        Ok(Self {
            weights: vec![0.0; classes * feature_dim],
            biases: vec![0.0; classes],
            classes,
            feature_dim,
        })
    }

    /// Randomize weights uniformly in `[-1/√D, 1/√D]`; biases stay zero.
    pub fn randomize<R: Rng>(&mut self, rng: &mut R) {
        let s = 1.0 / (self.feature_dim as f64).sqrt();
        for w in &mut self.weights {
            *w = rng.random_range(-s..=s);
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Squared L2 norm of the weights only (the head's decay share).
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim {
            return Err(VnnError::Shape(format!(
                "feature vector has {} entries, head expects {}",
                features.len(),
                self.feature_dim
            )));
        }
        Ok((0..self.classes)
            .map(|i| {
                let row = &self.weights[i * self.feature_dim..(i + 1) * self.feature_dim];
                row.iter().zip(features).map(|(w, f)| w * f).sum::<f64>() + self.biases[i]
            })
            .collect())
    }

    /// Softmax class probabilities, computed with max-subtraction so large
    /// scores cannot overflow.
    pub fn class_probabilities(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.iter().any(|f| !f.is_finite()) {
            return Err(VnnError::Numeric("non-finite feature value".into()));
        }
        let scores = self.scores(features)?;
        Ok(softmax(&scores))
    }

    /// Gradients of `cross_entropy(class_probabilities(features), label)`:
    /// `grad_b = p - d`, `grad_W = (p - d) ⊗ F`, `grad_F = Wᵀ(p - d)`.
    pub fn head_and_feature_grads(
        &self,
        features: &[f64],
        label: usize,
    ) -> Result<HeadGrads> {
        if label >= self.classes {
            return Err(VnnError::Domain(format!(
                "label {label} out of range for {} classes",
                self.classes
            )));
        }
        let probs = self.class_probabilities(features)?;
        let mut grad_b = probs;
        grad_b[label] -= 1.0;
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_f = vec![0.0; self.feature_dim];
        for (i, &g) in grad_b.iter().enumerate() {
            let row = i * self.feature_dim;
            for j in 0..self.feature_dim {
                grad_w[row + j] = g * features[j];
                grad_f[j] += g * self.weights[row + j];
            }
        }
        Ok(HeadGrads {
            weights: grad_w,
            biases: grad_b,
            features: grad_f,
        })
    }
}

/// Gradient bundle from [`ClassifierHead::head_and_feature_grads`].
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub features: Vec<f64>,
}

/// Numerically safe softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Cross-entropy `-log(probs[label])` of a one-hot target.
///
/// A probability that underflows to zero is clamped at 1e-300 and the event
/// is logged rather than returning infinity.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(VnnError::Domain(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let p = probs[label];
    if p < PROB_FLOOR {
        log::warn!("cross-entropy probability {p:.3e} clamped to {PROB_FLOOR:.0e}");
        return Ok(-PROB_FLOOR.ln());
    }
    Ok(-p.ln())
}

/// Weight-decay coefficient. λ must be non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
}

impl LossConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(VnnError::Domain(format!(
                "weight-decay lambda must be >= 0, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

/// Mean cross-entropy over the batch plus `(λ/2)·Σ‖W‖²`, the decay sum
/// running over every layer kernel (both streams when fused) and the
/// classifier weights, never the biases.
///
/// The batch loss is a mean, not a sum, so λ keeps its meaning across batch
/// sizes.
pub fn regularized_objective<M: crate::model::Model>(
    model: &M,
    batch: &[crate::model::Sample],
    lambda: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(VnnError::Domain("objective over an empty batch".into()));
    }
    LossConfig::new(lambda)?;
    let mut total = 0.0;
    for sample in batch {
        total += model.loss(sample)?;
    }
    Ok(total / batch.len() as f64 + 0.5 * lambda * model.decay_sq_norm())
}
