//! In-memory datasets and the parameter-group view shared by every
//! trainable network.
//!
//! A [`Model`] exposes its parameters as named flat groups (per-layer
//! kernels, factor banks, head weights, head biases). The trainer, the
//! weight-decay bookkeeping, and the finite-difference gradient checker all
//! work through this view, so single-stream and two-stream networks train
//! with the same code.

use crate::cascade::{pool_features, unpool_grad, CascadeNetwork};
use crate::classifier::cross_entropy;
use crate::error::{Result, VnnError};
use crate::layer::QuadraticKernel;
use crate::tensor::Tensor;

/// One labeled clip, with an optional motion stream.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub rgb: Tensor,
    pub flow: Option<Tensor>,
}

impl Sample {
    /// Clips of one video share the id prefix before `'#'`; ids without a
    /// separator are single-clip videos.
    pub fn video_key(&self) -> &str {
        self.id.split('#').next().unwrap_or(&self.id)
    }
}

/// Loaded dataset: class names plus samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// View with the flow stream promoted to the primary slot, for training
    /// a single-stream network on motion data.
    pub fn with_flow_as_primary(&self) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let flow = s.flow.clone().ok_or_else(|| VnnError::Data {
                    id: s.id.clone(),
                    message: "clip has no flow stream".into(),
                })?;
                Ok(Sample {
                    id: s.id.clone(),
                    label: s.label,
                    rgb: flow,
                    flow: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            classes: self.classes.clone(),
            samples,
        })
    }
}

/// Per-sample training result: cross-entropy loss, whether the argmax
/// prediction was correct, and gradients aligned with the model's groups.
#[derive(Debug, Clone)]
pub struct SampleEval {
    pub loss: f64,
    pub correct: bool,
    pub grads: Vec<Vec<f64>>,
}

/// A classifier network whose parameters are visible as named flat groups.
pub trait Model: Clone + Send + Sync {
    fn classes(&self) -> usize;

    /// Class probabilities for one sample.
    fn probs(&self, sample: &Sample) -> Result<Vec<f64>>;

    /// Cross-entropy loss and gradients of it for one sample. Gradients are
    /// ordered exactly like the parameter groups.
    fn eval_with_grads(&self, sample: &Sample) -> Result<SampleEval>;

    fn group_count(&self) -> usize;
    fn group_name(&self, group: usize) -> String;
    fn group(&self, group: usize) -> &[f64];
    fn group_mut(&mut self, group: usize) -> &mut [f64];

    /// Whether this group participates in weight decay (biases do not).
    fn group_decays(&self, group: usize) -> bool;

    /// Cross-entropy of one sample.
    fn loss(&self, sample: &Sample) -> Result<f64> {
        cross_entropy(&self.probs(sample)?, sample.label)
    }

    /// Count of stored parameter scalars.
    fn census(&self) -> usize {
        (0..self.group_count()).map(|g| self.group(g).len()).sum()
    }

    /// `Σ‖W‖²` over decaying groups.
    fn decay_sq_norm(&self) -> f64 {
        (0..self.group_count())
            .filter(|&g| self.group_decays(g))
            .map(|g| self.group(g).iter().map(|w| w * w).sum::<f64>())
            .sum()
    }
}

/// Group index bookkeeping for one Volterra layer: a layer contributes
/// `w1` plus either `w2` or the `a`/`b` factor banks.
pub(crate) fn layer_group_len(layer: &crate::layer::VolterraLayer) -> usize {
    match layer.quad() {
        QuadraticKernel::Exact { .. } => 2,
        QuadraticKernel::Separable { .. } => 3,
    }
}

pub(crate) fn layer_group_suffix(layer: &crate::layer::VolterraLayer, slot: usize) -> &'static str {
    match (layer.quad(), slot) {
        (_, 0) => "w1",
        (QuadraticKernel::Exact { .. }, 1) => "w2",
        (QuadraticKernel::Separable { .. }, 1) => "a",
        (QuadraticKernel::Separable { .. }, 2) => "b",
        _ => unreachable!("slot out of range"),
    }
}

pub(crate) fn layer_group(layer: &crate::layer::VolterraLayer, slot: usize) -> &[f64] {
    match (layer.quad(), slot) {
        (_, 0) => layer.w1(),
        (QuadraticKernel::Exact { w2 }, 1) => w2,
        (QuadraticKernel::Separable { a, .. }, 1) => a,
        (QuadraticKernel::Separable { b, .. }, 2) => b,
        _ => unreachable!("slot out of range"),
    }
}

pub(crate) fn layer_group_mut(layer: &mut crate::layer::VolterraLayer, slot: usize) -> &mut [f64] {
    if slot == 0 {
        return layer.w1_mut();
    }
    match (layer.quad_mut(), slot) {
        (QuadraticKernel::Exact { w2 }, 1) => w2,
        (QuadraticKernel::Separable { a, .. }, 1) => a,
        (QuadraticKernel::Separable { b, .. }, 2) => b,
        _ => unreachable!("slot out of range"),
    }
}

/// Push one layer's gradient bundle onto the group-ordered gradient list.
pub(crate) fn push_layer_grads(out: &mut Vec<Vec<f64>>, grads: crate::layer::LayerGrads) {
    out.push(grads.w1);
    match grads.quad {
        QuadraticKernel::Exact { w2 } => out.push(w2),
        QuadraticKernel::Separable { a, b, .. } => {
            out.push(a);
            out.push(b);
        }
    }
}

impl Model for CascadeNetwork {
    fn classes(&self) -> usize {
        self.head().classes()
    }

    fn probs(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.clip_probs(&sample.rgb)
    }

    fn eval_with_grads(&self, sample: &Sample) -> Result<SampleEval> {
        let cache = self.trunk().forward_cached(&sample.rgb)?;
        let pooling = self.config().head.pooling;
        let pooled = pool_features(&cache.features, pooling);
        let probs = self.head().class_probabilities(&pooled)?;
        let loss = cross_entropy(&probs, sample.label)?;
        let correct = argmax(&probs) == sample.label;
        let head_grads = self.head().head_and_feature_grads(&pooled, sample.label)?;
        let grad_features = unpool_grad(&head_grads.features, cache.features.shape(), pooling)?;
        let (layer_grads, _) = self.trunk().backward(&cache, &grad_features)?;
        let mut grads = Vec::with_capacity(self.group_count());
        for lg in layer_grads {
            push_layer_grads(&mut grads, lg);
        }
        grads.push(head_grads.weights);
        grads.push(head_grads.biases);
        Ok(SampleEval {
            loss,
            correct,
            grads,
        })
    }

    fn group_count(&self) -> usize {
        self.trunk().layers().iter().map(layer_group_len).sum::<usize>() + 2
    }

    fn group_name(&self, group: usize) -> String {
        let mut g = group;
        for (z, layer) in self.trunk().layers().iter().enumerate() {
            let n = layer_group_len(layer);
            if g < n {
                return format!("layer{z}.{}", layer_group_suffix(layer, g));
            }
            g -= n;
        }
        match g {
            0 => "head.weights".into(),
            1 => "head.biases".into(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group(&self, group: usize) -> &[f64] {
        let mut g = group;
        for layer in self.trunk().layers() {
            let n = layer_group_len(layer);
            if g < n {
                return layer_group(layer, g);
            }
            g -= n;
        }
        match g {
            0 => self.head().weights(),
            1 => self.head().biases(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group_mut(&mut self, group: usize) -> &mut [f64] {
        let mut g = group;
        let layer_count = self.trunk().layers().len();
        for z in 0..layer_count {
            let n = layer_group_len(&self.trunk().layers()[z]);
            if g < n {
                return layer_group_mut(&mut self.trunk_mut().layers_mut()[z], g);
            }
            g -= n;
        }
        match g {
            0 => self.head_mut().weights_mut(),
            1 => self.head_mut().biases_mut(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group_decays(&self, group: usize) -> bool {
        group + 1 != self.group_count() // only the final group (head biases) is exempt
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
