//! Cascades of second-order Volterra layers.
//!
//! Stacking Z quadratic layers realizes polynomial interactions of much
//! higher order than any single layer while keeping parameter counts
//! per-layer quadratic in the window size. Each layer runs at temporal
//! stride 1; non-overlapping layers are re-strided here, keeping only every
//! L_z-th step, so the temporal extents follow
//!
//! ```text
//! overlapping:      M_z = M_{z-1} - L_z + 1
//! non-overlapping:  M_z = M_{z-1} / L_z     (L_z must divide M_{z-1})
//! ```
//!
//! The cascade ends in a linear classifier over flattened (or globally
//! spatially averaged) features. There is no bias anywhere in the feature
//! chain, so a zero clip produces zero features at every depth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::ClassifierHead;
use crate::error::{Result, VnnError};
use crate::layer::{
    LayerGeometry, LayerGrads, TemporalMode, VolterraLayer,
};
use crate::tensor::Tensor;

/// Quadratic-kernel storage choice for one configured layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadSpec {
    Exact,
    Separable { rank: usize },
}

/// One configured cascade stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub geometry: LayerGeometry,
    pub quad: QuadSpec,
}

/// How trunk features feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeaturePooling {
    /// Flatten all feature axes in row-major order.
    Flatten,
    /// Average over the spatial axes, keeping `[C, T]`.
    GlobalSpatialAverage,
}

/// Classifier geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadConfig {
    pub classes: usize,
    pub pooling: FeaturePooling,
}

/// Full network configuration: input shape, ordered layer stack, head.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub input_shape: [usize; 4],
    pub layers: Vec<LayerSpec>,
    pub head: HeadConfig,
}

impl CascadeConfig {
    /// Check the whole shape chain: channel continuity, window fits, and
    /// non-overlapping divisibility. Errors name the offending layer.
    pub fn validate(&self) -> Result<()> {
        self.feature_shapes()?;
        if self.head.classes < 2 {
            return Err(VnnError::Config(format!(
                "head needs at least 2 classes, got {}",
                self.head.classes
            )));
        }
        Ok(())
    }

    /// Shape after each layer, including its temporal re-stride.
    pub fn feature_shapes(&self) -> Result<Vec<[usize; 4]>> {
        chain_feature_shapes(self.input_shape, &self.layers)
    }

    /// Feature-vector length seen by the classifier.
    pub fn feature_dim(&self) -> Result<usize> {
        let last = *self.feature_shapes()?.last().unwrap();
        Ok(pooled_dim(&last, self.head.pooling))
    }
}

/// Shape after each configured layer of a stack, including temporal
/// re-strides. Errors name the offending layer.
pub fn chain_feature_shapes(
    input_shape: [usize; 4],
    layers: &[LayerSpec],
) -> Result<Vec<[usize; 4]>> {
    if layers.is_empty() {
        return Err(VnnError::Config("cascade needs at least one layer".into()));
    }
    let mut shape = input_shape;
    let mut shapes = Vec::with_capacity(layers.len());
    for (z, spec) in layers.iter().enumerate() {
        let g = &spec.geometry;
        if g.in_channels != shape[0] {
            return Err(VnnError::Config(format!(
                "layer {z}: expects {} input channels but receives {}",
                g.in_channels, shape[0]
            )));
        }
        if let QuadSpec::Separable { rank } = spec.quad {
            if rank == 0 {
                return Err(VnnError::Config(format!(
                    "layer {z}: separable rank must be at least 1"
                )));
            }
        }
        let raw = g
            .output_shape(&shape)
            .map_err(|e| VnnError::Config(format!("layer {z}: {e}")))?;
        let out_t = match g.temporal_mode {
            TemporalMode::Overlapping => raw[1],
            TemporalMode::NonOverlapping => {
                if !shape[1].is_multiple_of(g.len_t) {
                    return Err(VnnError::Config(format!(
                        "layer {z}: non-overlapping length {} does not divide \
                         incoming temporal extent {}",
                        g.len_t, shape[1]
                    )));
                }
                shape[1] / g.len_t
            }
        };
        shape = [raw[0], out_t, raw[2], raw[3]];
        shapes.push(shape);
    }
    Ok(shapes)
}

/// Feature-vector length of a pooled `[C, T, H, W]` feature map.
pub fn pooled_dim(shape: &[usize; 4], pooling: FeaturePooling) -> usize {
    match pooling {
        FeaturePooling::Flatten => shape.iter().product(),
        FeaturePooling::GlobalSpatialAverage => shape[0] * shape[1],
    }
}

/// Parameter census of a configuration. An exact stage costs
/// `n_in·n_out·(n_w + n_w²)` scalars and a rank-Q separable stage
/// `n_in·n_out·(n_w + 2·Q·n_w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCountReport {
    pub per_layer: Vec<usize>,
    pub layer_total: usize,
    pub classifier: usize,
    /// `Σ_{k=1..K} n_w^k` for a single monolithic filter of the cascade's
    /// nominal order K, using the first layer's window; saturates at
    /// `u128::MAX`.
    pub full_kth_equiv: u128,
}

fn spec_param_count(spec: &LayerSpec) -> usize {
    let g = &spec.geometry;
    let q_len = g.quad_len();
    let linear = g.out_channels * g.gather_len();
    let quad = match spec.quad {
        QuadSpec::Exact => g.out_channels * g.quad_blocks() * q_len * q_len,
        QuadSpec::Separable { rank } => 2 * g.out_channels * g.quad_blocks() * rank * q_len,
    };
    linear + quad
}

pub fn param_count(config: &CascadeConfig) -> Result<ParamCountReport> {
    config.validate()?;
    let per_layer: Vec<usize> = config.layers.iter().map(spec_param_count).collect();
    let layer_total = per_layer.iter().sum();
    let classifier = config.head.classes * config.feature_dim()? + config.head.classes;
    let n_w = config.layers[0].geometry.window_taps() as u128;
    let order = order_report_for_depth(config.layers.len());
    let mut full = 0u128;
    let mut term = 1u128;
    let mut k = 0u128;
    while k < order.nominal_order {
        term = term.saturating_mul(n_w);
        full = full.saturating_add(term);
        if full == u128::MAX || (term == u128::MAX && n_w > 1) {
            full = u128::MAX;
            break;
        }
        k += 1;
    }
    Ok(ParamCountReport {
        per_layer,
        layer_total,
        classifier,
        full_kth_equiv: full,
    })
}

/// Nominal order of a depth-Z cascade of quadratic stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderReport {
    pub layers: usize,
    /// `2^(2^(Z-1))`, the order quoted for Z-fold repeated second-order
    /// filtering; saturates at `u128::MAX`.
    pub nominal_order: u128,
    /// `2^Z`, the maximal polynomial degree actually reachable: composing a
    /// quadratic map with degree-d features yields degree at most 2d. The
    /// two agree for Z ≤ 2 and diverge from Z = 3 on; homogeneity tests
    /// assert the degree bound.
    pub degree_bound: u128,
}

pub fn order_report(config: &CascadeConfig) -> OrderReport {
    order_report_for_depth(config.layers.len())
}

pub fn order_report_for_depth(depth: usize) -> OrderReport {
    let pow2 = |e: usize| -> u128 {
        if e >= 128 {
            u128::MAX
        } else {
            1u128 << e
        }
    };
    let inner = if depth >= 8 { 128 } else { 1usize << (depth - 1) };
    OrderReport {
        layers: depth,
        nominal_order: pow2(inner),
        degree_bound: pow2(depth),
    }
}

/// Per-layer L1 norms and the chained BIBO bound
/// `A_z = A_{z-1}·Σ|W^{z1}| + A_{z-1}²·Σ|W^{z2}|`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub input_bound: f64,
    pub layers: Vec<LayerStability>,
    pub end_to_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStability {
    pub linear_l1: f64,
    pub quad_l1: f64,
    pub bound: f64,
}

/// Layer stack without a head; shared by single-stream networks and the
/// per-modality trunks of two-stream networks.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTrunk {
    input_shape: [usize; 4],
    layers: Vec<VolterraLayer>,
}

/// Intermediate activations retained for the backward pass.
pub struct TrunkCache {
    /// `inputs[z]` is the (re-strided) tensor fed to layer z.
    pub inputs: Vec<Tensor>,
    pub features: Tensor,
}

impl CascadeTrunk {
    pub fn new(input_shape: [usize; 4], layers: Vec<VolterraLayer>) -> Result<Self> {
        let trunk = Self {
            input_shape,
            layers,
        };
        trunk.output_shape()?;
        Ok(trunk)
    }

    pub fn input_shape(&self) -> [usize; 4] {
        self.input_shape
    }

    pub fn layers(&self) -> &[VolterraLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [VolterraLayer] {
        &mut self.layers
    }

    pub fn output_shape(&self) -> Result<[usize; 4]> {
        let mut shape = self.input_shape;
        for (z, layer) in self.layers.iter().enumerate() {
            let g = layer.geometry();
            let raw = g
                .output_shape(&shape)
                .map_err(|e| VnnError::Config(format!("layer {z}: {e}")))?;
            let out_t = match g.temporal_mode {
                TemporalMode::Overlapping => raw[1],
                TemporalMode::NonOverlapping => {
                    if !shape[1].is_multiple_of(g.len_t) {
                        return Err(VnnError::Config(format!(
                            "layer {z}: non-overlapping length {} does not divide \
                             incoming temporal extent {}",
                            g.len_t, shape[1]
                        )));
                    }
                    shape[1] / g.len_t
                }
            };
            shape = [raw[0], out_t, raw[2], raw[3]];
        }
        Ok(shape)
    }

    fn check_clip(&self, clip: &Tensor) -> Result<()> {
        if clip.shape() != self.input_shape {
            return Err(VnnError::Shape(format!(
                "clip shape {:?} does not match network input {:?}",
                clip.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Run the layer chain, applying each layer's temporal re-stride.
    pub fn forward_features(&self, clip: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(clip)?.features)
    }

    pub fn forward_cached(&self, clip: &Tensor) -> Result<TrunkCache> {
        self.check_clip(clip)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = clip.clone();
        for layer in &self.layers {
            let raw = layer.forward(&current)?;
            let next = match layer.geometry().temporal_mode {
                TemporalMode::Overlapping => raw,
                TemporalMode::NonOverlapping => restride_temporal(&raw, layer.geometry().len_t)?,
            };
            inputs.push(std::mem::replace(&mut current, next));
        }
        Ok(TrunkCache {
            inputs,
            features: current,
        })
    }

    /// Backpropagate `grad_features` through the chain. Returns per-layer
    /// kernel gradients (aligned with `layers()`) and the gradient with
    /// respect to the clip.
    pub fn backward(&self, cache: &TrunkCache, grad_features: &Tensor) -> Result<(Vec<LayerGrads>, Tensor)> {
        let mut grads: Vec<Option<LayerGrads>> = (0..self.layers.len()).map(|_| None).collect();
        let mut upstream = grad_features.clone();
        for (z, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[z];
            let raw_shape = layer.geometry().output_shape(input.shape())?;
            let raw_upstream = match layer.geometry().temporal_mode {
                TemporalMode::Overlapping => upstream,
                TemporalMode::NonOverlapping => {
                    expand_temporal_grad(&upstream, raw_shape[1], layer.geometry().len_t)?
                }
            };
            let layer_grads = layer.backward(input, &raw_upstream)?;
            upstream = layer_grads.input.clone();
            grads[z] = Some(layer_grads);
        }
        Ok((grads.into_iter().map(|g| g.unwrap()).collect(), upstream))
    }

    /// Count of stored weight scalars.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Sum of squared kernel weights, the trunk's decay share.
    pub fn sq_norm(&self) -> f64 {
        self.layers.iter().map(|l| l.sq_norm()).sum()
    }

    pub fn stability_chain(&self, input_bound: f64) -> Result<Vec<LayerStability>> {
        if input_bound < 0.0 {
            return Err(VnnError::Domain(format!(
                "input bound must be non-negative, got {input_bound}"
            )));
        }
        let mut bound = input_bound;
        let mut chain = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (linear_l1, quad_l1) = layer.l1_norms()?;
            bound = bound * linear_l1 + bound * bound * quad_l1;
            chain.push(LayerStability {
                linear_l1,
                quad_l1,
                bound,
            });
        }
        Ok(chain)
    }
}

/// Keep every `step`-th temporal index of a `[C, T, H, W]` tensor.
pub fn restride_temporal(t: &Tensor, step: usize) -> Result<Tensor> {
    let shape = t.shape();
    if shape.len() != 4 {
        return Err(VnnError::Shape("temporal re-stride expects rank 4".into()));
    }
    if step <= 1 {
        return Ok(t.clone());
    }
    let kept = (shape[1] - 1) / step + 1;
    let mut out = Tensor::zeros(&[shape[0], kept, shape[2], shape[3]])?;
    let plane = shape[2] * shape[3];
    let src = t.data();
    let dst = out.data_mut();
    for c in 0..shape[0] {
        for k in 0..kept {
            let src_base = (c * shape[1] + k * step) * plane;
            let dst_base = (c * kept + k) * plane;
            dst[dst_base..dst_base + plane].copy_from_slice(&src[src_base..src_base + plane]);
        }
    }
    Ok(out)
}

/// Adjoint of [`restride_temporal`]: scatter gradient slices back to their
/// stride-1 positions, zeros elsewhere.
pub fn expand_temporal_grad(grad: &Tensor, raw_t: usize, step: usize) -> Result<Tensor> {
    let shape = grad.shape();
    if shape.len() != 4 {
        return Err(VnnError::Shape("temporal expand expects rank 4".into()));
    }
    if step <= 1 {
        return Ok(grad.clone());
    }
    let kept = shape[1];
    let mut out = Tensor::zeros(&[shape[0], raw_t, shape[2], shape[3]])?;
    let plane = shape[2] * shape[3];
    let src = grad.data();
    let dst = out.data_mut();
    for c in 0..shape[0] {
        for k in 0..kept {
            let dst_base = (c * raw_t + k * step) * plane;
            let src_base = (c * kept + k) * plane;
            dst[dst_base..dst_base + plane].copy_from_slice(&src[src_base..src_base + plane]);
        }
    }
    Ok(out)
}

/// Pool trunk features into the classifier's feature vector.
pub fn pool_features(features: &Tensor, pooling: FeaturePooling) -> Vec<f64> {
    match pooling {
        FeaturePooling::Flatten => features.data().to_vec(),
        FeaturePooling::GlobalSpatialAverage => {
            let shape = features.shape();
            let (c, t, plane) = (shape[0], shape[1], shape[2] * shape[3]);
            let data = features.data();
            (0..c * t)
                .map(|ct| {
                    let base = ct * plane;
                    data[base..base + plane].iter().sum::<f64>() / plane as f64
                })
                .collect()
        }
    }
}

/// Adjoint of [`pool_features`].
pub fn unpool_grad(grad: &[f64], feature_shape: &[usize], pooling: FeaturePooling) -> Result<Tensor> {
    match pooling {
        FeaturePooling::Flatten => Tensor::from_vec(feature_shape, grad.to_vec()),
        FeaturePooling::GlobalSpatialAverage => {
            let plane = feature_shape[2] * feature_shape[3];
            let mut out = Tensor::zeros(feature_shape)?;
            let data = out.data_mut();
            for (ct, &g) in grad.iter().enumerate() {
                let share = g / plane as f64;
                for p in 0..plane {
                    data[ct * plane + p] = share;
                }
            }
            Ok(out)
        }
    }
}

/// A cascade with its classifier head: the single-stream network.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeNetwork {
    config: CascadeConfig,
    trunk: CascadeTrunk,
    head: ClassifierHead,
}

impl CascadeNetwork {
    /// Build with deterministic weight initialization: layers in order, then
    /// the head, all drawn from one ChaCha8 stream seeded by `init_seed`.
    pub fn build(config: CascadeConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut layers = Vec::with_capacity(config.layers.len());
        for spec in &config.layers {
            let mut layer = match spec.quad {
                QuadSpec::Exact => VolterraLayer::zeros_exact(spec.geometry)?,
                QuadSpec::Separable { rank } => VolterraLayer::zeros_separable(spec.geometry, rank)?,
            };
            layer.randomize(&mut rng);
            layers.push(layer);
        }
        let mut head = ClassifierHead::zeros(config.head.classes, config.feature_dim()?)?;
        head.randomize(&mut rng);
        let trunk = CascadeTrunk::new(config.input_shape, layers)?;
        Ok(Self {
            config,
            trunk,
            head,
        })
    }

    /// Reassemble from previously stored parts (model loading).
    pub fn from_parts(config: CascadeConfig, layers: Vec<VolterraLayer>, head: ClassifierHead) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.layers.len() {
            return Err(VnnError::Config(format!(
                "config declares {} layers, got {}",
                config.layers.len(),
                layers.len()
            )));
        }
        for (z, (spec, layer)) in config.layers.iter().zip(&layers).enumerate() {
            if *layer.geometry() != spec.geometry {
                return Err(VnnError::Config(format!("layer {z}: geometry mismatch")));
            }
            match (spec.quad, layer.separable_rank()) {
                (QuadSpec::Exact, None) => {}
                (QuadSpec::Separable { rank }, Some(r)) if r == rank => {}
                _ => return Err(VnnError::Config(format!("layer {z}: quadratic mode mismatch"))),
            }
        }
        if head.classes() != config.head.classes || head.feature_dim() != config.feature_dim()? {
            return Err(VnnError::Config("classifier dimensions mismatch".into()));
        }
        let trunk = CascadeTrunk::new(config.input_shape, layers)?;
        Ok(Self {
            config,
            trunk,
            head,
        })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn trunk(&self) -> &CascadeTrunk {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut CascadeTrunk {
        &mut self.trunk
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut ClassifierHead {
        &mut self.head
    }

    /// Feature tensor produced by the layer chain for one clip.
    pub fn forward_cascade(&self, clip: &Tensor) -> Result<Tensor> {
        self.trunk.forward_features(clip)
    }

    /// Class probabilities for one clip.
    pub fn clip_probs(&self, clip: &Tensor) -> Result<Vec<f64>> {
        let features = self.trunk.forward_features(clip)?;
        let pooled = pool_features(&features, self.config.head.pooling);
        self.head.class_probabilities(&pooled)
    }

    /// Census of every stored weight scalar, head included.
    pub fn census(&self) -> usize {
        self.trunk.param_count() + self.head.param_count()
    }

    /// Per-layer L1 norms and chained bounds for inputs with
    /// `max_abs ≤ input_bound`.
    pub fn stability_report(&self, input_bound: f64) -> Result<StabilityReport> {
        let layers = self.trunk.stability_chain(input_bound)?;
        let end_to_end = layers.last().map_or(input_bound, |l| l.bound);
        Ok(StabilityReport {
            input_bound,
            layers,
            end_to_end,
        })
    }
}
