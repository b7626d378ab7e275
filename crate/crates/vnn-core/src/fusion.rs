//! Two-stream networks: independent appearance and motion cascades joined
//! by a Volterra fusion layer, plus decision-level and concatenation
//! baselines.
//!
//! The fusion layer's stream index is realized as a doubled channel axis:
//! both trunks must emit identically shaped feature maps, which are stacked
//! along channels with a recorded stream partition. The fusion layer runs
//! with cross-channel quadratic pairing, so its quadratic term includes
//! products of an appearance tap with a motion tap — the nonlinear
//! interaction ordinary averaging or concatenation cannot express. Trunk
//! layers never pair across channels; only the fusion layer does.
//!
//! Temporally the fusion layer is an ordinary causal window over the trunk
//! feature sequence: tap τ reads the τ-th most recent feature step, the
//! same convention as every other layer. Writing the taps as offsets from
//! the final step instead only relabels the weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cascade::{
    chain_feature_shapes, pool_features, pooled_dim, unpool_grad, CascadeTrunk, FeaturePooling,
    HeadConfig, LayerSpec, QuadSpec,
};
use crate::classifier::{cross_entropy, ClassifierHead};
use crate::error::{Result, VnnError};
use crate::layer::{LayerGeometry, Padding, QuadPairing, TemporalMode, VolterraLayer};
use crate::model::{
    argmax, layer_group, layer_group_len, layer_group_mut, layer_group_suffix, push_layer_grads,
    Model, Sample, SampleEval,
};
use crate::tensor::Tensor;

/// Input shape and layer stack of one stream's cascade, no head.
#[derive(Debug, Clone, PartialEq)]
pub struct TrunkConfig {
    pub input_shape: [usize; 4],
    pub layers: Vec<LayerSpec>,
}

impl TrunkConfig {
    pub fn output_shape(&self) -> Result<[usize; 4]> {
        Ok(*chain_feature_shapes(self.input_shape, &self.layers)?
            .last()
            .unwrap())
    }
}

/// Geometry of the fusion layer; channel width and pairing are derived from
/// the trunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionSpec {
    pub len_t: usize,
    pub half_h: usize,
    pub half_w: usize,
    pub out_channels: usize,
    pub padding: Padding,
    pub quad: QuadSpec,
}

/// Full two-stream configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamConfig {
    pub rgb: TrunkConfig,
    pub flow: TrunkConfig,
    pub fusion: FusionSpec,
    pub head: HeadConfig,
}

impl TwoStreamConfig {
    /// Stream partition of the stacked fusion input: channels contributed
    /// by (rgb, flow).
    pub fn stream_partition(&self) -> Result<(usize, usize)> {
        let rgb = self.rgb.output_shape()?;
        let flow = self.flow.output_shape()?;
        if rgb != flow {
            return Err(VnnError::Config(format!(
                "trunks must emit identical feature shapes, got {rgb:?} and {flow:?}"
            )));
        }
        Ok((rgb[0], flow[0]))
    }

    pub fn fusion_geometry(&self) -> Result<LayerGeometry> {
        let (rgb_ch, flow_ch) = self.stream_partition()?;
        Ok(LayerGeometry {
            len_t: self.fusion.len_t,
            half_h: self.fusion.half_h,
            half_w: self.fusion.half_w,
            in_channels: rgb_ch + flow_ch,
            out_channels: self.fusion.out_channels,
            padding: self.fusion.padding,
            temporal_mode: TemporalMode::Overlapping,
            pairing: QuadPairing::CrossChannel,
        })
    }

    /// Shape of the fusion layer's output.
    pub fn fused_shape(&self) -> Result<[usize; 4]> {
        let trunk_out = self.rgb.output_shape()?;
        let geometry = self.fusion_geometry()?;
        let stacked = [
            geometry.in_channels,
            trunk_out[1],
            trunk_out[2],
            trunk_out[3],
        ];
        geometry
            .output_shape(&stacked)
            .map_err(|e| VnnError::Config(format!("fusion layer: {e}")))
    }

    pub fn feature_dim(&self) -> Result<usize> {
        Ok(pooled_dim(&self.fused_shape()?, self.head.pooling))
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_dim()?;
        if self.head.classes < 2 {
            return Err(VnnError::Config(format!(
                "head needs at least 2 classes, got {}",
                self.head.classes
            )));
        }
        if let QuadSpec::Separable { rank: 0 } = self.fusion.quad {
            return Err(VnnError::Config("fusion rank must be at least 1".into()));
        }
        Ok(())
    }
}

/// Two trunks, one fusion Volterra layer, one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamNetwork {
    config: TwoStreamConfig,
    rgb: CascadeTrunk,
    flow: CascadeTrunk,
    fusion: VolterraLayer,
    head: ClassifierHead,
}

impl TwoStreamNetwork {
    /// Deterministic build; the single ChaCha8 stream draws rgb layers,
    /// then flow layers, then the fusion layer, then the head.
    pub fn build(config: TwoStreamConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let build_trunk = |cfg: &TrunkConfig, rng: &mut ChaCha8Rng| -> Result<CascadeTrunk> {
            let mut layers = Vec::with_capacity(cfg.layers.len());
            for spec in &cfg.layers {
                let mut layer = match spec.quad {
                    QuadSpec::Exact => VolterraLayer::zeros_exact(spec.geometry)?,
                    QuadSpec::Separable { rank } => {
                        VolterraLayer::zeros_separable(spec.geometry, rank)?
                    }
                };
                layer.randomize(rng);
                layers.push(layer);
            }
            CascadeTrunk::new(cfg.input_shape, layers)
        };
        let rgb = build_trunk(&config.rgb, &mut rng)?;
        let flow = build_trunk(&config.flow, &mut rng)?;
        let geometry = config.fusion_geometry()?;
        let mut fusion = match config.fusion.quad {
            QuadSpec::Exact => VolterraLayer::zeros_exact(geometry)?,
            QuadSpec::Separable { rank } => VolterraLayer::zeros_separable(geometry, rank)?,
        };
        fusion.randomize(&mut rng);
        let mut head = ClassifierHead::zeros(config.head.classes, config.feature_dim()?)?;
        head.randomize(&mut rng);
        Ok(Self {
            config,
            rgb,
            flow,
            fusion,
            head,
        })
    }

    /// Reassemble from stored parts (model loading).
    pub fn from_parts(
        config: TwoStreamConfig,
        rgb_layers: Vec<VolterraLayer>,
        flow_layers: Vec<VolterraLayer>,
        fusion: VolterraLayer,
        head: ClassifierHead,
    ) -> Result<Self> {
        config.validate()?;
        if *fusion.geometry() != config.fusion_geometry()? {
            return Err(VnnError::Config("fusion layer geometry mismatch".into()));
        }
        if head.classes() != config.head.classes || head.feature_dim() != config.feature_dim()? {
            return Err(VnnError::Config("classifier dimensions mismatch".into()));
        }
        let rgb = CascadeTrunk::new(config.rgb.input_shape, rgb_layers)?;
        let flow = CascadeTrunk::new(config.flow.input_shape, flow_layers)?;
        Ok(Self {
            config,
            rgb,
            flow,
            fusion,
            head,
        })
    }

    pub fn config(&self) -> &TwoStreamConfig {
        &self.config
    }

    pub fn rgb_trunk(&self) -> &CascadeTrunk {
        &self.rgb
    }

    pub fn flow_trunk(&self) -> &CascadeTrunk {
        &self.flow
    }

    pub fn fusion_layer(&self) -> &VolterraLayer {
        &self.fusion
    }

    pub fn fusion_layer_mut(&mut self) -> &mut VolterraLayer {
        &mut self.fusion
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut ClassifierHead {
        &mut self.head
    }

    /// Channels contributed by (rgb, flow) to the stacked fusion input.
    pub fn stream_partition(&self) -> (usize, usize) {
        self.config.stream_partition().expect("validated at build")
    }

    /// Fusion-layer output for a clip pair.
    pub fn fused_features(&self, clip_rgb: &Tensor, clip_flow: &Tensor) -> Result<Tensor> {
        let f_rgb = self.rgb.forward_features(clip_rgb)?;
        let f_flow = self.flow.forward_features(clip_flow)?;
        let stacked = stack_channels(&f_rgb, &f_flow)?;
        self.fusion.forward(&stacked)
    }

    /// Class probabilities for a clip pair.
    pub fn two_stream_forward(&self, clip_rgb: &Tensor, clip_flow: &Tensor) -> Result<Vec<f64>> {
        let fused = self.fused_features(clip_rgb, clip_flow)?;
        let pooled = pool_features(&fused, self.config.head.pooling);
        self.head.class_probabilities(&pooled)
    }

    pub fn census(&self) -> usize {
        self.rgb.param_count()
            + self.flow.param_count()
            + self.fusion.param_count()
            + self.head.param_count()
    }

    /// Halved squared L2 norms of the three kernel groups (head excluded):
    /// the decay-term bookkeeping split by stream.
    pub fn fusion_weight_norms(&self) -> FusionWeightNorms {
        FusionWeightNorms {
            rgb: 0.5 * self.rgb.sq_norm(),
            flow: 0.5 * self.flow.sq_norm(),
            fusion: 0.5 * self.fusion.sq_norm(),
        }
    }
}

/// Halved squared kernel norms per parameter group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeightNorms {
    pub rgb: f64,
    pub flow: f64,
    pub fusion: f64,
}

/// Concatenate two `[C, T, H, W]` tensors along the channel axis.
pub fn stack_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 4 || sb.len() != 4 || sa[1..] != sb[1..] {
        return Err(VnnError::Shape(format!(
            "cannot stack {sa:?} and {sb:?} along channels"
        )));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[sa[0] + sb[0], sa[1], sa[2], sa[3]], data)
}

/// Split a stacked gradient back into per-stream parts.
fn split_channels(t: &Tensor, first: usize) -> Result<(Tensor, Tensor)> {
    let s = t.shape();
    let plane = s[1] * s[2] * s[3];
    let a = Tensor::from_vec(
        &[first, s[1], s[2], s[3]],
        t.data()[..first * plane].to_vec(),
    )?;
    let b = Tensor::from_vec(
        &[s[0] - first, s[1], s[2], s[3]],
        t.data()[first * plane..].to_vec(),
    )?;
    Ok((a, b))
}

fn require_flow(sample: &Sample) -> Result<&Tensor> {
    sample.flow.as_ref().ok_or_else(|| VnnError::Data {
        id: sample.id.clone(),
        message: "two-stream model needs a flow stream".into(),
    })
}

impl Model for TwoStreamNetwork {
    fn classes(&self) -> usize {
        self.head.classes()
    }

    fn probs(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.two_stream_forward(&sample.rgb, require_flow(sample)?)
    }

    fn eval_with_grads(&self, sample: &Sample) -> Result<SampleEval> {
        let clip_flow = require_flow(sample)?;
        let rgb_cache = self.rgb.forward_cached(&sample.rgb)?;
        let flow_cache = self.flow.forward_cached(clip_flow)?;
        let stacked = stack_channels(&rgb_cache.features, &flow_cache.features)?;
        let fused = self.fusion.forward(&stacked)?;
        let pooling = self.config.head.pooling;
        let pooled = pool_features(&fused, pooling);
        let probs = self.head.class_probabilities(&pooled)?;
        let loss = cross_entropy(&probs, sample.label)?;
        let correct = argmax(&probs) == sample.label;

        let head_grads = self.head.head_and_feature_grads(&pooled, sample.label)?;
        let grad_fused = unpool_grad(&head_grads.features, fused.shape(), pooling)?;
        let fusion_grads = self.fusion.backward(&stacked, &grad_fused)?;
        let (grad_rgb_features, grad_flow_features) =
            split_channels(&fusion_grads.input, rgb_cache.features.shape()[0])?;
        let (rgb_grads, _) = self.rgb.backward(&rgb_cache, &grad_rgb_features)?;
        let (flow_grads, _) = self.flow.backward(&flow_cache, &grad_flow_features)?;

        let mut grads = Vec::with_capacity(self.group_count());
        for lg in rgb_grads {
            push_layer_grads(&mut grads, lg);
        }
        for lg in flow_grads {
            push_layer_grads(&mut grads, lg);
        }
        grads.push(fusion_grads.w1);
        match fusion_grads.quad {
            crate::layer::QuadraticKernel::Exact { w2 } => grads.push(w2),
            crate::layer::QuadraticKernel::Separable { a, b, .. } => {
                grads.push(a);
                grads.push(b);
            }
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
        self.rgb.layers().iter().map(layer_group_len).sum::<usize>()
            + self.flow.layers().iter().map(layer_group_len).sum::<usize>()
            + layer_group_len(&self.fusion)
            + 2
    }

    fn group_name(&self, group: usize) -> String {
        let mut g = group;
        for (prefix, trunk) in [("rgb", &self.rgb), ("flow", &self.flow)] {
            for (z, layer) in trunk.layers().iter().enumerate() {
                let n = layer_group_len(layer);
                if g < n {
                    return format!("{prefix}.layer{z}.{}", layer_group_suffix(layer, g));
                }
                g -= n;
            }
        }
        let n = layer_group_len(&self.fusion);
        if g < n {
            return format!("fusion.{}", layer_group_suffix(&self.fusion, g));
        }
        g -= n;
        match g {
            0 => "head.weights".into(),
            1 => "head.biases".into(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group(&self, group: usize) -> &[f64] {
        let mut g = group;
        for trunk in [&self.rgb, &self.flow] {
            for layer in trunk.layers() {
                let n = layer_group_len(layer);
                if g < n {
                    return layer_group(layer, g);
                }
                g -= n;
            }
        }
        let n = layer_group_len(&self.fusion);
        if g < n {
            return layer_group(&self.fusion, g);
        }
        g -= n;
        match g {
            0 => self.head.weights(),
            1 => self.head.biases(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group_mut(&mut self, group: usize) -> &mut [f64] {
        let mut g = group;
        let rgb_len = self.rgb.layers().len();
        for z in 0..rgb_len {
            let n = layer_group_len(&self.rgb.layers()[z]);
            if g < n {
                return layer_group_mut(&mut self.rgb.layers_mut()[z], g);
            }
            g -= n;
        }
        let flow_len = self.flow.layers().len();
        for z in 0..flow_len {
            let n = layer_group_len(&self.flow.layers()[z]);
            if g < n {
                return layer_group_mut(&mut self.flow.layers_mut()[z], g);
            }
            g -= n;
        }
        let n = layer_group_len(&self.fusion);
        if g < n {
            return layer_group_mut(&mut self.fusion, g);
        }
        g -= n;
        match g {
            0 => self.head_mut().weights_mut(),
            1 => self.head_mut().biases_mut(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group_decays(&self, group: usize) -> bool {
        group + 1 != self.group_count()
    }
}

/// Decision-level fusion: convex combination of per-stream class
/// probabilities. `β_rgb + β_flow` must equal 1 within 1e-9 and both must
/// be non-negative.
pub fn weighted_average_fusion(
    p_rgb: &[f64],
    p_flow: &[f64],
    beta_rgb: f64,
    beta_flow: f64,
) -> Result<Vec<f64>> {
    if p_rgb.len() != p_flow.len() {
        return Err(VnnError::Shape(format!(
            "probability vectors differ in length: {} vs {}",
            p_rgb.len(),
            p_flow.len()
        )));
    }
    if beta_rgb < 0.0 || beta_flow < 0.0 || (beta_rgb + beta_flow - 1.0).abs() > 1e-9 {
        return Err(VnnError::Domain(format!(
            "stream weights must be non-negative and sum to 1, got ({beta_rgb}, {beta_flow})"
        )));
    }
    for (name, p) in [("rgb", p_rgb), ("flow", p_flow)] {
        if p.iter().any(|&x| x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(VnnError::Domain(format!(
                "{name} input is not a probability distribution"
            )));
        }
    }
    Ok(p_rgb
        .iter()
        .zip(p_flow)
        .map(|(r, f)| beta_rgb * r + beta_flow * f)
        .collect())
}

/// Event-driven decision fusion, interface only:
/// `P^f = γ·P_maxMI + (1-γ)·P_minMI`. The max/min mutual-information joint
/// distributions must be supplied by the caller; constructing them is out of
/// scope here.
pub fn event_driven_fusion(gamma: f64, p_max_mi: &[f64], p_min_mi: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(VnnError::Domain(format!(
            "correlation measure gamma must lie in [0, 1], got {gamma}"
        )));
    }
    if p_max_mi.len() != p_min_mi.len() {
        return Err(VnnError::Shape(
            "joint-distribution vectors differ in length".into(),
        ));
    }
    Ok(p_max_mi
        .iter()
        .zip(p_min_mi)
        .map(|(hi, lo)| gamma * hi + (1.0 - gamma) * lo)
        .collect())
}

/// Fusion-mode selector for experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionMode {
    VolterraFusion,
    FeatureConcat,
    WeightedAverage { beta_rgb: f64, beta_flow: f64 },
}

impl FusionMode {
    pub fn validate(&self) -> Result<()> {
        if let FusionMode::WeightedAverage {
            beta_rgb,
            beta_flow,
        } = self
        {
            if *beta_rgb < 0.0 || *beta_flow < 0.0 || (beta_rgb + beta_flow - 1.0).abs() > 1e-9 {
                return Err(VnnError::Domain(format!(
                    "stream weights must be non-negative and sum to 1, got ({beta_rgb}, {beta_flow})"
                )));
            }
        }
        Ok(())
    }
}

/// Feature-concatenation baseline: two trunks, features pooled per stream
/// and concatenated, one linear head over the joint vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatNetwork {
    rgb: CascadeTrunk,
    flow: CascadeTrunk,
    pooling: FeaturePooling,
    head: ClassifierHead,
}

impl ConcatNetwork {
    pub fn build(
        rgb_cfg: &TrunkConfig,
        flow_cfg: &TrunkConfig,
        head_cfg: HeadConfig,
        init_seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let build_trunk = |cfg: &TrunkConfig, rng: &mut ChaCha8Rng| -> Result<CascadeTrunk> {
            let mut layers = Vec::with_capacity(cfg.layers.len());
            for spec in &cfg.layers {
                let mut layer = match spec.quad {
                    QuadSpec::Exact => VolterraLayer::zeros_exact(spec.geometry)?,
                    QuadSpec::Separable { rank } => {
                        VolterraLayer::zeros_separable(spec.geometry, rank)?
                    }
                };
                layer.randomize(rng);
                layers.push(layer);
            }
            CascadeTrunk::new(cfg.input_shape, layers)
        };
        let rgb = build_trunk(rgb_cfg, &mut rng)?;
        let flow = build_trunk(flow_cfg, &mut rng)?;
        let dim_rgb = pooled_dim(&rgb.output_shape()?, head_cfg.pooling);
        let dim_flow = pooled_dim(&flow.output_shape()?, head_cfg.pooling);
        let mut head = ClassifierHead::zeros(head_cfg.classes, dim_rgb + dim_flow)?;
        head.randomize(&mut rng);
        Ok(Self {
            rgb,
            flow,
            pooling: head_cfg.pooling,
            head,
        })
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut ClassifierHead {
        &mut self.head
    }

    pub fn rgb_feature_dim(&self) -> usize {
        pooled_dim(&self.rgb.output_shape().expect("validated at build"), self.pooling)
    }

    /// Concatenated feature vector for a clip pair.
    pub fn concat_features(&self, clip_rgb: &Tensor, clip_flow: &Tensor) -> Result<Vec<f64>> {
        let mut pooled = pool_features(&self.rgb.forward_features(clip_rgb)?, self.pooling);
        pooled.extend(pool_features(
            &self.flow.forward_features(clip_flow)?,
            self.pooling,
        ));
        if pooled.len() != self.head.feature_dim() {
            return Err(VnnError::Config(format!(
                "head expects {} features, concatenation yields {}",
                self.head.feature_dim(),
                pooled.len()
            )));
        }
        Ok(pooled)
    }

    pub fn feature_concat_forward(&self, clip_rgb: &Tensor, clip_flow: &Tensor) -> Result<Vec<f64>> {
        self.head
            .class_probabilities(&self.concat_features(clip_rgb, clip_flow)?)
    }
}

impl Model for ConcatNetwork {
    fn classes(&self) -> usize {
        self.head.classes()
    }

    fn probs(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.feature_concat_forward(&sample.rgb, require_flow(sample)?)
    }

    fn eval_with_grads(&self, sample: &Sample) -> Result<SampleEval> {
        let clip_flow = require_flow(sample)?;
        let rgb_cache = self.rgb.forward_cached(&sample.rgb)?;
        let flow_cache = self.flow.forward_cached(clip_flow)?;
        let mut pooled = pool_features(&rgb_cache.features, self.pooling);
        let rgb_dim = pooled.len();
        pooled.extend(pool_features(&flow_cache.features, self.pooling));
        let probs = self.head.class_probabilities(&pooled)?;
        let loss = cross_entropy(&probs, sample.label)?;
        let correct = argmax(&probs) == sample.label;
        let head_grads = self.head.head_and_feature_grads(&pooled, sample.label)?;
        let grad_rgb = unpool_grad(
            &head_grads.features[..rgb_dim],
            rgb_cache.features.shape(),
            self.pooling,
        )?;
        let grad_flow = unpool_grad(
            &head_grads.features[rgb_dim..],
            flow_cache.features.shape(),
            self.pooling,
        )?;
        let (rgb_grads, _) = self.rgb.backward(&rgb_cache, &grad_rgb)?;
        let (flow_grads, _) = self.flow.backward(&flow_cache, &grad_flow)?;
        let mut grads = Vec::with_capacity(self.group_count());
        for lg in rgb_grads {
            push_layer_grads(&mut grads, lg);
        }
        for lg in flow_grads {
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
        self.rgb.layers().iter().map(layer_group_len).sum::<usize>()
            + self.flow.layers().iter().map(layer_group_len).sum::<usize>()
            + 2
    }

    fn group_name(&self, group: usize) -> String {
        let mut g = group;
        for (prefix, trunk) in [("rgb", &self.rgb), ("flow", &self.flow)] {
            for (z, layer) in trunk.layers().iter().enumerate() {
                let n = layer_group_len(layer);
                if g < n {
                    return format!("{prefix}.layer{z}.{}", layer_group_suffix(layer, g));
                }
                g -= n;
            }
        }
        match g {
            0 => "head.weights".into(),
            1 => "head.biases".into(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group(&self, group: usize) -> &[f64] {
        let mut g = group;
        for trunk in [&self.rgb, &self.flow] {
            for layer in trunk.layers() {
                let n = layer_group_len(layer);
                if g < n {
                    return layer_group(layer, g);
                }
                g -= n;
            }
        }
        match g {
            0 => self.head.weights(),
            1 => self.head.biases(),
            _ => panic!("group index {group} out of range"),
        }
    }

    fn group_mut(&mut self, group: usize) -> &mut [f64] {
        let mut g = group;
        let rgb_len = self.rgb.layers().len();
        for z in 0..rgb_len {
            let n = layer_group_len(&self.rgb.layers()[z]);
            if g < n {
                return layer_group_mut(&mut self.rgb.layers_mut()[z], g);
            }
            g -= n;
        }
        let flow_len = self.flow.layers().len();
        for z in 0..flow_len {
            let n = layer_group_len(&self.flow.layers()[z]);
            if g < n {
                return layer_group_mut(&mut self.flow.layers_mut()[z], g);
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
        group + 1 != self.group_count()
    }
}
