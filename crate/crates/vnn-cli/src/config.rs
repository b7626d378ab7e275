//! The JSON run-configuration schema.
//!
//! A run configuration has up to three sections; each subcommand demands
//! the ones it needs:
//!
//! ```json
//! {
//!   "dataset":  { ...synthetic generator settings... },
//!   "network":  { "cascade": {...} } or { "two-stream": {...} },
//!   "training": { ...gradient-descent settings... }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere; `in_channels` is derived by
//! chaining layer specs from the input shape.

use serde::Deserialize;

use vnn_core::cascade::{CascadeConfig, FeaturePooling, HeadConfig, LayerSpec, QuadSpec};
use vnn_core::error::{Result, VnnError};
use vnn_core::fusion::{FusionSpec, TrunkConfig, TwoStreamConfig};
use vnn_core::io::SyntheticConfig;
use vnn_core::layer::{LayerGeometry, Padding, QuadPairing, TemporalMode};
use vnn_core::trainer::TrainConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<SyntheticConfig>,
    pub network: Option<NetworkConfig>,
    pub training: Option<TrainConfig>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dataset(&self) -> Result<&SyntheticConfig> {
        self.dataset
            .as_ref()
            .ok_or_else(|| VnnError::Config("config has no 'dataset' section".into()))
    }

    pub fn network(&self) -> Result<&NetworkConfig> {
        self.network
            .as_ref()
            .ok_or_else(|| VnnError::Config("config has no 'network' section".into()))
    }

    pub fn training(&self) -> Result<TrainConfig> {
        let config = self
            .training
            .clone()
            .ok_or_else(|| VnnError::Config("config has no 'training' section".into()))?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkConfig {
    Cascade(CascadeJson),
    TwoStream(TwoStreamJson),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeJson {
    pub input_shape: [usize; 4],
    pub layers: Vec<LayerJson>,
    pub head: HeadJson,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStreamJson {
    pub rgb: TrunkJson,
    pub flow: TrunkJson,
    pub fusion: FusionJson,
    pub head: HeadJson,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrunkJson {
    pub input_shape: [usize; 4],
    pub layers: Vec<LayerJson>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerJson {
    pub len_t: usize,
    #[serde(default)]
    pub half_h: usize,
    #[serde(default)]
    pub half_w: usize,
    pub out_channels: usize,
    #[serde(default)]
    pub quad: QuadJson,
    #[serde(default)]
    pub padding: PaddingJson,
    #[serde(default)]
    pub temporal_mode: TemporalJson,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionJson {
    pub len_t: usize,
    #[serde(default)]
    pub half_h: usize,
    #[serde(default)]
    pub half_w: usize,
    pub out_channels: usize,
    #[serde(default)]
    pub quad: QuadJson,
    #[serde(default)]
    pub padding: PaddingJson,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadJson {
    pub classes: usize,
    #[serde(default)]
    pub pooling: PoolingJson,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadJson {
    #[default]
    Exact,
    Separable {
        rank: usize,
    },
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingJson {
    #[default]
    Valid,
    ZeroSpatial,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalJson {
    #[default]
    Overlapping,
    NonOverlapping,
}

impl From<QuadJson> for QuadSpec {
    fn from(q: QuadJson) -> Self {
        match q {
            QuadJson::Exact => QuadSpec::Exact,
            QuadJson::Separable { rank } => QuadSpec::Separable { rank },
        }
    }
}

impl From<PaddingJson> for Padding {
    fn from(p: PaddingJson) -> Self {
        match p {
            PaddingJson::Valid => Padding::Valid,
            PaddingJson::ZeroSpatial => Padding::ZeroSpatial,
        }
    }
}

impl From<TemporalJson> for TemporalMode {
    fn from(t: TemporalJson) -> Self {
        match t {
            TemporalJson::Overlapping => TemporalMode::Overlapping,
            TemporalJson::NonOverlapping => TemporalMode::NonOverlapping,
        }
    }
}

impl From<&HeadJson> for HeadConfig {
    fn from(h: &HeadJson) -> Self {
        HeadConfig {
            classes: h.classes,
            pooling: match h.pooling {
                PoolingJson::Flatten => FeaturePooling::Flatten,
                PoolingJson::GlobalAvg => FeaturePooling::GlobalSpatialAverage,
            },
        }
    }
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingJson {
    #[default]
    Flatten,
    GlobalAvg,
}

/// Chain `in_channels` through the layer list starting from the input
/// shape's channel count.
fn chain_layers(input_shape: [usize; 4], layers: &[LayerJson]) -> Vec<LayerSpec> {
    let mut in_channels = input_shape[0];
    layers
        .iter()
        .map(|l| {
            let spec = LayerSpec {
                geometry: LayerGeometry {
                    len_t: l.len_t,
                    half_h: l.half_h,
                    half_w: l.half_w,
                    in_channels,
                    out_channels: l.out_channels,
                    padding: l.padding.into(),
                    temporal_mode: l.temporal_mode.into(),
                    pairing: QuadPairing::WithinChannel,
                },
                quad: l.quad.into(),
            };
            in_channels = l.out_channels;
            spec
        })
        .collect()
}

impl CascadeJson {
    pub fn to_config(&self) -> Result<CascadeConfig> {
        let config = CascadeConfig {
            input_shape: self.input_shape,
            layers: chain_layers(self.input_shape, &self.layers),
            head: HeadConfig::from(&self.head),
        };
        config.validate()?;
        Ok(config)
    }
}

impl TwoStreamJson {
    pub fn to_config(&self) -> Result<TwoStreamConfig> {
        let config = TwoStreamConfig {
            rgb: TrunkConfig {
                input_shape: self.rgb.input_shape,
                layers: chain_layers(self.rgb.input_shape, &self.rgb.layers),
            },
            flow: TrunkConfig {
                input_shape: self.flow.input_shape,
                layers: chain_layers(self.flow.input_shape, &self.flow.layers),
            },
            fusion: FusionSpec {
                len_t: self.fusion.len_t,
                half_h: self.fusion.half_h,
                half_w: self.fusion.half_w,
                out_channels: self.fusion.out_channels,
                padding: self.fusion.padding.into(),
                quad: self.fusion.quad.into(),
            },
            head: HeadConfig::from(&self.head),
        };
        config.validate()?;
        Ok(config)
    }
}
