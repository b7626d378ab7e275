//! `VNNM` model files.
//!
//! ```text
//! magic    4 bytes "VNNM"
//! version  u16 LE = 1
//! kind     u8: 0 = cascade, 1 = two-stream
//!
//! cascade body:
//!   pooling u8 | classes u32 | input_shape 4 x u32
//!   layer_count u16 | layer records
//!   census u64 | parameter blocks
//!
//! two-stream body:
//!   pooling u8 | classes u32
//!   rgb   input_shape 4 x u32 | layer_count u16 | layer records
//!   flow  input_shape 4 x u32 | layer_count u16 | layer records
//!   fusion layer record | stream partition 2 x u32
//!   census u64 | parameter blocks
//!
//! layer record:
//!   len_t u32 | half_h u32 | half_w u32 | in_ch u32 | out_ch u32
//!   padding u8 | temporal u8 | pairing u8 | mode u8 | rank u32
//!
//! parameter block (one per weight bank, declaration order):
//!   rank u8 | dims rank x u32 | payload product(dims) x f64 LE
//! ```
//!
//! Parameters are stored as f64, unlike data tensors, so `load(save(net))`
//! reproduces the network bit-exactly. The declared census is the total
//! number of f64 values across all blocks and is checked against both the
//! model structure and the actual byte length before any block is read.
//! Blocks follow declaration order: layers (w1, then w2 or a, b) for each
//! trunk, the fusion layer for two-stream models, then head weights and
//! biases.

use std::path::Path;

use super::tensor_file::Reader;
use crate::cascade::{CascadeConfig, CascadeNetwork, FeaturePooling, HeadConfig, LayerSpec, QuadSpec};
use crate::classifier::ClassifierHead;
use crate::error::{Result, VnnError};
use crate::fusion::{FusionSpec, TrunkConfig, TwoStreamConfig, TwoStreamNetwork};
use crate::layer::{LayerGeometry, Padding, QuadPairing, QuadraticKernel, TemporalMode, VolterraLayer};

const MODEL_MAGIC: &[u8; 4] = b"VNNM";
const MODEL_VERSION: u16 = 1;

const KIND_CASCADE: u8 = 0;
const KIND_TWO_STREAM: u8 = 1;

/// Either network flavor, as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedModel {
    Cascade(CascadeNetwork),
    TwoStream(TwoStreamNetwork),
}

// --- encoding ------------------------------------------------------------

fn push_u32(bytes: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| VnnError::Shape(format!("value {v} exceeds the format's u32 range")))?;
    bytes.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn pooling_code(p: FeaturePooling) -> u8 {
    match p {
        FeaturePooling::Flatten => 0,
        FeaturePooling::GlobalSpatialAverage => 1,
    }
}

fn padding_code(p: Padding) -> u8 {
    match p {
        Padding::Valid => 0,
        Padding::ZeroSpatial => 1,
    }
}

fn temporal_code(t: TemporalMode) -> u8 {
    match t {
        TemporalMode::Overlapping => 0,
        TemporalMode::NonOverlapping => 1,
    }
}

fn pairing_code(p: QuadPairing) -> u8 {
    match p {
        QuadPairing::WithinChannel => 0,
        QuadPairing::CrossChannel => 1,
    }
}

fn push_layer_record(bytes: &mut Vec<u8>, geometry: &LayerGeometry, quad: QuadSpec) -> Result<()> {
    push_u32(bytes, geometry.len_t)?;
    push_u32(bytes, geometry.half_h)?;
    push_u32(bytes, geometry.half_w)?;
    push_u32(bytes, geometry.in_channels)?;
    push_u32(bytes, geometry.out_channels)?;
    bytes.push(padding_code(geometry.padding));
    bytes.push(temporal_code(geometry.temporal_mode));
    bytes.push(pairing_code(geometry.pairing));
    match quad {
        QuadSpec::Exact => {
            bytes.push(0);
            push_u32(bytes, 0)?;
        }
        QuadSpec::Separable { rank } => {
            bytes.push(1);
            push_u32(bytes, rank)?;
        }
    }
    Ok(())
}

fn push_block(bytes: &mut Vec<u8>, dims: &[usize], values: &[f64]) -> Result<()> {
    debug_assert_eq!(dims.iter().product::<usize>(), values.len());
    bytes.push(dims.len() as u8);
    for &d in dims {
        push_u32(bytes, d)?;
    }
    for &v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn layer_quad_spec(layer: &VolterraLayer) -> QuadSpec {
    match layer.separable_rank() {
        Some(rank) => QuadSpec::Separable { rank },
        None => QuadSpec::Exact,
    }
}

/// Block dims of one layer's weight banks, in declaration order.
fn layer_block_dims(geometry: &LayerGeometry, quad: QuadSpec) -> Vec<Vec<usize>> {
    let n_w = geometry.window_taps();
    let q_len = geometry.quad_len();
    let blocks = geometry.quad_blocks();
    let w1 = vec![geometry.out_channels, geometry.in_channels, n_w];
    match quad {
        QuadSpec::Exact => vec![w1, vec![geometry.out_channels, blocks, q_len, q_len]],
        QuadSpec::Separable { rank } => {
            let factor = vec![geometry.out_channels, blocks, rank, q_len];
            vec![w1, factor.clone(), factor]
        }
    }
}

fn push_layer_blocks(bytes: &mut Vec<u8>, layer: &VolterraLayer) -> Result<()> {
    let dims = layer_block_dims(layer.geometry(), layer_quad_spec(layer));
    push_block(bytes, &dims[0], layer.w1())?;
    match layer.quad() {
        QuadraticKernel::Exact { w2 } => push_block(bytes, &dims[1], w2)?,
        QuadraticKernel::Separable { a, b, .. } => {
            push_block(bytes, &dims[1], a)?;
            push_block(bytes, &dims[2], b)?;
        }
    }
    Ok(())
}

fn census_of(dims_list: &[Vec<usize>]) -> u64 {
    dims_list
        .iter()
        .map(|d| d.iter().product::<usize>() as u64)
        .sum()
}

fn encode_cascade(net: &CascadeNetwork) -> Result<Vec<u8>> {
    let config = net.config();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.push(KIND_CASCADE);
    bytes.push(pooling_code(config.head.pooling));
    push_u32(&mut bytes, config.head.classes)?;
    for &d in &config.input_shape {
        push_u32(&mut bytes, d)?;
    }
    bytes.extend_from_slice(&(config.layers.len() as u16).to_le_bytes());
    let mut all_dims: Vec<Vec<usize>> = Vec::new();
    for spec in &config.layers {
        push_layer_record(&mut bytes, &spec.geometry, spec.quad)?;
        all_dims.extend(layer_block_dims(&spec.geometry, spec.quad));
    }
    let head = net.head();
    all_dims.push(vec![head.classes(), head.feature_dim()]);
    all_dims.push(vec![head.classes()]);
    bytes.extend_from_slice(&census_of(&all_dims).to_le_bytes());
    for layer in net.trunk().layers() {
        push_layer_blocks(&mut bytes, layer)?;
    }
    push_block(&mut bytes, &[head.classes(), head.feature_dim()], head.weights())?;
    push_block(&mut bytes, &[head.classes()], head.biases())?;
    Ok(bytes)
}

fn encode_two_stream(net: &TwoStreamNetwork) -> Result<Vec<u8>> {
    let config = net.config();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.push(KIND_TWO_STREAM);
    bytes.push(pooling_code(config.head.pooling));
    push_u32(&mut bytes, config.head.classes)?;
    let mut all_dims: Vec<Vec<usize>> = Vec::new();
    for trunk_cfg in [&config.rgb, &config.flow] {
        for &d in &trunk_cfg.input_shape {
            push_u32(&mut bytes, d)?;
        }
        bytes.extend_from_slice(&(trunk_cfg.layers.len() as u16).to_le_bytes());
        for spec in &trunk_cfg.layers {
            push_layer_record(&mut bytes, &spec.geometry, spec.quad)?;
            all_dims.extend(layer_block_dims(&spec.geometry, spec.quad));
        }
    }
    let fusion = net.fusion_layer();
    push_layer_record(&mut bytes, fusion.geometry(), layer_quad_spec(fusion))?;
    all_dims.extend(layer_block_dims(fusion.geometry(), layer_quad_spec(fusion)));
    let (rgb_ch, flow_ch) = net.stream_partition();
    push_u32(&mut bytes, rgb_ch)?;
    push_u32(&mut bytes, flow_ch)?;
    let head = net.head();
    all_dims.push(vec![head.classes(), head.feature_dim()]);
    all_dims.push(vec![head.classes()]);
    bytes.extend_from_slice(&census_of(&all_dims).to_le_bytes());
    for layer in net.rgb_trunk().layers().iter().chain(net.flow_trunk().layers()) {
        push_layer_blocks(&mut bytes, layer)?;
    }
    push_layer_blocks(&mut bytes, fusion)?;
    push_block(&mut bytes, &[head.classes(), head.feature_dim()], head.weights())?;
    push_block(&mut bytes, &[head.classes()], head.biases())?;
    Ok(bytes)
}

pub fn save_cascade(path: &Path, net: &CascadeNetwork) -> Result<()> {
    Ok(std::fs::write(path, encode_cascade(net)?)?)
}

pub fn save_two_stream(path: &Path, net: &TwoStreamNetwork) -> Result<()> {
    Ok(std::fs::write(path, encode_two_stream(net)?)?)
}

// --- decoding ------------------------------------------------------------

fn read_pooling(reader: &mut Reader) -> Result<FeaturePooling> {
    match reader.u8()? {
        0 => Ok(FeaturePooling::Flatten),
        1 => Ok(FeaturePooling::GlobalSpatialAverage),
        other => Err(reader.error(format!("unknown pooling code {other}"))),
    }
}

fn read_shape4(reader: &mut Reader) -> Result<[usize; 4]> {
    let mut shape = [0usize; 4];
    for slot in &mut shape {
        *slot = reader.u32_le()? as usize;
    }
    Ok(shape)
}

fn read_layer_record(reader: &mut Reader) -> Result<LayerSpec> {
    let len_t = reader.u32_le()? as usize;
    let half_h = reader.u32_le()? as usize;
    let half_w = reader.u32_le()? as usize;
    let in_channels = reader.u32_le()? as usize;
    let out_channels = reader.u32_le()? as usize;
    let padding = match reader.u8()? {
        0 => Padding::Valid,
        1 => Padding::ZeroSpatial,
        other => return Err(reader.error(format!("unknown padding code {other}"))),
    };
    let temporal_mode = match reader.u8()? {
        0 => TemporalMode::Overlapping,
        1 => TemporalMode::NonOverlapping,
        other => return Err(reader.error(format!("unknown temporal code {other}"))),
    };
    let pairing = match reader.u8()? {
        0 => QuadPairing::WithinChannel,
        1 => QuadPairing::CrossChannel,
        other => return Err(reader.error(format!("unknown pairing code {other}"))),
    };
    let mode = reader.u8()?;
    let rank = reader.u32_le()? as usize;
    let quad = match mode {
        0 => QuadSpec::Exact,
        1 => QuadSpec::Separable { rank },
        other => return Err(reader.error(format!("unknown quadratic mode {other}"))),
    };
    Ok(LayerSpec {
        geometry: LayerGeometry {
            len_t,
            half_h,
            half_w,
            in_channels,
            out_channels,
            padding,
            temporal_mode,
            pairing,
        },
        quad,
    })
}

fn read_block(reader: &mut Reader, expected_dims: &[usize]) -> Result<Vec<f64>> {
    let rank = reader.u8()? as usize;
    if rank != expected_dims.len() {
        return Err(reader.error(format!(
            "block rank {rank} does not match expected {}",
            expected_dims.len()
        )));
    }
    for &expected in expected_dims {
        let dim = reader.u32_le()? as usize;
        if dim != expected {
            return Err(reader.error(format!(
                "block extent {dim} does not match expected {expected}"
            )));
        }
    }
    let len: usize = expected_dims.iter().product();
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(reader.f64_le()?);
    }
    Ok(values)
}

/// Check the declared census against the structural expectation and the
/// bytes actually present, before reading any block.
fn check_census(reader: &mut Reader, all_dims: &[Vec<usize>], remaining: usize) -> Result<()> {
    let declared = reader.u64_le()?;
    let expected = census_of(all_dims);
    if declared != expected {
        return Err(reader.error(format!(
            "census mismatch: header declares {declared} parameters, structure requires {expected}"
        )));
    }
    let expected_bytes: usize = all_dims
        .iter()
        .map(|d| 1 + 4 * d.len() + 8 * d.iter().product::<usize>())
        .sum();
    if remaining != expected_bytes {
        return Err(reader.error(format!(
            "parameter section is {remaining} bytes but the census requires {expected_bytes}"
        )));
    }
    Ok(())
}

fn read_layer(reader: &mut Reader, spec: &LayerSpec) -> Result<VolterraLayer> {
    let dims = layer_block_dims(&spec.geometry, spec.quad);
    let mut layer = match spec.quad {
        QuadSpec::Exact => VolterraLayer::zeros_exact(spec.geometry)
            .map_err(|e| VnnError::Config(format!("stored geometry invalid: {e}")))?,
        QuadSpec::Separable { rank } => VolterraLayer::zeros_separable(spec.geometry, rank)
            .map_err(|e| VnnError::Config(format!("stored geometry invalid: {e}")))?,
    };
    layer.w1_mut().copy_from_slice(&read_block(reader, &dims[0])?);
    match layer.quad_mut() {
        QuadraticKernel::Exact { w2 } => w2.copy_from_slice(&read_block(reader, &dims[1])?),
        QuadraticKernel::Separable { a, b, .. } => {
            a.copy_from_slice(&read_block(reader, &dims[1])?);
            b.copy_from_slice(&read_block(reader, &dims[2])?);
        }
    }
    Ok(layer)
}

fn read_head(reader: &mut Reader, classes: usize, dim: usize) -> Result<ClassifierHead> {
    let weights = read_block(reader, &[classes, dim])?;
    let biases = read_block(reader, &[classes])?;
    let mut head = ClassifierHead::zeros(classes, dim)?;
    head.weights_mut().copy_from_slice(&weights);
    head.biases_mut().copy_from_slice(&biases);
    Ok(head)
}

fn decode_cascade(reader: &mut Reader, bytes_len: usize) -> Result<CascadeNetwork> {
    let pooling = read_pooling(reader)?;
    let classes = reader.u32_le()? as usize;
    let input_shape = read_shape4(reader)?;
    let layer_count = reader.u16_le()? as usize;
    let mut specs = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        specs.push(read_layer_record(reader)?);
    }
    let config = CascadeConfig {
        input_shape,
        layers: specs.clone(),
        head: HeadConfig { classes, pooling },
    };
    config.validate()?;
    let mut all_dims: Vec<Vec<usize>> = Vec::new();
    for spec in &specs {
        all_dims.extend(layer_block_dims(&spec.geometry, spec.quad));
    }
    let feature_dim = config.feature_dim()?;
    all_dims.push(vec![classes, feature_dim]);
    all_dims.push(vec![classes]);
    let remaining = bytes_len - (reader.offset() as usize + 8);
    check_census(reader, &all_dims, remaining)?;
    let mut layers = Vec::with_capacity(layer_count);
    for spec in &specs {
        layers.push(read_layer(reader, spec)?);
    }
    let head = read_head(reader, classes, feature_dim)?;
    reader.finish()?;
    CascadeNetwork::from_parts(config, layers, head)
}

fn decode_two_stream(reader: &mut Reader, bytes_len: usize) -> Result<TwoStreamNetwork> {
    let pooling = read_pooling(reader)?;
    let classes = reader.u32_le()? as usize;
    let mut trunk_cfgs = Vec::with_capacity(2);
    for _ in 0..2 {
        let input_shape = read_shape4(reader)?;
        let layer_count = reader.u16_le()? as usize;
        let mut specs = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            specs.push(read_layer_record(reader)?);
        }
        trunk_cfgs.push(TrunkConfig {
            input_shape,
            layers: specs,
        });
    }
    let fusion_spec = read_layer_record(reader)?;
    if fusion_spec.geometry.pairing != QuadPairing::CrossChannel {
        return Err(reader.error("fusion layer must use cross-channel pairing"));
    }
    let rgb_ch = reader.u32_le()? as usize;
    let flow_ch = reader.u32_le()? as usize;
    let flow_cfg = trunk_cfgs.pop().unwrap();
    let rgb_cfg = trunk_cfgs.pop().unwrap();
    let config = TwoStreamConfig {
        rgb: rgb_cfg,
        flow: flow_cfg,
        fusion: FusionSpec {
            len_t: fusion_spec.geometry.len_t,
            half_h: fusion_spec.geometry.half_h,
            half_w: fusion_spec.geometry.half_w,
            out_channels: fusion_spec.geometry.out_channels,
            padding: fusion_spec.geometry.padding,
            quad: fusion_spec.quad,
        },
        head: HeadConfig { classes, pooling },
    };
    config.validate()?;
    if config.stream_partition()? != (rgb_ch, flow_ch) {
        return Err(reader.error(format!(
            "stream partition ({rgb_ch}, {flow_ch}) does not match the trunk geometries"
        )));
    }
    if config.fusion_geometry()? != fusion_spec.geometry {
        return Err(reader.error("fusion record does not match the trunk geometries"));
    }
    let mut all_dims: Vec<Vec<usize>> = Vec::new();
    for trunk_cfg in [&config.rgb, &config.flow] {
        for spec in &trunk_cfg.layers {
            all_dims.extend(layer_block_dims(&spec.geometry, spec.quad));
        }
    }
    all_dims.extend(layer_block_dims(&fusion_spec.geometry, fusion_spec.quad));
    let feature_dim = config.feature_dim()?;
    all_dims.push(vec![classes, feature_dim]);
    all_dims.push(vec![classes]);
    let remaining = bytes_len - (reader.offset() as usize + 8);
    check_census(reader, &all_dims, remaining)?;
    let mut rgb_layers = Vec::new();
    for spec in &config.rgb.layers {
        rgb_layers.push(read_layer(reader, spec)?);
    }
    let mut flow_layers = Vec::new();
    for spec in &config.flow.layers {
        flow_layers.push(read_layer(reader, spec)?);
    }
    let fusion = read_layer(reader, &fusion_spec)?;
    let head = read_head(reader, classes, feature_dim)?;
    reader.finish()?;
    TwoStreamNetwork::from_parts(config, rgb_layers, flow_layers, fusion, head)
}

pub fn decode_model(bytes: &[u8]) -> Result<LoadedModel> {
    let mut reader = Reader::new(bytes);
    let magic = reader.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(VnnError::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {MODEL_MAGIC:?}"),
        });
    }
    let version = reader.u16_le()?;
    if version != MODEL_VERSION {
        return Err(VnnError::Format {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    match reader.u8()? {
        KIND_CASCADE => Ok(LoadedModel::Cascade(decode_cascade(&mut reader, bytes.len())?)),
        KIND_TWO_STREAM => Ok(LoadedModel::TwoStream(decode_two_stream(
            &mut reader,
            bytes.len(),
        )?)),
        other => Err(VnnError::Format {
            offset: 6,
            message: format!("unknown model kind {other}"),
        }),
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cascade_config(quad: QuadSpec) -> CascadeConfig {
        CascadeConfig {
            input_shape: [1, 6, 4, 4],
            layers: vec![
                LayerSpec {
                    geometry: LayerGeometry {
                        len_t: 2,
                        half_h: 1,
                        half_w: 1,
                        in_channels: 1,
                        out_channels: 2,
                        padding: Padding::Valid,
                        temporal_mode: TemporalMode::Overlapping,
                        pairing: QuadPairing::WithinChannel,
                    },
                    quad,
                },
                LayerSpec {
                    geometry: LayerGeometry {
                        len_t: 2,
                        half_h: 0,
                        half_w: 0,
                        in_channels: 2,
                        out_channels: 2,
                        padding: Padding::Valid,
                        temporal_mode: TemporalMode::Overlapping,
                        pairing: QuadPairing::WithinChannel,
                    },
                    quad: QuadSpec::Exact,
                },
            ],
            head: HeadConfig {
                classes: 3,
                pooling: FeaturePooling::Flatten,
            },
        }
    }

    fn two_stream_config() -> TwoStreamConfig {
        let trunk = TrunkConfig {
            input_shape: [1, 4, 3, 3],
            layers: vec![LayerSpec {
                geometry: LayerGeometry {
                    len_t: 2,
                    half_h: 1,
                    half_w: 1,
                    in_channels: 1,
                    out_channels: 2,
                    padding: Padding::Valid,
                    temporal_mode: TemporalMode::Overlapping,
                    pairing: QuadPairing::WithinChannel,
                },
                quad: QuadSpec::Exact,
            }],
        };
        TwoStreamConfig {
            rgb: trunk.clone(),
            flow: trunk,
            fusion: FusionSpec {
                len_t: 2,
                half_h: 0,
                half_w: 0,
                out_channels: 2,
                padding: Padding::Valid,
                quad: QuadSpec::Separable { rank: 2 },
            },
            head: HeadConfig {
                classes: 3,
                pooling: FeaturePooling::Flatten,
            },
        }
    }

    #[test]
    fn cascade_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for quad in [QuadSpec::Exact, QuadSpec::Separable { rank: 3 }] {
            let net = CascadeNetwork::build(cascade_config(quad), 17).unwrap();
            let bytes = encode_cascade(&net).unwrap();
            let LoadedModel::Cascade(loaded) = decode_model(&bytes).unwrap() else {
                panic!("expected cascade");
            };
            assert_eq!(loaded, net);
            // forward evaluation is identical on random clips
            for _ in 0..10 {
                let data: Vec<f64> = (0..96).map(|_| rng.random_range(-1.0..1.0)).collect();
                let clip = Tensor::from_vec(&[1, 6, 4, 4], data).unwrap();
                let a = net.forward_cascade(&clip).unwrap();
                let b = loaded.forward_cascade(&clip).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn two_stream_round_trip_preserves_partition() {
        let net = TwoStreamNetwork::build(two_stream_config(), 23).unwrap();
        let bytes = encode_two_stream(&net).unwrap();
        let LoadedModel::TwoStream(loaded) = decode_model(&bytes).unwrap() else {
            panic!("expected two-stream");
        };
        assert_eq!(loaded, net);
        assert_eq!(loaded.stream_partition(), net.stream_partition());
    }

    #[test]
    fn truncated_parameter_section_is_a_census_error() {
        let net = CascadeNetwork::build(cascade_config(QuadSpec::Exact), 29).unwrap();
        let bytes = encode_cascade(&net).unwrap();
        let err = decode_model(&bytes[..bytes.len() - 16]).unwrap_err();
        let VnnError::Format { message, .. } = &err else {
            panic!("expected format error, got {err}");
        };
        assert!(message.contains("census"), "got: {message}");
    }

    #[test]
    fn census_field_is_validated() {
        let net = CascadeNetwork::build(cascade_config(QuadSpec::Exact), 31).unwrap();
        let mut bytes = encode_cascade(&net).unwrap();
        // census u64 sits immediately after the layer records; corrupt it
        let census_offset = bytes.len()
            - net
                .trunk()
                .layers()
                .iter()
                .map(|l| {
                    let dims = layer_block_dims(l.geometry(), layer_quad_spec(l));
                    dims.iter()
                        .map(|d| 1 + 4 * d.len() + 8 * d.iter().product::<usize>())
                        .sum::<usize>()
                })
                .sum::<usize>()
            - (1 + 8 + 8 * net.head().weights().len())
            - (1 + 4 + 8 * net.head().biases().len())
            - 8;
        bytes[census_offset] ^= 0xff;
        let err = decode_model(&bytes).unwrap_err();
        assert!(err.to_string().contains("census"), "got: {err}");
    }

    #[test]
    fn bad_magic_and_kind_are_rejected() {
        let net = CascadeNetwork::build(cascade_config(QuadSpec::Exact), 37).unwrap();
        let mut bytes = encode_cascade(&net).unwrap();
        bytes[0] = b'X';
        assert!(decode_model(&bytes).is_err());
        let mut bytes = encode_cascade(&net).unwrap();
        bytes[6] = 9;
        assert!(decode_model(&bytes).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vnnm");
        let net = TwoStreamNetwork::build(two_stream_config(), 41).unwrap();
        save_two_stream(&path, &net).unwrap();
        let LoadedModel::TwoStream(loaded) = load_model(&path).unwrap() else {
            panic!("expected two-stream");
        };
        assert_eq!(loaded, net);
    }
}
