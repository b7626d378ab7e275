//! Dataset manifests, clip loading, and the synthetic motion generator.
//!
//! A manifest is a JSON document binding tensor files to class labels:
//!
//! ```json
//! {
//!   "classes": ["right", "left"],
//!   "frames_per_clip": 8,
//!   "streams": ["rgb", "flow"],
//!   "clips": [
//!     { "id": "right_000", "label": 0,
//!       "rgb": "clips/right_000_rgb.vnnt",
//!       "flow": "clips/right_000_flow.vnnt" }
//!   ]
//! }
//! ```
//!
//! Paths are relative to the manifest's directory. Clip tensors are rank 3
//! `[T, H, W]` (loaded as single-channel `[1, T, H, W]`) or rank 4
//! `[C, T, H, W]`.
//!
//! The generator renders a bright Gaussian blob translating with a
//! per-class velocity over a dark background, plus optional Gaussian pixel
//! noise, clipped to [0, 1]. The flow stream is the frame-to-frame temporal
//! difference (the last frame is repeated, so its final step is zero),
//! clamped to [-1, 1] — a desk-scale stand-in for optical flow; externally
//! computed flow tensors in the same file format are accepted
//! transparently.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::tensor_file::{load_tensor, save_tensor};
use crate::error::{Result, VnnError};
use crate::model::{Dataset, Sample};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Rgb,
    Flow,
}

/// One clip entry in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipEntry {
    pub id: String,
    pub label: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rgb: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
}

impl ClipEntry {
    fn stream_path(&self, stream: StreamKind) -> Option<&str> {
        match stream {
            StreamKind::Rgb => self.rgb.as_deref(),
            StreamKind::Flow => self.flow.as_deref(),
        }
    }
}

/// Labeled clip index binding tensor files to classes and streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub frames_per_clip: usize,
    pub streams: Vec<StreamKind>,
    pub clips: Vec<ClipEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(VnnError::Config("manifest has no classes".into()));
        }
        if self.frames_per_clip == 0 {
            return Err(VnnError::Config("frames_per_clip must be at least 1".into()));
        }
        if self.streams.is_empty() {
            return Err(VnnError::Config("manifest declares no streams".into()));
        }
        let unique: HashSet<_> = self.streams.iter().collect();
        if unique.len() != self.streams.len() {
            return Err(VnnError::Config("duplicate stream declaration".into()));
        }
        for clip in &self.clips {
            if clip.label >= self.classes.len() {
                return Err(VnnError::Data {
                    id: clip.id.clone(),
                    message: format!(
                        "label {} out of range for {} classes",
                        clip.label,
                        self.classes.len()
                    ),
                });
            }
            for &stream in &self.streams {
                if clip.stream_path(stream).is_none() {
                    return Err(VnnError::Data {
                        id: clip.id.clone(),
                        message: format!("missing path for declared stream {stream:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(std::fs::write(path, text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Promote a rank-3 `[T, H, W]` clip to single-channel `[1, T, H, W]`.
fn promote_clip(tensor: Tensor, id: &str) -> Result<Tensor> {
    match tensor.rank() {
        4 => Ok(tensor),
        3 => {
            let mut shape = vec![1];
            shape.extend_from_slice(tensor.shape());
            Tensor::from_vec(&shape, tensor.data().to_vec())
        }
        other => Err(VnnError::Data {
            id: id.into(),
            message: format!("clip tensors must be rank 3 or 4, got rank {other}"),
        }),
    }
}

/// Load a manifest and all referenced clips, validating shapes as declared.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(manifest.clips.len());
    // shapes must agree within each stream; streams may differ (real flow
    // can carry more channels than the appearance stream)
    let mut expected_shapes: HashMap<StreamKind, Vec<usize>> = HashMap::new();
    for clip in &manifest.clips {
        let mut rgb = None;
        let mut flow = None;
        for &stream in &manifest.streams {
            let rel = clip.stream_path(stream).expect("validated above");
            let path = base.join(rel);
            let tensor = load_tensor(&path).map_err(|e| VnnError::Data {
                id: clip.id.clone(),
                message: format!("stream {stream:?} at {}: {e}", path.display()),
            })?;
            let tensor = promote_clip(tensor, &clip.id)?;
            if tensor.shape()[1] != manifest.frames_per_clip {
                return Err(VnnError::Data {
                    id: clip.id.clone(),
                    message: format!(
                        "clip has {} frames, manifest declares {}",
                        tensor.shape()[1],
                        manifest.frames_per_clip
                    ),
                });
            }
            match expected_shapes.get(&stream) {
                None => {
                    expected_shapes.insert(stream, tensor.shape().to_vec());
                }
                Some(shape) if shape.as_slice() != tensor.shape() => {
                    return Err(VnnError::Data {
                        id: clip.id.clone(),
                        message: format!(
                            "{stream:?} clip shape {:?} differs from the stream's {:?}",
                            tensor.shape(),
                            shape
                        ),
                    });
                }
                Some(_) => {}
            }
            match stream {
                StreamKind::Rgb => rgb = Some(tensor),
                StreamKind::Flow => flow = Some(tensor),
            }
        }
        let rgb = rgb.ok_or_else(|| VnnError::Data {
            id: clip.id.clone(),
            message: "dataset declares no rgb stream".into(),
        })?;
        samples.push(Sample {
            id: clip.id.clone(),
            label: clip.label,
            rgb,
            flow,
        });
    }
    Ok(Dataset {
        classes: manifest.classes,
        samples,
    })
}

/// One motion pattern: a blob translating at `velocity` = (dy, dx) pixels
/// per frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionClass {
    pub name: String,
    pub velocity: (f64, f64),
}

fn default_blob_sigma() -> f64 {
    1.5
}

/// Generator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: Vec<MotionClass>,
    pub clips_per_class: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub streams: Vec<StreamKind>,
    #[serde(default = "default_blob_sigma")]
    pub blob_sigma: f64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(VnnError::Config("generator needs at least one class".into()));
        }
        if self.clips_per_class == 0 {
            return Err(VnnError::Config("clips_per_class must be at least 1".into()));
        }
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return Err(VnnError::Config(format!(
                "invalid clip dimensions {}x{}x{}",
                self.frames, self.height, self.width
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(VnnError::Config("noise_sigma must be >= 0".into()));
        }
        if !self.blob_sigma.is_finite() || self.blob_sigma <= 0.0 {
            return Err(VnnError::Config("blob_sigma must be positive".into()));
        }
        if self.streams.is_empty() || !self.streams.contains(&StreamKind::Rgb) {
            return Err(VnnError::Config("generator streams must include rgb".into()));
        }
        Ok(())
    }
}

/// Uniform start range on one axis such that the blob center stays at least
/// `margin` pixels inside the frame over the whole trajectory.
fn start_range(extent: usize, velocity: f64, frames: usize, margin: f64) -> Result<(f64, f64)> {
    let travel = velocity * (frames.saturating_sub(1)) as f64;
    let lo = margin - travel.min(0.0);
    let hi = (extent as f64 - 1.0 - margin) - travel.max(0.0);
    if lo > hi {
        return Err(VnnError::Config(format!(
            "velocity {velocity} travels out of a {extent}-pixel frame in {frames} frames"
        )));
    }
    Ok((lo, hi))
}

fn render_clip(
    config: &SyntheticConfig,
    velocity: (f64, f64),
    start: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Tensor {
    let (t_ext, h, w) = (config.frames, config.height, config.width);
    let inv = 1.0 / (2.0 * config.blob_sigma * config.blob_sigma);
    let mut data = Vec::with_capacity(t_ext * h * w);
    for t in 0..t_ext {
        let cy = start.0 + velocity.0 * t as f64;
        let cx = start.1 + velocity.1 * t as f64;
        for i in 0..h {
            for j in 0..w {
                let dy = i as f64 - cy;
                let dx = j as f64 - cx;
                let mut value = (-(dy * dy + dx * dx) * inv).exp();
                if config.noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    value += config.noise_sigma * z;
                }
                data.push(value.clamp(0.0, 1.0));
            }
        }
    }
    Tensor::from_vec(&[t_ext, h, w], data).expect("shape validated")
}

/// Frame-to-frame temporal difference; the last input frame is repeated, so
/// the final difference is zero.
fn temporal_difference(clip: &Tensor) -> Tensor {
    let shape = clip.shape();
    let (t_ext, plane) = (shape[0], shape[1] * shape[2]);
    let src = clip.data();
    let mut data = vec![0.0; src.len()];
    for t in 0..t_ext.saturating_sub(1) {
        for p in 0..plane {
            data[t * plane + p] =
                (src[(t + 1) * plane + p] - src[t * plane + p]).clamp(-1.0, 1.0);
        }
    }
    Tensor::from_vec(shape, data).expect("same shape")
}

/// Write a synthetic dataset under `out_dir` and return the manifest path.
///
/// Deterministic per seed: rerunning with the same configuration produces
/// byte-identical files.
pub fn gen_synthetic(config: &SyntheticConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let clip_dir = out_dir.join("clips");
    std::fs::create_dir_all(&clip_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let margin = 2.0;
    let with_flow = config.streams.contains(&StreamKind::Flow);
    let mut clips = Vec::with_capacity(config.classes.len() * config.clips_per_class);
    for (label, class) in config.classes.iter().enumerate() {
        let range_y = start_range(config.height, class.velocity.0, config.frames, margin)?;
        let range_x = start_range(config.width, class.velocity.1, config.frames, margin)?;
        for k in 0..config.clips_per_class {
            let start = (
                rng.random_range(range_y.0..=range_y.1),
                rng.random_range(range_x.0..=range_x.1),
            );
            let clip = render_clip(config, class.velocity, start, &mut rng);
            let id = format!("{}_{k:03}", class.name);
            let rgb_rel = format!("clips/{id}_rgb.vnnt");
            save_tensor(&out_dir.join(&rgb_rel), &clip)?;
            let flow_rel = if with_flow {
                let rel = format!("clips/{id}_flow.vnnt");
                save_tensor(&out_dir.join(&rel), &temporal_difference(&clip))?;
                Some(rel)
            } else {
                None
            };
            clips.push(ClipEntry {
                id,
                label,
                rgb: Some(rgb_rel),
                flow: flow_rel,
            });
        }
    }
    let manifest = DatasetManifest {
        classes: config.classes.iter().map(|c| c.name.clone()).collect(),
        frames_per_clip: config.frames,
        streams: config.streams.clone(),
        clips,
    };
    manifest.validate()?;
    let manifest_path = out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    Ok(manifest_path)
}
