//! A single spatio-temporal second-order Volterra layer.
//!
//! For every output position the layer gathers a window of
//! `n_w = L·(2p1+1)·(2p2+1)` input samples per channel and emits
//!
//! ```text
//! y = Σ_taps W¹[tap]·x[tap]  +  Σ_{tap1,tap2} W²[tap1][tap2]·x[tap1]·x[tap2]
//! ```
//!
//! with no zeroth-order (bias) term. The quadratic kernel is stored either
//! exactly (`n_w × n_w` per channel pair) or rank-Q separable as
//! `W² = Σ_q a_q b_qᵀ`, in which case the quadratic response is evaluated as
//! `Σ_q (a_q·x)(b_q·x)` without ever assembling the full kernel.
//!
//! Index conventions, fixed once for the whole crate:
//! - temporal tap τ ∈ [0, L-1] reads frame `m + (L-1) - τ` for output step m,
//!   so τ = 0 is the newest frame of the window;
//! - spatial taps are centered offsets d1 ∈ [-p1, p1], d2 ∈ [-p2, p2] added
//!   to the window center;
//! - within a channel, tap order is τ-major, then d1, then d2.
//!
//! Quadratic interactions normally pair taps within one input channel
//! (cross-channel mixing happens through the output-channel sum and later
//! layers); `QuadPairing::CrossChannel` widens the pairing to the
//! concatenation of all input-channel windows, which is how the two-stream
//! fusion layer pairs taps across its stream-partitioned channels.
//!
//! Temporal stride is always 1 here; non-overlapping cascades re-stride the
//! output downstream.

use rand::Rng;

use crate::error::{Result, VnnError};
use crate::tensor::Tensor;

/// Spatial boundary policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output shrinks by 2p per spatial axis.
    Valid,
    /// Output keeps the input's spatial extents; out-of-frame samples read 0.
    ZeroSpatial,
}

/// How the cascade consumes this layer's stride-1 temporal output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalMode {
    /// Keep every temporal step: M_z = M_{z-1} - L_z + 1.
    Overlapping,
    /// Keep every L_z-th step: M_z = M_{z-1} / L_z (L_z must divide).
    NonOverlapping,
}

/// Scope of quadratic tap pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadPairing {
    /// Pairs form within one input channel (trunk layers).
    WithinChannel,
    /// Pairs span all input channels' windows (fusion layer).
    CrossChannel,
}

/// Geometry of one layer: window extents, channel widths, and policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerGeometry {
    pub len_t: usize,
    pub half_h: usize,
    pub half_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: Padding,
    pub temporal_mode: TemporalMode,
    pub pairing: QuadPairing,
}

impl LayerGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.len_t < 1 {
            return Err(VnnError::Geometry("len_t must be at least 1".into()));
        }
        if self.in_channels < 1 || self.out_channels < 1 {
            return Err(VnnError::Geometry("channel counts must be at least 1".into()));
        }
        Ok(())
    }

    /// Receptive window size n_w = L·(2p1+1)·(2p2+1) of one channel.
    pub fn window_taps(&self) -> usize {
        self.len_t * (2 * self.half_h + 1) * (2 * self.half_w + 1)
    }

    /// Length of the gathered window across all input channels.
    pub fn gather_len(&self) -> usize {
        self.in_channels * self.window_taps()
    }

    /// Length of one quadratic pairing vector.
    pub fn quad_len(&self) -> usize {
        match self.pairing {
            QuadPairing::WithinChannel => self.window_taps(),
            QuadPairing::CrossChannel => self.gather_len(),
        }
    }

    /// Number of quadratic blocks per output channel.
    pub fn quad_blocks(&self) -> usize {
        match self.pairing {
            QuadPairing::WithinChannel => self.in_channels,
            QuadPairing::CrossChannel => 1,
        }
    }

    /// Output shape `[C_out, T', H', W']` for a `[C_in, T, H, W]` input,
    /// before any cascade-level temporal re-stride.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<[usize; 4]> {
        if input_shape.len() != 4 {
            return Err(VnnError::Shape(format!(
                "layer input must be rank 4 [C,T,H,W], got rank {}",
                input_shape.len()
            )));
        }
        let [c, t, h, w] = [input_shape[0], input_shape[1], input_shape[2], input_shape[3]];
        if c != self.in_channels {
            return Err(VnnError::Shape(format!(
                "input has {} channels, layer expects {}",
                c, self.in_channels
            )));
        }
        if t < self.len_t {
            return Err(VnnError::Geometry(format!(
                "temporal extent {} shorter than filter length {}",
                t, self.len_t
            )));
        }
        let (out_h, out_w) = match self.padding {
            Padding::Valid => {
                if h < 2 * self.half_h + 1 || w < 2 * self.half_w + 1 {
                    return Err(VnnError::Geometry(format!(
                        "spatial extents {}x{} too small for window {}x{}",
                        h,
                        w,
                        2 * self.half_h + 1,
                        2 * self.half_w + 1
                    )));
                }
                (h - 2 * self.half_h, w - 2 * self.half_w)
            }
            Padding::ZeroSpatial => (h, w),
        };
        Ok([self.out_channels, t - self.len_t + 1, out_h, out_w])
    }
}

/// Quadratic kernel storage.
///
/// `Exact` holds `out·blocks·q_len²` entries laid out `[co][blk][t1][t2]`;
/// `Separable` holds two factor banks of `out·blocks·rank·q_len` entries
/// laid out `[co][blk][q][tap]`.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadraticKernel {
    Exact { w2: Vec<f64> },
    Separable { rank: usize, a: Vec<f64>, b: Vec<f64> },
}

/// Gradients produced by [`VolterraLayer::backward`], mirroring the layer's
/// own storage layout.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w1: Vec<f64>,
    pub quad: QuadraticKernel,
    pub input: Tensor,
}

/// Linear kernel plus quadratic kernel plus geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraLayer {
    geometry: LayerGeometry,
    w1: Vec<f64>,
    quad: QuadraticKernel,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], scale: f64, src: &[f64]) {
    for (o, x) in out.iter_mut().zip(src) {
        *o += scale * x;
    }
}

impl VolterraLayer {
    /// Zero-weight layer with an exact quadratic kernel.
    pub fn zeros_exact(geometry: LayerGeometry) -> Result<Self> {
        geometry.validate()?;
        let w1 = vec![0.0; geometry.out_channels * geometry.gather_len()];
        let quad_len = geometry.quad_len();
        let w2 = vec![0.0; geometry.out_channels * geometry.quad_blocks() * quad_len * quad_len];
        Ok(Self {
            geometry,
            w1,
            quad: QuadraticKernel::Exact { w2 },
        })
    }

    /// Zero-weight layer with a rank-`rank` separable quadratic kernel.
    pub fn zeros_separable(geometry: LayerGeometry, rank: usize) -> Result<Self> {
        geometry.validate()?;
        if rank == 0 {
            return Err(VnnError::Geometry("separable rank must be at least 1".into()));
        }
        let w1 = vec![0.0; geometry.out_channels * geometry.gather_len()];
        let factor_len = geometry.out_channels * geometry.quad_blocks() * rank * geometry.quad_len();
        Ok(Self {
            geometry,
            w1,
            quad: QuadraticKernel::Separable {
                rank,
                a: vec![0.0; factor_len],
                b: vec![0.0; factor_len],
            },
        })
    }

    /// Randomize weights in place: uniform in `[-s, s]` with `s = 1/q_len`
    /// for W¹ and `s = 1/q_len²` for the quadratic kernel or its factors,
    /// keeping the initial quadratic response sub-dominant.
    pub fn randomize<R: Rng>(&mut self, rng: &mut R) {
        let n = self.geometry.quad_len() as f64;
        let s1 = 1.0 / n;
        let s2 = 1.0 / (n * n);
        for w in &mut self.w1 {
            *w = rng.random_range(-s1..=s1);
        }
        match &mut self.quad {
            QuadraticKernel::Exact { w2 } => {
                for w in w2.iter_mut() {
                    *w = rng.random_range(-s2..=s2);
                }
            }
            QuadraticKernel::Separable { a, b, .. } => {
                for w in a.iter_mut() {
                    *w = rng.random_range(-s2..=s2);
                }
                for w in b.iter_mut() {
                    *w = rng.random_range(-s2..=s2);
                }
            }
        }
    }

    pub fn geometry(&self) -> &LayerGeometry {
        &self.geometry
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        &mut self.w1
    }

    pub fn quad(&self) -> &QuadraticKernel {
        &self.quad
    }

    pub fn quad_mut(&mut self) -> &mut QuadraticKernel {
        &mut self.quad
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.quad, QuadraticKernel::Separable { .. })
    }

    pub fn separable_rank(&self) -> Option<usize> {
        match &self.quad {
            QuadraticKernel::Separable { rank, .. } => Some(*rank),
            QuadraticKernel::Exact { .. } => None,
        }
    }

    /// Linear index of tap `(tau, d1, d2)` within one channel's window.
    pub fn tap_index(&self, tau: usize, d1: isize, d2: isize) -> usize {
        let g = &self.geometry;
        let p1 = g.half_h as isize;
        let p2 = g.half_w as isize;
        ((tau * (2 * g.half_h + 1)) as isize + (d1 + p1)) as usize * (2 * g.half_w + 1)
            + (d2 + p2) as usize
    }

    /// Number of stored weight scalars.
    pub fn param_count(&self) -> usize {
        self.w1.len()
            + match &self.quad {
                QuadraticKernel::Exact { w2 } => w2.len(),
                QuadraticKernel::Separable { a, b, .. } => a.len() + b.len(),
            }
    }

    /// Gather the window feeding output position `(m, oi, oj)` into `v`,
    /// channel-major. Returns false only in zero-padding mode for taps that
    /// fall outside the frame, which read as 0.
    fn gather(&self, input: &Tensor, m: usize, oi: usize, oj: usize, v: &mut [f64]) {
        let g = &self.geometry;
        let shape = input.shape();
        let (h, w) = (shape[2] as isize, shape[3] as isize);
        let data = input.data();
        let t_stride = shape[2] * shape[3];
        let c_stride = shape[1] * t_stride;
        let (ci_h, ci_w) = match g.padding {
            Padding::Valid => ((oi + g.half_h) as isize, (oj + g.half_w) as isize),
            Padding::ZeroSpatial => (oi as isize, oj as isize),
        };
        let p1 = g.half_h as isize;
        let p2 = g.half_w as isize;
        let mut k = 0;
        for ci in 0..g.in_channels {
            let c_base = ci * c_stride;
            for tau in 0..g.len_t {
                let t_in = m + (g.len_t - 1) - tau;
                let t_base = c_base + t_in * t_stride;
                for d1 in -p1..=p1 {
                    let hi = ci_h + d1;
                    for d2 in -p2..=p2 {
                        let wj = ci_w + d2;
                        v[k] = if hi >= 0 && hi < h && wj >= 0 && wj < w {
                            data[t_base + (hi as usize) * (w as usize) + wj as usize]
                        } else {
                            0.0
                        };
                        k += 1;
                    }
                }
            }
        }
    }

    /// Scatter `grad_v` back through the gather map, accumulating into
    /// `grad_input`. Out-of-frame taps (zero padding) are dropped.
    fn scatter(&self, grad_input: &mut Tensor, m: usize, oi: usize, oj: usize, grad_v: &[f64]) {
        let g = &self.geometry;
        let shape = grad_input.shape().to_vec();
        let (h, w) = (shape[2] as isize, shape[3] as isize);
        let t_stride = shape[2] * shape[3];
        let c_stride = shape[1] * t_stride;
        let data = grad_input.data_mut();
        let (ci_h, ci_w) = match g.padding {
            Padding::Valid => ((oi + g.half_h) as isize, (oj + g.half_w) as isize),
            Padding::ZeroSpatial => (oi as isize, oj as isize),
        };
        let p1 = g.half_h as isize;
        let p2 = g.half_w as isize;
        let mut k = 0;
        for ci in 0..g.in_channels {
            let c_base = ci * c_stride;
            for tau in 0..g.len_t {
                let t_in = m + (g.len_t - 1) - tau;
                let t_base = c_base + t_in * t_stride;
                for d1 in -p1..=p1 {
                    let hi = ci_h + d1;
                    for d2 in -p2..=p2 {
                        let wj = ci_w + d2;
                        if hi >= 0 && hi < h && wj >= 0 && wj < w {
                            data[t_base + (hi as usize) * (w as usize) + wj as usize] += grad_v[k];
                        }
                        k += 1;
                    }
                }
            }
        }
    }

    /// Apply the layer to a `[C_in, T, H, W]` input. Works for both exact
    /// and separable quadratic kernels; the separable path evaluates
    /// `Σ_q (a_q·x)(b_q·x)` directly.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.geometry.output_shape(input.shape())?;
        let g = &self.geometry;
        let gather_len = g.gather_len();
        let q_len = g.quad_len();
        let blocks = g.quad_blocks();
        let mut out = Tensor::zeros(&out_shape)?;
        let (out_t, out_h, out_w) = (out_shape[1], out_shape[2], out_shape[3]);
        let pos_stride = out_t * out_h * out_w;
        let mut v = vec![0.0; gather_len];
        let out_data = out.data_mut();
        for m in 0..out_t {
            for oi in 0..out_h {
                for oj in 0..out_w {
                    self.gather(input, m, oi, oj, &mut v);
                    let pos = (m * out_h + oi) * out_w + oj;
                    for co in 0..g.out_channels {
                        let mut acc = dot(&self.w1[co * gather_len..(co + 1) * gather_len], &v);
                        match &self.quad {
                            QuadraticKernel::Exact { w2 } => {
                                for blk in 0..blocks {
                                    let chunk = &v[blk * q_len..(blk + 1) * q_len];
                                    let base = (co * blocks + blk) * q_len * q_len;
                                    for (t1, &x1) in chunk.iter().enumerate() {
                                        if x1 != 0.0 {
                                            let row = &w2[base + t1 * q_len..base + (t1 + 1) * q_len];
                                            acc += x1 * dot(row, chunk);
                                        }
                                    }
                                }
                            }
                            QuadraticKernel::Separable { rank, a, b } => {
                                for blk in 0..blocks {
                                    let chunk = &v[blk * q_len..(blk + 1) * q_len];
                                    for q in 0..*rank {
                                        let row = ((co * blocks + blk) * rank + q) * q_len;
                                        acc += dot(&a[row..row + q_len], chunk)
                                            * dot(&b[row..row + q_len], chunk);
                                    }
                                }
                            }
                        }
                        out_data[co * pos_stride + pos] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact analytic gradients of `Σ upstream ⊙ forward(input)` with respect
    /// to W¹, the quadratic kernel (or its factors, taken directly without
    /// assembly), and the input.
    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<LayerGrads> {
        let out_shape = self.geometry.output_shape(input.shape())?;
        if upstream.shape() != out_shape {
            return Err(VnnError::Shape(format!(
                "upstream gradient shape {:?} does not match output shape {:?}",
                upstream.shape(),
                out_shape
            )));
        }
        let g = &self.geometry;
        let gather_len = g.gather_len();
        let q_len = g.quad_len();
        let blocks = g.quad_blocks();
        let mut grad_w1 = vec![0.0; self.w1.len()];
        let mut grad_quad = match &self.quad {
            QuadraticKernel::Exact { w2 } => QuadraticKernel::Exact {
                w2: vec![0.0; w2.len()],
            },
            QuadraticKernel::Separable { rank, a, b } => QuadraticKernel::Separable {
                rank: *rank,
                a: vec![0.0; a.len()],
                b: vec![0.0; b.len()],
            },
        };
        let mut grad_input = Tensor::zeros(input.shape())?;

        // W² enters grad_input through W²[t1][t2] + W²[t2][t1]; symmetrize
        // once instead of per position.
        let sym = match &self.quad {
            QuadraticKernel::Exact { w2 } => {
                let mut sym = w2.clone();
                for blk_base in (0..w2.len()).step_by(q_len * q_len) {
                    for t1 in 0..q_len {
                        for t2 in 0..q_len {
                            sym[blk_base + t1 * q_len + t2] =
                                w2[blk_base + t1 * q_len + t2] + w2[blk_base + t2 * q_len + t1];
                        }
                    }
                }
                sym
            }
            QuadraticKernel::Separable { .. } => Vec::new(),
        };

        let (out_t, out_h, out_w) = (out_shape[1], out_shape[2], out_shape[3]);
        let pos_stride = out_t * out_h * out_w;
        let up_data = upstream.data();
        let mut v = vec![0.0; gather_len];
        let mut grad_v = vec![0.0; gather_len];
        for m in 0..out_t {
            for oi in 0..out_h {
                for oj in 0..out_w {
                    let pos = (m * out_h + oi) * out_w + oj;
                    // re-strided cascades upstream zeros for dropped steps
                    if (0..g.out_channels).all(|co| up_data[co * pos_stride + pos] == 0.0) {
                        continue;
                    }
                    self.gather(input, m, oi, oj, &mut v);
                    grad_v.iter_mut().for_each(|x| *x = 0.0);
                    for co in 0..g.out_channels {
                        let up = up_data[co * pos_stride + pos];
                        if up == 0.0 {
                            continue;
                        }
                        axpy(
                            &mut grad_w1[co * gather_len..(co + 1) * gather_len],
                            up,
                            &v,
                        );
                        axpy(&mut grad_v, up, &self.w1[co * gather_len..(co + 1) * gather_len]);
                        match (&mut grad_quad, &self.quad) {
                            (QuadraticKernel::Exact { w2: gw2 }, QuadraticKernel::Exact { .. }) => {
                                for blk in 0..blocks {
                                    let lo = blk * q_len;
                                    let chunk = &v[lo..lo + q_len];
                                    let base = (co * blocks + blk) * q_len * q_len;
                                    let gchunk = &mut grad_v[lo..lo + q_len];
                                    for t1 in 0..q_len {
                                        let x1 = chunk[t1];
                                        if x1 != 0.0 {
                                            axpy(
                                                &mut gw2[base + t1 * q_len..base + (t1 + 1) * q_len],
                                                up * x1,
                                                chunk,
                                            );
                                        }
                                        let srow = &sym[base + t1 * q_len..base + (t1 + 1) * q_len];
                                        gchunk[t1] += up * dot(srow, chunk);
                                    }
                                }
                            }
                            (
                                QuadraticKernel::Separable { a: ga, b: gb, .. },
                                QuadraticKernel::Separable { rank, a, b },
                            ) => {
                                for blk in 0..blocks {
                                    let lo = blk * q_len;
                                    let chunk = &v[lo..lo + q_len];
                                    for q in 0..*rank {
                                        let row = ((co * blocks + blk) * rank + q) * q_len;
                                        let a_row = &a[row..row + q_len];
                                        let b_row = &b[row..row + q_len];
                                        let alpha = dot(a_row, chunk);
                                        let beta = dot(b_row, chunk);
                                        axpy(&mut ga[row..row + q_len], up * beta, chunk);
                                        axpy(&mut gb[row..row + q_len], up * alpha, chunk);
                                        let gchunk = &mut grad_v[lo..lo + q_len];
                                        axpy(gchunk, up * beta, a_row);
                                        axpy(gchunk, up * alpha, b_row);
                                    }
                                }
                            }
                            _ => unreachable!("grad kernel mirrors layer kernel"),
                        }
                    }
                    self.scatter(&mut grad_input, m, oi, oj, &grad_v);
                }
            }
        }
        Ok(LayerGrads {
            w1: grad_w1,
            quad: grad_quad,
            input: grad_input,
        })
    }

    /// Assemble a separable kernel into its exact twin:
    /// `W²[t1][t2] = Σ_q a_q[t1]·b_q[t2]` per block. Geometry and W¹ carry
    /// over unchanged.
    pub fn assemble_exact(&self) -> Result<VolterraLayer> {
        let QuadraticKernel::Separable { rank, a, b } = &self.quad else {
            return Err(VnnError::Domain(
                "assemble_exact requires a separable quadratic kernel".into(),
            ));
        };
        let g = &self.geometry;
        let q_len = g.quad_len();
        let n_blocks = g.out_channels * g.quad_blocks();
        let mut w2 = vec![0.0; n_blocks * q_len * q_len];
        for blk in 0..n_blocks {
            let out_base = blk * q_len * q_len;
            for q in 0..*rank {
                let row = (blk * rank + q) * q_len;
                for t1 in 0..q_len {
                    let scale = a[row + t1];
                    if scale != 0.0 {
                        axpy(
                            &mut w2[out_base + t1 * q_len..out_base + (t1 + 1) * q_len],
                            scale,
                            &b[row..row + q_len],
                        );
                    }
                }
            }
        }
        Ok(VolterraLayer {
            geometry: self.geometry,
            w1: self.w1.clone(),
            quad: QuadraticKernel::Exact { w2 },
        })
    }

    /// L1 norms of the linear and quadratic kernels, summed over all channel
    /// pairs. Separable kernels are assembled first so the quadratic norm is
    /// that of the realized kernel.
    pub fn l1_norms(&self) -> Result<(f64, f64)> {
        let linear: f64 = self.w1.iter().map(|w| w.abs()).sum();
        let quad = match &self.quad {
            QuadraticKernel::Exact { w2 } => w2.iter().map(|w| w.abs()).sum(),
            QuadraticKernel::Separable { .. } => {
                let assembled = self.assemble_exact()?;
                match &assembled.quad {
                    QuadraticKernel::Exact { w2 } => w2.iter().map(|w| w.abs()).sum(),
                    QuadraticKernel::Separable { .. } => unreachable!(),
                }
            }
        };
        Ok((linear, quad))
    }

    /// BIBO output bound `A·Σ|W¹| + A²·Σ|W²|` for inputs with
    /// `max_abs ≤ A`.
    pub fn output_bound(&self, input_bound: f64) -> Result<f64> {
        if input_bound < 0.0 {
            return Err(VnnError::Domain(format!(
                "input bound must be non-negative, got {input_bound}"
            )));
        }
        let (linear, quad) = self.l1_norms()?;
        Ok(input_bound * linear + input_bound * input_bound * quad)
    }

    /// Sum of squared weights (both kernels), the layer's share of the
    /// weight-decay term.
    pub fn sq_norm(&self) -> f64 {
        let lin: f64 = self.w1.iter().map(|w| w * w).sum();
        let quad: f64 = match &self.quad {
            QuadraticKernel::Exact { w2 } => w2.iter().map(|w| w * w).sum(),
            QuadraticKernel::Separable { a, b, .. } => {
                a.iter().map(|w| w * w).sum::<f64>() + b.iter().map(|w| w * w).sum::<f64>()
            }
        };
        lin + quad
    }
}
