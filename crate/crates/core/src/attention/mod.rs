//! Single-head scaled dot-product attention over frame-indexed tokens.
//!
//! Masks are defined on frame ids and applied per token: every token of an
//! admitted key frame is admitted. Excluded keys never enter the softmax.
//! Within a query row, keys are reduced in ascending token order whatever the
//! mask, so masks that admit the same key set give bit-identical rows.

mod matrix;
pub mod reference;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Shape4, VideoLatent};

pub use matrix::Matrix;

/// Tokens laid out frame-major, then row-major over an `height x width` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    features: Matrix,
    frame_index: Vec<usize>,
    frames: usize,
    height: usize,
    width: usize,
}

impl TokenSequence {
    pub fn new(features: Matrix, frame_index: Vec<usize>, height: usize, width: usize) -> Result<Self> {
        let per_frame = height * width;
        if per_frame == 0 {
            return Err(Error::InvalidShape("empty spatial grid".into()));
        }
        if frame_index.len() != features.rows() {
            return Err(Error::mismatch(
                format!("{} frame ids", features.rows()),
                frame_index.len(),
            ));
        }
        if !features.rows().is_multiple_of(per_frame) {
            return Err(Error::InvalidShape(format!(
                "{} tokens is not a whole number of {height}x{width} frames",
                features.rows()
            )));
        }
        let frames = features.rows() / per_frame;
        for (i, &f) in frame_index.iter().enumerate() {
            if f != i / per_frame {
                return Err(Error::InvalidParameter(format!(
                    "token {i} has frame id {f}, expected {} (frame-major layout, {per_frame} tokens per frame)",
                    i / per_frame
                )));
            }
        }
        Ok(Self {
            features,
            frame_index,
            frames,
            height,
            width,
        })
    }

    pub fn from_features(features: Matrix, height: usize, width: usize) -> Result<Self> {
        let per_frame = (height * width).max(1);
        let frame_index = (0..features.rows()).map(|i| i / per_frame).collect();
        Self::new(features, frame_index, height, width)
    }

    /// One token per (t, h, w) site; the feature vector is the channel axis.
    pub fn from_latent(latent: &VideoLatent) -> Self {
        let s = latent.shape();
        let n = s.volume();
        let mut data = Vec::with_capacity(n * s.channels);
        for site in 0..n {
            for c in 0..s.channels {
                data.push(latent.channel(c)[site]);
            }
        }
        let features = Matrix::new(n, s.channels, data).expect("latent values are finite");
        Self::from_features(features, s.height, s.width).expect("latent layout is frame-major")
    }

    /// Inverse of [`TokenSequence::from_latent`], with `C = d_model`.
    pub fn to_latent(&self) -> Result<VideoLatent> {
        features_to_latent(&self.features, self.frames, self.height, self.width)
    }

    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        Self::new(features, self.frame_index.clone(), self.height, self.width)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn frame_index(&self) -> &[usize] {
        &self.frame_index
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn d_model(&self) -> usize {
        self.features.cols()
    }
}

pub(crate) fn features_to_latent(features: &Matrix, frames: usize, height: usize, width: usize) -> Result<VideoLatent> {
    let shape = Shape4::new(features.cols(), frames, height, width);
    if features.rows() != shape.volume() {
        return Err(Error::mismatch(format!("{} tokens", shape.volume()), features.rows()));
    }
    let n = shape.volume();
    let mut data = vec![0.0f32; shape.len()];
    for site in 0..n {
        for (c, &v) in features.row(site).iter().enumerate() {
            data[c * n + site] = v;
        }
    }
    VideoLatent::new(shape, data)
}

/// Query, key and value projection matrices, each `d_model x d_model`.
#[derive(Debug, Clone, PartialEq)]
pub struct QkvWeights {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
}

impl QkvWeights {
    pub fn identity(d: usize) -> Result<Self> {
        let eye = Matrix::identity(d)?;
        Ok(Self {
            query: eye.clone(),
            key: eye.clone(),
            value: eye,
        })
    }

    /// Gaussian entries with std `1/sqrt(d)`, drawn query, key, value in turn.
    pub fn random(d: usize, rng: &mut SeededRng) -> Result<Self> {
        let std = 1.0 / (d as f64).sqrt();
        Ok(Self {
            query: Matrix::gaussian(d, d, std, rng)?,
            key: Matrix::gaussian(d, d, std, rng)?,
            value: Matrix::gaussian(d, d, std, rng)?,
        })
    }
}

/// Applies the three projections row-wise.
pub fn project_qkv(tokens: &TokenSequence, weights: &QkvWeights) -> Result<(Matrix, Matrix, Matrix)> {
    let d = tokens.d_model();
    for (name, m) in [("query", &weights.query), ("key", &weights.key), ("value", &weights.value)] {
        if m.rows() != d || m.cols() != d {
            return Err(Error::mismatch(
                format!("{name} weights {d}x{d}"),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
    }
    let x = tokens.features();
    Ok((x.matmul(&weights.query)?, x.matmul(&weights.key)?, x.matmul(&weights.value)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Local,
    Global,
    Sparse,
}

/// Temporal reach of one attention branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionWindow {
    pub span_frames: usize,
    pub kind: WindowKind,
}

impl AttentionWindow {
    /// Dense window of `span_frames`; global once it covers all `total_frames`.
    pub fn new(span_frames: usize, total_frames: usize) -> Result<Self> {
        if span_frames == 0 {
            return Err(Error::InvalidParameter("window span must be at least 1 frame".into()));
        }
        let kind = if span_frames >= total_frames {
            WindowKind::Global
        } else {
            WindowKind::Local
        };
        Ok(Self { span_frames, kind })
    }

    /// Window of `alpha * t_alpha` frames.
    pub fn scaled(alpha: u32, t_alpha: usize, total_frames: usize) -> Result<Self> {
        Self::new(alpha as usize * t_alpha, total_frames)
    }

    pub fn global(total_frames: usize) -> Self {
        Self {
            span_frames: total_frames.max(1),
            kind: WindowKind::Global,
        }
    }
}

/// Which key frames a query frame may see.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeySelection {
    All,
    /// `|i - j| < span / 2` (floor), plus `j == i` so no row is empty.
    Window { span_frames: usize },
    KeyFrames(Vec<usize>),
}

impl KeySelection {
    pub fn from_window(window: AttentionWindow) -> Result<Self> {
        match window.kind {
            WindowKind::Global => Ok(KeySelection::All),
            WindowKind::Local => Ok(KeySelection::Window {
                span_frames: window.span_frames,
            }),
            WindowKind::Sparse => Err(Error::InvalidParameter(
                "a sparse window needs an explicit key-frame set".into(),
            )),
        }
    }

    fn admits(&self, query_frame: usize, key_frame: usize, keyframe_flags: &[bool]) -> bool {
        match self {
            KeySelection::All => true,
            KeySelection::Window { span_frames } => {
                query_frame == key_frame || query_frame.abs_diff(key_frame) < span_frames / 2
            }
            KeySelection::KeyFrames(_) => keyframe_flags[key_frame],
        }
    }
}

/// Attention output plus the number of multiply-accumulates spent on keys
/// and values (`d_k` per admitted score, `d_v` per admitted value row).
#[derive(Debug, Clone, PartialEq)]
pub struct Attended {
    pub output: Matrix,
    pub macs: u64,
}

struct Plan {
    /// Admitted token ranges per query frame, ascending.
    ranges: Vec<Vec<(usize, usize)>>,
    scale: f64,
}

fn plan(q: &Matrix, k: &Matrix, v: &Matrix, frame_index: &[usize], selection: &KeySelection) -> Result<Plan> {
    let n = q.rows();
    if k.rows() != n || v.rows() != n || frame_index.len() != n {
        return Err(Error::mismatch(
            format!("{n} rows in Q, K, V and frame ids"),
            format!("K {}, V {}, frame ids {}", k.rows(), v.rows(), frame_index.len()),
        ));
    }
    if q.cols() != k.cols() {
        return Err(Error::mismatch(format!("key width {}", q.cols()), k.cols()));
    }
    if frame_index.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("frame ids must be non-decreasing".into()));
    }
    let frames = frame_index.last().map_or(0, |&f| f + 1);
    let mut bounds = vec![(usize::MAX, 0usize); frames];
    for (i, &f) in frame_index.iter().enumerate() {
        bounds[f].0 = bounds[f].0.min(i);
        bounds[f].1 = i + 1;
    }

    let mut flags = vec![false; frames];
    if let KeySelection::KeyFrames(set) = selection {
        if set.is_empty() {
            return Err(Error::InvalidParameter("empty key-frame set".into()));
        }
        for &f in set {
            if f >= frames {
                return Err(Error::InvalidParameter(format!(
                    "key frame {f} outside [0, {frames})"
                )));
            }
            flags[f] = true;
        }
    }
    if let KeySelection::Window { span_frames: 0 } = selection {
        return Err(Error::InvalidParameter("window span must be at least 1 frame".into()));
    }

    let ranges = (0..frames)
        .map(|qf| {
            (0..frames)
                .filter(|&kf| bounds[kf].0 != usize::MAX && selection.admits(qf, kf, &flags))
                .map(|kf| bounds[kf])
                .collect()
        })
        .collect();
    Ok(Plan {
        ranges,
        scale: 1.0 / (q.cols() as f64).sqrt(),
    })
}

/// Softmax weights of one query row over its admitted keys, in key order.
fn row_weights(q: &Matrix, k: &Matrix, i: usize, ranges: &[(usize, usize)], scale: f64) -> Vec<(usize, f64)> {
    let qi = q.row(i);
    let mut scored: Vec<(usize, f64)> = ranges
        .iter()
        .flat_map(|&(a, b)| a..b)
        .map(|j| {
            let dot: f64 = qi
                .iter()
                .zip(k.row(j))
                .map(|(&x, &y)| x as f64 * y as f64)
                .sum();
            (j, dot * scale)
        })
        .collect();
    let max = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scored.iter_mut() {
        s.1 = (s.1 - max).exp();
        total += s.1;
    }
    for s in scored.iter_mut() {
        s.1 /= total;
    }
    scored
}

/// General masked attention; the named variants below wrap this.
pub fn attend(q: &Matrix, k: &Matrix, v: &Matrix, frame_index: &[usize], selection: &KeySelection) -> Result<Attended> {
    let plan = plan(q, k, v, frame_index, selection)?;
    let dv = v.cols();
    let mut out = vec![0.0f32; q.rows() * dv];
    out.par_chunks_mut(dv).enumerate().for_each(|(i, row)| {
        let weights = row_weights(q, k, i, &plan.ranges[frame_index[i]], plan.scale);
        let mut acc = vec![0.0f64; dv];
        for (j, w) in weights {
            for (a, &x) in acc.iter_mut().zip(v.row(j)) {
                *a += w * x as f64;
            }
        }
        for (o, a) in row.iter_mut().zip(acc) {
            *o = a as f32;
        }
    });
    let per_key = (k.cols() + dv) as u64;
    let macs = frame_index
        .iter()
        .map(|&f| plan.ranges[f].iter().map(|(a, b)| (b - a) as u64).sum::<u64>() * per_key)
        .sum();
    Ok(Attended {
        output: Matrix::new(q.rows(), dv, out)?,
        macs,
    })
}

/// Dense `n x n` attention weights (zeros where masked), row-major.
pub fn attention_weights(q: &Matrix, k: &Matrix, frame_index: &[usize], selection: &KeySelection) -> Result<Vec<f64>> {
    let plan = plan(q, k, k, frame_index, selection)?;
    let n = q.rows();
    let mut out = vec![0.0f64; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, w) in row_weights(q, k, i, &plan.ranges[frame_index[i]], plan.scale) {
            row[j] = w;
        }
    });
    Ok(out)
}

pub fn global_attention(q: &Matrix, k: &Matrix, v: &Matrix, frame_index: &[usize]) -> Result<Matrix> {
    Ok(attend(q, k, v, frame_index, &KeySelection::All)?.output)
}

/// Attention restricted to key frames within the window of each query frame.
pub fn masked_attention(q: &Matrix, k: &Matrix, v: &Matrix, frame_index: &[usize], window: AttentionWindow) -> Result<Matrix> {
    Ok(attend(q, k, v, frame_index, &KeySelection::from_window(window)?)?.output)
}

/// Attention whose keys come only from `keyframes`.
pub fn sparse_attention(q: &Matrix, k: &Matrix, v: &Matrix, frame_index: &[usize], keyframes: &[usize]) -> Result<Matrix> {
    Ok(attend(q, k, v, frame_index, &KeySelection::KeyFrames(keyframes.to_vec()))?.output)
}

/// `ceil(fraction * frames)` evenly spaced frame ids starting at 0:
/// the i-th id is `ceil(i * frames / count)`.
pub fn uniform_keyframes(frames: usize, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "key-frame fraction {fraction} must lie in (0, 1]"
        )));
    }
    if frames == 0 {
        return Err(Error::InvalidParameter("no frames to sample".into()));
    }
    let count = ((fraction * frames as f64).ceil() as usize).clamp(1, frames);
    Ok((0..count).map(|i| (i * frames).div_ceil(count)).collect())
}
