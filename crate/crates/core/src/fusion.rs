//! Two-branch spectral blending and L-branch multi-band spectral fusion.
//!
//! Every branch attends with the same projected Q, K, V and differs only in its
//! key mask. Branch outputs are reshaped to (C = d_model, T, H, W) latents,
//! filtered in the 3D spectrum and summed. Fusion acts on the raw attention
//! output; any output projection is left to the caller.

use std::fmt::Write as _;

use crate::attention::{
    attend, features_to_latent, project_qkv, uniform_keyframes, AttentionWindow, KeySelection,
    Matrix, QkvWeights, TokenSequence,
};
use crate::config::{once, parse_entries};
use crate::error::{Error, Result};
use crate::spectral::{
    band_masks, band_specs, fft3, gaussian_lowpass, ifft3, partition_defect, DomainMode,
    FrequencyMask,
};
use crate::tensor::{Grid3, SpectralTensor, VideoLatent};

pub const DEFAULT_D0: f64 = 0.25;
pub const DEFAULT_ALPHAS: [u32; 3] = [1, 2, 4];
pub const EIGHT_X_ALPHAS: [u32; 4] = [1, 2, 4, 8];
pub const SPARSE_KEY_FRACTION: f64 = 0.5;
const PARTITION_TOLERANCE: f64 = 1e-6;

/// One attention branch and the frequency band it contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchConfig {
    pub alpha: u32,
    pub sparse: bool,
    pub mask: FrequencyMask,
}

/// Scale list and filter settings shared by every fusion call.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionPlan {
    pub t_alpha: usize,
    pub alphas: Vec<u32>,
    /// Largest-alpha branch attends to uniformly sampled key frames only.
    pub sparse_global: bool,
    /// Frequency distance used by the band-pass masks.
    pub domain_mode: DomainMode,
    /// Stop frequency of the two-branch Gaussian low-pass.
    pub d0: f64,
    /// Frequency distance used by the two-branch low-pass.
    pub lowpass_mode: DomainMode,
}

impl FusionPlan {
    pub fn new(t_alpha: usize, alphas: Vec<u32>) -> Result<Self> {
        let plan = Self {
            t_alpha,
            alphas,
            sparse_global: false,
            domain_mode: DomainMode::Temporal,
            d0: DEFAULT_D0,
            lowpass_mode: DomainMode::Radial,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `{1, 2, 4}`, used for 4x the native length.
    pub fn four_x(t_alpha: usize) -> Result<Self> {
        Self::new(t_alpha, DEFAULT_ALPHAS.to_vec())
    }

    /// `{1, 2, 4, 8}`, used for 8x the native length.
    pub fn eight_x(t_alpha: usize) -> Result<Self> {
        Self::new(t_alpha, EIGHT_X_ALPHAS.to_vec())
    }

    pub fn with_sparse_global(mut self, sparse: bool) -> Self {
        self.sparse_global = sparse;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_alpha == 0 {
            return Err(Error::InvalidPlan("t_alpha must be at least 1".into()));
        }
        band_specs(&self.alphas).map_err(|e| Error::InvalidPlan(e.to_string()))?;
        if !(self.d0 > 0.0 && self.d0 <= 1.0) {
            return Err(Error::InvalidPlan(format!("d0 = {} outside (0, 1]", self.d0)));
        }
        Ok(())
    }

    pub fn max_alpha(&self) -> u32 {
        *self.alphas.last().expect("validated plan has alphas")
    }

    /// Errors when the widest window cannot cover `frames`.
    pub fn check_frames(&self, frames: usize) -> Result<()> {
        if (self.max_alpha() as usize) * self.t_alpha < frames {
            return Err(Error::InvalidPlan(format!(
                "widest window {} x {} frames is shorter than the {frames}-frame sequence",
                self.max_alpha(),
                self.t_alpha
            )));
        }
        Ok(())
    }

    /// Branches in ascending alpha order with their band-pass masks.
    pub fn branches(&self, grid: Grid3) -> Result<Vec<BranchConfig>> {
        self.validate()?;
        let masks = band_masks(&self.alphas, grid, self.domain_mode)?;
        let last = self.alphas.len() - 1;
        Ok(self
            .alphas
            .iter()
            .zip(masks)
            .enumerate()
            .map(|(i, (&alpha, mask))| BranchConfig {
                alpha,
                sparse: self.sparse_global && i == last,
                mask,
            })
            .collect())
    }

    pub fn lowpass(&self, grid: Grid3) -> Result<FrequencyMask> {
        gaussian_lowpass(grid, self.d0, self.lowpass_mode)
    }

    /// Parses the `key = value` dialect. `t_alpha` is required; the rest
    /// default to alphas `1,2,4`, no sparse branch, temporal bands,
    /// `d0 = 0.25` and a radial low-pass.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let (mut t_alpha, mut alphas, mut sparse, mut mode, mut d0, mut lp_mode) =
            (None, None, None, None, None, None);
        for e in parse_entries(text)? {
            match e.key.as_str() {
                "t_alpha" => once(&mut t_alpha, &e, e.parse::<usize>()?)?,
                "alphas" => once(&mut alphas, &e, e.parse_list::<u32>()?)?,
                "sparse_global" => once(&mut sparse, &e, e.parse_bool()?)?,
                "domain_mode" => once(&mut mode, &e, e.parse::<DomainMode>()?)?,
                "d0" => once(&mut d0, &e, e.parse::<f64>()?)?,
                "lowpass_mode" => once(&mut lp_mode, &e, e.parse::<DomainMode>()?)?,
                _ => return Err(e.error("unknown key")),
            }
        }
        let plan = Self {
            t_alpha: t_alpha.ok_or_else(|| Error::Config {
                line: 0,
                message: "missing required key t_alpha".into(),
            })?,
            alphas: alphas.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
            sparse_global: sparse.unwrap_or(false),
            domain_mode: mode.unwrap_or(DomainMode::Temporal),
            d0: d0.unwrap_or(DEFAULT_D0),
            lowpass_mode: lp_mode.unwrap_or(DomainMode::Radial),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_config_string(&self) -> String {
        let alphas: Vec<String> = self.alphas.iter().map(u32::to_string).collect();
        let mut s = String::new();
        writeln!(s, "t_alpha = {}", self.t_alpha).unwrap();
        writeln!(s, "alphas = {}", alphas.join(",")).unwrap();
        writeln!(s, "sparse_global = {}", self.sparse_global).unwrap();
        writeln!(s, "domain_mode = {}", self.domain_mode).unwrap();
        writeln!(s, "d0 = {}", self.d0).unwrap();
        writeln!(s, "lowpass_mode = {}", self.lowpass_mode).unwrap();
        s
    }
}

/// Low band of `global` plus the complementary high band of `local`.
pub fn spectral_blend(global: &VideoLatent, local: &VideoLatent, lpf: &FrequencyMask) -> Result<VideoLatent> {
    if global.shape() != local.shape() {
        return Err(Error::mismatch(global.shape(), local.shape()));
    }
    if global.shape().grid() != lpf.grid() {
        return Err(Error::mismatch(global.shape().grid(), lpf.grid()));
    }
    let g = fft3(global);
    let l = fft3(local);
    let vol = global.shape().volume();
    let p = lpf.weights();
    let data = g
        .data()
        .iter()
        .zip(l.data())
        .enumerate()
        .map(|(i, (zg, zl))| zg * p[i % vol] + zl * (1.0 - p[i % vol]))
        .collect();
    ifft3(&SpectralTensor::new(global.shape(), data)?)
}

/// `sum_l mask_l * F(branch_l)`, before the inverse transform.
pub fn fuse_spectra(branches: &[VideoLatent], masks: &[FrequencyMask]) -> Result<SpectralTensor> {
    if branches.is_empty() || branches.len() != masks.len() {
        return Err(Error::InvalidPlan(format!(
            "{} branch outputs for {} masks",
            branches.len(),
            masks.len()
        )));
    }
    let shape = branches[0].shape();
    if let Some(b) = branches.iter().find(|b| b.shape() != shape) {
        return Err(Error::mismatch(shape, b.shape()));
    }
    if let Some(m) = masks.iter().find(|m| m.grid() != shape.grid()) {
        return Err(Error::mismatch(shape.grid(), m.grid()));
    }
    let defect = partition_defect(masks)?;
    if defect > PARTITION_TOLERANCE {
        return Err(Error::InvalidPlan(format!(
            "masks miss a partition of unity by {defect:e}"
        )));
    }
    let vol = shape.volume();
    let mut acc = SpectralTensor::zeros(shape)?;
    for (branch, mask) in branches.iter().zip(masks) {
        let spec = fft3(branch);
        let w = mask.weights();
        for (i, (a, z)) in acc.data_mut().iter_mut().zip(spec.data()).enumerate() {
            *a += z * w[i % vol];
        }
    }
    Ok(acc)
}

pub fn multiband_fuse(branches: &[VideoLatent], masks: &[FrequencyMask]) -> Result<VideoLatent> {
    ifft3(&fuse_spectra(branches, masks)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutput {
    pub alpha: u32,
    pub sparse: bool,
    pub latent: VideoLatent,
    /// Key/value multiply-accumulates spent by this branch.
    pub macs: u64,
}

/// Everything a fusion call produced, for inspection and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrace {
    pub branches: Vec<BranchOutput>,
    pub fused_spectrum: SpectralTensor,
    pub output: TokenSequence,
}

fn branch_selection(alpha: u32, sparse: bool, t_alpha: usize, frames: usize) -> Result<KeySelection> {
    if sparse {
        Ok(KeySelection::KeyFrames(uniform_keyframes(frames, SPARSE_KEY_FRACTION)?))
    } else {
        KeySelection::from_window(AttentionWindow::scaled(alpha, t_alpha, frames)?)
    }
}

fn run_branch(tokens: &TokenSequence, qkv: &(Matrix, Matrix, Matrix), alpha: u32, sparse: bool, selection: &KeySelection) -> Result<BranchOutput> {
    let (q, k, v) = qkv;
    let attended = attend(q, k, v, tokens.frame_index(), selection)?;
    Ok(BranchOutput {
        alpha,
        sparse,
        latent: features_to_latent(&attended.output, tokens.frames(), tokens.height(), tokens.width())?,
        macs: attended.macs,
    })
}

fn finish(tokens: &TokenSequence, branches: Vec<BranchOutput>, masks: &[FrequencyMask]) -> Result<FusionTrace> {
    let latents: Vec<VideoLatent> = branches.iter().map(|b| b.latent.clone()).collect();
    let fused_spectrum = fuse_spectra(&latents, masks)?;
    let fused = ifft3(&fused_spectrum)?;
    let output = TokenSequence::from_latent(&fused);
    debug_assert_eq!(output.frame_index(), tokens.frame_index());
    Ok(FusionTrace {
        branches,
        fused_spectrum,
        output,
    })
}

/// L-branch attention with caller-supplied branch masks.
///
/// Sparse branches use half of the frames, uniformly spaced, as keys and
/// must be the largest alpha.
pub fn multiscale_attention(tokens: &TokenSequence, weights: &QkvWeights, t_alpha: usize, branches: &[BranchConfig]) -> Result<FusionTrace> {
    if t_alpha == 0 {
        return Err(Error::InvalidPlan("t_alpha must be at least 1".into()));
    }
    let alphas: Vec<u32> = branches.iter().map(|b| b.alpha).collect();
    band_specs(&alphas).map_err(|e| Error::InvalidPlan(e.to_string()))?;
    let max = *alphas.last().unwrap();
    if branches.iter().any(|b| b.sparse && b.alpha != max) {
        return Err(Error::InvalidPlan("only the largest-alpha branch may be sparse".into()));
    }
    let qkv = project_qkv(tokens, weights)?;
    let frames = tokens.frames();
    let outputs = branches
        .iter()
        .map(|b| {
            let sel = branch_selection(b.alpha, b.sparse, t_alpha, frames)?;
            run_branch(tokens, &qkv, b.alpha, b.sparse, &sel)
        })
        .collect::<Result<Vec<_>>>()?;
    let masks: Vec<FrequencyMask> = branches.iter().map(|b| b.mask.clone()).collect();
    finish(tokens, outputs, &masks)
}

pub fn multiband_trace(tokens: &TokenSequence, weights: &QkvWeights, plan: &FusionPlan) -> Result<FusionTrace> {
    plan.validate()?;
    plan.check_frames(tokens.frames())?;
    let grid = Grid3::new(tokens.frames(), tokens.height(), tokens.width());
    multiscale_attention(tokens, weights, plan.t_alpha, &plan.branches(grid)?)
}

/// Multi-band spectral fusion attention over the plan's branches.
pub fn multiband_attention(tokens: &TokenSequence, weights: &QkvWeights, plan: &FusionPlan) -> Result<TokenSequence> {
    Ok(multiband_trace(tokens, weights, plan)?.output)
}

/// Local window of `local_alpha * t_alpha` frames plus fully global attention,
/// blended through `lpf` (global keeps `lpf`, local keeps `1 - lpf`).
/// Branches appear in the trace as `[local, global]`.
pub fn two_branch_trace(tokens: &TokenSequence, weights: &QkvWeights, local_alpha: u32, t_alpha: usize, lpf: &FrequencyMask) -> Result<FusionTrace> {
    if t_alpha == 0 || local_alpha == 0 {
        return Err(Error::InvalidPlan("t_alpha and alpha must be at least 1".into()));
    }
    let grid = Grid3::new(tokens.frames(), tokens.height(), tokens.width());
    if lpf.grid() != grid {
        return Err(Error::mismatch(grid, lpf.grid()));
    }
    let qkv = project_qkv(tokens, weights)?;
    let local_sel = KeySelection::from_window(AttentionWindow::scaled(local_alpha, t_alpha, tokens.frames())?)?;
    let local = run_branch(tokens, &qkv, local_alpha, false, &local_sel)?;
    let global_alpha = tokens.frames().div_ceil(t_alpha).max(1) as u32;
    let global = run_branch(tokens, &qkv, global_alpha, false, &KeySelection::All)?;
    let blended = spectral_blend(&global.latent, &local.latent, lpf)?;
    let fused_spectrum = fft3(&blended);
    Ok(FusionTrace {
        branches: vec![local, global],
        fused_spectrum,
        output: TokenSequence::from_latent(&blended),
    })
}

/// [`two_branch_trace`] driven by a plan listing exactly two alphas; the first
/// sets the local window and the plan's low-pass does the blending.
pub fn two_branch_plan_trace(tokens: &TokenSequence, weights: &QkvWeights, plan: &FusionPlan) -> Result<FusionTrace> {
    plan.validate()?;
    if plan.alphas.len() != 2 {
        return Err(Error::InvalidPlan(format!(
            "two-branch blending needs exactly two alphas, plan has {:?}",
            plan.alphas
        )));
    }
    plan.check_frames(tokens.frames())?;
    let grid = Grid3::new(tokens.frames(), tokens.height(), tokens.width());
    let lpf = plan.lowpass(grid)?;
    two_branch_trace(tokens, weights, plan.alphas[0], plan.t_alpha, &lpf)
}

/// Two-branch local/global attention with the plan's Gaussian low-pass.
pub fn two_branch_attention(tokens: &TokenSequence, weights: &QkvWeights, plan: &FusionPlan) -> Result<TokenSequence> {
    Ok(two_branch_plan_trace(tokens, weights, plan)?.output)
}
