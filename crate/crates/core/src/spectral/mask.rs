use std::f64::consts::PI;

use super::{band_index, frequency_map, DomainMode};
use crate::error::{Error, Result};
use crate::tensor::{Grid3, SpectralTensor};

/// Real weights in `[0, 1]` over the (T, H, W) frequency grid, broadcast over channels.
///
/// Weights are symmetric under joint frequency negation, `m(k) == m(-k mod N)`,
/// so masking the spectrum of a real signal keeps it real.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMask {
    grid: Grid3,
    mode: DomainMode,
    weights: Vec<f64>,
}

impl FrequencyMask {
    pub fn from_weights(grid: Grid3, mode: DomainMode, weights: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if weights.len() != grid.len() {
            return Err(Error::mismatch(
                format!("{} weights for grid {grid}", grid.len()),
                weights.len(),
            ));
        }
        if let Some(i) = weights
            .iter()
            .position(|w| !w.is_finite() || *w < 0.0 || *w > 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "mask weight {} at bin {i} outside [0, 1]",
                weights[i]
            )));
        }
        let mask = Self {
            grid,
            mode,
            weights,
        };
        if let Some(i) = mask.asymmetric_bin() {
            return Err(Error::InvalidParameter(format!(
                "mask is not symmetric under frequency negation at bin {i}"
            )));
        }
        Ok(mask)
    }

    pub fn ones(grid: Grid3, mode: DomainMode) -> Result<Self> {
        Self::from_weights(grid, mode, vec![1.0; grid.len()])
    }

    pub fn zeros(grid: Grid3, mode: DomainMode) -> Result<Self> {
        Self::from_weights(grid, mode, vec![0.0; grid.len()])
    }

    /// `1 - m`, the high-pass partner of a low-pass mask.
    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            mode: self.mode,
            weights: self.weights.iter().map(|w| 1.0 - w).collect(),
        }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn mode(&self) -> DomainMode {
        self.mode
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, t: usize, h: usize, w: usize) -> f64 {
        self.weights[self.grid.index(t, h, w)]
    }

    fn asymmetric_bin(&self) -> Option<usize> {
        let g = self.grid;
        let neg = |k: usize, n: usize| (n - k) % n;
        for t in 0..g.frames {
            for h in 0..g.height {
                for w in 0..g.width {
                    let a = self.get(t, h, w);
                    let b = self.get(neg(t, g.frames), neg(h, g.height), neg(w, g.width));
                    if a != b {
                        return Some(g.index(t, h, w));
                    }
                }
            }
        }
        None
    }
}

/// Gaussian low-pass `exp(-d^2 / (2 d0^2))`, with `d` the bin's normalized
/// frequency distance under `mode`.
pub fn gaussian_lowpass(grid: Grid3, d0: f64, mode: DomainMode) -> Result<FrequencyMask> {
    grid.validate()?;
    if !(d0 > 0.0 && d0 <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stop frequency d0 = {d0} must lie in (0, 1]"
        )));
    }
    let weights = frequency_map(grid, mode)
        .into_iter()
        .map(|d| (-(d * d) / (2.0 * d0 * d0)).exp())
        .collect();
    Ok(FrequencyMask {
        grid,
        mode,
        weights,
    })
}

/// Frequency band owned by the branch with scale `alpha`, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub alpha: u32,
    pub lo: f64,
    pub hi: f64,
}

fn validate_alphas(alphas: &[u32]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("empty alpha list".into()));
    }
    if alphas[0] < 1 {
        return Err(Error::InvalidParameter("alpha must be at least 1".into()));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "alphas {alphas:?} must be strictly ascending"
        )));
    }
    Ok(())
}

/// Bands for an ascending scale list, returned in the same order as `alphas`.
///
/// A branch with window `alpha * T_alpha` resolves frequencies up to
/// `pi / (2 alpha)`. The coarsest scale keeps `[0, pi/(2 alpha_max)]`, each
/// intermediate scale keeps the slice between its edge and the next coarser
/// one, and the finest scale keeps everything above up to `pi`.
pub fn band_specs(alphas: &[u32]) -> Result<Vec<BandSpec>> {
    validate_alphas(alphas)?;
    let edge = |a: u32| PI / (2.0 * a as f64);
    let last = alphas.len() - 1;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| BandSpec {
            alpha,
            lo: if i == last { 0.0 } else { edge(alphas[i + 1]) },
            hi: if i == 0 { PI } else { edge(alpha) },
        })
        .collect())
}

/// Hard indicator masks for [`band_specs`], one per alpha, summing to one at every bin.
pub fn band_masks(alphas: &[u32], grid: Grid3, mode: DomainMode) -> Result<Vec<FrequencyMask>> {
    let specs = band_specs(alphas)?;
    grid.validate()?;
    // Ascending interior edges in units of pi: 1/(2 a_L), ..., 1/(2 a_2).
    let edges: Vec<f64> = alphas[1..]
        .iter()
        .rev()
        .map(|&a| 1.0 / (2.0 * a as f64))
        .collect();
    let owners: Vec<usize> = frequency_map(grid, mode)
        .into_iter()
        .map(|f| alphas.len() - 1 - band_index(f, &edges))
        .collect();
    Ok((0..specs.len())
        .map(|l| FrequencyMask {
            grid,
            mode,
            weights: owners
                .iter()
                .map(|&o| if o == l { 1.0 } else { 0.0 })
                .collect(),
        })
        .collect())
}

/// Largest `|sum_l m_l(k) - 1|` over all bins.
pub fn partition_defect(masks: &[FrequencyMask]) -> Result<f64> {
    let first = masks
        .first()
        .ok_or_else(|| Error::InvalidParameter("no masks".into()))?;
    let grid = first.grid;
    if let Some(m) = masks.iter().find(|m| m.grid != grid) {
        return Err(Error::mismatch(grid, m.grid));
    }
    Ok((0..grid.len())
        .map(|k| (masks.iter().map(|m| m.weights[k]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max))
}

/// Elementwise product of a spectrum and a mask, broadcast over channels.
pub fn apply_mask(spectrum: &SpectralTensor, mask: &FrequencyMask) -> Result<SpectralTensor> {
    let shape = spectrum.shape();
    if shape.grid() != mask.grid {
        return Err(Error::mismatch(shape.grid(), mask.grid));
    }
    let vol = shape.volume();
    let data = spectrum
        .data()
        .iter()
        .enumerate()
        .map(|(i, z)| z * mask.weights[i % vol])
        .collect();
    SpectralTensor::new(shape, data)
}
