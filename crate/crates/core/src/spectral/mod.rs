//! Orthonormal 3D Fourier transforms over (T, H, W) and frequency masks.
//!
//! Every channel is transformed independently. Both directions scale by
//! `1/sqrt(T*H*W)`, so `sum |x|^2 == sum |X|^2`.
//!
//! Frequencies are reported in units of pi: bin `k` of an axis with `n`
//! samples sits at `2 * min(k, n - k) / n`, which lies in `[0, 1]`.

mod mask;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{Grid3, SpectralTensor, VideoLatent};

pub use mask::{
    apply_mask, band_masks, band_specs, gaussian_lowpass, partition_defect, BandSpec,
    FrequencyMask,
};

/// Which frequency distance a mask or band split is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DomainMode {
    /// `|f_t|` only; spatial frequencies are ignored.
    #[default]
    Temporal,
    /// Euclidean norm of the three per-axis normalized frequencies, clamped to 1.
    Radial,
}

impl fmt::Display for DomainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainMode::Temporal => "temporal",
            DomainMode::Radial => "radial",
        })
    }
}

impl FromStr for DomainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "temporal" => Ok(DomainMode::Temporal),
            "radial" => Ok(DomainMode::Radial),
            other => Err(Error::InvalidParameter(format!(
                "unknown domain mode {other:?} (expected temporal or radial)"
            ))),
        }
    }
}

/// Axes covered by a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformAxes {
    /// (T, H, W)
    SpaceTime,
    /// (H, W); frames stay in the time domain.
    Space,
}

impl TransformAxes {
    fn axes(self) -> &'static [usize] {
        match self {
            TransformAxes::SpaceTime => &[0, 1, 2],
            TransformAxes::Space => &[1, 2],
        }
    }
}

/// Normalized frequency of bin `k` on an axis of length `n`, in units of pi.
#[inline]
pub fn normalized_frequency(k: usize, n: usize) -> f64 {
    2.0 * k.min(n - k) as f64 / n as f64
}

/// Distance of bin (t, h, w) from DC under `mode`, in units of pi, within `[0, 1]`.
pub fn bin_frequency(grid: Grid3, t: usize, h: usize, w: usize, mode: DomainMode) -> f64 {
    let ft = normalized_frequency(t, grid.frames);
    match mode {
        DomainMode::Temporal => ft,
        DomainMode::Radial => {
            let fh = normalized_frequency(h, grid.height);
            let fw = normalized_frequency(w, grid.width);
            (ft * ft + fh * fh + fw * fw).sqrt().min(1.0)
        }
    }
}

/// Frequency of every bin of `grid` in row-major (T, H, W) order.
pub fn frequency_map(grid: Grid3, mode: DomainMode) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    for t in 0..grid.frames {
        for h in 0..grid.height {
            for w in 0..grid.width {
                out.push(bin_frequency(grid, t, h, w, mode));
            }
        }
    }
    out
}

/// Tolerance used when a frequency sits on a band edge.
pub(crate) const EDGE_TOLERANCE: f64 = 1e-9;

/// Index of the band containing `freq` given ascending interior edges.
///
/// Band 0 is `[0, e0]`, band i is `(e_{i-1}, e_i]`, the last band runs to 1.
/// A bin exactly on an edge belongs to the lower band.
pub fn band_index(freq: f64, interior_edges: &[f64]) -> usize {
    interior_edges
        .iter()
        .position(|&e| freq <= e + EDGE_TOLERANCE)
        .unwrap_or(interior_edges.len())
}

pub fn fft3(x: &VideoLatent) -> SpectralTensor {
    forward(x, TransformAxes::SpaceTime)
}

/// Inverse of [`fft3`], keeping the real part.
///
/// Masks built by this crate are conjugate symmetric, so the discarded
/// imaginary part is rounding noise for real inputs.
pub fn ifft3(spectrum: &SpectralTensor) -> Result<VideoLatent> {
    inverse(spectrum, TransformAxes::SpaceTime).real_part()
}

pub fn ifft3_complex(spectrum: &SpectralTensor) -> SpectralTensor {
    inverse(spectrum, TransformAxes::SpaceTime)
}

pub fn forward(x: &VideoLatent, axes: TransformAxes) -> SpectralTensor {
    let mut spec = SpectralTensor::from_real(x);
    transform(&mut spec, axes, FftDirection::Forward);
    spec
}

pub fn inverse(spectrum: &SpectralTensor, axes: TransformAxes) -> SpectralTensor {
    let mut out = spectrum.clone();
    transform(&mut out, axes, FftDirection::Inverse);
    out
}

fn transform(spec: &mut SpectralTensor, axes: TransformAxes, direction: FftDirection) {
    let shape = spec.shape();
    let dims = [shape.frames, shape.height, shape.width];
    let mut planner = FftPlanner::<f64>::new();
    let plans: Vec<(usize, Arc<dyn Fft<f64>>)> = axes
        .axes()
        .iter()
        .map(|&a| (a, planner.plan_fft(dims[a], direction)))
        .collect();
    let count: usize = axes.axes().iter().map(|&a| dims[a]).product();
    let scale = 1.0 / (count as f64).sqrt();

    spec.data_mut()
        .par_chunks_mut(shape.volume())
        .for_each(|volume| {
            for (axis, plan) in &plans {
                transform_axis(volume, dims, *axis, plan.as_ref());
            }
            for z in volume.iter_mut() {
                *z *= scale;
            }
        });
}

fn transform_axis(volume: &mut [Complex64], dims: [usize; 3], axis: usize, plan: &dyn Fft<f64>) {
    let n = dims[axis];
    if n == 1 {
        return;
    }
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];

    if inner == 1 {
        plan.process_with_scratch(volume, &mut scratch);
        return;
    }
    let mut line = vec![Complex64::default(); n];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..inner {
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = volume[base + k * inner + i];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for (k, v) in line.iter().enumerate() {
                volume[base + k * inner + i] = *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gaussian_latent, SeededRng, Shape4};
    use std::f64::consts::PI;

    /// Direct O(N^2)-per-axis DFT with orthonormal scaling.
    fn dft_oracle(x: &VideoLatent) -> Vec<Complex64> {
        let s = x.shape();
        let mut out = vec![Complex64::default(); s.len()];
        let norm = 1.0 / (s.volume() as f64).sqrt();
        for c in 0..s.channels {
            for kt in 0..s.frames {
                for kh in 0..s.height {
                    for kw in 0..s.width {
                        let mut acc = Complex64::default();
                        for t in 0..s.frames {
                            for h in 0..s.height {
                                for w in 0..s.width {
                                    let phase = -2.0
                                        * PI
                                        * ((kt * t) as f64 / s.frames as f64
                                            + (kh * h) as f64 / s.height as f64
                                            + (kw * w) as f64 / s.width as f64);
                                    acc += Complex64::from_polar(x.get(c, t, h, w) as f64, phase);
                                }
                            }
                        }
                        out[s.index(c, kt, kh, kw)] = acc * norm;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_dft() {
        let x = gaussian_latent(Shape4::new(2, 5, 3, 4), &mut SeededRng::new(5)).unwrap();
        let fast = fft3(&x);
        let slow = dft_oracle(&x);
        for (a, b) in fast.data().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval_random() {
        let x = gaussian_latent(Shape4::new(2, 8, 6, 6), &mut SeededRng::new(1)).unwrap();
        let ex = x.energy();
        let ek = fft3(&x).energy();
        assert!((ex - ek).abs() / ex <= 1e-5);
        // Oracle route for the same sums.
        let eo: f64 = dft_oracle(&x).iter().map(|z| z.norm_sqr()).sum();
        assert!((ex - eo).abs() / ex <= 1e-10);
    }

    #[test]
    fn dc_signal() {
        let x = VideoLatent::new(Shape4::new(1, 4, 4, 4), vec![1.0; 64]).unwrap();
        let spec = fft3(&x);
        let dc = spec.get(0, 0, 0, 0);
        assert!((dc.re - 8.0).abs() < 1e-12);
        let rest: f64 = spec.data()[1..].iter().map(|z| z.norm_sqr()).sum();
        assert!(rest < 1e-20);
    }

    #[test]
    fn temporal_tone_lands_on_its_bins() {
        let (t_len, k) = (16, 3);
        let x = VideoLatent::from_fn(Shape4::new(1, t_len, 2, 2), |_, t, _, _| {
            (2.0 * PI * (k * t) as f64 / t_len as f64).cos() as f32
        })
        .unwrap();
        let spec = fft3(&x);
        let total = spec.energy();
        let on = spec.get(0, k, 0, 0).norm_sqr() + spec.get(0, t_len - k, 0, 0).norm_sqr();
        assert!((on - total).abs() / total < 1e-10);
    }

    #[test]
    fn roundtrip() {
        let x = gaussian_latent(Shape4::new(3, 7, 5, 6), &mut SeededRng::new(2)).unwrap();
        let y = ifft3(&fft3(&x)).unwrap();
        assert!(x.max_abs_diff(&y).unwrap() <= 1e-5);
        let s = forward(&x, TransformAxes::Space);
        let z = inverse(&s, TransformAxes::Space).real_part().unwrap();
        assert!(x.max_abs_diff(&z).unwrap() <= 1e-5);
    }

    #[test]
    fn spatial_transform_leaves_frames_apart() {
        // Each frame's 2D spectrum depends only on that frame.
        let x = gaussian_latent(Shape4::new(1, 3, 4, 4), &mut SeededRng::new(8)).unwrap();
        let full = forward(&x, TransformAxes::Space);
        let single = VideoLatent::new(Shape4::new(1, 1, 4, 4), x.frame(0, 1).to_vec()).unwrap();
        let one = forward(&single, TransformAxes::Space);
        for h in 0..4 {
            for w in 0..4 {
                assert!((full.get(0, 1, h, w) - one.get(0, 0, h, w)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_frequencies() {
        assert_eq!(normalized_frequency(0, 8), 0.0);
        assert_eq!(normalized_frequency(4, 8), 1.0);
        assert_eq!(normalized_frequency(1, 8), 0.25);
        assert_eq!(normalized_frequency(7, 8), 0.25);
        assert_eq!(normalized_frequency(0, 1), 0.0);
    }

    #[test]
    fn edge_ties_go_down() {
        assert_eq!(band_index(0.25, &[0.25]), 0);
        assert_eq!(band_index(0.2500001, &[0.25]), 1);
        assert_eq!(band_index(0.0, &[0.125, 0.25]), 0);
        assert_eq!(band_index(1.0, &[0.125, 0.25]), 2);
    }

    #[test]
    fn domain_mode_parse() {
        assert_eq!("radial".parse::<DomainMode>().unwrap(), DomainMode::Radial);
        assert_eq!(DomainMode::Temporal.to_string(), "temporal");
        assert!("x".parse::<DomainMode>().is_err());
    }
}
