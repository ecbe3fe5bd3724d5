//! Dense 4-axis tensors in (channels, frames, height, width) order.
//!
//! Real tensors store `f32`; spectra store `Complex<f64>` so that transforms
//! and reductions accumulate in double precision.

mod io;
mod rng;

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use io::{decode_tensor, encode_tensor, read_tensor, write_tensor, FORMAT_VERSION, MAGIC};
pub use rng::SeededRng;

/// Axis extents of a (C, T, H, W) tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape4 {
    pub const fn new(channels: usize, frames: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            frames,
            height,
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.frames == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidShape(format!("zero-sized axis in {self}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels * self.frames * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one channel, `T * H * W`.
    pub fn volume(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn grid(&self) -> Grid3 {
        Grid3::new(self.frames, self.height, self.width)
    }

    #[inline]
    pub fn index(&self, c: usize, t: usize, h: usize, w: usize) -> usize {
        ((c * self.frames + t) * self.height + h) * self.width + w
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.channels, self.frames, self.height, self.width
        )
    }
}

/// The (T, H, W) frequency grid shared by every channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid3 {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Grid3 {
    pub const fn new(frames: usize, height: usize, width: usize) -> Self {
        Self {
            frames,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidShape(format!("zero-sized axis in grid {self}")));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, t: usize, h: usize, w: usize) -> usize {
        (t * self.height + h) * self.width + w
    }
}

impl fmt::Display for Grid3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.frames, self.height, self.width)
    }
}

/// Real-valued video features or noise. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoLatent {
    shape: Shape4,
    data: Vec<f32>,
}

impl VideoLatent {
    /// Validates the shape, the element count and finiteness.
    pub fn new(shape: Shape4, data: Vec<f32>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::mismatch(
                format!("{} elements for {shape}", shape.len()),
                data.len(),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape4) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            data: vec![0.0; shape.len()],
        })
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Result<Self> {
        shape.validate()?;
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for t in 0..shape.frames {
                for h in 0..shape.height {
                    for w in 0..shape.width {
                        data.push(f(c, t, h, w));
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.index(c, t, h, w)]
    }

    /// Contiguous `H * W` slice of channel `c` at frame `t`.
    pub fn frame(&self, c: usize, t: usize) -> &[f32] {
        let plane = self.shape.height * self.shape.width;
        let start = self.shape.index(c, t, 0, 0);
        &self.data[start..start + plane]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let vol = self.shape.volume();
        &self.data[c * vol..(c + 1) * vol]
    }

    /// Sum of squares, accumulated in f64.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }

    pub fn max_abs_diff(&self, other: &VideoLatent) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::mismatch(self.shape, other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .fold(0.0, f64::max))
    }

    pub fn scaled(&self, factor: f32) -> Result<VideoLatent> {
        Self::new(self.shape, self.data.iter().map(|v| v * factor).collect())
    }
}

/// Full complex spectrum of a [`VideoLatent`] (no half-spectrum packing).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    shape: Shape4,
    data: Vec<Complex64>,
}

impl SpectralTensor {
    pub fn new(shape: Shape4, data: Vec<Complex64>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::mismatch(
                format!("{} elements for {shape}", shape.len()),
                data.len(),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape4) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.len()],
        })
    }

    pub fn from_real(latent: &VideoLatent) -> Self {
        Self {
            shape: latent.shape(),
            data: latent
                .data()
                .iter()
                .map(|&v| Complex64::new(v as f64, 0.0))
                .collect(),
        }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, h: usize, w: usize) -> Complex64 {
        self.data[self.shape.index(c, t, h, w)]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Drops imaginary parts and rounds to f32 storage.
    pub fn real_part(&self) -> Result<VideoLatent> {
        VideoLatent::new(self.shape, self.data.iter().map(|z| z.re as f32).collect())
    }
}

/// I.i.d. standard-normal latent drawn from `rng`, in row-major order.
pub fn gaussian_latent(shape: Shape4, rng: &mut SeededRng) -> Result<VideoLatent> {
    shape.validate()?;
    let data = (0..shape.len()).map(|_| rng.normal() as f32).collect();
    VideoLatent::new(shape, data)
}
