//! SpecMix noise initialization.
//!
//! A consistency base noise is built by repeating the first `t_alpha` frames
//! of Gaussian noise in shuffled order across later windows. Fresh residual
//! noise is drawn per frame. Each frame's spectrum is the `cos/sin` blend of
//! the two, with the angle growing from 0 at the sequence centre to `pi/2` at
//! both ends.
//!
//! Random streams: base noise uses `(seed_base, stream 1)`, residual noise
//! `(seed_res, stream 2)` and window permutations `(seed_perm, stream 3)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::{forward, inverse, TransformAxes};
use crate::tensor::{gaussian_latent, SeededRng, Shape4, SpectralTensor, VideoLatent};

const STREAM_BASE: u64 = 1;
const STREAM_RES: u64 = 2;
const STREAM_PERM: u64 = 3;

/// Where the per-frame mixing happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixDomain {
    /// 2D spectra over (H, W); index `t` is a frame.
    #[default]
    Spatial,
    /// 3D spectra over (T, H, W); index `t` is a temporal-frequency bin.
    /// The result is generally not real, so the imaginary part is dropped.
    SpaceTime,
}

impl fmt::Display for MixDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixDomain::Spatial => "spatial",
            MixDomain::SpaceTime => "spacetime",
        })
    }
}

impl FromStr for MixDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(MixDomain::Spatial),
            "spacetime" => Ok(MixDomain::SpaceTime),
            other => Err(Error::InvalidParameter(format!(
                "unknown mix domain {other:?} (expected spatial or spacetime)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecMixParams {
    pub frames: usize,
    pub t_alpha: usize,
    pub seed_base: u64,
    pub seed_res: u64,
    pub seed_perm: u64,
    pub mix_domain: MixDomain,
}

impl SpecMixParams {
    /// All three seeds set to `seed`; the roles still draw from distinct streams.
    pub fn new(frames: usize, t_alpha: usize, seed: u64) -> Result<Self> {
        let p = Self {
            frames,
            t_alpha,
            seed_base: seed,
            seed_res: seed,
            seed_perm: seed,
            mix_domain: MixDomain::Spatial,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_alpha == 0 || self.frames < self.t_alpha {
            return Err(Error::InvalidParameter(format!(
                "need frames >= t_alpha >= 1, got frames = {}, t_alpha = {}",
                self.frames, self.t_alpha
            )));
        }
        Ok(())
    }
}

/// Channel and spatial extents of the generated noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl SpatialShape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    fn with_frames(self, frames: usize) -> Shape4 {
        Shape4::new(self.channels, frames, self.height, self.width)
    }
}

/// Source frame (within the first window) of every output frame.
pub fn base_frame_schedule(params: &SpecMixParams) -> Result<Vec<usize>> {
    params.validate()?;
    let ta = params.t_alpha;
    let mut rng = SeededRng::with_stream(params.seed_perm, STREAM_PERM);
    let mut schedule: Vec<usize> = (0..ta).collect();
    while schedule.len() < params.frames {
        let take = (params.frames - schedule.len()).min(ta);
        schedule.extend_from_slice(&rng.permutation(ta)[..take]);
    }
    Ok(schedule)
}

/// Gaussian first window, later windows are shuffled copies of it.
pub fn base_noise(params: &SpecMixParams, spatial: SpatialShape) -> Result<VideoLatent> {
    let schedule = base_frame_schedule(params)?;
    let mut rng = SeededRng::with_stream(params.seed_base, STREAM_BASE);
    let window = gaussian_latent(spatial.with_frames(params.t_alpha), &mut rng)?;
    let shape = spatial.with_frames(params.frames);
    let mut data = Vec::with_capacity(shape.len());
    for c in 0..shape.channels {
        for &src in &schedule {
            data.extend_from_slice(window.frame(c, src));
        }
    }
    VideoLatent::new(shape, data)
}

pub fn residual_noise(params: &SpecMixParams, spatial: SpatialShape) -> Result<VideoLatent> {
    params.validate()?;
    let mut rng = SeededRng::with_stream(params.seed_res, STREAM_RES);
    gaussian_latent(spatial.with_frames(params.frames), &mut rng)
}

/// `|t - (T-1)/2| / ((T-1)/2)`, or 0 for a single frame.
pub fn center_distance(t: usize, frames: usize) -> Result<f64> {
    if t >= frames {
        return Err(Error::InvalidParameter(format!(
            "frame {t} outside [0, {frames})"
        )));
    }
    if frames == 1 {
        return Ok(0.0);
    }
    let span = (frames - 1) as f64;
    Ok((2.0 * t as f64 - span).abs() / span)
}

pub fn mixing_angle(distance: f64) -> f64 {
    distance * FRAC_PI_2
}

/// `(cos theta, sin theta)` for frame `t`, exactly `(1, 0)` at the centre and
/// `(0, 1)` at the ends.
pub fn mixing_weights(t: usize, frames: usize) -> Result<(f64, f64)> {
    let d = center_distance(t, frames)?;
    Ok(if d == 0.0 {
        (1.0, 0.0)
    } else if d == 1.0 {
        (0.0, 1.0)
    } else {
        let theta = mixing_angle(d);
        (theta.cos(), theta.sin())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecMixOutput {
    pub base: VideoLatent,
    pub residual: VideoLatent,
    pub mixed: VideoLatent,
}

pub fn specmix_parts(params: &SpecMixParams, spatial: SpatialShape) -> Result<SpecMixOutput> {
    let base = base_noise(params, spatial)?;
    let residual = residual_noise(params, spatial)?;
    let axes = match params.mix_domain {
        MixDomain::Spatial => TransformAxes::Space,
        MixDomain::SpaceTime => TransformAxes::SpaceTime,
    };
    let fb = forward(&base, axes);
    let fr = forward(&residual, axes);
    let shape = base.shape();
    let weights: Vec<(f64, f64)> = (0..shape.frames)
        .map(|t| mixing_weights(t, shape.frames))
        .collect::<Result<_>>()?;
    let plane = shape.height * shape.width;
    let data = fb
        .data()
        .iter()
        .zip(fr.data())
        .enumerate()
        .map(|(i, (b, r))| {
            let (cb, cr) = weights[(i / plane) % shape.frames];
            b * cb + r * cr
        })
        .collect();
    let mut mixed = inverse(&SpectralTensor::new(shape, data)?, axes).real_part()?.into_data();
    if params.mix_domain == MixDomain::Spatial {
        // Pure frames are copied so they match their source bit for bit.
        for (t, &w) in weights.iter().enumerate() {
            let src = match w {
                (1.0, 0.0) => &base,
                (0.0, 1.0) => &residual,
                _ => continue,
            };
            for c in 0..shape.channels {
                let at = shape.index(c, t, 0, 0);
                mixed[at..at + plane].copy_from_slice(src.frame(c, t));
            }
        }
    }
    let mixed = VideoLatent::new(shape, mixed)?;
    Ok(SpecMixOutput {
        base,
        residual,
        mixed,
    })
}

/// The initial noise tensor.
pub fn specmix(params: &SpecMixParams, spatial: SpatialShape) -> Result<VideoLatent> {
    Ok(specmix_parts(params, spatial)?.mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    const SPATIAL: SpatialShape = SpatialShape::new(2, 4, 4);

    #[test]
    fn short_sequence_is_plain_gaussian() {
        let p = SpecMixParams::new(8, 8, 3).unwrap();
        let b = base_noise(&p, SPATIAL).unwrap();
        let mut rng = SeededRng::with_stream(3, STREAM_BASE);
        assert_eq!(b, gaussian_latent(Shape4::new(2, 8, 4, 4), &mut rng).unwrap());
    }

    fn frame_key(x: &VideoLatent, t: usize) -> Vec<u32> {
        (0..x.shape().channels)
            .flat_map(|c| x.frame(c, t).iter().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn windows_are_permutations_of_the_first() {
        let p = SpecMixParams::new(16, 8, 4).unwrap();
        let b = base_noise(&p, SPATIAL).unwrap();
        let mut first: Vec<Vec<u32>> = (0..8).map(|t| frame_key(&b, t)).collect();
        let mut second: Vec<Vec<u32>> = (8..16).map(|t| frame_key(&b, t)).collect();
        first.sort();
        second.sort();
        assert_eq!(first, second);
    }

    #[test]
    fn partial_window_reuses_first_window_frames() {
        let p = SpecMixParams::new(21, 8, 5).unwrap();
        let b = base_noise(&p, SPATIAL).unwrap();
        let first: Vec<Vec<u32>> = (0..8).map(|t| frame_key(&b, t)).collect();
        let tail: Vec<Vec<u32>> = (16..21).map(|t| frame_key(&b, t)).collect();
        for f in &tail {
            assert!(first.contains(f));
        }
        let mut uniq = tail.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 5);
    }

    #[test]
    fn too_few_frames() {
        assert!(matches!(SpecMixParams::new(4, 8, 0), Err(Error::InvalidParameter(_))));
        assert!(SpecMixParams::new(4, 0, 0).is_err());
    }

    #[test]
    fn distances_and_angles() {
        assert_eq!(center_distance(2, 5).unwrap(), 0.0);
        assert_eq!(center_distance(0, 5).unwrap(), 1.0);
        assert_eq!(center_distance(4, 5).unwrap(), 1.0);
        assert_eq!(center_distance(1, 5).unwrap(), 0.5);
        assert!((mixing_angle(0.5) - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(mixing_angle(1.0), FRAC_PI_2);
        assert_eq!(center_distance(0, 1).unwrap(), 0.0);
        assert!(center_distance(5, 5).is_err());
        for t in 0..9 {
            assert_eq!(center_distance(t, 9).unwrap(), center_distance(8 - t, 9).unwrap());
        }
    }

    #[test]
    fn centre_and_ends_are_exact() {
        let p = SpecMixParams::new(9, 4, 6).unwrap();
        let out = specmix_parts(&p, SPATIAL).unwrap();
        for c in 0..2 {
            assert_eq!(out.mixed.frame(c, 4), out.base.frame(c, 4));
            assert_eq!(out.mixed.frame(c, 0), out.residual.frame(c, 0));
            assert_eq!(out.mixed.frame(c, 8), out.residual.frame(c, 8));
        }
    }

    #[test]
    fn spatial_mixing_is_framewise_blend() {
        let p = SpecMixParams::new(12, 4, 7).unwrap();
        let out = specmix_parts(&p, SPATIAL).unwrap();
        let s = out.mixed.shape();
        for t in 0..s.frames {
            let (a, b) = mixing_weights(t, s.frames).unwrap();
            for c in 0..s.channels {
                for h in 0..s.height {
                    for w in 0..s.width {
                        let want = a * out.base.get(c, t, h, w) as f64 + b * out.residual.get(c, t, h, w) as f64;
                        assert!((out.mixed.get(c, t, h, w) as f64 - want).abs() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut p = SpecMixParams::new(20, 8, 11).unwrap();
        assert_eq!(specmix(&p, SPATIAL).unwrap(), specmix(&p, SPATIAL).unwrap());
        p.mix_domain = MixDomain::SpaceTime;
        assert_eq!(specmix(&p, SPATIAL).unwrap(), specmix(&p, SPATIAL).unwrap());
        let q = SpecMixParams::new(20, 8, 12).unwrap();
        assert_ne!(specmix(&q, SPATIAL).unwrap(), specmix(&SpecMixParams::new(20, 8, 11).unwrap(), SPATIAL).unwrap());
    }

    #[test]
    fn mix_domain_parse() {
        assert_eq!("spacetime".parse::<MixDomain>().unwrap(), MixDomain::SpaceTime);
        assert!("temporal".parse::<MixDomain>().is_err());
    }
}
