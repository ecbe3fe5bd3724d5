//! Synthetic scenes with known spectral content, and stacks of fusion blocks.

use std::fmt;
use std::str::FromStr;

use crate::attention::{QkvWeights, TokenSequence};
use crate::config::{once, parse_entries};
use crate::error::{Error, Result};
use crate::fusion::{two_branch_plan_trace, multiband_trace, FusionPlan, FusionTrace};
use crate::tensor::{SeededRng, Shape4, VideoLatent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    T,
    H,
    W,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::T => "t",
            Axis::H => "h",
            Axis::W => "w",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(Axis::T),
            "h" => Ok(Axis::H),
            "w" => Ok(Axis::W),
            other => Err(Error::InvalidParameter(format!("unknown axis {other:?} (expected t, h or w)"))),
        }
    }
}

/// `amplitude * cos(freq * pi * n)` along one axis, constant along the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub axis: Axis,
    /// Units of pi, in `[0, 1]`.
    pub freq: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub tones: Vec<Tone>,
    pub noise_level: f64,
    pub shape: Shape4,
    pub seed: u64,
}

impl SyntheticScene {
    pub fn new(shape: Shape4, seed: u64) -> Self {
        Self {
            tones: Vec::new(),
            noise_level: 0.0,
            shape,
            seed,
        }
    }

    pub fn with_tone(mut self, axis: Axis, freq: f64, amplitude: f64) -> Self {
        self.tones.push(Tone { axis, freq, amplitude });
        self
    }

    pub fn with_noise(mut self, level: f64) -> Self {
        self.noise_level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        for tone in &self.tones {
            if !(0.0..=1.0).contains(&tone.freq) {
                return Err(Error::InvalidParameter(format!(
                    "tone frequency {} pi outside [0, pi]",
                    tone.freq
                )));
            }
            if !(tone.amplitude > 0.0 && tone.amplitude.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "tone amplitude {} must be positive",
                    tone.amplitude
                )));
            }
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise level {} must be >= 0",
                self.noise_level
            )));
        }
        Ok(())
    }

    /// Reads `shape = c,t,h,w` (required), repeated `tone = axis,freq,amplitude`
    /// with `freq` in units of pi, `noise_level` and `seed` (both default 0).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let (mut shape, mut noise, mut seed) = (None, None, None);
        let mut tones = Vec::new();
        for e in parse_entries(text)? {
            match e.key.as_str() {
                "shape" => {
                    let dims = e.parse_list::<usize>()?;
                    if dims.len() != 4 {
                        return Err(e.error("expected four dimensions c,t,h,w"));
                    }
                    once(&mut shape, &e, Shape4::new(dims[0], dims[1], dims[2], dims[3]))?;
                }
                "tone" => {
                    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(e.error("expected axis,freq,amplitude"));
                    }
                    let num = |s: &str| s.parse::<f64>().map_err(|err| e.error(format!("cannot parse {s:?}: {err}")));
                    tones.push(Tone {
                        axis: parts[0].parse().map_err(|err: Error| e.error(err.to_string()))?,
                        freq: num(parts[1])?,
                        amplitude: num(parts[2])?,
                    });
                }
                "noise_level" => once(&mut noise, &e, e.parse::<f64>()?)?,
                "seed" => once(&mut seed, &e, e.parse::<u64>()?)?,
                _ => return Err(e.error("unknown key")),
            }
        }
        let scene = Self {
            tones,
            noise_level: noise.unwrap_or(0.0),
            shape: shape.ok_or_else(|| Error::Config {
                line: 0,
                message: "missing required key shape".into(),
            })?,
            seed: seed.unwrap_or(0),
        };
        scene.validate()?;
        Ok(scene)
    }
}

/// Sum of the scene's tones plus `noise_level` times seeded Gaussian noise.
pub fn make_scene(scene: &SyntheticScene) -> Result<VideoLatent> {
    scene.validate()?;
    let mut rng = SeededRng::new(scene.seed);
    let tones = &scene.tones;
    let level = scene.noise_level;
    VideoLatent::from_fn(scene.shape, |_, t, h, w| {
        let mut v = 0.0;
        for tone in tones {
            let n = match tone.axis {
                Axis::T => t,
                Axis::H => h,
                Axis::W => w,
            };
            v += tone.amplitude * (tone.freq * std::f64::consts::PI * n as f64).cos();
        }
        if level > 0.0 {
            v += level * rng.normal();
        }
        v as f32
    })
}

/// Where each block's projection weights come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource {
    /// Block `b` draws from stream `b` of `seed`.
    Random { seed: u64 },
    Identity,
}

impl WeightSource {
    pub fn weights(&self, d: usize, block: usize) -> Result<QkvWeights> {
        match *self {
            WeightSource::Random { seed } => QkvWeights::random(d, &mut SeededRng::with_stream(seed, block as u64)),
            WeightSource::Identity => QkvWeights::identity(d),
        }
    }
}

/// One fusion call: the two-branch blend for a two-scale plan, multi-band otherwise.
pub fn fusion_block_trace(tokens: &TokenSequence, weights: &QkvWeights, plan: &FusionPlan) -> Result<FusionTrace> {
    if plan.alphas.len() == 2 {
        two_branch_plan_trace(tokens, weights, plan)
    } else {
        multiband_trace(tokens, weights, plan)
    }
}

pub fn fusion_block(tokens: &TokenSequence, weights: &QkvWeights, plan: &FusionPlan) -> Result<TokenSequence> {
    Ok(fusion_block_trace(tokens, weights, plan)?.output)
}

/// Applies `depth` fusion blocks, each with its own projection weights.
pub fn run_stack(tokens: &TokenSequence, plan: &FusionPlan, depth: usize, source: WeightSource) -> Result<TokenSequence> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let mut x = tokens.clone();
    for block in 0..depth {
        let w = source.weights(x.d_model(), block)?;
        x = fusion_block(&x, &w, plan)?;
    }
    Ok(x)
}

/// 64-bit FNV-1a over the little-endian bytes of `values`.
pub fn checksum(values: &[f32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}
