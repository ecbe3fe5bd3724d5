use std::path::Path;

use anyhow::{bail, Context, Result};
use spfu_core::analysis::{diagonality, relative_snr, AttnMapBuilder, TokenAttentionMap};
use spfu_core::attention::{attention_weights, project_qkv, uniform_keyframes};
use spfu_core::fusion::spectral_blend;
use spfu_core::harness::{checksum, fusion_block_trace, make_scene};
use spfu_core::noise_init::specmix as specmix_noise;
use spfu_core::selftest::{all_passed, format_report, run_selftest};
use spfu_core::spectral::gaussian_lowpass;
use spfu_core::tensor::{read_tensor, write_tensor};
use spfu_core::{DomainMode, FusionPlan, KeySelection, SpatialShape, SpecMixParams, SyntheticScene, TokenSequence, VideoLatent, WeightSource};

fn load(path: &Path) -> Result<VideoLatent> {
    read_tensor(path).with_context(|| format!("reading {}", path.display()))
}

fn save(path: &Path, x: &VideoLatent) -> Result<()> {
    write_tensor(path, x).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} shape {} checksum {:016x}", path.display(), x.shape(), checksum(x.data()));
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn scene(config: &Path, out: &Path) -> Result<bool> {
    let spec = SyntheticScene::from_config_str(&read_text(config)?).with_context(|| format!("parsing {}", config.display()))?;
    save(out, &make_scene(&spec)?)?;
    Ok(true)
}

pub fn blend(global: &Path, local: &Path, d0: f64, mode: DomainMode, out: &Path) -> Result<bool> {
    let g = load(global)?;
    let l = load(local)?;
    let lpf = gaussian_lowpass(g.shape().grid(), d0, mode)?;
    save(out, &spectral_blend(&g, &l, &lpf)?)?;
    Ok(true)
}

pub fn fuse(input: &Path, plan_path: &Path, source: WeightSource, depth: usize, out: &Path) -> Result<bool> {
    if depth == 0 {
        bail!("--depth must be at least 1");
    }
    let plan = FusionPlan::from_config_str(&read_text(plan_path)?).with_context(|| format!("parsing {}", plan_path.display()))?;
    let mut tokens = TokenSequence::from_latent(&load(input)?);
    for block in 0..depth {
        let w = source.weights(tokens.d_model(), block)?;
        let trace = fusion_block_trace(&tokens, &w, &plan)?;
        for b in &trace.branches {
            println!(
                "block {block} alpha {} {} macs {}",
                b.alpha,
                if b.sparse { "sparse" } else { "dense" },
                b.macs
            );
        }
        tokens = trace.output;
    }
    save(out, &tokens.to_latent()?)?;
    Ok(true)
}

pub fn specmix(params: &SpecMixParams, spatial: SpatialShape, out: &Path) -> Result<bool> {
    save(out, &specmix_noise(params, spatial)?)?;
    Ok(true)
}

pub fn analyze(reference: &Path, extended: &Path, edges: &[f64], threshold: f64, mode: DomainMode, out: &Path) -> Result<bool> {
    let report = relative_snr(&load(reference)?, &load(extended)?, edges, threshold, mode)?;
    write_text(out, &report.to_csv())?;
    print!("{}", report.to_text());
    Ok(true)
}

pub enum MapKeys {
    Window(usize),
    All,
    Fraction(f64),
}

pub fn attnmap(input: &Path, keys: MapKeys, calls: usize, source: WeightSource, out: &Path) -> Result<bool> {
    let tokens = TokenSequence::from_latent(&load(input)?);
    let frames = tokens.frames();
    let (selection, label) = match keys {
        MapKeys::Window(span) => {
            if span == 0 {
                bail!("--span must be at least 1");
            }
            (KeySelection::Window { span_frames: span }, format!("window {span}"))
        }
        MapKeys::All => (KeySelection::All, "global".to_string()),
        MapKeys::Fraction(f) => (KeySelection::KeyFrames(uniform_keyframes(frames, f)?), format!("key frames {f}")),
    };
    let mut builder = AttnMapBuilder::new(frames);
    for call in 0..calls {
        let (q, k, _) = project_qkv(&tokens, &source.weights(tokens.d_model(), call)?)?;
        let weights = attention_weights(&q, &k, tokens.frame_index(), &selection)?;
        builder.add(&TokenAttentionMap {
            weights,
            frame_index: tokens.frame_index().to_vec(),
        })?;
    }
    let map = builder.finish(format!("{label}, mean of {calls} calls"))?;
    write_text(out, &map.to_csv())?;
    println!("{}: diagonality {:.6}", map.source, diagonality(&map));
    Ok(true)
}

pub fn selftest() -> Result<bool> {
    let results = run_selftest();
    print!("{}", format_report(&results));
    Ok(all_passed(&results))
}
