//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use spfu_core::analysis::{diagonality, relative_snr, AttnMapBuilder, TokenAttentionMap};
use spfu_core::attention::{attention_weights, global_attention, masked_attention, project_qkv, sparse_attention, uniform_keyframes};
use spfu_core::fusion::{two_branch_attention, multiband_attention, multiband_trace};
use spfu_core::noise_init::specmix_parts;
use spfu_core::spectral::{apply_mask, band_masks, band_specs, fft3, gaussian_lowpass, ifft3, partition_defect};
use spfu_core::tensor::gaussian_latent;
use spfu_core::{AttentionWindow, DomainMode, FusionPlan, Grid3, KeySelection, Matrix, QkvWeights, SeededRng, Shape4, SpatialShape, SpecMixParams, TokenSequence, VideoLatent};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Temporal normalized frequency of bin `k` on `n` frames, in units of pi.
fn freq(k: usize, n: usize) -> f64 {
    2.0 * k.min(n - k) as f64 / n as f64
}

fn random_qkv(n: usize, d: usize, rng: &mut SeededRng) -> (Matrix, Matrix, Matrix) {
    (
        Matrix::gaussian(n, d, 1.0, rng).unwrap(),
        Matrix::gaussian(n, d, 1.0, rng).unwrap(),
        Matrix::gaussian(n, d, 1.0, rng).unwrap(),
    )
}

/// Dense logits, explicit mask, softmax, product with V.
fn oracle(q: &Matrix, k: &Matrix, v: &Matrix, frames: &[usize], admit: &dyn Fn(usize, usize) -> bool) -> Vec<f64> {
    let n = q.rows();
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut out = vec![0.0; n * v.cols()];
    let mut p = vec![0.0; n];
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            p[j] = if admit(frames[i], frames[j]) {
                q.row(i).iter().zip(k.row(j)).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() * scale
            } else {
                f64::NEG_INFINITY
            };
            max = max.max(p[j]);
        }
        let mut total = 0.0;
        for x in p.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for c in 0..v.cols() {
            out[i * v.cols() + c] = (0..n).map(|j| p[j] * v.get(j, c) as f64).sum::<f64>() / total;
        }
    }
    out
}

fn deviation(m: &Matrix, o: &[f64]) -> f64 {
    m.data().iter().zip(o).map(|(&a, &b)| (a as f64 - b).abs()).fold(0.0, f64::max)
}

fn spectral_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(101);
    let mut shapes = vec![Shape4::new(4, 32, 16, 16), Shape4::new(1, 1, 1, 1), Shape4::new(3, 17, 5, 9)];
    for _ in 0..12 {
        shapes.push(Shape4::new(
            1 + rng.below(4) as usize,
            1 + rng.below(32) as usize,
            1 + rng.below(16) as usize,
            1 + rng.below(16) as usize,
        ));
    }
    let (mut rt, mut pv): (f64, f64) = (0.0, 0.0);
    for s in &shapes {
        let x = gaussian_latent(*s, &mut rng).map_err(e2s)?;
        let spec = fft3(&x);
        rt = rt.max(ifft3(&spec).map_err(e2s)?.max_abs_diff(&x).map_err(e2s)?);
        pv = pv.max((x.energy() - spec.energy()).abs() / x.energy());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(rt <= 1e-4, || format!("roundtrip error {rt:e} > 1e-4"))?;
    ensure(pv <= 1e-5, || format!("Parseval error {pv:e} > 1e-5"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("{} latents, roundtrip {rt:.1e}, Parseval {pv:.1e}, {secs:.2} s", shapes.len()))
}

fn band_partition() -> Outcome {
    let lists: [&[u32]; 4] = [&[1], &[1, 2], &[1, 2, 4], &[1, 2, 4, 8]];
    let grids = [Grid3::new(32, 4, 4), Grid3::new(64, 2, 3), Grid3::new(15, 5, 4)];
    for alphas in lists {
        for grid in grids {
            for mode in [DomainMode::Temporal, DomainMode::Radial] {
                let masks = band_masks(alphas, grid, mode).map_err(e2s)?;
                let d = partition_defect(&masks).map_err(e2s)?;
                ensure(d == 0.0, || format!("{alphas:?} {mode}: defect {d:e}"))?;
            }
            // Temporal ownership from the edge formula: the branch whose
            // (pi/(2 a_next), pi/(2 a)] slice holds the bin.
            let masks = band_masks(alphas, grid, DomainMode::Temporal).map_err(e2s)?;
            for t in 0..grid.frames {
                let f = freq(t, grid.frames);
                let owner = (0..alphas.len())
                    .rev()
                    .find(|&l| l == 0 || f <= 1.0 / (2.0 * alphas[l] as f64) + 1e-12)
                    .unwrap();
                for (l, m) in masks.iter().enumerate() {
                    let want = if l == owner { 1.0 } else { 0.0 };
                    ensure(m.get(t, 0, 0) == want, || format!("{alphas:?}: bin {t} mask {l}"))?;
                }
            }
        }
        let specs = band_specs(alphas).map_err(e2s)?;
        for (l, s) in specs.iter().enumerate() {
            let hi = if l == 0 { std::f64::consts::PI } else { std::f64::consts::PI / (2.0 * alphas[l] as f64) };
            ensure(s.hi == hi, || format!("{alphas:?}: band {l} upper edge {}", s.hi))?;
        }
    }
    let s = band_specs(&[1, 2, 4]).map_err(e2s)?;
    let pi = std::f64::consts::PI;
    ensure(s[2].lo == 0.0 && s[2].hi == pi / 8.0 && s[1].lo == pi / 8.0 && s[1].hi == pi / 4.0 && s[0].lo == pi / 4.0, || {
        format!("{{1,2,4}} bands {s:?}")
    })?;
    Ok("exact partition for {1}..{1,2,4,8}; {1,2,4} edges pi/8, pi/4".into())
}

fn attention_oracle() -> Outcome {
    let mut rng = SeededRng::new(303);
    let (mut wm, mut ws): (f64, f64) = (0.0, 0.0);
    let cases = 100;
    let mut largest = 0;
    for case in 0..cases {
        let t = 1 + rng.below(16) as usize;
        let per_max = (1024 / t).min(64);
        let frames: Vec<usize> = (0..t)
            .flat_map(|f| std::iter::repeat_n(f, 1 + rng.below(per_max as u64) as usize))
            .collect();
        let frames = if case == 0 { (0..1024).map(|i| i * 16 / 1024).collect() } else { frames };
        let t = frames.last().unwrap() + 1;
        largest = largest.max(frames.len());
        let d = 1 + rng.below(8) as usize;
        let (q, k, v) = random_qkv(frames.len(), d, &mut rng);

        let span = 1 + rng.below(2 * t as u64) as usize;
        let out = masked_attention(&q, &k, &v, &frames, AttentionWindow::new(span, t).map_err(e2s)?).map_err(e2s)?;
        let admit = move |a: usize, b: usize| span >= t || a == b || a.abs_diff(b) < span / 2;
        wm = wm.max(deviation(&out, &oracle(&q, &k, &v, &frames, &admit)));

        let keys: Vec<usize> = (0..t).filter(|&f| f == 0 || rng.below(2) == 0).collect();
        let out = sparse_attention(&q, &k, &v, &frames, &keys).map_err(e2s)?;
        let admit = |_: usize, b: usize| keys.contains(&b);
        ws = ws.max(deviation(&out, &oracle(&q, &k, &v, &frames, &admit)));
    }
    ensure(wm <= 1e-6, || format!("masked deviation {wm:e}"))?;
    ensure(ws <= 1e-6, || format!("sparse deviation {ws:e}"))?;
    Ok(format!("{cases} cases each (up to {largest} tokens): masked {wm:.1e}, sparse {ws:.1e}"))
}

fn noise_tokens(shape: Shape4, seed: u64) -> TokenSequence {
    TokenSequence::from_latent(&gaussian_latent(shape, &mut SeededRng::new(seed)).unwrap())
}

fn reduction_chain() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let t_alpha = 8;
        let tokens = noise_tokens(Shape4::new(8, t_alpha, 4, 4), 400 + seed);
        let w = QkvWeights::random(8, &mut SeededRng::new(410 + seed)).map_err(e2s)?;
        let plan = FusionPlan::new(t_alpha, vec![1, 2]).map_err(e2s)?;
        let pp = multiband_attention(&tokens, &w, &plan).map_err(e2s)?;
        let two = two_branch_attention(&tokens, &w, &plan).map_err(e2s)?;
        let (q, k, v) = project_qkv(&tokens, &w).map_err(e2s)?;
        let plain = global_attention(&q, &k, &v, tokens.frame_index()).map_err(e2s)?;
        worst = worst
            .max(pp.features().max_abs_diff(two.features()).map_err(e2s)?)
            .max(two.features().max_abs_diff(&plain).map_err(e2s)?)
            .max(pp.features().max_abs_diff(&plain).map_err(e2s)?);
    }
    ensure(worst <= 1e-4, || format!("deviation {worst:e}"))?;
    Ok(format!("5 seeds at T = T_alpha, largest deviation {worst:.1e}"))
}

fn band_ownership() -> Outcome {
    let t_alpha = 8;
    let frames = 4 * t_alpha;
    let tokens = noise_tokens(Shape4::new(8, frames, 4, 4), 500);
    let w = QkvWeights::random(8, &mut SeededRng::new(501)).map_err(e2s)?;
    let plan = FusionPlan::four_x(t_alpha).map_err(e2s)?;
    let trace = multiband_trace(&tokens, &w, &plan).map_err(e2s)?;
    let fused = fft3(&trace.output.to_latent().map_err(e2s)?);
    let alphas: Vec<u32> = trace.branches.iter().map(|b| b.alpha).collect();
    ensure(alphas == [1, 2, 4], || format!("branches {alphas:?}"))?;
    let spectra: Vec<_> = trace.branches.iter().map(|b| fft3(&b.latent)).collect();
    let s = fused.shape();
    let mut worst: f64 = 0.0;
    let mut owned = [0usize; 3];
    for c in 0..s.channels {
        for t in 0..s.frames {
            let f = freq(t, s.frames);
            let owner = if f <= 0.125 + 1e-12 {
                2
            } else if f <= 0.25 + 1e-12 {
                1
            } else {
                0
            };
            owned[owner] += 1;
            for h in 0..s.height {
                for x in 0..s.width {
                    worst = worst.max((fused.get(c, t, h, x) - spectra[owner].get(c, t, h, x)).norm());
                }
            }
        }
    }
    ensure(worst <= 1e-4, || format!("deviation {worst:e}"))?;
    ensure(owned.iter().all(|&n| n > 0), || format!("bins per branch {owned:?}"))?;
    Ok(format!("T = 32, T_alpha = 8, every bin within {worst:.1e} of its branch"))
}

fn specmix_limits() -> Outcome {
    let start = Instant::now();
    let spatial = SpatialShape::new(8, 8, 8);
    let (frames, t_alpha) = (33, 8);
    let out = specmix_parts(&SpecMixParams::new(frames, t_alpha, 6).map_err(e2s)?, spatial).map_err(e2s)?;
    for c in 0..spatial.channels {
        ensure(out.mixed.frame(c, 16) == out.base.frame(c, 16), || "centre slice differs from base".into())?;
        ensure(out.mixed.frame(c, 0) == out.residual.frame(c, 0), || "first slice differs from residual".into())?;
        ensure(out.mixed.frame(c, 32) == out.residual.frame(c, 32), || "last slice differs from residual".into())?;
    }
    let seeds = 200;
    let frames = 32;
    let mut sum = vec![0.0f64; frames];
    let mut sq = vec![0.0f64; frames];
    let per = spatial.channels * spatial.height * spatial.width;
    for seed in 0..seeds {
        let x = specmix_parts(&SpecMixParams::new(frames, t_alpha, seed).map_err(e2s)?, spatial).map_err(e2s)?.mixed;
        for t in 0..frames {
            for c in 0..spatial.channels {
                for &v in x.frame(c, t) {
                    sum[t] += v as f64;
                    sq[t] += (v as f64).powi(2);
                }
            }
        }
    }
    let n = (seeds as usize * per) as f64;
    let worst = (0..frames)
        .map(|t| {
            let mean = sum[t] / n;
            (sq[t] / n - mean * mean - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 0.1, || format!("per-slice variance off by {worst:.3}"))?;
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("exact limits; {seeds} seeds, variance within {:.1}% of 1; {secs:.2} s", worst * 100.0))
}

fn distortion_trend() -> Outcome {
    let t_alpha = 16;
    let reference = gaussian_latent(Shape4::new(4, t_alpha, 8, 8), &mut SeededRng::new(700)).map_err(e2s)?;
    let long = gaussian_latent(Shape4::new(4, 4 * t_alpha, 8, 8), &mut SeededRng::new(701)).map_err(e2s)?;
    let grid = long.shape().grid();
    let lpf = gaussian_lowpass(grid, 0.25, DomainMode::Temporal).map_err(e2s)?;
    let extended: VideoLatent = ifft3(&apply_mask(&fft3(&long), &lpf).map_err(e2s)?).map_err(e2s)?;
    let report = relative_snr(&reference, &extended, &[0.25], 0.9, DomainMode::Temporal).map_err(e2s)?;
    let (low, high) = (report.ratios[0], report.ratios[1]);

    // Expected ratios from the Gaussian weights on white noise, where every
    // bin carries the same expected energy.
    let t = grid.frames;
    let w2 = |k: usize| (-(freq(k, t).powi(2)) / (2.0 * 0.25f64.powi(2))).exp().powi(2);
    let (lo_bins, hi_bins): (Vec<usize>, Vec<usize>) = (0..t).partition(|&k| freq(k, t) <= 0.25);
    let (el, eh) = (lo_bins.iter().map(|&k| w2(k)).sum::<f64>(), hi_bins.iter().map(|&k| w2(k)).sum::<f64>());
    let ref_lo = (0..t_alpha).filter(|&k| freq(k, t_alpha) <= 0.25).count() as f64 / t_alpha as f64;
    let want_low = el / (el + eh) / ref_lo;
    let want_high = eh / (el + eh) / (1.0 - ref_lo);

    ensure(low >= 0.95, || format!("low-band ratio {low:.3} < 0.95"))?;
    ensure(high <= 0.7, || format!("high-band ratio {high:.3} > 0.7"))?;
    ensure(high < low, || "high band not below low band".into())?;
    ensure(report.is_available(0) && !report.is_available(1), || "availability at 0.9".into())?;
    ensure((low / want_low - 1.0).abs() < 0.1 && (high / want_high - 1.0).abs() < 0.2, || {
        format!("measured ({low:.3}, {high:.3}) vs expected ({want_low:.3}, {want_high:.3})")
    })?;
    Ok(format!("low {low:.3} (expected {want_low:.3}), high {high:.3} (expected {want_high:.3})"))
}

fn attention_structure() -> Outcome {
    let t_alpha = 8;
    let frames = 4 * t_alpha;
    let tokens = noise_tokens(Shape4::new(8, frames, 3, 3), 800);
    let mut local = AttnMapBuilder::new(frames);
    let mut global = AttnMapBuilder::new(frames);
    for call in 0..4 {
        let mut rng = SeededRng::with_stream(801, call);
        let (q, k, _) = random_qkv(tokens.features().rows(), 8, &mut rng);
        let fi = tokens.frame_index();
        let window = KeySelection::from_window(AttentionWindow::new(t_alpha, frames).map_err(e2s)?).map_err(e2s)?;
        for (builder, sel) in [(&mut local, window), (&mut global, KeySelection::All)] {
            let weights = attention_weights(&q, &k, fi, &sel).map_err(e2s)?;
            builder.add(&TokenAttentionMap { weights, frame_index: fi.to_vec() }).map_err(e2s)?;
        }
    }
    let dl = diagonality(&local.finish("local").map_err(e2s)?);
    let dg = diagonality(&global.finish("global").map_err(e2s)?);
    ensure(dl >= 2.0 * dg, || format!("windowed {dl:.3} < 2 x global {dg:.3}"))?;
    Ok(format!("diagonality windowed {dl:.3} vs global {dg:.3} ({:.1}x)", dl / dg))
}

fn sparse_efficiency() -> Outcome {
    let t_alpha = 8;
    let frames = 4 * t_alpha;
    let tokens = noise_tokens(Shape4::new(8, frames, 3, 3), 900);
    let w = QkvWeights::random(8, &mut SeededRng::new(901)).map_err(e2s)?;
    let dense_plan = FusionPlan::four_x(t_alpha).map_err(e2s)?;
    let dense = multiband_trace(&tokens, &w, &dense_plan).map_err(e2s)?;
    let sparse = multiband_trace(&tokens, &w, &dense_plan.clone().with_sparse_global(true)).map_err(e2s)?;
    let (gd, gs) = (dense.branches.last().unwrap(), sparse.branches.last().unwrap());
    ensure(gs.sparse && !gd.sparse, || "branch flags".into())?;
    ensure(uniform_keyframes(frames, 0.5).map_err(e2s)?.len() == frames / 2, || "key frames are not half".into())?;
    let share = gs.macs as f64 / gd.macs as f64;
    ensure(share <= 0.55, || format!("sparse global branch uses {:.1}% of dense MACs", share * 100.0))?;

    // The coarsest band is the lowest temporal slice, f <= 1/8.
    let a = fft3(&dense.output.to_latent().map_err(e2s)?);
    let b = fft3(&sparse.output.to_latent().map_err(e2s)?);
    let s = a.shape();
    let (mut outside, mut inside): (f64, f64) = (0.0, 0.0);
    let (mut exact_outside, mut changed_inside) = (true, false);
    for c in 0..s.channels {
        for t in 0..s.frames {
            for h in 0..s.height {
                for x in 0..s.width {
                    let i = s.index(c, t, h, x);
                    let d = (a.get(c, t, h, x) - b.get(c, t, h, x)).norm();
                    let exact = dense.fused_spectrum.data()[i] == sparse.fused_spectrum.data()[i];
                    if freq(t, s.frames) <= 0.125 {
                        inside = inside.max(d);
                        changed_inside |= !exact;
                    } else {
                        outside = outside.max(d);
                        exact_outside &= exact;
                    }
                }
            }
        }
    }
    ensure(exact_outside, || "fused spectrum changed outside the coarsest band".into())?;
    ensure(outside <= 1e-5, || format!("output spectrum moved {outside:e} outside the coarsest band"))?;
    ensure(changed_inside && inside > 1e-3, || "sparse branch had no effect".into())?;
    Ok(format!(
        "global branch MACs {} vs {} ({:.0}%); change outside coarsest band {outside:.1e}, inside {inside:.2}",
        gs.macs,
        gd.macs,
        share * 100.0
    ))
}

fn spfu(dir: &Path, threads: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spfu"))
        .current_dir(dir)
        .env("SPFU_THREADS", threads)
        .args(args)
        .output()
        .map_err(e2s)?;
    if !out.status.success() {
        return Err(format!("spfu {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().map_err(e2s)?;
        let d = dir.path();
        std::fs::write(d.join("long.txt"), "shape = 8,32,4,4\ntone = t,0.125,1\ntone = w,0.5,0.5\nnoise_level = 0.3\nseed = 4\n").map_err(e2s)?;
        std::fs::write(d.join("short.txt"), "shape = 8,8,4,4\nnoise_level = 1\nseed = 5\n").map_err(e2s)?;
        std::fs::write(d.join("plan.txt"), "t_alpha = 8\nalphas = 1,2,4\nsparse_global = true\n").map_err(e2s)?;
        let commands: &[&[&str]] = &[
            &["selftest"],
            &["scene", "--config", "long.txt", "--out", "long.spfu"],
            &["scene", "--config", "short.txt", "--out", "short.spfu"],
            &["specmix", "--frames", "32", "--t-alpha", "8", "--seed", "1", "--out", "x0.spfu"],
            &["specmix", "--frames", "32", "--t-alpha", "8", "--seed", "1", "--mix-domain", "spacetime", "--out", "x0st.spfu"],
            &["fuse", "--input", "long.spfu", "--plan", "plan.txt", "--seed", "3", "--depth", "3", "--out", "fused.spfu"],
            &["blend", "--global", "long.spfu", "--local", "fused.spfu", "--d0", "0.25", "--out", "blend.spfu"],
            &["analyze", "--ref", "short.spfu", "--ext", "fused.spfu", "--bands", "16", "--threshold", "0.9", "--out", "report.csv"],
            &["attnmap", "--input", "long.spfu", "--keys", "local", "--span", "8", "--calls", "3", "--seed", "2", "--out", "local.csv"],
            &["attnmap", "--input", "long.spfu", "--keys", "sparse", "--identity", "--out", "sparse.csv"],
        ];
        let mut bytes = Vec::new();
        for _ in 0..2 {
            let mut run = Vec::new();
            for args in commands {
                run.push(spfu(d, threads, args)?);
            }
            for f in ["long.spfu", "short.spfu", "x0.spfu", "x0st.spfu", "fused.spfu", "blend.spfu", "report.csv", "local.csv", "sparse.csv"] {
                run.push(std::fs::read(d.join(f)).map_err(e2s)?);
            }
            bytes.push(run);
        }
        ensure(bytes[0] == bytes[1], || format!("two runs differ with SPFU_THREADS={threads}"))?;
        runs.push(bytes.pop().unwrap());
    }
    ensure(runs[0] == runs[1], || "outputs depend on the thread count".into())?;
    Ok("10 commands and 9 output files byte-identical across runs and thread counts".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("spectral identity", spectral_identity),
        ("band partition", band_partition),
        ("attention oracle equivalence", attention_oracle),
        ("reduction chain", reduction_chain),
        ("band ownership", band_ownership),
        ("SpecMix limits and variance", specmix_limits),
        ("distortion trend", distortion_trend),
        ("attention structure", attention_structure),
        ("sparse efficiency", sparse_efficiency),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
