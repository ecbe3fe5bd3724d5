//! Runs the library's invariants on seeded data and reports each one.
//!
//! Every check is deterministic; the report text is identical across runs.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::analysis::{aggregate_attention, band_energy, diagonality, relative_snr, uniform_edges, AttnMap, TokenAttentionMap};
use crate::attention::reference::{brute_force_attention, max_deviation};
use crate::attention::{attention_weights, global_attention, masked_attention, sparse_attention, uniform_keyframes, AttentionWindow, KeySelection, Matrix, QkvWeights, TokenSequence};
use crate::error::{Error, Result};
use crate::fusion::{two_branch_attention, multiband_attention, multiband_trace, two_branch_trace, multiscale_attention, BranchConfig, FusionPlan};
use crate::harness::{checksum, make_scene, run_stack, Axis, SyntheticScene, WeightSource};
use crate::noise_init::{base_noise, center_distance, specmix, specmix_parts, SpatialShape, SpecMixParams};
use crate::spectral::{apply_mask, band_masks, band_specs, fft3, frequency_map, gaussian_lowpass, ifft3, ifft3_complex, partition_defect, DomainMode};
use crate::tensor::{decode_tensor, encode_tensor, gaussian_latent, Grid3, SeededRng, Shape4, VideoLatent};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("tensor.io_roundtrip", io_roundtrip),
    ("tensor.io_rejects_corruption", io_rejects_corruption),
    ("tensor.seeded_noise", seeded_noise),
    ("tensor.validation", tensor_validation),
    ("spectral.fft_roundtrip", fft_roundtrip),
    ("spectral.parseval", parseval),
    ("spectral.direct_dft", direct_dft),
    ("spectral.partition_of_unity", partition_of_unity),
    ("spectral.band_edges", band_edges),
    ("spectral.masked_output_is_real", masked_output_is_real),
    ("spectral.lowpass_monotone", lowpass_monotone),
    ("attention.masked_matches_oracle", masked_matches_oracle),
    ("attention.sparse_matches_oracle", sparse_matches_oracle),
    ("attention.rows_are_convex", rows_are_convex),
    ("attention.wide_window_is_global", wide_window_is_global),
    ("attention.sparse_all_frames_is_global", sparse_all_frames_is_global),
    ("attention.argmax_locality", argmax_locality),
    ("attention.within_frame_equivariance", within_frame_equivariance),
    ("fusion.two_branch_reduction", two_branch_reduction),
    ("fusion.band_ownership", band_ownership),
    ("fusion.short_input_is_plain_attention", short_input_is_plain_attention),
    ("fusion.sparse_substitution", sparse_substitution),
    ("fusion.energy_bound", energy_bound),
    ("fusion.plan_invariants", plan_invariants),
    ("noise_init.centre_and_ends", specmix_limits),
    ("noise_init.variance", specmix_variance),
    ("noise_init.determinism", specmix_determinism),
    ("noise_init.symmetry", specmix_symmetry),
    ("noise_init.window_permutation", specmix_windows),
    ("analysis.band_energy_total", band_energy_total),
    ("analysis.snr_scale_invariance", snr_scale_invariance),
    ("analysis.snr_report_bounds", snr_report_bounds),
    ("analysis.aggregate_row_stochastic", aggregate_row_stochastic),
    ("analysis.diagonality_bounds", diagonality_bounds),
    ("harness.stack_determinism", stack_determinism),
    ("harness.tone_placement", tone_placement),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

pub fn run_selftest() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, check)| match check() {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// One `PASS name detail` / `FAIL name detail` line per check and a summary.
pub fn format_report(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        writeln!(s, "{} {:<42} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail).unwrap();
    }
    let passed = results.iter().filter(|r| r.passed).count();
    writeln!(s, "{passed}/{} checks passed", results.len()).unwrap();
    s
}

fn within(value: f64, limit: f64, label: &str) -> (bool, String) {
    (value <= limit, format!("{label} {value:.3e} (limit {limit:.0e})"))
}

fn random_qkv(n: usize, d: usize, rng: &mut SeededRng) -> Result<(Matrix, Matrix, Matrix)> {
    Ok((
        Matrix::gaussian(n, d, 1.0, rng)?,
        Matrix::gaussian(n, d, 1.0, rng)?,
        Matrix::gaussian(n, d, 1.0, rng)?,
    ))
}

/// Frame ids with a random token count (1..=max_per) per frame.
fn random_frames(t: usize, max_per: usize, rng: &mut SeededRng) -> Vec<usize> {
    (0..t)
        .flat_map(|f| std::iter::repeat_n(f, 1 + rng.below(max_per as u64) as usize))
        .collect()
}

fn noise_tokens(shape: Shape4, seed: u64) -> Result<TokenSequence> {
    Ok(TokenSequence::from_latent(&gaussian_latent(shape, &mut SeededRng::new(seed))?))
}

fn io_roundtrip() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(1);
    let mut ok = true;
    for _ in 0..8 {
        let shape = Shape4::new(
            1 + rng.below(3) as usize,
            1 + rng.below(9) as usize,
            1 + rng.below(5) as usize,
            1 + rng.below(5) as usize,
        );
        let x = gaussian_latent(shape, &mut rng)?;
        let y = decode_tensor(&encode_tensor(&x))?;
        ok &= x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()) && x.shape() == y.shape();
    }
    Ok((ok, "8 random shapes, bitwise".into()))
}

fn io_rejects_corruption() -> Result<(bool, String)> {
    let x = gaussian_latent(Shape4::new(1, 2, 2, 2), &mut SeededRng::new(2))?;
    let bytes = encode_tensor(&x);
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    let mut trailing = bytes.clone();
    trailing.push(0);
    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    let ok = matches!(decode_tensor(&bad_magic), Err(Error::BadMagic(_)))
        && matches!(decode_tensor(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. }))
        && matches!(decode_tensor(&trailing), Err(Error::TrailingBytes(1)))
        && matches!(decode_tensor(&nan), Err(Error::NonFinite(_)));
    Ok((ok, "bad magic, truncation, trailing bytes, NaN".into()))
}

fn seeded_noise() -> Result<(bool, String)> {
    let shape = Shape4::new(4, 16, 32, 32);
    let a = gaussian_latent(shape, &mut SeededRng::new(7))?;
    let b = gaussian_latent(shape, &mut SeededRng::new(7))?;
    let c = gaussian_latent(shape, &mut SeededRng::new(8))?;
    let n = a.data().len() as f64;
    let mean = a.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = a.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let ok = a == b && a != c && mean.abs() < 0.02 && (var - 1.0).abs() < 0.02;
    Ok((ok, format!("mean {mean:.4}, variance {var:.4}")))
}

fn tensor_validation() -> Result<(bool, String)> {
    let ok = VideoLatent::zeros(Shape4::new(1, 0, 2, 2)).is_err()
        && VideoLatent::new(Shape4::new(1, 1, 1, 2), vec![0.0]).is_err()
        && VideoLatent::new(Shape4::new(1, 1, 1, 1), vec![f32::INFINITY]).is_err();
    Ok((ok, "zero dims, wrong length, non-finite".into()))
}

fn fft_roundtrip() -> Result<(bool, String)> {
    let x = gaussian_latent(Shape4::new(4, 32, 16, 16), &mut SeededRng::new(11))?;
    let y = ifft3(&fft3(&x))?;
    Ok(within(x.max_abs_diff(&y)?, 1e-4, "max abs error"))
}

fn parseval() -> Result<(bool, String)> {
    let x = gaussian_latent(Shape4::new(4, 32, 16, 16), &mut SeededRng::new(12))?;
    let e = x.energy();
    Ok(within((e - fft3(&x).energy()).abs() / e, 1e-5, "relative error"))
}

fn direct_dft() -> Result<(bool, String)> {
    let shape = Shape4::new(2, 4, 3, 5);
    let x = gaussian_latent(shape, &mut SeededRng::new(13))?;
    let spec = fft3(&x);
    let (t, h, w) = (shape.frames, shape.height, shape.width);
    let norm = ((t * h * w) as f64).sqrt();
    let mut worst: f64 = 0.0;
    for c in 0..shape.channels {
        for (kt, kh, kw) in (0..t).flat_map(|a| (0..h).flat_map(move |b| (0..w).map(move |d| (a, b, d)))) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (nt, nh, nw) in (0..t).flat_map(|a| (0..h).flat_map(move |b| (0..w).map(move |d| (a, b, d)))) {
                let phase = -2.0 * PI * ((kt * nt) as f64 / t as f64 + (kh * nh) as f64 / h as f64 + (kw * nw) as f64 / w as f64);
                acc += Complex64::from_polar(x.get(c, nt, nh, nw) as f64, phase);
            }
            worst = worst.max((acc / norm - spec.get(c, kt, kh, kw)).norm());
        }
    }
    Ok(within(worst, 1e-9, "max deviation"))
}

const ALPHA_LISTS: &[&[u32]] = &[&[1], &[1, 2], &[1, 2, 4], &[1, 2, 4, 8], &[1, 3, 5], &[2, 3]];

fn partition_of_unity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for alphas in ALPHA_LISTS {
        for grid in [Grid3::new(32, 4, 4), Grid3::new(17, 5, 6), Grid3::new(64, 1, 1)] {
            for mode in [DomainMode::Temporal, DomainMode::Radial] {
                worst = worst.max(partition_defect(&band_masks(alphas, grid, mode)?)?);
            }
        }
    }
    Ok((worst == 0.0, format!("largest defect {worst:e} over {} alpha lists", ALPHA_LISTS.len())))
}

fn band_edges() -> Result<(bool, String)> {
    let mut ok = true;
    for alphas in ALPHA_LISTS {
        let specs = band_specs(alphas)?;
        let n = specs.len();
        for (i, s) in specs.iter().enumerate() {
            let hi = if i == 0 { PI } else { PI / (2.0 * s.alpha as f64) };
            let lo = if i == n - 1 { 0.0 } else { PI / (2.0 * alphas[i + 1] as f64) };
            ok &= s.lo == lo && s.hi == hi && s.lo < s.hi;
        }
    }
    let s = band_specs(&[1, 2, 4])?;
    ok &= s[2].hi == PI / 8.0 && s[1].hi == PI / 4.0;
    Ok((ok, "edges pi/(2 alpha); {1,2,4} keeps pi/8 and pi/4".into()))
}

fn masked_output_is_real() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for shape in [Shape4::new(2, 12, 6, 5), Shape4::new(1, 17, 4, 7)] {
        let x = gaussian_latent(shape, &mut SeededRng::new(14))?;
        let spec = fft3(&x);
        for mode in [DomainMode::Temporal, DomainMode::Radial] {
            let mut masks = band_masks(&[1, 2, 4], shape.grid(), mode)?;
            masks.push(gaussian_lowpass(shape.grid(), 0.25, mode)?);
            for m in &masks {
                worst = worst.max(ifft3_complex(&apply_mask(&spec, m)?).max_abs_imag());
            }
        }
    }
    Ok(within(worst, 1e-5, "max imaginary residue"))
}

fn lowpass_monotone() -> Result<(bool, String)> {
    let mut ok = true;
    for mode in [DomainMode::Temporal, DomainMode::Radial] {
        for d0 in [0.1, 0.25, 1.0] {
            let grid = Grid3::new(16, 8, 8);
            let lpf = gaussian_lowpass(grid, d0, mode)?;
            let mut pairs: Vec<(f64, f64)> = frequency_map(grid, mode).into_iter().zip(lpf.weights().iter().copied()).collect();
            ok &= pairs.iter().all(|&(_, w)| w > 0.0 && w <= 1.0);
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            ok &= pairs.windows(2).all(|p| p[1].1 <= p[0].1 || p[1].0 == p[0].0);
        }
    }
    Ok((ok, "weights in (0, 1], non-increasing in frequency".into()))
}

fn window_rule(span: usize, frames: usize) -> impl Fn(usize, usize) -> bool {
    move |q, k| span >= frames || q == k || q.abs_diff(k) < span / 2
}

fn masked_matches_oracle() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(21);
    let mut worst: f64 = 0.0;
    let cases = 40;
    for _ in 0..cases {
        let t = 1 + rng.below(16) as usize;
        let frames = random_frames(t, 12, &mut rng);
        let d = 1 + rng.below(8) as usize;
        let (q, k, v) = random_qkv(frames.len(), d, &mut rng)?;
        let span = 1 + rng.below(2 * t as u64) as usize;
        let out = masked_attention(&q, &k, &v, &frames, AttentionWindow::new(span, t)?)?;
        worst = worst.max(max_deviation(&out, &brute_force_attention(&q, &k, &v, &frames, window_rule(span, t))));
    }
    Ok(within(worst, 1e-6, &format!("{cases} cases, max deviation")))
}

fn sparse_matches_oracle() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(22);
    let mut worst: f64 = 0.0;
    let cases = 40;
    for _ in 0..cases {
        let t = 1 + rng.below(16) as usize;
        let frames = random_frames(t, 12, &mut rng);
        let (q, k, v) = random_qkv(frames.len(), 4, &mut rng)?;
        let mut keys: Vec<usize> = (0..t).filter(|_| rng.below(2) == 0).collect();
        if keys.is_empty() {
            keys.push(rng.below(t as u64) as usize);
        }
        let out = sparse_attention(&q, &k, &v, &frames, &keys)?;
        let oracle = brute_force_attention(&q, &k, &v, &frames, |_, kf| keys.contains(&kf));
        worst = worst.max(max_deviation(&out, &oracle));
    }
    Ok(within(worst, 1e-6, &format!("{cases} cases, max deviation")))
}

fn rows_are_convex() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(23);
    let frames = random_frames(10, 6, &mut rng);
    let n = frames.len();
    let (q, k, _) = random_qkv(n, 6, &mut rng)?;
    let mut worst: f64 = 0.0;
    let mut negative = false;
    for sel in [
        KeySelection::All,
        KeySelection::Window { span_frames: 3 },
        KeySelection::KeyFrames(uniform_keyframes(10, 0.5)?),
    ] {
        let w = attention_weights(&q, &k, &frames, &sel)?;
        for row in w.chunks(n) {
            negative |= row.iter().any(|&x| x < 0.0);
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let (ok, detail) = within(worst, 1e-6, "max row-sum error");
    Ok((ok && !negative, detail))
}

fn wide_window_is_global() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(24);
    let t = 16;
    let frames: Vec<usize> = (0..512).map(|i| i / 32).collect();
    let (q, k, v) = random_qkv(512, 8, &mut rng)?;
    let g = global_attention(&q, &k, &v, &frames)?;
    let m = masked_attention(&q, &k, &v, &frames, AttentionWindow::new(2 * t, t)?)?;
    Ok(within(m.max_abs_diff(&g)?, 1e-6, "max deviation at 512 tokens"))
}

fn sparse_all_frames_is_global() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(25);
    let frames = random_frames(9, 5, &mut rng);
    let (q, k, v) = random_qkv(frames.len(), 5, &mut rng)?;
    let all: Vec<usize> = (0..9).collect();
    let ok = sparse_attention(&q, &k, &v, &frames, &all)? == global_attention(&q, &k, &v, &frames)?;
    Ok((ok, "bitwise".into()))
}

fn argmax_locality() -> Result<(bool, String)> {
    // Every query scores one key far above the rest.
    let t = 12;
    let frames: Vec<usize> = (0..t * 3).map(|i| i / 3).collect();
    let n = frames.len();
    let mut ok = true;
    for target in [0, 7, 17, 35] {
        let q = Matrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { 0.0 })?;
        let k = Matrix::from_fn(n, 2, |j, c| match (c, j == target) {
            (0, true) => 40.0,
            (0, false) => 0.0,
            _ => 1.0,
        })?;
        for span in 1..=2 * t {
            let sel = KeySelection::from_window(AttentionWindow::new(span, t)?)?;
            let w = attention_weights(&q, &k, &frames, &sel)?;
            let admit = window_rule(span, t);
            for i in 0..n {
                if admit(frames[i], frames[target]) {
                    let row = &w[i * n..(i + 1) * n];
                    let best = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                    ok &= best == target;
                }
            }
        }
    }
    Ok((ok, "argmax fixed for every admitting window".into()))
}

fn within_frame_equivariance() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(26);
    let per = 5;
    let frames: Vec<usize> = (0..6 * per).map(|i| i / per).collect();
    let n = frames.len();
    let (q, k, v) = random_qkv(n, 4, &mut rng)?;
    // Reverse the tokens of frame 2.
    let perm: Vec<usize> = (0..n)
        .map(|i| if frames[i] == 2 { 2 * per + (3 * per - 1 - i) } else { i })
        .collect();
    let permute = |m: &Matrix| Matrix::from_fn(m.rows(), m.cols(), |i, c| m.get(perm[i], c));
    let mut worst: f64 = 0.0;
    for sel in [KeySelection::All, KeySelection::Window { span_frames: 3 }, KeySelection::KeyFrames(vec![0, 2, 4])] {
        let base = crate::attention::attend(&q, &k, &v, &frames, &sel)?.output;
        let moved = crate::attention::attend(&permute(&q)?, &permute(&k)?, &permute(&v)?, &frames, &sel)?.output;
        worst = worst.max(moved.max_abs_diff(&permute(&base)?)?);
    }
    Ok(within(worst, 1e-6, "max deviation"))
}

fn two_branch_reduction() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 16, 3, 3), 31)?;
    let w = QkvWeights::random(4, &mut SeededRng::new(32))?;
    let grid = Grid3::new(16, 3, 3);
    let lpf = gaussian_lowpass(grid, 0.25, DomainMode::Radial)?;
    let two = two_branch_trace(&tokens, &w, 1, 4, &lpf)?;
    let branches = [
        BranchConfig { alpha: 1, sparse: false, mask: lpf.complement() },
        BranchConfig { alpha: 4, sparse: false, mask: lpf },
    ];
    let multi = multiscale_attention(&tokens, &w, 4, &branches)?;
    Ok(within(multi.output.features().max_abs_diff(two.output.features())?, 1e-5, "max deviation"))
}

fn band_ownership() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 32, 3, 3), 33)?;
    let w = QkvWeights::random(4, &mut SeededRng::new(34))?;
    let plan = FusionPlan::four_x(8)?;
    let trace = multiband_trace(&tokens, &w, &plan)?;
    let out = fft3(&trace.output.to_latent()?);
    let spectra: Vec<_> = trace.branches.iter().map(|b| fft3(&b.latent)).collect();
    let masks = plan.branches(Grid3::new(32, 3, 3))?;
    let vol = 32 * 9;
    let mut worst: f64 = 0.0;
    for (i, z) in out.data().iter().enumerate() {
        let owner = masks.iter().position(|m| m.mask.weights()[i % vol] == 1.0).unwrap();
        worst = worst.max((z - spectra[owner].data()[i]).norm());
    }
    Ok(within(worst, 1e-4, "max deviation from owning branch"))
}

fn short_input_is_plain_attention() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 8, 2, 2), 35)?;
    let w = QkvWeights::random(4, &mut SeededRng::new(36))?;
    let (q, k, v) = crate::attention::project_qkv(&tokens, &w)?;
    let plain = global_attention(&q, &k, &v, tokens.frame_index())?;
    let mut worst: f64 = 0.0;
    for alphas in [vec![1, 2], vec![1, 2, 4], vec![1, 2, 4, 8]] {
        let plan = FusionPlan::new(8, alphas)?;
        worst = worst.max(multiband_attention(&tokens, &w, &plan)?.features().max_abs_diff(&plain)?);
        if plan.alphas.len() == 2 {
            worst = worst.max(two_branch_attention(&tokens, &w, &plan)?.features().max_abs_diff(&plain)?);
        }
    }
    Ok(within(worst, 1e-4, "max deviation"))
}

fn sparse_substitution() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 32, 2, 2), 37)?;
    let w = QkvWeights::random(4, &mut SeededRng::new(38))?;
    let dense_plan = FusionPlan::four_x(8)?;
    let dense = multiband_trace(&tokens, &w, &dense_plan)?;
    let sparse = multiband_trace(&tokens, &w, &dense_plan.clone().with_sparse_global(true))?;
    let coarse = band_masks(&dense_plan.alphas, Grid3::new(32, 2, 2), dense_plan.domain_mode)?.pop().unwrap();
    let vol = 32 * 4;
    let mut outside_equal = true;
    let mut inside_changed = false;
    for (i, (a, b)) in dense.fused_spectrum.data().iter().zip(sparse.fused_spectrum.data()).enumerate() {
        if coarse.weights()[i % vol] == 0.0 {
            outside_equal &= a == b;
        } else {
            inside_changed |= a != b;
        }
    }
    Ok((outside_equal && inside_changed, "only the coarsest band changes".into()))
}

fn energy_bound() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 32, 2, 2), 39)?;
    let w = QkvWeights::random(4, &mut SeededRng::new(40))?;
    let trace = multiband_trace(&tokens, &w, &FusionPlan::eight_x(4)?)?;
    let spectra: Vec<_> = trace.branches.iter().map(|b| fft3(&b.latent)).collect();
    let bound: f64 = (0..trace.fused_spectrum.data().len())
        .map(|i| spectra.iter().map(|s| s.data()[i].norm_sqr()).fold(0.0, f64::max))
        .sum();
    let energy = trace.fused_spectrum.energy();
    Ok((energy <= bound * (1.0 + 1e-12), format!("fused {energy:.4} <= bound {bound:.4}")))
}

fn plan_invariants() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 32, 2, 2), 41)?;
    let w = QkvWeights::identity(4)?;
    let grid = Grid3::new(32, 2, 2);
    let mut branches = FusionPlan::four_x(8)?.branches(grid)?;
    branches[0].sparse = true;
    let too_short = FusionPlan::new(4, vec![1, 2, 4])?;
    let plan = FusionPlan::eight_x(8)?.with_sparse_global(true);
    let ok = multiscale_attention(&tokens, &w, 8, &branches).is_err()
        && multiband_attention(&tokens, &w, &too_short).is_err()
        && FusionPlan::new(8, vec![2, 1]).is_err()
        && FusionPlan::from_config_str(&plan.to_config_string())? == plan;
    Ok((ok, "sparse only on largest alpha, coverage, ordering, config roundtrip".into()))
}

const MIX_SPATIAL: SpatialShape = SpatialShape::new(4, 8, 8);

fn specmix_limits() -> Result<(bool, String)> {
    let mut ok = true;
    for (frames, t_alpha) in [(9, 4), (33, 8), (1, 1)] {
        let out = specmix_parts(&SpecMixParams::new(frames, t_alpha, 5)?, MIX_SPATIAL)?;
        for c in 0..MIX_SPATIAL.channels {
            if frames % 2 == 1 {
                ok &= out.mixed.frame(c, frames / 2) == out.base.frame(c, frames / 2);
            }
            if frames > 1 {
                ok &= out.mixed.frame(c, 0) == out.residual.frame(c, 0);
                ok &= out.mixed.frame(c, frames - 1) == out.residual.frame(c, frames - 1);
            }
        }
    }
    Ok((ok, "centre equals base, ends equal residual, bitwise".into()))
}

fn specmix_variance() -> Result<(bool, String)> {
    let (frames, seeds) = (16, 200);
    let mut sums = vec![0.0f64; frames];
    let mut count = 0usize;
    for seed in 0..seeds {
        let x = specmix(&SpecMixParams::new(frames, 4, seed)?, MIX_SPATIAL)?;
        for (t, s) in sums.iter_mut().enumerate() {
            for c in 0..MIX_SPATIAL.channels {
                *s += x.frame(c, t).iter().map(|&v| (v as f64).powi(2)).sum::<f64>();
            }
        }
        count += MIX_SPATIAL.channels * MIX_SPATIAL.height * MIX_SPATIAL.width;
    }
    let worst = sums.iter().map(|s| (s / count as f64 - 1.0).abs()).fold(0.0, f64::max);
    Ok(within(worst, 0.1, &format!("{seeds} seeds, largest per-frame variance error")))
}

fn specmix_determinism() -> Result<(bool, String)> {
    let p = SpecMixParams::new(24, 8, 77)?;
    let mut q = p;
    q.seed_res = 78;
    let ok = specmix(&p, MIX_SPATIAL)? == specmix(&p, MIX_SPATIAL)? && specmix(&p, MIX_SPATIAL)? != specmix(&q, MIX_SPATIAL)?;
    Ok((ok, "bit-identical for equal seeds".into()))
}

fn specmix_symmetry() -> Result<(bool, String)> {
    let mut ok = true;
    for frames in 1..40 {
        for t in 0..frames {
            ok &= center_distance(t, frames)? == center_distance(frames - 1 - t, frames)?;
        }
    }
    Ok((ok, "d(t) = d(T-1-t) for T < 40".into()))
}

fn specmix_windows() -> Result<(bool, String)> {
    let (frames, ta) = (32, 8);
    let b = base_noise(&SpecMixParams::new(frames, ta, 9)?, MIX_SPATIAL)?;
    let key = |t: usize| -> Vec<u32> {
        (0..MIX_SPATIAL.channels).flat_map(|c| b.frame(c, t).iter().map(|v| v.to_bits())).collect()
    };
    let mut first: Vec<Vec<u32>> = (0..ta).map(key).collect();
    first.sort();
    let mut ok = true;
    for start in (ta..frames).step_by(ta) {
        let mut w: Vec<Vec<u32>> = (start..start + ta).map(key).collect();
        w.sort();
        ok &= w == first;
    }
    Ok((ok, "every window is a permutation of the first".into()))
}

fn band_energy_total() -> Result<(bool, String)> {
    let x = gaussian_latent(Shape4::new(2, 24, 8, 8), &mut SeededRng::new(51))?;
    let mut worst: f64 = 0.0;
    for mode in [DomainMode::Temporal, DomainMode::Radial] {
        let e: f64 = band_energy(&x, &uniform_edges(16)?, mode)?.iter().sum();
        worst = worst.max((e - x.energy()).abs() / x.energy());
    }
    Ok(within(worst, 1e-5, "relative error"))
}

fn snr_scale_invariance() -> Result<(bool, String)> {
    let r = gaussian_latent(Shape4::new(1, 16, 4, 4), &mut SeededRng::new(52))?;
    let e = make_scene(&SyntheticScene::new(Shape4::new(1, 32, 4, 4), 53).with_tone(Axis::T, 0.25, 1.0).with_noise(0.5))?;
    let edges = uniform_edges(8)?;
    let a = relative_snr(&r, &e, &edges, 0.9, DomainMode::Temporal)?;
    let b = relative_snr(&r, &e.scaled(4.0)?, &edges, 0.9, DomainMode::Temporal)?;
    let worst = a.ratios.iter().zip(&b.ratios).map(|(x, y)| (x - y).abs() / x.max(1e-300)).fold(0.0, f64::max);
    Ok(within(worst, 1e-12, "relative change"))
}

fn snr_report_bounds() -> Result<(bool, String)> {
    let r = gaussian_latent(Shape4::new(2, 16, 4, 4), &mut SeededRng::new(54))?;
    let e = gaussian_latent(Shape4::new(2, 64, 4, 4), &mut SeededRng::new(55))?;
    let rep = relative_snr(&r, &e, &uniform_edges(16)?, 0.9, DomainMode::Temporal)?;
    let ok = rep.ratios.iter().all(|&v| v >= 0.0)
        && rep.available_count <= rep.band_count()
        && rep.available_count == rep.ratios.iter().filter(|&&v| v >= 0.9).count();
    Ok((ok, format!("{}/{} bands available", rep.available_count, rep.band_count())))
}

fn aggregate_row_stochastic() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(56);
    let t = 8;
    let frames = random_frames(t, 4, &mut rng);
    let mut maps = Vec::new();
    let mut worst: f64 = 0.0;
    for span in [2, 4, 16, 3] {
        let (q, k, _) = random_qkv(frames.len(), 4, &mut rng)?;
        let weights = attention_weights(&q, &k, &frames, &KeySelection::from_window(AttentionWindow::new(span, t)?)?)?;
        maps.push(TokenAttentionMap { weights, frame_index: frames.clone() });
        let m = aggregate_attention(&maps, t)?;
        for row in m.matrix.chunks(t) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(within(worst, 1e-6, "max row-sum error over 1..4 maps"))
}

fn diagonality_bounds() -> Result<(bool, String)> {
    let t = 64;
    let uniform = diagonality(&AttnMap::uniform(t));
    let cells = (0..t).map(|i| (0..t).filter(|&j| i.abs_diff(j) <= 4).count()).sum::<usize>();
    let ok = diagonality(&AttnMap::identity(t)) == 1.0 && (uniform - cells as f64 / (t * t) as f64).abs() < 1e-12;
    Ok((ok, format!("identity 1, uniform {uniform:.4} at T = {t}")))
}

fn stack_determinism() -> Result<(bool, String)> {
    let tokens = noise_tokens(Shape4::new(4, 32, 2, 2), 61)?;
    let plan = FusionPlan::four_x(8)?;
    let src = WeightSource::Random { seed: 62 };
    let a = checksum(run_stack(&tokens, &plan, 3, src)?.features().data());
    let b = checksum(run_stack(&tokens, &plan, 3, src)?.features().data());
    Ok((a == b, format!("checksum {a:016x}")))
}

fn tone_placement() -> Result<(bool, String)> {
    let n = 16;
    let mut ok = true;
    for (k, axis) in [(3usize, Axis::T), (2, Axis::H), (5, Axis::W)] {
        let freq = 2.0 * k as f64 / n as f64;
        let x = make_scene(&SyntheticScene::new(Shape4::new(1, n, n, n), 0).with_tone(axis, freq, 1.0))?;
        let spec = fft3(&x);
        let peak = (0..spec.data().len()).max_by(|&a, &b| spec.data()[a].norm_sqr().total_cmp(&spec.data()[b].norm_sqr())).unwrap();
        let idx = match axis {
            Axis::T => peak / (n * n),
            Axis::H => (peak / n) % n,
            Axis::W => peak % n,
        };
        ok &= idx == k || idx == n - k;
    }
    Ok((ok, "peak at round(freq * N / 2) on each axis".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let results = run_selftest();
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn report_is_stable() {
        let r = vec![
            CheckResult { name: "a.b", passed: true, detail: "x".into() },
            CheckResult { name: "c.d", passed: false, detail: "y".into() },
        ];
        let text = format_report(&r);
        assert!(text.starts_with("PASS a.b"));
        assert!(text.contains("FAIL c.d"));
        assert!(text.ends_with("1/2 checks passed\n"));
    }
}
