//! Frequency-distortion diagnostics and attention-map summaries.
//!
//! Band edges here are normalized frequencies in units of pi, so `0.25` means
//! `0.25 pi` and bands tile `[0, 1]`.
//!
//! "Relative SNR" is measured as the ratio of normalized band energy
//! (band energy over total energy) between an extended sequence and a
//! reference. A ratio of 1 means the band holds the same share of energy in
//! both; sequences of different lengths are directly comparable.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectral::{band_index, fft3, frequency_map, DomainMode};
use crate::tensor::VideoLatent;

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_BAND_COUNT: usize = 16;

/// Interior edges of `count` equal-width bands over `[0, 1]`.
pub fn uniform_edges(count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter("band count must be at least 1".into()));
    }
    Ok((1..count).map(|k| k as f64 / count as f64).collect())
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "band edges {edges:?} must lie strictly inside (0, 1)"
        )));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "band edges {edges:?} must be strictly ascending"
        )));
    }
    Ok(())
}

/// `sum |X(k)|^2` per band, over all channels. A bin on an edge counts toward
/// the lower band.
pub fn band_energy(x: &VideoLatent, edges: &[f64], mode: DomainMode) -> Result<Vec<f64>> {
    validate_edges(edges)?;
    let spec = fft3(x);
    let grid = x.shape().grid();
    let owner: Vec<usize> = frequency_map(grid, mode)
        .into_iter()
        .map(|f| band_index(f, edges))
        .collect();
    let mut out = vec![0.0; edges.len() + 1];
    for (i, z) in spec.data().iter().enumerate() {
        out[owner[i % grid.len()]] += z.norm_sqr();
    }
    Ok(out)
}

/// Number of grid bins per band; the expectation for white noise is proportional to it.
pub fn band_bin_counts(grid: crate::tensor::Grid3, edges: &[f64], mode: DomainMode) -> Result<Vec<usize>> {
    validate_edges(edges)?;
    let mut out = vec![0usize; edges.len() + 1];
    for f in frequency_map(grid, mode) {
        out[band_index(f, edges)] += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    /// `0`, the interior edges, then `1`.
    pub band_edges: Vec<f64>,
    pub ratios: Vec<f64>,
    pub threshold: f64,
    pub available_count: usize,
}

impl SnrReport {
    pub fn band_count(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_available(&self, band: usize) -> bool {
        self.ratios[band] >= self.threshold
    }

    /// `band_lo,band_hi,ratio,available`, one row per band.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("band_lo,band_hi,ratio,available\n");
        for (b, r) in self.ratios.iter().enumerate() {
            writeln!(
                s,
                "{:.6},{:.6},{:.6},{}",
                self.band_edges[b],
                self.band_edges[b + 1],
                r,
                self.is_available(b)
            )
            .unwrap();
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (b, r) in self.ratios.iter().enumerate() {
            writeln!(
                s,
                "band {b:>2} [{:.4}pi, {:.4}pi] ratio {:.4} {}",
                self.band_edges[b],
                self.band_edges[b + 1],
                r,
                if self.is_available(b) { "available" } else { "distorted" }
            )
            .unwrap();
        }
        writeln!(
            s,
            "available {}/{} at threshold {}",
            self.available_count,
            self.band_count(),
            self.threshold
        )
        .unwrap();
        s
    }
}

/// Per-band ratio of normalized energy, extended over reference.
///
/// A band empty in the reference gets ratio 1 when it is also empty in the
/// extended sequence and infinity otherwise.
pub fn relative_snr(reference: &VideoLatent, extended: &VideoLatent, edges: &[f64], threshold: f64, mode: DomainMode) -> Result<SnrReport> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must be finite and >= 0")));
    }
    let re = band_energy(reference, edges, mode)?;
    let ee = band_energy(extended, edges, mode)?;
    let rt: f64 = re.iter().sum();
    if rt <= 0.0 {
        return Err(Error::DegenerateInput("reference has zero spectral energy".into()));
    }
    let et: f64 = ee.iter().sum();
    let ratios: Vec<f64> = re
        .iter()
        .zip(&ee)
        .map(|(&r, &e)| {
            let rn = r / rt;
            let en = if et > 0.0 { e / et } else { 0.0 };
            if rn > 0.0 {
                en / rn
            } else if en > 0.0 {
                f64::INFINITY
            } else {
                1.0
            }
        })
        .collect();
    let mut band_edges = vec![0.0];
    band_edges.extend_from_slice(edges);
    band_edges.push(1.0);
    let available_count = ratios.iter().filter(|&&r| r >= threshold).count();
    Ok(SnrReport {
        band_edges,
        ratios,
        threshold,
        available_count,
    })
}

/// A token-level `n x n` attention matrix with the frame id of each token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenAttentionMap {
    pub weights: Vec<f64>,
    pub frame_index: Vec<usize>,
}

/// Frame-level `T x T` row-stochastic attention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnMap {
    pub frames: usize,
    pub matrix: Vec<f64>,
    pub source: String,
}

impl AttnMap {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.frames + j]
    }

    pub fn identity(frames: usize) -> Self {
        let mut matrix = vec![0.0; frames * frames];
        for i in 0..frames {
            matrix[i * frames + i] = 1.0;
        }
        Self {
            frames,
            matrix,
            source: "identity".into(),
        }
    }

    pub fn uniform(frames: usize) -> Self {
        Self {
            frames,
            matrix: vec![1.0 / frames as f64; frames * frames],
            source: "uniform".into(),
        }
    }

    /// Header row `frame,0,1,...`, then one row per query frame.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame");
        for j in 0..self.frames {
            write!(s, ",{j}").unwrap();
        }
        s.push('\n');
        for i in 0..self.frames {
            write!(s, "{i}").unwrap();
            for j in 0..self.frames {
                write!(s, ",{:.6}", self.get(i, j)).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

fn normalize_rows(matrix: &mut [f64], frames: usize) {
    for row in matrix.chunks_mut(frames) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Frame-level pooling of one token map: mean weight over the token pairs
/// of every frame pair, rows renormalized.
pub fn pool_attention(map: &TokenAttentionMap, frames: usize) -> Result<Vec<f64>> {
    if frames == 0 {
        return Err(Error::InvalidParameter("zero frames".into()));
    }
    let n = map.frame_index.len();
    if map.weights.len() != n * n {
        return Err(Error::mismatch(format!("{n}x{n} weights"), map.weights.len()));
    }
    let mut counts = vec![0usize; frames];
    for &f in &map.frame_index {
        if f >= frames {
            return Err(Error::InvalidParameter(format!("frame id {f} outside [0, {frames})")));
        }
        counts[f] += 1;
    }
    let mut pooled = vec![0.0; frames * frames];
    for i in 0..n {
        let row = &map.weights[i * n..(i + 1) * n];
        let row_sum: f64 = row.iter().sum();
        if row.iter().any(|&w| w < 0.0 || !w.is_finite()) || (row_sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "row {i} is not stochastic (sum {row_sum})"
            )));
        }
        let fi = map.frame_index[i];
        for (j, &w) in row.iter().enumerate() {
            pooled[fi * frames + map.frame_index[j]] += w;
        }
    }
    for i in 0..frames {
        for j in 0..frames {
            let pairs = counts[i] * counts[j];
            if pairs > 0 {
                pooled[i * frames + j] /= pairs as f64;
            }
        }
    }
    normalize_rows(&mut pooled, frames);
    Ok(pooled)
}

/// Running mean of pooled maps, so token maps can be dropped as they arrive.
#[derive(Debug, Clone)]
pub struct AttnMapBuilder {
    frames: usize,
    sum: Vec<f64>,
    count: usize,
}

impl AttnMapBuilder {
    pub fn new(frames: usize) -> Self {
        Self {
            frames,
            sum: vec![0.0; frames * frames],
            count: 0,
        }
    }

    pub fn add(&mut self, map: &TokenAttentionMap) -> Result<()> {
        let pooled = pool_attention(map, self.frames)
            .map_err(|e| Error::InvalidParameter(format!("map {}: {e}", self.count)))?;
        for (a, p) in self.sum.iter_mut().zip(&pooled) {
            *a += p;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self, source: impl Into<String>) -> Result<AttnMap> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("no attention maps to aggregate".into()));
        }
        let mut matrix: Vec<f64> = self.sum.iter().map(|v| v / self.count as f64).collect();
        normalize_rows(&mut matrix, self.frames);
        Ok(AttnMap {
            frames: self.frames,
            matrix,
            source: source.into(),
        })
    }
}

/// Pools each token map to frame level, then averages the collection.
pub fn aggregate_attention(maps: &[TokenAttentionMap], frames: usize) -> Result<AttnMap> {
    if frames == 0 {
        return Err(Error::InvalidParameter("zero frames".into()));
    }
    let mut b = AttnMapBuilder::new(frames);
    for m in maps {
        b.add(m)?;
    }
    b.finish(format!("mean of {} maps", maps.len()))
}

/// Half-width of the diagonal band used by [`diagonality`].
pub fn diagonal_band(frames: usize) -> usize {
    (frames / 16).max(1)
}

/// Share of attention mass with `|i - j| <= max(1, T/16)`.
pub fn diagonality(map: &AttnMap) -> f64 {
    let band = diagonal_band(map.frames);
    let total: f64 = map.matrix.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut near = 0.0;
    for i in 0..map.frames {
        for j in 0..map.frames {
            if i.abs_diff(j) <= band {
                near += map.get(i, j);
            }
        }
    }
    near / total
}
