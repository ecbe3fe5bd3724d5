//! Brute-force attention used to check the fast paths.

use super::Matrix;

/// Full `n x n` logits with `-inf` wherever `admit(query_frame, key_frame)`
/// is false, then softmax and a dense product with `v`. Row-major `n x d_v`.
pub fn brute_force_attention(q: &Matrix, k: &Matrix, v: &Matrix, frames: &[usize], admit: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let n = q.rows();
    let d = q.cols() as f64;
    let mut out = vec![0.0; n * v.cols()];
    for i in 0..n {
        let logits: Vec<f64> = (0..n)
            .map(|j| {
                if admit(frames[i], frames[j]) {
                    (0..q.cols()).map(|m| q.get(i, m) as f64 * k.get(j, m) as f64).sum::<f64>() / d.sqrt()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for c in 0..v.cols() {
            out[i * v.cols() + c] = (0..n).map(|j| e[j] / s * v.get(j, c) as f64).sum();
        }
    }
    out
}

/// Largest `|m - reference|` over all entries.
pub fn max_deviation(m: &Matrix, reference: &[f64]) -> f64 {
    m.data()
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a as f64 - b).abs())
        .fold(0.0, f64::max)
}
