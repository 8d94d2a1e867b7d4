//! Nearest-neighbor block decoder for the metric
//! `D(m) = (1/K) Σ_k |x[k] - √ρ·ĥ[k]·θ_{s_m[k]}|²`,
//! i.e. the decoder that treats the PSC as memoryless Gaussian.
//!
//! Metrics are summed with [`ExactSum`], so each `D(m)` depends only on the
//! multiset of per-symbol terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numeric::{binomial_halfwidth, ExactSum, Moments, Z95};
use crate::psk::{symbol_distance, Codebook, DistanceTable, PscBlock, PskConstellation, Symbol};
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed};

/// Codebooks up to this size report every metric.
pub const FULL_METRICS_LIMIT: usize = 1 << 16;

pub fn metric(
    codeword: &[Symbol],
    block: &PscBlock,
    constellation: &PskConstellation,
) -> Result<f64> {
    ensure_len(block.len(), codeword.len())?;
    if block.is_empty() {
        return Err(Error::invalid("block", "must be non-empty"));
    }
    let amp = block.rho.sqrt();
    let mut acc = ExactSum::new();
    for ((x, h), &s) in block.x.iter().zip(&block.h_hat).zip(codeword) {
        acc.add(symbol_distance(*x, amp * h, constellation.point(s)));
    }
    Ok(acc.value() / block.len() as f64)
}

/// `D(m)` from a precomputed distance table; bit-identical to [`metric`].
pub fn table_metric(codeword: &[Symbol], table: &DistanceTable) -> f64 {
    let mut acc = ExactSum::new();
    for (row, &s) in table.rows().zip(codeword) {
        acc.add(row[s as usize]);
    }
    acc.value() / codeword.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    /// Zero-based index of the chosen message.
    pub chosen_message: usize,
    pub chosen_metric: f64,
    /// Every `D(m)` when `M <= 2^16`, otherwise empty.
    pub metrics: Vec<f64>,
    /// Second-best message and its metric, when `M >= 2`.
    pub runner_up: Option<(usize, f64)>,
    pub correct: bool,
}

/// Minimum-metric decoding with ties broken toward the lowest index.
/// `sent` is the zero-based index of the transmitted message.
pub fn decode(
    codebook: &Codebook,
    block: &PscBlock,
    constellation: &PskConstellation,
    sent: usize,
) -> Result<DecodeOutcome> {
    ensure_len(block.len(), codebook.block_len())?;
    if sent >= codebook.size() {
        return Err(Error::invalid(
            "sent",
            format!("message {sent} outside a codebook of {}", codebook.size()),
        ));
    }
    let table = block.distance_table(constellation);
    Ok(decode_with_table(codebook, &table, sent))
}

pub(crate) fn decode_with_table(
    codebook: &Codebook,
    table: &DistanceTable,
    sent: usize,
) -> DecodeOutcome {
    let keep = codebook.size() <= FULL_METRICS_LIMIT;
    let mut metrics = Vec::with_capacity(if keep { codebook.size() } else { 0 });
    let mut best = (0usize, f64::INFINITY);
    let mut second: Option<(usize, f64)> = None;
    for (m, cw) in codebook.codewords().enumerate() {
        let d = table_metric(cw, table);
        if keep {
            metrics.push(d);
        }
        if d < best.1 {
            second = (best.1.is_finite()).then_some(best);
            best = (m, d);
        } else if second.is_none_or(|(_, s)| d < s) {
            second = Some((m, d));
        }
    }
    DecodeOutcome {
        chosen_message: best.0,
        chosen_metric: best.1,
        metrics,
        runner_up: second,
        correct: best.0 == sent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndercutMethod {
    /// Plain Monte Carlo over (fading, noise, competitor codeword).
    Direct,
    /// Importance sampling under the exponentially tilted law at `s = 1/2`
    /// (the Chernoff-optimal tilt for this symmetric pair), which reaches
    /// probabilities far below `1/n_trials`.
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndercutEstimate {
    pub probability: f64,
    /// Natural log of `probability`, exact even when it underflows.
    pub ln_probability: f64,
    /// 95% half-width on `probability`.
    pub ci_halfwidth: f64,
    pub block_len: usize,
    pub trials: u64,
    pub method: UndercutMethod,
}

impl UndercutEstimate {
    /// `-(1/K) ln P̂`.
    pub fn exponent(&self) -> f64 {
        -self.ln_probability / self.block_len as f64
    }
}

const UNDERCUT_CHUNK: u64 = 4096;

/// Probability that an independent random codeword's metric is at most the
/// transmitted codeword's, `P(D(m') <= D(1))`, over a memoryless PSC with
/// Rayleigh fading and unit noise. Exact ties count one half (random
/// tie-breaking), so `ρ = 0` gives exactly 1/2.
///
/// By rotational symmetry the transmitted symbol is taken as `θ_0`; the
/// per-symbol metric difference is `|z + d|² - |z|²` with
/// `d = √ρ·h·(θ_0 - θ_j)`.
pub fn pairwise_undercut_probability(
    constellation: &PskConstellation,
    rho: f64,
    block_len: usize,
    trials: u64,
    seed: u64,
    method: UndercutMethod,
) -> Result<UndercutEstimate> {
    if block_len == 0 {
        return Err(Error::invalid("K", "block length must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::invalid("n_trials", "must be at least 1"));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(
            "rho",
            format!("must be finite and non-negative, got {rho}"),
        ));
    }
    let chunks = trials.div_ceil(UNDERCUT_CHUNK);
    let run = |chunk: u64| -> Moments {
        let n = UNDERCUT_CHUNK.min(trials - chunk * UNDERCUT_CHUNK);
        let mut rng = rng_from_seed(derive_seed(seed, chunk + 1));
        let mut mom = Moments::default();
        for _ in 0..n {
            let w = match method {
                UndercutMethod::Direct => direct_trial(constellation, rho, block_len, &mut rng),
                UndercutMethod::Tilted => tilted_trial(constellation, rho, block_len, &mut rng),
            };
            mom.push(w);
        }
        mom
    };
    let parts: Vec<Moments> = (0..chunks).into_par_iter().map(run).collect();
    let mom = parts.iter().fold(Moments::default(), |acc, m| acc.merge(m));

    Ok(match method {
        UndercutMethod::Direct => {
            let p = mom.mean;
            UndercutEstimate {
                probability: p,
                ln_probability: p.ln(),
                ci_halfwidth: binomial_halfwidth((p * trials as f64).round() as u64, trials),
                block_len,
                trials,
                method,
            }
        }
        UndercutMethod::Tilted => {
            let ln_scale = block_len as f64 * tilt_normalizer(constellation, rho).ln();
            UndercutEstimate {
                probability: (ln_scale + mom.mean.ln()).exp(),
                ln_probability: ln_scale + mom.mean.ln(),
                ci_halfwidth: Z95 * mom.std_error() * ln_scale.exp(),
                block_len,
                trials,
                method,
            }
        }
    })
}

fn tie_weight(diff: f64) -> f64 {
    if diff < 0.0 {
        1.0
    } else if diff == 0.0 {
        0.5
    } else {
        0.0
    }
}

fn direct_trial<R: rand::Rng>(
    constellation: &PskConstellation,
    rho: f64,
    k: usize,
    rng: &mut R,
) -> f64 {
    let amp = rho.sqrt();
    let (mut sent, mut other) = (0.0, 0.0);
    for _ in 0..k {
        let h = complex_gaussian(rng, 1.0);
        let z = complex_gaussian(rng, 1.0);
        let s = constellation.point(constellation.random_symbol(rng));
        let s2 = constellation.point(constellation.random_symbol(rng));
        let x = amp * h * s + z;
        sent += symbol_distance(x, amp * h, s);
        other += symbol_distance(x, amp * h, s2);
    }
    tie_weight(other - sent)
}

/// `c_j = ρ|θ_0 - θ_j|²/4`; the tilted law picks `j` with weight
/// `1/(1+c_j)`, then `h ~ CN(0, 1/(1+c_j))` and `z ~ CN(-d/2, 1)`.
fn tilt_weights(constellation: &PskConstellation, rho: f64) -> Vec<f64> {
    let t0 = constellation.points()[0];
    constellation
        .points()
        .iter()
        .map(|t| 1.0 / (1.0 + rho * (t0 - t).norm_sqr() / 4.0))
        .collect()
}

/// `E[exp(-(|z+d|² - |z|²)/2)]` per symbol under the untilted law.
fn tilt_normalizer(constellation: &PskConstellation, rho: f64) -> f64 {
    let w = tilt_weights(constellation, rho);
    w.iter().sum::<f64>() / w.len() as f64
}

fn tilted_trial<R: rand::Rng>(
    constellation: &PskConstellation,
    rho: f64,
    k: usize,
    rng: &mut R,
) -> f64 {
    let weights = tilt_weights(constellation, rho);
    let total: f64 = weights.iter().sum();
    let t0 = constellation.points()[0];
    let amp = rho.sqrt();
    let mut diff = 0.0;
    for _ in 0..k {
        let mut u = rng.random::<f64>() * total;
        let mut j = 0;
        while j + 1 < weights.len() && u >= weights[j] {
            u -= weights[j];
            j += 1;
        }
        let h = complex_gaussian(rng, weights[j]);
        let d = amp * h * (t0 - constellation.points()[j]);
        let z = complex_gaussian(rng, 1.0) - 0.5 * d;
        diff += (z + d).norm_sqr() - z.norm_sqr();
    }
    // Likelihood ratio m^K e^{W/2}; the m^K factor is applied by the caller.
    tie_weight(diff) * (0.5 * diff.min(0.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psk::{generate_codebook, make_constellation};
    use num_complex::Complex64;

    fn block(pts: &PskConstellation, cw: &[Symbol], rho: f64, noise: f64) -> PscBlock {
        let h: Vec<_> = (0..cw.len())
            .map(|k| Complex64::from_polar(1.0 + 0.1 * k as f64, 0.7 * k as f64))
            .collect();
        let z: Vec<_> = (0..cw.len())
            .map(|k| Complex64::new(noise * (k as f64).cos(), noise * 0.3))
            .collect();
        PscBlock::from_components(pts, h, z, cw.to_vec(), rho).unwrap()
    }

    #[test]
    fn true_codeword_in_noiseless_block_scores_zero() {
        let pts = make_constellation(4).unwrap();
        let cw = [0, 1, 2, 3, 1];
        let b = block(&pts, &cw, 2.0, 0.0);
        assert_eq!(metric(&cw, &b, &pts).unwrap(), 0.0);
    }

    #[test]
    fn zero_snr_metric_is_message_independent() {
        let pts = make_constellation(4).unwrap();
        let b = block(&pts, &[0, 1, 2, 3], 0.0, 0.8);
        let energy = b.x.iter().map(|x| x.norm_sqr()).sum::<f64>() / 4.0;
        for cw in [[0, 0, 0, 0], [3, 2, 1, 0], [1, 1, 2, 2]] {
            assert!((metric(&cw, &b, &pts).unwrap() - energy).abs() < 1e-15);
        }
    }

    #[test]
    fn metric_rejects_length_mismatch() {
        let pts = make_constellation(2).unwrap();
        let b = block(&pts, &[0, 1, 0], 1.0, 0.1);
        assert!(matches!(
            metric(&[0, 1], &b, &pts),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_codeword_always_wins() {
        let pts = make_constellation(4).unwrap();
        let cb = generate_codebook(&pts, 1, 6, 1).unwrap();
        let b = block(&pts, &[2, 2, 2, 2, 2, 2], 1.0, 3.0);
        let out = decode(&cb, &b, &pts, 0).unwrap();
        assert_eq!(out.chosen_message, 0);
        assert!(out.correct);
        assert_eq!(out.runner_up, None);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = make_constellation(2).unwrap();
        let cb = generate_codebook(&pts, 4, 3, 5).unwrap();
        // Same codeword repeated: rho = 0 makes every metric identical.
        let b = block(&pts, cb.codeword(2), 0.0, 1.0);
        let out = decode(&cb, &b, &pts, 2).unwrap();
        assert_eq!(out.chosen_message, 0);
        assert!(!out.correct);
        assert!(out.metrics.iter().all(|&m| m == out.metrics[0]));
    }

    #[test]
    fn noiseless_block_decodes_to_sent_message() {
        let pts = make_constellation(4).unwrap();
        let cb = generate_codebook(&pts, 64, 12, 17).unwrap();
        for sent in [0, 13, 63] {
            let b = block(&pts, cb.codeword(sent), 3.0, 0.0);
            let out = decode(&cb, &b, &pts, sent).unwrap();
            assert_eq!(out.chosen_message, sent);
            assert_eq!(out.chosen_metric, 0.0);
        }
    }

    #[test]
    fn zero_snr_undercut_is_one_half() {
        let pts = make_constellation(2).unwrap();
        for method in [UndercutMethod::Direct, UndercutMethod::Tilted] {
            let est = pairwise_undercut_probability(&pts, 0.0, 8, 1000, 3, method).unwrap();
            assert_eq!(est.probability, 0.5, "{method:?}");
        }
    }
}
