//! Random-coding ensemble decoder for codebooks too large to enumerate.
//!
//! Given the received block, the metrics of the `M - 1` incorrect
//! codewords are i.i.d.: `K·D(m') = Σ_k d_{k,J_k}` with `J_k` uniform. Their
//! lower tail `q = P(K·D(m') <= K·D(sent))` follows from the conditional
//! cumulant generating function
//!
//! ```text
//! κ(μ) = Σ_k [log Σ_j exp(μ·d_kj) - log J]        (= K·Λ̂(μ))
//! ```
//!
//! by the Lugannani-Rice saddlepoint formula, and the decoder errs with
//! probability `1 - (1 - q)^(M-1)`. When it errs, the decoded codeword is
//! drawn from the per-symbol tilted law `p_kj ∝ exp(μ·d_kj)` at the level of
//! the winning competitor's metric, which is itself sampled from the law of
//! the minimum of `M - 1` draws conditioned to fall below the sent metric.
//! The tilted draw is an approximation: it matches the competitor law
//! conditioned on its metric only to first order.

use rand::Rng;

use crate::numeric::{ln_normal_cdf, mills_ratio, normal_cdf, normal_pdf, ExactSum};
use crate::psk::{DistanceTable, Symbol};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgfPoint {
    pub mu: f64,
    pub kappa: f64,
    /// `κ'(μ)`, the tilted mean of `K·D(m')`.
    pub slope: f64,
    /// `κ''(μ)`.
    pub curvature: f64,
}

/// Cumulant generating function of an incorrect codeword's summed metric.
pub struct ConditionalCgf<'a> {
    table: &'a DistanceTable,
    ln_j: f64,
    min_total: f64,
    max_total: f64,
    mean_total: f64,
    ln_p_min: f64,
}

impl<'a> ConditionalCgf<'a> {
    pub fn new(table: &'a DistanceTable) -> Self {
        let j = table.order() as f64;
        let (mut lo, mut hi, mut mean, mut ln_p_min) =
            (ExactSum::new(), ExactSum::new(), ExactSum::new(), 0.0);
        for row in table.rows() {
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lo.add(min);
            hi.add(max);
            mean.add(row.iter().sum::<f64>() / j);
            ln_p_min += (row.iter().filter(|&&d| d == min).count() as f64 / j).ln();
        }
        ConditionalCgf {
            table,
            ln_j: j.ln(),
            min_total: lo.value(),
            max_total: hi.value(),
            mean_total: mean.value(),
            ln_p_min,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean_total
    }

    pub fn at(&self, mu: f64) -> CgfPoint {
        let (mut kappa, mut slope, mut curvature) = (0.0, 0.0, 0.0);
        let mut w = vec![0.0; self.table.order()];
        for row in self.table.rows() {
            let shift = row.iter().map(|d| mu * d).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (wj, d) in w.iter_mut().zip(row) {
                *wj = (mu * d - shift).exp();
                z += *wj;
            }
            let mean = w.iter().zip(row).map(|(wj, d)| wj * d).sum::<f64>() / z;
            let var = w
                .iter()
                .zip(row)
                .map(|(wj, d)| wj * (d - mean) * (d - mean))
                .sum::<f64>()
                / z;
            kappa += shift + z.ln() - self.ln_j;
            slope += mean;
            curvature += var;
        }
        CgfPoint {
            mu,
            kappa,
            slope,
            curvature,
        }
    }

    /// Lugannani-Rice `ln P(S <= κ'(μ))`.
    pub fn ln_cdf_at(&self, mu: f64) -> f64 {
        lugannani_rice_ln_cdf(&self.at(mu))
    }

    /// Saddlepoint solving `κ'(μ) = t`, for `min_total < t < max_total`.
    fn saddlepoint(&self, t: f64) -> f64 {
        let (mut lo, mut hi) = if t < self.mean_total {
            (-1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        for _ in 0..200 {
            if t < self.mean_total && self.at(lo).slope > t {
                hi = lo;
                lo *= 2.0;
            } else if t >= self.mean_total && self.at(hi).slope < t {
                lo = hi;
                hi *= 2.0;
            } else {
                break;
            }
        }
        let mut mu = 0.5 * (lo + hi);
        for _ in 0..200 {
            let p = self.at(mu);
            let f = p.slope - t;
            if f.abs() <= 1e-13 * (1.0 + t.abs()) {
                break;
            }
            if f > 0.0 {
                hi = mu;
            } else {
                lo = mu;
            }
            let newton = mu - f / p.curvature;
            mu = if p.curvature > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * (1.0 + mu.abs()) {
                break;
            }
        }
        mu
    }

    /// `ln P(S <= t)` for `S` the summed metric of one incorrect codeword.
    pub fn ln_lower_tail(&self, t: f64) -> f64 {
        let tol = 1e-12 * (1.0 + self.max_total.abs());
        if t < self.min_total - tol {
            return f64::NEG_INFINITY;
        }
        if t <= self.min_total + tol {
            return self.ln_p_min;
        }
        if t >= self.max_total - tol {
            return 0.0;
        }
        self.ln_cdf_at(self.saddlepoint(t))
    }

    /// `μ` at which the saddlepoint `ln P(S <= κ'(μ))` equals `target`,
    /// searching below `upper`.
    fn level_for(&self, target: f64, upper: f64) -> f64 {
        let mut hi = upper.min(0.0);
        let mut lo = hi - 1.0;
        for _ in 0..200 {
            if self.ln_cdf_at(lo) <= target {
                break;
            }
            hi = lo;
            lo *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.ln_cdf_at(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Lugannani-Rice approximation to `ln P(S <= κ'(μ))`. In the far lower
/// tail `Φ(ŵ)` is rewritten through the Mills ratio so the result stays
/// finite when the probability underflows.
pub fn lugannani_rice_ln_cdf(p: &CgfPoint) -> f64 {
    let w2 = 2.0 * (p.mu * p.slope - p.kappa);
    if w2 <= 0.0 || p.curvature <= 0.0 || p.mu == 0.0 {
        return 0.5f64.ln();
    }
    let w = p.mu.signum() * w2.sqrt();
    let u = p.mu * p.curvature.sqrt();
    if w.abs() < 1e-4 {
        return 0.5f64.ln();
    }
    if w < -5.0 {
        let x = -w;
        let bracket = mills_ratio(x) - 1.0 / x - 1.0 / u;
        return if bracket > 0.0 {
            -0.5 * w * w - LN_SQRT_2PI + bracket.ln()
        } else {
            ln_normal_cdf(w)
        };
    }
    let prob = normal_cdf(w) + normal_pdf(w) * (1.0 / w - 1.0 / u);
    if prob > 0.0 {
        prob.min(1.0).ln()
    } else {
        ln_normal_cdf(w)
    }
}

/// `ln(M - 1)` for a codebook of `round(exp(ln_size))` codewords.
pub fn ln_competitors(ln_size: f64) -> f64 {
    if ln_size < 36.0 {
        let m = ln_size.exp().round();
        (m - 1.0).ln()
    } else {
        ln_size
    }
}

/// `ln(-ln(1-q))` from `ln q`.
fn ln_neg_ln1m(ln_q: f64) -> f64 {
    if ln_q < -30.0 {
        ln_q
    } else if ln_q >= 0.0 {
        f64::INFINITY
    } else {
        (-(-ln_q.exp()).ln_1p()).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub correct: bool,
    /// `ln q`, the per-competitor undercut probability.
    pub ln_undercut: f64,
    pub error_probability: f64,
    /// Symbols of the decoded codeword.
    pub decoded: Vec<Symbol>,
}

/// Decodes one block against a fresh random codebook of
/// `round(exp(ln_size))` codewords containing `sent`.
pub fn ensemble_decode<R: Rng + ?Sized>(
    table: &DistanceTable,
    sent: &[Symbol],
    ln_size: f64,
    rng: &mut R,
) -> EnsembleOutcome {
    let ln_m1 = ln_competitors(ln_size);
    if ln_m1 == f64::NEG_INFINITY {
        return EnsembleOutcome {
            correct: true,
            ln_undercut: f64::NEG_INFINITY,
            error_probability: 0.0,
            decoded: sent.to_vec(),
        };
    }
    let cgf = ConditionalCgf::new(table);
    let mut acc = ExactSum::new();
    for (row, &s) in table.rows().zip(sent) {
        acc.add(row[s as usize]);
    }
    let t = acc.value();

    if cgf.max_total - cgf.min_total <= 1e-12 * (1.0 + cgf.max_total.abs()) {
        // Every codeword has the same metric; the tie-break picks uniformly.
        let p_err = 1.0 - (-ln_m1.exp().ln_1p()).exp();
        let correct = rng.random::<f64>() >= p_err;
        let decoded = if correct {
            sent.to_vec()
        } else {
            uniform_codeword(table, rng)
        };
        return EnsembleOutcome {
            correct,
            ln_undercut: 0.0,
            error_probability: p_err,
            decoded,
        };
    }

    let ln_q = cgf.ln_lower_tail(t);
    let ln_hazard = ln_m1 + ln_neg_ln1m(ln_q);
    let p_err = -(-ln_hazard.exp()).exp_m1();
    let correct = rng.random::<f64>() >= p_err;
    let decoded = if correct {
        sent.to_vec()
    } else {
        // Level of the best competitor: F(v) solves
        // 1 - (1 - F(v))^(M-1) = u·P_err.
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let ln_a = (-(-u * p_err).ln_1p()).ln() - ln_m1;
        let target = if ln_a < -30.0 {
            ln_a
        } else {
            (-(-ln_a.exp()).exp_m1()).ln()
        };
        let upper = if t < cgf.mean() {
            cgf.saddlepoint(t)
        } else {
            0.0
        };
        let mu = cgf.level_for(target, upper);
        tilted_codeword(table, mu, rng)
    };
    EnsembleOutcome {
        correct,
        ln_undercut: ln_q,
        error_probability: p_err,
        decoded,
    }
}

fn uniform_codeword<R: Rng + ?Sized>(table: &DistanceTable, rng: &mut R) -> Vec<Symbol> {
    (0..table.block_len())
        .map(|_| rng.random_range(0..table.order()) as Symbol)
        .collect()
}

/// One codeword with independent symbols, `P(J_k = j) ∝ exp(μ·d_kj)`.
pub fn tilted_codeword<R: Rng + ?Sized>(
    table: &DistanceTable,
    mu: f64,
    rng: &mut R,
) -> Vec<Symbol> {
    let mut w = vec![0.0; table.order()];
    table
        .rows()
        .map(|row| {
            let shift = row.iter().map(|d| mu * d).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (wj, d) in w.iter_mut().zip(row) {
                *wj = (mu * d - shift).exp();
                z += *wj;
            }
            let mut u = rng.random::<f64>() * z;
            let mut j = 0;
            while j + 1 < w.len() && u >= w[j] {
                u -= w[j];
                j += 1;
            }
            j as Symbol
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psk::{make_constellation, PscBlock};
    use crate::rng::rng_from_seed;
    use num_complex::Complex64;

    fn table(k: usize, rho: f64) -> DistanceTable {
        let pts = make_constellation(2).unwrap();
        let h: Vec<_> = (0..k)
            .map(|i| Complex64::from_polar(1.0, 0.9 * i as f64))
            .collect();
        let z: Vec<_> = (0..k)
            .map(|i| Complex64::new(0.5 * (2.1 * i as f64).sin(), 0.4 * (1.3 * i as f64).cos()))
            .collect();
        PscBlock::from_components(&pts, h, z, vec![0; k], rho)
            .unwrap()
            .distance_table(&pts)
    }

    #[test]
    fn cgf_vanishes_at_zero() {
        let t = table(20, 1.0);
        let cgf = ConditionalCgf::new(&t);
        let p = cgf.at(0.0);
        assert!(p.kappa.abs() < 1e-13);
        assert!((p.slope - cgf.mean()).abs() < 1e-12);
    }

    #[test]
    fn lower_tail_matches_enumeration() {
        // K = 12 binary symbols: 4096 equally likely competitors.
        let t = table(12, 1.0);
        let cgf = ConditionalCgf::new(&t);
        let mut totals: Vec<f64> = (0..1u32 << 12)
            .map(|m| (0..12).map(|k| t.row(k)[((m >> k) & 1) as usize]).sum())
            .collect();
        totals.sort_by(f64::total_cmp);
        for idx in [20, 200, 1000] {
            let level = 0.5 * (totals[idx - 1] + totals[idx]);
            let exact = idx as f64 / 4096.0;
            let approx = cgf.ln_lower_tail(level).exp();
            assert!(
                (approx / exact - 1.0).abs() < 0.25,
                "idx {idx}: {approx} vs {exact}"
            );
        }
    }

    #[test]
    fn single_codeword_never_errs() {
        let t = table(8, 1.0);
        let mut rng = rng_from_seed(1);
        let out = ensemble_decode(&t, &[0; 8], 0.0, &mut rng);
        assert!(out.correct);
        assert_eq!(out.error_probability, 0.0);
    }

    #[test]
    fn huge_codebook_always_errs() {
        let t = table(8, 1.0);
        let mut rng = rng_from_seed(2);
        let out = ensemble_decode(&t, &[0; 8], 200.0, &mut rng);
        assert!(!out.correct);
        assert_eq!(out.decoded.len(), 8);
    }

    #[test]
    fn competitor_count() {
        assert_eq!(ln_competitors(0.0), f64::NEG_INFINITY);
        assert!((ln_competitors(2f64.ln()) - 0.0).abs() < 1e-15);
        assert!((ln_competitors(1001f64.ln()) - 1000f64.ln()).abs() < 1e-12);
        assert_eq!(ln_competitors(50.0), 50.0);
    }
}
