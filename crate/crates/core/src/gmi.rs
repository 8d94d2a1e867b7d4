//! Generalized mutual information of a PSC from one long sample path.
//!
//! With i.i.d. uniform PSK codewords the log-MGF of an incorrect codeword's
//! metric factors over symbols:
//!
//! ```text
//! Λ̂(μ) = (1/K) Σ_k log Σ_j exp(μ |x_k - √ρ·θ_j·ĥ_k|²) - log J
//! ```
//!
//! and the GMI is `sup_{μ<0} μ - Λ̂(μ)`, the reference level 1 being the
//! limit of the true codeword's metric.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, ExactSum, Z95};
use crate::optimize::golden_section_max;
use crate::psk::{DistanceTable, PscBlock, PskConstellation};
use crate::rng::rng_from_seed;

pub fn lambda_hat(mu: f64, block: &PscBlock, constellation: &PskConstellation) -> Result<f64> {
    if block.is_empty() {
        return Err(Error::invalid("block", "must be non-empty"));
    }
    lambda_from_table(mu, &block.distance_table(constellation))
}

/// [`lambda_hat`] on a precomputed distance table.
pub fn lambda_from_table(mu: f64, table: &DistanceTable) -> Result<f64> {
    if mu > 0.0 || mu.is_nan() {
        return Err(Error::PositiveMu(mu));
    }
    let segments = Segments::new(table.block_len(), 1);
    Ok(segments.lambda(mu, table))
}

fn row_term(mu: f64, row: &[f64], ln_j: f64, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(row.iter().map(|d| mu * d));
    log_sum_exp(scratch) - ln_j
}

/// Contiguous segments of the block, used both to parallelize the sums and
/// as the resampling unit of the bootstrap.
struct Segments {
    bounds: Vec<(usize, usize)>,
    total: usize,
}

impl Segments {
    fn new(total: usize, count: usize) -> Self {
        let count = count.clamp(1, total.max(1));
        let bounds = (0..count)
            .map(|i| (i * total / count, (i + 1) * total / count))
            .collect();
        Segments { bounds, total }
    }

    /// Per-segment sums of the per-symbol terms of `Λ̂(μ)`.
    fn sums(&self, mu: f64, table: &DistanceTable) -> Vec<f64> {
        let ln_j = (table.order() as f64).ln();
        self.bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut scratch = Vec::with_capacity(table.order());
                let mut acc = ExactSum::new();
                for k in lo..hi {
                    acc.add(row_term(mu, table.row(k), ln_j, &mut scratch));
                }
                acc.value()
            })
            .collect()
    }

    fn lambda(&self, mu: f64, table: &DistanceTable) -> f64 {
        let mut acc = ExactSum::new();
        for s in self.sums(mu, table) {
            acc.add(s);
        }
        acc.value() / self.total as f64
    }

    fn len(&self, i: usize) -> usize {
        self.bounds[i].1 - self.bounds[i].0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmiOptions {
    pub mu_range: (f64, f64),
    /// Golden-section bracket tolerance on μ.
    pub tolerance: f64,
    pub bootstrap_segments: usize,
    pub bootstrap_replicates: usize,
    pub bootstrap_seed: u64,
    /// Points in the reported Λ̂ curve.
    pub curve_points: usize,
}

impl Default for GmiOptions {
    fn default() -> Self {
        GmiOptions {
            mu_range: (-32.0, -1e-4),
            tolerance: 1e-6,
            bootstrap_segments: 64,
            bootstrap_replicates: 1000,
            bootstrap_seed: 0x5eed,
            curve_points: 41,
        }
    }
}

/// All rates in nats per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmiReport {
    pub mu_star: f64,
    /// `max(g(μ*), 0)`.
    pub gmi: f64,
    /// `g(μ*)` before clamping.
    pub g_at_mu_star: f64,
    pub g_at_minus_one: f64,
    pub lambda_curve: Vec<(f64, f64)>,
    pub n_samples: usize,
    /// 95% bootstrap half-width of `g(μ*)`.
    pub ci_halfwidth: f64,
    pub std_error: f64,
    pub ci_at_minus_one: f64,
    pub std_error_at_minus_one: f64,
}

/// Maximizes `g(μ) = μ - Λ̂(μ)` over `mu_range`.
pub fn gmi(
    block: &PscBlock,
    constellation: &PskConstellation,
    options: &GmiOptions,
) -> Result<GmiReport> {
    if block.is_empty() {
        return Err(Error::invalid("block", "must be non-empty"));
    }
    gmi_from_table(&block.distance_table(constellation), options)
}

pub fn gmi_from_table(table: &DistanceTable, options: &GmiOptions) -> Result<GmiReport> {
    let (lo, hi) = options.mu_range;
    if !(lo < hi && hi < 0.0 && lo.is_finite()) {
        return Err(Error::invalid(
            "mu_range",
            format!("need mu_min < mu_max < 0, got ({lo}, {hi})"),
        ));
    }
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::invalid("tolerance", "must be positive"));
    }
    let n = table.block_len();
    if n == 0 {
        return Err(Error::invalid("block", "must be non-empty"));
    }
    let segments = Segments::new(n, options.bootstrap_segments);
    let g = |mu: f64| mu - segments.lambda(mu, table);

    let best = golden_section_max(g, lo, hi, options.tolerance);
    let mu_star = best.argmax;

    let lambda_curve = lambda_curve(&segments, table, lo, hi, options.curve_points.max(3));
    check_convexity(&lambda_curve)?;

    let at_star = segments.sums(mu_star, table);
    let at_one = segments.sums(-1.0, table);
    let g_at_mu_star = mu_star - sum_exact(&at_star) / n as f64;
    let g_at_minus_one = -1.0 - sum_exact(&at_one) / n as f64;
    let (std_error, std_error_at_minus_one) = bootstrap(&segments, &at_star, &at_one, options);

    Ok(GmiReport {
        mu_star,
        gmi: g_at_mu_star.max(0.0),
        g_at_mu_star,
        g_at_minus_one,
        lambda_curve,
        n_samples: n,
        ci_halfwidth: Z95 * std_error,
        std_error,
        ci_at_minus_one: Z95 * std_error_at_minus_one,
        std_error_at_minus_one,
    })
}

fn sum_exact(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Grid that is uniform in `log(-μ)`, since the interesting region sits
/// near `μ = -1` while the range spans several decades. The end points and
/// `μ = -1` (when in range) are always included.
fn lambda_curve(
    segments: &Segments,
    table: &DistanceTable,
    lo: f64,
    hi: f64,
    points: usize,
) -> Vec<(f64, f64)> {
    let (a, b) = ((-lo).ln(), (-hi).ln());
    let mut mus: Vec<f64> = (0..points)
        .map(|i| -(a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect();
    mus[0] = lo;
    mus[points - 1] = hi;
    if lo < -1.0 && hi > -1.0 {
        mus.push(-1.0);
    }
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    mus.into_iter()
        .map(|mu| (mu, segments.lambda(mu, table)))
        .collect()
}

/// Slopes of a convex function sampled on an increasing grid are
/// non-decreasing.
fn check_convexity(curve: &[(f64, f64)]) -> Result<()> {
    let slopes: Vec<f64> = curve
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    for (i, s) in slopes.windows(2).enumerate() {
        let tol = 1e-8 * (1.0 + s[0].abs().max(s[1].abs()));
        if s[1] < s[0] - tol {
            return Err(Error::InternalConsistency(format!(
                "log-MGF estimate is not convex near mu = {:.6}: slope drops from {} to {}",
                curve[i + 1].0,
                s[0],
                s[1]
            )));
        }
    }
    Ok(())
}

/// Segment bootstrap standard errors of `g` at `μ*` and at `-1`. The same
/// resampled segments serve both points.
fn bootstrap(
    segments: &Segments,
    at_star: &[f64],
    at_one: &[f64],
    options: &GmiOptions,
) -> (f64, f64) {
    let count = at_star.len();
    if count < 2 || options.bootstrap_replicates < 2 {
        return (0.0, 0.0);
    }
    let mut rng = rng_from_seed(options.bootstrap_seed);
    let (mut m1, mut m2) = (
        crate::numeric::Moments::default(),
        crate::numeric::Moments::default(),
    );
    for _ in 0..options.bootstrap_replicates {
        let (mut s1, mut s2, mut len) = (0.0, 0.0, 0usize);
        for _ in 0..count {
            let i = rng.random_range(0..count);
            s1 += at_star[i];
            s2 += at_one[i];
            len += segments.len(i);
        }
        m1.push(-s1 / len as f64);
        m2.push(-s2 / len as f64);
    }
    (m1.variance().sqrt(), m2.variance().sqrt())
}

/// Whether the GMI reaches the memoryless capacity: `gmi >= capacity - tol - ci`.
pub fn gmi_lower_bound_check(report: &GmiReport, capacity: f64, tol: f64) -> bool {
    report.gmi >= capacity - tol - report.ci_halfwidth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psk::make_constellation;
    use num_complex::Complex64;

    fn block(j: usize, rho: f64) -> (PscBlock, PskConstellation) {
        let pts = make_constellation(j).unwrap();
        let k = 200;
        let h: Vec<_> = (0..k)
            .map(|i| Complex64::from_polar(1.0, 0.37 * i as f64))
            .collect();
        let z: Vec<_> = (0..k)
            .map(|i| Complex64::new((1.3 * i as f64).sin(), (0.7 * i as f64).cos()))
            .collect();
        let s: Vec<_> = (0..k).map(|i| (i % j) as u16).collect();
        (PscBlock::from_components(&pts, h, z, s, rho).unwrap(), pts)
    }

    #[test]
    fn lambda_vanishes_at_zero() {
        for j in [1, 2, 3, 8] {
            let (b, pts) = block(j, 1.3);
            assert_eq!(lambda_hat(0.0, &b, &pts).unwrap(), 0.0);
        }
    }

    #[test]
    fn positive_mu_is_rejected() {
        let (b, pts) = block(2, 1.0);
        assert!(matches!(
            lambda_hat(0.1, &b, &pts),
            Err(Error::PositiveMu(_))
        ));
    }

    #[test]
    fn single_point_noiseless_lambda_is_zero() {
        let pts = make_constellation(1).unwrap();
        let h = vec![Complex64::new(0.3, 0.4); 5];
        let b = PscBlock::from_components(&pts, h, vec![Complex64::default(); 5], vec![0; 5], 2.0)
            .unwrap();
        for mu in [-0.01, -1.0, -30.0] {
            assert_eq!(lambda_hat(mu, &b, &pts).unwrap(), 0.0);
        }
    }

    #[test]
    fn report_invariants() {
        let (b, pts) = block(4, 2.0);
        let r = gmi(&b, &pts, &GmiOptions::default()).unwrap();
        assert!(r.mu_star < 0.0);
        assert!(r.gmi >= r.g_at_minus_one - 1e-6);
        assert!(r.ci_halfwidth >= 0.0);
        assert_eq!(r.n_samples, 200);
    }

    #[test]
    fn bad_range_is_rejected() {
        let (b, pts) = block(2, 1.0);
        let opts = GmiOptions {
            mu_range: (-1.0, 0.5),
            ..GmiOptions::default()
        };
        assert!(gmi(&b, &pts, &opts).is_err());
    }

    #[test]
    fn lower_bound_check_arithmetic() {
        let mut r = GmiReport {
            mu_star: -1.0,
            gmi: 0.5,
            g_at_mu_star: 0.5,
            g_at_minus_one: 0.5,
            lambda_curve: vec![],
            n_samples: 1,
            ci_halfwidth: 0.005,
            std_error: 0.0,
            ci_at_minus_one: 0.0,
            std_error_at_minus_one: 0.0,
        };
        assert!(gmi_lower_bound_check(&r, 0.48, 0.01));
        r.gmi = 0.40;
        assert!(!gmi_lower_bound_check(&r, 0.48, 0.01));
    }

    #[test]
    fn convexity_check_flags_concave_profile() {
        let curve = vec![(-3.0, 0.0), (-2.0, 2.0), (-1.0, 3.0), (0.0, 3.5)];
        assert!(check_convexity(&curve).is_err());
        let convex = vec![(-3.0, 3.0), (-2.0, 1.5), (-1.0, 0.5), (0.0, 0.0)];
        assert!(check_convexity(&convex).is_ok());
    }
}
