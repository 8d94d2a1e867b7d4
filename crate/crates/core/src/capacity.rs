//! Input-constrained capacity of the memoryless PSK channel
//! `X = √ρ·Ĥ·S + Z` with `Ĥ` known at the receiver, the L-average
//! capacity ladder of the virtual system, and the rate/error budget.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::FadingModel;
use crate::numeric::{exact_sum, log_sum_exp, Moments, Z95};
use crate::prediction::{rho_sequence_with, HistoryPattern};
use crate::psk::make_constellation;
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed};

/// Samples per independently seeded chunk.
const CHUNK: usize = 1 << 14;

/// Monte Carlo capacity estimate in nats per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// Estimate clamped to `[0, log J]`.
    pub nats: f64,
    pub raw_nats: f64,
    pub clamped: bool,
    pub std_error: f64,
    /// 95% half-width.
    pub ci_halfwidth: f64,
    pub n_samples: usize,
}

/// `I(S;X|Ĥ) = log J - E[log Σ_j exp(|Z|² - |√ρ·Ĥ·(θ_0 - θ_j) + Z|²)]`
/// with `Ĥ, Z ~ CN(0,1)` independent.
pub fn psk_capacity(
    order: usize,
    rho: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(
            "rho",
            format!("must be finite and non-negative, got {rho}"),
        ));
    }
    if n_samples < 1000 {
        return Err(Error::invalid(
            "n_samples",
            format!("need at least 1000, got {n_samples}"),
        ));
    }
    let pts = make_constellation(order)?;
    let ln_j = pts.ln_order();
    let t0 = pts.points()[0];
    let diffs: Vec<_> = pts.points().iter().map(|t| rho.sqrt() * (t0 - t)).collect();

    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(n_samples - c * CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            let mut exps = vec![0.0; order];
            let mut mom = Moments::default();
            for _ in 0..n {
                let h = complex_gaussian(&mut rng, 1.0);
                let z = complex_gaussian(&mut rng, 1.0);
                let z2 = z.norm_sqr();
                for (e, d) in exps.iter_mut().zip(&diffs) {
                    *e = z2 - (h * d + z).norm_sqr();
                }
                mom.push(ln_j - log_sum_exp(&exps));
            }
            mom
        })
        .collect();
    let mom = parts.iter().fold(Moments::default(), |acc, m| acc.merge(m));

    let raw = mom.mean;
    let nats = raw.clamp(0.0, ln_j);
    Ok(CapacityEstimate {
        nats,
        raw_nats: raw,
        clamped: nats != raw,
        std_error: mom.std_error(),
        ci_halfwidth: Z95 * mom.std_error(),
        n_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub pattern: HistoryPattern,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions {
            n_samples: 1 << 18,
            seed: 1,
            pattern: HistoryPattern::FullPast,
        }
    }
}

/// Per-PSC capacities of the virtual system at interleaving depth `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLadder {
    pub depth: usize,
    pub rho: Vec<f64>,
    /// Nats per symbol.
    pub capacity: Vec<f64>,
    pub capacity_std_error: Vec<f64>,
    pub l_average: f64,
    /// Large-`L` proxy for the recursive-training rate: `l_average` at this `L`.
    pub rt_estimate: f64,
    /// `|l_average(L) - l_average(L/2)|`; zero for `L = 1`.
    pub convergence_gap: f64,
}

/// Builds the ladder at depth `L` and at `L/2` (for the convergence gap).
///
/// Every capacity uses the same seed, so entries with equal `ρ` are equal
/// and the ladder is monotone in `ρ` up to Monte Carlo bias only.
pub fn rate_ladder(
    model: &FadingModel,
    depth: usize,
    snr: f64,
    order: usize,
    predictor_order: usize,
    options: &LadderOptions,
) -> Result<RateLadder> {
    let mut cache = HashMap::new();
    let (rho, capacity, capacity_std_error) = ladder_entries(
        model,
        depth,
        snr,
        order,
        predictor_order,
        options,
        &mut cache,
    )?;
    let l_average = exact_sum(capacity.iter().copied()) / depth as f64;
    let convergence_gap = if depth >= 2 {
        let (_, half, _) = ladder_entries(
            model,
            depth / 2,
            snr,
            order,
            predictor_order,
            options,
            &mut cache,
        )?;
        (l_average - exact_sum(half.iter().copied()) / (depth / 2) as f64).abs()
    } else {
        0.0
    };
    Ok(RateLadder {
        depth,
        rho,
        capacity,
        capacity_std_error,
        l_average,
        rt_estimate: l_average,
        convergence_gap,
    })
}

type Entries = (Vec<f64>, Vec<f64>, Vec<f64>);

fn ladder_entries(
    model: &FadingModel,
    depth: usize,
    snr: f64,
    order: usize,
    predictor_order: usize,
    options: &LadderOptions,
    cache: &mut HashMap<u64, CapacityEstimate>,
) -> Result<Entries> {
    let rho = rho_sequence_with(model, depth, snr, predictor_order, options.pattern)?;
    let mut capacity = Vec::with_capacity(depth);
    let mut se = Vec::with_capacity(depth);
    for &r in &rho {
        let est = match cache.get(&r.to_bits()) {
            Some(e) => *e,
            None if r == 0.0 => {
                // Exactly zero: every sample term is log J - log J.
                let e = CapacityEstimate {
                    nats: 0.0,
                    raw_nats: 0.0,
                    clamped: false,
                    std_error: 0.0,
                    ci_halfwidth: 0.0,
                    n_samples: 0,
                };
                cache.insert(r.to_bits(), e);
                e
            }
            None => {
                let e = psk_capacity(order, r, options.n_samples, options.seed)?;
                cache.insert(r.to_bits(), e);
                e
            }
        };
        capacity.push(est.nats);
        se.push(est.std_error);
    }
    Ok((rho, capacity, se))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    /// `(1-λ)/(1-λ/2)`.
    pub fraction: f64,
    /// `fraction · GMI[l]`, nats per symbol.
    pub rate_targets: Vec<f64>,
    /// `δ/L` for each PSC.
    pub error_budgets: Vec<f64>,
    /// `(1-λ)·R_rt`.
    pub overall_target: f64,
}

impl RateBudget {
    pub fn total_error_budget(&self) -> f64 {
        exact_sum(self.error_budgets.iter().copied())
    }
}

/// Per-PSC targets for the scheme that reaches `(1-λ)·R_rt` with error at
/// most `δ`; `per_psc_gmi` has one entry per PSC (`L` of them).
pub fn rate_budget(
    rt_estimate: f64,
    lambda: f64,
    delta: f64,
    per_psc_gmi: &[f64],
) -> Result<RateBudget> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must lie in (0, 1), got {lambda}"),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    if per_psc_gmi.is_empty() {
        return Err(Error::invalid("L", "need at least one PSC"));
    }
    let fraction = (1.0 - lambda) / (1.0 - lambda / 2.0);
    let depth = per_psc_gmi.len();
    Ok(RateBudget {
        fraction,
        rate_targets: per_psc_gmi.iter().map(|g| fraction * g).collect(),
        error_budgets: vec![delta / depth as f64; depth],
        overall_target: (1.0 - lambda) * rt_estimate,
    })
}
