//! End-to-end recursive training with real error propagation.
//!
//! One trial transmits `L` interleaved codewords of length `K` over one
//! fading path: symbol `k` of PSC `l` goes out at time `k·L + l`. PSC 0
//! carries known pilots. PSCs `1..L` are decoded in order, each with a
//! channel predictor fed by the noisy observations of the PSCs already
//! decoded, de-rotated by the decoded symbols (or, in genie mode, by the
//! transmitted ones).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{decode_with_table, FULL_METRICS_LIMIT};
use crate::ensemble::ensemble_decode;
use crate::error::{Error, Result};
use crate::fading::{generate_path, FadingModel};
use crate::gmi::{gmi_from_table, GmiOptions};
use crate::numeric::{binomial_halfwidth, Moments, Z95};
use crate::prediction::{
    effective_snr, history_lags, predictor_coefficients, HistoryPattern, PredictionResult,
    PredictorSpec,
};
use crate::psk::{
    generate_codebook, make_constellation, random_codeword, synthesize_psc_block, Interleave,
    PscBlock, Symbol,
};
use crate::rng::{complex_gaussian_vec, derive_seed, rng_from_seed};

/// How each data PSC is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderBackend {
    /// Exhaustive when `M·K <= 2^18`, ensemble otherwise.
    #[default]
    Auto,
    /// Draw the whole codebook and search it; `M` is capped at 2^16.
    Exhaustive,
    /// Sample the decision from the random-coding ensemble; see
    /// [`crate::ensemble`].
    Ensemble,
}

const AUTO_EXHAUSTIVE_WORK: f64 = (1u64 << 18) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub model: FadingModel,
    /// Interleaving depth `L`.
    pub depth: usize,
    /// Codeword length `K`.
    pub block_len: usize,
    pub constellation_order: usize,
    pub snr: f64,
    /// Codebooks hold `round(exp(rate_fraction · GMI[l] · K))` codewords.
    pub rate_fraction: f64,
    pub predictor_order: usize,
    pub n_codeword_trials: usize,
    pub master_seed: u64,
    pub lambda: f64,
    pub delta: f64,
    /// Feed the predictor the transmitted symbols instead of the decoded ones.
    pub genie: bool,
    pub backend: DecoderBackend,
    /// Length of the virtual-system path used to estimate `GMI[l]`.
    pub gmi_samples: usize,
}

impl SchemeConfig {
    pub fn new(
        model: FadingModel,
        depth: usize,
        block_len: usize,
        constellation_order: usize,
        snr: f64,
    ) -> Self {
        SchemeConfig {
            model,
            depth,
            block_len,
            constellation_order,
            snr,
            rate_fraction: 0.5,
            predictor_order: 16,
            n_codeword_trials: 100,
            master_seed: 0,
            lambda: 0.2,
            delta: 0.05,
            genie: false,
            backend: DecoderBackend::Auto,
            gmi_samples: 1 << 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::invalid(
                "L",
                format!("need at least one data PSC, got L = {}", self.depth),
            ));
        }
        if self.block_len == 0 {
            return Err(Error::invalid("K", "block length must be at least 1"));
        }
        make_constellation(self.constellation_order)?;
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::invalid(
                "snr",
                format!("must be positive and finite, got {}", self.snr),
            ));
        }
        if !(self.rate_fraction > 0.0 && self.rate_fraction.is_finite()) {
            return Err(Error::invalid(
                "rate_fraction",
                format!("must be positive, got {}", self.rate_fraction),
            ));
        }
        if self.predictor_order == 0 {
            return Err(Error::invalid("predictor_order", "must be at least 1"));
        }
        if self.n_codeword_trials == 0 {
            return Err(Error::invalid("n_codeword_trials", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must lie in (0, 1), got {}", self.lambda),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(
                "delta",
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        if self.gmi_samples < 64 {
            return Err(Error::invalid("gmi_samples", "need at least 64 samples"));
        }
        Ok(())
    }
}

/// Everything about a scheme that does not depend on the trials: per-PSC
/// predictors, effective SNRs, GMIs and codebook sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemePlan {
    pub rho: Vec<f64>,
    /// Nats per symbol.
    pub gmi: Vec<f64>,
    pub gmi_ci: Vec<f64>,
    /// `ln M[l]`; zero for the pilot PSC.
    pub ln_codebook_size: Vec<f64>,
    pub backend: Vec<DecoderBackend>,
    /// `predictors[l][c - 1]` uses the `c` most recent lags; the last entry
    /// is the steady-state predictor.
    #[serde(skip)]
    predictors: Vec<Vec<PredictionResult>>,
    #[serde(skip)]
    scheme: Option<SchemeConfig>,
}

/// The fields of `config` that a plan depends on.
fn plan_key(config: &SchemeConfig) -> SchemeConfig {
    SchemeConfig {
        genie: false,
        n_codeword_trials: 0,
        master_seed: 0,
        ..config.clone()
    }
}

/// `ln round(exp(x))`, exact for codebooks small enough to count.
fn ln_rounded_exp(x: f64) -> f64 {
    if x < 36.0 {
        x.exp().round().ln()
    } else {
        x
    }
}

pub fn plan(config: &SchemeConfig) -> Result<SchemePlan> {
    config.validate()?;
    let depth = config.depth;
    let pts = make_constellation(config.constellation_order)?;

    let mut predictors = vec![Vec::new()];
    let mut rho = vec![0.0];
    for psc in 1..depth {
        let lags = history_lags(
            HistoryPattern::DecodedPscs,
            psc,
            depth,
            config.predictor_order,
        );
        let mut ladder = Vec::with_capacity(lags.len());
        for c in 1..=lags.len() {
            let spec = PredictorSpec::new(lags[..c].to_vec(), config.snr)?;
            ladder.push(predictor_coefficients(&config.model, &spec)?);
        }
        rho.push(effective_snr(
            ladder.last().map_or(1.0, |p| p.error_variance),
            config.snr,
        )?);
        predictors.push(ladder);
    }

    let history = predictors
        .iter()
        .filter_map(|p| p.last())
        .map(|p| p.max_lag())
        .max()
        .unwrap_or(0);
    let kg = config.gmi_samples;
    let path = generate_path(
        &config.model,
        history + kg * depth,
        derive_seed(config.master_seed, 0xA11),
    )?;
    let mut gmi = vec![0.0];
    let mut gmi_ci = vec![0.0];
    for (psc, ladder) in predictors.iter().enumerate().skip(1) {
        let full = ladder.last().expect("data PSCs have history");
        let cw = random_codeword(
            &pts,
            kg,
            derive_seed(config.master_seed, 0xC00 + psc as u64),
        );
        let layout = Interleave { depth, index: psc };
        let block = synthesize_psc_block(
            &cw,
            &pts,
            &path.samples,
            layout,
            full,
            config.snr,
            derive_seed(config.master_seed, 0xB00 + psc as u64),
        )?;
        let options = GmiOptions {
            bootstrap_seed: derive_seed(config.master_seed, 0xD00 + psc as u64),
            ..GmiOptions::default()
        };
        let report = gmi_from_table(&block.distance_table(&pts), &options)?;
        gmi.push(report.gmi);
        gmi_ci.push(report.ci_halfwidth);
    }

    let mut ln_codebook_size = vec![0.0];
    let mut backend = vec![DecoderBackend::Exhaustive];
    for (psc, &g) in gmi.iter().enumerate().skip(1) {
        let ln_m = ln_rounded_exp(config.rate_fraction * g * config.block_len as f64);
        let work = ln_m + (config.block_len as f64).ln();
        let chosen = match config.backend {
            DecoderBackend::Exhaustive => {
                if ln_m > (FULL_METRICS_LIMIT as f64).ln() + 1e-9 {
                    return Err(Error::CodebookTooLarge {
                        psc,
                        log_size: ln_m,
                        cap: FULL_METRICS_LIMIT,
                    });
                }
                DecoderBackend::Exhaustive
            }
            DecoderBackend::Ensemble => DecoderBackend::Ensemble,
            DecoderBackend::Auto if work <= AUTO_EXHAUSTIVE_WORK.ln() => DecoderBackend::Exhaustive,
            DecoderBackend::Auto => DecoderBackend::Ensemble,
        };
        ln_codebook_size.push(ln_m);
        backend.push(chosen);
    }

    Ok(SchemePlan {
        rho,
        gmi,
        gmi_ci,
        ln_codebook_size,
        backend,
        predictors,
        scheme: Some(plan_key(config)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtReport {
    pub depth: usize,
    pub block_len: usize,
    pub trials: usize,
    pub genie: bool,
    pub rho: Vec<f64>,
    pub gmi: Vec<f64>,
    pub gmi_ci: Vec<f64>,
    pub ln_codebook_size: Vec<f64>,
    /// `rate_fraction · GMI[l]`, nats per symbol.
    pub rate_targets: Vec<f64>,
    pub backend: Vec<DecoderBackend>,
    pub per_psc_errors: Vec<u64>,
    pub per_psc_block_error: Vec<f64>,
    pub per_psc_ci: Vec<f64>,
    pub overall_error: f64,
    pub overall_ci: f64,
    /// `(1/L) Σ_{l>=1} (ln M[l] / K)(1 - block_error[l])`, nats per symbol.
    pub achieved_rate: f64,
    pub budget_met: Vec<bool>,
    /// Trials in which some PSC failed after an earlier PSC had failed.
    pub propagation_events: u64,
    /// Number of failed PSCs in each trial.
    pub failed_pscs: Vec<u32>,
}

impl RtReport {
    /// The overall error cannot exceed the sum of per-PSC errors.
    pub fn union_bound_holds(&self) -> bool {
        self.overall_error <= self.per_psc_block_error.iter().sum::<f64>() + self.overall_ci + 1e-12
    }
}

pub fn run(config: &SchemeConfig) -> Result<RtReport> {
    let plan = plan(config)?;
    run_with_plan(config, &plan)
}

/// Runs the trials of `config` with a plan from [`plan`] on the same
/// scheme; the plan is only valid for configurations that differ in
/// `genie`, `n_codeword_trials` or `master_seed`.
pub fn run_with_plan(config: &SchemeConfig, plan: &SchemePlan) -> Result<RtReport> {
    config.validate()?;
    ensure_plan_matches(config, plan)?;
    let depth = config.depth;
    let outcomes: Vec<Vec<bool>> = (0..config.n_codeword_trials)
        .into_par_iter()
        .map(|i| run_trial(config, plan, derive_seed(config.master_seed, 1 + i as u64)))
        .collect::<Result<_>>()?;

    let trials = outcomes.len();
    let mut per_psc_errors = vec![0u64; depth];
    let mut failed_pscs = Vec::with_capacity(trials);
    let mut propagation_events = 0;
    for errs in &outcomes {
        for (count, &e) in per_psc_errors.iter_mut().zip(errs) {
            *count += e as u64;
        }
        failed_pscs.push(errs.iter().filter(|&&e| e).count() as u32);
        let first = errs.iter().position(|&e| e);
        if let Some(f) = first {
            if errs[f + 1..].iter().any(|&e| e) {
                propagation_events += 1;
            }
        }
    }
    let per_psc_block_error: Vec<f64> = per_psc_errors
        .iter()
        .map(|&c| c as f64 / trials as f64)
        .collect();
    let per_psc_ci = per_psc_errors
        .iter()
        .map(|&c| binomial_halfwidth(c, trials as u64))
        .collect();
    let failures = failed_pscs.iter().filter(|&&f| f > 0).count() as u64;

    let k = config.block_len as f64;
    let achieved_rate = (1..depth)
        .map(|l| plan.ln_codebook_size[l] / k * (1.0 - per_psc_block_error[l]))
        .sum::<f64>()
        / depth as f64;

    let mut report = RtReport {
        depth,
        block_len: config.block_len,
        trials,
        genie: config.genie,
        rho: plan.rho.clone(),
        gmi: plan.gmi.clone(),
        gmi_ci: plan.gmi_ci.clone(),
        ln_codebook_size: plan.ln_codebook_size.clone(),
        rate_targets: plan.gmi.iter().map(|g| config.rate_fraction * g).collect(),
        backend: plan.backend.clone(),
        per_psc_errors,
        per_psc_block_error,
        per_psc_ci,
        overall_error: failures as f64 / trials as f64,
        overall_ci: binomial_halfwidth(failures, trials as u64),
        achieved_rate,
        budget_met: Vec::new(),
        propagation_events,
        failed_pscs,
    };
    report.budget_met = budget_check(&report, config.delta, depth);
    Ok(report)
}

fn ensure_plan_matches(config: &SchemeConfig, plan: &SchemePlan) -> Result<()> {
    match &plan.scheme {
        Some(key) if *key == plan_key(config) => Ok(()),
        Some(_) => Err(Error::invalid("plan", "was built for a different scheme")),
        None => Err(Error::invalid(
            "plan",
            "has no predictors; rebuild it with `plan`",
        )),
    }
}

fn run_trial(config: &SchemeConfig, plan: &SchemePlan, seed: u64) -> Result<Vec<bool>> {
    let depth = config.depth;
    let k_len = config.block_len;
    let n = depth * k_len;
    let pts = make_constellation(config.constellation_order)?;
    let amp = config.snr.sqrt();

    let fading = generate_path(&config.model, n, derive_seed(seed, 0))?.samples;
    let noise = complex_gaussian_vec(&mut rng_from_seed(derive_seed(seed, 1)), n);
    // De-rotated observations `y·conj(θ̂)/√snr` of the PSCs decoded so far.
    let mut obs = vec![num_complex::Complex64::default(); n];
    for t in (0..n).step_by(depth) {
        obs[t] = fading[t] + noise[t] / amp;
    }

    let mut errors = vec![false; depth];
    for (psc, failed) in errors.iter_mut().enumerate().skip(1) {
        let mut rng = rng_from_seed(derive_seed(seed, 100 + psc as u64));
        let ln_m = plan.ln_codebook_size[psc];
        let codebook_seed = derive_seed(seed, 200 + psc as u64);
        let (codebook, sent, tx) = match plan.backend[psc] {
            DecoderBackend::Ensemble => (None, 0, random_codeword(&pts, k_len, codebook_seed)),
            _ => {
                let m = ln_m.exp().round() as usize;
                let cb = generate_codebook(&pts, m, k_len, codebook_seed)?;
                let sent = rand::Rng::random_range(&mut rng, 0..m);
                let tx = cb.codeword(sent).to_vec();
                (Some(cb), sent, tx)
            }
        };

        let block = receive(config, plan, psc, &tx, &fading, &noise, &obs)?;
        let table = block.distance_table(&pts);
        let (correct, decoded) = match &codebook {
            Some(cb) => {
                let out = decode_with_table(cb, &table, sent);
                (out.correct, cb.codeword(out.chosen_message).to_vec())
            }
            None => {
                let out = ensemble_decode(&table, &tx, ln_m, &mut rng);
                (out.correct, out.decoded)
            }
        };
        *failed = !correct;

        let feedback: &[Symbol] = if config.genie { &tx } else { &decoded };
        for (k, &s) in feedback.iter().enumerate() {
            let t = k * depth + psc;
            let y = amp * fading[t] * pts.point(tx[k]) + noise[t];
            obs[t] = y * pts.point(s).conj() / amp;
        }
    }
    Ok(errors)
}

/// The block PSC `psc` presents to its decoder. Early symbols, whose
/// history is cut off by the start of the path, use the predictor on the
/// lags that exist. Each symbol is normalized by its own prediction error so
/// that `√ρ·ĥ[k]` is the conditional mean of `x[k]/θ` given the past.
fn receive(
    config: &SchemeConfig,
    plan: &SchemePlan,
    psc: usize,
    tx: &[Symbol],
    fading: &[num_complex::Complex64],
    noise: &[num_complex::Complex64],
    obs: &[num_complex::Complex64],
) -> Result<PscBlock> {
    let pts = make_constellation(config.constellation_order)?;
    let ladder = &plan.predictors[psc];
    let full = ladder.last().expect("data PSCs have history");
    let rho = plan.rho[psc];
    let amp = config.snr.sqrt();
    let mut x = Vec::with_capacity(tx.len());
    let mut h_hat = Vec::with_capacity(tx.len());
    let mut residual = Vec::with_capacity(tx.len());
    for (k, &s) in tx.iter().enumerate() {
        let t = k * config.depth + psc;
        let usable = full.lags.partition_point(|&d| d <= t);
        let pred = &ladder[usable - 1];
        let predicted: num_complex::Complex64 = pred
            .coefficients
            .iter()
            .zip(&pred.lags)
            .map(|(c, &d)| c * obs[t - d])
            .sum();
        let scale = 1.0 / (1.0 + config.snr * pred.error_variance).sqrt();
        let y = amp * fading[t] * pts.point(s) + noise[t];
        let xt = y * scale;
        let mean = amp * scale * predicted;
        let h = if rho > 0.0 {
            mean / rho.sqrt()
        } else {
            num_complex::Complex64::default()
        };
        x.push(xt);
        h_hat.push(h);
        residual.push(xt - rho.sqrt() * h * pts.point(s));
    }
    Ok(PscBlock {
        x,
        h_hat,
        symbols: tx.to_vec(),
        rho,
        residual_noise: residual,
    })
}

/// Per-PSC: is the block error within `δ/L` up to its binomial half-width?
pub fn budget_check(report: &RtReport, delta: f64, depth: usize) -> Vec<bool> {
    let budget = delta / depth as f64;
    report
        .per_psc_block_error
        .iter()
        .enumerate()
        .map(|(l, &e)| {
            let slack = report.per_psc_ci.get(l).copied().unwrap_or(0.0);
            e - slack <= budget
        })
        .collect()
}

/// Differences between two runs over the same trials, e.g. decision-directed
/// minus genie.
///
/// Both modes feed back identical symbols until the first failed PSC, so
/// the first failure, and with it the overall error, is shared; error
/// propagation shows up only in the later PSCs and hence in `psc_gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedGap {
    /// `overall_error(a) - overall_error(b)`.
    pub gap: f64,
    pub ci_halfwidth: f64,
    /// Difference in the mean number of failed PSCs per trial.
    pub psc_gap: f64,
    pub psc_ci_halfwidth: f64,
}

/// Paired differences of per-trial failures. Both reports must come from
/// the same seeds and trial count.
pub fn paired_gap(a: &RtReport, b: &RtReport) -> Result<PairedGap> {
    if a.failed_pscs.len() != b.failed_pscs.len() {
        return Err(Error::LengthMismatch {
            expected: a.failed_pscs.len(),
            got: b.failed_pscs.len(),
        });
    }
    let mut any = Moments::default();
    let mut count = Moments::default();
    for (&x, &y) in a.failed_pscs.iter().zip(&b.failed_pscs) {
        any.push((x > 0) as u8 as f64 - (y > 0) as u8 as f64);
        count.push(x as f64 - y as f64);
    }
    Ok(PairedGap {
        gap: any.mean,
        ci_halfwidth: Z95 * any.std_error(),
        psc_gap: count.mean,
        psc_ci_halfwidth: Z95 * count.std_error(),
    })
}
