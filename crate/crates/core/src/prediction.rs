//! One-step linear MMSE prediction of the fading from past noisy
//! observations, and the effective SNR of each parallel sub-channel.
//!
//! Observations are `y[t-d] = h[t-d] + n[t-d]` for `d` in the lag pattern,
//! with `n` white of variance `1/γ`. The Wiener coefficients solve
//!
//! ```text
//! (R + I/γ) c = r,   R[i][j] = r(d_i - d_j),   r_i = r(d_i)
//! ```
//!
//! and the prediction error variance is `1 - rᴴc`.
//!
//! The effective SNR folds the prediction error into the noise: writing
//! `h = ĥ + e`, the received `√snr·h·s + w` becomes
//! `√snr·ĥ·s + (√snr·e·s + w)`. Normalizing `ĥ` and the new noise to unit
//! variance gives `ρ = snr(1-σ²) / (1 + snr·σ²)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::FadingModel;
use crate::toeplitz::{hermitian_solve, levinson_durbin};

/// Which past symbols count as known pilots when predicting PSC `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryPattern {
    /// Every earlier symbol: offsets `1..l` in the current slot and all
    /// offsets reaching into prior slots.
    #[default]
    FullPast,
    /// Only symbols of PSCs `0..l` (already decoded when PSC `l` is
    /// decoded), i.e. offsets `d` with `1 <= d mod L <= l`.
    DecodedPscs,
}

/// Time offsets (most recent first) of the `order` observations that feed
/// the predictor of PSC `psc` under interleaving depth `depth`.
pub fn history_lags(pattern: HistoryPattern, psc: usize, depth: usize, order: usize) -> Vec<usize> {
    if psc == 0 {
        return Vec::new();
    }
    match pattern {
        HistoryPattern::FullPast => (1..=order).collect(),
        HistoryPattern::DecodedPscs => (1..)
            .filter(|d| (1..=psc).contains(&(d % depth)))
            .take(order)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    lags: Vec<usize>,
    observation_snr: f64,
}

impl PredictorSpec {
    /// `lags` must be non-empty, strictly positive and strictly increasing;
    /// `observation_snr` may be `f64::INFINITY` (noiseless pilots).
    pub fn new(lags: Vec<usize>, observation_snr: f64) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::invalid("lag_pattern", "needs at least one lag"));
        }
        if lags[0] == 0 || lags.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "lag_pattern",
                format!("must be positive and strictly increasing, got {lags:?}"),
            ));
        }
        if observation_snr.is_nan() || observation_snr < 0.0 {
            return Err(Error::invalid(
                "observation_snr",
                format!("must be non-negative, got {observation_snr}"),
            ));
        }
        Ok(Self {
            lags,
            observation_snr,
        })
    }

    /// Lags `1..=order`.
    pub fn contiguous(order: usize, observation_snr: f64) -> Result<Self> {
        Self::new((1..=order).collect(), observation_snr)
    }

    pub fn order(&self) -> usize {
        self.lags.len()
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn observation_snr(&self) -> f64 {
        self.observation_snr
    }

    /// `Some(step)` when the lags are `step, 2·step, ..., p·step`.
    pub fn uniform_step(&self) -> Option<usize> {
        let step = self.lags[0];
        self.lags
            .iter()
            .enumerate()
            .all(|(i, &d)| d == (i + 1) * step)
            .then_some(step)
    }

    fn noise_variance(&self) -> f64 {
        1.0 / self.observation_snr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Weights on the observations at `lags`, in the same order.
    pub coefficients: Vec<Complex64>,
    pub lags: Vec<usize>,
    pub error_variance: f64,
    /// Effective SNR at `snr = observation_snr`; infinite pilots SNR
    /// leaves this infinite unless the error variance is one.
    pub effective_snr: f64,
    pub observation_snr: f64,
}

impl PredictionResult {
    /// Trivial predictor (`ĥ = 0`) used when nothing is known.
    pub fn uninformed(observation_snr: f64) -> Self {
        PredictionResult {
            coefficients: Vec::new(),
            lags: Vec::new(),
            error_variance: 1.0,
            effective_snr: 0.0,
            observation_snr,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.lags.last().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Levinson-Durbin when the lags are uniform, dense Cholesky otherwise.
    Auto,
    Dense,
    Levinson,
}

pub fn predictor_coefficients(
    model: &FadingModel,
    spec: &PredictorSpec,
) -> Result<PredictionResult> {
    predictor_coefficients_with(model, spec, Solver::Auto)
}

pub fn predictor_coefficients_with(
    model: &FadingModel,
    spec: &PredictorSpec,
    solver: Solver,
) -> Result<PredictionResult> {
    let gamma = spec.observation_snr;
    let cross: Vec<Complex64> = spec
        .lags
        .iter()
        .map(|&d| model.correlation(d as i64))
        .collect();

    let coefficients = if gamma == 0.0 {
        vec![Complex64::default(); spec.order()]
    } else {
        let noise = spec.noise_variance();
        let levinson = match solver {
            Solver::Dense => None,
            Solver::Auto => spec.uniform_step(),
            Solver::Levinson => Some(spec.uniform_step().ok_or_else(|| {
                Error::invalid("lag_pattern", "Levinson-Durbin needs uniformly spaced lags")
            })?),
        };
        match levinson {
            Some(step) => {
                let mut seq = Vec::with_capacity(spec.order() + 1);
                seq.push(Complex64::new(1.0 + noise, 0.0));
                seq.extend(cross.iter().copied());
                debug_assert!(seq
                    .iter()
                    .skip(1)
                    .enumerate()
                    .all(|(i, v)| *v == model.correlation(((i + 1) * step) as i64)));
                levinson_durbin(&seq)
                    .map_err(|e| match e {
                        Error::NotPositiveSemidefinite(m) => Error::NumericalRank(m),
                        other => other,
                    })?
                    .coefficients
            }
            None => {
                let p = spec.order();
                let mut a = nalgebra::DMatrix::from_fn(p, p, |i, j| {
                    model.correlation(spec.lags[i] as i64 - spec.lags[j] as i64)
                });
                for i in 0..p {
                    a[(i, i)] += noise;
                }
                hermitian_solve(a, &cross)?
            }
        }
    };

    let explained: f64 = cross
        .iter()
        .zip(&coefficients)
        .map(|(r, c)| (r.conj() * c).re)
        .sum();
    let raw = 1.0 - explained;
    if !(-1e-9..=1.0 + 1e-9).contains(&raw) {
        return Err(Error::InternalConsistency(format!(
            "prediction error variance {raw} outside [0, 1]"
        )));
    }
    let error_variance = raw.clamp(0.0, 1.0);
    Ok(PredictionResult {
        coefficients,
        lags: spec.lags.clone(),
        error_variance,
        effective_snr: effective_snr_unchecked(error_variance, gamma),
        observation_snr: gamma,
    })
}

fn effective_snr_unchecked(error_variance: f64, snr: f64) -> f64 {
    if error_variance >= 1.0 || snr == 0.0 {
        return 0.0;
    }
    if snr.is_infinite() {
        return if error_variance == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - error_variance) / error_variance
        };
    }
    snr * (1.0 - error_variance) / (1.0 + snr * error_variance)
}

/// `ρ = snr(1-σ²)/(1+snr·σ²)`.
pub fn effective_snr(error_variance: f64, snr: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&error_variance) {
        return Err(Error::invalid(
            "error_variance",
            format!("must lie in [0, 1], got {error_variance}"),
        ));
    }
    if !(snr >= 0.0 && snr.is_finite()) {
        return Err(Error::invalid(
            "snr",
            format!("must be finite and non-negative, got {snr}"),
        ));
    }
    Ok(effective_snr_unchecked(error_variance, snr))
}

/// Per-PSC effective SNR `ρ[0..L]` of the virtual system with the default
/// [`HistoryPattern::FullPast`]. `ρ[0] = 0`: PSC 0 carries pilots.
pub fn rho_sequence(
    model: &FadingModel,
    depth: usize,
    snr: f64,
    predictor_order: usize,
) -> Result<Vec<f64>> {
    rho_sequence_with(model, depth, snr, predictor_order, HistoryPattern::FullPast)
}

pub fn rho_sequence_with(
    model: &FadingModel,
    depth: usize,
    snr: f64,
    predictor_order: usize,
    pattern: HistoryPattern,
) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::invalid("L", "interleaving depth must be at least 1"));
    }
    if predictor_order == 0 {
        return Err(Error::invalid("predictor_order", "must be at least 1"));
    }
    effective_snr(0.0, snr)?;
    let mut rho = vec![0.0; depth];
    let mut shared: Option<f64> = None;
    for (psc, slot) in rho.iter_mut().enumerate().skip(1) {
        if pattern == HistoryPattern::FullPast {
            if let Some(v) = shared {
                *slot = v;
                continue;
            }
        }
        let spec = PredictorSpec::new(history_lags(pattern, psc, depth, predictor_order), snr)?;
        let pred = predictor_coefficients(model, &spec)?;
        *slot = effective_snr(pred.error_variance, snr)?;
        shared = Some(*slot);
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_order_one_noiseless() {
        let m = FadingModel::ar1(0.7).unwrap();
        let spec = PredictorSpec::new(vec![1], f64::INFINITY).unwrap();
        let p = predictor_coefficients(&m, &spec).unwrap();
        assert!((p.coefficients[0].re - 0.7).abs() < 1e-15);
        assert!((p.error_variance - 0.51).abs() < 1e-15);
    }

    #[test]
    fn white_process_is_unpredictable() {
        let m = FadingModel::ar1(0.0).unwrap();
        for spec in [
            PredictorSpec::contiguous(4, 3.0).unwrap(),
            PredictorSpec::new(vec![2, 5, 9], f64::INFINITY).unwrap(),
            PredictorSpec::contiguous(2, 0.0).unwrap(),
        ] {
            let p = predictor_coefficients(&m, &spec).unwrap();
            assert!(p.coefficients.iter().all(|c| c.norm() == 0.0));
            assert_eq!(p.error_variance, 1.0);
            assert_eq!(p.effective_snr, 0.0);
        }
    }

    #[test]
    fn effective_snr_examples() {
        assert_eq!(effective_snr(0.0, 4.0).unwrap(), 4.0);
        assert_eq!(effective_snr(1.0, 4.0).unwrap(), 0.0);
        assert!((effective_snr(0.5, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(effective_snr(1.5, 1.0).is_err());
        assert!(effective_snr(0.5, -1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(PredictorSpec::new(vec![], 1.0).is_err());
        assert!(PredictorSpec::new(vec![0, 1], 1.0).is_err());
        assert!(PredictorSpec::new(vec![2, 2], 1.0).is_err());
        assert!(PredictorSpec::new(vec![1], -1.0).is_err());
        assert_eq!(
            PredictorSpec::new(vec![3, 6, 9], 1.0)
                .unwrap()
                .uniform_step(),
            Some(3)
        );
        assert_eq!(
            PredictorSpec::new(vec![1, 3], 1.0).unwrap().uniform_step(),
            None
        );
    }

    #[test]
    fn levinson_requires_uniform_lags() {
        let m = FadingModel::ar1(0.5).unwrap();
        let spec = PredictorSpec::new(vec![1, 3], 1.0).unwrap();
        assert!(predictor_coefficients_with(&m, &spec, Solver::Levinson).is_err());
    }

    #[test]
    fn history_patterns() {
        assert_eq!(
            history_lags(HistoryPattern::FullPast, 3, 8, 4),
            vec![1, 2, 3, 4]
        );
        assert_eq!(
            history_lags(HistoryPattern::DecodedPscs, 1, 4, 3),
            vec![1, 5, 9]
        );
        assert_eq!(
            history_lags(HistoryPattern::DecodedPscs, 2, 4, 5),
            vec![1, 2, 5, 6, 9]
        );
        assert_eq!(
            history_lags(HistoryPattern::DecodedPscs, 3, 4, 4),
            vec![1, 2, 3, 5]
        );
        assert!(history_lags(HistoryPattern::FullPast, 0, 4, 4).is_empty());
    }

    #[test]
    fn pilot_only_ladder() {
        let m = FadingModel::ar1(0.9).unwrap();
        assert_eq!(rho_sequence(&m, 1, 1.0, 16).unwrap(), vec![0.0]);
        let white = FadingModel::ar1(0.0).unwrap();
        assert!(rho_sequence(&white, 8, 10.0, 4)
            .unwrap()
            .iter()
            .all(|&r| r == 0.0));
    }
}
