//! Unit-variance stationary circular complex Gaussian (Rayleigh) fading.
//!
//! Three model families are offered: a first-order autoregression, the
//! Clarke/Jakes isotropic-scattering model with autocorrelation
//! `J0(2π f_D τ)`, and an arbitrary tabulated autocorrelation.
//!
//! Synthesis:
//!
//! * `Ar1` runs the exact stationary recursion
//!   `h[k] = α h[k-1] + sqrt(1-α²) w[k]` with `h[0] ~ CN(0,1)`.
//! * `Clarke` and `Tabulated` paths up to [`EXACT_SYNTHESIS_LIMIT`] samples
//!   use the innovations form of the Cholesky factorization of the Toeplitz
//!   covariance, computed order by order with the Levinson recursion (O(n²)
//!   time, O(n) memory). A diagonal loading of [`SYNTHESIS_LOADING`] keeps
//!   band-limited spectra numerically positive definite.
//! * Longer `Clarke` paths use a sum of [`SOS_RAYS`] equal-power sinusoids
//!   with stratified random arrival angles; longer `Tabulated` paths use
//!   circulant embedding through the FFT.
//!
//! Tabulated correlations are zero beyond the last tabulated lag.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bessel_j0;
use crate::rng::{complex_gaussian, rng_from_seed};
use crate::toeplitz::{is_positive_semidefinite, LevinsonRecursion};

pub const EXACT_SYNTHESIS_LIMIT: usize = 1 << 14;
pub const SYNTHESIS_LOADING: f64 = 1e-9;
pub const SOS_RAYS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    Ar1 {
        alpha: f64,
    },
    Clarke {
        normalized_doppler: f64,
    },
    /// `values[τ]` is the autocorrelation at lag `τ = 0..values.len()`.
    Tabulated {
        values: Vec<Complex64>,
    },
}

impl FadingModel {
    pub fn ar1(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in [0, 1), got {alpha}"),
            ));
        }
        Ok(FadingModel::Ar1 { alpha })
    }

    pub fn clarke(normalized_doppler: f64) -> Result<Self> {
        if !(normalized_doppler > 0.0 && normalized_doppler.is_finite()) {
            return Err(Error::invalid(
                "normalized_doppler",
                format!("must be positive and finite, got {normalized_doppler}"),
            ));
        }
        Ok(FadingModel::Clarke { normalized_doppler })
    }

    /// Validates a tabulated autocorrelation: unit lag-0 value, magnitudes
    /// at most one, and a Toeplitz matrix that admits a Cholesky factor.
    pub fn tabulated(mut values: Vec<Complex64>) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::Table("no rows".into()));
        };
        if (first.re - 1.0).abs() > 1e-9 || first.im.abs() > 1e-9 {
            return Err(Error::Table(format!(
                "lag 0 must be 1 (unit variance), got {first}"
            )));
        }
        values[0] = Complex64::new(1.0, 0.0);
        if let Some((lag, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.norm() > 1.0 + 1e-12 || !v.is_finite())
        {
            return Err(Error::NotPositiveSemidefinite(format!(
                "|r({lag})| = {} exceeds one",
                v.norm()
            )));
        }
        if !is_positive_semidefinite(&values, 1e-10) {
            return Err(Error::NotPositiveSemidefinite(format!(
                "Toeplitz matrix through lag {} has no Cholesky factor",
                values.len() - 1
            )));
        }
        Ok(FadingModel::Tabulated { values })
    }

    /// Reads a `lag,re,im` table with lags ascending contiguously from 0.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            lag: i64,
            re: f64,
            im: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["lag", "re", "im"] {
            return Err(Error::Table(format!(
                "expected header `lag,re,im`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut values = Vec::new();
        for (expected, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.lag != expected as i64 {
                return Err(Error::Table(format!(
                    "row {expected} has lag {}, lags must ascend from 0 without gaps",
                    row.lag
                )));
            }
            values.push(Complex64::new(row.re, row.im));
        }
        Self::tabulated(values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// `r(τ) = E[h[k+τ] conj(h[k])]`.
    pub fn autocorrelation(&self, lag: i64) -> Result<Complex64> {
        if let FadingModel::Tabulated { values } = self {
            let max_lag = values.len() - 1;
            if lag.unsigned_abs() as usize > max_lag {
                return Err(Error::LagOutOfRange { lag, max_lag });
            }
        }
        Ok(self.correlation(lag))
    }

    /// Like [`autocorrelation`](Self::autocorrelation), with tabulated models
    /// extended by zero past their last lag.
    pub fn correlation(&self, lag: i64) -> Complex64 {
        let tau = lag.unsigned_abs() as usize;
        let r = match self {
            FadingModel::Ar1 { alpha } => {
                Complex64::new(alpha.powi(tau.min(i32::MAX as usize) as i32), 0.0)
            }
            FadingModel::Clarke { normalized_doppler } => {
                Complex64::new(bessel_j0(2.0 * PI * normalized_doppler * tau as f64), 0.0)
            }
            FadingModel::Tabulated { values } => values.get(tau).copied().unwrap_or_default(),
        };
        if lag < 0 {
            r.conj()
        } else {
            r
        }
    }

    /// Whether generated paths are prefix-consistent: a path of length `n`
    /// truncated to `n' < n` equals the path of length `n'`.
    pub fn is_recursive(&self, n: usize) -> bool {
        matches!(self, FadingModel::Ar1 { .. }) || n <= EXACT_SYNTHESIS_LIMIT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingPath {
    pub samples: Vec<Complex64>,
    pub model: FadingModel,
    pub seed: u64,
}

impl FadingPath {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn generate_path(model: &FadingModel, n: usize, seed: u64) -> Result<FadingPath> {
    if n == 0 {
        return Err(Error::EmptyPath);
    }
    let mut rng = rng_from_seed(seed);
    let samples = match model {
        FadingModel::Ar1 { alpha } => ar1_path(*alpha, n, &mut rng),
        FadingModel::Clarke { normalized_doppler } if n > EXACT_SYNTHESIS_LIMIT => {
            sum_of_sinusoids(*normalized_doppler, n, &mut rng)
        }
        FadingModel::Tabulated { values } if n > EXACT_SYNTHESIS_LIMIT => {
            circulant_embedding(values, n, &mut rng)?
        }
        _ => innovations_path(model, n, &mut rng)?,
    };
    Ok(FadingPath {
        samples,
        model: model.clone(),
        seed,
    })
}

fn ar1_path<R: Rng>(alpha: f64, n: usize, rng: &mut R) -> Vec<Complex64> {
    let drive = (1.0 - alpha * alpha).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut h = complex_gaussian(rng, 1.0);
    out.push(h);
    for _ in 1..n {
        h = alpha * h + drive * complex_gaussian(rng, 1.0);
        out.push(h);
    }
    out
}

fn innovations_path<R: Rng>(model: &FadingModel, n: usize, rng: &mut R) -> Result<Vec<Complex64>> {
    let shrink = 1.0 / (1.0 + SYNTHESIS_LOADING);
    let r: Vec<Complex64> = (0..n)
        .map(|tau| {
            if tau == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                model.correlation(tau as i64) * shrink
            }
        })
        .collect();
    let mut rec = LevinsonRecursion::new(1.0);
    let mut out = Vec::with_capacity(n);
    out.push(complex_gaussian(rng, 1.0));
    for m in 1..n {
        rec.extend(&r[..=m]).map_err(|e| match e {
            Error::NotPositiveSemidefinite(msg) => Error::NotPositiveSemidefinite(format!(
                "zero-extended autocorrelation at path length {}: {msg}",
                m + 1
            )),
            other => other,
        })?;
        let predicted: Complex64 = rec
            .coefficients()
            .iter()
            .zip(out.iter().rev())
            .map(|(a, h)| a * h)
            .sum();
        out.push(predicted + complex_gaussian(rng, rec.error_variance()));
    }
    Ok(out)
}

fn sum_of_sinusoids<R: Rng>(fd: f64, n: usize, rng: &mut R) -> Vec<Complex64> {
    let rays: Vec<(f64, f64)> = (0..SOS_RAYS)
        .map(|i| {
            let angle = 2.0 * PI * (i as f64 + rng.random::<f64>()) / SOS_RAYS as f64;
            let phase = 2.0 * PI * rng.random::<f64>();
            (2.0 * PI * fd * angle.cos(), phase)
        })
        .collect();
    let scale = 1.0 / (SOS_RAYS as f64).sqrt();
    (0..n)
        .map(|k| {
            let t = k as f64;
            let s: Complex64 = rays
                .iter()
                .map(|&(w, phi)| Complex64::from_polar(1.0, w * t + phi))
                .sum();
            s * scale
        })
        .collect()
}

fn circulant_embedding<R: Rng>(
    values: &[Complex64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let size = (2 * n).next_power_of_two();
    let mut c = vec![Complex64::default(); size];
    for (tau, v) in values.iter().enumerate().take(n) {
        c[tau] = *v;
        if tau > 0 {
            c[size - tau] = v.conj();
        }
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut c);
    let floor = -1e-9 * size as f64;
    if let Some(min) = c
        .iter()
        .map(|z| z.re)
        .reduce(f64::min)
        .filter(|&m| m < floor)
    {
        return Err(Error::NotPositiveSemidefinite(format!(
            "circulant embedding of size {size} has eigenvalue {min:.3e}"
        )));
    }
    let mut spectrum: Vec<Complex64> = c
        .iter()
        .map(|lambda| complex_gaussian(rng, 1.0) * lambda.re.max(0.0).sqrt())
        .collect();
    planner.plan_fft_inverse(size).process(&mut spectrum);
    let scale = 1.0 / (size as f64).sqrt();
    Ok(spectrum.into_iter().take(n).map(|z| z * scale).collect())
}

/// Sample autocorrelation `(1/(n-τ)) Σ h[k+τ] conj(h[k])`.
pub fn sample_autocorrelation(samples: &[Complex64], lag: usize) -> Complex64 {
    let n = samples.len();
    if lag >= n {
        return Complex64::default();
    }
    let s: Complex64 = samples[lag..]
        .iter()
        .zip(samples)
        .map(|(a, b)| a * b.conj())
        .sum();
    s / (n - lag) as f64
}
