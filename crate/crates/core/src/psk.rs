//! Uniform J-PSK inputs, i.i.d. random codebooks, and PSC observation
//! blocks `x[k] = √ρ·ĥ[k]·θ_{s[k]} + z̄[k]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::fading::{generate_path, FadingModel};
use crate::prediction::{effective_snr, PredictionResult};
use crate::rng::{complex_gaussian, complex_gaussian_vec, derive_seed, rng_from_seed};

/// Index into a constellation.
pub type Symbol = u16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PskConstellation {
    points: Vec<Complex64>,
}

impl PskConstellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    #[inline]
    pub fn point(&self, s: Symbol) -> Complex64 {
        self.points[s as usize]
    }

    pub fn ln_order(&self) -> f64 {
        (self.points.len() as f64).ln()
    }

    /// Uniformly random symbol.
    pub fn random_symbol<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        rng.random_range(0..self.points.len()) as Symbol
    }
}

/// `θ_j = exp(i·2π·j/J)`, `j = 0..J`. Components within 1e-15 of zero are
/// snapped to zero so quarter-turn points are exact.
pub fn make_constellation(order: usize) -> Result<PskConstellation> {
    if order == 0 || order > Symbol::MAX as usize + 1 {
        return Err(Error::invalid(
            "J",
            format!("constellation size must be in 1..=65536, got {order}"),
        ));
    }
    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    let points = (0..order)
        .map(|j| {
            let (s, c) = (2.0 * PI * j as f64 / order as f64).sin_cos();
            Complex64::new(snap(c), snap(s))
        })
        .collect();
    Ok(PskConstellation { points })
}

/// M codewords of length K, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    m: usize,
    k: usize,
    symbols: Vec<Symbol>,
    pub seed: u64,
}

impl Codebook {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn block_len(&self) -> usize {
        self.k
    }

    pub fn codeword(&self, message: usize) -> &[Symbol] {
        &self.symbols[message * self.k..(message + 1) * self.k]
    }

    pub fn codewords(&self) -> impl Iterator<Item = &[Symbol]> {
        self.symbols.chunks_exact(self.k)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }
}

pub fn generate_codebook(
    constellation: &PskConstellation,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<Codebook> {
    if m == 0 {
        return Err(Error::invalid("M", "codebook needs at least one codeword"));
    }
    if k == 0 {
        return Err(Error::invalid("K", "block length must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let symbols = (0..m * k)
        .map(|_| constellation.random_symbol(&mut rng))
        .collect();
    Ok(Codebook {
        m,
        k,
        symbols,
        seed,
    })
}

/// One PSC's K-symbol record.
#[derive(Debug, Clone, PartialEq)]
pub struct PscBlock {
    pub x: Vec<Complex64>,
    /// Predicted fading, normalized to unit variance.
    pub h_hat: Vec<Complex64>,
    pub symbols: Vec<Symbol>,
    pub rho: f64,
    /// Residual noise `z̄` (thermal noise plus prediction error), unit variance.
    pub residual_noise: Vec<Complex64>,
}

impl PscBlock {
    /// Assembles `x = √ρ·ĥ·θ_s + z̄`.
    pub fn from_components(
        constellation: &PskConstellation,
        h_hat: Vec<Complex64>,
        residual_noise: Vec<Complex64>,
        symbols: Vec<Symbol>,
        rho: f64,
    ) -> Result<Self> {
        ensure_len(h_hat.len(), residual_noise.len())?;
        ensure_len(h_hat.len(), symbols.len())?;
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::invalid(
                "rho",
                format!("must be finite and non-negative, got {rho}"),
            ));
        }
        if let Some(&s) = symbols
            .iter()
            .find(|&&s| s as usize >= constellation.order())
        {
            return Err(Error::invalid(
                "symbols",
                format!(
                    "index {s} outside a {}-point constellation",
                    constellation.order()
                ),
            ));
        }
        let amp = rho.sqrt();
        let x = h_hat
            .iter()
            .zip(&residual_noise)
            .zip(&symbols)
            .map(|((h, z), &s)| amp * h * constellation.point(s) + z)
            .collect();
        Ok(PscBlock {
            x,
            h_hat,
            symbols,
            rho,
            residual_noise,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `|x[k] - √ρ·θ_j·ĥ[k]|²` for every `k` and `j`, row-major `K × J`.
    pub fn distance_table(&self, constellation: &PskConstellation) -> DistanceTable {
        let j = constellation.order();
        let amp = self.rho.sqrt();
        let mut d = Vec::with_capacity(self.len() * j);
        for (x, h) in self.x.iter().zip(&self.h_hat) {
            let a = amp * h;
            d.extend(
                constellation
                    .points()
                    .iter()
                    .map(|&t| symbol_distance(*x, a, t)),
            );
        }
        DistanceTable { j, d }
    }
}

/// `|x - a·θ|²`, the per-symbol term of the decoding metric.
#[inline]
pub fn symbol_distance(x: Complex64, a: Complex64, theta: Complex64) -> f64 {
    (x - a * theta).norm_sqr()
}

/// Per-symbol metric terms of a block against every constellation point.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    j: usize,
    d: Vec<f64>,
}

impl DistanceTable {
    pub fn block_len(&self) -> usize {
        self.d.len() / self.j
    }

    pub fn order(&self) -> usize {
        self.j
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.d[k * self.j..(k + 1) * self.j]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.d.chunks_exact(self.j)
    }
}

/// Position of one PSC inside the interleaved stream: symbol `k` of PSC
/// `index` is sent at time `k·depth + index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interleave {
    pub depth: usize,
    pub index: usize,
}

/// Builds a PSC block of the virtual system from a true fading path.
///
/// Thermal noise `w[t] ~ CN(0,1)` is drawn for every time of `fading`.
/// The predictor sees `h[t-d] + w[t-d]/√γ` at its lags (`γ` is the
/// prediction's observation SNR), as if every earlier symbol had been
/// decoded correctly. Symbol `k` sits at time `t_k = H + k·depth + index`,
/// where `H` is the largest predictor lag, so every prediction has its full
/// history. Then
///
/// ```text
/// ĥ = Σ c_i y[t-d_i],  e = h[t] - ĥ,
/// Ĥ_d = ĥ / √(1-σ²),   z̄ = (√snr·e·θ_s + w[t]) / √(1 + snr·σ²)
/// ```
///
/// and `x = √ρ·Ĥ_d·θ_s + z̄` with `ρ = snr(1-σ²)/(1+snr·σ²)`, which equals
/// the received sample divided by `√(1 + snr·σ²)`. When the predictor
/// explains nothing (`σ² = 1`), `Ĥ_d` is drawn independently since it does
/// not enter `x`.
pub fn synthesize_psc_block(
    codeword: &[Symbol],
    constellation: &PskConstellation,
    fading: &[Complex64],
    layout: Interleave,
    prediction: &PredictionResult,
    snr: f64,
    seed: u64,
) -> Result<PscBlock> {
    let k_len = codeword.len();
    if k_len == 0 {
        return Err(Error::invalid("codeword", "must be non-empty"));
    }
    if layout.depth == 0 || layout.index >= layout.depth {
        return Err(Error::invalid(
            "layout",
            format!(
                "PSC {} does not exist at depth {}",
                layout.index, layout.depth
            ),
        ));
    }
    let history = prediction.max_lag();
    let needed = history + (k_len - 1) * layout.depth + layout.index + 1;
    if fading.len() < needed {
        return Err(Error::LengthMismatch {
            expected: needed,
            got: fading.len(),
        });
    }
    let sigma2 = prediction.error_variance;
    let rho = effective_snr(sigma2, snr)?;
    let explained = 1.0 - sigma2;

    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let noise = complex_gaussian_vec(&mut rng, needed);
    let mut spare = rng_from_seed(derive_seed(seed, 1));
    let obs_scale = if prediction.observation_snr.is_infinite() {
        0.0
    } else {
        1.0 / prediction.observation_snr.sqrt()
    };
    let noise_norm = 1.0 / (1.0 + snr * sigma2).sqrt();
    let h_norm = if explained > 1e-15 {
        1.0 / explained.sqrt()
    } else {
        0.0
    };

    let mut h_hat = Vec::with_capacity(k_len);
    let mut residual = Vec::with_capacity(k_len);
    for (k, &s) in codeword.iter().enumerate() {
        let t = history + k * layout.depth + layout.index;
        let predicted: Complex64 = prediction
            .coefficients
            .iter()
            .zip(&prediction.lags)
            .map(|(c, &d)| c * (fading[t - d] + obs_scale * noise[t - d]))
            .sum();
        let err = fading[t] - predicted;
        h_hat.push(if h_norm > 0.0 {
            predicted * h_norm
        } else {
            complex_gaussian(&mut spare, 1.0)
        });
        residual.push((snr.sqrt() * err * constellation.point(s) + noise[t]) * noise_norm);
    }
    PscBlock::from_components(constellation, h_hat, residual, codeword.to_vec(), rho)
}

/// A block whose fading estimate and residual noise are independent
/// unit-variance stationary processes drawn from the given models, with
/// a prescribed SNR. `FadingModel::Ar1 { alpha: 0.0 }` gives a memoryless
/// block.
pub fn stationary_block(
    codeword: &[Symbol],
    constellation: &PskConstellation,
    fading_model: &FadingModel,
    noise_model: &FadingModel,
    rho: f64,
    seed: u64,
) -> Result<PscBlock> {
    let n = codeword.len();
    let h_hat = generate_path(fading_model, n, derive_seed(seed, 0))?.samples;
    let residual = generate_path(noise_model, n, derive_seed(seed, 1))?.samples;
    PscBlock::from_components(constellation, h_hat, residual, codeword.to_vec(), rho)
}

/// A uniformly random codeword of length `k`.
pub fn random_codeword(constellation: &PskConstellation, k: usize, seed: u64) -> Vec<Symbol> {
    let mut rng = rng_from_seed(seed);
    (0..k)
        .map(|_| constellation.random_symbol(&mut rng))
        .collect()
}
