//! Recursive training over correlated Rayleigh fading: channel synthesis,
//! one-step MMSE prediction, PSK codebooks with a nearest-neighbor decoder,
//! GMI estimation, PSK capacity, and an end-to-end simulator.
//!
//! Rates are in nats per symbol throughout.

pub mod capacity;
pub mod decoder;
pub mod ensemble;
pub mod error;
pub mod fading;
pub mod gmi;
pub mod numeric;
pub mod optimize;
pub mod prediction;
pub mod psk;
pub mod rng;
pub mod sim;
pub mod toeplitz;

pub use capacity::{
    psk_capacity, rate_budget, rate_ladder, CapacityEstimate, LadderOptions, RateBudget, RateLadder,
};
pub use decoder::{
    decode, metric, pairwise_undercut_probability, DecodeOutcome, UndercutEstimate, UndercutMethod,
};
pub use error::{Error, Result};
pub use fading::{generate_path, FadingModel, FadingPath};
pub use gmi::{gmi, gmi_lower_bound_check, lambda_hat, GmiOptions, GmiReport};
pub use prediction::{
    effective_snr, predictor_coefficients, rho_sequence, rho_sequence_with, HistoryPattern,
    PredictionResult, PredictorSpec,
};
pub use psk::{
    generate_codebook, make_constellation, stationary_block, synthesize_psc_block, Codebook,
    Interleave, PscBlock, PskConstellation, Symbol,
};
pub use sim::{budget_check, paired_gap, run, DecoderBackend, PairedGap, RtReport, SchemeConfig};
