//! Privacy amplification, data compression, key distillation and the
//! uncertainty relation, each checked against its entropic bound.

pub mod checks;
mod dc;
mod pa;
mod povm;
mod qkd;
mod uncertainty;

pub use dc::{dc_build, dc_build_with, dc_message_length, dc_message_length_with, DcReport, MessageLength};
pub use pa::{key_distance, pa_key_length, pa_key_length_with, pa_run, pa_run_with, KeyLength, PaReport};
pub use povm::Povm;
pub use qkd::{qkd_key_bounds, QkdBounds};
pub use uncertainty::{overlap_constant, uncertainty_check, uncertainty_choi_constant, Dilation, UncertaintyReport};

use crate::entropy::EntropyError;
use crate::hashing::HashError;
use crate::states::StateError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("{what}: {value} exceeds the bound {bound}")]
    BoundViolated { what: String, value: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not an isometry (defect {0:.3e})")]
    NotIsometry(f64),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Slack allowed on exact bound assertions.
pub const BOUND_SLACK: f64 = 1e-9;

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(ProtocolError::InvalidParameter(format!("epsilon {eps} outside (0, 1)")))
    }
}

/// Sample mean, standard error and a 95% Hoeffding half-width for values in `[0, range]`.
fn mean_stats(vals: &[f64], range: f64) -> (f64, f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let hoeffding = range * ((2.0f64 / 0.05).ln() / (2.0 * n)).sqrt();
    (mean, (var / n).sqrt(), hoeffding)
}

fn floor_count(log2: f64) -> u64 {
    let v = log2.exp2().floor();
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.max(0.0) as u64
    }
}
