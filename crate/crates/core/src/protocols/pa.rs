//! Privacy amplification by two-universal hashing.

use super::{check_eps, floor_count, mean_stats, ProtocolError, Result, BOUND_SLACK};
use crate::entropy::EntropyOptions;
use crate::hashing::{apply_tf, ConcreteHash, HashFamily, Mode};
use crate::linalg::trace_norm;
use crate::states::{CqState, State};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaReport {
    /// E_F ‖T_f(ω) − e_K/|K| ⊗ ω_E‖, exact or sampled.
    pub avg_distance: f64,
    pub exact: bool,
    pub members: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// 95% Hoeffding half-width of the sampled mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hoeffding: Option<f64>,
    pub hmin: f64,
    /// √(|K| · 2^{−Hmin(X|E)}).
    pub bound: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmin_smooth: Option<f64>,
    /// √(|K| · 2^{−Hmin^ε(X|E)}) + 4ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_bound: Option<f64>,
    pub best_f: ConcreteHash,
    pub best_distance: f64,
    pub key_size: u64,
}

/// ‖T_f(ω) − e_K/|K| ⊗ ω_E‖ summed over key values and blocks of E.
pub fn key_distance(f: &ConcreteHash, omega: &CqState, omega_e: &State) -> Result<f64> {
    let t = apply_tf(f, omega)?;
    let inv = 1.0 / t.len() as f64;
    Ok(t.parts()
        .iter()
        .map(|p| {
            p.densities().iter().zip(omega_e.densities()).map(|(r, e)| trace_norm(&(r - &e.scale(inv)))).sum::<f64>()
        })
        .sum())
}

fn alphabet_bits(omega: &CqState) -> Result<u32> {
    let n = omega.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(ProtocolError::InvalidParameter(format!("alphabet of size {n} is not {{0,1}}^a with a ≥ 1")));
    }
    Ok(n.trailing_zeros())
}

pub fn pa_run(omega: &CqState, b: u32, fam: &HashFamily, mode: Mode) -> Result<PaReport> {
    pa_run_with(&EntropyOptions::default(), omega, b, fam, mode, 0.0)
}

/// Runs the family over ω and asserts the hashing bound; with `eps > 0` the
/// smoothed bound is evaluated and asserted as well.
pub fn pa_run_with(
    opts: &EntropyOptions,
    omega: &CqState,
    b: u32,
    fam: &HashFamily,
    mode: Mode,
    eps: f64,
) -> Result<PaReport> {
    let a = alphabet_bits(omega)?;
    if fam.a != a || fam.b != b || b > a {
        return Err(ProtocolError::InvalidParameter(format!(
            "family maps {} to {} bits, run needs {a} to {b}",
            fam.a, fam.b
        )));
    }
    let members = fam.members(mode)?;
    let omega_e = omega.marginal_b();
    let mut scored: Vec<(ConcreteHash, f64)> =
        members.into_par_iter().map(|f| key_distance(&f, omega, &omega_e).map(|d| (f, d))).collect::<Result<_>>()?;
    scored.sort_by(|x, y| x.0.cmp(&y.0));
    let dists: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let (best_f, best_distance) = scored
        .iter()
        .fold(None::<&(ConcreteHash, f64)>, |acc, s| match acc {
            Some(best) if best.1 <= s.1 => Some(best),
            _ => Some(s),
        })
        .cloned()
        .expect("families are non-empty");

    let exact = matches!(mode, Mode::Exact);
    let (avg, stderr, hoeffding) = mean_stats(&dists, 2.0 * omega.weight());
    let key_size = 1u64 << b;
    let hmin = opts.hmin(&omega.to_state())?.value;
    let bound = (key_size as f64 * (-hmin).exp2()).sqrt();
    let slack = if exact { BOUND_SLACK } else { BOUND_SLACK + 3.0 * stderr };
    if avg > bound + slack {
        return Err(ProtocolError::BoundViolated { what: "hashing distance".into(), value: avg, bound });
    }
    // A perfect key cannot be longer than the min-entropy.
    if best_distance <= 1e-10 && b as f64 > hmin + 1e-6 {
        return Err(ProtocolError::BoundViolated { what: "perfect key length".into(), value: b as f64, bound: hmin });
    }

    let (hmin_smooth, smooth_bound) = if eps > 0.0 {
        check_eps(eps)?;
        let h = opts.hmin_smooth(&omega.to_state(), eps)?.value;
        let sb = (key_size as f64 * (-h).exp2()).sqrt() + 4.0 * eps;
        if avg > sb + slack {
            return Err(ProtocolError::BoundViolated {
                what: "smoothed hashing distance".into(),
                value: avg,
                bound: sb,
            });
        }
        (Some(h), Some(sb))
    } else {
        (None, None)
    };

    Ok(PaReport {
        avg_distance: avg,
        exact,
        members: dists.len(),
        stderr: (!exact).then_some(stderr),
        hoeffding: (!exact).then_some(hoeffding),
        hmin,
        bound,
        epsilon: eps,
        hmin_smooth,
        smooth_bound,
        best_f,
        best_distance,
        key_size,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    pub epsilon: f64,
    /// Hmin^{ε/5}(X|E).
    pub hmin_smooth: f64,
    /// Hmin^{ε/5}(X|E) − 2 log(5/ε).
    pub log_key: f64,
    pub key_size: u64,
    /// Hmin^{√ε}(X|E), an upper bound on log|K| for any ε-secure key.
    pub converse: f64,
}

pub fn pa_key_length(omega: &CqState, eps: f64) -> Result<KeyLength> {
    pa_key_length_with(&EntropyOptions::default(), omega, eps)
}

/// |K| = ⌊2^{Hmin^{ε/5}(X|E) − 2 log(5/ε)}⌋ and the converse cap.
pub fn pa_key_length_with(opts: &EntropyOptions, omega: &CqState, eps: f64) -> Result<KeyLength> {
    check_eps(eps)?;
    let s = omega.to_state();
    let hmin_smooth = opts.hmin_smooth(&s, eps / 5.0)?.value;
    let log_key = hmin_smooth - 2.0 * (5.0 / eps).log2();
    let key_size = floor_count(log_key);
    let converse = opts.hmin_smooth(&s, eps.sqrt())?.value;
    if key_size > 0 && (key_size as f64).log2() > converse + 1e-6 {
        return Err(ProtocolError::BoundViolated {
            what: "key length against its converse".into(),
            value: (key_size as f64).log2(),
            bound: converse,
        });
    }
    Ok(KeyLength { epsilon: eps, hmin_smooth, log_key, key_size, converse })
}
