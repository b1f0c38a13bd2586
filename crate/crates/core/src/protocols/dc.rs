//! Data compression with quantum side information: hash encoder and
//! pretty-good-measurement decoder.

use super::{check_eps, mean_stats, Povm, ProtocolError, Result, BOUND_SLACK};
use crate::algebra::AlgebraElement;
use crate::entropy::EntropyOptions;
use crate::hashing::{ConcreteHash, HashFamily, Mode};
use crate::linalg::{from_eig, herm_eig, min_eigenvalue, op_norm, CMatrix, DEFAULT_TOL, SUPPORT_CUTOFF};
use crate::states::{CqState, State, StateError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Outcome label for the part of a decoder left unassigned.
pub const NO_GUESS: &str = "none";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcReport {
    /// Member with the smallest error probability.
    pub encoder: ConcreteHash,
    /// One measurement per message value; outcome [`NO_GUESS`] collects `1 − Σ_x D_x`.
    pub decoder: Vec<Povm>,
    pub p_err: f64,
    /// Family average of the error probability.
    pub avg_p_err: f64,
    pub exact: bool,
    pub members: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub hmax: f64,
    /// √(2^{Hmax(X|B) + 3} / |C|).
    pub bound: f64,
    pub message_size: u64,
}

/// Π_x: projector onto the non-negative spectral part of `ω_B^x − ω_B/(2|C|)`, per block.
fn pi_projectors(parts: &[State], omega_b: &State, c: u64) -> Result<Vec<Vec<CMatrix>>> {
    let k = 1.0 / (2.0 * c as f64);
    parts
        .iter()
        .map(|p| {
            p.densities()
                .iter()
                .zip(omega_b.densities())
                .map(|(r, w)| {
                    let cut = SUPPORT_CUTOFF * op_norm(w);
                    let (vals, vecs) = herm_eig(&(r - &w.scale(k)), DEFAULT_TOL).map_err(StateError::from)?;
                    Ok(from_eig(&vals.iter().map(|&l| if l >= -cut { 1.0 } else { 0.0 }).collect::<Vec<_>>(), &vecs))
                })
                .collect()
        })
        .collect()
}

/// Pseudo-inverse square root on the support.
fn pinv_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, DEFAULT_TOL).map_err(StateError::from)?;
    let cut = SUPPORT_CUTOFF * vals.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    Ok(from_eig(&vals.iter().map(|&l| if l > cut { 1.0 / l.sqrt() } else { 0.0 }).collect::<Vec<_>>(), &vecs))
}

/// Decoder `D[x][j]` for encoder f: `D_x = Σ^{+1/2} Π_x Σ^{+1/2}` with Σ the
/// sum of Π over the bucket of x, inverse taken on the support.
fn decoder(f: &ConcreteHash, pis: &[Vec<CMatrix>]) -> Result<Vec<Vec<CMatrix>>> {
    let nc = 1usize << f.range_bits();
    let nblocks = pis[0].len();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for x in 0..pis.len() {
        buckets[f.eval(x as u64) as usize].push(x);
    }
    let mut d: Vec<Vec<CMatrix>> =
        pis.iter().map(|p| p.iter().map(|m| CMatrix::zeros(m.rows(), m.rows())).collect()).collect();
    for bucket in &buckets {
        for j in 0..nblocks {
            let n = pis[0][j].rows();
            let mut sum = CMatrix::zeros(n, n);
            for &x in bucket {
                sum += &pis[x][j];
            }
            let s = pinv_sqrt(&sum)?;
            let mut total = CMatrix::zeros(n, n);
            for &x in bucket {
                let dx = s.matmul(&pis[x][j]).matmul(&s).hermitian_part();
                if min_eigenvalue(&dx, DEFAULT_TOL).map_err(StateError::from)? < -1e-9 {
                    return Err(StateError::NotAPovm(format!("decoder element {x} is not PSD")).into());
                }
                total += &dx;
                d[x][j] = dx;
            }
            let rest = (&CMatrix::identity(n) - &total).hermitian_part();
            if min_eigenvalue(&rest, DEFAULT_TOL).map_err(StateError::from)? < -1e-9 {
                return Err(StateError::NotAPovm("decoder elements exceed the identity".into()).into());
            }
        }
    }
    Ok(d)
}

/// `ω(1) − Σ_x ω_B^x(D_x)` for an unpadded alphabet prefix.
fn error_probability(parts: &[State], d: &[Vec<CMatrix>]) -> f64 {
    let total: f64 = parts.iter().map(|p| p.weight()).sum();
    let hit: f64 =
        parts.iter().zip(d).map(|(p, dx)| p.densities().iter().zip(dx).map(|(r, m)| r.inner_re(m)).sum::<f64>()).sum();
    (total - hit).clamp(0.0, 1.0)
}

pub fn dc_build(omega: &CqState, message_size: u64, fam: &HashFamily, mode: Mode) -> Result<DcReport> {
    dc_build_with(&EntropyOptions::default(), omega, message_size, fam, mode)
}

/// Builds the decoder for every family member (the alphabet is padded with
/// zero-weight letters up to `2^a`), reports the best encoder and asserts the
/// family-averaged error bound.
pub fn dc_build_with(
    opts: &EntropyOptions,
    omega: &CqState,
    message_size: u64,
    fam: &HashFamily,
    mode: Mode,
) -> Result<DcReport> {
    let nx = omega.len();
    let a = (nx.max(2).next_power_of_two()).trailing_zeros();
    if !message_size.is_power_of_two() || message_size > 1u64 << a {
        return Err(ProtocolError::InvalidParameter(format!(
            "message size {message_size} must be a power of two at most {}",
            1u64 << a
        )));
    }
    let b = message_size.trailing_zeros();
    if fam.a != a || fam.b != b {
        return Err(ProtocolError::InvalidParameter(format!(
            "family maps {} to {} bits, run needs {a} to {b}",
            fam.a, fam.b
        )));
    }
    let balg = omega.b_algebra().clone();
    let mut padded: Vec<State> = omega.parts().to_vec();
    padded.resize(1usize << a, State::zero(&balg));
    let omega_b = omega.marginal_b();
    let pis = pi_projectors(&padded, &omega_b, message_size)?;

    let mut scored: Vec<(ConcreteHash, f64)> = fam
        .members(mode)?
        .into_par_iter()
        .map(|f| {
            let d = decoder(&f, &pis)?;
            Ok((f, error_probability(omega.parts(), &d)))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|x, y| x.0.cmp(&y.0));
    let errs: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let (encoder, p_err) = scored
        .iter()
        .fold(None::<&(ConcreteHash, f64)>, |acc, s| match acc {
            Some(best) if best.1 <= s.1 => Some(best),
            _ => Some(s),
        })
        .cloned()
        .expect("families are non-empty");

    let exact = matches!(mode, Mode::Exact);
    let (avg, stderr, _) = mean_stats(&errs, 1.0);
    let hmax = opts.hmax(&omega.to_state())?.value;
    let bound = ((hmax + 3.0).exp2() / message_size as f64).sqrt();
    let slack = if exact { BOUND_SLACK } else { BOUND_SLACK + 3.0 * stderr };
    if avg > bound + slack {
        return Err(ProtocolError::BoundViolated {
            what: "family-averaged error probability".into(),
            value: avg,
            bound,
        });
    }

    let d = decoder(&encoder, &pis)?;
    let mut outcomes: Vec<String> = omega.alphabet().to_vec();
    outcomes.push(NO_GUESS.into());
    let dims = balg.block_dims();
    let decoders = (0..message_size as usize)
        .map(|c| {
            let mut elems: Vec<AlgebraElement> = Vec::with_capacity(nx + 1);
            let mut rest: Vec<CMatrix> = dims.iter().map(|&n| CMatrix::identity(n)).collect();
            for (x, dx) in d.iter().enumerate() {
                let mine = encoder.eval(x as u64) as usize == c;
                if x < nx {
                    let blocks: Vec<CMatrix> =
                        dx.iter().map(|m| if mine { m.clone() } else { CMatrix::zeros(m.rows(), m.rows()) }).collect();
                    elems.push(AlgebraElement::new(&balg, blocks).map_err(StateError::from)?);
                }
                if mine {
                    for (r, m) in rest.iter_mut().zip(dx) {
                        *r -= m;
                    }
                }
            }
            let rest = rest.into_iter().map(|m| m.hermitian_part()).collect();
            elems.push(AlgebraElement::new(&balg, rest).map_err(StateError::from)?);
            Ok(Povm::new(&balg, outcomes.clone(), elems)?)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DcReport {
        encoder,
        decoder: decoders,
        p_err,
        avg_p_err: avg,
        exact,
        members: errs.len(),
        stderr: (!exact).then_some(stderr),
        hmax,
        bound,
        message_size,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageLength {
    pub epsilon: f64,
    /// Hmax^{ε/2}(X|B).
    pub hmax_smooth: f64,
    /// Hmax^{ε/2}(X|B) + 2 log(1/ε) + 6.
    pub log_size: f64,
    pub message_size: u64,
    /// Hmax^{√(2ε)}(X|B), a lower bound on log|C| for any ε-reliable protocol.
    pub converse: f64,
}

pub fn dc_message_length(omega: &CqState, eps: f64) -> Result<MessageLength> {
    dc_message_length_with(&EntropyOptions::default(), omega, eps)
}

/// |C| = ⌈2^{Hmax^{ε/2}(X|B) + 2 log(1/ε) + 6}⌉ and the converse floor.
pub fn dc_message_length_with(opts: &EntropyOptions, omega: &CqState, eps: f64) -> Result<MessageLength> {
    check_eps(eps)?;
    let s = omega.to_state();
    let hmax_smooth = opts.hmax_smooth(&s, eps / 2.0)?.value;
    let log_size = hmax_smooth + 2.0 * (1.0 / eps).log2() + 6.0;
    let v = log_size.exp2().ceil();
    let message_size = if v >= u64::MAX as f64 { u64::MAX } else { v as u64 };
    let r = (2.0 * eps).sqrt();
    // Past radius 1 the ball holds the zero functional.
    let converse = if r < 1.0 { opts.hmax_smooth(&s, r)?.value } else { f64::NEG_INFINITY };
    if (message_size as f64).log2() < converse - 1e-6 {
        return Err(ProtocolError::BoundViolated {
            what: "message length against its converse".into(),
            value: (message_size as f64).log2(),
            bound: converse,
        });
    }
    Ok(MessageLength { epsilon: eps, hmax_smooth, log_size, message_size, converse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Algebra;

    fn perfect_copy(n: usize) -> CqState {
        let parts = (0..n)
            .map(|x| {
                let mut d = vec![0.0; n];
                d[x] = 1.0 / n as f64;
                State::classical(&d).unwrap()
            })
            .collect();
        CqState::indexed(parts).unwrap()
    }

    #[test]
    fn perfect_side_information() {
        for c in [1u64, 2, 4] {
            let r = dc_build(&perfect_copy(4), c, &HashFamily::toeplitz(2, c.trailing_zeros()), Mode::Exact).unwrap();
            assert!(r.avg_p_err <= 1e-9 && r.p_err <= 1e-9);
            assert!(r.hmax.abs() < 1e-6);
            assert!((r.bound - (8.0 / c as f64).sqrt()).abs() < 1e-5);
        }
    }

    #[test]
    fn full_transmission() {
        let omega = CqState::classical(&[0.25; 4]).unwrap();
        let r = dc_build(&omega, 4, &HashFamily::toeplitz(2, 2), Mode::Exact).unwrap();
        assert!(r.p_err <= 1e-12);
        assert_eq!(r.decoder.len(), 4);
    }

    #[test]
    fn half_transmission_without_side_information() {
        let omega = CqState::classical(&[0.25; 4]).unwrap();
        let r = dc_build(&omega, 2, &HashFamily::toeplitz(2, 1), Mode::Exact).unwrap();
        assert!((r.hmax - 2.0).abs() < 1e-6);
        assert!((r.bound - 4.0).abs() < 1e-5);
        assert!((r.p_err - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qubit_side_information_meets_bound() {
        let mut rng = crate::rng::Rng::new(17);
        for nx in [3usize, 4, 5] {
            let omega = rng.cq_random(nx, &Algebra::full(2));
            let a = nx.next_power_of_two().trailing_zeros();
            let r = dc_build(&omega, 2, &HashFamily::toeplitz(a, 1), Mode::Exact).unwrap();
            assert!(r.avg_p_err <= r.bound + 1e-9);
            assert!(r.p_err <= r.avg_p_err + 1e-12);
            assert_eq!(r.decoder[0].len(), nx + 1);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        let omega = CqState::classical(&[0.25; 4]).unwrap();
        assert!(dc_build(&omega, 3, &HashFamily::toeplitz(2, 1), Mode::Exact).is_err());
        assert!(dc_build(&omega, 8, &HashFamily::toeplitz(2, 3), Mode::Exact).is_err());
    }

    #[test]
    fn message_length_examples() {
        let opts = EntropyOptions::default();
        let m = dc_message_length_with(&opts, &perfect_copy(2), 0.1).unwrap();
        assert!(m.hmax_smooth <= 1e-6);
        assert!(m.message_size as f64 <= (2.0 * 10f64.log2() + 6.0 + 1e-6).exp2().ceil());
        let u = dc_message_length_with(&opts, &CqState::classical(&[0.25; 4]).unwrap(), 0.1).unwrap();
        assert!(u.message_size >= 4);
        let mut last = u64::MAX;
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let m = dc_message_length_with(&opts, &CqState::classical(&[0.4, 0.3, 0.2, 0.1]).unwrap(), eps).unwrap();
            assert!(m.message_size <= last);
            last = m.message_size;
        }
    }
}
