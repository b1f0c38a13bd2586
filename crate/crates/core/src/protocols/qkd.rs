//! Distillable key of a cq-state with the identity preprocessing `Y = X`, `Z` trivial.

use super::{check_eps, floor_count, ProtocolError, Result};
use crate::entropy::EntropyOptions;
use crate::linalg::Keep;
use crate::states::CqState;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QkdBounds {
    pub eps1: f64,
    pub eps2: f64,
    /// Hmin^{ε₁/5}(X|E).
    pub hmin_e: f64,
    /// Hmax^{ε₂/4}(X|B).
    pub hmax_b: f64,
    pub log_achievable: f64,
    pub achievable: u64,
    /// Hmin^{√(2ε)}(X|E) with ε = ε₁ + ε₂.
    pub converse_hmin_e: f64,
    /// Hmax^{√(2ε)}(X|B).
    pub converse_hmax_b: f64,
    pub log_converse: f64,
    pub converse: u64,
}

/// Achievable and converse key sizes for a cq-state on `X` with side
/// information `B ⊗ E` (Bob holds B, the adversary E).
pub fn qkd_key_bounds(opts: &EntropyOptions, omega_xbe: &CqState, eps1: f64, eps2: f64) -> Result<QkdBounds> {
    check_eps(eps1)?;
    check_eps(eps2)?;
    if omega_xbe.b_algebra().factors().is_none() {
        return Err(ProtocolError::InvalidParameter("side information must be a tensor product B ⊗ E".into()));
    }
    let xe = omega_xbe.map_parts(|p| p.restrict(Keep::B).expect("side information is B ⊗ E"))?.to_state();
    let xb = omega_xbe.map_parts(|p| p.restrict(Keep::A).expect("side information is B ⊗ E"))?.to_state();

    let hmin_e = opts.hmin_smooth(&xe, eps1 / 5.0)?.value;
    let hmax_b = opts.hmax_smooth(&xb, eps2 / 4.0)?.value;
    let log_achievable = hmin_e - hmax_b - 2.0 * (80.0 / (eps1 * eps2)).log2();
    let achievable = floor_count(log_achievable);

    let r = (2.0 * (eps1 + eps2)).sqrt();
    let (converse_hmin_e, converse_hmax_b) = if r < 1.0 {
        (opts.hmin_smooth(&xe, r)?.value, opts.hmax_smooth(&xb, r)?.value)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    };
    let log_converse = converse_hmin_e - converse_hmax_b;
    let converse = floor_count(log_converse);
    if log_achievable > log_converse + 1e-6 {
        return Err(ProtocolError::BoundViolated {
            what: "achievable key exponent against the converse".into(),
            value: log_achievable,
            bound: log_converse,
        });
    }
    Ok(QkdBounds {
        eps1,
        eps2,
        hmin_e,
        hmax_b,
        log_achievable,
        achievable,
        converse_hmin_e,
        converse_hmax_b,
        log_converse,
        converse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Algebra;
    use crate::linalg::CMatrix;
    use crate::states::State;

    /// X uniform on n letters; B a classical copy when `b_copy`, E likewise when `e_copy`.
    fn source(n: usize, b_copy: bool, e_copy: bool) -> CqState {
        let reg = |copy: bool| if copy { Algebra::classical(n) } else { Algebra::trivial() };
        let alg = reg(b_copy).tensor(&reg(e_copy));
        let parts = (0..n)
            .map(|x| {
                let dens = (0..alg.num_blocks())
                    .map(|k| {
                        let (j, l) = if e_copy { (k / n, k % n) } else { (k, 0) };
                        let hit = (!b_copy || j == x) && (!e_copy || l == x);
                        CMatrix::diag_real(&[if hit { 1.0 / n as f64 } else { 0.0 }])
                    })
                    .collect();
                State::new(&alg, dens, 1e-9).unwrap()
            })
            .collect();
        CqState::indexed(parts).unwrap()
    }

    #[test]
    fn copy_to_bob_only() {
        let q = qkd_key_bounds(&EntropyOptions::default(), &source(4, true, false), 0.1, 0.1).unwrap();
        assert!(q.hmin_e >= 2.0 - 1e-6);
        assert!(q.hmax_b <= 1e-6);
        assert!((q.log_achievable - (q.hmin_e - q.hmax_b - 2.0 * 8000f64.log2())).abs() < 1e-12);
        assert_eq!(q.achievable, 0);
        assert!(q.log_converse >= q.log_achievable);
    }

    #[test]
    fn copy_to_adversary() {
        let q = qkd_key_bounds(&EntropyOptions::default(), &source(2, true, true), 0.05, 0.05).unwrap();
        assert!(q.hmin_e < 0.2);
        assert_eq!(q.achievable, 0);
    }

    #[test]
    fn extra_uniform_bit_raises_exponent() {
        // X' = (X, U) with U uniform and copied to Bob only.
        let opts = EntropyOptions::default();
        let base = source(2, false, false);
        let alg = Algebra::classical(2).tensor(&Algebra::trivial());
        let parts = (0..4)
            .map(|x| {
                let dens = (0..2).map(|j| CMatrix::diag_real(&[if j == x >> 1 { 0.25 } else { 0.0 }])).collect();
                State::new(&alg, dens, 1e-9).unwrap()
            })
            .collect();
        let wider = CqState::indexed(parts).unwrap();
        let q2 = qkd_key_bounds(&opts, &base, 0.1, 0.1).unwrap();
        let q4 = qkd_key_bounds(&opts, &wider, 0.1, 0.1).unwrap();
        assert!(q4.log_achievable - q2.log_achievable >= 1.0 - 1e-5, "{} {}", q2.log_achievable, q4.log_achievable);
    }
}
