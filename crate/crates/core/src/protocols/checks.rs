//! Numerical forms of the auxiliary operator inequalities and chain rules the
//! protocol bounds rest on. Each returns a slack that is non-negative when the
//! statement holds.

use super::Result;
use crate::algebra::Algebra;
use crate::entropy::{dmax, EntropyOptions};
use crate::linalg::{from_eig, herm_eig, min_eigenvalue, vnorm, CMatrix, DEFAULT_TOL, SUPPORT_CUTOFF};
use crate::metrics::{distance_bounds, generalized_fidelity, purified_distance};
use crate::states::{radon_nikodym, CqState, State, StateError};

/// Minimum eigenvalue of `2(1 − S) + 4T − (1 − (S+T)^{-1/2} S (S+T)^{-1/2})`,
/// inverse on the support. Needs `0 ≤ S ≤ 1`, `T ≥ 0`.
pub fn hayashi_slack(s: &CMatrix, t: &CMatrix) -> Result<f64> {
    let n = s.rows();
    let (vals, vecs) = herm_eig(&(s + t), DEFAULT_TOL).map_err(StateError::from)?;
    let cut = SUPPORT_CUTOFF * vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let r = from_eig(&vals.iter().map(|&l| if l > cut { 1.0 / l.sqrt() } else { 0.0 }).collect::<Vec<_>>(), &vecs);
    let id = CMatrix::identity(n);
    let lhs = &id - &r.matmul(s).matmul(&r);
    let rhs = &(&id - s).scale(2.0) + &t.scale(4.0);
    Ok(min_eigenvalue(&(&rhs - &lhs).hermitian_part(), DEFAULT_TOL).map_err(StateError::from)?)
}

/// `F̂(φ, η)^{1/2} − φ(s₋) − η(s₊)` with s₊ the support of the positive part of φ − η.
pub fn ogata_slack(phi: &State, eta: &State) -> Result<f64> {
    let mut lhs = 0.0;
    for (p, e) in phi.densities().iter().zip(eta.densities()) {
        let (vals, vecs) = herm_eig(&(p - e), DEFAULT_TOL).map_err(StateError::from)?;
        let cut = SUPPORT_CUTOFF * vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let plus = from_eig(&vals.iter().map(|&l| if l > cut { 1.0 } else { 0.0 }).collect::<Vec<_>>(), &vecs);
        let minus = &CMatrix::identity(plus.rows()) - &plus;
        lhs += p.inner_re(&minus) + e.inner_re(&plus);
    }
    Ok(generalized_fidelity(phi, eta)?.sqrt() - lhs)
}

/// `Hmin^ε(A|BC) + log n − Hmin^ε(AB|C)` for a state on `(M_m ⊗ M_n) ⊗ C`.
pub fn chain_rule_slack(opts: &EntropyOptions, omega: &State, eps: f64) -> Result<f64> {
    let (ab, _) = omega.algebra().factors().ok_or(StateError::NotTensor)?;
    let (_, b) = ab.factors().ok_or(StateError::NotTensor)?;
    let n = b.ambient_dim() as f64;
    let ab_c = opts.hmin_smooth(omega, eps)?.value;
    let a_bc = opts.hmin_smooth(&omega.assoc_right()?, eps)?.value;
    Ok(a_bc + n.log2() - ab_c)
}

/// Parts `ω_AB^x` laid out on `A ⊗ (B ⊗ X)`.
fn a_bx(omega: &CqState) -> Result<State> {
    let (a, b) = omega.b_algebra().factors().ok_or(StateError::NotTensor)?;
    let (a, b) = (a.clone(), b.clone());
    let nx = omega.len();
    let (na, nb) = (a.num_blocks(), b.num_blocks());
    let alg = a.tensor(&b.tensor(&Algebra::classical(nx)));
    let mut dens = Vec::with_capacity(na * nb * nx);
    for i in 0..na {
        for j in 0..nb {
            for part in omega.parts() {
                dens.push(part.densities()[i * nb + j].clone());
            }
        }
    }
    Ok(State::new(&alg, dens, DEFAULT_TOL)?)
}

/// `Hmax(A|BX) − Hmax(A|B) + log|X|` for `ω_ABX` given as a cq-state with parts on `A ⊗ B`.
pub fn max_entropy_classical_slack(opts: &EntropyOptions, omega: &CqState) -> Result<f64> {
    let with_x = opts.hmax(&a_bx(omega)?)?.value;
    let without = opts.hmax(&omega.marginal_b())?.value;
    Ok(with_x - without + (omega.len() as f64).log2())
}

/// Parts `ω_AB^x` laid out on `(A ⊗ X) ⊗ B`.
fn ax_b(omega: &CqState) -> Result<State> {
    let (a, b) = omega.b_algebra().factors().ok_or(StateError::NotTensor)?;
    let (a, b) = (a.clone(), b.clone());
    let nx = omega.len();
    let (na, nb) = (a.num_blocks(), b.num_blocks());
    let alg = a.tensor(&Algebra::classical(nx)).tensor(&b);
    let mut dens = Vec::with_capacity(na * nx * nb);
    for i in 0..na {
        for part in omega.parts() {
            for j in 0..nb {
                dens.push(part.densities()[i * nb + j].clone());
            }
        }
    }
    Ok(State::new(&alg, dens, DEFAULT_TOL)?)
}

/// `Hmin^ε(AX|B) − Hmin^ε(A|B)` for `ω_AXB` given as a cq-state with parts on `A ⊗ B`.
pub fn classical_extension_slack(opts: &EntropyOptions, omega: &CqState, eps: f64) -> Result<f64> {
    let with_x = opts.hmin_smooth(&ax_b(omega)?, eps)?.value;
    let without = opts.hmin_smooth(&omega.marginal_b(), eps)?.value;
    Ok(with_x - without)
}

/// `|log ‖h_ω‖ − Dmax(ω‖σ)|` with h the Radon–Nikodym derivative in the standard form of σ.
pub fn radon_nikodym_dmax_gap(omega: &State, sigma: &State) -> Result<f64> {
    let rn = radon_nikodym(omega, sigma, &sigma.purify()?)?;
    Ok((rn.log_norm() - dmax(omega, sigma)?).abs())
}

/// `‖Σ_x D_x*D_x ξ_τ − D*D ξ_τ‖` for the parts of a cq-state and their sum,
/// all differentiated against τ.
pub fn radon_nikodym_sum_residual(omega: &CqState, tau: &State) -> Result<f64> {
    let pt = tau.purify()?;
    let apply = |s: &State| -> Result<Vec<crate::linalg::C64>> {
        let rn = radon_nikodym(s, tau, &pt)?;
        Ok(pt.ambient_complementary(&rn.h)?.matvec(&pt.vector))
    };
    let mut acc = vec![crate::linalg::c(0.0, 0.0); pt.vector.len()];
    for part in omega.parts() {
        for (a, v) in acc.iter_mut().zip(apply(part)?) {
            *a += v;
        }
    }
    let whole = apply(&omega.marginal_b())?;
    let diff: Vec<_> = acc.iter().zip(&whole).map(|(a, b)| a - b).collect();
    Ok(vnorm(&diff))
}

/// Slacks of `½(ND + |Δw|) ≤ P ≤ √(ND + |Δw|)`: `(P − lower, upper − P)`.
pub fn distance_sandwich_slack(omega: &State, sigma: &State) -> Result<(f64, f64)> {
    let p = purified_distance(omega, sigma)?;
    let (lo, hi) = distance_bounds(omega, sigma)?;
    Ok((p - lo, hi - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_pair(rng: &mut Rng, n: usize) -> (CMatrix, CMatrix) {
        // S = U diag(u) U† with u ∈ [0,1], T = small Ginibre PSD.
        let u = rng.unitary(n);
        let d: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let s = from_eig(&d, &u).hermitian_part();
        let t = rng.ginibre_density(n).scale(rng.uniform() * 2.0);
        (s, t)
    }

    #[test]
    fn hayashi_on_random_pairs() {
        let mut rng = Rng::new(1);
        for k in 0..200 {
            let (s, t) = random_pair(&mut rng, 2 + k % 3);
            assert!(hayashi_slack(&s, &t).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn hayashi_with_singular_sum() {
        let s = CMatrix::diag_real(&[1.0, 0.0]);
        let t = CMatrix::zeros(2, 2);
        assert!(hayashi_slack(&s, &t).unwrap() >= -1e-12);
    }

    #[test]
    fn ogata_on_random_subnormalized_pairs() {
        let mut rng = Rng::new(2);
        let alg = Algebra::new(&[(2, 1), (1, 1)]).unwrap();
        for _ in 0..200 {
            let (p, e) = (rng.subnormalized(&alg, 0.2), rng.subnormalized(&alg, 0.2));
            assert!(ogata_slack(&p, &e).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn chain_rules_hold() {
        let opts = EntropyOptions::default();
        let mut rng = Rng::new(3);
        for _ in 0..3 {
            let omega = rng.ginibre_full(&[2, 2, 2]);
            assert!(chain_rule_slack(&opts, &omega, 0.0).unwrap() >= -1e-6);
            assert!(chain_rule_slack(&opts, &omega, 0.05).unwrap() >= -1e-6);
            let ab = Algebra::full(2).tensor(&Algebra::full(2));
            let cq = rng.cq_random(2, &ab);
            assert!(max_entropy_classical_slack(&opts, &cq).unwrap() >= -1e-6);
            assert!(classical_extension_slack(&opts, &cq, 0.05).unwrap() >= -1e-6);
        }
    }

    #[test]
    fn radon_nikodym_contracts() {
        let mut rng = Rng::new(4);
        let alg = Algebra::new(&[(2, 1), (1, 2)]).unwrap();
        let (o, s) = (rng.ginibre_state(&alg), rng.ginibre_state(&alg));
        assert!(radon_nikodym_dmax_gap(&o, &s).unwrap() < 1e-8);
        let cq = rng.cq_random(3, &alg);
        let tau = cq.marginal_b().add(&rng.ginibre_state(&alg)).unwrap();
        assert!(radon_nikodym_sum_residual(&cq, &tau).unwrap() < 1e-8);
    }

    #[test]
    fn sandwich_on_examples() {
        let a = State::classical(&[0.5, 0.5]).unwrap();
        let b = State::classical(&[0.3, 0.2]).unwrap();
        let (lo, hi) = distance_sandwich_slack(&a, &b).unwrap();
        assert!(lo >= 0.0 && hi >= 0.0);
    }
}
