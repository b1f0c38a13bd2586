//! Fidelity, generalized fidelity, purified distance and norm distance.

use crate::linalg::{psd_sqrt, trace_norm, DEFAULT_TOL};
use crate::states::{CqState, State, StateError};

type Result<T> = std::result::Result<T, StateError>;

fn check(omega: &State, sigma: &State) -> Result<()> {
    if omega.algebra().same_layout(sigma.algebra()) {
        Ok(())
    } else {
        Err(StateError::AlgebraMismatch)
    }
}

/// Σ_k ‖√ρ_k √σ_k‖₁, the square root of the fidelity.
pub fn root_fidelity(omega: &State, sigma: &State) -> Result<f64> {
    check(omega, sigma)?;
    let mut acc = 0.0;
    for (r, s) in omega.densities().iter().zip(sigma.densities()) {
        let a = psd_sqrt(r, DEFAULT_TOL)?;
        let b = psd_sqrt(s, DEFAULT_TOL)?;
        acc += trace_norm(&a.matmul(&b));
    }
    Ok(acc)
}

/// Uhlmann fidelity F = (Σ_k tr|√ρ_k √σ_k|)².
pub fn fidelity(omega: &State, sigma: &State) -> Result<f64> {
    Ok(root_fidelity(omega, sigma)?.powi(2))
}

/// F̂ = (√F + √((1−ω(1))(1−σ(1))))².
pub fn generalized_fidelity(omega: &State, sigma: &State) -> Result<f64> {
    let rf = root_fidelity(omega, sigma)?;
    let defect = ((1.0 - omega.weight()).max(0.0) * (1.0 - sigma.weight()).max(0.0)).sqrt();
    Ok((rf + defect).powi(2).min(1.0))
}

/// P = √(1 − F̂).
pub fn purified_distance(omega: &State, sigma: &State) -> Result<f64> {
    Ok((1.0 - generalized_fidelity(omega, sigma)?).max(0.0).sqrt())
}

/// Σ_k ‖ρ_k − σ_k‖₁.
pub fn norm_distance(omega: &State, sigma: &State) -> Result<f64> {
    check(omega, sigma)?;
    Ok(omega.densities().iter().zip(sigma.densities()).map(|(r, s)| trace_norm(&(r - s))).sum())
}

pub fn fidelity_cq(omega: &CqState, sigma: &CqState) -> Result<f64> {
    fidelity(&omega.to_state(), &sigma.to_state())
}

pub fn purified_distance_cq(omega: &CqState, sigma: &CqState) -> Result<f64> {
    purified_distance(&omega.to_state(), &sigma.to_state())
}

pub fn norm_distance_cq(omega: &CqState, sigma: &CqState) -> Result<f64> {
    norm_distance(&omega.to_state(), &sigma.to_state())
}

/// Lower and upper bounds ½(ND + |Δw|) ≤ P ≤ √(ND + |Δw|).
pub fn distance_bounds(omega: &State, sigma: &State) -> Result<(f64, f64)> {
    let t = norm_distance(omega, sigma)? + (omega.weight() - sigma.weight()).abs();
    Ok((0.5 * t, t.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr, CMatrix, C64};

    fn cl(p: &[f64]) -> State {
        State::from_density(CMatrix::diag_real(p)).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let r = cl(&[0.3, 0.7]);
        assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        let psi = [cr(0.6), c(0.0, 0.8)];
        let phi = [cr(std::f64::consts::FRAC_1_SQRT_2), cr(std::f64::consts::FRAC_1_SQRT_2)];
        let ov: C64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
        let f = fidelity(&State::pure(&psi).unwrap(), &State::pure(&phi).unwrap()).unwrap();
        assert!((f - ov.norm_sqr()).abs() < 1e-10);
        let f = fidelity(&cl(&[0.5, 0.5]), &cl(&[0.75, 0.25])).unwrap();
        let expect = (0.375f64.sqrt() + 0.125f64.sqrt()).powi(2);
        assert!((f - expect).abs() < 1e-12);
        assert!((f - 0.93301).abs() < 1e-5);
    }

    #[test]
    fn generalized_fidelity_examples() {
        let a = cl(&[0.6, 0.4]);
        let b = cl(&[0.1, 0.9]);
        assert!((generalized_fidelity(&a, &b).unwrap() - fidelity(&a, &b).unwrap()).abs() < 1e-14);
        let w = cl(&[0.2, 0.3]);
        assert!((generalized_fidelity(&w, &w).unwrap() - 1.0).abs() < 1e-12);
        let f = generalized_fidelity(&cl(&[0.5, 0.0]), &cl(&[0.0, 0.5])).unwrap();
        assert!((f - 0.25).abs() < 1e-14);
    }

    #[test]
    fn purified_distance_examples() {
        let a = cl(&[0.5, 0.5]);
        assert!(purified_distance(&a, &a).unwrap() < 1e-7);
        assert!((purified_distance(&cl(&[1.0, 0.0]), &cl(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-14);
        let p = purified_distance(&a, &cl(&[0.75, 0.25])).unwrap();
        assert!((p - 0.25882).abs() < 1e-5);
    }

    #[test]
    fn norm_distance_examples() {
        let a = cl(&[0.5, 0.5]);
        assert_eq!(norm_distance(&a, &a).unwrap(), 0.0);
        assert!((norm_distance(&cl(&[1.0, 0.0]), &cl(&[0.0, 1.0])).unwrap() - 2.0).abs() < 1e-14);
        let x = State::classical(&[0.75, 0.25]).unwrap();
        let y = State::classical(&[0.5, 0.5]).unwrap();
        assert!((norm_distance(&x, &y).unwrap() - 0.5).abs() < 1e-14);
        assert!(matches!(norm_distance(&x, &a), Err(StateError::AlgebraMismatch)));
    }

    #[test]
    fn uhlmann_matches_commutant_unitary_search() {
        // sup over unitaries u on the complementary leg of |⟨ξ_ω|(1⊗u)ξ_σ⟩|².
        let rho = CMatrix::from_rows(&[vec![cr(0.7), c(0.1, 0.2)], vec![c(0.1, -0.2), cr(0.3)]]).unwrap();
        let sig = CMatrix::from_rows(&[vec![cr(0.4), c(-0.2, 0.05)], vec![c(-0.2, -0.05), cr(0.6)]]).unwrap();
        let (o, s) = (State::from_density(rho).unwrap(), State::from_density(sig).unwrap());
        let (po, ps) = (o.purify().unwrap(), s.purify().unwrap());
        let mut best: f64 = 0.0;
        let steps = 48;
        for a in 0..steps {
            for b in 0..steps {
                for g in 0..steps {
                    let th = std::f64::consts::PI * a as f64 / steps as f64;
                    let ph = 2.0 * std::f64::consts::PI * b as f64 / steps as f64;
                    let ch = 2.0 * std::f64::consts::PI * g as f64 / steps as f64;
                    let u = CMatrix::from_rows(&[
                        vec![cr(th.cos()), -C64::from_polar(th.sin(), ch)],
                        vec![C64::from_polar(th.sin(), ph), C64::from_polar(th.cos(), ph + ch)],
                    ])
                    .unwrap();
                    let v = CMatrix::identity(2).kron(&u).matvec(&ps.vector);
                    let ov: C64 = po.vector.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                    best = best.max(ov.norm_sqr());
                }
            }
        }
        let f = fidelity(&o, &s).unwrap();
        assert!(best <= f + 1e-12);
        assert!(f - best < 5e-3, "grid {best} vs closed form {f}");
    }
}
