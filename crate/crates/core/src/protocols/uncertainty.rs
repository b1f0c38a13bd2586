//! Entropic uncertainty relation with quantum side information.

use super::{Povm, ProtocolError, Result};
use crate::entropy::EntropyOptions;
use crate::linalg::{op_norm, psd_sqrt, CMatrix, Keep, DEFAULT_TOL};
use crate::states::{State, StateError};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub epsilon: f64,
    /// Hmin^ε(X|B).
    pub hmin_xb: f64,
    /// Hmax^ε(Y|C).
    pub hmax_yc: f64,
    pub lhs: f64,
    /// max_{x,y} ‖√E_x √F_y‖².
    pub c: f64,
    /// Choi-norm constant of the two measurement dilations.
    pub c_choi: f64,
    /// −log c.
    pub rhs: f64,
    pub holds: bool,
}

/// Slack allowed on `lhs ≥ rhs`.
pub const RELATION_SLACK: f64 = 1e-6;

fn sqrt_elements(p: &Povm) -> Result<Vec<CMatrix>> {
    p.elements().iter().map(|e| Ok(psd_sqrt(&e.embed(), DEFAULT_TOL).map_err(StateError::from)?)).collect()
}

/// max_{x,y} ‖√E_x √F_y‖².
pub fn overlap_constant(px: &Povm, py: &Povm) -> Result<f64> {
    if !px.algebra().same_layout(py.algebra()) {
        return Err(StateError::AlgebraMismatch.into());
    }
    let (sx, sy) = (sqrt_elements(px)?, sqrt_elements(py)?);
    let mut c = 0.0f64;
    for e in &sx {
        for f in &sy {
            c = c.max(op_norm(&e.matmul(f)).powi(2));
        }
    }
    Ok(c)
}

/// Stinespring isometry `H → C^n ⊗ C^d ⊗ H`, row index `(p·d + k)·h + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dilation {
    iso: CMatrix,
    n: usize,
    d: usize,
}

impl Dilation {
    pub fn new(iso: CMatrix, n: usize, d: usize) -> Result<Self> {
        let h = iso.cols();
        if iso.rows() != n * d * h {
            return Err(ProtocolError::InvalidParameter(format!(
                "isometry has {} rows, expected {n}·{d}·{h}",
                iso.rows()
            )));
        }
        let defect = (&iso.adjoint().matmul(&iso) - &CMatrix::identity(h)).max_abs();
        if defect > DEFAULT_TOL {
            return Err(ProtocolError::NotIsometry(defect));
        }
        Ok(Dilation { iso, n, d })
    }

    /// `V|ψ⟩ = Σ_x |x⟩|x⟩ ⊗ √E_x|ψ⟩`.
    pub fn from_povm(p: &Povm) -> Result<Self> {
        let roots = sqrt_elements(p)?;
        let n = roots.len();
        let h = roots[0].rows();
        let mut v = CMatrix::zeros(n * n * h, h);
        for (x, r) in roots.iter().enumerate() {
            v.set_submatrix((x * n + x) * h, 0, r);
        }
        Dilation::new(v, n, n)
    }

    pub fn isometry(&self) -> &CMatrix {
        &self.iso
    }
}

/// c(UV*) = ‖Σ_{k,l} |k⟩⟨l| ⊗ T_{UV*}(|k⟩⟨l|)‖, computed as ‖G‖² for the
/// rearrangement `G[(k,i),(m,p)] = ⟨i m|UV*|p k⟩`.
pub fn uncertainty_choi_constant(u: &Dilation, v: &Dilation) -> Result<f64> {
    let h = u.iso.cols();
    if v.iso.cols() != h {
        return Err(ProtocolError::InvalidParameter("dilations act on different spaces".into()));
    }
    let w = u.iso.matmul(&v.iso.adjoint());
    let (n1, d1, n, d) = (u.n, u.d, v.n, v.d);
    let mut g = CMatrix::zeros(d * n1 * h, d1 * n * h);
    for k in 0..d {
        for i in 0..n1 {
            for m in 0..d1 {
                for p in 0..n {
                    let blk = w.submatrix((i * d1 + m) * h, (p * d + k) * h, h, h);
                    g.set_submatrix((k * n1 + i) * h, (m * n + p) * h, &blk);
                }
            }
        }
    }
    Ok(op_norm(&g).powi(2))
}

/// Measures A of a state on `(A ⊗ B) ⊗ C` with both POVMs and compares
/// `Hmin^ε(X|B) + Hmax^ε(Y|C)` against `−log c`.
pub fn uncertainty_check(
    opts: &EntropyOptions,
    omega: &State,
    povm_x: &Povm,
    povm_y: &Povm,
    eps: f64,
) -> Result<UncertaintyReport> {
    let nested = omega.algebra().factors().map(|(ab, _)| ab.factors().is_some()).unwrap_or(false);
    if !nested {
        return Err(ProtocolError::InvalidParameter("state must live on (A ⊗ B) ⊗ C".into()));
    }
    let a_bc = omega.assoc_right()?;
    let xb = a_bc.measure_a(povm_x)?.map_parts(|p| p.restrict(Keep::A).expect("B ⊗ C"))?;
    let yc = a_bc.measure_a(povm_y)?.map_parts(|p| p.restrict(Keep::B).expect("B ⊗ C"))?;
    let hmin_xb = opts.hmin_smooth(&xb.to_state(), eps)?.value;
    let hmax_yc = opts.hmax_smooth(&yc.to_state(), eps)?.value;
    let c = overlap_constant(povm_x, povm_y)?;
    let c_choi = uncertainty_choi_constant(&Dilation::from_povm(povm_x)?, &Dilation::from_povm(povm_y)?)?;
    if c_choi > c + DEFAULT_TOL {
        return Err(ProtocolError::BoundViolated { what: "Choi constant".into(), value: c_choi, bound: c });
    }
    let lhs = hmin_xb + hmax_yc;
    let rhs = -c.log2();
    Ok(UncertaintyReport { epsilon: eps, hmin_xb, hmax_yc, lhs, c, c_choi, rhs, holds: lhs >= rhs - RELATION_SLACK })
}
