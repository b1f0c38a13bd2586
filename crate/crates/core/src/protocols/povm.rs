use crate::algebra::{Algebra, AlgebraElement};
use crate::linalg::{c, cr, CMatrix, DEFAULT_TOL};
use crate::states::StateError;
use serde::{Deserialize, Serialize};

/// Finite POVM on an algebra: PSD elements summing to the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmRepr", into = "PovmRepr")]
pub struct Povm {
    algebra: Algebra,
    outcomes: Vec<String>,
    elements: Vec<AlgebraElement>,
}

#[derive(Serialize, Deserialize)]
struct PovmRepr {
    algebra: Algebra,
    outcomes: Vec<String>,
    elements: Vec<Vec<CMatrix>>,
}

impl From<Povm> for PovmRepr {
    fn from(p: Povm) -> Self {
        PovmRepr {
            algebra: p.algebra,
            outcomes: p.outcomes,
            elements: p.elements.into_iter().map(|e| e.block_matrices).collect(),
        }
    }
}

impl TryFrom<PovmRepr> for Povm {
    type Error = StateError;
    fn try_from(r: PovmRepr) -> Result<Self, StateError> {
        let elems =
            r.elements.into_iter().map(|b| AlgebraElement::new(&r.algebra, b)).collect::<Result<Vec<_>, _>>()?;
        Povm::new(&r.algebra, r.outcomes, elems)
    }
}

impl Povm {
    pub fn new(algebra: &Algebra, outcomes: Vec<String>, elements: Vec<AlgebraElement>) -> Result<Self, StateError> {
        if outcomes.len() != elements.len() || elements.is_empty() {
            return Err(StateError::NotAPovm("outcome labels and elements differ in number".into()));
        }
        let dims = algebra.block_dims();
        let mut sums: Vec<CMatrix> = dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (x, e) in elements.iter().enumerate() {
            if e.block_matrices.len() != dims.len() {
                return Err(StateError::NotAPovm(format!("element {x} has the wrong block count")));
            }
            for (k, m) in e.block_matrices.iter().enumerate() {
                if m.rows() != dims[k] || m.cols() != dims[k] {
                    return Err(StateError::NotAPovm(format!("element {x}, block {k}: wrong shape")));
                }
                if !m.is_psd(DEFAULT_TOL) {
                    return Err(StateError::NotAPovm(format!("element {x}, block {k} is not PSD")));
                }
                sums[k] += m;
            }
        }
        for (k, s) in sums.iter().enumerate() {
            if (s - &CMatrix::identity(dims[k])).max_abs() > DEFAULT_TOL {
                return Err(StateError::NotAPovm(format!("elements do not sum to the identity in block {k}")));
            }
        }
        Ok(Povm { algebra: algebra.clone(), outcomes, elements })
    }

    /// POVM on the factor `M_n` from plain matrices, outcomes labelled `0..`.
    pub fn from_matrices(mats: Vec<CMatrix>) -> Result<Self, StateError> {
        let n = mats.first().map(|m| m.rows()).unwrap_or(0);
        if n == 0 {
            return Err(StateError::NotAPovm("empty POVM".into()));
        }
        let alg = Algebra::full(n);
        let outcomes = (0..mats.len()).map(|x| x.to_string()).collect();
        let elems = mats.into_iter().map(|m| AlgebraElement::new(&alg, vec![m])).collect::<Result<Vec<_>, _>>()?;
        Povm::new(&alg, outcomes, elems)
    }

    /// Rank-one projective measurement in the orthonormal columns of `u`.
    pub fn basis(u: &CMatrix) -> Result<Self, StateError> {
        Povm::from_matrices((0..u.cols()).map(|j| CMatrix::projector(&u.col_vec(j))).collect())
    }

    pub fn computational(n: usize) -> Self {
        Povm::basis(&CMatrix::identity(n)).expect("identity is a basis")
    }

    /// Qubit measurement in the |±⟩ basis.
    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Povm::basis(&CMatrix::from_real_rows(&[&[h, h], &[h, -h]])).expect("Hadamard is unitary")
    }

    /// Two-outcome qubit POVM {E, 1−E} with E = a·1 + b·(n⃗·σ⃗), requires |b| ≤ min(a, 1−a).
    pub fn qubit_binary(a: f64, b: f64, n: [f64; 3]) -> Result<Self, StateError> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt().max(1e-300);
        let (x, y, z) = (n[0] / norm, n[1] / norm, n[2] / norm);
        let e = CMatrix::from_rows(&[vec![cr(a + b * z), c(b * x, -b * y)], vec![c(b * x, b * y), cr(a - b * z)]])
            .map_err(|e| StateError::NotAPovm(e.to_string()))?;
        let f = &CMatrix::identity(2) - &e;
        Povm::from_matrices(vec![e, f])
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn elements(&self) -> &[AlgebraElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Single-block matrices; only meaningful on a factor.
    pub fn matrices(&self) -> Vec<CMatrix> {
        self.elements.iter().map(|e| e.embed()).collect()
    }
}
