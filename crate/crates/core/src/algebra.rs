//! Finite-dimensional von Neumann algebras as direct sums of matrix blocks.
//!
//! An algebra with blocks `(n_k, m_k)` acts on `⊕_k C^{n_k} ⊗ C^{m_k}` and its
//! elements embed as `⊕_k x_k ⊗ 1_{m_k}`. Block order is kept as constructed
//! so that tensor products can be indexed by factor; comparison goes through
//! [`Algebra::canonical`].

use crate::linalg::{partial_trace, CMatrix, Keep};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for ambient membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("algebra needs at least one block")]
    EmptyBlocks,
    #[error("block dimensions and multiplicities must be at least 1")]
    ZeroDim,
    #[error("element shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algebra {
    blocks: Vec<(usize, usize)>,
    #[serde(default)]
    label: String,
    /// Tensor factors when built by [`Algebra::tensor`]; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    factors: Vec<Algebra>,
}

impl Algebra {
    pub fn new(blocks: &[(usize, usize)]) -> Result<Self, AlgebraError> {
        if blocks.is_empty() {
            return Err(AlgebraError::EmptyBlocks);
        }
        if blocks.iter().any(|&(n, m)| n == 0 || m == 0) {
            return Err(AlgebraError::ZeroDim);
        }
        Ok(Algebra { blocks: blocks.to_vec(), label: String::new(), factors: Vec::new() })
    }

    /// M_n.
    pub fn full(n: usize) -> Self {
        Algebra { blocks: vec![(n.max(1), 1)], label: format!("M{n}"), factors: Vec::new() }
    }

    /// ℓ∞ of a d-point set.
    pub fn classical(d: usize) -> Self {
        Algebra { blocks: vec![(1, 1); d.max(1)], label: format!("l{d}"), factors: Vec::new() }
    }

    /// C·1.
    pub fn trivial() -> Self {
        Algebra { blocks: vec![(1, 1)], label: "C".into(), factors: Vec::new() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Checks the invariants after deserialisation.
    pub fn validate(&self) -> Result<(), AlgebraError> {
        Algebra::new(&self.blocks)?;
        for f in &self.factors {
            f.validate()?;
        }
        match self.factors.as_slice() {
            [] => {}
            [a, b] if a.tensor(b).blocks == self.blocks => {}
            _ => return Err(AlgebraError::ShapeMismatch("factors do not match blocks".into())),
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.0).collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.blocks.iter().map(|&(n, m)| n * m).sum()
    }

    /// Sum of block dimensions, i.e. the size of the multiplicity-free representation.
    pub fn reduced_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.0).sum()
    }

    pub fn is_factor(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn is_abelian(&self) -> bool {
        self.blocks.iter().all(|b| b.0 == 1)
    }

    pub fn factors(&self) -> Option<(&Algebra, &Algebra)> {
        match self.factors.as_slice() {
            [a, b] => Some((a, b)),
            _ => None,
        }
    }

    /// Forgets tensor structure.
    pub fn flattened(&self) -> Algebra {
        Algebra { blocks: self.blocks.clone(), label: self.label.clone(), factors: Vec::new() }
    }

    pub fn commutant(&self) -> Algebra {
        Algebra {
            blocks: self.blocks.iter().map(|&(n, m)| (m, n)).collect(),
            label: format!("{}'", self.label),
            factors: self.factors.iter().map(|f| f.commutant()).collect(),
        }
    }

    pub fn center(&self) -> Algebra {
        Algebra {
            blocks: self.blocks.iter().map(|&(n, m)| (1, n * m)).collect(),
            label: format!("Z({})", self.label),
            factors: Vec::new(),
        }
    }

    /// Blocks ordered factor-major: block `(i, j)` sits at index `i * |B| + j`.
    pub fn tensor(&self, other: &Algebra) -> Algebra {
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for &(n1, m1) in &self.blocks {
            for &(n2, m2) in &other.blocks {
                blocks.push((n1 * n2, m1 * m2));
            }
        }
        Algebra {
            blocks, label: format!("{}⊗{}", self.label, other.label), factors: vec![self.clone(), other.clone()]
        }
    }

    pub fn canonical(&self) -> Vec<(usize, usize)> {
        let mut b = self.blocks.clone();
        b.sort_unstable();
        b
    }

    pub fn structurally_eq(&self, other: &Algebra) -> bool {
        self.canonical() == other.canonical()
    }

    /// Same block list in the same order (what states on the two algebras need).
    pub fn same_layout(&self, other: &Algebra) -> bool {
        self.blocks == other.blocks
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for &(n, m) in &self.blocks {
            off.push(acc);
            acc += n * m;
        }
        off
    }

    /// Ambient matrix ⊕ x_k ⊗ 1_{m_k}.
    pub fn embed(&self, elem: &AlgebraElement) -> Result<CMatrix, AlgebraError> {
        self.check_blocks(&elem.block_matrices, false)?;
        let mut out = CMatrix::zeros(self.ambient_dim(), self.ambient_dim());
        for ((&(_, m), off), x) in self.blocks.iter().zip(self.offsets()).zip(&elem.block_matrices) {
            out.set_submatrix(off, off, &x.kron(&CMatrix::identity(m)));
        }
        Ok(out)
    }

    /// Ambient matrix ⊕ 1_{n_k} ⊗ y_k for `y` an element of the commutant.
    pub fn embed_commutant(&self, elem: &AlgebraElement) -> Result<CMatrix, AlgebraError> {
        self.commutant().check_blocks(&elem.block_matrices, false)?;
        let mut out = CMatrix::zeros(self.ambient_dim(), self.ambient_dim());
        for ((&(n, _), off), y) in self.blocks.iter().zip(self.offsets()).zip(&elem.block_matrices) {
            out.set_submatrix(off, off, &CMatrix::identity(n).kron(y));
        }
        Ok(out)
    }

    /// Recovers the element whose embedding is closest to `m`, with the
    /// distance of `m` from the embedded image.
    pub fn project(&self, m: &CMatrix) -> Result<(AlgebraElement, f64), AlgebraError> {
        self.project_with(m, Keep::A)
    }

    /// As [`Algebra::project`] but for the commutant image.
    pub fn project_commutant(&self, m: &CMatrix) -> Result<(AlgebraElement, f64), AlgebraError> {
        self.project_with(m, Keep::B)
    }

    fn project_with(&self, m: &CMatrix, keep: Keep) -> Result<(AlgebraElement, f64), AlgebraError> {
        let d = self.ambient_dim();
        if m.rows() != d || m.cols() != d {
            return Err(AlgebraError::ShapeMismatch(format!("ambient {d}, got {}x{}", m.rows(), m.cols())));
        }
        let mut blocks = Vec::new();
        let mut rebuilt = CMatrix::zeros(d, d);
        for (&(n, mult), off) in self.blocks.iter().zip(self.offsets()) {
            let sub = m.submatrix(off, off, n * mult, n * mult);
            let x = match keep {
                Keep::A => partial_trace(&sub, Keep::A, (n, mult)).expect("block shape").scale(1.0 / mult as f64),
                Keep::B => partial_trace(&sub, Keep::B, (n, mult)).expect("block shape").scale(1.0 / n as f64),
            };
            let emb = match keep {
                Keep::A => x.kron(&CMatrix::identity(mult)),
                Keep::B => CMatrix::identity(n).kron(&x),
            };
            rebuilt.set_submatrix(off, off, &emb);
            blocks.push(x);
        }
        let dist = (m - &rebuilt).max_abs();
        let alg = match keep {
            Keep::A => self.clone(),
            Keep::B => self.commutant(),
        };
        Ok((AlgebraElement { algebra: alg, block_matrices: blocks }, dist))
    }

    pub fn contains(&self, m: &CMatrix, tol: f64) -> bool {
        self.project(m).map(|(_, d)| d <= tol).unwrap_or(false)
    }

    pub fn commutant_contains(&self, m: &CMatrix, tol: f64) -> bool {
        self.project_commutant(m).map(|(_, d)| d <= tol).unwrap_or(false)
    }

    pub(crate) fn check_blocks(&self, mats: &[CMatrix], hermitian: bool) -> Result<(), AlgebraError> {
        if mats.len() != self.blocks.len() {
            return Err(AlgebraError::ShapeMismatch(format!("{} blocks, expected {}", mats.len(), self.blocks.len())));
        }
        for (k, (x, &(n, _))) in mats.iter().zip(&self.blocks).enumerate() {
            if x.rows() != n || x.cols() != n {
                return Err(AlgebraError::ShapeMismatch(format!(
                    "block {k}: {}x{}, expected {n}x{n}",
                    x.rows(),
                    x.cols()
                )));
            }
            if hermitian && !x.is_hermitian(MEMBERSHIP_TOL) {
                return Err(AlgebraError::ShapeMismatch(format!("block {k} is not Hermitian")));
            }
        }
        Ok(())
    }

    pub fn identity_element(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            block_matrices: self.blocks.iter().map(|&(n, _)| CMatrix::identity(n)).collect(),
        }
    }

    pub fn zero_element(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            block_matrices: self.blocks.iter().map(|&(n, _)| CMatrix::zeros(n, n)).collect(),
        }
    }
}

/// One matrix per block of `algebra`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    pub algebra: Algebra,
    pub block_matrices: Vec<CMatrix>,
}

impl AlgebraElement {
    pub fn new(algebra: &Algebra, block_matrices: Vec<CMatrix>) -> Result<Self, AlgebraError> {
        algebra.check_blocks(&block_matrices, false)?;
        Ok(AlgebraElement { algebra: algebra.clone(), block_matrices })
    }

    pub fn embed(&self) -> CMatrix {
        self.algebra.embed(self).expect("shape checked at construction")
    }

    pub fn mul(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            block_matrices: self.block_matrices.iter().zip(&other.block_matrices).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            block_matrices: self.block_matrices.iter().zip(&other.block_matrices).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            block_matrices: self.block_matrices.iter().map(|a| a.scale(s)).collect(),
        }
    }

    pub fn adjoint(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            block_matrices: self.block_matrices.iter().map(|a| a.adjoint()).collect(),
        }
    }

    /// a ⊗ b as an element of `a.algebra ⊗ b.algebra`.
    pub fn tensor(&self, other: &AlgebraElement) -> AlgebraElement {
        let mut blocks = Vec::new();
        for x in &self.block_matrices {
            for y in &other.block_matrices {
                blocks.push(x.kron(y));
            }
        }
        AlgebraElement { algebra: self.algebra.tensor(&other.algebra), block_matrices: blocks }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr};

    fn elem(alg: &Algebra, seed: u64) -> AlgebraElement {
        let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mats = alg.blocks().iter().map(|&(n, _)| CMatrix::from_fn(n, n, |_, _| c(next(), next()))).collect();
        AlgebraElement::new(alg, mats).unwrap()
    }

    #[test]
    fn make_examples() {
        let q = Algebra::new(&[(2, 1)]).unwrap();
        assert_eq!(q.ambient_dim(), 2);
        assert!(q.is_factor());
        let bit = Algebra::new(&[(1, 1), (1, 1)]).unwrap();
        assert!(bit.is_abelian());
        let m = Algebra::new(&[(2, 3)]).unwrap();
        assert_eq!(m.ambient_dim(), 6);
        assert_eq!(m.embed(&m.identity_element()).unwrap().trace(), cr(6.0));
        assert_eq!(Algebra::new(&[]), Err(AlgebraError::EmptyBlocks));
        assert_eq!(Algebra::new(&[(2, 0)]), Err(AlgebraError::ZeroDim));
    }

    #[test]
    fn commutant_examples() {
        assert_eq!(Algebra::full(3).commutant().blocks(), &[(1, 3)]);
        let diag = Algebra::classical(3);
        assert!(diag.commutant().structurally_eq(&diag));
        let a = Algebra::new(&[(2, 3)]).unwrap();
        assert_eq!(a.commutant().blocks(), &[(3, 2)]);
        for s in 0..5 {
            let x = a.embed(&elem(&a, s)).unwrap();
            let y = a.embed_commutant(&elem(&a.commutant(), 100 + s)).unwrap();
            assert!((&(&x * &y) - &(&y * &x)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn center_examples() {
        assert_eq!(Algebra::full(2).center().blocks(), &[(1, 2)]);
        assert!(Algebra::classical(2).center().structurally_eq(&Algebra::classical(2)));
        let a = Algebra::new(&[(2, 1), (3, 1)]).unwrap();
        let z = a.center();
        assert_eq!(z.num_blocks(), 2);
        // Scalars per block lie in both the algebra and its commutant.
        let el =
            AlgebraElement::new(&z, vec![CMatrix::identity(1).scale(2.0), CMatrix::identity(1).scale(-1.0)]).unwrap();
        let m = z.embed(&el).unwrap();
        let amb = CMatrix::from_fn(5, 5, |i, j| if i == j { m[(i, i)] } else { cr(0.0) });
        assert!(a.contains(&amb, MEMBERSHIP_TOL));
        assert!(a.commutant_contains(&amb, MEMBERSHIP_TOL));
    }

    #[test]
    fn tensor_examples() {
        let q = Algebra::full(2);
        assert_eq!(q.tensor(&q).blocks(), &[(4, 1)]);
        let cq = Algebra::classical(2).tensor(&q);
        assert_eq!(cq.blocks(), &[(2, 1), (2, 1)]);
        assert!(q.tensor(&Algebra::trivial()).structurally_eq(&q));
    }

    #[test]
    fn membership() {
        let a = Algebra::new(&[(2, 2), (1, 3)]).unwrap();
        let x = a.embed(&elem(&a, 4)).unwrap();
        assert!(a.contains(&x, MEMBERSHIP_TOL));
        let mut bad = x.clone();
        bad[(0, 1)] += cr(0.5);
        assert!(!a.contains(&bad, MEMBERSHIP_TOL));
    }

    #[test]
    fn json_shape() {
        let a = Algebra::new(&[(2, 1), (1, 1)]).unwrap().with_label("B");
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"blocks":[[2,1],[1,1]],"label":"B"}"#);
        let back: Algebra = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
    }
}
