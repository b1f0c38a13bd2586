//! Normal states, cq-states, standard-form purification and Radon–Nikodym
//! derivatives.
//!
//! A [`State`] stores one density per algebra block with the multiplicity
//! collapsed, so `ω(a) = Σ_k tr(ρ_k a_k)`.
//!
//! The standard form of a state with densities `ρ_k` is the vector
//! `ξ = ⊕_k Σ_ij (ρ_k^{1/2})_ij |i⟩|j⟩` on `⊕_k C^{n_k} ⊗ C^{n_k}`. The algebra
//! acts on the left leg and its commutant on the right leg. The modular
//! conjugation `J` is entrywise complex conjugation followed by a leg swap;
//! it fixes `ξ` because `ρ_k^{1/2}` is Hermitian.

use crate::algebra::{Algebra, AlgebraElement, AlgebraError};
use crate::linalg::{
    self, herm_eig, partial_trace, psd_inv_sqrt, psd_sqrt, support_projector, CMatrix, Keep, LinalgError, C64,
    DEFAULT_TOL,
};
use crate::protocols::Povm;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("density block {block} is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { block: usize, min_eig: f64 },
    #[error("state weight {0} exceeds 1")]
    Overweight(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("state does not live on a tensor product algebra")]
    NotTensor,
    #[error("states live on different algebras")]
    AlgebraMismatch,
    #[error("support of omega is not contained in support of sigma (block {block}, leak {leak:.3e})")]
    DominationFailure { block: usize, leak: f64 },
    #[error("not a POVM: {0}")]
    NotAPovm(String),
    #[error("normalized flag {flag} disagrees with weight {weight}")]
    NormalizationFlag { flag: bool, weight: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, StateError>;

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    algebra: Algebra,
    densities: Vec<CMatrix>,
    weight: f64,
}

impl State {
    /// Validates shapes, positivity and weight ≤ 1 + tol.
    pub fn new(algebra: &Algebra, densities: Vec<CMatrix>, tol: f64) -> Result<Self> {
        algebra.check_blocks(&densities, false)?;
        let mut clean = Vec::with_capacity(densities.len());
        for (k, d) in densities.into_iter().enumerate() {
            let (vals, _) = herm_eig(&d, tol)?;
            if let Some(&l) = vals.last() {
                if l < -tol {
                    return Err(StateError::NotPsd { block: k, min_eig: l });
                }
            }
            clean.push(d.hermitian_part());
        }
        let weight: f64 = clean.iter().map(|d| d.trace().re).sum();
        if weight > 1.0 + tol {
            return Err(StateError::Overweight(weight));
        }
        Ok(State { algebra: algebra.clone(), densities: clean, weight })
    }

    /// Builds a state without validation; callers guarantee positivity.
    pub(crate) fn from_parts_unchecked(algebra: Algebra, densities: Vec<CMatrix>) -> Self {
        let densities: Vec<CMatrix> = densities.into_iter().map(|d| d.hermitian_part()).collect();
        let weight = densities.iter().map(|d| d.trace().re).sum();
        State { algebra, densities, weight }
    }

    /// State on the full matrix algebra M_n.
    pub fn from_density(rho: CMatrix) -> Result<Self> {
        let n = rho.rows();
        State::new(&Algebra::full(n), vec![rho], DEFAULT_TOL)
    }

    /// Vector state |ψ⟩⟨ψ| on M_n.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        State::from_density(CMatrix::projector(psi))
    }

    /// Probability vector as a state on ℓ∞(X).
    pub fn classical(p: &[f64]) -> Result<Self> {
        State::new(&Algebra::classical(p.len()), p.iter().map(|&x| CMatrix::diag_real(&[x])).collect(), DEFAULT_TOL)
    }

    /// Single density on the nested tensor product of full matrix algebras
    /// `((M_{d0} ⊗ M_{d1}) ⊗ M_{d2}) ⊗ …`.
    pub fn on_full_tensor(dims: &[usize], rho: CMatrix) -> Result<Self> {
        let mut alg = Algebra::full(dims[0]);
        for &d in &dims[1..] {
            alg = alg.tensor(&Algebra::full(d));
        }
        State::new(&alg, vec![rho], DEFAULT_TOL)
    }

    pub fn zero(algebra: &Algebra) -> Self {
        State {
            algebra: algebra.clone(),
            densities: algebra.block_dims().iter().map(|&n| CMatrix::zeros(n, n)).collect(),
            weight: 0.0,
        }
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn densities(&self) -> &[CMatrix] {
        &self.densities
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn is_normalized(&self) -> bool {
        (self.weight - 1.0).abs() <= DEFAULT_TOL
    }

    pub fn is_subnormalized(&self) -> bool {
        self.weight <= 1.0 + DEFAULT_TOL
    }

    /// ω(a) = Σ_k tr(ρ_k a_k).
    pub fn evaluate(&self, a: &AlgebraElement) -> Result<C64> {
        self.algebra.check_blocks(&a.block_matrices, false)?;
        Ok(self.densities.iter().zip(&a.block_matrices).map(|(r, x)| r.matmul(x).trace()).sum())
    }

    /// Block-diagonal ⊕ ρ_k on the multiplicity-free space.
    pub fn block_diag(&self) -> CMatrix {
        linalg::direct_sum(&self.densities)
    }

    pub fn scale(&self, s: f64) -> State {
        State {
            algebra: self.algebra.clone(),
            densities: self.densities.iter().map(|d| d.scale(s)).collect(),
            weight: self.weight * s,
        }
    }

    /// Blockwise sum; no weight check.
    pub fn add(&self, other: &State) -> Result<State> {
        if !self.algebra.same_layout(&other.algebra) {
            return Err(StateError::AlgebraMismatch);
        }
        Ok(State {
            algebra: self.algebra.clone(),
            densities: self.densities.iter().zip(&other.densities).map(|(a, b)| a + b).collect(),
            weight: self.weight + other.weight,
        })
    }

    /// Replaces the algebra by one with the same block layout (e.g. to attach
    /// or drop tensor structure).
    pub fn relabel(&self, algebra: &Algebra) -> Result<State> {
        if algebra.block_dims() != self.algebra.block_dims() {
            return Err(StateError::AlgebraMismatch);
        }
        Ok(State { algebra: algebra.clone(), densities: self.densities.clone(), weight: self.weight })
    }

    /// ρ_A ⊗ ρ_B on the tensor algebra.
    pub fn product(a: &State, b: &State) -> State {
        let alg = a.algebra.tensor(&b.algebra);
        let mut dens = Vec::new();
        for x in &a.densities {
            for y in &b.densities {
                dens.push(x.kron(y));
            }
        }
        State::from_parts_unchecked(alg, dens)
    }

    fn tensor_factors(&self) -> Result<(Algebra, Algebra)> {
        let (a, b) = self.algebra.factors().ok_or(StateError::NotTensor)?;
        Ok((a.clone(), b.clone()))
    }

    /// Restriction to one tensor factor.
    pub fn restrict(&self, keep: Keep) -> Result<State> {
        let (a, b) = self.tensor_factors()?;
        let (da, db) = (a.block_dims(), b.block_dims());
        let out = match keep {
            Keep::A => {
                let mut dens: Vec<CMatrix> = da.iter().map(|&n| CMatrix::zeros(n, n)).collect();
                for (i, &ni) in da.iter().enumerate() {
                    for (j, &nj) in db.iter().enumerate() {
                        dens[i] += &partial_trace(&self.densities[i * db.len() + j], Keep::A, (ni, nj))?;
                    }
                }
                State::from_parts_unchecked(a, dens)
            }
            Keep::B => {
                let mut dens: Vec<CMatrix> = db.iter().map(|&n| CMatrix::zeros(n, n)).collect();
                for (i, &ni) in da.iter().enumerate() {
                    for (j, &nj) in db.iter().enumerate() {
                        dens[j] += &partial_trace(&self.densities[i * db.len() + j], Keep::B, (ni, nj))?;
                    }
                }
                State::from_parts_unchecked(b, dens)
            }
        };
        Ok(out)
    }

    /// State on `B ⊗ A` from a state on `A ⊗ B`.
    pub fn swap(&self) -> Result<State> {
        let (a, b) = self.tensor_factors()?;
        let (da, db) = (a.block_dims(), b.block_dims());
        let mut dens = Vec::with_capacity(self.densities.len());
        for (j, &nj) in db.iter().enumerate() {
            for (i, &ni) in da.iter().enumerate() {
                dens.push(linalg::swap_legs(&self.densities[i * db.len() + j], (ni, nj)));
            }
        }
        Ok(State::from_parts_unchecked(b.tensor(&a), dens))
    }

    /// `(A ⊗ B) ⊗ C` to `A ⊗ (B ⊗ C)`.
    pub fn assoc_right(&self) -> Result<State> {
        let (ab, cc) = self.tensor_factors()?;
        let (a, b) = ab.factors().map(|(x, y)| (x.clone(), y.clone())).ok_or(StateError::NotTensor)?;
        let (na, nb, nc) = (a.num_blocks(), b.num_blocks(), cc.num_blocks());
        let mut dens = Vec::with_capacity(self.densities.len());
        for i in 0..na {
            for j in 0..nb {
                for k in 0..nc {
                    dens.push(self.densities[(i * nb + j) * nc + k].clone());
                }
            }
        }
        Ok(State::from_parts_unchecked(a.tensor(&b.tensor(&cc)), dens))
    }

    /// `A ⊗ (B ⊗ C)` to `(A ⊗ B) ⊗ C`.
    pub fn assoc_left(&self) -> Result<State> {
        let (a, bc) = self.tensor_factors()?;
        let (b, cc) = bc.factors().map(|(x, y)| (x.clone(), y.clone())).ok_or(StateError::NotTensor)?;
        let (na, nb, nc) = (a.num_blocks(), b.num_blocks(), cc.num_blocks());
        let mut dens = Vec::with_capacity(self.densities.len());
        for i in 0..na {
            for j in 0..nb {
                for k in 0..nc {
                    dens.push(self.densities[i * nb * nc + j * nc + k].clone());
                }
            }
        }
        Ok(State::from_parts_unchecked(a.tensor(&b).tensor(&cc), dens))
    }

    /// Standard-form purification.
    pub fn purify(&self) -> Result<Purification> {
        let mut vector = Vec::new();
        let mut dims = Vec::new();
        for rho in &self.densities {
            let r = psd_sqrt(rho, DEFAULT_TOL)?;
            let n = r.rows();
            // Left leg is the row index.
            vector.extend_from_slice(r.data());
            dims.push(n);
        }
        let relevant = Algebra::new(&dims.iter().map(|&n| (n, n)).collect::<Vec<_>>())?
            .with_label(format!("π({})", self.algebra.label()));
        let complementary = relevant.commutant().with_label(format!("π({})'", self.algebra.label()));
        Ok(Purification { vector, relevant, complementary, block_dims: dims, source: self.algebra.clone() })
    }

    /// Outcome-resolved post-measurement cq-state: `parts[x](b) = ω(E_x ⊗ b)`.
    pub fn measure_a(&self, povm: &Povm) -> Result<CqState> {
        let (a, b) = self.tensor_factors()?;
        if !povm.algebra().same_layout(&a) {
            return Err(StateError::NotAPovm("POVM does not act on the first tensor factor".into()));
        }
        let (da, db) = (a.block_dims(), b.block_dims());
        let mut parts = Vec::with_capacity(povm.len());
        for e in povm.elements() {
            let mut dens: Vec<CMatrix> = db.iter().map(|&n| CMatrix::zeros(n, n)).collect();
            for (i, &ni) in da.iter().enumerate() {
                for (j, &nj) in db.iter().enumerate() {
                    let ex = e.block_matrices[i].kron(&CMatrix::identity(nj));
                    let m = ex.matmul(&self.densities[i * db.len() + j]);
                    let m = (&m + &m.adjoint()).scale(0.5);
                    dens[j] += &partial_trace(&m, Keep::B, (ni, nj))?;
                }
            }
            parts.push(State::from_parts_unchecked(b.clone(), dens));
        }
        Ok(CqState { alphabet: povm.outcomes().to_vec(), parts })
    }
}

/// Measurement of the first tensor factor.
pub fn cq_from_measurement(s: &State, povm: &Povm) -> Result<CqState> {
    s.measure_a(povm)
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    algebra: Algebra,
    densities: Vec<CMatrix>,
    normalized: bool,
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson { algebra: self.algebra.clone(), densities: self.densities.clone(), normalized: self.is_normalized() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = StateJson::deserialize(d)?;
        j.algebra.validate().map_err(serde::de::Error::custom)?;
        let st = State::new(&j.algebra, j.densities, DEFAULT_TOL).map_err(serde::de::Error::custom)?;
        if st.is_normalized() != j.normalized {
            return Err(serde::de::Error::custom(StateError::NormalizationFlag {
                flag: j.normalized,
                weight: st.weight,
            }));
        }
        Ok(st)
    }
}

/// Classical-quantum state `(ω_B^x)_{x∈X}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CqState {
    alphabet: Vec<String>,
    parts: Vec<State>,
}

impl CqState {
    pub fn new(alphabet: Vec<String>, parts: Vec<State>) -> Result<Self> {
        if alphabet.len() != parts.len() || parts.is_empty() {
            return Err(StateError::ShapeMismatch("alphabet and parts differ in length".into()));
        }
        let b = parts[0].algebra();
        if parts.iter().any(|p| !p.algebra().same_layout(b)) {
            return Err(StateError::AlgebraMismatch);
        }
        let w: f64 = parts.iter().map(|p| p.weight()).sum();
        if w > 1.0 + DEFAULT_TOL {
            return Err(StateError::Overweight(w));
        }
        Ok(CqState { alphabet, parts })
    }

    /// Labels `0..d` written in decimal.
    pub fn indexed(parts: Vec<State>) -> Result<Self> {
        CqState::new((0..parts.len()).map(|i| i.to_string()).collect(), parts)
    }

    /// Distribution `p` with trivial side information.
    pub fn classical(p: &[f64]) -> Result<Self> {
        CqState::indexed(
            p.iter()
                .map(|&x| State::from_parts_unchecked(Algebra::trivial(), vec![CMatrix::diag_real(&[x])]))
                .collect(),
        )
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn parts(&self) -> &[State] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn b_algebra(&self) -> &Algebra {
        self.parts[0].algebra()
    }

    pub fn weight(&self) -> f64 {
        self.parts.iter().map(|p| p.weight()).sum()
    }

    /// ω_B = Σ_x ω_B^x.
    pub fn marginal_b(&self) -> State {
        let mut acc = State::zero(self.b_algebra());
        for p in &self.parts {
            acc = acc.add(p).expect("same layout");
        }
        acc
    }

    pub fn distribution(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.weight()).collect()
    }

    /// The state on ℓ∞(X) ⊗ M_B.
    pub fn to_state(&self) -> State {
        let alg = Algebra::classical(self.len()).tensor(self.b_algebra());
        let dens = self.parts.iter().flat_map(|p| p.densities().iter().cloned()).collect();
        State::from_parts_unchecked(alg, dens)
    }

    /// Inverse of [`CqState::to_state`] for a state on ℓ∞(X) ⊗ M_B.
    pub fn from_state(s: &State) -> Result<Self> {
        let (x, b) = s.algebra().factors().ok_or(StateError::NotTensor)?;
        if !x.is_abelian() || x.blocks().iter().any(|&(n, _)| n != 1) {
            return Err(StateError::ShapeMismatch("first factor is not classical".into()));
        }
        let nb = b.num_blocks();
        let parts = (0..x.num_blocks())
            .map(|i| State::from_parts_unchecked(b.clone(), s.densities()[i * nb..(i + 1) * nb].to_vec()))
            .collect();
        CqState::indexed(parts)
    }

    /// The same state with X embedded as the diagonal of M_{|X|}.
    pub fn embed_quantum(&self) -> State {
        let n = self.len();
        let b = self.b_algebra().clone();
        let alg = Algebra::full(n).tensor(&b);
        let dens = (0..b.num_blocks())
            .map(|j| {
                let nj = b.block_dims()[j];
                let mut m = CMatrix::zeros(n * nj, n * nj);
                for (x, p) in self.parts.iter().enumerate() {
                    m.set_submatrix(x * nj, x * nj, &p.densities()[j]);
                }
                m
            })
            .collect();
        State::from_parts_unchecked(alg, dens)
    }

    /// Cq-state with parts `ω^x ⊗ η` for an extra system η on the B side.
    pub fn map_parts(&self, f: impl Fn(&State) -> State) -> Result<CqState> {
        CqState::new(self.alphabet.clone(), self.parts.iter().map(f).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CqJson {
    alphabet: Vec<String>,
    parts: std::collections::BTreeMap<String, State>,
}

impl Serialize for CqState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let parts = self.alphabet.iter().cloned().zip(self.parts.iter().cloned()).collect();
        CqJson { alphabet: self.alphabet.clone(), parts }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CqState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut j = CqJson::deserialize(d)?;
        let mut parts = Vec::with_capacity(j.alphabet.len());
        for x in &j.alphabet {
            parts.push(j.parts.remove(x).ok_or_else(|| serde::de::Error::custom(format!("missing part for {x}")))?);
        }
        if !j.parts.is_empty() {
            return Err(serde::de::Error::custom("parts contain labels outside the alphabet"));
        }
        CqState::new(j.alphabet, parts).map_err(serde::de::Error::custom)
    }
}

/// Vector representative of a state in the standard form of its algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct Purification {
    pub vector: Vec<C64>,
    pub relevant: Algebra,
    pub complementary: Algebra,
    block_dims: Vec<usize>,
    source: Algebra,
}

impl Purification {
    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for &n in &self.block_dims {
            out.push((off, n));
            off += n * n;
        }
        out
    }

    pub fn norm_sqr(&self) -> f64 {
        self.vector.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ⟨ξ| x |ξ⟩ for an ambient operator on the standard-form space.
    pub fn expect(&self, x: &CMatrix) -> C64 {
        linalg::vdot(&self.vector, &x.matvec(&self.vector))
    }

    /// Ambient operator ⊕ a_k ⊗ 1 for `a` in the purified algebra.
    pub fn ambient_relevant(&self, a: &AlgebraElement) -> Result<CMatrix> {
        Ok(self.relevant.embed(&AlgebraElement::new(&self.relevant, a.block_matrices.clone())?)?)
    }

    /// Ambient operator ⊕ 1 ⊗ y_k for `y` in the complementary algebra.
    pub fn ambient_complementary(&self, y: &AlgebraElement) -> Result<CMatrix> {
        Ok(self.relevant.embed_commutant(&AlgebraElement::new(&self.complementary, y.block_matrices.clone())?)?)
    }

    /// The vector state restricted to the purified algebra.
    pub fn relevant_state(&self) -> State {
        let dens = self
            .block_ranges()
            .into_iter()
            .map(|(off, n)| {
                let m = CMatrix::from_vec(n, n, self.vector[off..off + n * n].to_vec()).expect("block size");
                m.matmul(&m.adjoint())
            })
            .collect();
        State::from_parts_unchecked(self.source.clone(), dens)
    }

    /// The vector state restricted to the complementary algebra.
    pub fn complementary_state(&self) -> State {
        let dens = self
            .block_ranges()
            .into_iter()
            .map(|(off, n)| {
                let m = CMatrix::from_vec(n, n, self.vector[off..off + n * n].to_vec()).expect("block size");
                m.transpose().matmul(&m.conj())
            })
            .collect();
        State::from_parts_unchecked(self.complementary.flattened(), dens)
    }

    /// Applies the modular conjugation J.
    pub fn modular_conjugation(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (off, n) in self.block_ranges() {
            for i in 0..n {
                for j in 0..n {
                    out[off + j * n + i] = v[off + i * n + j].conj();
                }
            }
        }
        out
    }

    /// For a state on `M_A ⊗ M_B` with `M_A` a factor: the state of `A`
    /// together with the complementary system, on `M_A ⊗ C` where `C` has one
    /// block per block of the purified algebra.
    pub fn a_with_complement(&self) -> Result<State> {
        let (a, b) = self.source.factors().ok_or(StateError::NotTensor)?;
        if !a.is_factor() {
            return Err(StateError::ShapeMismatch("first factor must be a factor".into()));
        }
        let na = a.block_dims()[0];
        let db = b.block_dims();
        let c_alg = Algebra::new(&self.block_dims.iter().map(|&d| (d, d)).collect::<Vec<_>>())?.with_label("C");
        let dens = self
            .block_ranges()
            .into_iter()
            .zip(&db)
            .map(|((off, d), &nb)| {
                // ξ_j ∈ C^na ⊗ C^nb ⊗ C^d; trace out the middle leg.
                let v = &self.vector[off..off + d * d];
                let proj = CMatrix::projector(v);
                linalg::partial_trace_middle(&proj, (na, nb, d)).expect("block size")
            })
            .collect();
        Ok(State::from_parts_unchecked(Algebra::full(na).tensor(&c_alg), dens))
    }
}

/// Radon–Nikodym data: `D ξ_σ = ξ_ω` and `h = D†D`, both in the commutant.
#[derive(Clone, Debug)]
pub struct RadonNikodym {
    pub h: AlgebraElement,
    pub d: AlgebraElement,
}

impl RadonNikodym {
    /// log2 ‖h‖.
    pub fn log_norm(&self) -> f64 {
        self.h.block_matrices.iter().map(linalg::op_norm).fold(0.0f64, f64::max).log2()
    }
}

/// Non-commutative Radon–Nikodym derivative of ω with respect to σ in the
/// standard form of σ.
pub fn radon_nikodym(omega: &State, sigma: &State, purif_sigma: &Purification) -> Result<RadonNikodym> {
    if !omega.algebra().same_layout(sigma.algebra()) || purif_sigma.block_dims() != sigma.algebra().block_dims() {
        return Err(StateError::AlgebraMismatch);
    }
    let mut hs = Vec::new();
    let mut ds = Vec::new();
    for (k, (rho, sig)) in omega.densities().iter().zip(sigma.densities()).enumerate() {
        let p = support_projector(sig, DEFAULT_TOL)?;
        let q = &CMatrix::identity(p.rows()) - &p;
        let leak = linalg::op_norm(&q.matmul(rho).matmul(&q));
        let scale = linalg::op_norm(rho).max(linalg::op_norm(sig));
        if leak > 1e-10 * scale.max(1e-300) && leak > 1e-14 {
            return Err(StateError::DominationFailure { block: k, leak });
        }
        let m = psd_inv_sqrt(sig, DEFAULT_TOL)?.matmul(&psd_sqrt(rho, DEFAULT_TOL)?);
        let d = m.transpose();
        hs.push(d.adjoint().matmul(&d));
        ds.push(d);
    }
    let comp = &purif_sigma.complementary;
    Ok(RadonNikodym { h: AlgebraElement::new(comp, hs)?, d: AlgebraElement::new(comp, ds)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr};

    fn maxent() -> State {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        State::on_full_tensor(&[2, 2], CMatrix::projector(&[cr(s), cr(0.0), cr(0.0), cr(s)])).unwrap()
    }

    #[test]
    fn make_state_examples() {
        let mm = State::from_density(CMatrix::identity(2).scale(0.5)).unwrap();
        assert!(mm.is_normalized());
        let cl = State::classical(&[0.3, 0.7]).unwrap();
        assert!((cl.weight() - 1.0).abs() < 1e-15);
        let sub = State::from_density(CMatrix::diag_real(&[0.5, 0.0])).unwrap();
        assert!(!sub.is_normalized() && sub.is_subnormalized());
        assert!(matches!(State::from_density(CMatrix::diag_real(&[0.9, 0.2])), Err(StateError::Overweight(_))));
        assert!(matches!(State::from_density(CMatrix::diag_real(&[1.0, -0.1])), Err(StateError::NotPsd { .. })));
        assert!(matches!(
            State::new(&Algebra::full(2), vec![CMatrix::identity(3)], DEFAULT_TOL),
            Err(StateError::Algebra(_))
        ));
    }

    #[test]
    fn restrict_examples() {
        let ra = CMatrix::diag_real(&[0.2, 0.8]);
        let rb = CMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let prod = State::product(&State::from_density(ra.clone()).unwrap(), &State::from_density(rb).unwrap());
        assert!((&prod.restrict(Keep::A).unwrap().densities()[0] - &ra).max_abs() < 1e-15);
        let ma = maxent().restrict(Keep::A).unwrap();
        assert!((&ma.densities()[0] - &CMatrix::diag_real(&[0.5, 0.5])).max_abs() < 1e-15);
        let cq = CqState::indexed(vec![
            State::from_density(CMatrix::diag_real(&[0.25, 0.0])).unwrap(),
            State::from_density(CMatrix::diag_real(&[0.0, 0.75])).unwrap(),
        ])
        .unwrap();
        let b = cq.to_state().restrict(Keep::B).unwrap();
        assert!((&b.densities()[0] - &CMatrix::diag_real(&[0.25, 0.75])).max_abs() < 1e-15);
        assert!(matches!(State::classical(&[1.0]).unwrap().restrict(Keep::A), Err(StateError::NotTensor)));
    }

    #[test]
    fn purify_pure_state() {
        let p = State::pure(&[cr(1.0), cr(0.0)]).unwrap().purify().unwrap();
        assert_eq!(p.vector, vec![cr(1.0), cr(0.0), cr(0.0), cr(0.0)]);
        let comp = p.complementary_state();
        assert!((linalg::trace_norm(&comp.densities()[0]) - 1.0).abs() < 1e-15);
        assert!((linalg::max_eigenvalue(&comp.densities()[0], 1e-9).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purify_maximally_mixed_is_maxent() {
        let p = State::from_density(CMatrix::identity(2).scale(0.5)).unwrap().purify().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [cr(s), cr(0.0), cr(0.0), cr(s)];
        for (a, b) in p.vector.iter().zip(expect) {
            assert!((a - b).norm() < 1e-14);
        }
        let comp = p.complementary_state();
        assert!((&comp.densities()[0] - &CMatrix::identity(2).scale(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn purify_fair_coin() {
        let p = State::classical(&[0.5, 0.5]).unwrap().purify().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.vector[0] - cr(s)).norm() < 1e-15 && (p.vector[1] - cr(s)).norm() < 1e-15);
        assert!((p.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn purification_round_trip_and_j() {
        let rho = CMatrix::from_rows(&[vec![cr(0.5), c(0.1, 0.2)], vec![c(0.1, -0.2), cr(0.3)]]).unwrap();
        let alg = Algebra::new(&[(2, 3), (1, 2)]).unwrap();
        let st = State::new(&alg, vec![rho, CMatrix::diag_real(&[0.2])], DEFAULT_TOL).unwrap();
        let p = st.purify().unwrap();
        let back = p.relevant_state();
        for (a, b) in back.densities().iter().zip(st.densities()) {
            assert!((a - b).max_abs() < 1e-12);
        }
        assert!((p.norm_sqr() - st.weight()).abs() < 1e-12);
        let jxi = p.modular_conjugation(&p.vector);
        assert!(jxi.iter().zip(&p.vector).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn radon_nikodym_examples() {
        let sigma = State::classical(&[0.5, 0.5]).unwrap();
        let omega = State::classical(&[0.75, 0.25]).unwrap();
        let ps = sigma.purify().unwrap();
        let rn = radon_nikodym(&omega, &sigma, &ps).unwrap();
        assert!((rn.log_norm() - 1.5f64.log2()).abs() < 1e-12);
        let rn = radon_nikodym(&sigma.scale(0.5), &sigma, &ps).unwrap();
        for h in &rn.h.block_matrices {
            assert!((h[(0, 0)] - cr(0.5)).norm() < 1e-12);
        }
        let pure = State::pure(&[cr(1.0), cr(0.0)]).unwrap();
        let other = State::pure(&[cr(0.0), cr(1.0)]).unwrap();
        let pp = pure.purify().unwrap();
        assert!(matches!(radon_nikodym(&other, &pure, &pp), Err(StateError::DominationFailure { .. })));
    }

    #[test]
    fn cq_json_round_trip() {
        let cq = CqState::classical(&[0.3, 0.7]).unwrap();
        let s = serde_json::to_string(&cq).unwrap();
        let back: CqState = serde_json::from_str(&s).unwrap();
        assert_eq!(back.distribution(), cq.distribution());
        let st = maxent();
        let back: State = serde_json::from_str(&serde_json::to_string(&st).unwrap()).unwrap();
        assert!((&back.densities()[0] - &st.densities()[0]).max_abs() < 1e-15);
    }

    #[test]
    fn assoc_and_swap() {
        let a = State::from_density(CMatrix::diag_real(&[0.2, 0.8])).unwrap();
        let b = State::classical(&[0.4, 0.6]).unwrap();
        let cc = State::from_density(CMatrix::diag_real(&[0.1, 0.3, 0.6])).unwrap();
        let left = State::product(&State::product(&a, &b), &cc);
        let right = left.assoc_right().unwrap();
        let direct = State::product(&a, &State::product(&b, &cc));
        for (x, y) in right.densities().iter().zip(direct.densities()) {
            assert!((x - y).max_abs() < 1e-15);
        }
        assert_eq!(right.assoc_left().unwrap(), left);
        let sw = State::product(&a, &cc).swap().unwrap();
        let expect = State::product(&cc, &a);
        assert!((&sw.densities()[0] - &expect.densities()[0]).max_abs() < 1e-15);
    }
}
