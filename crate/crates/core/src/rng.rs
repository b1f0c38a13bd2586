//! Seeded random generators for states, POVMs and test data.
//!
//! The stream is ChaCha20 keyed by the 64-bit seed written little-endian into
//! the first 8 key bytes (remaining bytes zero), nonce zero. Conversions:
//!
//! * uniform: `(next_u64 >> 11) · 2⁻⁵³`, in `[0, 1)`;
//! * normal: Box–Muller cosine branch on two uniforms `u1, u2`,
//!   `√(−2 ln(1 − u1)) · cos(2π u2)`;
//! * complex normal: real and imaginary parts are independent normals
//!   (drawn in that order) scaled by `1/√2`.

use crate::algebra::Algebra;
use crate::linalg::{c, CMatrix, C64};
use crate::protocols::Povm;
use crate::states::{CqState, State};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub struct Rng {
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Rng { inner: ChaCha20Rng::from_seed(key) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = self.normal();
        let im = self.normal();
        c(re * s, im * s)
    }

    /// Flat Dirichlet sample of length `n`.
    pub fn dirichlet(&mut self, n: usize) -> Vec<f64> {
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - self.uniform()).ln()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    pub fn ginibre_matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| self.complex_normal())
    }

    /// G G† / tr(G G†) with square Gaussian G.
    pub fn ginibre_density(&mut self, n: usize) -> CMatrix {
        let g = self.ginibre_matrix(n, n);
        let r = g.matmul(&g.adjoint());
        let t = r.trace().re;
        r.scale(1.0 / t).hermitian_part()
    }

    /// Normalised Gaussian vector.
    pub fn haar_vector(&mut self, n: usize) -> Vec<C64> {
        let v: Vec<C64> = (0..n).map(|_| self.complex_normal()).collect();
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / nrm).collect()
    }

    pub fn hermitian(&mut self, n: usize) -> CMatrix {
        self.ginibre_matrix(n, n).hermitian_part()
    }

    /// Haar unitary from Gram–Schmidt on Gaussian columns.
    pub fn unitary(&mut self, n: usize) -> CMatrix {
        let g = self.ginibre_matrix(n, n);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut v = g.col_vec(j);
            for u in &cols {
                let p: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= p * y;
                }
            }
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            cols.push(v.into_iter().map(|z| z / nrm).collect());
        }
        CMatrix::from_fn(n, n, |i, j| cols[j][i])
    }

    /// Ginibre state on an arbitrary algebra: block weights from a Ginibre
    /// density on the direct sum, i.e. the diagonal blocks of one draw.
    pub fn ginibre_state(&mut self, alg: &Algebra) -> State {
        let dims = alg.block_dims();
        let total: usize = dims.iter().sum();
        let rho = self.ginibre_density(total);
        let mut off = 0;
        let mut dens = Vec::with_capacity(dims.len());
        for &n in &dims {
            dens.push(rho.submatrix(off, off, n, n));
            off += n;
        }
        State::new(alg, dens, 1e-9).expect("Ginibre blocks are a state")
    }

    /// Ginibre state on the tensor product of full matrix algebras.
    pub fn ginibre_full(&mut self, dims: &[usize]) -> State {
        let n: usize = dims.iter().product();
        State::on_full_tensor(dims, self.ginibre_density(n)).expect("Ginibre density is a state")
    }

    /// Random pure state on the tensor product of full matrix algebras.
    pub fn haar_pure(&mut self, dims: &[usize]) -> State {
        let n: usize = dims.iter().product();
        let v = self.haar_vector(n);
        State::on_full_tensor(dims, CMatrix::projector(&v)).expect("pure state")
    }

    /// Subnormalised state: a Ginibre state scaled by a uniform weight in `[lo, 1]`.
    pub fn subnormalized(&mut self, alg: &Algebra, lo: f64) -> State {
        let w = lo + (1.0 - lo) * self.uniform();
        self.ginibre_state(alg).scale(w)
    }

    /// cq-state with Dirichlet weights and Ginibre parts on `b`.
    pub fn cq_random(&mut self, nx: usize, b: &Algebra) -> CqState {
        let p = self.dirichlet(nx);
        let parts = p.iter().map(|&w| self.ginibre_state(b).scale(w)).collect();
        CqState::indexed(parts).expect("random cq-state")
    }

    /// Random two-outcome qubit POVM `{E, 1−E}` with a Ginibre-distributed
    /// element rescaled into `[0, 1]`.
    pub fn binary_povm(&mut self, n: usize) -> Povm {
        let h = self.hermitian(n);
        let (vals, vecs) = crate::linalg::herm_eig(&h, 1e-9).expect("Hermitian");
        let (hi, lo) = (vals[0], vals[n - 1]);
        let span = (hi - lo).max(1e-12);
        let squeezed: Vec<f64> = vals.iter().map(|v| (v - lo) / span).collect();
        let e = crate::linalg::from_eig(&squeezed, &vecs).hermitian_part();
        let f = (&CMatrix::identity(n) - &e).hermitian_part();
        Povm::from_matrices(vec![e, f]).expect("binary POVM")
    }
}
