//! Max-relative entropy, conditional min/max entropies, guessing probability
//! and their ε-smoothed versions. All values are in bits.
//!
//! Conditional entropies take a state on `A ⊗ B`. `τ_A` is the unnormalised
//! trace `Tr` on `A` (summed over the blocks when `A` is not a factor), so
//! `Hmin(A|B) = −log inf{σ_B(1) : τ_A ⊗ σ_B ≥ ω_AB}`.

use crate::algebra::Algebra;
use crate::linalg::{
    herm_eig, max_eigenvalue, op_norm, psd_inv_sqrt, support_projector, CMatrix, DEFAULT_TOL, SUPPORT_CUTOFF,
};
use crate::sdp::{self, AffineExpr, SdpOptions, SdpProblem, SdpStatus, Sense};
use crate::states::{CqState, State, StateError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Sdp(#[from] sdp::SdpError),
    #[error("solver returned {status:?} for {context}")]
    Solver { status: SdpStatus, context: String },
    #[error("{what}: {first} and {second} disagree")]
    CrossCheck { what: String, first: f64, second: f64 },
    #[error("smoothing parameter {0} outside [0, 1)")]
    InvalidEpsilon(f64),
}

type Result<T> = std::result::Result<T, EntropyError>;

/// An entropy value with the optimisers that certify it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub value: f64,
    pub epsilon: f64,
    /// Absolute primal-dual gap of the underlying program.
    pub gap: f64,
    /// Optimal σ_B, one (unnormalised) density per block of B.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_b: Option<Vec<CMatrix>>,
    /// Dual optimum: one PSD matrix `Y_ij` per block of A ⊗ B with
    /// `Σ_i tr_A Y_ij = 1`; its `n × n` block entries are the `M_kl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<Vec<CMatrix>>,
    /// Optimal smoothed state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothed: Option<State>,
    /// Optimal guessing measurement, `povm[x][j]` for block `j` of B.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<Vec<Vec<CMatrix>>>,
    /// Value obtained along an independent route, when one was computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<f64>,
}

impl EntropyResult {
    fn bare(value: f64, epsilon: f64) -> Self {
        EntropyResult {
            value,
            epsilon,
            gap: 0.0,
            sigma_b: None,
            dual: None,
            smoothed: None,
            povm: None,
            cross_check: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyOptions {
    pub sdp: SdpOptions,
    /// Smooth over normalised states only instead of the subnormalised ball.
    pub normalized_smoothing: bool,
    /// Evaluate the independent second route where one exists.
    pub cross_check: bool,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions { sdp: SdpOptions::default(), normalized_smoothing: false, cross_check: true }
    }
}

/// Agreement required between the duality and fidelity routes of Hmax.
pub const HMAX_CROSS_TOL: f64 = 1e-6;
/// Agreement required between `−log pguess` and Hmin of the cq-state.
pub const PGUESS_CROSS_TOL: f64 = 1e-7;

/// Dmax(ω‖σ) = log λmax(σ^{-1/2} ω σ^{-1/2}), `+∞` when the support of ω is
/// not contained in that of σ.
pub fn dmax(omega: &State, sigma: &State) -> Result<f64> {
    if !omega.algebra().same_layout(sigma.algebra()) {
        return Err(StateError::AlgebraMismatch.into());
    }
    let mut best = f64::NEG_INFINITY;
    for (rho, sig) in omega.densities().iter().zip(sigma.densities()) {
        if rho.max_abs() == 0.0 {
            continue;
        }
        let p = support_projector(sig, DEFAULT_TOL).map_err(StateError::from)?;
        let q = &CMatrix::identity(p.rows()) - &p;
        let leak = op_norm(&q.matmul(rho).matmul(&q));
        let scale = op_norm(rho).max(op_norm(sig));
        if leak > 1e-10 * scale && leak > 1e-14 {
            return Ok(f64::INFINITY);
        }
        let s = psd_inv_sqrt(sig, DEFAULT_TOL).map_err(StateError::from)?;
        let m = s.matmul(rho).matmul(&s).hermitian_part();
        best = best.max(max_eigenvalue(&m, DEFAULT_TOL).map_err(StateError::from)?.log2());
    }
    Ok(best)
}

/// Block data of a state on `A ⊗ B`: collapsed dims and densities indexed `i·|B| + j`.
struct Bipartite<'a> {
    da: Vec<usize>,
    db: Vec<usize>,
    dens: &'a [CMatrix],
    b: Algebra,
}

fn bipartite(omega: &State) -> Result<Bipartite<'_>> {
    let (a, b) = omega.algebra().factors().ok_or(StateError::NotTensor)?;
    Ok(Bipartite { da: a.block_dims(), db: b.block_dims(), dens: omega.densities(), b: b.clone() })
}

/// Columns `|α⟩ ⊗ 1_b` so that `1_a ⊗ σ = Σ_α K_α σ K_α†`.
fn leg_embeddings(a: usize, b: usize) -> Vec<CMatrix> {
    (0..a)
        .map(|al| {
            CMatrix::from_fn(
                a * b,
                b,
                |r, c| if r == al * b + c { crate::linalg::cr(1.0) } else { crate::linalg::cr(0.0) },
            )
        })
        .collect()
}

fn with_tau_sigma(mut e: AffineExpr, sigma: usize, a: usize, b: usize) -> AffineExpr {
    for k in leg_embeddings(a, b) {
        e = e.congruence(sigma, k, 1.0);
    }
    e
}

fn require_optimal(s: &sdp::SdpSolution, context: &str) -> Result<()> {
    if s.status == SdpStatus::Optimal {
        Ok(())
    } else {
        Err(EntropyError::Solver { status: s.status, context: context.into() })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(EntropyError::InvalidEpsilon(eps))
    }
}

/// Re-expresses a state on `A ⊗ B` with `A = ⊕ M_{a_i}` as a state on
/// `M_N ⊗ B`, `N = Σ a_i`, block-diagonal in the first leg.
pub fn embed_first_factor(omega: &State) -> Result<State> {
    let bp = bipartite(omega)?;
    if bp.da.len() == 1 {
        return Ok(omega.clone());
    }
    let n: usize = bp.da.iter().sum();
    let nb = bp.db.len();
    let mut dens = Vec::with_capacity(nb);
    for (j, &b) in bp.db.iter().enumerate() {
        let mut m = CMatrix::zeros(n * b, n * b);
        let mut off = 0;
        for (i, &a) in bp.da.iter().enumerate() {
            let r = &bp.dens[i * nb + j];
            for x in 0..a * b {
                for y in 0..a * b {
                    let (xa, xb) = (x / b, x % b);
                    let (ya, yb) = (y / b, y % b);
                    m[((off + xa) * b + xb, (off + ya) * b + yb)] = r[(x, y)];
                }
            }
            off += a;
        }
        dens.push(m);
    }
    let alg = Algebra::full(n).tensor(&bp.b);
    Ok(State::new(&alg, dens, 1e-9)?)
}

impl EntropyOptions {
    pub fn hmin(&self, omega: &State) -> Result<EntropyResult> {
        let bp = bipartite(omega)?;
        if omega.weight() == 0.0 {
            return Ok(EntropyResult::bare(f64::INFINITY, 0.0));
        }
        let nb = bp.db.len();
        let mut p = SdpProblem::new(Sense::Min);
        let sig: Vec<usize> = bp.db.iter().enumerate().map(|(j, &b)| p.hermitian(&format!("sigma{j}"), b)).collect();
        for &s in &sig {
            p.objective_trace(s, 1.0);
        }
        for (i, &a) in bp.da.iter().enumerate() {
            for (j, &b) in bp.db.iter().enumerate() {
                let e = AffineExpr::new(a * b).constant(&bp.dens[i * nb + j].scale(-1.0));
                p.psd(with_tau_sigma(e, sig[j], a, b));
            }
        }
        let sol = sdp::solve_with(&p, &self.sdp)?;
        require_optimal(&sol, "hmin")?;
        let mut r = EntropyResult::bare(-sol.primal_value.log2(), 0.0);
        r.gap = sol.gap;
        r.sigma_b = Some(sig.iter().map(|&s| sol.variable_values[s].clone()).collect());
        r.dual = Some(sol.multipliers.iter().map(|y| y.hermitian_part()).collect());
        Ok(r)
    }

    pub fn pguess(&self, omega: &CqState) -> Result<EntropyResult> {
        let b = omega.b_algebra().clone();
        let db = b.block_dims();
        let nx = omega.len();
        let mut p = SdpProblem::new(Sense::Max);
        let mut vars = Vec::with_capacity(nx);
        for (x, part) in omega.parts().iter().enumerate() {
            let mut row = Vec::with_capacity(db.len());
            for (j, &n) in db.iter().enumerate() {
                let v = p.hermitian(&format!("E{x}_{j}"), n);
                p.objective_term(v, part.densities()[j].clone());
                p.psd(AffineExpr::new(n).place(v, n, 0, 1.0));
                row.push(v);
            }
            vars.push(row);
        }
        for (j, &n) in db.iter().enumerate() {
            let mut e = AffineExpr::new(n).constant(&CMatrix::identity(n).scale(-1.0));
            for row in &vars {
                e = e.place(row[j], n, 0, 1.0);
            }
            p.zero(e);
        }
        let sol = sdp::solve_with(&p, &self.sdp)?;
        require_optimal(&sol, "pguess")?;
        let mut r = EntropyResult::bare(sol.primal_value, 0.0);
        r.gap = sol.gap;
        r.povm = Some(vars.iter().map(|row| row.iter().map(|&v| sol.variable_values[v].clone()).collect()).collect());
        if self.cross_check {
            let h = self.hmin(&omega.to_state())?;
            let a = -sol.primal_value.log2();
            if (a - h.value).abs() > PGUESS_CROSS_TOL {
                return Err(EntropyError::CrossCheck { what: "-log pguess vs hmin".into(), first: a, second: h.value });
            }
            r.cross_check = Some(h.value);
        }
        Ok(r)
    }

    /// `log sup_σ F(ω, τ_A ⊗ σ)` over normalised σ on B, as one SDP.
    pub fn hmax_fidelity_form(&self, omega: &State) -> Result<f64> {
        let bp = bipartite(omega)?;
        let nb = bp.db.len();
        let mut p = SdpProblem::new(Sense::Max);
        let sig: Vec<usize> = bp.db.iter().enumerate().map(|(j, &b)| p.hermitian(&format!("sigma{j}"), b)).collect();
        let mut norm = AffineExpr::new(1).constant(&CMatrix::identity(1).scale(-1.0));
        for (&s, &b) in sig.iter().zip(&bp.db) {
            norm = norm.functional(s, CMatrix::identity(b), CMatrix::identity(1));
        }
        p.zero(norm);
        for (i, &a) in bp.da.iter().enumerate() {
            for (j, &b) in bp.db.iter().enumerate() {
                let rho = &bp.dens[i * nb + j];
                let (vals, vecs) = herm_eig(rho, DEFAULT_TOL).map_err(StateError::from)?;
                let cutoff = SUPPORT_CUTOFF * vals[0].max(0.0);
                let r = vals.iter().filter(|&&v| v > cutoff && v > 0.0).count();
                if r == 0 {
                    continue;
                }
                let d = a * b;
                let ur = CMatrix::from_fn(d, r, |x, y| vecs[(x, y)]);
                // [[Λ, Z'], [Z'†, 1⊗σ]] ⪰ 0 with Z = U_r Z'.
                let z = p.complex(&format!("Z{i}_{j}"), r, d);
                p.objective_term(z, ur.adjoint());
                let mut cst = CMatrix::zeros(r + d, r + d);
                cst.set_submatrix(0, 0, &CMatrix::diag_real(&vals[..r]));
                let left = CMatrix::from_fn(r + d, r, |x, y| crate::linalg::cr(if x == y { 1.0 } else { 0.0 }));
                let right = CMatrix::from_fn(d, r + d, |x, y| crate::linalg::cr(if y == r + x { 1.0 } else { 0.0 }));
                let mut e = AffineExpr::new(r + d).constant(&cst).sandwich(z, left, right);
                for k in leg_embeddings(a, b) {
                    let mut kk = CMatrix::zeros(r + d, b);
                    kk.set_submatrix(r, 0, &k);
                    e = e.congruence(sig[j], kk, 1.0);
                }
                p.psd(e);
            }
        }
        for (&s, &b) in sig.iter().zip(&bp.db) {
            p.psd(AffineExpr::new(b).place(s, b, 0, 1.0));
        }
        let sol = sdp::solve_with(&p, &self.sdp)?;
        require_optimal(&sol, "hmax fidelity form")?;
        Ok(2.0 * sol.primal_value.log2())
    }

    /// Hmax(A|B) = −Hmin(A|C) with C the complement of A ⊗ B in the standard
    /// form; A is first embedded into a full matrix algebra.
    pub fn hmax(&self, omega: &State) -> Result<EntropyResult> {
        if omega.weight() == 0.0 {
            return Ok(EntropyResult::bare(f64::NEG_INFINITY, 0.0));
        }
        let mut r = if bipartite(omega)?.da.len() > 1 {
            self.hmin_complement_by_sector(omega)?
        } else {
            self.hmin(&omega.purify()?.a_with_complement()?)?
        };
        r.value = -r.value;
        if self.cross_check {
            let direct = self.hmax_fidelity_form(omega)?;
            if (direct - r.value).abs() > HMAX_CROSS_TOL {
                return Err(EntropyError::CrossCheck {
                    what: "hmax duality vs fidelity form".into(),
                    first: r.value,
                    second: direct,
                });
            }
            r.cross_check = Some(direct);
        }
        Ok(r)
    }

    /// Hmin(A|C) for the standard-form complement of `ω` embedded into
    /// `M_N ⊗ B`, `N = Σ a_i`. The complement state is invariant under phases
    /// `⊕ e^{iθ_i} 1_{a_i}` on both copies of A, so σ_C may be taken
    /// block-diagonal over the sectors i, and the constraint `1 ⊗ σ_C ≥ ω_AC`
    /// compresses to the sectors where A and its copy agree.
    fn hmin_complement_by_sector(&self, omega: &State) -> Result<EntropyResult> {
        let bp = bipartite(omega)?;
        let nb = bp.db.len();
        let mut p = SdpProblem::new(Sense::Min);
        let mut sig = Vec::with_capacity(nb);
        for (j, &b) in bp.db.iter().enumerate() {
            let row: Vec<usize> =
                bp.da.iter().enumerate().map(|(i, &a)| p.hermitian(&format!("sigma{i}_{j}"), a * b)).collect();
            for &v in &row {
                p.objective_trace(v, 1.0);
            }
            // Rows (i, α, γ) of the compressed complement, columns β of B.
            let dim: usize = bp.da.iter().map(|&a| a * a * b).sum();
            let mut m = CMatrix::zeros(dim, b);
            let mut off = 0;
            for (i, &a) in bp.da.iter().enumerate() {
                let r = crate::linalg::psd_sqrt(&bp.dens[i * nb + j], DEFAULT_TOL).map_err(StateError::from)?;
                let ab = a * b;
                for al in 0..a {
                    for be in 0..b {
                        for ga in 0..ab {
                            m[(off + al * ab + ga, be)] = r[(al * b + be, ga)];
                        }
                    }
                }
                off += a * ab;
            }
            let mut e = AffineExpr::new(dim).constant(&m.matmul(&m.adjoint()).hermitian_part().scale(-1.0));
            let mut off = 0;
            for (i, &a) in bp.da.iter().enumerate() {
                let ab = a * b;
                for al in 0..a {
                    e = e.place(row[i], ab, off + al * ab, 1.0);
                }
                off += a * ab;
            }
            p.psd(e);
            sig.push(row);
        }
        let sol = sdp::solve_with(&p, &self.sdp)?;
        require_optimal(&sol, "hmax complement")?;
        let mut r = EntropyResult::bare(-sol.primal_value.log2(), 0.0);
        r.gap = sol.gap;
        r.sigma_b = Some(
            sig.iter()
                .map(|row| {
                    crate::linalg::direct_sum(&row.iter().map(|&v| sol.variable_values[v].clone()).collect::<Vec<_>>())
                })
                .collect(),
        );
        Ok(r)
    }

    pub fn hmin_smooth(&self, omega: &State, eps: f64) -> Result<EntropyResult> {
        check_eps(eps)?;
        if eps == 0.0 {
            return self.hmin(omega);
        }
        let bp = bipartite(omega)?;
        let nb = bp.db.len();
        let w = omega.weight();
        let mut p = SdpProblem::new(Sense::Min);
        let sig: Vec<usize> = bp.db.iter().enumerate().map(|(j, &b)| p.hermitian(&format!("sigma{j}"), b)).collect();
        for &s in &sig {
            p.objective_trace(s, 1.0);
        }
        let mut fid = AffineExpr::new(1).constant(&CMatrix::identity(1).scale(-(1.0 - eps * eps).sqrt()));
        let mut wbar: Vec<(usize, usize)> = Vec::new();
        for (i, &a) in bp.da.iter().enumerate() {
            for (j, &b) in bp.db.iter().enumerate() {
                let d = a * b;
                let om = p.hermitian(&format!("omega{i}_{j}"), d);
                wbar.push((om, d));
                p.psd(with_tau_sigma(AffineExpr::new(d).place(om, d, 0, -1.0), sig[j], a, b));
                let rho = &bp.dens[i * nb + j];
                let (vals, vecs) = herm_eig(rho, DEFAULT_TOL).map_err(StateError::from)?;
                let cutoff = SUPPORT_CUTOFF * vals[0].max(0.0);
                let r = vals.iter().filter(|&&v| v > cutoff && v > 0.0).count();
                if r == 0 {
                    p.psd(AffineExpr::new(d).place(om, d, 0, 1.0));
                    continue;
                }
                let ur = CMatrix::from_fn(d, r, |x, y| vecs[(x, y)]);
                let z = p.complex(&format!("Z{i}_{j}"), r, d);
                let mut cst = CMatrix::zeros(r + d, r + d);
                cst.set_submatrix(0, 0, &CMatrix::diag_real(&vals[..r]));
                let left = CMatrix::from_fn(r + d, r, |x, y| crate::linalg::cr(if x == y { 1.0 } else { 0.0 }));
                let right = CMatrix::from_fn(d, r + d, |x, y| crate::linalg::cr(if y == r + x { 1.0 } else { 0.0 }));
                p.psd(AffineExpr::new(r + d).constant(&cst).sandwich(z, left, right).place(om, d, r, 1.0));
                fid = fid.functional(z, ur.adjoint(), CMatrix::identity(1));
            }
        }
        let defect = 1.0 - w;
        if self.normalized_smoothing {
            let mut e = AffineExpr::new(1).constant(&CMatrix::identity(1).scale(-1.0));
            for &(om, d) in &wbar {
                e = e.functional(om, CMatrix::identity(d), CMatrix::identity(1));
            }
            p.zero(e);
        } else if defect <= 1e-12 {
            let mut e = AffineExpr::new(1).constant(&CMatrix::identity(1));
            for &(om, d) in &wbar {
                e = e.functional(om, CMatrix::identity(d).scale(-1.0), CMatrix::identity(1));
            }
            p.psd(e);
        } else {
            // [[1 − ω(1), z], [z, 1 − ω̄(1)]] ⪰ 0 carries the hat component.
            let z = p.scalar("z");
            let mut e = AffineExpr::new(2).constant(&CMatrix::diag_real(&[defect, 1.0])).functional(
                z,
                CMatrix::identity(1),
                CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
            );
            for &(om, d) in &wbar {
                e = e.functional(om, CMatrix::identity(d).scale(-1.0), CMatrix::diag_real(&[0.0, 1.0]));
            }
            p.psd(e);
            fid = fid.functional(z, CMatrix::identity(1), CMatrix::identity(1));
        }
        p.psd(fid);
        let sol = sdp::solve_with(&p, &self.sdp)?;
        require_optimal(&sol, "hmin_smooth")?;
        let mut r = EntropyResult::bare(-sol.primal_value.log2(), eps);
        r.gap = sol.gap;
        r.sigma_b = Some(sig.iter().map(|&s| sol.variable_values[s].clone()).collect());
        let dens: Vec<CMatrix> = wbar.iter().map(|&(om, _)| sol.variable_values[om].hermitian_part()).collect();
        r.smoothed = Some(State::new(omega.algebra(), dens, 1e-6)?);
        Ok(r)
    }

    pub fn hmax_smooth(&self, omega: &State, eps: f64) -> Result<EntropyResult> {
        check_eps(eps)?;
        if eps == 0.0 {
            return self.hmax(omega);
        }
        let emb = embed_first_factor(omega)?;
        let oac = emb.purify()?.a_with_complement()?;
        let mut r = self.hmin_smooth(&oac, eps)?;
        r.value = -r.value;
        Ok(r)
    }
}

pub fn hmin(omega: &State) -> Result<EntropyResult> {
    EntropyOptions::default().hmin(omega)
}

pub fn hmax(omega: &State) -> Result<EntropyResult> {
    EntropyOptions::default().hmax(omega)
}

pub fn pguess(omega: &CqState) -> Result<EntropyResult> {
    EntropyOptions::default().pguess(omega)
}

pub fn hmin_smooth(omega: &State, eps: f64) -> Result<EntropyResult> {
    EntropyOptions::default().hmin_smooth(omega, eps)
}

pub fn hmax_smooth(omega: &State, eps: f64) -> Result<EntropyResult> {
    EntropyOptions::default().hmax_smooth(omega, eps)
}

/// ⟨Φ|(id ⊗ E)(ω)|Φ⟩ with unnormalised `Φ = Σ_k |kk⟩` and E the channel
/// B → A′ whose adjoint sends `|k⟩⟨l|` to the block `M_kl` of the dual
/// certificate. Equals `2^{−Hmin(A|B)}` for an optimal certificate.
pub fn channel_fidelity(omega: &State, dual: &[CMatrix]) -> Result<f64> {
    let emb = embed_first_factor(omega)?;
    let bp = bipartite(omega)?;
    let n: usize = bp.da.iter().sum();
    let nb = bp.db.len();
    if dual.len() != bp.da.len() * nb {
        return Err(StateError::ShapeMismatch("certificate block count".into()).into());
    }
    let mut out = CMatrix::zeros(n * n, n * n);
    for (j, &b) in bp.db.iter().enumerate() {
        // Assemble Y_j on C^n ⊗ C^b from the per-block certificate.
        let mut y = CMatrix::zeros(n * b, n * b);
        let mut off = 0;
        for (i, &a) in bp.da.iter().enumerate() {
            let yi = &dual[i * nb + j];
            for x in 0..a * b {
                for z in 0..a * b {
                    y[((off + x / b) * b + x % b, (off + z / b) * b + z % b)] = yi[(x, z)];
                }
            }
            off += a;
        }
        let m = |k: usize, l: usize| y.submatrix(k * b, l * b, b, b);
        let rho = &emb.densities()[j];
        // (id ⊗ E)(ρ)[(a,l),(a',k)] = tr(R_{aa'} M_kl).
        for aa in 0..n {
            for ab in 0..n {
                let r = rho.submatrix(aa * b, ab * b, b, b);
                for k in 0..n {
                    for l in 0..n {
                        let v = r.matmul(&m(k, l)).trace();
                        out[(aa * n + l, ab * n + k)] += v;
                    }
                }
            }
        }
    }
    let phi: Vec<_> = (0..n * n).map(|x| crate::linalg::cr(if x / n == x % n { 1.0 } else { 0.0 })).collect();
    Ok(crate::linalg::vdot(&phi, &out.matvec(&phi)).re)
}

/// Checks that a dual certificate defines a channel: `Y_ij ⪰ 0` and
/// `Σ_i tr_A Y_ij = 1_{b_j}`. Returns the largest violation.
pub fn certificate_defect(omega: &State, dual: &[CMatrix]) -> Result<f64> {
    let bp = bipartite(omega)?;
    let nb = bp.db.len();
    let mut worst: f64 = 0.0;
    for (j, &b) in bp.db.iter().enumerate() {
        let mut s = CMatrix::zeros(b, b);
        for (i, &a) in bp.da.iter().enumerate() {
            let y = &dual[i * nb + j];
            let me = crate::linalg::min_eigenvalue(&y.hermitian_part(), DEFAULT_TOL).map_err(StateError::from)?;
            worst = worst.max(-me);
            s += &crate::linalg::partial_trace(y, crate::linalg::Keep::B, (a, b)).map_err(StateError::from)?;
        }
        worst = worst.max((&s - &CMatrix::identity(b)).max_abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cr;
    use crate::metrics::purified_distance;
    use crate::rng::Rng;

    fn maxent() -> State {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        State::on_full_tensor(&[2, 2], CMatrix::projector(&[cr(s), cr(0.0), cr(0.0), cr(s)])).unwrap()
    }

    fn on_a(rho: CMatrix) -> State {
        State::product(&State::from_density(rho).unwrap(), &State::classical(&[1.0]).unwrap())
    }

    #[test]
    fn dmax_examples() {
        let r = State::from_density(CMatrix::diag_real(&[0.3, 0.7])).unwrap();
        assert!(dmax(&r, &r).unwrap().abs() < 1e-12);
        let mm = State::from_density(CMatrix::identity(2).scale(0.5)).unwrap();
        // The unnormalised trace has weight 2, admitted with a loose weight tolerance.
        let tau = State::new(&Algebra::full(2), vec![CMatrix::identity(2)], 2.0).unwrap();
        assert!((dmax(&mm, &tau).unwrap() + 1.0).abs() < 1e-12);
        let sig = State::from_density(CMatrix::diag_real(&[0.5, 0.5])).unwrap();
        let a = State::from_density(CMatrix::diag_real(&[0.75, 0.25])).unwrap();
        assert!((dmax(&a, &sig).unwrap() - 1.5f64.log2()).abs() < 1e-12);
        assert!((dmax(&a, &sig).unwrap() - 0.58496).abs() < 1e-5);
        let half = mm.scale(0.5);
        assert!((dmax(&half, &mm).unwrap() + 1.0).abs() < 1e-12);
        let p0 = State::from_density(CMatrix::diag_real(&[1.0, 0.0])).unwrap();
        let p1 = State::from_density(CMatrix::diag_real(&[0.0, 1.0])).unwrap();
        assert_eq!(dmax(&p0, &p1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn hmin_examples() {
        let prod = State::product(
            &State::from_density(CMatrix::identity(2).scale(0.5)).unwrap(),
            &State::from_density(CMatrix::diag_real(&[0.3, 0.7])).unwrap(),
        );
        assert!((hmin(&prod).unwrap().value - 1.0).abs() < 1e-7);
        let r = hmin(&maxent()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-7);
        let f = channel_fidelity(&maxent(), r.dual.as_ref().unwrap()).unwrap();
        assert!((f - 2.0).abs() < 1e-6);
        let pure = State::product(
            &State::from_density(CMatrix::diag_real(&[1.0, 0.0])).unwrap(),
            &State::from_density(CMatrix::diag_real(&[0.4, 0.6])).unwrap(),
        );
        assert!(hmin(&pure).unwrap().value.abs() < 1e-7);
    }

    #[test]
    fn hmin_certificates_agree() {
        let mut rng = Rng::new(5);
        for _ in 0..5 {
            let s = rng.ginibre_full(&[2, 2]);
            let r = hmin(&s).unwrap();
            let dual = r.dual.as_ref().unwrap();
            assert!(certificate_defect(&s, dual).unwrap() < 1e-7);
            let dv: f64 = s.densities().iter().zip(dual).map(|(a, y)| a.inner_re(y)).sum();
            assert!((-dv.log2() - r.value).abs() < 1e-6);
            let f = channel_fidelity(&s, dual).unwrap();
            assert!((-f.log2() - r.value).abs() < 1e-6);
        }
    }

    #[test]
    fn pguess_examples() {
        let unif = CqState::classical(&[0.25; 4]).unwrap();
        assert!((pguess(&unif).unwrap().value - 0.25).abs() < 1e-7);
        let copy = CqState::indexed(vec![
            State::from_density(CMatrix::diag_real(&[0.5, 0.0])).unwrap(),
            State::from_density(CMatrix::diag_real(&[0.0, 0.5])).unwrap(),
        ])
        .unwrap();
        assert!((pguess(&copy).unwrap().value - 1.0).abs() < 1e-7);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let helstrom = CqState::indexed(vec![
            State::from_density(CMatrix::diag_real(&[0.5, 0.0])).unwrap(),
            State::from_density(CMatrix::projector(&[cr(h), cr(h)]).scale(0.5)).unwrap(),
        ])
        .unwrap();
        let r = pguess(&helstrom).unwrap();
        assert!((r.value - 0.5 * (1.0 + h)).abs() < 1e-7);
        assert!((r.value - 0.85355).abs() < 1e-5);
    }

    #[test]
    fn hmax_examples() {
        let mm = on_a(CMatrix::identity(2).scale(0.5));
        let r = hmax(&mm).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{r:?}");
        assert!(hmax(&on_a(CMatrix::diag_real(&[1.0, 0.0]))).unwrap().value.abs() < 1e-6);
        let r = hmax(&maxent()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-6);
        assert!((r.cross_check.unwrap() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn hmax_duality_matches_fidelity_form_on_random_states() {
        let mut rng = Rng::new(17);
        let b = Algebra::new(&[(2, 1), (1, 1)]).unwrap();
        for _ in 0..4 {
            let s = rng.ginibre_state(&Algebra::full(2).tensor(&b));
            let r = hmax(&s).unwrap();
            assert!((r.value - r.cross_check.unwrap()).abs() < 1e-6);
        }
        let cq = rng.cq_random(3, &Algebra::full(2));
        let r = hmax(&cq.to_state()).unwrap();
        assert!((r.value - r.cross_check.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn sector_route_matches_full_embedding() {
        let mut rng = Rng::new(23);
        let shapes = [
            (Algebra::classical(3), Algebra::full(2)),
            (Algebra::new(&[(2, 1), (1, 1)]).unwrap(), Algebra::new(&[(2, 1), (1, 1)]).unwrap()),
            (Algebra::new(&[(2, 1), (2, 1)]).unwrap(), Algebra::full(2)),
        ];
        for (a, b) in shapes {
            let s = rng.ginibre_state(&a.tensor(&b));
            let full = embed_first_factor(&s).unwrap().purify().unwrap().a_with_complement().unwrap();
            let expected = -hmin(&full).unwrap().value;
            assert!((hmax(&s).unwrap().value - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn smooth_eps_zero_is_plain() {
        let s = Rng::new(2).ginibre_full(&[2, 2]);
        assert_eq!(hmin_smooth(&s, 0.0).unwrap().value, hmin(&s).unwrap().value);
        assert!(matches!(hmin_smooth(&s, 1.0), Err(EntropyError::InvalidEpsilon(_))));
    }

    #[test]
    fn smooth_monotone_in_eps() {
        let s = Rng::new(9).ginibre_full(&[2, 2]);
        let mut last_min = f64::NEG_INFINITY;
        let mut last_max = f64::INFINITY;
        for eps in [0.0, 0.01, 0.05, 0.1] {
            let a = hmin_smooth(&s, eps).unwrap();
            let b = hmax_smooth(&s, eps).unwrap();
            assert!(a.value >= last_min - 1e-7);
            assert!(b.value <= last_max + 1e-6);
            if let Some(sm) = &a.smoothed {
                assert!(purified_distance(&s, sm).unwrap() <= eps + 1e-5);
            }
            last_min = a.value;
            last_max = b.value;
        }
    }

    #[test]
    fn smooth_hmin_classical_bit_grid_oracle() {
        // ω = (0.9, 0.1), trivial B: Hmin^ε = −log min over the ball of max_x ω̄(x).
        let s = State::product(&State::classical(&[0.9, 0.1]).unwrap(), &State::classical(&[1.0]).unwrap());
        let eps = 0.1;
        let r = hmin_smooth(&s, eps).unwrap();
        assert!(r.value >= -(0.9f64.log2()) - 1e-9);
        let n = 2000;
        let mut best = f64::INFINITY;
        for a in 0..=n {
            for b in 0..=n {
                let (p, q) = (a as f64 / n as f64, b as f64 / n as f64);
                if p + q > 1.0 {
                    continue;
                }
                let rf = (0.9 * p).sqrt() + (0.1 * q).sqrt() + ((1.0 - p - q) * 0.0).sqrt();
                if rf * rf >= 1.0 - eps * eps {
                    best = best.min(p.max(q));
                }
            }
        }
        assert!((r.value + best.log2()).abs() < 2e-3, "{} vs grid {}", r.value, -best.log2());
    }

    #[test]
    fn smooth_hmax_maximally_mixed_qubit_grid() {
        let s = on_a(CMatrix::identity(2).scale(0.5));
        let eps = 0.1;
        let r = hmax_smooth(&s, eps).unwrap();
        assert!(r.value <= 1.0 + 1e-6);
        // Best diagonal subnormalised candidate in the ball: Hmax = 2 log(√p + √q).
        let n = 1000;
        let mut best = f64::INFINITY;
        for a in 0..=n {
            for b in 0..=n {
                let (p, q) = (a as f64 / n as f64, b as f64 / n as f64);
                if p + q > 1.0 {
                    continue;
                }
                let rf = (0.5 * p).sqrt() + (0.5 * q).sqrt();
                if rf * rf >= 1.0 - eps * eps {
                    best = best.min(2.0 * (p.sqrt() + q.sqrt()).log2());
                }
            }
        }
        assert!(r.value <= best + 1e-6, "{} vs grid {}", r.value, best);
        assert!(r.value >= best - 5e-3);
    }

    #[test]
    fn normalized_flag_never_beats_subnormalized() {
        let s = Rng::new(4).ginibre_full(&[2, 2]);
        let sub = hmin_smooth(&s, 0.05).unwrap().value;
        let opts = EntropyOptions { normalized_smoothing: true, ..Default::default() };
        let nor = opts.hmin_smooth(&s, 0.05).unwrap().value;
        assert!(nor <= sub + 1e-7);
        assert!(nor >= hmin(&s).unwrap().value - 1e-7);
    }

    #[test]
    fn result_json_round_trip() {
        let r = hmin(&maxent()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EntropyResult>(&s).unwrap(), r);
    }
}
