//! Randomised invariant checks for every module, run as one suite.
//!
//! Each check draws its cases from seeded generators and reports the worst
//! defect against a fixed tolerance. A defect of zero or less is perfect.

use crate::algebra::{Algebra, AlgebraElement};
use crate::entropy::{certificate_defect, channel_fidelity, EntropyOptions};
use crate::hashing::{apply_tf, HashFamily, Mode};
use crate::linalg::{
    cr, from_eig, herm_eig, max_eigenvalue, min_eigenvalue, partial_trace, partial_trace_middle, psd_pinv, trace_norm,
    vnorm, CMatrix, Keep, C64,
};
use crate::metrics::{fidelity, fidelity_cq, purified_distance, purified_distance_cq};
use crate::protocols::checks::{
    chain_rule_slack, classical_extension_slack, distance_sandwich_slack, hayashi_slack, max_entropy_classical_slack,
    ogata_slack, radon_nikodym_sum_residual,
};
use crate::protocols::{dc_build, pa_run, uncertainty_check};
use crate::rng::Rng;
use crate::sdp::{self, AffineExpr, SdpProblem, SdpStatus, Sense};
use crate::states::{CqState, State};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Display;
use std::time::Instant;

type Case = fn(&mut Rng, usize) -> Result<f64, String>;

struct Check {
    module: &'static str,
    name: &'static str,
    tol: f64,
    quick: usize,
    full: usize,
    case: Case,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub module: String,
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest defect seen; the check passes when it is at most `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.error.is_none()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub quick: bool,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    /// One line per check: module, name, cases, worst defect, tolerance, verdict.
    pub fn matrix(&self) -> String {
        let mut out = format!(
            "{:<10} {:<34} {:>6} {:>11} {:>9} {:>8}  result\n",
            "module", "check", "cases", "worst", "tol", "seconds"
        );
        for c in &self.checks {
            let verdict = match (&c.error, c.passed()) {
                (Some(e), _) => format!("ERROR {e}"),
                (None, true) => "pass".into(),
                (None, false) => format!("FAIL ({} of {})", c.failures, c.cases),
            };
            out.push_str(&format!(
                "{:<10} {:<34} {:>6} {:>11.3e} {:>9.0e} {:>8.2}  {verdict}\n",
                c.module, c.name, c.cases, c.worst, c.tolerance, c.seconds
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        out.push_str(&format!("{} checks, {failed} failed\n", self.checks.len()));
        out
    }
}

fn err<E: Display>(e: E) -> String {
    e.to_string()
}

fn opts() -> EntropyOptions {
    EntropyOptions::default()
}

/// Up to three blocks with `n ≤ max_n`, `m ≤ max_m`.
fn random_algebra(rng: &mut Rng, max_n: usize, max_m: usize) -> Algebra {
    let k = 1 + rng.below(3);
    let blocks: Vec<(usize, usize)> = (0..k).map(|_| (1 + rng.below(max_n), 1 + rng.below(max_m))).collect();
    Algebra::new(&blocks).expect("positive block sizes")
}

fn random_element(rng: &mut Rng, alg: &Algebra) -> AlgebraElement {
    let blocks = alg.block_dims().iter().map(|&n| rng.ginibre_matrix(n, n)).collect();
    AlgebraElement::new(alg, blocks).expect("block shapes match")
}

fn max_block_diff(a: &State, b: &State) -> f64 {
    a.densities().iter().zip(b.densities()).map(|(x, y)| (x - y).max_abs()).fold(0.0, f64::max)
}

// linalg

fn herm_eig_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let n = 2 + i % 5;
    let h = rng.hermitian(n);
    let (vals, v) = herm_eig(&h, 1e-9).map_err(err)?;
    let orth = (&v.adjoint().matmul(&v) - &CMatrix::identity(n)).max_abs();
    let recon = (&from_eig(&vals, &v) - &h).max_abs();
    let unsorted = vals.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    Ok(orth.max(recon).max(unsorted))
}

fn trace_norm_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let (n, m) = (2 + i % 2, 2 + (i / 2) % 2);
    let (a, b) = (rng.ginibre_matrix(n, n), rng.ginibre_matrix(m, m));
    Ok((trace_norm(&a.kron(&b)) - trace_norm(&a) * trace_norm(&b)).abs())
}

fn partial_trace_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let (da, db) = (2 + i % 3, 2 + (i / 3) % 3);
    let m = rng.ginibre_matrix(da * db, da * db);
    let full = m.trace();
    let via_a = partial_trace(&m, Keep::B, (da, db)).map_err(err)?.trace();
    let via_b = partial_trace(&m, Keep::A, (da, db)).map_err(err)?.trace();
    Ok((via_a - full).norm().max((via_b - full).norm()))
}

// algebra

fn bicommutant_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 4, 4);
    let back = alg.commutant().commutant();
    Ok(if back.blocks() == alg.blocks() && back.structurally_eq(&alg) { 0.0 } else { 1.0 })
}

fn commutation_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 3, 3);
    let x = alg.embed(&random_element(rng, &alg)).map_err(err)?;
    let y = alg.embed_commutant(&random_element(rng, &alg.commutant())).map_err(err)?;
    Ok((&x.matmul(&y) - &y.matmul(&x)).max_abs())
}

fn center_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 3, 3);
    let z_alg = alg.center();
    let z = z_alg.embed(&random_element(rng, &z_alg)).map_err(err)?;
    let inside = alg.contains(&z, 1e-9) && alg.commutant_contains(&z, 1e-9);
    // A generic element of a non-abelian algebra is not central.
    let generic = alg.embed(&random_element(rng, &alg)).map_err(err)?;
    let excluded = alg.is_abelian() || !alg.commutant_contains(&generic, 1e-9);
    Ok(if inside && excluded { 0.0 } else { 1.0 })
}

// states

fn round_trip_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 3, 2);
    let s = rng.ginibre_state(&alg);
    let p = s.purify().map_err(err)?;
    Ok(max_block_diff(&p.relevant_state(), &s))
}

fn cq_sum_rule_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 2, 2);
    let nx = 2 + rng.below(2);
    let cq = rng.cq_random(nx, &alg);
    let tau = cq.marginal_b().add(&rng.ginibre_state(&alg)).map_err(err)?;
    radon_nikodym_sum_residual(&cq, &tau).map_err(err)
}

/// A second purification `ξ₂ = ρ^{1/2} W` on `C^n ⊗ C^{n+1}`; the map
/// `(a ⊗ 1)ξ₁ ↦ (a ⊗ 1)ξ₂` must be a partial isometry sending ξ₁ to ξ₂.
fn partial_isometry_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let n = 2 + i % 2;
    let rank = if i.is_multiple_of(3) { n - 1 } else { n };
    let g = rng.ginibre_matrix(n, rank);
    let rho = g.matmul(&g.adjoint());
    let rho = rho.scale(1.0 / rho.trace().re);
    let xi1 = State::from_density(rho).map_err(err)?.purify().map_err(err)?.vector;
    let root = CMatrix::from_vec(n, n, xi1.clone()).map_err(err)?;
    let w = rng.unitary(n + 1).submatrix(0, 0, n, n + 1);
    let xi2 = root.matmul(&w).data().to_vec();
    let k = n + 1;
    // Columns (E_ab ⊗ 1)ξ for all a, b.
    let act = |xi: &[C64], d: usize| {
        CMatrix::from_fn(n * d, n * n, |r, col| {
            let (a, b) = (col / n, col % n);
            if r / d == a {
                xi[b * d + r % d]
            } else {
                cr(0.0)
            }
        })
    };
    let (x, y) = (act(&xi1, n), act(&xi2, k));
    let v = y.matmul(&psd_pinv(&x.adjoint().matmul(&x), 1e-9).map_err(err)?).matmul(&x.adjoint());
    let maps: Vec<C64> = v.matvec(&xi1).iter().zip(&xi2).map(|(a, b)| a - b).collect();
    let p = v.adjoint().matmul(&v);
    Ok(vnorm(&maps).max((&p.matmul(&p) - &p).max_abs()))
}

// metrics

fn sandwich_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let alg = match i % 4 {
        0 => Algebra::full(2),
        1 => Algebra::full(3),
        2 => Algebra::new(&[(2, 1), (1, 1)]).expect("valid"),
        _ => Algebra::classical(3),
    };
    let (o, s) = (rng.subnormalized(&alg, 0.0), rng.subnormalized(&alg, 0.0));
    let (lo, hi) = distance_sandwich_slack(&o, &s).map_err(err)?;
    Ok(-lo.min(hi))
}

fn monotonicity_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let (o, s) = (rng.ginibre_full(&[2, 2]), rng.ginibre_full(&[2, 2]));
    let (f, p) = (fidelity(&o, &s).map_err(err)?, purified_distance(&o, &s).map_err(err)?);
    let (oa, sa) = (o.restrict(Keep::A).map_err(err)?, s.restrict(Keep::A).map_err(err)?);
    let povm = rng.binary_povm(2);
    let (om, sm) = (o.measure_a(&povm).map_err(err)?, s.measure_a(&povm).map_err(err)?);
    let worst = [
        f - fidelity(&oa, &sa).map_err(err)?,
        f - fidelity_cq(&om, &sm).map_err(err)?,
        purified_distance(&oa, &sa).map_err(err)? - p,
        purified_distance_cq(&om, &sm).map_err(err)? - p,
    ];
    Ok(worst.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn metric_axioms_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = Algebra::new(&[(2, 1), (1, 1)]).expect("valid");
    let (a, b, c) = (rng.subnormalized(&alg, 0.3), rng.subnormalized(&alg, 0.3), rng.subnormalized(&alg, 0.3));
    let pd = |x: &State, y: &State| purified_distance(x, y).map_err(err);
    let sym = (pd(&a, &b)? - pd(&b, &a)?).abs();
    let tri = pd(&a, &c)? - pd(&a, &b)? - pd(&b, &c)?;
    Ok(sym.max(tri))
}

// sdp

/// `max/min tr(HX)` over density matrices, optionally with `X ≤ cap · 1`.
fn eigen_program(h: &CMatrix, sense: Sense, cap: Option<f64>) -> SdpProblem {
    let n = h.rows();
    let mut p = SdpProblem::new(sense);
    let x = p.hermitian("X", n);
    p.objective_term(x, h.clone());
    p.psd(AffineExpr::new(n).place(x, n, 0, 1.0));
    p.zero(AffineExpr::new(1).constant(&CMatrix::identity(1).scale(-1.0)).functional(
        x,
        CMatrix::identity(n),
        CMatrix::identity(1),
    ));
    if let Some(c) = cap {
        p.psd(AffineExpr::new(n).constant(&CMatrix::identity(n).scale(c)).place(x, n, 0, -1.0));
    }
    p
}

fn solve_value(p: &SdpProblem) -> Result<sdp::SdpSolution, String> {
    let sol = sdp::solve(p).map_err(err)?;
    if sol.status != SdpStatus::Optimal {
        return Err(format!("solver status {:?}", sol.status));
    }
    Ok(sol)
}

fn eigen_extremes_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let h = rng.hermitian(2 + i % 4);
    let (vals, _) = herm_eig(&h, 1e-9).map_err(err)?;
    let hi = solve_value(&eigen_program(&h, Sense::Max, None))?;
    let lo = solve_value(&eigen_program(&h, Sense::Min, None))?;
    // Weak duality: the dual bound sits on the far side of the primal value.
    let duality = (hi.primal_value - hi.dual_value).max(lo.dual_value - lo.primal_value);
    let extremes = (hi.primal_value - vals[0]).abs().max((lo.primal_value - vals[vals.len() - 1]).abs());
    Ok((duality * 1e3).max(extremes))
}

fn unitary_invariance_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let n = 3 + i % 2;
    let h = rng.hermitian(n);
    let u = rng.unitary(n);
    let hu = u.matmul(&h).matmul(&u.adjoint()).hermitian_part();
    let a = solve_value(&eigen_program(&h, Sense::Max, Some(0.6)))?.primal_value;
    let b = solve_value(&eigen_program(&hu, Sense::Max, Some(0.6)))?.primal_value;
    Ok((a - b).abs())
}

// entropy

/// Random pure state with `A = M_2`, `B = M_2` or `M_2 ⊕ M_1` and a purifying
/// `C` of twice the dimension, as `(ω_AB, ω_AC)`.
fn tripartite(rng: &mut Rng, b_blocks: &[usize]) -> Result<(State, State), String> {
    let total: usize = b_blocks.iter().map(|&b| 4 * b * b).sum();
    let psi = rng.haar_vector(total);
    let (mut ab, mut ac) = (Vec::new(), Vec::new());
    let mut off = 0;
    for &b in b_blocks {
        let m = 2 * b;
        let p = CMatrix::projector(&psi[off..off + 2 * b * m]);
        off += 2 * b * m;
        ab.push(partial_trace(&p, Keep::A, (2 * b, m)).map_err(err)?);
        ac.push(partial_trace_middle(&p, (2, b, m)).map_err(err)?);
    }
    let b_alg = Algebra::new(&b_blocks.iter().map(|&b| (b, 1)).collect::<Vec<_>>()).map_err(err)?;
    let c_alg = Algebra::new(&b_blocks.iter().map(|&b| (2 * b, 1)).collect::<Vec<_>>()).map_err(err)?;
    Ok((
        State::new(&Algebra::full(2).tensor(&b_alg), ab, 1e-9).map_err(err)?,
        State::new(&Algebra::full(2).tensor(&c_alg), ac, 1e-9).map_err(err)?,
    ))
}

fn duality_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let blocks: &[usize] = if i.is_multiple_of(2) { &[2] } else { &[2, 1] };
    let eps = if (i / 2).is_multiple_of(2) { 0.0 } else { 0.05 };
    let (ab, ac) = tripartite(rng, blocks)?;
    let hmax = opts().hmax_smooth(&ab, eps).map_err(err)?.value;
    let hmin = opts().hmin_smooth(&ac, eps).map_err(err)?.value;
    Ok((hmax + hmin).abs())
}

fn purification_independence_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let b = if i.is_multiple_of(2) { Algebra::full(2) } else { Algebra::new(&[(2, 1), (1, 1)]).expect("valid") };
    let s = rng.ginibre_state(&Algebra::full(2).tensor(&b));
    let ac = s.purify().map_err(err)?.a_with_complement().map_err(err)?;
    let ket0 = State::pure(&[cr(1.0), cr(0.0)]).map_err(err)?;
    let padded = State::product(&ac, &ket0).assoc_right().map_err(err)?;
    let plain = -opts().hmin(&ac).map_err(err)?.value;
    let wide = -opts().hmin(&padded).map_err(err)?.value;
    let direct = opts().hmax(&s).map_err(err)?.value;
    Ok((plain - wide).abs().max((direct - wide).abs()))
}

fn data_processing_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let eps = if i.is_multiple_of(2) { 0.0 } else { 0.05 };
    let omega = rng.ginibre_full(&[2, 2, 2]).assoc_right().map_err(err)?;
    let ab = omega.assoc_left().map_err(err)?.restrict(Keep::A).map_err(err)?;
    // Measuring B: state on X ⊗ A, swapped to A ⊗ X.
    let ax = ab.swap().map_err(err)?.measure_a(&rng.binary_povm(2)).map_err(err)?.to_state().swap().map_err(err)?;
    let o = opts();
    let min_bc = o.hmin_smooth(&omega, eps).map_err(err)?.value;
    let min_b = o.hmin_smooth(&ab, eps).map_err(err)?.value;
    let min_x = o.hmin_smooth(&ax, eps).map_err(err)?.value;
    let max_bc = o.hmax_smooth(&omega, eps).map_err(err)?.value;
    let max_b = o.hmax_smooth(&ab, eps).map_err(err)?.value;
    Ok([min_bc - min_b, min_b - min_x, max_bc - max_b].into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn range_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let eps = if i.is_multiple_of(2) { 0.0 } else { 0.05 };
    let s = rng.ginibre_full(&[2, 2]);
    let a = State::product(&s.restrict(Keep::A).map_err(err)?, &State::classical(&[1.0]).map_err(err)?);
    let o = opts();
    let cond = o.hmin_smooth(&s, eps).map_err(err)?.value;
    let marg = o.hmin_smooth(&a, eps).map_err(err)?.value;
    let hmax_a = o.hmax_smooth(&a, eps).map_err(err)?.value;
    // A smoothed state keeps weight ≥ 1 − ε², so Hmin^ε(A) ≤ log n − log(1 − ε²).
    let cap = 1.0 - (1.0 - eps * eps).log2();
    Ok([-hmax_a - cond, cond - marg, marg - cap].into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn chain_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let eps = if i.is_multiple_of(2) { 0.0 } else { 0.05 };
    let omega = rng.ginibre_full(&[2, 2, 2]);
    let cq = rng.cq_random(2, &Algebra::full(2).tensor(&Algebra::full(2)));
    let a = chain_rule_slack(&opts(), &omega, eps).map_err(err)?;
    let b = max_entropy_classical_slack(&opts(), &cq).map_err(err)?;
    let c = classical_extension_slack(&opts(), &cq, eps).map_err(err)?;
    Ok(-a.min(b).min(c))
}

fn certificate_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let s = if i.is_multiple_of(2) {
        rng.ginibre_full(&[2, 2])
    } else {
        rng.ginibre_state(&Algebra::full(2).tensor(&Algebra::new(&[(2, 1), (1, 1)]).expect("valid")))
    };
    let r = opts().hmin(&s).map_err(err)?;
    let dual = r.dual.as_ref().ok_or("no certificate")?;
    let defect = certificate_defect(&s, dual).map_err(err)?;
    let f = channel_fidelity(&s, dual).map_err(err)?;
    Ok(((-f.log2()) - r.value).abs().max(defect))
}

// hashing

fn shapes(max_a: u32) -> Vec<(u32, u32)> {
    (1..=max_a).flat_map(|a| (1..=a).map(move |b| (a, b))).collect()
}

fn universality_case(_: &mut Rng, i: usize) -> Result<f64, String> {
    let (a, b) = shapes(6)[i];
    let (worst, size) = HashFamily::toeplitz(a, b).max_collisions().map_err(err)?;
    Ok(if worst << b <= size { 0.0 } else { 1.0 })
}

fn apply_tf_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let a = 1 + (i % 3) as u32;
    let fam = HashFamily::toeplitz(a, 1 + rng.below(a as usize) as u32).with_seed(rng.next_u64());
    let f = fam.sample(1).map_err(err)?.remove(0);
    let cq = rng.cq_random(1 << a, &Algebra::full(2).tensor(&Algebra::full(2)));
    let hashed = apply_tf(&f, &cq).map_err(err)?;
    let keep_b = |c: &CqState| c.map_parts(|p| p.restrict(Keep::B).expect("tensor parts"));
    let restricted_first = apply_tf(&f, &keep_b(&cq).map_err(err)?).map_err(err)?;
    let restricted_after = keep_b(&hashed).map_err(err)?;
    let commute = restricted_first
        .parts()
        .iter()
        .zip(restricted_after.parts())
        .map(|(x, y)| max_block_diff(x, y))
        .fold(0.0, f64::max);
    Ok((hashed.weight() - cq.weight()).abs().max(commute))
}

// protocols

fn hayashi_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let n = 2 + i % 3;
    let u = rng.unitary(n);
    let d: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let s = from_eig(&d, &u).hermitian_part();
    let t = rng.ginibre_density(n).scale(2.0 * rng.uniform());
    Ok(-hayashi_slack(&s, &t).map_err(err)?)
}

fn ogata_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 3, 1);
    let (p, e) = (rng.subnormalized(&alg, 0.2), rng.subnormalized(&alg, 0.2));
    Ok(-ogata_slack(&p, &e).map_err(err)?)
}

fn pa_exact_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let a = 1 + (i % 4) as u32;
    let b = 1 + rng.below(a as usize) as u32;
    let cq = rng.cq_random(1 << a, &Algebra::classical(2));
    let r = pa_run(&cq, b, &HashFamily::toeplitz(a, b), Mode::Exact).map_err(err)?;
    if !r.exact || r.stderr.is_some() {
        return Err("exact run reported statistical error".into());
    }
    Ok(r.avg_distance - r.bound)
}

fn decoder_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let nx = 2 + i % 3;
    let b = if i.is_multiple_of(2) { Algebra::full(2) } else { Algebra::new(&[(2, 1), (1, 1)]).expect("valid") };
    let cq = rng.cq_random(nx, &b);
    let a = nx.next_power_of_two().trailing_zeros();
    let c = 1u64 << rng.below(a as usize + 1);
    let r = dc_build(&cq, c, &HashFamily::toeplitz(a, c.trailing_zeros()), Mode::Exact).map_err(err)?;
    let mut worst = f64::NEG_INFINITY;
    for povm in &r.decoder {
        let n = povm.len();
        for (k, &d) in b.block_dims().iter().enumerate() {
            let mut sum = CMatrix::zeros(d, d);
            for e in &povm.elements()[..n - 1] {
                let m = &e.block_matrices[k];
                worst = worst.max(-min_eigenvalue(m, 1e-9).map_err(err)?);
                sum += m;
            }
            worst = worst.max(max_eigenvalue(&sum.hermitian_part(), 1e-9).map_err(err)? - 1.0);
        }
    }
    Ok(worst)
}

/// X = (U, V) with U private uniform bits and V copied to the adversary.
fn converse_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let a = 2 + (i % 3) as u32;
    let private = rng.below(a as usize + 1) as u32;
    let nv = 1usize << (a - private);
    let parts = (0..1usize << a)
        .map(|x| {
            let v = x % nv;
            let dens =
                (0..nv).map(|j| CMatrix::diag_real(&[if j == v { 1.0 / (1 << a) as f64 } else { 0.0 }])).collect();
            State::new(&Algebra::classical(nv), dens, 1e-9)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let cq = CqState::indexed(parts).map_err(err)?;
    let mut worst = f64::NEG_INFINITY;
    for b in 1..=a {
        let r = pa_run(&cq, b, &HashFamily::toeplitz(a, b), Mode::Exact).map_err(err)?;
        if r.best_distance <= 1e-10 {
            worst = worst.max(b as f64 - r.hmin);
        }
    }
    Ok(worst)
}

fn uncertainty_case(rng: &mut Rng, i: usize) -> Result<f64, String> {
    let eps = if i.is_multiple_of(2) { 0.0 } else { 0.05 };
    let omega = rng.haar_pure(&[2, 2, 2]);
    let (e, f) = (rng.binary_povm(2), rng.binary_povm(2));
    let r = uncertainty_check(&opts(), &omega, &e, &f, eps).map_err(err)?;
    Ok(r.rhs - r.lhs)
}

// generators and reports

fn generator_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let alg = random_algebra(rng, 3, 2);
    let s = rng.ginibre_state(&alg);
    let mut worst = (s.weight() - 1.0).abs();
    for d in s.densities() {
        worst = worst.max(-min_eigenvalue(d, 1e-9).map_err(err)?);
    }
    Ok(worst)
}

fn determinism_case(rng: &mut Rng, _: usize) -> Result<f64, String> {
    let seed = rng.next_u64();
    let run = || -> Result<String, String> {
        let s = Rng::new(seed).ginibre_full(&[2, 2]);
        serde_json::to_string(&opts().hmin(&s).map_err(err)?).map_err(err)
    };
    Ok(if run()? == run()? { 0.0 } else { 1.0 })
}

fn checks() -> Vec<Check> {
    let c = |module, name, tol, quick, full, case: Case| Check { module, name, tol, quick, full, case };
    vec![
        c("linalg", "herm_eig orthonormal, sorted", 1e-10, 50, 500, herm_eig_case),
        c("linalg", "trace norm multiplicative", 1e-9, 50, 500, trace_norm_case),
        c("linalg", "partial traces compose", 1e-10, 50, 500, partial_trace_case),
        c("algebra", "bicommutant", 0.0, 50, 500, bicommutant_case),
        c("algebra", "commutant commutes", 1e-10, 20, 200, commutation_case),
        c("algebra", "center in both", 0.0, 20, 200, center_case),
        c("states", "purification round trip", 1e-9, 30, 300, round_trip_case),
        c("states", "cq Radon-Nikodym sum rule", 1e-8, 20, 100, cq_sum_rule_case),
        c("states", "purifications related", 1e-9, 20, 100, partial_isometry_case),
        c("metrics", "distance sandwich", 1e-9, 100, 800, sandwich_case),
        c("metrics", "monotone under channels", 1e-9, 50, 200, monotonicity_case),
        c("metrics", "symmetry and triangle", 1e-9, 50, 200, metric_axioms_case),
        c("sdp", "duality and eigen extremes", 1e-7, 10, 50, eigen_extremes_case),
        c("sdp", "unitary invariance", 1e-7, 10, 50, unitary_invariance_case),
        c("entropy", "Hmax/Hmin duality", 1e-5, 8, 100, duality_case),
        c("entropy", "purification independence", 1e-6, 6, 50, purification_independence_case),
        c("entropy", "data processing", 1e-6, 4, 40, data_processing_case),
        c("entropy", "range bounds", 1e-6, 6, 50, range_case),
        c("entropy", "chain rules", 1e-6, 4, 100, chain_case),
        c("entropy", "certificate channel", 1e-6, 10, 100, certificate_case),
        c("hashing", "two-universal (exhaustive)", 0.0, 21, 21, universality_case),
        c("hashing", "apply_tf weight and restriction", 1e-12, 20, 200, apply_tf_case),
        c("protocols", "Hayashi inequality", 1e-9, 50, 200, hayashi_case),
        c("protocols", "Ogata inequality", 1e-8, 50, 200, ogata_case),
        c("protocols", "PA exact bound", 1e-9, 12, 50, pa_exact_case),
        c("protocols", "DC decoder valid", 1e-9, 12, 50, decoder_case),
        c("protocols", "perfect key converse", 1e-6, 6, 30, converse_case),
        c("protocols", "uncertainty relation", 1e-6, 6, 100, uncertainty_case),
        c("cli", "ginibre generator", 1e-12, 200, 1000, generator_case),
        c("cli", "deterministic reports", 0.0, 3, 10, determinism_case),
    ]
}

fn run_check(seed: u64, index: usize, check: &Check, quick: bool) -> CheckResult {
    let n = if quick { check.quick } else { check.full };
    let start = Instant::now();
    let outcomes: Vec<Result<f64, String>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((index as u64) << 32 | i as u64));
            (check.case)(&mut rng, i)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let mut error = None;
    for o in outcomes {
        match o {
            Ok(d) => {
                worst = worst.max(d);
                if d.is_nan() || d > check.tol {
                    failures += 1;
                }
            }
            Err(e) => {
                failures += 1;
                error.get_or_insert(e);
            }
        }
    }
    CheckResult {
        module: check.module.into(),
        name: check.name.into(),
        cases: n,
        failures,
        worst,
        tolerance: check.tol,
        error,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every check; `quick` uses the reduced case counts.
pub fn run(seed: u64, quick: bool) -> SelftestReport {
    let checks = checks().iter().enumerate().map(|(i, c)| run_check(seed, i, c, quick)).collect();
    SelftestReport { seed, quick, checks }
}

/// Runs only the checks of one module.
pub fn run_module(seed: u64, quick: bool, module: &str) -> SelftestReport {
    let checks = checks()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.module == module)
        .map(|(i, c)| run_check(seed, i, c, quick))
        .collect();
    SelftestReport { seed, quick, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_linalg_and_hashing_pass() {
        for m in ["linalg", "hashing", "algebra"] {
            let r = run_module(7, true, m);
            assert!(r.passed(), "{}", r.matrix());
        }
    }

    #[test]
    fn shapes_cover_all_pairs() {
        assert_eq!(shapes(6).len(), 21);
    }
}
