//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use rayon::prelude::*;
use std::time::Instant;
use vna_entropy::entropy::{certificate_defect, channel_fidelity, EntropyOptions};
use vna_entropy::hashing::{HashFamily, Mode};
use vna_entropy::linalg::{cr, from_eig, partial_trace, partial_trace_middle, trace_norm, CMatrix, Keep};
use vna_entropy::protocols::checks::{
    chain_rule_slack, classical_extension_slack, distance_sandwich_slack, hayashi_slack, max_entropy_classical_slack,
    ogata_slack, radon_nikodym_dmax_gap, radon_nikodym_sum_residual,
};
use vna_entropy::protocols::{dc_build_with, pa_run_with, uncertainty_check, ProtocolError};
use vna_entropy::rng::Rng;
use vna_entropy::selftest;
use vna_entropy::{Algebra, CqState, Povm, State};

struct Outcome {
    pass: bool,
    summary: String,
}

/// Largest value of a per-case statistic, or the first error encountered.
fn worst<T: Send>(cases: Vec<T>, f: impl Fn(T) -> Result<f64, String> + Sync + Send) -> Result<f64, String> {
    cases.into_par_iter().map(f).try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

fn opts() -> EntropyOptions {
    EntropyOptions::default()
}

/// Random pure state on `A ⊗ B ⊗ C` with `A = M_2`, `B = ⊕ M_{b_j}` and the
/// purifying `C = ⊕ M_{2 b_j}`, returned as `(ω_AB, ω_AC)`.
fn tripartite(rng: &mut Rng, b_blocks: &[usize]) -> (State, State) {
    let total: usize = b_blocks.iter().map(|&b| 4 * b * b).sum();
    let psi = rng.haar_vector(total);
    let (mut ab, mut ac) = (Vec::new(), Vec::new());
    let mut off = 0;
    for &b in b_blocks {
        let m = 2 * b;
        let p = CMatrix::projector(&psi[off..off + 2 * b * m]);
        off += 2 * b * m;
        ab.push(partial_trace(&p, Keep::A, (2 * b, m)).unwrap());
        ac.push(partial_trace_middle(&p, (2, b, m)).unwrap());
    }
    let b_alg = Algebra::new(&b_blocks.iter().map(|&b| (b, 1)).collect::<Vec<_>>()).unwrap();
    let c_alg = Algebra::new(&b_blocks.iter().map(|&b| (2 * b, 1)).collect::<Vec<_>>()).unwrap();
    (
        State::new(&Algebra::full(2).tensor(&b_alg), ab, 1e-9).unwrap(),
        State::new(&Algebra::full(2).tensor(&c_alg), ac, 1e-9).unwrap(),
    )
}

fn duality() -> Outcome {
    let cases: Vec<(u64, Vec<usize>, f64)> = (0..100u64)
        .flat_map(|s| [(s, vec![2]), (s, vec![2, 1])])
        .flat_map(|(s, b)| [(s, b.clone(), 0.0), (s, b, 0.05)])
        .collect();
    let n = cases.len();
    let r = worst(cases, |(s, b, eps)| {
        let (ab, ac) = tripartite(&mut Rng::new(1000 + s), &b);
        let hmax = opts().hmax_smooth(&ab, eps).map_err(|e| e.to_string())?.value;
        let hmin = opts().hmin_smooth(&ac, eps).map_err(|e| e.to_string())?.value;
        Ok((hmax + hmin).abs())
    });
    judge(r, 1e-5, |w| format!("{n} cases, max |Hmax^ε(A|B) + Hmin^ε(A|C)| = {w:.2e} (tol 1e-5)"))
}

fn triangle() -> Outcome {
    let cases: Vec<u64> = (0..100).collect();
    let r = worst(cases, |s| {
        let mut rng = Rng::new(2000 + s);
        let (state, cq) = match s % 4 {
            0 => (rng.ginibre_state(&Algebra::full(2).tensor(&Algebra::full(2))), None),
            1 => (rng.ginibre_state(&Algebra::full(2).tensor(&Algebra::new(&[(2, 1), (1, 1)]).unwrap())), None),
            2 => {
                let cq = rng.cq_random(3, &Algebra::full(2));
                (cq.to_state(), Some(cq))
            }
            _ => {
                let cq = rng.cq_random(2, &Algebra::new(&[(2, 1), (1, 1)]).unwrap());
                (cq.to_state(), Some(cq))
            }
        };
        let r = opts().hmin(&state).map_err(|e| e.to_string())?;
        let dual = r.dual.as_ref().ok_or("no certificate")?;
        let defect = certificate_defect(&state, dual).map_err(|e| e.to_string())?;
        if defect > 1e-7 {
            return Err(format!("seed {s}: certificate defect {defect:.2e}"));
        }
        let dv: f64 = state.densities().iter().zip(dual).map(|(a, y)| a.inner_re(y)).sum();
        let cf = channel_fidelity(&state, dual).map_err(|e| e.to_string())?;
        let mut dev = (-dv.log2() - r.value).abs().max((-cf.log2() - r.value).abs());
        if let Some(cq) = cq {
            let mut o = opts();
            o.cross_check = false;
            let pg = o.pguess(&cq).map_err(|e| e.to_string())?.value;
            dev = dev.max((-pg.log2() - r.value).abs());
        }
        Ok(dev)
    });
    judge(r, 1e-6, |w| {
        format!("100 states (50 cq), max spread of primal/dual/channel/pguess values = {w:.2e} (tol 1e-6)")
    })
}

fn helstrom() -> Outcome {
    let cases: Vec<u64> = (0..200).collect();
    let r = worst(cases, |s| {
        let mut rng = Rng::new(3000 + s);
        let b = match s % 3 {
            0 => Algebra::full(2),
            1 => Algebra::full(3),
            _ => Algebra::new(&[(2, 1), (1, 1)]).unwrap(),
        };
        let cq = rng.cq_random(2, &b);
        let (w0, w1) = (&cq.parts()[0], &cq.parts()[1]);
        let norm: f64 = w0.densities().iter().zip(w1.densities()).map(|(a, b)| trace_norm(&(a - b))).sum();
        let closed = 0.5 * (1.0 + norm);
        let mut o = opts();
        o.cross_check = false;
        let pg = o.pguess(&cq).map_err(|e| e.to_string())?.value;
        Ok((pg - closed).abs())
    });
    judge(r, 1e-7, |w| format!("200 seeds, max |pguess − ½(1 + ‖p₀ρ₀ − p₁ρ₁‖₁)| = {w:.2e} (tol 1e-7)"))
}

fn privacy_amplification() -> Outcome {
    let cases: Vec<u64> = (0..50).collect();
    let runs: Result<Vec<(usize, usize)>, String> = cases
        .into_par_iter()
        .map(|s| {
            let mut rng = Rng::new(4000 + s);
            let a = 1 + (s % 4) as u32;
            let e = if s % 2 == 0 { Algebra::classical(2) } else { Algebra::full(2) };
            let cq = rng.cq_random(1 << a, &e);
            let (mut checked, mut violations) = (0, 0);
            for b in 1..=a {
                let fam = HashFamily::toeplitz(a, b);
                match pa_run_with(&opts(), &cq, b, &fam, Mode::Exact, 0.05) {
                    Ok(r) => {
                        checked += 2;
                        let exact_ok = r.exact && r.members == 1 << fam.size_log2();
                        if !exact_ok || r.avg_distance > r.bound || r.avg_distance > r.smooth_bound.unwrap_or(f64::NAN)
                        {
                            violations += 1;
                        }
                    }
                    Err(ProtocolError::BoundViolated { .. }) => {
                        checked += 2;
                        violations += 1;
                    }
                    Err(e) => return Err(format!("seed {s}, b = {b}: {e}")),
                }
            }
            Ok((checked, violations))
        })
        .collect();
    match runs {
        Ok(v) => {
            let checked: usize = v.iter().map(|x| x.0).sum();
            let bad: usize = v.iter().map(|x| x.1).sum();
            Outcome {
                pass: bad == 0,
                summary: format!(
                    "50 sources, {checked} exact Toeplitz bound checks (plain and ε = 0.05), {bad} violations"
                ),
            }
        }
        Err(e) => Outcome { pass: false, summary: e },
    }
}

/// X uniform on `n` letters with a classical copy in B.
fn copied(n: usize) -> CqState {
    let parts = (0..n)
        .map(|x| {
            let dens = (0..n).map(|j| CMatrix::diag_real(&[if j == x { 1.0 / n as f64 } else { 0.0 }])).collect();
            State::new(&Algebra::classical(n), dens, 1e-9).unwrap()
        })
        .collect();
    CqState::indexed(parts).unwrap()
}

fn all_message_sizes(nx: usize) -> Vec<u64> {
    let a = nx.max(2).next_power_of_two().trailing_zeros();
    (0..=a).map(|b| 1u64 << b).collect()
}

fn data_compression() -> Outcome {
    let cases: Vec<u64> = (0..50).collect();
    let runs: Result<Vec<(usize, usize)>, String> = cases
        .into_par_iter()
        .map(|s| {
            let mut rng = Rng::new(5000 + s);
            let nx = 2 + (s % 7) as usize;
            let b = if s % 2 == 0 { Algebra::full(2) } else { Algebra::classical(2) };
            let cq = rng.cq_random(nx, &b);
            let (mut checked, mut violations) = (0, 0);
            for c in all_message_sizes(nx) {
                let a = nx.max(2).next_power_of_two().trailing_zeros();
                let fam = HashFamily::toeplitz(a, c.trailing_zeros());
                match dc_build_with(&opts(), &cq, c, &fam, Mode::Exact) {
                    Ok(r) => {
                        checked += 1;
                        if r.avg_p_err > r.bound {
                            violations += 1;
                        }
                    }
                    Err(ProtocolError::BoundViolated { .. }) => {
                        checked += 1;
                        violations += 1;
                    }
                    Err(e) => return Err(format!("seed {s}, |C| = {c}: {e}")),
                }
            }
            Ok((checked, violations))
        })
        .collect();
    let perfect: Result<f64, String> = worst(vec![2usize, 4, 8], |n| {
        let cq = copied(n);
        let mut w = 0.0f64;
        for c in all_message_sizes(n) {
            let fam = HashFamily::toeplitz(n.trailing_zeros(), c.trailing_zeros());
            let r = dc_build_with(&opts(), &cq, c, &fam, Mode::Exact).map_err(|e| e.to_string())?;
            w = w.max(r.p_err);
        }
        Ok(w)
    });
    match (runs, perfect) {
        (Ok(v), Ok(p)) => {
            let checked: usize = v.iter().map(|x| x.0).sum();
            let bad: usize = v.iter().map(|x| x.1).sum();
            Outcome {
                pass: bad == 0 && p <= 1e-9,
                summary: format!(
                    "50 cq-states, {checked} decoder builds, {bad} violations; perfect side information max p_err = {p:.2e} (tol 1e-9)"
                ),
            }
        }
        (Err(e), _) | (_, Err(e)) => Outcome { pass: false, summary: e },
    }
}

fn uncertainty() -> Outcome {
    let cases: Vec<(u64, f64)> = (0..100u64).flat_map(|s| [(s, 0.0), (s, 0.05)]).collect();
    let r = worst(cases, |(s, eps)| {
        let mut rng = Rng::new(6000 + s);
        let omega = rng.haar_pure(&[2, 2, 2]);
        let (e, f) = (rng.binary_povm(2), rng.binary_povm(2));
        let r = uncertainty_check(&opts(), &omega, &e, &f, eps).map_err(|e| e.to_string())?;
        Ok(r.rhs - r.lhs)
    });
    let mub = || -> Result<(f64, f64), String> {
        let mut v = vec![cr(0.0); 2];
        v[0] = cr(1.0);
        let ket0 = State::on_full_tensor(&[2, 1, 1], CMatrix::projector(&v)).map_err(|e| e.to_string())?;
        let r = uncertainty_check(&opts(), &ket0, &Povm::computational(2), &Povm::hadamard(), 0.0)
            .map_err(|e| e.to_string())?;
        Ok(((r.rhs - 1.0).abs(), (r.lhs - r.rhs).abs()))
    };
    match (r, mub()) {
        (Ok(w), Ok((rhs_dev, eq_dev))) => Outcome {
            pass: -w >= -1e-6 && rhs_dev <= 1e-12 && eq_dev <= 1e-6,
            summary: format!(
                "200 cases, min slack lhs − rhs = {:.2e} (tol −1e-6); MUB |rhs − 1| = {rhs_dev:.1e}; |0⟩ |lhs − rhs| = {eq_dev:.2e} (tol 1e-6)",
                -w
            ),
        },
        (Err(e), _) | (_, Err(e)) => Outcome { pass: false, summary: e },
    }
}

fn auxiliary_lemmas() -> Outcome {
    let hay = worst((0..200u64).collect(), |s| {
        let mut rng = Rng::new(7000 + s);
        let n = 2 + (s % 3) as usize;
        let u = rng.unitary(n);
        let d: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let sm = from_eig(&d, &u).hermitian_part();
        let t = rng.ginibre_density(n).scale(2.0 * rng.uniform());
        Ok(-hayashi_slack(&sm, &t).map_err(|e| e.to_string())?)
    });
    let oga = worst((0..200u64).collect(), |s| {
        let mut rng = Rng::new(7200 + s);
        let alg = match s % 3 {
            0 => Algebra::full(2),
            1 => Algebra::new(&[(2, 1), (1, 1)]).unwrap(),
            _ => Algebra::full(3),
        };
        let (p, e) = (rng.subnormalized(&alg, 0.2), rng.subnormalized(&alg, 0.2));
        Ok(-ogata_slack(&p, &e).map_err(|e| e.to_string())?)
    });
    let chains = worst((0..100u64).collect(), |s| {
        let mut rng = Rng::new(7400 + s);
        let eps = if s % 2 == 0 { 0.0 } else { 0.05 };
        let omega = rng.ginibre_full(&[2, 2, 2]);
        let ab = Algebra::full(2).tensor(&Algebra::full(2));
        let cq = rng.cq_random(2, &ab);
        let err = |e: ProtocolError| e.to_string();
        let a = chain_rule_slack(&opts(), &omega, eps).map_err(err)?;
        let b = max_entropy_classical_slack(&opts(), &cq).map_err(err)?;
        let c = classical_extension_slack(&opts(), &cq, eps).map_err(err)?;
        Ok(-a.min(b).min(c))
    });
    match (hay, oga, chains) {
        (Ok(h), Ok(o), Ok(c)) => Outcome {
            pass: -h >= -1e-8 && -o >= -1e-8 && -c >= -1e-6,
            summary: format!(
                "min slacks: Hayashi {:.2e} (200), Ogata {:.2e} (200), chain rules {:.2e} (100 states × 3 rules)",
                -h, -o, -c
            ),
        },
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Outcome { pass: false, summary: e },
    }
}

fn radon_nikodym() -> Outcome {
    let r = worst((0..100u64).collect(), |s| {
        let mut rng = Rng::new(8000 + s);
        let alg = match s % 3 {
            0 => Algebra::full(2),
            1 => Algebra::new(&[(2, 1), (1, 2)]).unwrap(),
            _ => Algebra::full(2).tensor(&Algebra::full(2)),
        };
        let (o, sg) = (rng.ginibre_state(&alg), rng.ginibre_state(&alg));
        let gap = radon_nikodym_dmax_gap(&o, &sg).map_err(|e| e.to_string())?;
        let cq = rng.cq_random(3, &alg);
        let tau = cq.marginal_b().add(&rng.ginibre_state(&alg)).map_err(|e| e.to_string())?;
        let res = radon_nikodym_sum_residual(&cq, &tau).map_err(|e| e.to_string())?;
        Ok(gap.max(res))
    });
    judge(r, 1e-8, |w| format!("100 seeds, max of |log‖h‖ − Dmax| and cq sum-rule residual = {w:.2e} (tol 1e-8)"))
}

fn sandwich() -> Outcome {
    let r = worst((0..500u64).collect(), |s| {
        let mut rng = Rng::new(9000 + s);
        let alg = match s % 4 {
            0 => Algebra::full(2),
            1 => Algebra::full(3),
            2 => Algebra::new(&[(2, 1), (1, 1)]).unwrap(),
            _ => Algebra::classical(3),
        };
        let (o, sg) = (rng.subnormalized(&alg, 0.0), rng.subnormalized(&alg, 0.0));
        let (lo, hi) = distance_sandwich_slack(&o, &sg).map_err(|e| e.to_string())?;
        Ok(-lo.min(hi))
    });
    judge(r, 1e-9, |w| format!("500 pairs, min slack of ½(ND + |Δw|) ≤ P ≤ √(ND + |Δw|) = {:.2e} (tol −1e-9)", -w))
}

fn selftest_quick() -> Outcome {
    let t = Instant::now();
    let report = selftest::run(42, true);
    let secs = t.elapsed().as_secs_f64();
    let failed = report.checks.iter().filter(|c| !c.passed()).count();
    Outcome {
        pass: failed == 0 && secs < 600.0,
        summary: format!("{} checks, {failed} failed, {secs:.1} s (limit 600 s)", report.checks.len()),
    }
}

fn judge(r: Result<f64, String>, tol: f64, msg: impl Fn(f64) -> String) -> Outcome {
    match r {
        Ok(w) => Outcome { pass: w <= tol, summary: msg(w) },
        Err(e) => Outcome { pass: false, summary: format!("error: {e}") },
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("duality", duality),
        ("hmin-triangle", triangle),
        ("helstrom", helstrom),
        ("privacy-amplification", privacy_amplification),
        ("data-compression", data_compression),
        ("uncertainty", uncertainty),
        ("auxiliary-lemmas", auxiliary_lemmas),
        ("radon-nikodym", radon_nikodym),
        ("metric-sandwich", sandwich),
        ("selftest-quick", selftest_quick),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {} [{:.1} s]", i + 1, o.summary, t.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
