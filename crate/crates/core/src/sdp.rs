//! Small dense semidefinite programs over complex Hermitian matrices.
//!
//! Problems are stated with Hermitian (or general complex) matrix variables,
//! a real-linear objective, affine PSD constraints and affine equalities.
//! They are compiled to real coordinates, equalities are eliminated, and the
//! complex constraint blocks are realified as `[[Re, −Im], [Im, Re]]` (blocks
//! with purely real data are kept at their own size). The real problem is
//! solved with an infeasible primal-dual path-following method using
//! Nesterov–Todd scaling and a Mehrotra predictor-corrector step.

use crate::linalg::{c, cr, CMatrix, C64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("ill-formed problem: {0}")]
    IllFormed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Hermitian,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: VarKind,
}

/// One linear piece of an affine Hermitian expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Term {
    /// `coef · K X K†` for a Hermitian variable X.
    Congruence { var: usize, k: CMatrix, coef: f64 },
    /// `L X R + (L X R)†`.
    Sandwich { var: usize, left: CMatrix, right: CMatrix },
    /// `Re tr(C† X) · M` with `M` Hermitian.
    Functional { var: usize, c: CMatrix, m: CMatrix },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub dim: usize,
    pub constant: CMatrix,
    pub terms: Vec<Term>,
}

impl AffineExpr {
    pub fn new(dim: usize) -> Self {
        AffineExpr { dim, constant: CMatrix::zeros(dim, dim), terms: Vec::new() }
    }

    pub fn constant(mut self, m: &CMatrix) -> Self {
        self.constant += m;
        self
    }

    pub fn congruence(mut self, var: usize, k: CMatrix, coef: f64) -> Self {
        self.terms.push(Term::Congruence { var, k, coef });
        self
    }

    pub fn sandwich(mut self, var: usize, left: CMatrix, right: CMatrix) -> Self {
        self.terms.push(Term::Sandwich { var, left, right });
        self
    }

    pub fn functional(mut self, var: usize, c: CMatrix, m: CMatrix) -> Self {
        self.terms.push(Term::Functional { var, c, m });
        self
    }

    /// `coef · X` placed at rows/cols `offset..offset+n`.
    pub fn place(self, var: usize, n: usize, offset: usize, coef: f64) -> Self {
        let k = CMatrix::from_fn(self.dim, n, |i, j| if i == offset + j { cr(1.0) } else { cr(0.0) });
        self.congruence(var, k, coef)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    /// expression ⪰ 0
    Psd { expr: AffineExpr },
    /// expression = 0
    Zero { expr: AffineExpr },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: Sense,
    /// Σ Re tr(C† X_var) terms.
    pub terms: Vec<(usize, CMatrix)>,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub variables: Vec<Variable>,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Objective at the returned variables.
    pub primal_value: f64,
    /// Bound from the dual multipliers (≥ optimum for max, ≤ for min).
    pub dual_value: f64,
    pub variable_values: Vec<CMatrix>,
    /// Multiplier of each PSD constraint, in constraint order; `Re tr(Y·S)`
    /// pairs it with the constraint expression.
    pub multipliers: Vec<CMatrix>,
    pub gap: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { gap_tol: 1e-8, feas_tol: 1e-8, max_iter: 500 }
    }
}

/// Threshold for accepting an infeasibility or unboundedness certificate.
pub const CERTIFICATE_TOL: f64 = 1e-7;

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        SdpProblem {
            variables: Vec::new(),
            objective: Objective { sense, terms: Vec::new(), constant: 0.0 },
            constraints: Vec::new(),
        }
    }

    pub fn hermitian(&mut self, name: &str, n: usize) -> usize {
        self.variables.push(Variable { name: name.into(), rows: n, cols: n, kind: VarKind::Hermitian });
        self.variables.len() - 1
    }

    pub fn complex(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.variables.push(Variable { name: name.into(), rows, cols, kind: VarKind::Complex });
        self.variables.len() - 1
    }

    /// Real scalar (1×1 Hermitian).
    pub fn scalar(&mut self, name: &str) -> usize {
        self.hermitian(name, 1)
    }

    pub fn psd(&mut self, expr: AffineExpr) {
        self.constraints.push(Constraint::Psd { expr });
    }

    pub fn zero(&mut self, expr: AffineExpr) {
        self.constraints.push(Constraint::Zero { expr });
    }

    /// Adds `Re tr(C† X_var)` to the objective.
    pub fn objective_term(&mut self, var: usize, c: CMatrix) {
        self.objective.terms.push((var, c));
    }

    /// Adds `coef · tr X_var` to the objective.
    pub fn objective_trace(&mut self, var: usize, coef: f64) {
        let n = self.variables[var].rows;
        self.objective_term(var, CMatrix::identity(n).scale(coef));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub fn solve(p: &SdpProblem) -> Result<SdpSolution, SdpError> {
    solve_with(p, &SdpOptions::default())
}

// ---------------------------------------------------------------------------
// Compilation to real coordinates.

#[derive(Clone, Copy, Debug)]
enum Coord {
    Diag(usize),
    HRe(usize, usize),
    HIm(usize, usize),
    CRe(usize, usize),
    CIm(usize, usize),
}

fn coords_of(v: &Variable) -> Vec<Coord> {
    let mut out = Vec::new();
    match v.kind {
        VarKind::Hermitian => {
            for i in 0..v.rows {
                out.push(Coord::Diag(i));
            }
            for i in 0..v.rows {
                for j in (i + 1)..v.rows {
                    out.push(Coord::HRe(i, j));
                    out.push(Coord::HIm(i, j));
                }
            }
        }
        VarKind::Complex => {
            for i in 0..v.rows {
                for j in 0..v.cols {
                    out.push(Coord::CRe(i, j));
                    out.push(Coord::CIm(i, j));
                }
            }
        }
    }
    out
}

fn basis_entries(k: Coord) -> Vec<(usize, usize, C64)> {
    match k {
        Coord::Diag(i) => vec![(i, i, cr(1.0))],
        Coord::HRe(i, j) => vec![(i, j, cr(1.0)), (j, i, cr(1.0))],
        Coord::HIm(i, j) => vec![(i, j, c(0.0, 1.0)), (j, i, c(0.0, -1.0))],
        Coord::CRe(i, j) => vec![(i, j, cr(1.0))],
        Coord::CIm(i, j) => vec![(i, j, c(0.0, 1.0))],
    }
}

fn validate(p: &SdpProblem) -> Result<(), SdpError> {
    let ill = |s: String| Err(SdpError::IllFormed(s));
    for v in &p.variables {
        if v.rows == 0 || v.cols == 0 {
            return ill(format!("variable {} has an empty shape", v.name));
        }
        if v.kind == VarKind::Hermitian && v.rows != v.cols {
            return ill(format!("Hermitian variable {} is not square", v.name));
        }
    }
    let var = |i: usize| p.variables.get(i).ok_or_else(|| SdpError::IllFormed(format!("unknown variable {i}")));
    for (i, cm) in &p.objective.terms {
        let v = var(*i)?;
        if cm.rows() != v.rows || cm.cols() != v.cols {
            return ill(format!("objective coefficient shape for {}", v.name));
        }
    }
    for (ci, con) in p.constraints.iter().enumerate() {
        let e = match con {
            Constraint::Psd { expr } | Constraint::Zero { expr } => expr,
        };
        let d = e.dim;
        if e.constant.rows() != d || e.constant.cols() != d || !e.constant.is_hermitian(1e-12) {
            return ill(format!("constraint {ci}: constant is not a Hermitian {d}x{d} matrix"));
        }
        for t in &e.terms {
            match t {
                Term::Congruence { var: vi, k, .. } => {
                    let v = var(*vi)?;
                    if v.kind != VarKind::Hermitian || k.rows() != d || k.cols() != v.rows {
                        return ill(format!("constraint {ci}: congruence shape for {}", v.name));
                    }
                }
                Term::Sandwich { var: vi, left, right } => {
                    let v = var(*vi)?;
                    if left.rows() != d || left.cols() != v.rows || right.rows() != v.cols || right.cols() != d {
                        return ill(format!("constraint {ci}: sandwich shape for {}", v.name));
                    }
                }
                Term::Functional { var: vi, c: cm, m } => {
                    let v = var(*vi)?;
                    if cm.rows() != v.rows
                        || cm.cols() != v.cols
                        || m.rows() != d
                        || m.cols() != d
                        || !m.is_hermitian(1e-12)
                    {
                        return ill(format!("constraint {ci}: functional shape for {}", v.name));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Image of one coordinate basis element under the linear part of `e`.
fn image(e: &AffineExpr, var: usize, entries: &[(usize, usize, C64)], out: &mut CMatrix) -> bool {
    let mut touched = false;
    for t in &e.terms {
        match t {
            Term::Congruence { var: v, k, coef } if *v == var => {
                for &(i, j, val) in entries {
                    let s = val * *coef;
                    for a in 0..k.rows() {
                        let ka = k[(a, i)];
                        if ka.norm_sqr() == 0.0 {
                            continue;
                        }
                        for b in 0..k.rows() {
                            let kb = k[(b, j)];
                            if kb.norm_sqr() == 0.0 {
                                continue;
                            }
                            out[(a, b)] += s * ka * kb.conj();
                            touched = true;
                        }
                    }
                }
            }
            Term::Sandwich { var: v, left, right } if *v == var => {
                for &(i, j, val) in entries {
                    for a in 0..left.rows() {
                        let la = left[(a, i)];
                        if la.norm_sqr() == 0.0 {
                            continue;
                        }
                        for b in 0..right.cols() {
                            let rb = right[(j, b)];
                            if rb.norm_sqr() == 0.0 {
                                continue;
                            }
                            let z = val * la * rb;
                            out[(a, b)] += z;
                            out[(b, a)] += z.conj();
                            touched = true;
                        }
                    }
                }
            }
            Term::Functional { var: v, c: cm, m } if *v == var => {
                let s: f64 = entries.iter().map(|&(i, j, val)| (cm[(i, j)].conj() * val).re).sum();
                if s != 0.0 {
                    *out += &m.scale(s);
                    touched = true;
                }
            }
            _ => {}
        }
    }
    touched
}

type Sparse = Vec<(usize, usize, f64)>;

/// Real symmetric form of a complex Hermitian matrix, full entry list.
fn realify_sparse(h: &CMatrix, real_only: bool) -> Sparse {
    let d = h.rows();
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            if z.re != 0.0 {
                out.push((i, j, z.re));
                if !real_only {
                    out.push((i + d, j + d, z.re));
                }
            }
            if !real_only && z.im != 0.0 {
                out.push((i + d, j, z.im));
                out.push((i, j + d, -z.im));
            }
        }
    }
    out
}

fn realify_dense(h: &CMatrix, real_only: bool) -> DMatrix<f64> {
    let d = h.rows();
    let n = if real_only { d } else { 2 * d };
    let mut m = DMatrix::zeros(n, n);
    for (i, j, v) in realify_sparse(h, real_only) {
        m[(i, j)] += v;
    }
    m
}

/// Complex multiplier Y with ⟨realify(F), X⟩ = Re tr(F Y).
fn unrealify(x: &DMatrix<f64>, d: usize, real_only: bool) -> CMatrix {
    if real_only {
        return CMatrix::from_fn(d, d, |i, j| cr(x[(i, j)]));
    }
    CMatrix::from_fn(d, d, |i, j| c(x[(i, j)] + x[(i + d, j + d)], x[(i + d, j)] - x[(i, j + d)]))
}

/// A PSD constraint, the images of its coordinates, and whether all its data is real.
type PsdImage = (AffineExpr, Vec<(usize, CMatrix)>, bool);

/// Real standard form: max bᵀy s.t. C − Σ y_p A_p ⪰ 0 (blockwise).
struct StdForm {
    dims: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    a: Vec<Vec<(usize, Sparse)>>,
    b: Vec<f64>,
}

struct Compiled {
    std: StdForm,
    /// y = y0 + N z
    y0: Vec<f64>,
    null: Vec<Vec<(usize, f64)>>,
    coord_map: Vec<(usize, Coord)>,
    obj_const: f64,
    cost: Vec<f64>,
    psd_blocks: Vec<(usize, bool)>,
}

enum CompileOutcome {
    Ready(Box<Compiled>),
    Infeasible,
    Unbounded,
}

fn compile(p: &SdpProblem) -> Result<CompileOutcome, SdpError> {
    validate(p)?;
    let mut coord_map = Vec::new();
    for (vi, v) in p.variables.iter().enumerate() {
        for k in coords_of(v) {
            coord_map.push((vi, k));
        }
    }
    let n = coord_map.len();
    let sign = match p.objective.sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    // Objective in user orientation: Σ cost_p y_p.
    let mut cost = vec![0.0; n];
    for (pi, &(vi, k)) in coord_map.iter().enumerate() {
        let ent = basis_entries(k);
        for (tv, cm) in &p.objective.terms {
            if *tv == vi {
                cost[pi] += ent.iter().map(|&(i, j, val)| (cm[(i, j)].conj() * val).re).sum::<f64>();
            }
        }
    }

    // Images per constraint.
    let mut psd_images: Vec<PsdImage> = Vec::new();
    let mut eq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for con in &p.constraints {
        let (expr, is_psd) = match con {
            Constraint::Psd { expr } => (expr, true),
            Constraint::Zero { expr } => (expr, false),
        };
        let vars_used: Vec<usize> = expr
            .terms
            .iter()
            .map(|t| match t {
                Term::Congruence { var, .. } | Term::Sandwich { var, .. } | Term::Functional { var, .. } => *var,
            })
            .collect();
        let mut imgs = Vec::new();
        for (pi, &(vi, k)) in coord_map.iter().enumerate() {
            if !vars_used.contains(&vi) {
                continue;
            }
            let mut buf = CMatrix::zeros(expr.dim, expr.dim);
            if image(expr, vi, &basis_entries(k), &mut buf) && buf.max_abs() > 0.0 {
                imgs.push((pi, buf));
            }
        }
        if is_psd {
            let real_only = expr.constant.data().iter().all(|z| z.im == 0.0)
                && imgs.iter().all(|(_, m)| m.data().iter().all(|z| z.im == 0.0));
            psd_images.push((expr.clone(), imgs, real_only));
        } else {
            let d = expr.dim;
            let mut push_row = |f: &dyn Fn(&CMatrix) -> f64| {
                let row: Vec<(usize, f64)> =
                    imgs.iter().map(|(pi, m)| (*pi, f(m))).filter(|(_, v)| *v != 0.0).collect();
                eq_rows.push((row, -f(&expr.constant)));
            };
            for i in 0..d {
                push_row(&|m: &CMatrix| m[(i, i)].re);
                for j in (i + 1)..d {
                    push_row(&|m: &CMatrix| m[(i, j)].re);
                    push_row(&|m: &CMatrix| m[(i, j)].im);
                }
            }
        }
    }

    // Eliminate equalities: y = y0 + N z.
    let (y0, null) = match eliminate(n, &eq_rows) {
        Some(v) => v,
        None => return Ok(CompileOutcome::Infeasible),
    };

    // Standard form in z: C' = G0 + Σ y0_p F_p, A'_q = −Σ_p N_pq F_p, b'_q = sign·Σ_p N_pq cost_p.
    let mut dims = Vec::new();
    let mut cmats = Vec::new();
    let mut psd_blocks = Vec::new();
    // Per block, F_p in sparse real form keyed by coordinate.
    let mut f_blocks: Vec<Vec<Option<Sparse>>> = Vec::new();
    for (expr, imgs, real_only) in &psd_images {
        let d = if *real_only { expr.dim } else { 2 * expr.dim };
        dims.push(d);
        psd_blocks.push((expr.dim, *real_only));
        let mut cm = realify_dense(&expr.constant, *real_only);
        let mut fp: Vec<Option<Sparse>> = vec![None; n];
        for (pi, m) in imgs {
            let sp = realify_sparse(m, *real_only);
            if y0[*pi] != 0.0 {
                for &(i, j, v) in &sp {
                    cm[(i, j)] += y0[*pi] * v;
                }
            }
            fp[*pi] = Some(sp);
        }
        cmats.push(cm);
        f_blocks.push(fp);
    }
    let mut a = Vec::with_capacity(null.len());
    let mut b = Vec::with_capacity(null.len());
    let mut keep = Vec::new();
    for (q, col) in null.iter().enumerate() {
        let mut blocks = Vec::new();
        for (bi, fp) in f_blocks.iter().enumerate() {
            let mut acc: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
            for &(pi, w) in col {
                if let Some(sp) = &fp[pi] {
                    for &(i, j, v) in sp {
                        *acc.entry((i, j)).or_insert(0.0) -= w * v;
                    }
                }
            }
            let sp: Sparse = acc.into_iter().filter(|(_, v)| v.abs() > 1e-15).map(|((i, j), v)| (i, j, v)).collect();
            if !sp.is_empty() {
                blocks.push((bi, sp));
            }
        }
        let bq: f64 = sign * col.iter().map(|&(pi, w)| w * cost[pi]).sum::<f64>();
        if blocks.is_empty() {
            if bq.abs() > 1e-14 {
                return Ok(CompileOutcome::Unbounded);
            }
            continue;
        }
        keep.push(q);
        a.push(blocks);
        b.push(bq);
    }
    let null_kept: Vec<Vec<(usize, f64)>> = keep.iter().map(|&q| null[q].clone()).collect();
    let obj_const = p.objective.constant + y0.iter().zip(&cost).map(|(y, c)| y * c).sum::<f64>();
    Ok(CompileOutcome::Ready(Box::new(Compiled {
        std: StdForm { dims, c: cmats, a, b },
        y0,
        null: null_kept,
        coord_map,
        obj_const,
        cost,
        psd_blocks,
    })))
}

/// Row reduction of the equality system. Returns a particular solution and a
/// null-space basis (one sparse column per free coordinate), or `None` when
/// the system is inconsistent.
#[allow(clippy::type_complexity)]
fn eliminate(n: usize, rows: &[(Vec<(usize, f64)>, f64)]) -> Option<(Vec<f64>, Vec<Vec<(usize, f64)>>)> {
    if rows.is_empty() {
        return Some((vec![0.0; n], (0..n).map(|q| vec![(q, 1.0)]).collect()));
    }
    let r = rows.len();
    let mut m = vec![vec![0.0; n + 1]; r];
    for (ri, (row, rhs)) in rows.iter().enumerate() {
        for &(pi, v) in row {
            m[ri][pi] += v;
        }
        m[ri][n] = *rhs;
    }
    let scale = m.iter().flat_map(|row| row[..n].iter()).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let tol = 1e-11 * scale;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut prow = 0;
    for col in 0..n {
        if prow == r {
            break;
        }
        let (best, val) =
            (prow..r).map(|i| (i, m[i][col].abs())).fold((prow, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if val <= tol {
            continue;
        }
        m.swap(prow, best);
        let pv = m[prow][col];
        for v in m[prow].iter_mut() {
            *v /= pv;
        }
        let pivot_row = m[prow].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != prow && row[col] != 0.0 {
                let f = row[col];
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        pivots.push((prow, col));
        prow += 1;
    }
    let rhs_scale = rows.iter().fold(0.0f64, |a, (_, r)| a.max(r.abs())).max(1.0);
    for row in m.iter().skip(prow) {
        if row[n].abs() > 1e-9 * rhs_scale {
            return None;
        }
    }
    let mut is_pivot = vec![None; n];
    for &(ri, col) in &pivots {
        is_pivot[col] = Some(ri);
    }
    let mut y0 = vec![0.0; n];
    for &(ri, col) in &pivots {
        y0[col] = m[ri][n];
    }
    let mut null = Vec::new();
    for q in 0..n {
        if is_pivot[q].is_some() {
            continue;
        }
        let mut colv = vec![(q, 1.0)];
        for &(ri, col) in &pivots {
            let v = m[ri][q];
            if v.abs() > 1e-15 {
                colv.push((col, -v));
            }
        }
        colv.sort_by_key(|e| e.0);
        null.push(colv);
    }
    Some((y0, null))
}

// ---------------------------------------------------------------------------
// Interior-point method on the real standard form.

struct IpmResult {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    status: SdpStatus,
    iterations: usize,
    pinf: f64,
    dinf: f64,
}

fn a_op(s: &StdForm, x: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        s.a.len(),
        s.a.iter().map(|blocks| {
            blocks.iter().map(|(bi, sp)| sp.iter().map(|&(i, j, v)| v * x[*bi][(i, j)]).sum::<f64>()).sum()
        }),
    )
}

fn at_op(s: &StdForm, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = s.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (p, blocks) in s.a.iter().enumerate() {
        let yp = y[p];
        if yp == 0.0 {
            continue;
        }
        for (bi, sp) in blocks {
            for &(i, j, v) in sp {
                out[*bi][(i, j)] += yp * v;
            }
        }
    }
    out
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(sym(m)).map(|c| c.l())
}

/// Largest α with X + α·dX ⪰ 0 given the Cholesky factor of X.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let linv = l.clone().solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows())).expect("nonsingular factor");
    let t = sym(&(&linv * dx * linv.transpose()));
    let lmin = t.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Scaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
    lx: DMatrix<f64>,
    lz: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let lx = cholesky_lower(x)?;
    let lz = cholesky_lower(z)?;
    let k = lz.transpose() * &lx;
    let eig = nalgebra::SymmetricEigen::new(sym(&(k.transpose() * &k)));
    let n = x.nrows();
    let d = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&v| v.max(1e-300).sqrt()));
    let v = eig.eigenvectors;
    let dm_half = DMatrix::from_diagonal(&d.map(|x| 1.0 / x.sqrt()));
    let dp_half = DMatrix::from_diagonal(&d.map(|x| x.sqrt()));
    let g = &lx * &v * &dm_half;
    let lxinv = lx.clone().solve_lower_triangular(&DMatrix::identity(n, n))?;
    let ginv = dp_half * v.transpose() * lxinv;
    let w = &g * g.transpose();
    Some(Scaling { g, ginv, w, d, lx, lz })
}

/// Schur complement `H[p][q] = Σ_b tr(A_p W_b A_q W_b)`, formed column by
/// column. Each column uses whichever is cheaper: the dense product `W A_q W`
/// or the entrywise sum `Σ a_p(i,j) a_q(k,l) W[j,k] W[l,i]`.
fn schur(s: &StdForm, w: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = s.a.len();
    let mut by_block: Vec<Vec<(usize, &Sparse)>> = vec![Vec::new(); s.dims.len()];
    for (p, blocks) in s.a.iter().enumerate() {
        for (b, sp) in blocks {
            by_block[*b].push((p, sp));
        }
    }
    // tail[b][k]: total entries of the terms from position k on.
    let tail: Vec<Vec<usize>> = by_block
        .iter()
        .map(|terms| {
            let mut t = vec![0; terms.len() + 1];
            for k in (0..terms.len()).rev() {
                t[k] = t[k + 1] + terms[k].1.len();
            }
            t
        })
        .collect();
    let cols: Vec<Vec<(usize, f64)>> = (0..m)
        .into_par_iter()
        .map(|q| {
            let mut col: Vec<(usize, f64)> = Vec::new();
            for (b, sq) in &s.a[q] {
                let wb = &w[*b];
                let d = wb.nrows();
                let start = by_block[*b].partition_point(|t| t.0 < q);
                let later = &by_block[*b][start..];
                let direct = sq.len() * tail[*b][start];
                let dense = (sq.len() * d * d).min(2 * d * d * d) + tail[*b][start];
                if direct <= dense {
                    for &(p, sp) in later {
                        let mut v = 0.0;
                        for &(i, j, u) in sp.iter() {
                            for &(k, l, t) in sq.iter() {
                                v += u * t * wb[(j, k)] * wb[(l, i)];
                            }
                        }
                        col.push((p, v));
                    }
                    continue;
                }
                let wqw = if sq.len() > d {
                    let mut aq = DMatrix::zeros(d, d);
                    for &(k, l, u) in sq.iter() {
                        aq[(k, l)] += u;
                    }
                    wb * aq * wb
                } else {
                    let mut acc = DMatrix::zeros(d, d);
                    for &(k, l, u) in sq.iter() {
                        acc.ger(u, &wb.column(k), &wb.column(l), 1.0);
                    }
                    acc
                };
                for &(p, sp) in later {
                    let v: f64 = sp.iter().map(|&(i, j, v)| v * wqw[(j, i)]).sum();
                    col.push((p, v));
                }
            }
            col
        })
        .collect();
    let mut out = DMatrix::zeros(m, m);
    for (q, col) in cols.iter().enumerate() {
        for &(p, v) in col {
            out[(p, q)] += v;
        }
    }
    for q in 0..m {
        for p in (q + 1)..m {
            out[(q, p)] = out[(p, q)];
        }
    }
    out
}

enum Decomp {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Factored Schur matrix; solves are refined against the unfactored matrix.
struct Factor {
    m: DMatrix<f64>,
    dec: Decomp,
}

impl Factor {
    fn new(m: DMatrix<f64>) -> Self {
        let dec = match nalgebra::Cholesky::new(m.clone()) {
            Some(c) => Decomp::Chol(c),
            None => {
                let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
                let reg = &m + DMatrix::identity(m.nrows(), m.nrows()) * (1e-13 * scale);
                match nalgebra::Cholesky::new(reg) {
                    Some(c) => Decomp::Chol(c),
                    None => Decomp::Lu(m.clone().lu()),
                }
            }
        };
        Factor { m, dec }
    }

    fn raw_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.dec {
            Decomp::Chol(c) => c.solve(rhs),
            Decomp::Lu(l) => l.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.raw_solve(rhs);
        for _ in 0..2 {
            let r = rhs - &self.m * &x;
            x += self.raw_solve(&r);
        }
        x
    }
}

#[allow(clippy::too_many_arguments)]
fn direction(
    s: &StdForm,
    fac: &Factor,
    sc: &[Scaling],
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    rc: &[DMatrix<f64>],
) -> (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>) {
    let grg: Vec<DMatrix<f64>> = sc.iter().zip(rc).map(|(k, r)| &k.g * r * k.g.transpose()).collect();
    let wrw: Vec<DMatrix<f64>> = sc.iter().zip(rd).map(|(k, r)| &k.w * r * &k.w).collect();
    let diff: Vec<DMatrix<f64>> = grg.iter().zip(&wrw).map(|(a, b)| a - b).collect();
    let rhs = rp - a_op(s, &diff);
    let dy = fac.solve(&rhs);
    let atdy = at_op(s, &dy);
    let dz: Vec<DMatrix<f64>> = rd.iter().zip(&atdy).map(|(r, a)| sym(&(r - a))).collect();
    let dx: Vec<DMatrix<f64>> =
        sc.iter().zip(grg.iter().zip(&dz)).map(|(k, (g, z))| sym(&(g - &k.w * z * &k.w))).collect();
    (dx, dy, dz)
}

fn ipm(s: &StdForm, opts: &SdpOptions) -> IpmResult {
    let m = s.a.len();
    let nb = s.dims.len();
    let ntot: usize = s.dims.iter().sum();
    let bnorm = s.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = fro(&s.c);
    let b = DVector::from_vec(s.b.clone());

    // Starting point.
    let mut x = Vec::with_capacity(nb);
    let mut z = Vec::with_capacity(nb);
    for (bi, &d) in s.dims.iter().enumerate() {
        let mut xi: f64 = 10f64.max((d as f64).sqrt());
        let mut zeta: f64 = xi;
        for (p, blocks) in s.a.iter().enumerate() {
            for (bj, sp) in blocks {
                if *bj == bi {
                    let an = sp.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                    xi = xi.max(d as f64 * (1.0 + s.b[p].abs()) / (1.0 + an));
                    zeta = zeta.max(an);
                }
            }
        }
        zeta = zeta.max(s.c[bi].norm());
        x.push(DMatrix::identity(d, d) * xi);
        z.push(DMatrix::identity(d, d) * zeta);
    }
    let mut y = DVector::zeros(m);
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let (mut pinf, mut dinf) = (f64::INFINITY, f64::INFINITY);
    let mut best: Option<(Vec<DMatrix<f64>>, DVector<f64>, f64)> = None;

    for it in 0..opts.max_iter {
        iterations = it;
        let rp = &b - a_op(s, &x);
        let aty = at_op(s, &y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|i| sym(&(&s.c[i] - &z[i] - &aty[i]))).collect();
        let pobj = inner(&s.c, &x);
        let dobj = b.dot(&y);
        let xz = inner(&x, &z);
        let mu = xz / ntot as f64;
        pinf = rp.norm() / (1.0 + bnorm);
        dinf = fro(&rd) / (1.0 + cnorm);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = relgap.max(pinf).max(dinf);
        if best.as_ref().is_none_or(|bst| merit < bst.2) {
            best = Some((x.clone(), y.clone(), merit));
        }
        if relgap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            status = SdpStatus::Optimal;
            break;
        }
        // Certificates.
        if it > 5 {
            let ax = a_op(s, &x).norm();
            if pobj < 0.0 && ax / (-pobj) < CERTIFICATE_TOL && dinf > opts.feas_tol && fro(&x) > 1e6 {
                status = SdpStatus::Infeasible;
                break;
            }
            if dobj > 1e7 * (1.0 + cnorm) && pinf > opts.feas_tol {
                let rel = fro(&rd) / dobj;
                if rel < CERTIFICATE_TOL {
                    status = SdpStatus::Unbounded;
                    break;
                }
            }
        }
        let sc: Option<Vec<Scaling>> = (0..nb).map(|i| nt_scaling(&x[i], &z[i])).collect();
        let sc = match sc {
            Some(v) => v,
            None => break,
        };
        let ws: Vec<DMatrix<f64>> = sc.iter().map(|k| k.w.clone()).collect();
        let fac = Factor::new(schur(s, &ws));

        // Predictor.
        let rc_aff: Vec<DMatrix<f64>> = sc.iter().map(|k| -DMatrix::from_diagonal(&k.d)).collect();
        let (dxa, _dya, dza) = direction(s, &fac, &sc, &rp, &rd, &rc_aff);
        let ap = sc.iter().zip(&dxa).map(|(k, d)| max_step(&k.lx, d)).fold(f64::INFINITY, f64::min).min(1.0);
        let ad = sc.iter().zip(&dza).map(|(k, d)| max_step(&k.lz, d)).fold(f64::INFINITY, f64::min).min(1.0);
        let xa: Vec<DMatrix<f64>> = x.iter().zip(&dxa).map(|(a, d)| a + d * ap).collect();
        let za: Vec<DMatrix<f64>> = z.iter().zip(&dza).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&xa, &za) / ntot as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rc: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(dxa.iter().zip(&dza))
            .map(|(k, (dx, dz))| {
                let n = k.d.len();
                let xt = &k.ginv * dx * k.ginv.transpose();
                let zt = k.g.transpose() * dz * &k.g;
                let mut h = sym(&(&xt * &zt)) * -1.0;
                for i in 0..n {
                    h[(i, i)] += sigma * mu - k.d[i] * k.d[i];
                }
                DMatrix::from_fn(n, n, |i, j| 2.0 * h[(i, j)] / (k.d[i] + k.d[j]))
            })
            .collect();
        let (dx, dy, dz) = direction(s, &fac, &sc, &rp, &rd, &rc);
        let tau = 0.98;
        let ap = (tau * sc.iter().zip(&dx).map(|(k, d)| max_step(&k.lx, d)).fold(f64::INFINITY, f64::min)).min(1.0);
        let ad = (tau * sc.iter().zip(&dz).map(|(k, d)| max_step(&k.lz, d)).fold(f64::INFINITY, f64::min)).min(1.0);
        for i in 0..nb {
            x[i] = sym(&(&x[i] + &dx[i] * ap));
            z[i] = sym(&(&z[i] + &dz[i] * ad));
        }
        y += dy * ad;
        iterations = it + 1;
    }
    if status == SdpStatus::MaxIter {
        if let Some((bx, by, _)) = best {
            x = bx;
            y = by;
        }
        let rp = &b - a_op(s, &x);
        pinf = rp.norm() / (1.0 + bnorm);
    }
    IpmResult { x, y, status, iterations, pinf, dinf }
}

pub fn solve_with(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
    let comp = match compile(p)? {
        CompileOutcome::Ready(c) => c,
        CompileOutcome::Infeasible => return Ok(trivial_solution(p, SdpStatus::Infeasible)),
        CompileOutcome::Unbounded => return Ok(trivial_solution(p, SdpStatus::Unbounded)),
    };
    let res = if comp.std.a.is_empty() && comp.std.dims.is_empty() {
        IpmResult {
            x: Vec::new(),
            y: DVector::zeros(0),
            status: SdpStatus::Optimal,
            iterations: 0,
            pinf: 0.0,
            dinf: 0.0,
        }
    } else if comp.std.a.is_empty() {
        // Only constant constraints remain: feasible iff each is PSD.
        let ok = comp
            .std
            .c
            .iter()
            .all(|c| nalgebra::SymmetricEigen::new(c.clone()).eigenvalues.iter().all(|&v| v >= -opts.feas_tol));
        let x = comp.std.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        IpmResult {
            x,
            y: DVector::zeros(0),
            status: if ok { SdpStatus::Optimal } else { SdpStatus::Infeasible },
            iterations: 0,
            pinf: 0.0,
            dinf: 0.0,
        }
    } else {
        ipm(&comp.std, opts)
    };

    // Recover user coordinates.
    let mut yfull = comp.y0.clone();
    for (q, col) in comp.null.iter().enumerate() {
        for &(pi, w) in col {
            yfull[pi] += w * res.y[q];
        }
    }
    let mut values: Vec<CMatrix> = p.variables.iter().map(|v| CMatrix::zeros(v.rows, v.cols)).collect();
    for (pi, &(vi, k)) in comp.coord_map.iter().enumerate() {
        for (i, j, val) in basis_entries(k) {
            values[vi][(i, j)] += val * yfull[pi];
        }
    }
    let primal = p.objective.constant + yfull.iter().zip(&comp.cost).map(|(y, c)| y * c).sum::<f64>();
    let sign = match p.objective.sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let dual = comp.obj_const + sign * inner(&comp.std.c, &res.x);
    let multipliers =
        res.x.iter().zip(&comp.psd_blocks).map(|(x, &(d, real_only))| unrealify(x, d, real_only)).collect();
    let gap = (dual - primal).abs();
    let dual_infeasibility = if res.status == SdpStatus::Optimal { res.dinf } else { res.dinf.max(0.0) };
    Ok(SdpSolution {
        status: res.status,
        primal_value: primal,
        dual_value: dual,
        variable_values: values,
        multipliers,
        gap,
        iterations: res.iterations,
        primal_infeasibility: res.pinf,
        dual_infeasibility,
    })
}

fn trivial_solution(p: &SdpProblem, status: SdpStatus) -> SdpSolution {
    let inf = match (status, p.objective.sense) {
        (SdpStatus::Unbounded, Sense::Max) => f64::INFINITY,
        (SdpStatus::Unbounded, Sense::Min) => f64::NEG_INFINITY,
        (_, Sense::Max) => f64::NEG_INFINITY,
        (_, Sense::Min) => f64::INFINITY,
    };
    SdpSolution {
        status,
        primal_value: inf,
        dual_value: inf,
        variable_values: p.variables.iter().map(|v| CMatrix::zeros(v.rows, v.cols)).collect(),
        multipliers: Vec::new(),
        gap: f64::INFINITY,
        iterations: 0,
        primal_infeasibility: f64::INFINITY,
        dual_infeasibility: f64::INFINITY,
    }
}

/// Evaluates an affine expression at given variable values.
pub fn evaluate(expr: &AffineExpr, values: &[CMatrix]) -> CMatrix {
    let mut out = expr.constant.clone();
    for t in &expr.terms {
        match t {
            Term::Congruence { var, k, coef } => out += &k.matmul(&values[*var]).matmul(&k.adjoint()).scale(*coef),
            Term::Sandwich { var, left, right } => {
                let m = left.matmul(&values[*var]).matmul(right);
                out += &m;
                out += &m.adjoint();
            }
            Term::Functional { var, c: cm, m } => out += &m.scale(cm.inner_re(&values[*var])),
        }
    }
    out
}
