//! Dense complex matrices and the Hermitian kernels used throughout the crate.
//!
//! Eigendecomposition is a cyclic Jacobi sweep with a fixed pivot order, so
//! results are bitwise reproducible for a given input.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

pub type C64 = Complex64;

/// Default tolerance for Hermiticity and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative eigenvalue cutoff for support projections.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

const JACOBI_REL_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Which factor of a bipartite space to keep in [`partial_trace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keep {
    A,
    B,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cr(1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from real row slices. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let cdim = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, cdim, |i, j| {
            assert_eq!(rows[i].len(), cdim, "ragged rows");
            cr(rows[i][j])
        })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let cdim = if r == 0 { 0 } else { rows[0].len() };
        if rows.iter().any(|row| row.len() != cdim) {
            return Err(LinalgError::DimMismatch("ragged rows".into()));
        }
        Ok(Self::from_fn(r, cdim, |i, j| rows[i][j]))
    }

    pub fn diag_real(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = cr(v);
        }
        m
    }

    pub fn column(v: &[C64]) -> Self {
        CMatrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// |v><v| for a column vector `v`.
    pub fn projector(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    /// |i><j| in dimension n.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = cr(1.0);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row_vec(&self, i: usize) -> Vec<C64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col_vec(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Re tr(self^† other), the real Hilbert-Schmidt inner product.
    pub fn inner_re(&self, other: &CMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (r, cdim) = (self.rows * other.rows, self.cols * other.cols);
        CMatrix::from_fn(r, cdim, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, m: &CMatrix) {
        for i in 0..m.rows {
            for j in 0..m.cols {
                self[(r0 + i, c0 + j)] = m[(i, j)];
            }
        }
    }

    /// Hermitian part (M + M^†)/2.
    pub fn hermitian_part(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        match herm_eig(self, tol) {
            Ok((vals, _)) => vals.last().is_none_or(|&l| l >= -tol),
            Err(_) => false,
        }
    }

    /// Column-stacking vectorisation.
    pub fn vec_cols(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self[(i, j)]);
            }
        }
        v
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

fn zip_with(a: &CMatrix, b: &CMatrix, f: impl Fn(C64, C64) -> C64) -> CMatrix {
    assert!(a.rows == b.rows && a.cols == b.cols, "shape mismatch");
    CMatrix { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect() }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        zip_with(self, rhs, |x, y| x + y)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        zip_with(self, rhs, |x, y| x - y)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(-1.0)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// JSON: list of rows, each entry a [re, im] pair.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..self.rows).map(|i| (0..self.cols).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows.into_iter().map(|r| r.into_iter().map(|[a, b]| c(a, b)).collect()).collect();
        CMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the unitary whose columns are
/// the matching eigenvectors, so that `m = V diag(λ) V†`.
pub fn herm_eig(m: &CMatrix, tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(LinalgError::DimMismatch(format!("{}x{} is not square", m.rows, m.cols)));
    }
    let dev = m.hermiticity_defect();
    if dev > tol {
        return Err(LinalgError::NonHermitian { deviation: dev });
    }
    let n = m.rows;
    let mut a = m.hermitian_part();
    let mut v = CMatrix::identity(n);
    let target = JACOBI_REL_TOL * a.frobenius_norm();
    let off = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| diag[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let e = apq / g;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let zeta = (aqq - app) / (2.0 * g);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;
    let n = a.rows;
    // Columns: A <- A J with J = [[c, s e], [-s conj(e), c]].
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * cs - akq * e.conj() * sn;
        a[(k, q)] = akp * e * sn + akq * cs;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * cs - vkq * e.conj() * sn;
        v[(k, q)] = vkp * e * sn + vkq * cs;
    }
    // Rows: A <- J† A.
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * cs - aqk * e * sn;
        a[(q, k)] = apk * e.conj() * sn + aqk * cs;
    }
    a[(p, q)] = cr(0.0);
    a[(q, p)] = cr(0.0);
    a[(p, p)] = cr(a[(p, p)].re);
    a[(q, q)] = cr(a[(q, q)].re);
}

/// V diag(f(λ)) V† for Hermitian `m`.
pub fn herm_apply(m: &CMatrix, tol: f64, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, tol)?;
    Ok(from_eig(&vals.iter().map(|&l| f(l)).collect::<Vec<_>>(), &vecs))
}

/// Reassembles V diag(d) V†.
pub fn from_eig(d: &[f64], v: &CMatrix) -> CMatrix {
    let n = v.rows;
    let mut out = CMatrix::zeros(n, n);
    for (k, &dk) in d.iter().enumerate() {
        if dk == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = v[(i, k)] * dk;
            for j in 0..n {
                out[(i, j)] += vik * v[(j, k)].conj();
            }
        }
    }
    out
}

fn check_psd(vals: &[f64], tol: f64) -> Result<()> {
    match vals.last() {
        Some(&l) if l < -tol => Err(LinalgError::NotPsd { min_eig: l }),
        _ => Ok(()),
    }
}

/// Square root of a PSD matrix; eigenvalues in [-tol, 0) are clamped to zero,
/// as are those below the rounding floor `16 ε n max|λ|`.
pub fn psd_sqrt(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, tol)?;
    check_psd(&vals, tol)?;
    let floor = 16.0 * f64::EPSILON * vals.len() as f64 * vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    Ok(from_eig(&vals.iter().map(|&l| if l > floor { l.sqrt() } else { 0.0 }).collect::<Vec<_>>(), &vecs))
}

/// Pseudo-inverse square root on the support (relative cutoff [`SUPPORT_CUTOFF`]).
pub fn psd_inv_sqrt(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, tol)?;
    check_psd(&vals, tol)?;
    let cut = support_threshold(&vals);
    Ok(from_eig(&vals.iter().map(|&l| if l > cut { 1.0 / l.sqrt() } else { 0.0 }).collect::<Vec<_>>(), &vecs))
}

/// Moore-Penrose pseudo-inverse of a PSD matrix on its support.
pub fn psd_pinv(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, tol)?;
    check_psd(&vals, tol)?;
    let cut = support_threshold(&vals);
    Ok(from_eig(&vals.iter().map(|&l| if l > cut { 1.0 / l } else { 0.0 }).collect::<Vec<_>>(), &vecs))
}

fn support_threshold(vals: &[f64]) -> f64 {
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    SUPPORT_CUTOFF * top
}

/// Projector onto the span of eigenvectors with eigenvalue above the relative cutoff.
pub fn support_projector(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, tol)?;
    let cut = support_threshold(&vals);
    Ok(from_eig(&vals.iter().map(|&l| if l > cut { 1.0 } else { 0.0 }).collect::<Vec<_>>(), &vecs))
}

/// Projector onto the strictly positive spectral subspace of a Hermitian matrix.
pub fn positive_part_projector(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = herm_eig(m, tol)?;
    let cut = support_threshold(&vals);
    Ok(from_eig(&vals.iter().map(|&l| if l > cut { 1.0 } else { 0.0 }).collect::<Vec<_>>(), &vecs))
}

pub fn min_eigenvalue(m: &CMatrix, tol: f64) -> Result<f64> {
    let (vals, _) = herm_eig(m, tol)?;
    Ok(vals.last().copied().unwrap_or(0.0))
}

pub fn max_eigenvalue(m: &CMatrix, tol: f64) -> Result<f64> {
    let (vals, _) = herm_eig(m, tol)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let g = m.adjoint().matmul(m);
    let (vals, _) = herm_eig(&g, f64::INFINITY).expect("Gram matrix is Hermitian");
    vals.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_square() && m.hermiticity_defect() <= 1e-13 * (1.0 + m.max_abs()) {
        let (vals, _) = herm_eig(m, f64::INFINITY).expect("checked Hermitian");
        return vals.iter().map(|l| l.abs()).sum();
    }
    singular_values(m).iter().sum()
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_square() && m.hermiticity_defect() <= 1e-13 * (1.0 + m.max_abs()) {
        let (vals, _) = herm_eig(m, f64::INFINITY).expect("checked Hermitian");
        return vals.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Partial trace of an operator on C^dA ⊗ C^dB.
pub fn partial_trace(m: &CMatrix, keep: Keep, dims: (usize, usize)) -> Result<CMatrix> {
    let (da, db) = dims;
    if m.rows != da * db || m.cols != da * db {
        return Err(LinalgError::DimMismatch(format!("{}x{} on {}x{}", m.rows, m.cols, da, db)));
    }
    Ok(match keep {
        Keep::A => CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()),
        Keep::B => CMatrix::from_fn(db, db, |i, j| (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()),
    })
}

/// Operator on C^dA ⊗ C^dB ⊗ C^dC with the middle factor traced out.
pub fn partial_trace_middle(m: &CMatrix, dims: (usize, usize, usize)) -> Result<CMatrix> {
    let (da, db, dc) = dims;
    let n = da * db * dc;
    if m.rows != n || m.cols != n {
        return Err(LinalgError::DimMismatch(format!("{}x{} on {}x{}x{}", m.rows, m.cols, da, db, dc)));
    }
    Ok(CMatrix::from_fn(da * dc, da * dc, |r, s| {
        let (i, k) = (r / dc, r % dc);
        let (j, l) = (s / dc, s % dc);
        (0..db).map(|b| m[((i * db + b) * dc + k, (j * db + b) * dc + l)]).sum()
    }))
}

/// Swaps tensor legs: operator on A⊗B becomes the same operator on B⊗A.
pub fn swap_legs(m: &CMatrix, dims: (usize, usize)) -> CMatrix {
    let (da, db) = dims;
    CMatrix::from_fn(da * db, da * db, |r, s| {
        let (b1, a1) = (r / da, r % da);
        let (b2, a2) = (s / da, s % da);
        m[(a1 * db + b1, a2 * db + b2)]
    })
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let r: usize = blocks.iter().map(|b| b.rows).sum();
    let cdim: usize = blocks.iter().map(|b| b.cols).sum();
    let mut out = CMatrix::zeros(r, cdim);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.set_submatrix(r0, c0, b);
        r0 += b.rows;
        c0 += b.cols;
    }
    out
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    fn sample_herm(seed: u64, n: usize) -> CMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let g = CMatrix::from_fn(n, n, |_, _| c(next(), next()));
        (&g + &g.adjoint()).scale(0.5)
    }

    #[test]
    fn eig_identity_and_diag() {
        let (vals, v) = herm_eig(&CMatrix::identity(2), DEFAULT_TOL).unwrap();
        assert_eq!(vals, vec![1.0, 1.0]);
        assert!(close(&v.adjoint().matmul(&v), &CMatrix::identity(2), 1e-14));
        let (vals, _) = herm_eig(&CMatrix::diag_real(&[3.0, 1.0]), DEFAULT_TOL).unwrap();
        assert_eq!(vals, vec![3.0, 1.0]);
    }

    #[test]
    fn eig_pauli_x() {
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (vals, v) = herm_eig(&x, DEFAULT_TOL).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] + 1.0).abs() < 1e-14);
        assert!(close(&from_eig(&vals, &v), &x, 1e-14));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(herm_eig(&m, DEFAULT_TOL), Err(LinalgError::NonHermitian { .. })));
    }

    #[test]
    fn eig_reconstructs_random_complex() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 7);
            let m = sample_herm(seed, n);
            let (vals, v) = herm_eig(&m, DEFAULT_TOL).unwrap();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            assert!(close(&v.adjoint().matmul(&v), &CMatrix::identity(n), 1e-10));
            let err = op_norm(&(&from_eig(&vals, &v) - &m));
            assert!(err <= 1e-10 * op_norm(&m).max(1e-300), "seed {seed}: {err}");
        }
    }

    #[test]
    fn sqrt_examples() {
        assert!(close(&psd_sqrt(&CMatrix::identity(3), DEFAULT_TOL).unwrap(), &CMatrix::identity(3), 1e-14));
        let r = psd_sqrt(&CMatrix::diag_real(&[4.0, 9.0]), DEFAULT_TOL).unwrap();
        assert!(close(&r, &CMatrix::diag_real(&[2.0, 3.0]), 1e-14));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = CMatrix::projector(&[cr(s), c(0.0, s)]);
        assert!(close(&psd_sqrt(&p, DEFAULT_TOL).unwrap(), &p, 1e-12));
    }

    #[test]
    fn sqrt_clamps_and_rejects() {
        let m = CMatrix::diag_real(&[1.0, -1e-12]);
        let r = psd_sqrt(&m, DEFAULT_TOL).unwrap();
        assert!(close(&r, &CMatrix::diag_real(&[1.0, 0.0]), 1e-15));
        let bad = CMatrix::diag_real(&[1.0, -1e-3]);
        assert!(matches!(psd_sqrt(&bad, DEFAULT_TOL), Err(LinalgError::NotPsd { .. })));
    }

    #[test]
    fn trace_norm_examples() {
        assert_eq!(trace_norm(&CMatrix::zeros(3, 3)), 0.0);
        assert!((trace_norm(&CMatrix::diag_real(&[0.3, 0.7])) - 1.0).abs() < 1e-15);
        let d = &CMatrix::diag_real(&[0.75, 0.25]) - &CMatrix::diag_real(&[0.5, 0.5]);
        assert!((trace_norm(&d) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_norm_non_hermitian() {
        // [[0, 2], [0, 0]] has one singular value 2.
        let m = CMatrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert!((trace_norm(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let ra = CMatrix::diag_real(&[0.25, 0.75]);
        let rb = CMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let pa = partial_trace(&ra.kron(&rb), Keep::A, (2, 2)).unwrap();
        assert!(close(&pa, &ra, 1e-15));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = CMatrix::projector(&[cr(s), cr(0.0), cr(0.0), cr(s)]);
        let pa = partial_trace(&phi, Keep::A, (2, 2)).unwrap();
        assert!(close(&pa, &CMatrix::diag_real(&[0.5, 0.5]), 1e-15));
        let pb = partial_trace(&CMatrix::identity(4).scale(0.25), Keep::B, (2, 2)).unwrap();
        assert!(close(&pb, &CMatrix::identity(2).scale(0.5), 1e-15));
        assert!(partial_trace(&CMatrix::identity(5), Keep::A, (2, 2)).is_err());
    }

    #[test]
    fn partial_trace_middle_matches_sequential() {
        let m = sample_herm(7, 12);
        let direct = partial_trace_middle(&m, (2, 3, 2)).unwrap();
        let mut expect = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v: C64 = (0..3).map(|b| m[((i * 3 + b) * 2 + k, (j * 3 + b) * 2 + l)]).sum();
                        expect[(i * 2 + k, j * 2 + l)] = v;
                    }
                }
            }
        }
        assert!(close(&direct, &expect, 1e-14));
    }

    #[test]
    fn swap_legs_kron() {
        let a = sample_herm(1, 2);
        let b = sample_herm(2, 3);
        assert!(close(&swap_legs(&a.kron(&b), (2, 3)), &b.kron(&a), 1e-15));
    }

    #[test]
    fn json_round_trip() {
        let m = sample_herm(3, 3);
        let s = serde_json::to_string(&m).unwrap();
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
