//! Small dense real linear-algebra kernel.
//!
//! Everything here is sized for control design work (n ≤ 64): row-major
//! storage, partial-pivot LU, a Kronecker-vectorized Sylvester solver,
//! a scaling-and-squaring matrix exponential and a Routh-table Hurwitz test.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Solves with an estimated 1-norm condition number above this are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Absolute tolerance on Routh pivots.
pub const ROUTH_TOL: f64 = 1e-12;

/// Relative pivot tolerance used by [`rank`] callers in this crate.
pub const RANK_TOL: f64 = 1e-10;

/// Dense real matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "Matrix::from_row_slice",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("matrix entries must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    context: "Matrix::from_rows",
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_slice(n_rows, n_cols, &data)
    }

    /// n×1 column.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// 1×n row.
    pub fn row(v: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row_slice(i).to_vec()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "Matrix::matmul",
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row_slice(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out)?;
        Ok(out)
    }

    /// `out = self · v` without allocating.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if v.len() != self.cols || out.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "Matrix::mul_vec",
                expected: self.cols,
                actual: v.len(),
            });
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_slice(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    fn zip_with(&self, rhs: &Matrix, context: &'static str, op: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.rows * self.cols,
                actual: rhs.rows * rhs.cols,
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    pub fn try_add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "Matrix::add", |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "Matrix::sub", |a, b| a - b)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Column-major vectorization.
    pub fn vec_col_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self[(i, j)]);
            }
        }
        v
    }

    pub fn from_col_major(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = v[j * rows + i];
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row_slice(i))?;
        }
        write!(f, "]")
    }
}

// Operator forms panic on shape mismatch, like the checked forms would error.
impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

fn require_square(a: &Matrix, context: &'static str) -> Result<usize> {
    if a.is_square() {
        Ok(a.rows)
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected: a.rows,
            actual: a.cols,
        })
    }
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    parity: f64,
    norm_1: f64,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = require_square(a, "Lu::new")?;
        let norm_1 = a.norm_1();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = 1.0;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot in column {k}")));
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                parity = -parity;
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / d;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= l * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            parity,
            norm_1,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "Lu::solve right-hand side length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    pub fn determinant(&self) -> f64 {
        (0..self.dim()).map(|i| self.lu[(i, i)]).product::<f64>() * self.parity
    }

    /// 1-norm condition number, computed from the explicit inverse.
    pub fn condition(&self) -> f64 {
        let inv = self.inverse();
        if !inv.all_finite() {
            return f64::INFINITY;
        }
        self.norm_1 * inv.norm_1()
    }

    fn check_condition(&self) -> Result<()> {
        let cond = self.condition();
        if cond > MAX_CONDITION || !cond.is_finite() {
            Err(Error::SingularSystem(format!("condition estimate {cond:.3e}")))
        } else {
            Ok(())
        }
    }
}

/// Solves `A x = b`, refusing ill-conditioned systems.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = Lu::new(a)?;
    if b.len() != lu.dim() {
        return Err(Error::DimensionMismatch {
            context: "solve",
            expected: lu.dim(),
            actual: b.len(),
        });
    }
    lu.check_condition()?;
    Ok(lu.solve(b))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let lu = Lu::new(a)?;
    lu.check_condition()?;
    Ok(lu.inverse())
}

/// Numerical rank by Gaussian elimination with full pivoting. Pivots below
/// `tol · max(1, max|a_ij|)` count as zero.
pub fn rank(a: &Matrix, tol: f64) -> usize {
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let threshold = tol * a.max_abs().max(1.0);
    let mut r = 0;
    while r < rows.min(cols) {
        let mut best = (r, r, 0.0);
        for i in r..rows {
            for j in r..cols {
                let v = m[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= threshold {
            break;
        }
        let (pi, pj, _) = best;
        for j in 0..cols {
            m.data.swap(r * cols + j, pi * cols + j);
        }
        for i in 0..rows {
            m.data.swap(i * cols + r, i * cols + pj);
        }
        let d = m[(r, r)];
        for i in r + 1..rows {
            let l = m[(i, r)] / d;
            for j in r..cols {
                m[(i, j)] -= l * m[(r, j)];
            }
        }
        r += 1;
    }
    r
}

/// Solves `X·A − B·X = C` for `X` (m×n) with `A` n×n, `B` m×m.
///
/// Uses the vectorized form `(Aᵀ ⊗ I_m − I_n ⊗ B)·vec(X) = vec(C)`; the
/// operator is singular exactly when the spectra of `A` and `B` intersect.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = require_square(a, "solve_sylvester(A)")?;
    let m = require_square(b, "solve_sylvester(B)")?;
    if c.rows != m || c.cols != n {
        return Err(Error::DimensionMismatch {
            context: "solve_sylvester(C)",
            expected: m * n,
            actual: c.rows * c.cols,
        });
    }
    let k = &a.transpose().kron(&Matrix::identity(m)) - &Matrix::identity(n).kron(b);
    let x = solve(&k, &c.vec_col_major())
        .map_err(|e| match e {
            Error::SingularSystem(msg) => {
                Error::SingularSystem(format!("Sylvester operator, spectra overlap: {msg}"))
            }
            other => other,
        })?;
    Ok(Matrix::from_col_major(m, n, &x))
}

/// Frobenius residual `‖X·A − B·X − C‖_F`.
pub fn sylvester_residual(x: &Matrix, a: &Matrix, b: &Matrix, c: &Matrix) -> f64 {
    (&(&(x * a) - &(b * x)) - c).frobenius_norm()
}

const TAYLOR_ORDER: usize = 13;

/// Matrix exponential by scaling and squaring around an order-13 Taylor
/// core. The scaled argument satisfies `‖A·2⁻ᵏ‖₁ ≤ 0.5`.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = require_square(a, "expm")?;
    if !a.all_finite() {
        return Err(Error::Overflow);
    }
    let norm = a.norm_1();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::Overflow);
    }
    let scaled = a.scale(2f64.powi(-squarings));

    // Horner: I + A(I + A/2(I + A/3(… (I + A/13))))
    let id = Matrix::identity(n);
    let mut acc = id.clone();
    for k in (1..=TAYLOR_ORDER).rev() {
        acc = &id + &(&scaled * &acc).scale(1.0 / k as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
        if !acc.all_finite() {
            return Err(Error::Overflow);
        }
    }
    if !acc.all_finite() {
        return Err(Error::Overflow);
    }
    Ok(acc)
}

/// Zero-order-hold pair `(e^{AΔ}, ∫₀^Δ e^{Aτ}dτ·B)` read off the exponential
/// of the augmented block `[[A, B], [0, 0]]·Δ`.
pub fn zoh_discretize(a: &Matrix, b: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    let n = require_square(a, "zoh_discretize(A)")?;
    if b.rows != n {
        return Err(Error::DimensionMismatch {
            context: "zoh_discretize(B)",
            expected: n,
            actual: b.rows,
        });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParams(format!("ZOH interval must be positive, got {dt}")));
    }
    let m = b.cols;
    let mut block = Matrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = a[(i, j)] * dt;
        }
        for j in 0..m {
            block[(i, n + j)] = b[(i, j)] * dt;
        }
    }
    let e = expm(&block)?;
    let mut ad = Matrix::zeros(n, n);
    let mut bd = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..n {
            ad[(i, j)] = e[(i, j)];
        }
        for j in 0..m {
            bd[(i, j)] = e[(i, n + j)];
        }
    }
    Ok((ad, bd))
}

/// Characteristic polynomial `det(λI − A)` by Faddeev–LeVerrier, returned
/// in descending powers with leading coefficient 1.
pub fn char_poly(a: &Matrix) -> Result<Vec<f64>> {
    let n = require_square(a, "char_poly")?;
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    if n == 0 {
        return Ok(coeffs);
    }
    let id = Matrix::identity(n);
    let mut mk = id.clone();
    for k in 1..=n {
        if k > 1 {
            mk = &(a * &mk) + &id.scale(coeffs[k - 1]);
        }
        let am = a * &mk;
        coeffs.push(-am.trace() / k as f64);
    }
    Ok(coeffs)
}

/// Outcome of the Routh–Hurwitz test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurwitzVerdict {
    Hurwitz,
    Unstable,
    /// A Routh pivot lies within tolerance of zero.
    Marginal,
}

impl HurwitzVerdict {
    pub fn is_hurwitz(self) -> bool {
        self == HurwitzVerdict::Hurwitz
    }
}

impl fmt::Display for HurwitzVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HurwitzVerdict::Hurwitz => "Hurwitz",
            HurwitzVerdict::Unstable => "unstable",
            HurwitzVerdict::Marginal => "marginal",
        })
    }
}

/// First column of the Routh table for a polynomial in descending powers.
pub fn routh_first_column(poly: &[f64]) -> Vec<f64> {
    let degree = poly.len().saturating_sub(1);
    let width = degree / 2 + 1;
    let take = |start: usize| -> Vec<f64> {
        (0..width).map(|j| poly.get(start + 2 * j).copied().unwrap_or(0.0)).collect()
    };
    let mut prev = take(0);
    let mut cur = take(1);
    let mut first = vec![prev[0]];
    for _ in 0..degree {
        first.push(cur[0]);
        if cur[0].abs() <= ROUTH_TOL {
            break;
        }
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let a = prev.get(j + 1).copied().unwrap_or(0.0);
                let b = cur.get(j + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    first.truncate(degree + 1);
    first
}

pub fn hurwitz_verdict(a: &Matrix) -> Result<HurwitzVerdict> {
    let poly = char_poly(a)?;
    Ok(poly_verdict(&poly))
}

pub fn poly_verdict(poly: &[f64]) -> HurwitzVerdict {
    let lead = poly.first().copied().unwrap_or(1.0);
    let normalized: Vec<f64> = poly.iter().map(|c| c / lead).collect();
    let first = routh_first_column(&normalized);
    for &p in &first {
        if p.abs() <= ROUTH_TOL {
            return HurwitzVerdict::Marginal;
        }
        if p < 0.0 {
            return HurwitzVerdict::Unstable;
        }
    }
    HurwitzVerdict::Hurwitz
}

/// True iff every eigenvalue of `a` has strictly negative real part.
/// Non-square input is never Hurwitz.
pub fn is_hurwitz(a: &Matrix) -> bool {
    hurwitz_verdict(a).map(HurwitzVerdict::is_hurwitz).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn lorenz_phi() -> Matrix {
        m(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[-9.0, 0.0, -10.0, 0.0],
        ])
    }

    fn lorenz_m() -> Matrix {
        m(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[-4.0, -12.0, -13.0, -6.0],
        ])
    }

    #[test]
    fn scalar_sylvester() {
        let x = solve_sylvester(&m(&[&[0.0]]), &m(&[&[-1.0]]), &m(&[&[1.0]])).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sylvester_overlapping_spectra_is_singular() {
        let a = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let err = solve_sylvester(&a, &a, &Matrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)), "{err:?}");
    }

    #[test]
    fn sylvester_lorenz_internal_model() {
        let n = Matrix::column(&[0.0, 0.0, 0.0, 1.0]);
        let gamma = Matrix::row(&[1.0, 0.0, 0.0, 0.0]);
        let c = &n * &gamma;
        let t = solve_sylvester(&lorenz_phi(), &lorenz_m(), &c).unwrap();
        assert!(sylvester_residual(&t, &lorenz_phi(), &lorenz_m(), &c) <= 1e-10);
        let psi = &gamma * &inverse(&t).unwrap();
        for (got, want) in psi.as_slice().iter().zip([-5.0, 12.0, 3.0, 6.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn expm_zero_and_diagonal() {
        assert_eq!(expm(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3));
        let e = expm(&Matrix::diag(&[1.0, -2.0])).unwrap();
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
        assert_eq!(e[(1, 0)], 0.0);
    }

    #[test]
    fn expm_rejects_non_finite() {
        let a = Matrix {
            rows: 1,
            cols: 1,
            data: vec![f64::NAN],
        };
        assert_eq!(expm(&a).unwrap_err(), Error::Overflow);
        assert_eq!(expm(&m(&[&[1e300]])).unwrap_err(), Error::Overflow);
    }

    #[test]
    fn zoh_integrator_and_scalar() {
        let (ad, bd) = zoh_discretize(&Matrix::zeros(2, 2), &Matrix::identity(2), 0.5).unwrap();
        assert_eq!(ad, Matrix::identity(2));
        assert!((&bd - &Matrix::identity(2).scale(0.5)).max_abs() < 1e-15);

        let (ad, bd) = zoh_discretize(&m(&[&[-1.0]]), &m(&[&[1.0]]), 1.0).unwrap();
        let e = (-1f64).exp();
        assert!((ad[(0, 0)] - e).abs() < 1e-15);
        assert!((bd[(0, 0)] - (1.0 - e)).abs() < 1e-15);
    }

    #[test]
    fn zoh_rejects_non_positive_interval() {
        assert!(zoh_discretize(&Matrix::identity(1), &Matrix::identity(1), 0.0).is_err());
        assert!(zoh_discretize(&Matrix::identity(1), &Matrix::identity(1), -1.0).is_err());
    }

    #[test]
    fn hurwitz_examples() {
        let ao = m(&[&[-2.0, 1.0], &[-2.0, 0.0]]);
        assert_eq!(char_poly(&ao).unwrap(), vec![1.0, 2.0, 2.0]);
        assert!(is_hurwitz(&ao));

        let rot = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert_eq!(hurwitz_verdict(&rot).unwrap(), HurwitzVerdict::Marginal);
        assert!(!is_hurwitz(&rot));

        let poly = char_poly(&lorenz_m()).unwrap();
        for (got, want) in poly.iter().zip([1.0, 6.0, 13.0, 12.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(is_hurwitz(&lorenz_m()));

        assert_eq!(hurwitz_verdict(&Matrix::diag(&[-1.0, 2.0])).unwrap(), HurwitzVerdict::Unstable);
        assert!(!is_hurwitz(&Matrix::zeros(2, 3)));
    }

    #[test]
    fn char_poly_of_lorenz_generator() {
        let poly = char_poly(&lorenz_phi()).unwrap();
        for (got, want) in poly.iter().zip([1.0, 0.0, 10.0, 0.0, 9.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_and_condition() {
        assert_eq!(rank(&Matrix::identity(4), RANK_TOL), 4);
        assert_eq!(rank(&Matrix::zeros(4, 4), RANK_TOL), 0);
        let r1 = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(rank(&r1, RANK_TOL), 1);
        assert!(matches!(inverse(&r1), Err(Error::SingularSystem(_))));
        let near = m(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-14]]);
        assert!(matches!(solve(&near, &[1.0, 1.0]), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn lu_solve_and_determinant() {
        let a = m(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let lu = Lu::new(&a).unwrap();
        assert!((lu.determinant() - (-5.0)).abs() < 1e-12);
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let back = a.mul_vec(&x).unwrap();
        for (g, w) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_shape() {
        let a = m(&[&[1.0, 2.0]]);
        let b = Matrix::identity(2);
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (2, 4));
        assert_eq!(k.row_slice(0), &[1.0, 0.0, 2.0, 0.0]);
    }
}
