//! Dense matrix kernels shared by the rest of the crate.
//!
//! Everything here is deterministic: reductions run in a fixed sequential
//! order, so identical inputs give bit-identical outputs.

use std::ops::Deref;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{MlzError, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative asymmetry accepted by [`RealSymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Real symmetric square matrix. Symmetry is checked once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSymMatrix(DMatrix<f64>);

impl RealSymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(MlzError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let (asymmetry, scale) = asymmetry(&m);
        if asymmetry >= SYMMETRY_TOL * scale && asymmetry > 0.0 {
            return Err(MlzError::NotSymmetric { asymmetry, scale });
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(MlzError::DimensionMismatch(format!(
                "expected {n} rows of length {n}"
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Sets both `(a, b)` and `(b, a)`.
    pub fn set_sym(&mut self, a: usize, b: usize, value: f64) {
        self.0[(a, b)] = value;
        self.0[(b, a)] = value;
    }

    /// Adds `value` to `(a, b)` and, off the diagonal, to `(b, a)`.
    pub fn add_sym(&mut self, a: usize, b: usize, value: f64) {
        self.0[(a, b)] += value;
        if a != b {
            self.0[(b, a)] += value;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn plus(&self, other: &RealSymMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl Serialize for RealSymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RealSymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

impl Deref for RealSymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Returns `(max |m_ab - m_ba|, max |m_ab|)`.
fn asymmetry(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m[(i, j)].abs());
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    (worst, scale)
}

/// `XY - YX`.
pub fn commutator<T>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField + Copy,
{
    if !x.is_square() || x.shape() != y.shape() {
        return Err(MlzError::DimensionMismatch(format!(
            "commutator of {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(x * y - y * x)
}

pub fn frobenius_norm<T>(x: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64> + Copy,
{
    let mut acc = 0.0;
    for v in x.iter() {
        acc += v.modulus_squared();
    }
    acc.sqrt()
}

/// Largest entry modulus.
pub fn max_abs<T>(x: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64> + Copy,
{
    x.iter().fold(0.0, |m, v| m.max(v.modulus()))
}

/// `‖U†U − I‖_F`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u;
    frobenius_norm(&(g - ComplexMatrix::identity(n, n)))
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`; the largest-magnitude component
    /// (first one on ties) of every column is positive.
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * d * self.vectors.transpose()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-14;

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
pub fn sym_eigen(s: &RealSymMatrix) -> EigenDecomposition {
    let n = s.dim();
    let mut a = s.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = frobenius_norm(&a);

    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&a) <= JACOBI_OFF_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut best = 0;
        for r in 0..n {
            if v[(r, src)].abs() > v[(best, src)].abs() {
                best = r;
            }
        }
        let sign = if v[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, col)] = sign * v[(r, src)];
        }
    }
    EigenDecomposition { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(s: &RealSymMatrix) -> Vec<f64> {
    sym_eigen(s).values
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            acc += 2.0 * a[(p, q)] * a[(p, q)];
        }
    }
    acc.sqrt()
}

fn jacobi_rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LinearSolveResult {
    /// Minimum-norm least-squares solution.
    pub particular: DVector<f64>,
    /// Orthonormal basis of the numerical nullspace.
    pub nullspace: Vec<DVector<f64>>,
    /// `‖M·particular − b‖`.
    pub residual: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Least-squares solve with nullspace, via one-sided Jacobi SVD.
///
/// Singular directions with `σ <= tol · σ_max` are treated as null.
pub fn solve_linear(m: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<LinearSolveResult> {
    if !(tol > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if m.ncols() == 0 {
        return Err(MlzError::DimensionMismatch("matrix has no columns".into()));
    }
    if m.nrows() != b.len() {
        return Err(MlzError::DimensionMismatch(format!(
            "matrix has {} rows but rhs has {} entries",
            m.nrows(),
            b.len()
        )));
    }

    let (u, v) = one_sided_jacobi(m);
    let ncols = m.ncols();
    let sigma: Vec<f64> = (0..ncols).map(|j| column_norm(&u, j)).collect();
    let mut order: Vec<usize> = (0..ncols).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));

    let sigma_max = sigma[order[0]];
    let threshold = tol * sigma_max;
    let mut particular = DVector::<f64>::zeros(ncols);
    let mut nullspace = Vec::new();
    let mut rank = 0;
    for &j in &order {
        if sigma_max > 0.0 && sigma[j] > threshold {
            rank += 1;
            let mut proj = 0.0;
            for r in 0..u.nrows() {
                proj += u[(r, j)] * b[r];
            }
            let coef = proj / (sigma[j] * sigma[j]);
            for r in 0..ncols {
                particular[r] += coef * v[(r, j)];
            }
        } else {
            nullspace.push(v.column(j).into_owned());
        }
    }

    let mut residual = 0.0;
    for r in 0..m.nrows() {
        let mut acc = -b[r];
        for c in 0..ncols {
            acc += m[(r, c)] * particular[c];
        }
        residual += acc * acc;
    }

    Ok(LinearSolveResult {
        particular,
        nullspace,
        residual: residual.sqrt(),
        singular_values: order.iter().map(|&j| sigma[j]).collect(),
        rank,
    })
}

fn column_norm(u: &DMatrix<f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for r in 0..u.nrows() {
        acc += u[(r, j)] * u[(r, j)];
    }
    acc.sqrt()
}

const SVD_MAX_SWEEPS: usize = 80;
const SVD_ORTHO_TOL: f64 = 1e-15;

/// Returns `(U·Σ, V)` with mutually orthogonal columns in the first factor.
fn one_sided_jacobi(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let rows = m.nrows();
    let n = m.ncols();
    let mut u = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..rows {
                    let up = u[(r, p)];
                    let uq = u[(r, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == 0.0 || gamma.abs() <= SVD_ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let up = u[(r, p)];
                    let uq = u[(r, q)];
                    u[(r, p)] = c * up - s * uq;
                    u[(r, q)] = s * up + c * uq;
                }
                for r in 0..n {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (u, v)
}
