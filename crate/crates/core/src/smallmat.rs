//! Dense small-matrix kernels used while building prolongation weights.
//!
//! Everything here works on row-major `Vec<f64>` storage and is sized for
//! stencil matrices (at most 25x25) plus the tall least-squares systems built
//! from them. Nothing is blocked or vectorised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric square matrix stored densely in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds the matrix from an entry generator. Only the upper triangle is
    /// evaluated; the lower triangle is mirrored so the result is exactly
    /// symmetric.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn try_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j)?;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// Wraps row-major data, checking shape, finiteness and symmetry to
    /// 1e-14 relative to the largest entry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("matrix has non-finite entries".into()));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-14 * scale {
                    return Err(Error::InvalidConfig(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| dot(row, x))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// General dense matrix, used for the tall least-squares systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RectMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect()
    }

    /// `Mᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * yi;
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector belonging to `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let n = a.n();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn cholesky_solve(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has length {}, matrix order is {}",
            b.len(),
            a.n()
        )));
    }
    Ok(Cholesky::factor(a)?.solve(b))
}

/// Least-squares solution together with its residual norm `‖M x − b‖₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    pub residual: f64,
}

/// Minimises `‖M x − b‖₂` with Householder QR.
///
/// A column is treated as dependent when its `|R_jj|` falls below `1e-12`
/// times the largest column norm of `M`.
pub fn lstsq_qr(m: &RectMatrix, b: &[f64]) -> Result<LstsqSolution> {
    let (rows, cols) = (m.rows(), m.cols());
    if b.len() != rows {
        return Err(Error::DimensionMismatch(format!("rhs has length {}, matrix has {rows} rows", b.len())));
    }
    if rows < cols {
        return Err(Error::DimensionMismatch(format!("least squares needs rows >= cols, got {rows}x{cols}")));
    }
    let col_scale = (0..cols)
        .map(|j| (0..rows).map(|i| m.get(i, j).powi(2)).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let tol = 1e-12 * col_scale;

    let mut a = m.clone();
    let mut qtb = b.to_vec();
    let mut v = vec![0.0; rows];
    for k in 0..cols {
        let alpha_norm = (k..rows).map(|i| a.get(i, k).powi(2)).sum::<f64>().sqrt();
        if alpha_norm <= tol {
            return Err(Error::RankDeficient { column: k, diag: alpha_norm });
        }
        let akk = a.get(k, k);
        let alpha = if akk >= 0.0 { -alpha_norm } else { alpha_norm };
        for i in k..rows {
            v[i] = a.get(i, k);
        }
        v[k] -= alpha;
        let vnorm2: f64 = (k..rows).map(|i| v[i] * v[i]).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let s: f64 = (k..rows).map(|i| v[i] * a.get(i, j)).sum();
                let f = 2.0 * s / vnorm2;
                for i in k..rows {
                    a.set(i, j, a.get(i, j) - f * v[i]);
                }
            }
            let s: f64 = (k..rows).map(|i| v[i] * qtb[i]).sum();
            let f = 2.0 * s / vnorm2;
            for i in k..rows {
                qtb[i] -= f * v[i];
            }
        }
    }

    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut s = qtb[k];
        for j in (k + 1)..cols {
            s -= a.get(k, j) * x[j];
        }
        x[k] = s / a.get(k, k);
    }
    let r: Vec<f64> = m.mul_vec(&x).iter().zip(b).map(|(p, q)| p - q).collect();
    Ok(LstsqSolution { residual: norm2(&r), x })
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenSystem> {
    let n = a.n();
    let mut m = a.as_slice().to_vec();
    let mut v = SymMatrix::identity(n).data;
    let scale = a.norm().max(f64::MIN_POSITIVE);

    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[i * n + j] * m[i * n + j];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = off(&m) <= 1e-15 * scale;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&m) <= 1e-15 * scale;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    Ok(EigenSystem { values, vectors })
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function, accurate to a few ulps over the whole real line.
///
/// Uses the all-positive Kummer-type series
/// `erf(x) = 2/√π · e^{-x²} · Σ (2x²)ⁿ x / (1·3···(2n+1))` below |x| = 3,
/// and a Lentz-evaluated continued fraction for `erfc` above it.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let r = if ax < 3.0 {
        erf_series(ax)
    } else if ax < 6.5 {
        1.0 - erfc_cf(ax)
    } else {
        1.0
    };
    r.copysign(x)
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for x ≥ 3 via the continued fraction
/// `√π e^{x²} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_solve(a: &SymMatrix, b: &[f64]) -> Vec<f64> {
        // partial-pivot Gaussian elimination, independent of the Cholesky path
        let n = a.n();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| a.get(i, j)).collect();
                row.push(b[i]);
                row
            })
            .collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            for i in (k + 1)..n {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let x = cholesky_solve(&SymMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let x = cholesky_solve(&SymMatrix::diagonal(&[4.0, 9.0]), &[8.0, 27.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
    }

    #[test]
    fn cholesky_se_kernel_matches_gaussian_elimination() {
        let ell = 12.0f64;
        let pts = [-1.0f64, 0.0, 1.0];
        let k = SymMatrix::from_fn(3, |i, j| (-(pts[i] - pts[j]).powi(2) / (2.0 * ell * ell)).exp());
        let ks: Vec<f64> = pts.iter().map(|p| (-(p - 0.25).powi(2) / (2.0 * ell * ell)).exp()).collect();
        let x = cholesky_solve(&k, &ks).unwrap();
        let oracle = gauss_solve(&k, &ks);
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky_solve(&a, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        let dup = SymMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(cholesky_solve(&dup, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn from_row_major_checks_symmetry() {
        assert!(SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.5, 1.0]).is_err());
        assert!(SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn lstsq_padded_identity() {
        let mut m = RectMatrix::zeros(13, 5);
        for i in 0..5 {
            m.set(i, i, 1.0);
        }
        let gamma = [0.3, -0.2, 0.5, 0.1, 0.3];
        let mut b = vec![0.0; 13];
        b[..5].copy_from_slice(&gamma);
        let sol = lstsq_qr(&m, &b).unwrap();
        for (a, g) in sol.x.iter().zip(&gamma) {
            assert!((a - g).abs() < 1e-15);
        }
        assert!(sol.residual < 1e-15);
    }

    #[test]
    fn lstsq_mean_of_two_observations() {
        let m = RectMatrix::from_row_major(2, 1, vec![1.0, 1.0]).unwrap();
        let sol = lstsq_qr(&m, &[1.0, 3.0]).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-15);
        assert!((sol.residual - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lstsq_rank_deficient() {
        let m = RectMatrix::from_row_major(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(lstsq_qr(&m, &[1.0, 2.0, 3.0]), Err(Error::RankDeficient { column: 1, .. })));
    }

    #[test]
    fn eigen_trivial_cases() {
        let es = sym_eigen(&SymMatrix::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(es.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(es.vectors[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(es.vectors[2], vec![1.0, 0.0, 0.0]);

        let es = sym_eigen(&SymMatrix::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert!((es.values[0] + 1.0).abs() < 1e-15 && (es.values[1] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = &es.vectors[0];
        assert!((v0[0].abs() - h).abs() < 1e-15 && (v0[0] + v0[1]).abs() < 1e-15);
        let v1 = &es.vectors[1];
        assert!((v1[0] - v1[1]).abs() < 1e-15);
    }

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(1.0) - 0.8427007929497149).abs() <= 1e-15);
        for &x in &[0.1, 0.7, 2.9, 3.0, 3.1, 5.0, 7.0] {
            assert_eq!(erf(x), -erf(-x));
        }
        assert_eq!(erf(10.0), 1.0);
    }
}
