//! Dense symmetric linear algebra with explicit tolerances.
//!
//! Every classification (definiteness, rank, kernel) takes a relative
//! tolerance `tol` and compares eigenvalues against `tol * max(1, ‖S‖₂)`.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Default relative tolerance for PSD classification.
pub const PSD_TOL: f64 = 1e-7;
/// Default relative tolerance for numerical rank.
pub const RANK_TOL: f64 = 1e-7;
/// Asymmetry accepted by [`SymMatrix::try_new`] before the input is rejected.
pub const SYM_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_OFF: f64 = 1e-12;

/// Dense real symmetric matrix. The stored entries are exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    ///
    /// # Panics
    /// Panics if `m` is not square or is empty.
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(
            m.is_square() && m.nrows() > 0,
            "symmetric matrix must be square and non-empty"
        );
        let n = m.nrows();
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        SymMatrix { m: s }
    }

    /// Like [`SymMatrix::new`] but rejects inputs whose asymmetry exceeds
    /// `SYM_TOL * max(1, max|m_ij|)`.
    pub fn try_new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Input(format!(
                "matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYM_TOL * scale {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SymMatrix::new(m))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Self {
        SymMatrix::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        SymMatrix::new(DMatrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn diag(d: &[f64]) -> Self {
        SymMatrix {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// `z zᵀ`.
    pub fn outer(z: &DVector<f64>) -> Self {
        SymMatrix::new(z * z.transpose())
    }

    /// `Sym(a bᵀ) = (a bᵀ + b aᵀ)/2`.
    pub fn sym_outer(a: &DVector<f64>, b: &DVector<f64>) -> Self {
        SymMatrix::new(a * b.transpose())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.m.diagonal()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Frobenius inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn spectral_norm(&self) -> f64 {
        let s = eig_sym(self);
        s.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_sym(self).values[0]
    }

    /// `zᵀ S z`.
    pub fn quad(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.m * z))
    }

    pub fn mul_vec(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.m * z
    }

    /// `Pᵀ S P` for a possibly rectangular `P`.
    pub fn congruence(&self, p: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::new(p.transpose() * &self.m * p)
    }

    pub fn scale(&self, a: f64) -> SymMatrix {
        SymMatrix { m: &self.m * a }
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.m[(i, j)].abs() <= tol))
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    /// Σ wᵢ Sᵢ over a non-empty list of equally sized matrices.
    pub fn linear_combination(weights: &[f64], mats: &[SymMatrix]) -> SymMatrix {
        assert_eq!(weights.len(), mats.len());
        assert!(!mats.is_empty());
        let n = mats[0].dim();
        let mut acc = DMatrix::zeros(n, n);
        for (w, m) in weights.iter().zip(mats) {
            acc += &m.m * *w;
        }
        SymMatrix { m: acc }
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

/// Eigen-decomposition with ascending eigenvalues and orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 * ‖S‖_F`. Failing to converge within 100 sweeps is a defect and panics.
pub fn eig_sym(s: &SymMatrix) -> Spectrum {
    let n = s.dim();
    let mut a = s.m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let fro = a.norm();
    if !fro.is_finite() {
        return Spectrum {
            values: DVector::from_element(n, f64::NAN),
            vectors: v,
        };
    }
    let threshold = JACOBI_REL_OFF * fro;
    let mut sweeps = 0;
    loop {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= threshold || off == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            panic!(
                "Jacobi eigensolver exceeded {JACOBI_MAX_SWEEPS} sweeps (off-diagonal norm {})",
                off.sqrt()
            );
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i).into_owned();
        // Sign convention: the largest-magnitude entry is positive.
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(k, &col);
    }
    Spectrum { values, vectors }
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PsdStatus {
    PositiveDefinite,
    PsdSingular,
    Indefinite,
    NsdSingular,
    NegativeDefinite,
    Zero,
}

impl PsdStatus {
    pub fn is_psd(self) -> bool {
        matches!(
            self,
            PsdStatus::PositiveDefinite | PsdStatus::PsdSingular | PsdStatus::Zero
        )
    }
}

pub fn psd_status(s: &SymMatrix, tol: f64) -> PsdStatus {
    psd_status_of(&eig_sym(s), tol)
}

pub fn psd_status_of(spec: &Spectrum, tol: f64) -> PsdStatus {
    let norm = spec.spectral_norm();
    if norm <= tol {
        return PsdStatus::Zero;
    }
    let thr = tol * norm.max(1.0);
    let pos = spec.values.iter().filter(|&&l| l > thr).count();
    let neg = spec.values.iter().filter(|&&l| l < -thr).count();
    let zero = spec.values.len() - pos - neg;
    match (pos > 0, neg > 0, zero > 0) {
        (true, true, _) => PsdStatus::Indefinite,
        (true, false, false) => PsdStatus::PositiveDefinite,
        (true, false, true) => PsdStatus::PsdSingular,
        (false, true, false) => PsdStatus::NegativeDefinite,
        (false, true, true) => PsdStatus::NsdSingular,
        (false, false, _) => PsdStatus::Zero,
    }
}

/// Number of eigenvalues with `|λ| > tol * max(1, ‖S‖₂)`.
pub fn rank_eps(s: &SymMatrix, tol: f64) -> usize {
    let spec = eig_sym(s);
    let thr = tol * spec.spectral_norm().max(1.0);
    spec.values.iter().filter(|l| l.abs() > thr).count()
}

/// Orthonormal basis (as columns) of the eigenvectors with `|λ| ≤ tol * max(1, ‖S‖₂)`.
pub fn kernel_basis(s: &SymMatrix, tol: f64) -> DMatrix<f64> {
    let spec = eig_sym(s);
    let thr = tol * spec.spectral_norm().max(1.0);
    let cols: Vec<DVector<f64>> = (0..s.dim())
        .filter(|&k| spec.values[k].abs() <= thr)
        .map(|k| spec.vector(k))
        .collect();
    columns_to_matrix(s.dim(), &cols)
}

/// Orthonormal basis of the eigenvectors with `|λ| > tol * max(1, ‖S‖₂)`.
pub fn range_basis(s: &SymMatrix, tol: f64) -> DMatrix<f64> {
    let spec = eig_sym(s);
    let thr = tol * spec.spectral_norm().max(1.0);
    let cols: Vec<DVector<f64>> = (0..s.dim())
        .filter(|&k| spec.values[k].abs() > thr)
        .map(|k| spec.vector(k))
        .collect();
    columns_to_matrix(s.dim(), &cols)
}

pub fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        m.set_column(k, c);
    }
    m
}

/// `Σ_k ⟨v, u_k⟩ u_k` for the orthonormal columns `u_k` of `basis`.
pub fn project_onto(v: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return DVector::zeros(v.len());
    }
    basis * (basis.transpose() * v)
}

/// Resultant of `a s² + b s t + c t²` and `d s² + e s t + f t²`.
pub fn binary_quadratic_resultant(q1: (f64, f64, f64), q2: (f64, f64, f64)) -> f64 {
    let (a, b, c) = q1;
    let (d, e, f) = q2;
    (a * f - c * d).powi(2) - (a * e - b * d) * (b * f - c * e)
}

/// Coefficients `(a, b, c)` of `(s p + t q)ᵀ M (s p + t q)`.
pub fn restrict_binary(m: &SymMatrix, p: &DVector<f64>, q: &DVector<f64>) -> (f64, f64, f64) {
    let mq = m.mul_vec(q);
    (m.quad(p), 2.0 * p.dot(&mq), q.dot(&mq))
}

/// Orthonormal basis of the null space of a (possibly rectangular) matrix:
/// right singular vectors whose singular value is `≤ tol * max(1, σ_max)`.
pub fn nullspace(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let mut padded = DMatrix::zeros(r.max(c), c);
    padded.view_mut((0, 0), (r, c)).copy_from(a);
    let svd = nalgebra::SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = tol * smax.max(1.0);
    let cols: Vec<DVector<f64>> = (0..c)
        .filter(|&k| svd.singular_values[k] <= thr)
        .map(|k| vt.row(k).transpose().into_owned())
        .collect();
    columns_to_matrix(c, &cols)
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, dropping eigenvalues
/// below `tol * max(1, ‖S‖₂)`.
pub fn pinv_sym(s: &SymMatrix, tol: f64) -> DMatrix<f64> {
    let spec = eig_sym(s);
    let thr = tol * spec.spectral_norm().max(1.0);
    let inv = spec
        .values
        .map(|l| if l.abs() > thr { 1.0 / l } else { 0.0 });
    &spec.vectors * DMatrix::from_diagonal(&inv) * spec.vectors.transpose()
}

/// Orthonormal basis of the orthogonal complement of the column span of `basis`
/// inside `R^n`.
pub fn orthogonal_complement(n: usize, basis: &DMatrix<f64>) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    nullspace(&basis.transpose(), 1e-10)
}

/// Projection of `s` onto the PSD cone by eigenvalue clipping.
pub fn project_psd(s: &SymMatrix) -> SymMatrix {
    let spec = eig_sym(s);
    let clipped = spec.values.map(|l| l.max(0.0));
    SymMatrix::new(&spec.vectors * DMatrix::from_diagonal(&clipped) * spec.vectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_examples() {
        let s = eig_sym(&SymMatrix::diag(&[1.0, -1.0, 0.0]));
        assert_eq!(s.values.as_slice(), &[-1.0, 0.0, 1.0]);
        let s = eig_sym(&SymMatrix::identity(3));
        assert_eq!(s.values.as_slice(), &[1.0, 1.0, 1.0]);
        let s = eig_sym(&SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]));
        assert!((s.values[0] + 1.0).abs() < 1e-14 && (s.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_matrix() {
        let s = eig_sym(&SymMatrix::diag(&[-3.5]));
        assert_eq!(s.values[0], -3.5);
        assert_eq!(rank_eps(&SymMatrix::diag(&[0.0]), RANK_TOL), 0);
    }

    #[test]
    fn psd_examples() {
        assert_eq!(
            psd_status(&SymMatrix::diag(&[2.0, 1.0]), 1e-9),
            PsdStatus::PositiveDefinite
        );
        assert_eq!(
            psd_status(&SymMatrix::diag(&[1.0, 0.0]), 1e-9),
            PsdStatus::PsdSingular
        );
        assert_eq!(
            psd_status(&SymMatrix::diag(&[1.0, -1.0]), 1e-9),
            PsdStatus::Indefinite
        );
        assert_eq!(
            psd_status(&SymMatrix::diag(&[-1.0, 0.0]), 1e-9),
            PsdStatus::NsdSingular
        );
        assert_eq!(
            psd_status(&SymMatrix::diag(&[-1.0, -2.0]), 1e-9),
            PsdStatus::NegativeDefinite
        );
        assert_eq!(psd_status(&SymMatrix::zeros(3), 1e-9), PsdStatus::Zero);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_eps(&SymMatrix::zeros(3), RANK_TOL), 0);
        assert_eq!(rank_eps(&SymMatrix::diag(&[1.0, -1.0, 0.0]), RANK_TOL), 2);
        let w = DVector::from_vec(vec![-1.0, 0.0, 1.0]);
        let u = DVector::from_vec(vec![1.0, 2f64.sqrt(), 1.0]);
        let z = &SymMatrix::outer(&w) + &SymMatrix::outer(&u);
        assert_eq!(rank_eps(&z, RANK_TOL), 2);
    }

    #[test]
    fn kernel_examples() {
        let k = kernel_basis(&SymMatrix::diag(&[1.0, 0.0]), PSD_TOL);
        assert_eq!(k.ncols(), 1);
        assert!((k[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert_eq!(kernel_basis(&SymMatrix::identity(3), PSD_TOL).ncols(), 0);
        let k = kernel_basis(&SymMatrix::diag(&[0.0, 0.0, 5.0]), PSD_TOL);
        assert_eq!(k.ncols(), 2);
        assert!(k.row(2).norm() < 1e-14);
    }

    #[test]
    fn projection_examples() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let p = project_onto(&DVector::from_vec(vec![1.0, 2.0]), &e1);
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let full = DMatrix::identity(3, 3);
        assert!((project_onto(&v, &full) - &v).norm() < 1e-15);
        let empty = DMatrix::zeros(3, 0);
        assert_eq!(
            project_onto(&DVector::from_element(3, 1.0), &empty).norm(),
            0.0
        );
    }

    #[test]
    fn resultant_examples() {
        assert_eq!(
            binary_quadratic_resultant((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
            1.0
        );
        assert_eq!(
            binary_quadratic_resultant((1.0, 0.0, -1.0), (1.0, 0.0, -1.0)),
            0.0
        );
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::diag(&[0.0, 1.0, -1.0]);
        let w = DVector::from_vec(vec![-1.0, 0.0, 1.0]);
        let u = DVector::from_vec(vec![1.0, 2f64.sqrt(), 1.0]);
        let r =
            binary_quadratic_resultant(restrict_binary(&m1, &w, &u), restrict_binary(&m2, &w, &u));
        assert!(r.abs() > 1e-3);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = nullspace(&a, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!((&a * &k).norm() < 1e-14);
    }

    #[test]
    fn try_new_rejects_asymmetric() {
        assert!(SymMatrix::try_new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0])).is_err());
        assert!(SymMatrix::try_new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_ok());
    }
}
