//! Dense complex linear algebra: states, operators, density matrices, the
//! Hermitian eigendecomposition, the matrix exponential and fidelity metrics.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tol;

pub type Matrix = DMatrix<C64>;
pub type Vector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > tol::DEFAULT_MAX_DIM {
        return Err(Error::DimensionTooLarge { dim, cap: tol::DEFAULT_MAX_DIM });
    }
    Ok(())
}

fn all_finite<'a>(mut it: impl Iterator<Item = &'a C64>) -> bool {
    it.all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A pure state. Not necessarily normalized; see [`StateVector::normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vector,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        Self::from_vector(Vector::from_vec(amps))
    }

    pub fn from_vector(amps: Vector) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::InvalidState(format!("dimension {} < 2", amps.len())));
        }
        check_dim(amps.len())?;
        if !all_finite(amps.iter()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(StateVector { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, dim });
        }
        let mut v = Vector::zeros(dim);
        v[k] = c(1.0, 0.0);
        Self::from_vector(v)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if n < tol::CONSTRUCTION {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        self.amps.unscale_mut(n);
        Ok(self)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn population(&self, k: usize) -> f64 {
        self.amps[k].norm_sqr()
    }

    /// Distance after removing the best global phase: `min_g |a - e^{ig} b|`.
    pub fn phase_distance(&self, other: &StateVector) -> Result<f64> {
        let ov = other.inner(self)?;
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { c(1.0, 0.0) };
        Ok((&self.amps - &other.amps * phase).norm())
    }
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Square complex matrix with an optional Hermiticity hint.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: Matrix,
    hermitian: bool,
}

impl Operator {
    pub fn new(mat: Matrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), found: mat.ncols() });
        }
        check_dim(mat.nrows())?;
        if !all_finite(mat.iter()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Operator { mat, hermitian: false })
    }

    /// Builds a Hermitian-hinted operator, rejecting inputs whose deviation
    /// from Hermiticity exceeds the construction tolerance.
    pub fn hermitian(mat: Matrix) -> Result<Self> {
        let mut op = Self::new(mat)?;
        let deviation = op.hermitian_deviation();
        if deviation > tol::CONSTRUCTION {
            return Err(Error::NonHermitianInput { deviation });
        }
        op.mat = (&op.mat + op.mat.adjoint()) * c(0.5, 0.0);
        op.hermitian = true;
        Ok(op)
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(Matrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Operator { mat: Matrix::identity(dim, dim), hermitian: true }
    }

    pub fn zeros(dim: usize) -> Self {
        Operator { mat: Matrix::zeros(dim, dim), hermitian: true }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Operator {
            mat: Matrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { C64::default() }),
            hermitian: true,
        }
    }

    /// `|a><b|`
    pub fn outer(a: &StateVector, b: &StateVector) -> Self {
        Operator { mat: a.as_vector() * b.as_vector().adjoint(), hermitian: false }
    }

    pub fn projector(psi: &StateVector) -> Self {
        Operator { mat: psi.as_vector() * psi.as_vector().adjoint(), hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn adjoint(&self) -> Operator {
        Operator { mat: self.mat.adjoint(), hermitian: self.hermitian }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        same_dim(self.dim(), psi.dim())?;
        Ok(StateVector { amps: &self.mat * psi.as_vector() })
    }

    pub fn scaled(&self, s: C64) -> Operator {
        Operator { mat: &self.mat * s, hermitian: self.hermitian && s.im == 0.0 }
    }

    pub fn scaled_re(&self, s: f64) -> Operator {
        self.scaled(c(s, 0.0))
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator { mat: self.mat.kronecker(&other.mat), hermitian: self.hermitian && other.hermitian }
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator { mat: &self.mat * &other.mat - &other.mat * &self.mat, hermitian: false }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.mat.iter().zip(other.mat.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|U^dag U - 1|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.mat.adjoint() * &self.mat;
        let id = Matrix::identity(self.dim(), self.dim());
        p.iter().zip(id.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Principal submatrix on the given indices.
    pub fn restrict(&self, indices: &[usize]) -> Result<Operator> {
        for &k in indices {
            if k >= self.dim() {
                return Err(Error::IndexOutOfRange { index: k, dim: self.dim() });
            }
        }
        let n = indices.len();
        Ok(Operator {
            mat: Matrix::from_fn(n, n, |i, j| self.mat[(indices[i], indices[j])]),
            hermitian: self.hermitian,
        })
    }

    /// Distance to `other` after removing the best global phase.
    pub fn phase_distance(&self, other: &Operator) -> Result<f64> {
        same_dim(self.dim(), other.dim())?;
        let ov = (other.mat.adjoint() * &self.mat).trace();
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { c(1.0, 0.0) };
        Ok(self.max_abs_diff(&Operator { mat: &other.mat * phase, hermitian: false }))
    }

    pub(crate) fn from_parts(mat: Matrix, hermitian: bool) -> Operator {
        Operator { mat, hermitian }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat + &rhs.mat, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat - &rhs.mat, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat * &rhs.mat, hermitian: false }
    }
}

/// Eigenpairs of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Matrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> StateVector {
        StateVector { amps: self.vectors.column(k).into_owned() }
    }
}

pub fn eig_hermitian(op: &Operator) -> Result<Eigen> {
    let deviation = op.hermitian_deviation();
    if deviation > tol::CONSTRUCTION {
        return Err(Error::NonHermitianInput { deviation });
    }
    let sym = (&op.mat + op.mat.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Matrix::from_fn(op.dim(), op.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    Ok(Eigen { values, vectors })
}

/// `exp(scale * op)`.
///
/// Hermitian inputs go through the spectral decomposition, everything else
/// through scaling and squaring with a Padé approximant.
pub fn expm(op: &Operator, scale: C64) -> Result<Operator> {
    let hermitian = op.hermitian || op.hermitian_deviation() <= tol::CONSTRUCTION;
    let mat = if hermitian {
        let eig = eig_hermitian(op)?;
        spectral_exp(&eig, scale)
    } else {
        (&op.mat * scale).exp()
    };
    if !all_finite(mat.iter()) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok(Operator { mat, hermitian: hermitian && scale.im == 0.0 })
}

pub(crate) fn spectral_exp(eig: &Eigen, scale: C64) -> Matrix {
    let v = &eig.vectors;
    let mut scaled = v.clone();
    for (k, &e) in eig.values.iter().enumerate() {
        let f = (scale * e).exp();
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= f);
    }
    scaled * v.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn evolution(h: &Operator, t: f64) -> Result<Operator> {
    expm(h, c(0.0, -t))
}

/// `|Tr(u^dag v)| / dim`.
pub fn op_fidelity(u: &Operator, v: &Operator) -> Result<f64> {
    same_dim(u.dim(), v.dim())?;
    let tr = (u.mat.adjoint() * &v.mat).trace();
    Ok((tr.norm() / u.dim() as f64).min(1.0))
}

/// `|<a|b>|^2`.
pub fn state_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Mixed state; Hermitian, unit trace and positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: Matrix,
}

impl DensityMatrix {
    pub fn new(mat: Matrix) -> Result<Self> {
        let op = Operator::new(mat)?;
        let deviation = op.hermitian_deviation();
        if deviation > tol::CONSTRUCTION {
            return Err(Error::NonHermitianInput { deviation });
        }
        let rho = DensityMatrix { mat: op.mat };
        rho.check_physical(1e-10, 1e-10)?;
        Ok(rho)
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        let psi = psi.clone().normalize()?;
        Ok(DensityMatrix { mat: psi.as_vector() * psi.as_vector().adjoint() })
    }

    pub(crate) fn from_matrix_unchecked(mat: Matrix) -> Self {
        DensityMatrix { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.mat + self.mat.adjoint()) * c(0.5, 0.0);
        SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `<psi|rho|psi>`
    pub fn fidelity_with(&self, psi: &StateVector) -> Result<f64> {
        same_dim(self.dim(), psi.dim())?;
        let v = psi.as_vector();
        Ok((v.adjoint() * &self.mat * v)[(0, 0)].re)
    }

    pub fn population(&self, k: usize) -> f64 {
        self.mat[(k, k)].re
    }

    pub(crate) fn check_physical(&self, trace_tol: f64, positivity_tol: f64) -> Result<()> {
        let tr = self.mat.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::NonPhysicalState(format!("trace {tr}")));
        }
        let herm = Operator { mat: self.mat.clone(), hermitian: false }.hermitian_deviation();
        if herm > trace_tol {
            return Err(Error::NonPhysicalState(format!("Hermiticity deviation {herm:.3e}")));
        }
        let lo = self.min_eigenvalue();
        if lo < -positivity_tol {
            return Err(Error::NonPhysicalState(format!("eigenvalue {lo:.3e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sigma_x() -> Operator {
        Operator::hermitian(Matrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])).unwrap()
    }

    fn sigma_z() -> Operator {
        Operator::diagonal(&[1.0, -1.0])
    }

    #[test]
    fn pauli_spectra() {
        let e = eig_hermitian(&sigma_z()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);

        let e = eig_hermitian(&sigma_x()).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let s = 0.5f64.sqrt();
        let minus = StateVector::from_real(&[s, -s]).unwrap();
        let plus = StateVector::from_real(&[s, s]).unwrap();
        assert!(state_fidelity(&e.vector(0), &minus).unwrap() > 1.0 - 1e-14);
        assert!(state_fidelity(&e.vector(1), &plus).unwrap() > 1.0 - 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(Operator::hermitian(m.clone()), Err(Error::NonHermitianInput { .. })));
        let op = Operator::new(m).unwrap();
        assert!(matches!(eig_hermitian(&op), Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn diagonal_exponential() {
        let u = expm(&sigma_z(), c(0.0, -PI / 2.0)).unwrap();
        assert!((u.entry(0, 0) - c(0.0, -1.0)).norm() < 1e-15);
        assert!((u.entry(1, 1) - c(0.0, 1.0)).norm() < 1e-15);
        assert!(u.entry(0, 1).norm() < 1e-15);
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        for s in [c(1.0, 0.0), c(0.3, -2.0)] {
            let u = expm(&Operator::zeros(3), s).unwrap();
            assert!(u.max_abs_diff(&Operator::identity(3)) < 1e-15);
            let u = expm(&Operator::new(Matrix::zeros(3, 3)).unwrap(), s).unwrap();
            assert!(u.max_abs_diff(&Operator::identity(3)) < 1e-15);
        }
    }

    #[test]
    fn pade_path_matches_spectral_path() {
        let h = sigma_x().kron(&sigma_z());
        let via_eig = expm(&h, c(0.0, -0.7)).unwrap();
        let via_pade = expm(&Operator::new(h.matrix().clone() + Matrix::zeros(4, 4)).unwrap(), c(0.0, -0.7));
        // a non-hinted but Hermitian input still takes the spectral path
        assert!(via_eig.max_abs_diff(&via_pade.unwrap()) < 1e-14);
        let nonherm = Operator::new(Matrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])).unwrap();
        let u = expm(&nonherm, c(2.0, 0.0)).unwrap();
        // nilpotent: exp(2N) = 1 + 2N
        assert!((u.entry(0, 1) - c(2.0, 0.0)).norm() < 1e-14);
        assert!((u.entry(0, 0) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn overflow_is_reported() {
        let h = Operator::diagonal(&[1e3, 0.0]);
        assert!(matches!(expm(&h, c(1.0, 0.0)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn operator_fidelity_cases() {
        let id = Operator::identity(2);
        assert_abs_diff_eq!(op_fidelity(&id, &id).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op_fidelity(&id, &sigma_x()).unwrap(), 0.0, epsilon = 1e-15);
        for theta in [0.0f64, 0.3, 1.2, 2.9] {
            let r = expm(&sigma_z(), c(0.0, -theta)).unwrap();
            assert_abs_diff_eq!(op_fidelity(&id, &r).unwrap(), theta.cos().abs(), epsilon = 1e-14);
        }
        assert!(matches!(op_fidelity(&id, &Operator::identity(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn state_fidelity_cases() {
        let zero = StateVector::basis(2, 0).unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        assert_eq!(state_fidelity(&one, &one).unwrap(), 1.0);
        assert_eq!(state_fidelity(&zero, &one).unwrap(), 0.0);
        for theta in [0.1f64, 0.8, 1.4] {
            let mixed = StateVector::from_real(&[theta.sin(), theta.cos()]).unwrap();
            assert_abs_diff_eq!(state_fidelity(&one, &mixed).unwrap(), theta.cos().powi(2), epsilon = 1e-15);
        }
        let three = StateVector::basis(3, 0).unwrap();
        assert!(matches!(state_fidelity(&zero, &three), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn state_vector_rules() {
        assert!(StateVector::new(vec![c(1.0, 0.0)]).is_err());
        let psi = StateVector::from_real(&[3.0, 4.0]).unwrap().normalize().unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!(StateVector::from_real(&[0.0, 0.0]).unwrap().normalize().is_err());
    }

    #[test]
    fn dimension_cap() {
        assert!(matches!(
            Operator::new(Matrix::zeros(300, 300)),
            Err(Error::DimensionTooLarge { dim: 300, cap: 256 })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
        let bad = Matrix::from_row_slice(2, 2, &[c(1.2, 0.), c(0., 0.), c(0., 0.), c(-0.2, 0.)]);
        assert!(matches!(DensityMatrix::new(bad), Err(Error::NonPhysicalState(_))));
    }
}
