//! Dense complex kets and square operators.
//!
//! Operators are stored row-major. Multiplication skips zero entries of the
//! left factor, which keeps the permutation-like step operators of the toy
//! models cheap even at a few hundred dimensions.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A state vector. Normalization is checked where it matters, not on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: Vec<C64>,
}

impl Ket {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::DimMismatch {
                expected: 1,
                found: 0,
            });
        }
        Ok(Ket { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Ket::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Unit vector `e_index` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ket { amps }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Ket {
            amps: vec![ZERO; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, eps: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= eps
    }

    pub fn normalized(&self, tol: &Tolerances) -> Result<Ket> {
        let n = self.norm();
        if n <= tol.norm {
            return Err(Error::ZeroVector);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&self, c: C64) -> Ket {
        Ket {
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Ket) -> Operator {
        assert_eq!(self.dim(), other.dim());
        let dim = self.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for a in &self.amps {
            data.extend(other.amps.iter().map(|b| a * b.conj()));
        }
        Operator { dim, data }
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ket { amps }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &Ket {
    type Output = Ket;

    fn add(self, rhs: &Ket) -> Ket {
        assert_eq!(self.dim(), rhs.dim());
        Ket {
            amps: self
                .amps
                .iter()
                .zip(&rhs.amps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Ket {
    type Output = Ket;

    fn sub(self, rhs: &Ket) -> Ket {
        assert_eq!(self.dim(), rhs.dim());
        Ket {
            amps: self
                .amps
                .iter()
                .zip(&rhs.amps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// A dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Operator {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Operator::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = ONE;
        }
        op
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut op = Operator::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            op.data[i * diag.len() + i] = *d;
        }
        op
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(dim >= 1);
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Operator { dim, data }
    }

    /// Row-major entries; `data.len()` must be a nonzero perfect square.
    pub fn from_row_major(data: Vec<C64>) -> Result<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != data.len() {
            return Err(Error::DimMismatch {
                expected: dim.max(1) * dim.max(1),
                found: data.len(),
            });
        }
        Ok(Operator { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend(row);
        }
        Ok(Operator { dim, data })
    }

    /// Builds the operator whose column `j` is `columns(j)`.
    pub fn from_columns(dim: usize, mut columns: impl FnMut(usize) -> Vec<(usize, C64)>) -> Self {
        let mut op = Operator::zeros(dim);
        for j in 0..dim {
            for (i, c) in columns(j) {
                op.data[i * dim + j] += c;
            }
        }
        op
    }

    /// Permutation matrix sending `e_j` to `e_{image(j)}`. Panics when `image`
    /// is not a bijection.
    pub fn permutation(dim: usize, image: impl Fn(usize) -> usize) -> Self {
        let mut hit = vec![false; dim];
        let op = Operator::from_columns(dim, |j| {
            let i = image(j);
            assert!(
                i < dim && !hit[i],
                "column images do not form a permutation"
            );
            hit[i] = true;
            vec![(i, ONE)]
        });
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.dim)
    }

    pub fn column(&self, col: usize) -> Ket {
        Ket {
            amps: (0..self.dim).map(|i| self.get(i, col)).collect(),
        }
    }

    pub fn adjoint(&self) -> Operator {
        Operator::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, c: C64) -> Operator {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    /// Largest entry magnitude, `‖A‖_max`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        check_dim(self.dim, rhs.dim)?;
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in row.iter_mut().zip(&rhs.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        Ok(Operator { dim: n, data: out })
    }

    pub fn apply(&self, k: &Ket) -> Result<Ket> {
        check_dim(self.dim, k.dim())?;
        let amps = self
            .rows()
            .map(|row| {
                row.iter()
                    .zip(&k.amps)
                    .filter(|(a, _)| **a != ZERO)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(Ket { amps })
    }

    pub fn pow(&self, n: u32) -> Operator {
        let mut acc = Operator::identity(self.dim);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn tensor(&self, other: &Operator) -> Operator {
        let (da, db) = (self.dim, other.dim);
        let dim = da * db;
        Operator::from_fn(dim, |r, c| {
            self.get(r / db, c / db) * other.get(r % db, c % db)
        })
    }

    /// `max |A - A†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `max |A†A - I|`.
    pub fn unitary_deviation(&self) -> f64 {
        let prod = &self.adjoint() * self;
        prod.max_abs_diff(&Operator::identity(self.dim))
    }

    pub fn is_hermitian(&self, eps: f64) -> bool {
        self.hermitian_deviation() <= eps
    }

    pub fn is_unitary(&self, eps: f64) -> bool {
        self.unitary_deviation() <= eps
    }

    pub fn check_hermitian(&self, tol: &Tolerances) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > tol.herm {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn check_unitary(&self, tol: &Tolerances) -> Result<()> {
        let deviation = self.unitary_deviation();
        if deviation > tol.unitary {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }
}

impl Mul for &Operator {
    type Output = Operator;

    /// Panics on dimension mismatch; use [`Operator::matmul`] for a fallible product.
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs).expect("operator dimension mismatch")
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|c| format!("{:+.4}{:+.4}i", c.re, c.im))
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Either operand of a tensor product.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Ket(Ket),
    Operator(Operator),
}

impl Factor {
    fn kind(&self) -> &'static str {
        match self {
            Factor::Ket(_) => "ket",
            Factor::Operator(_) => "operator",
        }
    }
}

/// `a ⊗ b` with the first factor as the slow index. Both operands must be the
/// same kind.
pub fn tensor_product(a: &Factor, b: &Factor) -> Result<Factor> {
    match (a, b) {
        (Factor::Ket(x), Factor::Ket(y)) => Ok(Factor::Ket(x.tensor(y))),
        (Factor::Operator(x), Factor::Operator(y)) => Ok(Factor::Operator(x.tensor(y))),
        _ => Err(Error::KindMismatch {
            left: a.kind(),
            right: b.kind(),
        }),
    }
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint()
}

pub fn apply(u: &Operator, k: &Ket) -> Result<Ket> {
    u.apply(k)
}

/// `exp(-i·dt·h)` (ħ = 1) via the eigendecomposition of the Hermitian `h`.
pub fn propagator(h: &Operator, dt: f64, tol: &Tolerances) -> Result<Operator> {
    h.check_hermitian(tol)?;
    let n = h.dim();
    // Feed the exactly Hermitian part to the eigensolver.
    let m = DMatrix::from_fn(n, n, |i, j| (h.get(i, j) + h.get(j, i).conj()) * 0.5);
    let eig = SymmetricEigen::new(m);
    let v = &eig.eigenvectors;
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| C64::new(0.0, -dt * lambda).exp())
        .collect();
    Ok(Operator::from_fn(n, |i, j| {
        (0..n)
            .map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj())
            .sum()
    }))
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn tensor_of_basis_kets() {
        let e0 = Ket::basis(2, 0);
        assert_eq!(e0.tensor(&e0), Ket::basis(4, 0));
        // (m, n) lands at m * dim_b + n.
        assert_eq!(
            Ket::basis(3, 2).tensor(&Ket::basis(5, 1)),
            Ket::basis(15, 11)
        );
    }

    #[test]
    fn tensor_is_bilinear() {
        let plus = Ket::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let got = plus.tensor(&Ket::basis(2, 0));
        let want = Ket::from_real(&[FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0]).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let k = Factor::Ket(Ket::basis(2, 0));
        let o = Factor::Operator(Operator::identity(2));
        assert!(matches!(
            tensor_product(&k, &o),
            Err(Error::KindMismatch { .. })
        ));
        assert!(tensor_product(&o, &o).is_ok());
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(Operator::identity(3).adjoint(), Operator::identity(3));
        let d = Operator::diagonal(&[c(0.0, 1.0), c(0.0, -1.0)]);
        assert_eq!(
            d.adjoint(),
            Operator::diagonal(&[c(0.0, -1.0), c(0.0, 1.0)])
        );
    }

    #[test]
    fn propagator_of_zero_is_identity() {
        let u = propagator(&Operator::zeros(3), 1.0, &Tolerances::default()).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(3)) < 1e-14);
    }

    #[test]
    fn propagator_of_spin_half_z() {
        let h = Operator::diagonal(&[c(0.5, 0.0), c(-0.5, 0.0)]);
        let u = propagator(&h, PI, &Tolerances::default()).unwrap();
        let want = Operator::diagonal(&[c(0.0, -PI / 2.0).exp(), c(0.0, PI / 2.0).exp()]);
        assert!(u.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn propagator_group_inverse() {
        let h = Operator::from_rows(vec![
            vec![c(1.0, 0.0), c(0.3, -0.2)],
            vec![c(0.3, 0.2), c(-0.4, 0.0)],
        ])
        .unwrap();
        let tol = Tolerances::default();
        let fwd = propagator(&h, 0.7, &tol).unwrap();
        let back = propagator(&h, -0.7, &tol).unwrap();
        assert!((&fwd * &back).max_abs_diff(&Operator::identity(2)) < 1e-12);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let h = Operator::from_rows(vec![
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(
            propagator(&h, 1.0, &Tolerances::default()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn apply_checks_dims() {
        let k = Ket::basis(2, 1);
        assert_eq!(apply(&Operator::identity(2), &k).unwrap(), k);
        assert!(matches!(
            apply(&Operator::identity(3), &k),
            Err(Error::DimMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn pow_matches_repeated_product() {
        let p = Operator::permutation(4, |j| (j + 1) % 4);
        assert_eq!(p.pow(4), Operator::identity(4));
        assert_eq!(p.pow(3), &(&p * &p) * &p);
    }

    #[test]
    fn from_row_major_rejects_non_square() {
        assert!(Operator::from_row_major(vec![ONE; 3]).is_err());
        assert_eq!(Operator::from_row_major(vec![ONE; 4]).unwrap().dim(), 2);
    }
}
