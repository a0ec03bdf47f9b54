//! Dense complex linear algebra for 2×2 and 3×3 spin operators.
//!
//! Everything here works on fixed-size stack storage; the only dimensions
//! ever needed are a qubit (spin-1/2) and a qutrit (spin-1). Hamiltonians are
//! expressed in angular frequency units (ħ = 1), so `exp(-i H t)` takes `t` in
//! seconds directly.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Numeric tolerances shared by every contract check in the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericPolicy {
    /// Maximum entrywise |M - M†| (relative to max |M|, or absolute below 1)
    /// for a matrix to count as Hermitian.
    pub hermitian_tol: f64,
    /// Maximum entrywise |U†U - I| for a propagator.
    pub unitary_tol: f64,
    /// Allowed deviation of ‖ψ‖₂ from one.
    pub norm_tol: f64,
    /// Largest imaginary residue tolerated in an expectation value.
    pub imag_tol: f64,
}

impl NumericPolicy {
    pub const DEFAULT: NumericPolicy = NumericPolicy {
        hermitian_tol: 1e-12,
        unitary_tol: 1e-10,
        norm_tol: 1e-10,
        imag_tol: 1e-12,
    };
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Half,
    One,
}

impl Spin {
    pub fn dim(self) -> usize {
        match self {
            Spin::Half => 2,
            Spin::One => 3,
        }
    }

    /// s(s+1)
    pub fn casimir(self) -> f64 {
        match self {
            Spin::Half => 0.75,
            Spin::One => 2.0,
        }
    }
}

/// A 2×2 or 3×3 complex matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct SpinMatrix {
    dim: usize,
    m: [[C64; 3]; 3],
}

fn check_dim(dim: usize) {
    assert!(dim == 2 || dim == 3, "spin matrices are 2x2 or 3x3, got {dim}");
}

impl SpinMatrix {
    pub fn zeros(dim: usize) -> Self {
        check_dim(dim);
        SpinMatrix {
            dim,
            m: [[ZERO; 3]; 3],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = ONE;
        }
        out
    }

    /// Builds a matrix from row slices. Panics if the rows are not square of size 2 or 3.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut out = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            out.m[i][..dim].copy_from_slice(row);
        }
        out
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut out = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            for (j, &x) in row.iter().enumerate() {
                out.m[i][j] = C64::new(x, 0.0);
            }
        }
        out
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut out = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            out.m[i][i] = C64::new(d, 0.0);
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j] = value;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut().take(self.dim) {
            for x in row.iter_mut().take(self.dim) {
                *x *= s;
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise |self - other|.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol * self.max_abs().max(1.0)
    }

    /// max |U†U - I|
    pub fn unitarity_error(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        assert_eq!(self.dim, psi.dim, "matrix/state dimension mismatch");
        let mut out = [ZERO; 3];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for j in 0..self.dim {
                acc += self.m[i][j] * psi.amps[j];
            }
            *o = acc;
        }
        StateVector {
            dim: self.dim,
            amps: out,
        }
    }

    fn entries(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.dim).flat_map(move |i| (0..self.dim).map(move |j| self.m[i][j]))
    }
}

impl fmt::Debug for SpinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SpinMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = self.m[i][j];
                write!(f, " {:+.6e}{:+.6e}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

impl Add for SpinMatrix {
    type Output = SpinMatrix;
    fn add(mut self, rhs: SpinMatrix) -> SpinMatrix {
        assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.m[i][j] += rhs.m[i][j];
            }
        }
        self
    }
}

impl Sub for SpinMatrix {
    type Output = SpinMatrix;
    fn sub(self, rhs: SpinMatrix) -> SpinMatrix {
        self + (-rhs)
    }
}

impl Neg for SpinMatrix {
    type Output = SpinMatrix;
    fn neg(self) -> SpinMatrix {
        self.scale(-ONE)
    }
}

impl Mul for SpinMatrix {
    type Output = SpinMatrix;
    fn mul(self, rhs: SpinMatrix) -> SpinMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = SpinMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.m[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.m[i][j] += a * rhs.m[k][j];
                }
            }
        }
        out
    }
}

impl Mul<f64> for SpinMatrix {
    type Output = SpinMatrix;
    fn mul(self, rhs: f64) -> SpinMatrix {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<SpinMatrix> for f64 {
    type Output = SpinMatrix;
    fn mul(self, rhs: SpinMatrix) -> SpinMatrix {
        rhs * self
    }
}

/// A ket in a 2- or 3-dimensional Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector {
    dim: usize,
    amps: [C64; 3],
}

impl StateVector {
    /// Builds a state from amplitudes; fails unless the vector is normalized
    /// to within the default norm tolerance.
    pub fn new(amplitudes: &[C64]) -> Result<Self> {
        let psi = Self::from_amplitudes_unchecked(amplitudes);
        let norm = psi.norm();
        if (norm - 1.0).abs() > NumericPolicy::DEFAULT.norm_tol {
            return Err(Error::Precondition(format!(
                "state vector norm is {norm}, expected 1"
            )));
        }
        Ok(psi)
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(amplitudes: &[C64]) -> Result<Self> {
        let psi = Self::from_amplitudes_unchecked(amplitudes);
        let norm = psi.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Precondition("cannot normalize a zero vector".into()));
        }
        Ok(psi.scaled(1.0 / norm))
    }

    pub(crate) fn from_amplitudes_unchecked(amplitudes: &[C64]) -> Self {
        let dim = amplitudes.len();
        check_dim(dim);
        let mut amps = [ZERO; 3];
        amps[..dim].copy_from_slice(amplitudes);
        StateVector { dim, amps }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        check_dim(dim);
        assert!(index < dim);
        let mut amps = [ZERO; 3];
        amps[index] = ONE;
        StateVector { dim, amps }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps[..self.dim]
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.amps[i]
    }

    pub fn population(&self, i: usize) -> f64 {
        self.amps[i].norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes()
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn scaled(mut self, s: f64) -> Self {
        for a in self.amps.iter_mut() {
            *a *= s;
        }
        self
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(self
            .amplitudes()
            .iter()
            .zip(other.amplitudes())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// Angular-momentum matrices (Sx, Sy, Sz) in the eigenbasis of Sz ordered by
/// descending m (`|+1/2⟩, |-1/2⟩` or `|+1⟩, |0⟩, |-1⟩`).
pub fn spin_operators(spin: Spin) -> (SpinMatrix, SpinMatrix, SpinMatrix) {
    let i = C64::new(0.0, 1.0);
    match spin {
        Spin::Half => {
            let h = C64::new(0.5, 0.0);
            let sx = SpinMatrix::from_rows(&[&[ZERO, h], &[h, ZERO]]);
            let sy = SpinMatrix::from_rows(&[&[ZERO, -i * 0.5], &[i * 0.5, ZERO]]);
            let sz = SpinMatrix::diagonal(&[0.5, -0.5]);
            (sx, sy, sz)
        }
        Spin::One => {
            let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let ri = i * std::f64::consts::FRAC_1_SQRT_2;
            let sx = SpinMatrix::from_rows(&[&[ZERO, r, ZERO], &[r, ZERO, r], &[ZERO, r, ZERO]]);
            let sy = SpinMatrix::from_rows(&[
                &[ZERO, -ri, ZERO],
                &[ri, ZERO, -ri],
                &[ZERO, ri, ZERO],
            ]);
            let sz = SpinMatrix::diagonal(&[1.0, 0.0, -1.0]);
            (sx, sy, sz)
        }
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues and a unitary whose columns are the
/// corresponding eigenvectors. The input is assumed Hermitian.
pub fn hermitian_eigen(h: &SpinMatrix) -> ([f64; 3], SpinMatrix) {
    let n = h.dim;
    let mut a = h.m;
    let mut v = SpinMatrix::identity(n).m;

    let scale: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| a[i][j].norm_sqr())
        .sum();

    for _sweep in 0..32 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q].norm_sqr();
            }
        }
        if off <= 1e-34 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let theta = (a[q][q].re - a[p][p].re) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = diag(1, e^{-iφ}) restricted to (p, q), followed by a real rotation.
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;

                // a <- a J
                for row in a.iter_mut().take(n) {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = akp * jpp + akq * jqp;
                    row[q] = akp * jpq + akq * jqq;
                }
                // a <- J† a
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q][k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[p][q] = ZERO;
                a[q][p] = ZERO;
                a[p][p].im = 0.0;
                a[q][q].im = 0.0;
                // v <- v J
                for row in v.iter_mut().take(n) {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = vkp * jpp + vkq * jqp;
                    row[q] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut values = [0.0; 3];
    for (i, val) in values.iter_mut().enumerate().take(n) {
        *val = a[i][i].re;
    }
    (values, SpinMatrix { dim: n, m: v })
}

/// Eigenvalues sorted ascending.
pub fn eigenvalues(h: &SpinMatrix) -> Vec<f64> {
    let (vals, _) = hermitian_eigen(h);
    let mut out = vals[..h.dim].to_vec();
    out.sort_by(f64::total_cmp);
    out
}

/// `exp(-i H t)` for a Hermitian `H`.
///
/// 2×2 generators use the closed form `e^{-i h₀ t}[cos(|h|t) I - i sin(|h|t) n̂·σ]`;
/// 3×3 generators go through [`hermitian_eigen`]. Neither involves a series
/// truncation, so long products stay unitary to rounding.
pub fn matexp_antihermitian(h: &SpinMatrix, t: f64) -> Result<SpinMatrix> {
    matexp_antihermitian_with(h, t, &NumericPolicy::DEFAULT)
}

pub fn matexp_antihermitian_with(
    h: &SpinMatrix,
    t: f64,
    policy: &NumericPolicy,
) -> Result<SpinMatrix> {
    let dev = h.hermiticity_error();
    if dev > policy.hermitian_tol * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(propagator(h, t))
}

/// Unchecked `exp(-i H t)`; callers guarantee Hermiticity.
#[inline]
pub(crate) fn propagator(h: &SpinMatrix, t: f64) -> SpinMatrix {
    match h.dim {
        2 => propagator_2(h, t),
        _ => propagator_eigen(h, t),
    }
}

fn propagator_2(h: &SpinMatrix, t: f64) -> SpinMatrix {
    let a = h.m[0][0].re;
    let d = h.m[1][1].re;
    let b = h.m[0][1];
    let h0 = 0.5 * (a + d);
    // H = h0 I + hx σx + hy σy + hz σz
    let hz = 0.5 * (a - d);
    let hx = b.re;
    let hy = -b.im;
    exp_pauli(h0, hx, hy, hz, t)
}

/// exp(-i t (h0 I + hx σx + hy σy + hz σz))
#[inline]
pub(crate) fn exp_pauli(h0: f64, hx: f64, hy: f64, hz: f64, t: f64) -> SpinMatrix {
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let angle = norm * t;
    let (s, c) = angle.sin_cos();
    // sin(|h| t)/|h|, finite as |h| -> 0
    let sinc_t = if norm * t.abs() < 1e-8 {
        t * (1.0 - angle * angle / 6.0)
    } else {
        s / norm
    };
    let phase = C64::from_polar(1.0, -h0 * t);
    let i = C64::new(0.0, 1.0);
    let m00 = C64::new(c, 0.0) - i * (hz * sinc_t);
    let m11 = C64::new(c, 0.0) + i * (hz * sinc_t);
    // -i (hx σx + hy σy) off-diagonals: σx+... [0, hx - i hy; hx + i hy, 0]
    let m01 = -i * C64::new(hx, -hy) * sinc_t;
    let m10 = -i * C64::new(hx, hy) * sinc_t;
    let mut out = SpinMatrix::zeros(2);
    out.m[0][0] = phase * m00;
    out.m[0][1] = phase * m01;
    out.m[1][0] = phase * m10;
    out.m[1][1] = phase * m11;
    out
}

fn propagator_eigen(h: &SpinMatrix, t: f64) -> SpinMatrix {
    let n = h.dim;
    let (vals, v) = hermitian_eigen(h);
    let mut phases = [ZERO; 3];
    for k in 0..n {
        phases[k] = C64::from_polar(1.0, -vals[k] * t);
    }
    let mut out = SpinMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for (k, ph) in phases.iter().enumerate().take(n) {
                acc += v.m[i][k] * *ph * v.m[j][k].conj();
            }
            out.m[i][j] = acc;
        }
    }
    out
}

/// Real ⟨ψ|H|ψ⟩.
pub fn expectation(h: &SpinMatrix, psi: &StateVector) -> Result<f64> {
    if h.dim != psi.dim {
        return Err(Error::DimensionMismatch {
            expected: h.dim,
            found: psi.dim,
        });
    }
    let value = psi.inner(&h.apply(psi))?;
    let scale = h.max_abs().max(1.0);
    if value.im.abs() > NumericPolicy::DEFAULT.imag_tol * scale {
        return Err(Error::NotHermitian {
            deviation: value.im.abs(),
        });
    }
    Ok(value.re)
}

/// |⟨a|b⟩|²
pub fn overlap_probability(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}
