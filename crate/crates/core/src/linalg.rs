//! Dense Hermitian algebra for one- and two-qubit operators.
//!
//! Everything here works on fixed 2x2 or 4x4 storage. Pauli tensor
//! decompositions use the normalization `c_mu = Tr(H sigma_mu) / 2` for a
//! qubit and `c_{mu nu} = Tr(H sigma_mu (x) sigma_nu) / 4` for two qubits, so
//! that `H = sum c sigma`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A Hermitian matrix of dimension 2 or 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct HermitianMatrix {
    dim: usize,
    data: [[C64; 4]; 4],
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<HermitianMatrix> for MatrixRepr {
    fn from(m: HermitianMatrix) -> Self {
        let d = m.dim;
        MatrixRepr {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| m.data[i][j].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m.data[i][j].im).collect()).collect(),
        }
    }
}

impl TryFrom<MatrixRepr> for HermitianMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let d = r.dim;
        if r.re.len() != d || r.im.len() != d {
            return Err(Error::InvalidInput("matrix row count does not match dim".into()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for (row_re, row_im) in r.re.iter().zip(&r.im) {
            if row_re.len() != d || row_im.len() != d {
                return Err(Error::InvalidInput("matrix column count does not match dim".into()));
            }
            entries.extend(row_re.iter().zip(row_im).map(|(&a, &b)| C64::new(a, b)));
        }
        HermitianMatrix::new(d, &entries)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("dimension must be 2 or 4, got {dim}")))
    }
}

impl HermitianMatrix {
    /// Builds a matrix from row-major entries, rejecting non-Hermitian input.
    ///
    /// Diagonal imaginary parts and the antisymmetric residue below
    /// [`HERMITICITY_TOL`] are projected away.
    pub fn new(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let mut data = [[ZERO; 4]; 4];
        for i in 0..dim {
            for j in 0..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::InvalidInput("non-finite matrix entry".into()));
                }
                if (a - b).norm() > HERMITICITY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not Hermitian at ({i}, {j}): {a} vs conj {b}"
                    )));
                }
                data[i][j] = (a + b) * 0.5;
            }
        }
        Ok(HermitianMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let entries: Vec<C64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), &entries)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(HermitianMatrix { dim, data: [[ZERO; 4]; 4] })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.data[i][i] = ONE;
        }
        Ok(m)
    }

    /// Rank-one projector onto the normalized version of `v`.
    pub fn projector(v: &[C64]) -> Result<Self> {
        let dim = v.len();
        check_dim(dim)?;
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= f64::EPSILON {
            return Err(Error::InvalidInput("cannot project onto the zero vector".into()));
        }
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m.data[i][j] = v[i] * v[j].conj() / (norm * norm);
            }
        }
        Ok(m)
    }

    /// The single-qubit Pauli matrix `sigma_k`, `k = 0` being the identity.
    pub fn pauli(k: usize) -> Self {
        assert!(k < 4, "Pauli index out of range");
        let mut coeffs = [0.0; 16];
        coeffs[k] = 1.0;
        pauli_compose(&PauliCoefficients { order: 1, coeffs })
    }

    /// `sigma_mu (x) sigma_nu`.
    pub fn pauli_pair(mu: usize, nu: usize) -> Self {
        assert!(mu < 4 && nu < 4, "Pauli index out of range");
        let mut coeffs = [0.0; 16];
        coeffs[4 * mu + nu] = 1.0;
        pauli_compose(&PauliCoefficients { order: 2, coeffs })
    }

    /// Kronecker product of two single-qubit operators.
    pub fn kron(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<Self> {
        if a.dim != 2 || b.dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: a.dim.max(b.dim) });
        }
        let mut m = Self::zeros(4)?;
        for (i, j, k, l) in (0..16).map(|n| (n >> 3 & 1, n >> 2 & 1, n >> 1 & 1, n & 1)) {
            m.data[2 * i + k][2 * j + l] = a.data[i][j] * b.data[k][l];
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.data[i][j]
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<C64> {
        (0..self.dim)
            .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
            .map(|(i, j)| self.data[i][j])
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i][i].re).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.data.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        m
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.data[i][j] - other.data[i][j]).norm());
            }
        }
        worst
    }

    /// Expectation value `<v|H|v>` (real part).
    pub fn expectation(&self, v: &[C64]) -> f64 {
        assert_eq!(v.len(), self.dim);
        let mut acc = ZERO;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += v[i].conj() * self.data[i][j] * v[j];
            }
        }
        acc.re
    }

    fn zip_with(&self, other: &HermitianMatrix, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i][j] = f(self.data[i][j], other.data[i][j]);
            }
        }
        Ok(m)
    }

    pub fn try_add(&self, other: &HermitianMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &HermitianMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }
}

impl Add for HermitianMatrix {
    type Output = HermitianMatrix;

    /// Panics on mismatched dimensions; use [`HermitianMatrix::try_add`] otherwise.
    fn add(self, rhs: Self) -> Self {
        self.try_add(&rhs).expect("dimension mismatch in matrix addition")
    }
}

impl Sub for HermitianMatrix {
    type Output = HermitianMatrix;

    fn sub(self, rhs: Self) -> Self {
        self.try_sub(&rhs).expect("dimension mismatch in matrix subtraction")
    }
}

impl Mul<f64> for HermitianMatrix {
    type Output = HermitianMatrix;

    fn mul(self, rhs: f64) -> Self {
        self.scaled(rhs)
    }
}

/// Real expansion coefficients in the (tensor) Pauli basis.
///
/// For `order == 1` only the first four slots are used, indexed by
/// `mu` in `{0: identity, 1: x, 2: y, 3: z}`. For `order == 2` slot `4 mu + nu`
/// holds the coefficient of `sigma_mu (x) sigma_nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliCoefficients {
    pub order: u8,
    pub coeffs: [f64; 16],
}

impl PauliCoefficients {
    pub fn single(c: [f64; 4]) -> Self {
        let mut coeffs = [0.0; 16];
        coeffs[..4].copy_from_slice(&c);
        PauliCoefficients { order: 1, coeffs }
    }

    pub fn pair(coeffs: [f64; 16]) -> Self {
        PauliCoefficients { order: 2, coeffs }
    }

    pub fn len(&self) -> usize {
        if self.order == 1 {
            4
        } else {
            16
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs[..self.len()]
    }

    pub fn dim(&self) -> usize {
        if self.order == 1 {
            2
        } else {
            4
        }
    }
}

/// Column index of the single nonzero entry in row `r` of `sigma_mu`, and its value.
#[inline]
fn pauli_entry(mu: usize, r: usize) -> (usize, C64) {
    match mu {
        0 => (r, ONE),
        1 => (r ^ 1, ONE),
        2 => (r ^ 1, if r == 0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) }),
        _ => (r, if r == 0 { ONE } else { -ONE }),
    }
}

/// Column and value of the nonzero entry in row `r` of `sigma_mu (x) sigma_nu`.
#[inline]
fn pauli_pair_entry(mu: usize, nu: usize, r: usize) -> (usize, C64) {
    let (ca, va) = pauli_entry(mu, r >> 1);
    let (cb, vb) = pauli_entry(nu, r & 1);
    (2 * ca + cb, va * vb)
}

/// Expands a Hermitian matrix in the Pauli basis.
pub fn pauli_decompose(h: &HermitianMatrix) -> PauliCoefficients {
    let mut coeffs = [0.0; 16];
    match h.dim {
        2 => {
            for (mu, c) in coeffs.iter_mut().take(4).enumerate() {
                // Tr(H S) = sum_k H[col(k)][k] S[k][col(k)]
                let mut acc = ZERO;
                for k in 0..2 {
                    let (col, v) = pauli_entry(mu, k);
                    acc += h.data[col][k] * v;
                }
                *c = acc.re / 2.0;
            }
            PauliCoefficients { order: 1, coeffs }
        }
        _ => {
            for (idx, c) in coeffs.iter_mut().enumerate() {
                let mut acc = ZERO;
                for k in 0..4 {
                    let (col, v) = pauli_pair_entry(idx / 4, idx % 4, k);
                    acc += h.data[col][k] * v;
                }
                *c = acc.re / 4.0;
            }
            PauliCoefficients { order: 2, coeffs }
        }
    }
}

/// Inverse of [`pauli_decompose`].
pub fn pauli_compose(c: &PauliCoefficients) -> HermitianMatrix {
    let mut data = [[ZERO; 4]; 4];
    if c.order == 1 {
        for mu in 0..4 {
            let w = c.coeffs[mu];
            if w == 0.0 {
                continue;
            }
            for r in 0..2 {
                let (col, v) = pauli_entry(mu, r);
                data[r][col] += v * w;
            }
        }
        HermitianMatrix { dim: 2, data }
    } else {
        for (idx, &w) in c.coeffs.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for r in 0..4 {
                let (col, v) = pauli_pair_entry(idx / 4, idx % 4, r);
                data[r][col] += v * w;
            }
        }
        HermitianMatrix { dim: 4, data }
    }
}

/// Eigenvalues of `h` in ascending order.
pub fn eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    match h.dim {
        2 => {
            let a = h.data[0][0].re;
            let d = h.data[1][1].re;
            let half_gap = ((a - d) / 2.0).hypot(h.data[0][1].norm());
            let mid = (a + d) / 2.0;
            vec![mid - half_gap, mid + half_gap]
        }
        _ => {
            let mut ev = jacobi_eigenvalues(h.data);
            ev.sort_by(f64::total_cmp);
            ev.to_vec()
        }
    }
}

/// Sum of the absolute eigenvalues.
pub fn trace_norm(h: &HermitianMatrix) -> f64 {
    match h.dim {
        2 => eigenvalues(h).iter().map(|x| x.abs()).sum(),
        _ => jacobi_eigenvalues(h.data).iter().map(|x| x.abs()).sum(),
    }
}

/// Cyclic Jacobi diagonalization of a small Hermitian matrix; eigenvalues only,
/// unsorted.
pub fn jacobi_eigenvalues<const N: usize>(a: [[C64; N]; N]) -> [f64; N] {
    jacobi::<N, false>(a).0
}

/// Eigenvalues (unsorted) and eigenvectors; column `k` of the returned matrix
/// is the eigenvector of eigenvalue `k`.
pub fn jacobi_eigh<const N: usize>(a: [[C64; N]; N]) -> ([f64; N], [[C64; N]; N]) {
    jacobi::<N, true>(a)
}

/// Each rotation first rotates the phase of `a[p][q]` onto the real axis and
/// then applies the real symmetric Jacobi rotation.
fn jacobi<const N: usize, const VECTORS: bool>(mut a: [[C64; N]; N]) -> ([f64; N], [[C64; N]; N]) {
    let mut v = [[ZERO; N]; N];
    if VECTORS {
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = ONE;
        }
    }
    let frob: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum();
    if frob == 0.0 {
        return ([0.0; N], v);
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..N {
            for q in p + 1..N {
                off += a[p][q].norm_sqr();
            }
        }
        if off <= 1e-32 * frob {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                let apq = a[p][q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                for row in a.iter_mut() {
                    row[q] *= phase.conj();
                }
                for z in a[q].iter_mut() {
                    *z *= phase;
                }
                if VECTORS {
                    for row in v.iter_mut() {
                        row[q] *= phase.conj();
                    }
                }
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = kp * c - kq * s;
                    row[q] = kp * s + kq * c;
                }
                for k in 0..N {
                    let (pk, qk) = (a[p][k], a[q][k]);
                    a[p][k] = pk * c - qk * s;
                    a[q][k] = pk * s + qk * c;
                }
                if VECTORS {
                    for row in v.iter_mut() {
                        let (kp, kq) = (row[p], row[q]);
                        row[p] = kp * c - kq * s;
                        row[q] = kp * s + kq * c;
                    }
                }
                a[p][q] = ZERO;
                a[q][p] = ZERO;
                a[p][p].im = 0.0;
                a[q][q].im = 0.0;
            }
        }
    }
    let mut out = [0.0; N];
    for (i, x) in out.iter_mut().enumerate() {
        *x = a[i][i].re;
    }
    (out, v)
}

/// Splits `h = pos - neg` into positive semidefinite parts with orthogonal supports.
pub fn jordan_decomposition(h: &HermitianMatrix) -> (HermitianMatrix, HermitianMatrix) {
    let d = h.dim;
    let (vals, vecs) = jacobi_eigh(h.data);
    let mut pos = [[ZERO; 4]; 4];
    let mut neg = [[ZERO; 4]; 4];
    for k in 0..d {
        let target = if vals[k] > 0.0 { &mut pos } else { &mut neg };
        let w = vals[k].abs();
        for i in 0..d {
            for j in 0..d {
                target[i][j] += vecs[i][k] * vecs[j][k].conj() * w;
            }
        }
    }
    let herm = |data: [[C64; 4]; 4]| {
        let mut m = HermitianMatrix { dim: d, data };
        for i in 0..d {
            m.data[i][i].im = 0.0;
            for j in i + 1..d {
                let z = (m.data[i][j] + m.data[j][i].conj()) * 0.5;
                m.data[i][j] = z;
                m.data[j][i] = z.conj();
            }
        }
        m
    };
    (herm(pos), herm(neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bell_choi_at_zero() -> HermitianMatrix {
        let id = HermitianMatrix::identity(4).unwrap();
        (id + HermitianMatrix::pauli_pair(1, 1) - HermitianMatrix::pauli_pair(2, 2)
            + HermitianMatrix::pauli_pair(3, 3))
            * 0.25
    }

    #[test]
    fn decompose_basis_elements() {
        let c3 = pauli_decompose(&HermitianMatrix::pauli(3));
        assert_eq!(c3.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        let half_id = HermitianMatrix::identity(2).unwrap() * 0.5;
        assert_eq!(pauli_decompose(&half_id).as_slice(), &[0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn decompose_initial_choi_matrix() {
        let coeffs = pauli_decompose(&bell_choi_at_zero());
        for (idx, &v) in coeffs.as_slice().iter().enumerate() {
            let expected = match idx {
                0 | 5 | 15 => 0.25,
                10 => -0.25,
                _ => 0.0,
            };
            assert!((v - expected).abs() < 1e-15, "index {idx}: {v}");
        }
    }

    #[test]
    fn compose_reproduces_bell_projector() {
        let mut coeffs = [0.0; 16];
        coeffs[0] = 0.25;
        coeffs[5] = 0.25;
        coeffs[10] = -0.25;
        coeffs[15] = 0.25;
        let m = pauli_compose(&PauliCoefficients::pair(coeffs));
        let expected = [
            [0.5, 0.0, 0.0, 0.5],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.5],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.get(i, j) - c(expected[i][j], 0.0)).norm() < 1e-15);
            }
        }
        let zero = pauli_compose(&PauliCoefficients::pair([0.0; 16]));
        assert_eq!(zero, HermitianMatrix::zeros(4).unwrap());
        assert_eq!(
            pauli_compose(&PauliCoefficients::single([0.0, 0.0, 0.0, 1.0])),
            HermitianMatrix::pauli(3)
        );
    }

    #[test]
    fn pauli_pair_matches_kron() {
        for mu in 0..4 {
            for nu in 0..4 {
                let k = HermitianMatrix::kron(&HermitianMatrix::pauli(mu), &HermitianMatrix::pauli(nu))
                    .unwrap();
                assert!(k.max_abs_diff(&HermitianMatrix::pauli_pair(mu, nu)) < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let err = HermitianMatrix::new(2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        assert!(HermitianMatrix::new(3, &[c(0.0, 0.0); 9]).is_err());
        assert!(HermitianMatrix::new(2, &[c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn eigenvalues_of_simple_matrices() {
        assert_eq!(eigenvalues(&HermitianMatrix::pauli(3)), vec![-1.0, 1.0]);
        let ev = eigenvalues(&HermitianMatrix::identity(4).unwrap());
        assert!(ev.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let ev = eigenvalues(&bell_choi_at_zero());
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvalues_of_dense_complex_matrix() {
        // The two terms anticommute, so the spectrum is {+-sqrt(1.25)} twice.
        let m = HermitianMatrix::pauli_pair(2, 1) + HermitianMatrix::pauli_pair(3, 0) * 0.5;
        let ev = eigenvalues(&m);
        let r = 1.25f64.sqrt();
        for (a, b) in ev.iter().zip([-r, -r, r, r]) {
            assert!((a - b).abs() < 1e-13, "{ev:?}");
        }
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&HermitianMatrix::pauli(3)) - 2.0).abs() < 1e-15);
        let zero = HermitianMatrix::projector(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let one = HermitianMatrix::projector(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let delta = (zero - one) * 0.5;
        assert!((trace_norm(&delta) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jordan_parts_reconstruct() {
        let m = HermitianMatrix::pauli_pair(2, 1) + HermitianMatrix::pauli_pair(3, 0) * 0.5
            + HermitianMatrix::identity(4).unwrap() * 0.3;
        let (pos, neg) = jordan_decomposition(&m);
        assert!((pos - neg).max_abs_diff(&m) < 1e-14);
        assert!(eigenvalues(&pos)[0] > -1e-14 && eigenvalues(&neg)[0] > -1e-14);
        assert!((pos.trace() + neg.trace() - trace_norm(&m)).abs() < 1e-13);
        let (pos, neg) = jordan_decomposition(&HermitianMatrix::pauli(2));
        assert!((pos.trace() - 1.0).abs() < 1e-15 && (neg.trace() - 1.0).abs() < 1e-15);
        assert_eq!(pos.dim(), 2);
    }

    #[test]
    fn json_round_trip() {
        let m = HermitianMatrix::pauli_pair(2, 1) + HermitianMatrix::identity(4).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: HermitianMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
