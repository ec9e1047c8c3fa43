//! N-qubit Pauli operator basis and its multiplication table.
//!
//! Elements are indexed by base-4 words, most significant digit on qubit 1,
//! with digit 0 = identity, 1 = σx, 2 = σy, 3 = σz. Products of basis
//! elements are resolved symbolically, so phases stay exact.

use std::fmt;

use nalgebra::DMatrix;

use crate::{c64, CMatrix, Error, Result};

/// Default upper bound on the number of qubits accepted by constructors.
pub const MAX_QUBITS: usize = 4;

/// One of the four unit phases `1, i, -1, -i`, stored as a power of `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    /// Exponent `k` in `i^k`, in `0..4`.
    pub fn power(self) -> u8 {
        self.0
    }

    pub fn conj(self) -> Phase {
        Phase((4 - self.0) % 4)
    }

    pub fn to_complex(self) -> nalgebra::Complex<f64> {
        match self.0 {
            0 => c64(1.0, 0.0),
            1 => c64(0.0, 1.0),
            2 => c64(-1.0, 0.0),
            _ => c64(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["1", "i", "-1", "-i"][self.0 as usize])
    }
}

/// Single-qubit product σ_a σ_b = phase · σ_c.
fn single_product(a: u8, b: u8) -> (Phase, u8) {
    match (a, b) {
        (0, x) | (x, 0) => (Phase::ONE, x),
        (x, y) if x == y => (Phase::ONE, 0),
        // cyclic (x,y,z): σ_a σ_b = i σ_c
        (1, 2) => (Phase::I, 3),
        (2, 3) => (Phase::I, 1),
        (3, 1) => (Phase::I, 2),
        (2, 1) => (Phase::MINUS_I, 3),
        (3, 2) => (Phase::MINUS_I, 1),
        (1, 3) => (Phase::MINUS_I, 2),
        _ => unreachable!("pauli digit out of range"),
    }
}

pub(crate) fn single_matrix(digit: u8) -> CMatrix {
    let z = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let entries = match digit {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, -i, i, z],
        _ => [one, z, z, -one],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// Kronecker product of complex matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// The unnormalized N-qubit Pauli basis {E_α}, α = 0..d².
#[derive(Clone, Debug)]
pub struct PauliBasis {
    n_qubits: usize,
    dim: usize,
    elements: Vec<CMatrix>,
}

impl PauliBasis {
    /// Builds the basis for `n_qubits` with the default size guard.
    pub fn new(n_qubits: usize) -> Result<Self> {
        Self::with_limit(n_qubits, MAX_QUBITS)
    }

    pub fn with_limit(n_qubits: usize, max_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits, max_qubits)?;
        let dim = 1usize << n_qubits;
        let count = dim * dim;
        let elements = (0..count)
            .map(|index| {
                let digits = index_digits(index, n_qubits);
                digits
                    .iter()
                    .skip(1)
                    .fold(single_matrix(digits[0]), |acc, &d| kron(&acc, &single_matrix(d)))
            })
            .collect();
        Ok(Self { n_qubits, dim, elements })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension d = 2^N.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, d².
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, index: usize) -> &CMatrix {
        &self.elements[index]
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// Per-qubit digits of a basis index, qubit 1 first.
    pub fn digits(&self, index: usize) -> Vec<u8> {
        index_digits(index, self.n_qubits)
    }

    /// Label such as `"XZ"` (identity written as `I`).
    pub fn label(&self, index: usize) -> String {
        self.digits(index)
            .into_iter()
            .map(|d| ['I', 'X', 'Y', 'Z'][d as usize])
            .collect()
    }

    /// E_a · E_b = phase · E_index.
    pub fn product(&self, a: usize, b: usize) -> (Phase, usize) {
        assert!(a < self.len() && b < self.len(), "pauli index out of range");
        let mut phase = Phase::ONE;
        let mut index = 0usize;
        for q in (0..self.n_qubits).rev() {
            let shift = 2 * (self.n_qubits - 1 - q);
            let da = ((a >> shift) & 3) as u8;
            let db = ((b >> shift) & 3) as u8;
            let (ph, dc) = single_product(da, db);
            phase = phase * ph;
            index |= (dc as usize) << shift;
        }
        (phase, index)
    }

    /// Tr{E_α† E_δ† E_γ}, evaluated through the multiplication table.
    pub fn triple_trace(&self, alpha: usize, delta: usize, gamma: usize) -> nalgebra::Complex<f64> {
        // All elements are Hermitian, so the daggers drop out.
        let (ph1, inner) = self.product(delta, gamma);
        let (ph2, outer) = self.product(alpha, inner);
        if outer == 0 {
            (ph1 * ph2).to_complex() * self.dim as f64
        } else {
            c64(0.0, 0.0)
        }
    }

    /// Expansion coefficients x_α = Tr{E_α X}/d of an operator, so that
    /// X = Σ_α x_α E_α.
    pub fn coefficients(&self, op: &CMatrix) -> Vec<nalgebra::Complex<f64>> {
        let inv_d = 1.0 / self.dim as f64;
        self.elements
            .iter()
            .map(|e| (e * op).trace() * inv_d)
            .collect()
    }

    /// Σ_α x_α E_α.
    pub fn combine(&self, coeffs: &[nalgebra::Complex<f64>]) -> CMatrix {
        assert_eq!(coeffs.len(), self.len());
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (x, e) in coeffs.iter().zip(&self.elements) {
            if *x != c64(0.0, 0.0) {
                out += e * *x;
            }
        }
        out
    }
}

pub(crate) fn check_qubits(n_qubits: usize, max_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > max_qubits {
        return Err(Error::SizeLimit {
            n_qubits,
            max: max_qubits,
        });
    }
    Ok(())
}

fn index_digits(index: usize, n_qubits: usize) -> Vec<u8> {
    (0..n_qubits)
        .map(|q| ((index >> (2 * (n_qubits - 1 - q))) & 3) as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_qubit_basis_is_identity_x_y_z() {
        let b = PauliBasis::new(1).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.label(0), "I");
        assert_eq!(b.element(0), &CMatrix::identity(2, 2));
        assert_eq!(b.element(1), &single_matrix(1));
        assert_eq!(b.element(2), &single_matrix(2));
        assert_eq!(b.element(3), &single_matrix(3));
    }

    #[test]
    fn two_qubit_index_five_is_xx() {
        let b = PauliBasis::new(2).unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(b.digits(5), vec![1, 1]);
        assert_eq!(b.label(5), "XX");
        let xx = kron(&single_matrix(1), &single_matrix(1));
        assert_eq!(b.element(5), &xx);
        // most significant digit is qubit 1
        assert_eq!(b.element(12), &kron(&single_matrix(3), &single_matrix(0)));
    }

    #[test]
    fn size_guard() {
        assert!(matches!(PauliBasis::new(0), Err(Error::SizeLimit { .. })));
        assert!(matches!(PauliBasis::new(5), Err(Error::SizeLimit { .. })));
        assert!(PauliBasis::with_limit(5, 5).is_ok());
    }

    #[test]
    fn orthogonality_hermiticity_involution() {
        for n in 1..=2 {
            let b = PauliBasis::new(n).unwrap();
            let d = b.dim() as f64;
            let id = CMatrix::identity(b.dim(), b.dim());
            for (a, ea) in b.elements().iter().enumerate() {
                assert!(max_abs(&(ea - ea.adjoint())) == 0.0);
                assert!(max_abs(&(ea * ea - &id)) == 0.0);
                if a > 0 {
                    assert!(ea.trace().norm() < 1e-15);
                }
                for (c, ec) in b.elements().iter().enumerate() {
                    let t = (ea.adjoint() * ec).trace();
                    let expect = if a == c { d } else { 0.0 };
                    assert!((t - c64(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn xy_is_i_z() {
        let b = PauliBasis::new(1).unwrap();
        assert_eq!(b.product(1, 2), (Phase::I, 3));
        assert_eq!(b.product(2, 1), (Phase::MINUS_I, 3));
        for beta in 0..4 {
            assert_eq!(b.product(0, beta), (Phase::ONE, beta));
        }
    }

    #[test]
    fn products_match_dense_multiplication() {
        for n in 1..=2 {
            let b = PauliBasis::new(n).unwrap();
            for a in 0..b.len() {
                for c in 0..b.len() {
                    let (ph, idx) = b.product(a, c);
                    let dense = b.element(a) * b.element(c);
                    let symbolic = b.element(idx) * ph.to_complex();
                    assert!(max_abs(&(dense - symbolic)) < 1e-12, "{a} {c}");
                }
            }
        }
    }

    #[test]
    fn xz_times_xx() {
        // (X⊗Z)(X⊗X) = 1⊗(ZX) = i (1⊗Y)
        let b = PauliBasis::new(2).unwrap();
        assert_eq!(b.product(7, 5), (Phase::I, 2));
    }

    #[test]
    fn triple_trace_xyz_is_2i() {
        let b = PauliBasis::new(1).unwrap();
        // Tr{σx σy σz} = Tr{i σz σz} = 2i
        assert_eq!(b.triple_trace(1, 2, 3), c64(0.0, 2.0));
        for beta in 0..4 {
            assert_eq!(b.triple_trace(0, beta, beta), c64(2.0, 0.0));
        }
    }

    fn dense_triple(b: &PauliBasis, a: usize, d: usize, g: usize) -> nalgebra::Complex<f64> {
        (b.element(a).adjoint() * b.element(d).adjoint() * b.element(g)).trace()
    }

    #[test]
    fn triple_trace_matches_dense_all_single_qubit() {
        let b = PauliBasis::new(1).unwrap();
        for a in 0..4 {
            for d in 0..4 {
                for g in 0..4 {
                    let diff = b.triple_trace(a, d, g) - dense_triple(&b, a, d, g);
                    assert!(diff.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn triple_trace_matches_dense_random_two_qubit() {
        let b = PauliBasis::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let (a, d, g) = (
                rng.random_range(0..16),
                rng.random_range(0..16),
                rng.random_range(0..16),
            );
            let diff = b.triple_trace(a, d, g) - dense_triple(&b, a, d, g);
            assert!(diff.norm() < 1e-12);
            // swapping the two right factors conjugates the trace
            let sym = b.triple_trace(a, d, g) - b.triple_trace(a, g, d).conj();
            assert!(sym.norm() < 1e-12);
        }
    }

    #[test]
    fn coefficients_round_trip() {
        let b = PauliBasis::new(2).unwrap();
        let op = CMatrix::from_fn(4, 4, |i, j| c64(i as f64 - 0.5 * j as f64, (i * j) as f64));
        let back = b.combine(&b.coefficients(&op));
        assert!(max_abs(&(back - op)) < 1e-12);
    }
}
