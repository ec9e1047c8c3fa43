//! Lindbladian generators: representation, exact propagation and the
//! decomposition of the dissipator into decay rates and jump operators.
//!
//! The generator is
//!
//! ```text
//! L(ρ) = −i[H, ρ] + Σ_pq G_pq (B_p ρ B_q† − ½{B_q† B_p, ρ}),   H = Σ_α c_α E_α
//! ```
//!
//! with `B_p = Σ_α b^p_α E_α` ranging over a traceless operator basis. Density
//! matrices are vectorized by stacking columns, so `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

pub mod io;
mod random;
mod transfer;

pub use io::{read_model, write_model, ModelFile};
pub use random::{
    haar_unitary, sample_hs_random_g, sample_projector_g, structured_noise_g, StructuredRates,
};
pub use transfer::{PauliTransfer, ProbabilityMap};

use crate::expm::expm;
use crate::hermitian;
use crate::pauli::{kron, PauliBasis};
use crate::quantum::ExperimentDesign;
use crate::{c64, CMatrix, Error, Result, C64};

/// Eigenvalues of G below this are treated as genuine constraint violations.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Propagated states with an eigenvalue below this are rejected.
pub const STATE_TOLERANCE: f64 = 1e-6;

/// A traceless operator basis given by its coefficients over the non-identity
/// Pauli elements: row p holds b^p_α for α = 1..d².
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    n_qubits: usize,
    coeffs: CMatrix,
}

impl OperatorBasis {
    pub fn pauli(n_qubits: usize) -> Result<Self> {
        crate::pauli::check_qubits(n_qubits, crate::pauli::MAX_QUBITS)?;
        let m = (1usize << (2 * n_qubits)) - 1;
        Ok(OperatorBasis {
            n_qubits,
            coeffs: CMatrix::identity(m, m),
        })
    }

    pub fn new(n_qubits: usize, coeffs: CMatrix) -> Result<Self> {
        crate::pauli::check_qubits(n_qubits, crate::pauli::MAX_QUBITS)?;
        let m = (1usize << (2 * n_qubits)) - 1;
        if coeffs.nrows() != m || coeffs.ncols() != m {
            return Err(Error::dim(format!(
                "operator basis must be {m}x{m}, got {}x{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("operator basis has non-finite entries"));
        }
        let sv = coeffs.clone().singular_values();
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if hi == 0.0 || lo / hi < 1e-12 {
            return Err(Error::invalid("operator basis coefficients are rank deficient"));
        }
        Ok(OperatorBasis { n_qubits, coeffs })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of basis operators, d² − 1.
    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    pub fn is_pauli(&self) -> bool {
        self.coeffs == CMatrix::identity(self.len(), self.len())
    }

    /// Dense B_p.
    pub fn operator(&self, p: usize, pauli: &PauliBasis) -> CMatrix {
        let d = pauli.dim();
        let mut out = CMatrix::zeros(d, d);
        for a in 0..self.len() {
            let z = self.coeffs[(p, a)];
            if z != c64(0.0, 0.0) {
                out += pauli.element(a + 1) * z;
            }
        }
        out
    }

    pub fn operators(&self, pauli: &PauliBasis) -> Vec<CMatrix> {
        (0..self.len()).map(|p| self.operator(p, pauli)).collect()
    }

    /// Lindblad matrix in the Pauli basis describing the same dissipator:
    /// bᵀ G b̄.
    pub fn to_pauli_g(&self, g: &CMatrix) -> CMatrix {
        if self.is_pauli() {
            return g.clone();
        }
        self.coeffs.transpose() * g * self.coeffs.map(|z| z.conj())
    }

    /// Inverse of [`to_pauli_g`](Self::to_pauli_g).
    pub fn from_pauli_g(&self, g_pauli: &CMatrix) -> CMatrix {
        if self.is_pauli() {
            return g_pauli.clone();
        }
        let bt = self.coeffs.transpose().lu();
        let left = bt.solve(g_pauli).expect("basis is full rank");
        // X b̄ = left, solved as b† Xᵀ = leftᵀ.
        let bbar_t = self.coeffs.map(|z| z.conj()).transpose().lu();
        let xt = bbar_t.solve(&left.transpose()).expect("basis is full rank");
        xt.transpose()
    }
}

/// Hamiltonian coefficients and Lindblad matrix in a declared basis.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pauli: PauliBasis,
    basis: OperatorBasis,
    c: Vec<f64>,
    g: CMatrix,
}

impl LindbladModel {
    /// Model in the Pauli operator basis.
    pub fn new(n_qubits: usize, c: Vec<f64>, g: CMatrix) -> Result<Self> {
        Self::with_basis(OperatorBasis::pauli(n_qubits)?, c, g)
    }

    pub fn with_basis(basis: OperatorBasis, c: Vec<f64>, g: CMatrix) -> Result<Self> {
        let pauli = PauliBasis::new(basis.n_qubits())?;
        let m = basis.len();
        if c.len() != m {
            return Err(Error::dim(format!("expected {m} Hamiltonian coefficients, got {}", c.len())));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("Hamiltonian coefficients must be finite"));
        }
        if g.nrows() != m || g.ncols() != m {
            return Err(Error::dim(format!(
                "Lindblad matrix must be {m}x{m}, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("Lindblad matrix has non-finite entries"));
        }
        let scale = hermitian::frobenius(&g).max(1.0);
        hermitian::require_hermitian(&g, 1e-10 * scale)?;
        let g = hermitian::symmetrize(&g);
        let lam = hermitian::min_eigenvalue(&g);
        if lam < -PSD_TOLERANCE {
            return Err(Error::NotPsd(lam));
        }
        Ok(LindbladModel { pauli, basis, c, g })
    }

    /// Noiseless, Hamiltonian-free model.
    pub fn identity(n_qubits: usize) -> Result<Self> {
        let m = (1usize << (2 * n_qubits)) - 1;
        Self::new(n_qubits, vec![0.0; m], CMatrix::zeros(m, m))
    }

    pub fn n_qubits(&self) -> usize {
        self.pauli.n_qubits()
    }

    pub fn dim(&self) -> usize {
        self.pauli.dim()
    }

    pub fn pauli(&self) -> &PauliBasis {
        &self.pauli
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    /// Lindblad matrix expressed in the Pauli basis.
    pub fn g_pauli(&self) -> CMatrix {
        self.basis.to_pauli_g(&self.g)
    }

    pub fn hamiltonian(&self) -> CMatrix {
        hamiltonian_from(&self.pauli, &self.c)
    }
}

/// H = Σ_α c_α E_α over the traceless Pauli elements.
pub fn hamiltonian_from(pauli: &PauliBasis, c: &[f64]) -> CMatrix {
    let d = pauli.dim();
    let mut h = CMatrix::zeros(d, d);
    for (a, &x) in c.iter().enumerate() {
        if x != 0.0 {
            h += pauli.element(a + 1).scale(x);
        }
    }
    h
}

/// Pauli coefficients c_α of a Hermitian Hamiltonian (identity part dropped).
pub fn hamiltonian_coefficients(pauli: &PauliBasis, h: &CMatrix) -> Vec<f64> {
    pauli.coefficients(h).iter().skip(1).map(|z| z.re).collect()
}

pub fn vectorize(rho: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(rho.as_slice())
}

pub fn devectorize(v: &nalgebra::DVector<C64>, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Column-stacking superoperator of the model.
pub fn build_liouvillian(model: &LindbladModel) -> CMatrix {
    liouvillian_pauli(&model.pauli, &model.hamiltonian(), &model.g_pauli())
}

/// Superoperator from a dense Hamiltonian and a Pauli-basis Lindblad matrix.
pub fn liouvillian_pauli(pauli: &PauliBasis, h: &CMatrix, g_pauli: &CMatrix) -> CMatrix {
    let d = pauli.dim();
    let id = CMatrix::identity(d, d);
    let minus_i = c64(0.0, -1.0);
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * minus_i;
    let m = g_pauli.nrows();
    let mut k = CMatrix::zeros(d, d);
    for a in 0..m {
        for b in 0..m {
            let z = g_pauli[(a, b)];
            if z == c64(0.0, 0.0) {
                continue;
            }
            let ea = pauli.element(a + 1);
            let eb = pauli.element(b + 1);
            l += kron(&eb.transpose(), ea) * z;
            k += (eb * ea) * z;
        }
    }
    l -= (kron(&id, &k) + kron(&k.transpose(), &id)).scale(0.5);
    l
}

/// Dense channel exp(tL).
pub fn channel(liouvillian: &CMatrix, t: f64) -> CMatrix {
    expm(&liouvillian.scale(t))
}

/// Applies a superoperator to a density matrix and checks the result.
pub fn apply_channel(superop: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let d = rho.nrows();
    let out = hermitian::symmetrize(&devectorize(&(superop * vectorize(rho)), d));
    check_state(&out)?;
    Ok(out)
}

fn check_state(rho: &CMatrix) -> Result<()> {
    let lam = hermitian::min_eigenvalue(rho);
    if lam < -STATE_TOLERANCE {
        return Err(Error::Unphysical(format!("eigenvalue {lam:.3e}")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 {
        return Err(Error::Unphysical(format!("trace {:.12}", tr.re)));
    }
    Ok(())
}

/// ρ(t) = exp(tL) ρ0.
pub fn propagate(model: &LindbladModel, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("propagation time must be nonnegative, got {t}")));
    }
    let d = model.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::dim(format!("state must be {d}x{d}")));
    }
    apply_channel(&channel(&build_liouvillian(model), t), rho0)
}

/// Exact probabilities for every configuration of the design, in row order.
pub fn predicted_probabilities(model: &LindbladModel, design: &ExperimentDesign) -> Result<Vec<f64>> {
    if model.n_qubits() != design.n_qubits() {
        return Err(Error::dim(format!(
            "model has {} qubits but design has {}",
            model.n_qubits(),
            design.n_qubits()
        )));
    }
    let l = build_liouvillian(model);
    let projectors = design.projectors();
    let d = design.dim();
    let n_bases = design.bases().len();
    let mut out = vec![0.0; design.n_configurations()];
    for (i, &t) in design.times().iter().enumerate() {
        let superop = channel(&l, t);
        for (s, rho0) in design.states().states().iter().enumerate() {
            let rho = apply_channel(&superop, rho0)?;
            for b in 0..n_bases {
                for m in 0..d {
                    let p = (&projectors[b * d + m] * &rho).trace().re;
                    out[design.row(s, i, b, m)] = p;
                }
            }
        }
    }
    Ok(out)
}

/// Decay rates and jump operators of a Lindblad matrix.
#[derive(Debug, Clone)]
pub struct JumpDecomposition {
    /// Nonnegative, descending.
    pub rates: Vec<f64>,
    /// Column n holds the coefficients u_n of jump operator n over the
    /// declared operator basis.
    pub vectors: CMatrix,
    /// Dense jump operators L_n = Σ_p u_{p,n} B_p.
    pub jump_ops: Vec<CMatrix>,
}

impl JumpDecomposition {
    /// Σ_n γ_n u_n u_n†.
    pub fn reconstruct(&self) -> CMatrix {
        hermitian::from_spectrum(&self.rates, &self.vectors)
    }

    /// Coefficients of L_n over the Pauli elements E_1..E_{d²−1}.
    pub fn pauli_coefficients(&self, basis: &OperatorBasis, n: usize) -> Vec<C64> {
        let u = self.vectors.column(n);
        (basis.coeffs().transpose() * u).iter().copied().collect()
    }
}

pub fn jump_decomposition(model: &LindbladModel) -> Result<JumpDecomposition> {
    decompose_g(model.g(), model.basis(), model.pauli())
}

/// Eigen-decomposition of any PSD Lindblad matrix in the given basis.
pub fn decompose_g(g: &CMatrix, basis: &OperatorBasis, pauli: &PauliBasis) -> Result<JumpDecomposition> {
    let (values, vectors) = hermitian::eigh(g);
    if let Some(&lam) = values.last() {
        if lam < -PSD_TOLERANCE {
            return Err(Error::NotPsd(lam));
        }
    }
    let rates: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let ops = basis.operators(pauli);
    let d = pauli.dim();
    let jump_ops = (0..rates.len())
        .map(|n| {
            let mut l = CMatrix::zeros(d, d);
            for (p, op) in ops.iter().enumerate() {
                l += op * vectors[(p, n)];
            }
            l
        })
        .collect();
    Ok(JumpDecomposition {
        rates,
        vectors,
        jump_ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{enumerate_configurations, standard_initial_states};

    fn dephasing(gamma: f64) -> LindbladModel {
        let mut g = CMatrix::zeros(3, 3);
        g[(2, 2)] = c64(gamma, 0.0);
        LindbladModel::new(1, vec![0.0; 3], g).unwrap()
    }

    fn expect(pauli: &PauliBasis, rho: &CMatrix, a: usize) -> f64 {
        (pauli.element(a) * rho).trace().re
    }

    #[test]
    fn zero_model_has_zero_liouvillian() {
        let model = LindbladModel::identity(2).unwrap();
        assert!(build_liouvillian(&model).iter().all(|z| *z == c64(0.0, 0.0)));
    }

    #[test]
    fn dephasing_generator_rate() {
        let gamma = 0.37;
        let model = dephasing(gamma);
        let l = build_liouvillian(&model);
        let plus = standard_initial_states(1).unwrap().state(2).clone();
        let drho = devectorize(&(&l * vectorize(&plus)), 2);
        let x = expect(model.pauli(), &plus, 1);
        let dx = expect(model.pauli(), &drho, 1);
        assert!((dx + 2.0 * gamma * x).abs() < 1e-14);
    }

    #[test]
    fn dephasing_propagation() {
        let model = dephasing(0.05);
        let plus = standard_initial_states(1).unwrap().state(2).clone();
        let rho = propagate(&model, &plus, 1.0).unwrap();
        assert!((expect(model.pauli(), &rho, 1) - (-0.1f64).exp()).abs() < 1e-12);
        assert!((expect(model.pauli(), &rho, 1) - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn identity_channel_leaves_state() {
        let model = LindbladModel::identity(2).unwrap();
        let rho = standard_initial_states(2).unwrap().state(11).clone();
        let out = propagate(&model, &rho, 3.7).unwrap();
        assert!((out - rho).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn half_pi_x_rotation() {
        let pauli = PauliBasis::new(1).unwrap();
        let mut c = vec![0.0; 3];
        c[0] = std::f64::consts::FRAC_PI_4;
        let model = LindbladModel::new(1, c, CMatrix::zeros(3, 3)).unwrap();
        let zero = standard_initial_states(1).unwrap().state(0).clone();
        let rho = propagate(&model, &zero, 1.0).unwrap();
        // U = exp(−iπσx/4) maps |0⟩ to (|0⟩ − i|1⟩)/√2.
        let u = expm(&(pauli.element(1) * c64(0.0, -std::f64::consts::FRAC_PI_4)));
        let oracle = &u * &zero * u.adjoint();
        assert!((&rho - &oracle).iter().all(|z| z.norm() < 1e-13));
        assert!(expect(&pauli, &rho, 3).abs() < 1e-13);
        assert!((expect(&pauli, &rho, 2) + 1.0).abs() < 1e-13);
    }

    #[test]
    fn dephasing_probability() {
        let model = dephasing(0.05);
        let design = enumerate_configurations(1, &[1.0], 100).unwrap();
        let p = predicted_probabilities(&model, &design).unwrap();
        // |+⟩ (state 2) measured in x (basis 0).
        let k = design.row(2, 0, 0, 0);
        assert!((p[k] - 0.95242).abs() < 1e-5);
        assert!((p[k] - (1.0 + (-0.1f64).exp()) / 2.0).abs() < 1e-12);

        let ideal = predicted_probabilities(&LindbladModel::identity(1).unwrap(), &design).unwrap();
        assert!((ideal[k] - 1.0).abs() < 1e-14 && ideal[k + 1].abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_models() {
        let mut g = CMatrix::zeros(3, 3);
        g[(0, 1)] = c64(0.1, 0.0);
        assert!(matches!(LindbladModel::new(1, vec![0.0; 3], g), Err(Error::NotHermitian(_))));
        let mut g = CMatrix::zeros(3, 3);
        g[(0, 0)] = c64(-0.1, 0.0);
        assert!(matches!(LindbladModel::new(1, vec![0.0; 3], g), Err(Error::NotPsd(_))));
        assert!(LindbladModel::new(1, vec![0.0; 2], CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn jump_decomposition_diagonal_and_rank_one() {
        let model = dephasing(0.2);
        let jd = jump_decomposition(&model).unwrap();
        assert!((jd.rates[0] - 0.2).abs() < 1e-15);
        assert!(jd.rates[1..].iter().all(|&r| r.abs() < 1e-15));
        let z = model.pauli().element(3);
        // Eigenvector phase is arbitrary.
        let overlap = (jd.jump_ops[0].adjoint() * z).trace().norm() / 2.0;
        assert!((overlap - 1.0).abs() < 1e-12);

        let v = nalgebra::DVector::from_vec(vec![c64(0.6, 0.0), c64(0.0, 0.8), c64(0.0, 0.0)]);
        let g = (&v * v.adjoint()).scale(0.3);
        let model = LindbladModel::new(1, vec![0.0; 3], g.clone()).unwrap();
        let jd = jump_decomposition(&model).unwrap();
        assert!((jd.rates[0] - 0.3).abs() < 1e-14);
        assert!(hermitian::frobenius(&(jd.reconstruct() - g)) < 1e-12);
    }

    #[test]
    fn basis_change_preserves_liouvillian() {
        // A random invertible basis: the Pauli-basis matrix bᵀ G b̄ must give
        // the same superoperator as summing B_p ρ B_q† directly.
        let pauli = PauliBasis::new(1).unwrap();
        let coeffs = CMatrix::from_row_slice(
            3,
            3,
            &[
                c64(0.5, 0.0), c64(0.0, -0.5), c64(0.0, 0.0),
                c64(0.3, 0.1), c64(1.0, 0.0), c64(-0.2, 0.4),
                c64(0.0, 0.0), c64(0.1, 0.0), c64(0.9, -0.3),
            ],
        );
        let basis = OperatorBasis::new(1, coeffs).unwrap();
        let g = CMatrix::from_row_slice(
            3,
            3,
            &[
                c64(0.4, 0.0), c64(0.1, 0.05), c64(0.0, 0.0),
                c64(0.1, -0.05), c64(0.3, 0.0), c64(0.02, 0.0),
                c64(0.0, 0.0), c64(0.02, 0.0), c64(0.2, 0.0),
            ],
        );
        let model = LindbladModel::with_basis(basis.clone(), vec![0.1, 0.0, -0.3], g.clone()).unwrap();
        let l = build_liouvillian(&model);

        let ops = basis.operators(&pauli);
        let id = CMatrix::identity(2, 2);
        let h = model.hamiltonian();
        let mut oracle = (kron(&id, &h) - kron(&h.transpose(), &id)) * c64(0.0, -1.0);
        for p in 0..3 {
            for q in 0..3 {
                let bq_dag = ops[q].adjoint();
                let k = &bq_dag * &ops[p];
                oracle += (kron(&bq_dag.transpose(), &ops[p])
                    - (kron(&id, &k) + kron(&k.transpose(), &id)).scale(0.5))
                    * g[(p, q)];
            }
        }
        assert!((l - oracle).iter().all(|z| z.norm() < 1e-13));
        let back = basis.from_pauli_g(&basis.to_pauli_g(&g));
        assert!(hermitian::frobenius(&(back - g)) < 1e-12);
    }
}
