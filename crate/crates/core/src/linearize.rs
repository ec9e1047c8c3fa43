//! First-order expansion of the probabilities around a known target unitary:
//!
//! ```text
//! p_k(G) ≈ p^u_k + Σ_pq Φ^{pq}_k G_pq
//! ```
//!
//! For a constant Hamiltonian H with U(t) = exp(−iHt), the dissipator acting
//! along the path is carried to the initial frame by the real orthogonal
//! matrix W_{αβ}(t) = Tr{E_α U E_β U†}/d, giving the kernel
//! K^{pq}(t) = ∫_0^t Wᵀ(t') B^{pq} W(t') dt' and
//! Φ^{pq}_k = Σ_γδ K^{pq}_{γδ} Tr{M U E_γ ρ_0 E_δ U†}.
//! B^{pq}_{αβ} are the coefficients of the dissipator term for (p, q) written
//! as Σ_αβ B_αβ E_α ρ E_β over the full Pauli basis.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::expm::expm;
use crate::lindblad::{hamiltonian_coefficients, OperatorBasis};
use crate::pauli::{kron, PauliBasis};
use crate::quantum::ExperimentDesign;
use crate::{c64, hermitian, CMatrix, Error, RMatrix, Result, C64};

/// Default number of Simpson panels.
pub const DEFAULT_PANELS: usize = 64;
/// Panel count above which quadrature is declared non-convergent.
pub const MAX_PANELS: usize = 4096;
/// Allowed change of Φ when the panel count is doubled.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Identity,
    RxHalfPi,
    MsHalfPi,
    CustomConstantH,
}

/// Ideal gate generated by a constant Hamiltonian over `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetUnitary {
    kind: TargetKind,
    n_qubits: usize,
    h: CMatrix,
    duration: f64,
}

impl TargetUnitary {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        let pauli = PauliBasis::new(n_qubits)?;
        Ok(TargetUnitary {
            kind: TargetKind::Identity,
            n_qubits,
            h: CMatrix::zeros(pauli.dim(), pauli.dim()),
            duration: 1.0,
        })
    }

    /// H = (π/4)σx over unit time, so U = (1 − iσx)/√2.
    pub fn rx_half_pi() -> Self {
        let pauli = PauliBasis::new(1).expect("one qubit");
        TargetUnitary {
            kind: TargetKind::RxHalfPi,
            n_qubits: 1,
            h: pauli.element(1).scale(std::f64::consts::FRAC_PI_4),
            duration: 1.0,
        }
    }

    /// H = (π/4)σx⊗σx over unit time, so U = (1 − iσx⊗σx)/√2.
    pub fn ms_half_pi() -> Self {
        let pauli = PauliBasis::new(2).expect("two qubits");
        TargetUnitary {
            kind: TargetKind::MsHalfPi,
            n_qubits: 2,
            h: pauli.element(5).scale(std::f64::consts::FRAC_PI_4),
            duration: 1.0,
        }
    }

    pub fn custom(h: CMatrix, duration: f64) -> Result<Self> {
        let d = h.nrows();
        if d < 2 || !d.is_power_of_two() || h.ncols() != d {
            return Err(Error::dim("Hamiltonian must be a square 2^N matrix"));
        }
        hermitian::require_hermitian(&h, 1e-12)?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        let n_qubits = d.trailing_zeros() as usize;
        crate::pauli::check_qubits(n_qubits, crate::pauli::MAX_QUBITS)?;
        Ok(TargetUnitary {
            kind: TargetKind::CustomConstantH,
            n_qubits,
            h: hermitian::symmetrize(&h),
            duration,
        })
    }

    /// The same rotation by `angle` about the unit axis `n` on every qubit.
    pub fn local_rotation(n_qubits: usize, axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::invalid("rotation axis must be nonzero"));
        }
        let single = PauliBasis::new(1)?;
        let mut n_sigma = CMatrix::zeros(2, 2);
        for (k, a) in axis.iter().enumerate() {
            n_sigma += single.element(k + 1).scale(a / norm);
        }
        let d = 1usize << n_qubits;
        let mut h = CMatrix::zeros(d, d);
        for q in 0..n_qubits {
            let left = CMatrix::identity(1 << q, 1 << q);
            let right = CMatrix::identity(1 << (n_qubits - 1 - q), 1 << (n_qubits - 1 - q));
            h += kron(&kron(&left, &n_sigma), &right).scale(angle / 2.0);
        }
        Self::custom(h, 1.0)
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Pauli coefficients of H, for building a matching Lindblad model.
    pub fn hamiltonian_coefficients(&self) -> Vec<f64> {
        let pauli = PauliBasis::new(self.n_qubits).expect("validated size");
        hamiltonian_coefficients(&pauli, &self.h)
    }

    /// exp(−iHt).
    pub fn unitary_at(&self, t: f64) -> CMatrix {
        expm(&(&self.h * c64(0.0, -t)))
    }

    /// Unitary over the full gate duration.
    pub fn full(&self) -> CMatrix {
        self.unitary_at(self.duration)
    }
}

/// p^u_k = Tr{M U(t_i) ρ_s U(t_i)†} in design row order.
pub fn unitary_baseline(target: &TargetUnitary, design: &ExperimentDesign) -> Result<Vec<f64>> {
    check_sizes(target, design)?;
    let projectors = design.projectors();
    let d = design.dim();
    let mut out = vec![0.0; design.n_configurations()];
    for (i, &t) in design.times().iter().enumerate() {
        let u = target.unitary_at(t);
        for (s, rho) in design.states().states().iter().enumerate() {
            let evolved = &u * rho * u.adjoint();
            for (mu, proj) in projectors.iter().enumerate() {
                out[design.row(s, i, mu / d, mu % d)] = (proj * &evolved).trace().re;
            }
        }
    }
    Ok(out)
}

fn check_sizes(target: &TargetUnitary, design: &ExperimentDesign) -> Result<()> {
    if target.n_qubits != design.n_qubits() {
        return Err(Error::dim(format!(
            "target acts on {} qubits but design has {}",
            target.n_qubits,
            design.n_qubits()
        )));
    }
    Ok(())
}

/// W_{αβ} = Tr{E_α U E_β U†}/d over all d² Pauli elements, so W = 1 at U = 1.
pub fn frame_matrix_w(pauli: &PauliBasis, u: &CMatrix) -> RMatrix {
    let n = pauli.len();
    let inv_d = 1.0 / pauli.dim() as f64;
    let mut w = RMatrix::zeros(n, n);
    let u_dag = u.adjoint();
    for beta in 0..n {
        let rotated = u * pauli.element(beta) * &u_dag;
        for alpha in 0..n {
            // Tr{E_α X} without forming the product.
            let e = pauli.element(alpha);
            let mut tr = c64(0.0, 0.0);
            for i in 0..pauli.dim() {
                for j in 0..pauli.dim() {
                    tr += e[(i, j)] * rotated[(j, i)];
                }
            }
            w[(alpha, beta)] = tr.re * inv_d;
        }
    }
    w
}

/// B^{pq}_{αβ} for all pairs, indexed `p * m + q`, each a d²×d² matrix over
/// the full Pauli basis (index 0 is the identity).
pub fn dissipator_coeffs_b(basis: &OperatorBasis, pauli: &PauliBasis) -> Vec<CMatrix> {
    let n = pauli.len();
    let m = basis.len();
    let d = pauli.dim() as f64;
    let b = basis.coeffs();
    // Full-length coefficient rows with b_0 = 0.
    let row = |p: usize, alpha: usize| if alpha == 0 { c64(0.0, 0.0) } else { b[(p, alpha - 1)] };
    // Nonzero entries of each row, to keep the Pauli basis sparse.
    let support: Vec<Vec<usize>> = (0..m)
        .map(|p| (1..n).filter(|&a| row(p, a) != c64(0.0, 0.0)).collect())
        .collect();
    let mut out = Vec::with_capacity(m * m);
    for p in 0..m {
        for q in 0..m {
            let mut bm = CMatrix::zeros(n, n);
            for &a in &support[p] {
                for &bb in &support[q] {
                    bm[(a, bb)] += row(p, a) * row(q, bb).conj();
                }
            }
            // B_q† B_p = Σ_α (c_α/d) E_α.
            let mut c = vec![c64(0.0, 0.0); n];
            for &g in &support[p] {
                for &dl in &support[q] {
                    let w = row(p, g) * row(q, dl).conj();
                    let (ph, k) = pauli.product(dl, g);
                    c[k] += w * ph.to_complex() * d;
                }
            }
            for (alpha, &ca) in c.iter().enumerate() {
                if ca != c64(0.0, 0.0) {
                    bm[(alpha, 0)] -= ca * (0.5 / d);
                    bm[(0, alpha)] -= ca * (0.5 / d);
                }
            }
            out.push(bm);
        }
    }
    out
}

/// Linear model of all configuration probabilities of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModel {
    n_qubits: usize,
    basis: OperatorBasis,
    p_u: Vec<f64>,
    phi: Vec<CMatrix>,
    quadrature_panels: usize,
}

impl LinearizedModel {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn p_u(&self) -> &[f64] {
        &self.p_u
    }

    /// Φ_k as an m×m matrix over (p, q).
    pub fn phi(&self, k: usize) -> &CMatrix {
        &self.phi[k]
    }

    pub fn phis(&self) -> &[CMatrix] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.p_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_u.is_empty()
    }

    /// Panel count of the accepted Simpson rule.
    pub fn quadrature_panels(&self) -> usize {
        self.quadrature_panels
    }

    /// Side length m = d² − 1 of the Lindblad matrix.
    pub fn g_size(&self) -> usize {
        self.basis.len()
    }

    /// Same linear model expressed in another operator basis. Since
    /// Φ_b = b Φ_Pauli b†, the probabilities are unchanged when G is mapped
    /// accordingly.
    pub fn in_basis(&self, basis: &OperatorBasis) -> Result<LinearizedModel> {
        if basis.n_qubits() != self.n_qubits {
            return Err(Error::dim("basis acts on a different number of qubits"));
        }
        // Φ_old = b_old Φ_P b_old†, so Φ_P = b_old⁻¹ Φ_old b_old⁻†.
        let old_inv = self
            .basis
            .coeffs()
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular operator basis"))?;
        let to_new = basis.coeffs() * old_inv;
        let to_new_dag = to_new.adjoint();
        let phi = self.phi.iter().map(|p| &to_new * p * &to_new_dag).collect();
        Ok(LinearizedModel {
            n_qubits: self.n_qubits,
            basis: basis.clone(),
            p_u: self.p_u.clone(),
            phi,
            quadrature_panels: self.quadrature_panels,
        })
    }

    /// Builds the cache key for a linearization request.
    pub fn cache_key(
        target: &TargetUnitary,
        design: &ExperimentDesign,
        basis: &OperatorBasis,
        panels: usize,
    ) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"lqt-linear-v1");
        h.update((design.n_qubits() as u64).to_le_bytes());
        for t in design.times() {
            h.update(t.to_le_bytes());
        }
        for rho in design.states().states() {
            for z in rho.iter() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
        for z in target.h.iter().chain(basis.coeffs().iter()) {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        h.update((panels as u64).to_le_bytes());
        h.finalize().into()
    }
}

/// Real part of p^u + Σ Φ^{pq} G_pq for every configuration.
pub fn linear_probability(lin: &LinearizedModel, g: &CMatrix) -> Vec<f64> {
    linear_probability_complex(lin, g).iter().map(|z| z.re).collect()
}

/// Complex-valued version, useful to confirm the imaginary part vanishes.
pub fn linear_probability_complex(lin: &LinearizedModel, g: &CMatrix) -> Vec<C64> {
    lin.phi
        .iter()
        .zip(&lin.p_u)
        .map(|(phi, &pu)| {
            let s: C64 = phi.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            s + pu
        })
        .collect()
}

/// ∫_0^t W_αγ W_βδ dt' by composite Simpson on `2 * panels` and `panels`
/// panels at once, flattened as ((α n + β) n + γ) n + δ.
fn integrated_frames(pauli: &PauliBasis, target: &TargetUnitary, t: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let n = pauli.len();
    let fine = 2 * panels;
    let h = t / fine as f64;
    let mut s_fine = vec![0.0; n * n * n * n];
    let mut s_coarse = vec![0.0; n * n * n * n];
    for j in 0..=fine {
        let wf = simpson_weight(j, fine) * h / 3.0;
        let wc = if j % 2 == 0 {
            simpson_weight(j / 2, panels) * 2.0 * h / 3.0
        } else {
            0.0
        };
        let w = frame_matrix_w(pauli, &target.unitary_at(j as f64 * h));
        for a in 0..n {
            for b in 0..n {
                let base = (a * n + b) * n * n;
                for g in 0..n {
                    let wag = w[(a, g)];
                    if wag == 0.0 {
                        continue;
                    }
                    for dl in 0..n {
                        let v = wag * w[(b, dl)];
                        s_fine[base + g * n + dl] += wf * v;
                        s_coarse[base + g * n + dl] += wc * v;
                    }
                }
            }
        }
    }
    (s_fine, s_coarse)
}

fn simpson_weight(j: usize, panels: usize) -> f64 {
    if j == 0 || j == panels {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// K^{pq}_{γδ} = Σ_αβ B^{pq}_αβ S_{αβγδ} as an (m²) × (n²) matrix.
fn kernel(b_tensor: &[CMatrix], s: &[f64], n: usize) -> CMatrix {
    let mut k = CMatrix::zeros(b_tensor.len(), n * n);
    for (pq, bm) in b_tensor.iter().enumerate() {
        for a in 0..n {
            for b in 0..n {
                let z = bm[(a, b)];
                if z == c64(0.0, 0.0) {
                    continue;
                }
                let base = (a * n + b) * n * n;
                for gd in 0..n * n {
                    k[(pq, gd)] += z * s[base + gd];
                }
            }
        }
    }
    k
}

/// Computes p^u and Φ for every configuration of the design.
pub fn sensitivity_phi(
    target: &TargetUnitary,
    design: &ExperimentDesign,
    basis: &OperatorBasis,
    panels: usize,
) -> Result<LinearizedModel> {
    check_sizes(target, design)?;
    if basis.n_qubits() != design.n_qubits() {
        return Err(Error::dim("operator basis acts on a different number of qubits"));
    }
    if panels < 8 || panels % 2 != 0 {
        return Err(Error::invalid(format!("panel count must be even and at least 8, got {panels}")));
    }
    let pauli = PauliBasis::new(design.n_qubits())?;
    let n = pauli.len();
    let m = basis.len();
    let d = pauli.dim();
    let b_tensor = dissipator_coeffs_b(basis, &pauli);
    let projectors = design.projectors();
    let n_meas = projectors.len();
    let states = design.states().states();
    let per_time = states.len() * n_meas;

    // Y columns (s, δ): vec of (ρ_s E_δ)ᵀ, shared by all times.
    let mut y = CMatrix::zeros(d * d, states.len() * n);
    for (s, rho) in states.iter().enumerate() {
        for dl in 0..n {
            let prod = (rho * pauli.element(dl)).transpose();
            y.column_mut(s * n + dl).copy_from_slice(prod.as_slice());
        }
    }

    let mut phi = vec![CMatrix::zeros(m, m); design.n_configurations()];
    let mut used_panels = 0usize;
    for (i, &t) in design.times().iter().enumerate() {
        // Z⁰[(μ, γ), (s, δ)] = Tr{M̃_μ E_γ ρ_s E_δ}, M̃ = U† M U.
        let u = target.unitary_at(t);
        let mut x = CMatrix::zeros(n_meas * n, d * d);
        for (mu, proj) in projectors.iter().enumerate() {
            let m_tilde = u.adjoint() * proj * &u;
            for g in 0..n {
                let prod = &m_tilde * pauli.element(g);
                x.row_mut(mu * n + g).copy_from_slice(prod.as_slice());
            }
        }
        let z0 = x * &y;
        // Columns are configurations of this time, in row order.
        let mut zmat = CMatrix::zeros(n * n, per_time);
        for s in 0..states.len() {
            for mu in 0..n_meas {
                let col = s * n_meas + mu;
                for g in 0..n {
                    for dl in 0..n {
                        zmat[(g * n + dl, col)] = z0[(mu * n + g, s * n + dl)];
                    }
                }
            }
        }

        let mut p = panels;
        let phi_t = loop {
            let (s_fine, s_coarse) = integrated_frames(&pauli, target, t, p);
            let fine = kernel(&b_tensor, &s_fine, n) * &zmat;
            let coarse = kernel(&b_tensor, &s_coarse, n) * &zmat;
            let change = (&fine - &coarse).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if change <= QUADRATURE_TOLERANCE {
                used_panels = used_panels.max(2 * p);
                break fine;
            }
            if 2 * p >= MAX_PANELS {
                return Err(Error::Quadrature { change, panels: 2 * p });
            }
            p *= 2;
        };
        for s in 0..states.len() {
            for mu in 0..n_meas {
                let row = design.row(s, i, mu / d, mu % d);
                let col = phi_t.column(s * n_meas + mu);
                phi[row] = CMatrix::from_fn(m, m, |pp, qq| col[pp * m + qq]);
            }
        }
    }

    Ok(LinearizedModel {
        n_qubits: design.n_qubits(),
        basis: basis.clone(),
        p_u: unitary_baseline(target, design)?,
        phi,
        quadrature_panels: used_panels,
    })
}

const CACHE_MAGIC: &[u8; 8] = b"LQTLIN\0\0";
const CACHE_VERSION: u32 = 1;

/// Writes the model to a little-endian binary cache:
/// magic, version (u32), key (32 bytes), n_qubits, m, n_conf, panels (u64
/// each), basis coefficients, p^u, then Φ, with complex numbers stored as
/// (re, im) f64 pairs in column-major order.
pub fn save_cache(path: &Path, lin: &LinearizedModel, key: &[u8; 32]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(key);
    for v in [lin.n_qubits, lin.g_size(), lin.len(), lin.quadrature_panels] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let put = |buf: &mut Vec<u8>, z: &C64| {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    };
    lin.basis.coeffs().iter().for_each(|z| put(&mut buf, z));
    lin.p_u.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
    for phi in &lin.phi {
        phi.iter().for_each(|z| put(&mut buf, z));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Loads a cache written by [`save_cache`]; returns `Ok(None)` when the key
/// or version does not match.
pub fn load_cache(path: &Path, key: &[u8; 32]) -> Result<Option<LinearizedModel>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let corrupt = || Error::invalid(format!("{} is not a valid linearization cache", path.display()));
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + len).ok_or_else(corrupt)?;
        pos += len;
        Ok(s)
    };
    if take(8)? != CACHE_MAGIC {
        return Err(corrupt());
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CACHE_VERSION || take(32)? != key {
        return Ok(None);
    }
    let mut header = [0usize; 4];
    for h in header.iter_mut() {
        *h = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    }
    let [n_qubits, m, n_conf, panels] = header;
    let mut f64s = |count: usize| -> Result<Vec<f64>> {
        let raw = take(count * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let to_complex = |v: Vec<f64>| -> Vec<C64> { v.chunks_exact(2).map(|c| c64(c[0], c[1])).collect() };
    let coeffs = CMatrix::from_column_slice(m, m, &to_complex(f64s(2 * m * m)?));
    let p_u = f64s(n_conf)?;
    let mut phi = Vec::with_capacity(n_conf);
    for _ in 0..n_conf {
        phi.push(CMatrix::from_column_slice(m, m, &to_complex(f64s(2 * m * m)?)));
    }
    Ok(Some(LinearizedModel {
        n_qubits,
        basis: OperatorBasis::new(n_qubits, coeffs)?,
        p_u,
        phi,
        quadrature_panels: panels,
    }))
}
