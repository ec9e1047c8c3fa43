//! Random and structured Lindblad matrices used as ground truth in benchmarks.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LindbladModel;
use crate::hermitian;
use crate::{c64, CMatrix, Error, Result, C64};

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re * s, im * s)
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// R's diagonal moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        let phase = if norm > 0.0 { rjj / norm } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Hilbert–Schmidt random Lindblad matrix: a Haar-random pure state on
/// C^dim ⊗ C^dim reduced to the first factor, scaled to trace `trace_scale`.
pub fn sample_hs_random_g<R: Rng + ?Sized>(dim: usize, trace_scale: f64, rng: &mut R) -> CMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let u = haar_unitary(dim * dim, rng);
    // Image of the first unit vector.
    let v = u.column(0);
    let psi = CMatrix::from_fn(dim, dim, |i, j| v[i * dim + j]);
    let g = &psi * psi.adjoint();
    let tr = g.trace().re;
    hermitian::symmetrize(&g.scale(trace_scale / tr))
}

/// Haar-random rank-`rank` projector scaled to trace `trace_scale`.
pub fn sample_projector_g<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    trace_scale: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::invalid(format!("rank must be in 1..={dim}, got {rank}")));
    }
    let u = haar_unitary(dim, rng);
    let v = u.columns(0, rank);
    let g = (&v * v.adjoint()).scale(trace_scale / rank as f64);
    Ok(hermitian::symmetrize(&g))
}

/// Rates of the five-channel two-qubit noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredRates {
    pub deph1: f64,
    pub deph2: f64,
    pub damp1: f64,
    pub damp2: f64,
    pub bit_flip: f64,
}

impl StructuredRates {
    pub fn as_array(&self) -> [f64; 5] {
        [self.deph1, self.deph2, self.damp1, self.damp2, self.bit_flip]
    }

    /// Jump operators as coefficient vectors over E_1..E_15, in the order
    /// σz⊗1, 1⊗σz, σ−⊗1, 1⊗σ−, σx⊗σx.
    pub fn jump_vectors() -> [DVector<C64>; 5] {
        let unit = |entries: &[(usize, C64)]| {
            let mut v = DVector::from_element(15, c64(0.0, 0.0));
            for &(alpha, z) in entries {
                v[alpha - 1] = z;
            }
            v
        };
        let half = c64(0.5, 0.0);
        let minus_half_i = c64(0.0, -0.5);
        [
            unit(&[(12, c64(1.0, 0.0))]),
            unit(&[(3, c64(1.0, 0.0))]),
            // σ− = (σx − iσy)/2
            unit(&[(4, half), (8, minus_half_i)]),
            unit(&[(1, half), (2, minus_half_i)]),
            unit(&[(5, c64(1.0, 0.0))]),
        ]
    }
}

/// Two-qubit model with dephasing, amplitude damping on each qubit and a
/// correlated bit flip; no Hamiltonian.
pub fn structured_noise_g(rates: &StructuredRates) -> Result<LindbladModel> {
    let values = rates.as_array();
    if values.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::invalid("decay rates must be finite and nonnegative"));
    }
    let mut g = CMatrix::zeros(15, 15);
    for (rate, v) in values.iter().zip(StructuredRates::jump_vectors()) {
        if *rate > 0.0 {
            g += (&v * v.adjoint()).scale(*rate);
        }
    }
    LindbladModel::new(2, vec![0.0; 15], g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::jump_decomposition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(9, &mut rng);
        let e = u.adjoint() * &u - CMatrix::identity(9, 9);
        assert!(e.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn hs_sample_is_psd_with_requested_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = sample_hs_random_g(15, 0.25, &mut rng);
        assert_eq!(hermitian::max_asymmetry(&g), 0.0);
        assert!(hermitian::min_eigenvalue(&g) > -1e-14);
        assert!((g.trace().re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn projector_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = sample_projector_g(15, 3, 0.01, &mut rng).unwrap();
        let (vals, _) = hermitian::eigh(&g);
        for (k, v) in vals.iter().enumerate() {
            let expect = if k < 3 { 0.01 / 3.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-14, "{k}: {v}");
        }
        assert!(sample_projector_g(4, 0, 1.0, &mut rng).is_err());
        assert!(sample_projector_g(4, 5, 1.0, &mut rng).is_err());
    }

    #[test]
    fn bit_flip_only() {
        let model = structured_noise_g(&StructuredRates {
            deph1: 0.0,
            deph2: 0.0,
            damp1: 0.0,
            damp2: 0.0,
            bit_flip: 0.03,
        })
        .unwrap();
        for (k, z) in model.g().iter().enumerate() {
            let (i, j) = (k % 15, k / 15);
            let expect = if i == 4 && j == 4 { 0.03 } else { 0.0 };
            assert!((z - c64(expect, 0.0)).norm() < 1e-16);
        }
    }

    #[test]
    fn damping_block() {
        let gamma = 0.08;
        let model = structured_noise_g(&StructuredRates {
            deph1: 0.0,
            deph2: 0.0,
            damp1: gamma,
            damp2: 0.0,
            bit_flip: 0.0,
        })
        .unwrap();
        let g = model.g();
        // Indices of σx⊗1 and σy⊗1 are 4 and 8, i.e. rows 3 and 7.
        let q = gamma / 4.0;
        assert!((g[(3, 3)] - c64(q, 0.0)).norm() < 1e-16);
        assert!((g[(3, 7)] - c64(0.0, q)).norm() < 1e-16);
        assert!((g[(7, 3)] - c64(0.0, -q)).norm() < 1e-16);
        assert!((g[(7, 7)] - c64(q, 0.0)).norm() < 1e-16);
        let nonzero = g.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn structured_round_trip_through_decomposition() {
        let rates = StructuredRates {
            deph1: 0.011,
            deph2: 0.007,
            damp1: 0.018,
            damp2: 0.013,
            bit_flip: 0.004,
        };
        let model = structured_noise_g(&rates).unwrap();
        let jd = jump_decomposition(&model).unwrap();
        // Jump vectors are orthogonal, so the eigenvalues are rate × |v|².
        let mut expect: Vec<f64> = rates
            .as_array()
            .iter()
            .zip(StructuredRates::jump_vectors())
            .map(|(r, v)| r * v.norm_squared())
            .collect();
        expect.sort_by(|a, b| b.total_cmp(a));
        for (k, e) in expect.iter().enumerate() {
            assert!((jd.rates[k] - e).abs() < 1e-14);
        }
        assert!(jd.rates[5..].iter().all(|r| r.abs() < 1e-14));
        // Each recovered operator is proportional to one planted operator.
        let planted = StructuredRates::jump_vectors();
        for n in 0..5 {
            let u = jd.vectors.column(n);
            let best = planted
                .iter()
                .map(|v| (v.adjoint() * u)[0].norm() / v.norm())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-12);
        }
        assert!(structured_noise_g(&StructuredRates { deph1: -1.0, ..rates }).is_err());
    }
}
