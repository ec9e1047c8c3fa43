mod common;

use common::{random_psd, rng};
use lqt_core::diagnostics::{chi2_for_model, noise_summary, reduced_chi2, sparsifying_basis};
use lqt_core::experiment::OutcomeTensor;
use lqt_core::lindblad::{haar_unitary, predicted_probabilities, LindbladModel, OperatorBasis};
use lqt_core::linearize::TargetUnitary;
use lqt_core::quantum::enumerate_configurations;
use lqt_core::CMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_probabilities_have_zero_chi2(seed in 0u64..10_000) {
        let design = enumerate_configurations(2, &[1.0], 1000).unwrap();
        let target = TargetUnitary::ms_half_pi();
        let model = LindbladModel::new(2, target.hamiltonian_coefficients(), random_psd(15, 0.05, &mut rng(seed))).unwrap();
        let p = predicted_probabilities(&model, &design).unwrap();
        let mut exact = OutcomeTensor::from_probabilities(&design, p).unwrap();
        exact.shots_per_setting = Some(1000);
        prop_assert_eq!(chi2_for_model(&model, &exact, &design).unwrap().chi2, 0.0);
    }

    #[test]
    fn chi2_ignores_configuration_order(seed in 0u64..10_000, n in 2usize..60) {
        let mut r = rng(seed);
        let p: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, 0.01..1.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, 0.0..1.0)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let (a, _, _) = reduced_chi2(&p, &f, 500, 2, n / 2);
        let pp: Vec<f64> = order.iter().map(|&k| p[k]).collect();
        let ff: Vec<f64> = order.iter().map(|&k| f[k]).collect();
        let (b, _, _) = reduced_chi2(&pp, &ff, 500, 2, n / 2);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn jump_rates_sum_to_the_trace(seed in 0u64..10_000, trace in 1e-4f64..1.0) {
        let mut r = rng(seed);
        let g = random_psd(15, trace, &mut r);
        let pauli = OperatorBasis::pauli(2).unwrap();
        let rates: f64 = noise_summary(&g, &pauli, 0.0).unwrap().rates().iter().sum();
        prop_assert!((rates - trace).abs() < 1e-12);

        // Also in a rotated orthonormal basis.
        let rotated = OperatorBasis::new(2, haar_unitary(15, &mut r)).unwrap();
        let g_b = rotated.from_pauli_g(&g);
        let g_b = (&g_b + g_b.adjoint()).scale(0.5);
        let rates: f64 = noise_summary(&g_b, &rotated, 0.0).unwrap().rates().iter().sum();
        prop_assert!((rates - trace).abs() < 1e-10);
    }

    #[test]
    fn sparsifying_basis_is_unitary_and_diagonalizes(seed in 0u64..10_000) {
        let g = random_psd(15, 0.1, &mut rng(seed));
        let pauli = OperatorBasis::pauli(2).unwrap();
        let b = sparsifying_basis(&g, &pauli).unwrap();
        let bb = b.coeffs() * b.coeffs().adjoint();
        let eye = CMatrix::identity(15, 15);
        prop_assert!((bb - eye).iter().all(|z| z.norm() < 1e-12));
        let diag = b.from_pauli_g(&g);
        for i in 0..15 {
            for j in 0..15 {
                if i != j {
                    prop_assert!(diag[(i, j)].norm() < 1e-12);
                }
            }
        }
    }
}
