mod common;

use common::{max_abs_diff_slice, random_psd, rng};
use lqt_core::lindblad::{haar_unitary, predicted_probabilities, LindbladModel, OperatorBasis};
use lqt_core::linearize::{
    linear_probability, linear_probability_complex, sensitivity_phi, unitary_baseline, TargetUnitary,
    DEFAULT_PANELS,
};
use lqt_core::quantum::enumerate_configurations;
use proptest::prelude::*;

#[test]
fn baseline_is_the_noiseless_prediction() {
    let design = enumerate_configurations(2, &[0.5, 1.0], 1).unwrap();
    let target = TargetUnitary::ms_half_pi();
    let lin = sensitivity_phi(&target, &design, &OperatorBasis::pauli(2).unwrap(), DEFAULT_PANELS).unwrap();
    let noiseless = LindbladModel::new(2, target.hamiltonian_coefficients(), lqt_core::CMatrix::zeros(15, 15)).unwrap();
    let exact = predicted_probabilities(&noiseless, &design).unwrap();
    assert!(max_abs_diff_slice(lin.p_u(), &exact) < 1e-12);
    assert!(max_abs_diff_slice(&unitary_baseline(&target, &design).unwrap(), &exact) < 1e-12);
}

#[test]
fn error_shrinks_quadratically_with_noise() {
    let design = enumerate_configurations(1, &[1.0], 1).unwrap();
    let target = TargetUnitary::rx_half_pi();
    let lin = sensitivity_phi(&target, &design, &OperatorBasis::pauli(1).unwrap(), DEFAULT_PANELS).unwrap();
    let shape = random_psd(3, 1.0, &mut rng(4));
    let err = |scale: f64| {
        let g = shape.scale(scale);
        let model = LindbladModel::new(1, target.hamiltonian_coefficients(), g.clone()).unwrap();
        max_abs_diff_slice(&linear_probability(&lin, &g), &predicted_probabilities(&model, &design).unwrap())
    };
    let (a, b) = (err(1e-2), err(1e-3));
    let slope = (a / b).log10();
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hermitian_g_gives_real_probabilities(seed in 0u64..10_000) {
        let design = enumerate_configurations(2, &[1.0], 1).unwrap();
        let lin = sensitivity_phi(&TargetUnitary::ms_half_pi(), &design, &OperatorBasis::pauli(2).unwrap(), DEFAULT_PANELS).unwrap();
        let g = random_psd(15, 0.1, &mut rng(seed));
        for z in linear_probability_complex(&lin, &g) {
            prop_assert!(z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn rotated_basis_leaves_predictions_unchanged(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let design = enumerate_configurations(1, &[0.7, 1.0], 1).unwrap();
        let target = TargetUnitary::rx_half_pi();
        let pauli = OperatorBasis::pauli(1).unwrap();
        let rotated = OperatorBasis::new(1, haar_unitary(3, &mut r)).unwrap();
        let lin_p = sensitivity_phi(&target, &design, &pauli, DEFAULT_PANELS).unwrap();
        let lin_b = sensitivity_phi(&target, &design, &rotated, DEFAULT_PANELS).unwrap();
        let g_pauli = random_psd(3, 0.05, &mut r);
        let g_b = rotated.from_pauli_g(&g_pauli);
        let direct = linear_probability(&lin_b, &g_b);
        let reference = linear_probability(&lin_p, &g_pauli);
        prop_assert!(max_abs_diff_slice(&direct, &reference) < 1e-9);
        let mapped = linear_probability(&lin_p.in_basis(&rotated).unwrap(), &g_b);
        prop_assert!(max_abs_diff_slice(&mapped, &reference) < 1e-9);
    }
}
