//! Goodness of fit, error metrics, the shot-noise floor and noise-structure
//! extraction.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{dia_estimate, DiaOptions, FitData};
use crate::experiment::{frequencies, sample_counts, OutcomeTensor};
use crate::lindblad::{decompose_g, predicted_probabilities, LindbladModel, OperatorBasis};
use crate::linearize::{sensitivity_phi, LinearizedModel, TargetUnitary, DEFAULT_PANELS};
use crate::pauli::PauliBasis;
use crate::quantum::ExperimentDesign;
use crate::{hermitian, CMatrix, Error, Result};

/// Value reported for χ² when a zero-probability outcome was observed.
pub const CHI2_CAP: f64 = 1e12;
/// Expected counts below this make the χ² approximation unreliable.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub chi2: f64,
    /// √(2/(d−1)).
    pub sigma: f64,
    pub n_terms: usize,
    pub min_expected_count: f64,
    /// False when any expected count is below [`MIN_EXPECTED_COUNT`].
    pub valid: bool,
    /// True when χ² hit [`CHI2_CAP`].
    pub capped: bool,
}

/// Reduced Pearson statistic N_sc/((d−1)·n_settings) · Σ (p − f)²/p over the
/// given terms. Returns (χ², smallest expected count, capped).
pub fn reduced_chi2(p: &[f64], f: &[f64], shots_per_setting: u64, d: usize, n_settings: usize) -> (f64, f64, bool) {
    let mut sum = 0.0;
    let mut min_expected = f64::INFINITY;
    let mut capped = false;
    for (&p, &f) in p.iter().zip(f) {
        min_expected = min_expected.min(shots_per_setting as f64 * p);
        if p <= 0.0 {
            if f > 0.0 {
                capped = true;
            }
            continue;
        }
        sum += (p - f) * (p - f) / p;
    }
    let chi2 = if capped {
        CHI2_CAP
    } else {
        shots_per_setting as f64 * sum / ((d - 1) as f64 * n_settings.max(1) as f64)
    };
    (chi2, min_expected, capped)
}

/// χ² of model probabilities `p` (design row order) against observed
/// frequencies. With `include_dependent` false the dependent outcome of each
/// setting is skipped.
pub fn pearson_chi2(
    p: &[f64],
    freqs: &OutcomeTensor,
    design: &ExperimentDesign,
    include_dependent: bool,
) -> Result<ChiSquareReport> {
    let n = design.n_configurations();
    if p.len() != n || freqs.len() != n {
        return Err(Error::dim(format!("expected {n} probabilities and frequencies")));
    }
    let d = design.dim();
    let shots = freqs.shots_per_setting.unwrap_or(design.shots_per_setting());
    let rows: Vec<usize> = (0..n)
        .filter(|&r| freqs.is_observed(design, r))
        .filter(|&r| include_dependent || design.configurations()[r].independent)
        .collect();
    let n_settings = freqs.observed.iter().filter(|&&o| o).count();
    let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
    let (chi2, min_expected, capped) = reduced_chi2(&pick(p), &pick(&freqs.values), shots, d, n_settings);
    Ok(ChiSquareReport {
        chi2,
        sigma: (2.0 / (d - 1) as f64).sqrt(),
        n_terms: rows.len(),
        min_expected_count: min_expected,
        valid: min_expected >= MIN_EXPECTED_COUNT,
        capped,
    })
}

/// χ² of an exact model.
pub fn chi2_for_model(model: &LindbladModel, freqs: &OutcomeTensor, design: &ExperimentDesign) -> Result<ChiSquareReport> {
    pearson_chi2(&predicted_probabilities(model, design)?, freqs, design, true)
}

/// χ² of a linear model at G.
pub fn chi2_for_linear(
    lin: &LinearizedModel,
    g: &CMatrix,
    freqs: &OutcomeTensor,
    design: &ExperimentDesign,
) -> Result<ChiSquareReport> {
    pearson_chi2(&crate::linearize::linear_probability(lin, g), freqs, design, true)
}

/// ‖A − B‖_F, divided by ‖B‖_F when `normalized`.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix, normalized: bool) -> f64 {
    let d = hermitian::frobenius(&(a - b));
    if normalized {
        d / hermitian::frobenius(b)
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseFloor {
    /// Median over repeats of the largest eigenvalue of Ĝ.
    pub median: f64,
    pub samples: Vec<f64>,
}

/// Seed for repeat `r` derived from a base seed.
pub fn derive_seed(seed: u64, r: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng.next_u64()
}

/// Estimates noise from data sampled out of the ideal unitary distribution;
/// whatever the estimator finds is attributable to shot noise. With
/// `shots_per_setting` `None` the exact distribution is used.
pub fn shot_noise_floor(
    target: &TargetUnitary,
    design: &ExperimentDesign,
    shots_per_setting: Option<u64>,
    repeats: usize,
    seed: u64,
    opts: &DiaOptions,
) -> Result<ShotNoiseFloor> {
    if repeats == 0 {
        return Err(Error::invalid("at least one repeat is needed"));
    }
    let basis = OperatorBasis::pauli(design.n_qubits())?;
    let lin = sensitivity_phi(target, design, &basis, DEFAULT_PANELS)?;
    let design = match shots_per_setting {
        Some(n) => design.clone().with_shots(n),
        None => design.clone(),
    };
    let samples: Vec<f64> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let freqs = match shots_per_setting {
                Some(_) => frequencies(&sample_counts(&design, lin.p_u(), derive_seed(seed, r as u64))?)?,
                None => OutcomeTensor::from_probabilities(&design, lin.p_u().to_vec())?,
            };
            let data = FitData::new(&lin, &freqs, &design)?;
            let result = dia_estimate(&data, &basis, opts)?;
            Ok(hermitian::eigh(&result.g_hat).0[0])
        })
        .collect::<Result<_>>()?;
    Ok(ShotNoiseFloor {
        median: median(&samples),
        samples,
    })
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile, q ∈ [0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSummary {
    pub rate: f64,
    /// Unit-norm coefficients over the Pauli words E_1..E_{d²−1}, as (re, im).
    pub pauli_coefficients: Vec<[f64; 2]>,
    /// Word labels matching `pauli_coefficients`.
    pub labels: Vec<String>,
    /// Rate at or below the shot-noise floor.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub shot_noise_floor: f64,
    /// Descending.
    pub jumps: Vec<JumpSummary>,
}

impl NoiseSummary {
    pub fn rates(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.rate).collect()
    }
}

/// Rates and Pauli-word decompositions of the jump operators of Ĝ.
pub fn noise_summary(g: &CMatrix, basis: &OperatorBasis, floor: f64) -> Result<NoiseSummary> {
    let pauli = PauliBasis::new(basis.n_qubits())?;
    hermitian::require_hermitian(g, 1e-10)?;
    let jd = decompose_g(g, basis, &pauli)?;
    let labels: Vec<String> = (1..pauli.len()).map(|a| pauli.label(a)).collect();
    let jumps = jd
        .rates
        .iter()
        .enumerate()
        .map(|(n, &rate)| {
            let coeffs = jd.pauli_coefficients(basis, n);
            let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            JumpSummary {
                rate,
                pauli_coefficients: coeffs.iter().map(|z| [z.re / norm, z.im / norm]).collect(),
                labels: labels.clone(),
                inconclusive: rate <= floor,
            }
        })
        .collect();
    Ok(NoiseSummary {
        shot_noise_floor: floor,
        jumps,
    })
}

/// Operator basis built from the eigenvectors of Ĝ (rows b^p = eigenvector
/// p over the Pauli words), in which Ĝ is diagonal.
pub fn sparsifying_basis(g: &CMatrix, basis: &OperatorBasis) -> Result<OperatorBasis> {
    hermitian::require_hermitian(g, 1e-10)?;
    let g_pauli = hermitian::symmetrize(&basis.to_pauli_g(g));
    let (_, vectors) = hermitian::eigh(&g_pauli);
    OperatorBasis::new(basis.n_qubits(), vectors.transpose())
}
