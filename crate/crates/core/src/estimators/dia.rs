//! Diluted iterative algorithm: conjugate gradient over a factor L of
//! G = L L† on the linearized likelihood.
//!
//! With δC = Re Tr{R δG} and δG = δL L† + L δL†, the gradient with respect to
//! L is 2 R L. L is a full square matrix, so a pure gradient step maps
//! G to (1 − ηR) G (1 − ηR).

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::search::{conjugate_gradient, CgSettings, Eval};
use super::{diagonal_start, reference_error, DescentTrace, EstimationResult, FitData, Method, TraceRecord};
use crate::lindblad::OperatorBasis;
use crate::{c64, hermitian, CMatrix, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiaOptions {
    pub eta_prime: f64,
    pub xi: f64,
    /// Stop when ‖R L‖_F falls to this value.
    pub tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Trace of the diagonal starting point, used when `init` is absent.
    pub init_trace: f64,
    #[serde(skip)]
    pub init: Option<CMatrix>,
    #[serde(skip)]
    pub reference: Option<CMatrix>,
}

impl Default for DiaOptions {
    fn default() -> Self {
        DiaOptions {
            eta_prime: 0.3,
            xi: 0.5,
            tol: 1e-9,
            rel_tol: 1e-12,
            max_iter: 5000,
            init_trace: 0.25,
            init: None,
            reference: None,
        }
    }
}

pub(crate) fn factor_to_params(l: &CMatrix) -> Vec<f64> {
    l.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub(crate) fn params_to_factor(x: &[f64], m: usize) -> CMatrix {
    CMatrix::from_iterator(m, m, x.chunks_exact(2).map(|c| c64(c[0], c[1])))
}

/// A square root of a PSD matrix, V √Λ.
pub(crate) fn psd_factor(g: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian::eigh(g);
    let mut l = vectors;
    for (k, v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        l.column_mut(k).scale_mut(s);
    }
    l
}

pub fn dia_estimate(data: &FitData, basis: &OperatorBasis, opts: &DiaOptions) -> Result<EstimationResult> {
    let m = data.g_size();
    if basis.len() != m {
        return Err(Error::dim("operator basis does not match the linear model"));
    }
    if !(opts.eta_prime > 0.0) || !(opts.xi > 0.0 && opts.xi < 1.0) {
        return Err(Error::invalid("DIA needs eta' > 0 and xi in (0, 1)"));
    }
    let g0 = match &opts.init {
        Some(g) => {
            hermitian::require_psd(g, crate::lindblad::PSD_TOLERANCE)?;
            g.clone()
        }
        None => diagonal_start(m, opts.init_trace),
    };
    let start = Instant::now();
    let gram = |x: &[f64]| {
        let l = params_to_factor(x, m);
        &l * l.adjoint()
    };
    let mut cost = |x: &[f64]| data.cost(&gram(x));
    let mut eval = |x: &[f64]| {
        let l = params_to_factor(x, m);
        let (c, r) = data.cost_and_gradient(&(&l * l.adjoint()));
        let rl = r * &l;
        Eval {
            cost: c,
            grad: rl.iter().flat_map(|z| [2.0 * z.re, 2.0 * z.im]).collect(),
            stationarity: hermitian::frobenius(&rl),
        }
    };
    let mut trace = DescentTrace::default();
    let reference = opts.reference.as_ref();
    let mut observe = |n: usize, x: &[f64], c: f64, step: f64, stat: f64| {
        let g = gram(x);
        trace.push(TraceRecord {
            iteration: n,
            cost: c,
            step,
            gradient_norm: stat,
            frobenius_error: reference_error(&g, reference),
            chi2: data.chi2_of_probabilities(&data.probabilities(&g)),
        });
    };
    let settings = CgSettings {
        eta_prime: opts.eta_prime,
        xi: opts.xi,
        max_iter: opts.max_iter,
        tol: opts.tol,
        rel_tol: opts.rel_tol,
    };
    let (x, reason, iterations) = conjugate_gradient(
        factor_to_params(&psd_factor(&g0)),
        settings,
        &mut cost,
        &mut eval,
        &mut observe,
    );
    let g_hat = hermitian::symmetrize(&gram(&x));
    Ok(EstimationResult {
        method: Method::Dia,
        g_hat,
        c_hat: None,
        basis: basis.clone(),
        trace,
        converged: reason.is_converged(),
        stop_reason: reason,
        iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
        options: json!(opts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::tests::one_qubit_problem;

    #[test]
    fn factor_round_trip() {
        let l = CMatrix::from_fn(3, 3, |i, j| c64(i as f64, j as f64 - 1.0));
        assert_eq!(params_to_factor(&factor_to_params(&l), 3), l);
        let g = &l * l.adjoint();
        let f = psd_factor(&g);
        assert!((&f * f.adjoint() - g).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn zero_noise_converges_to_zero() {
        let (design, lin, freqs) = one_qubit_problem(&CMatrix::zeros(3, 3));
        let data = FitData::new(&lin, &freqs, &design).unwrap();
        let basis = OperatorBasis::pauli(1).unwrap();
        let opts = DiaOptions {
            max_iter: 20000,
            ..Default::default()
        };
        let result = dia_estimate(&data, &basis, &opts).unwrap();
        assert!(hermitian::frobenius(&result.g_hat) < 1e-8, "{}", hermitian::frobenius(&result.g_hat));
    }

    #[test]
    fn recovers_weak_dephasing() {
        let mut g = CMatrix::zeros(3, 3);
        g[(2, 2)] = c64(0.004, 0.0);
        g[(0, 0)] = c64(0.001, 0.0);
        let (design, lin, freqs) = one_qubit_problem(&g);
        let data = FitData::new(&lin, &freqs, &design).unwrap();
        let basis = OperatorBasis::pauli(1).unwrap();
        let opts = DiaOptions {
            init_trace: 0.01,
            reference: Some(g.clone()),
            ..Default::default()
        };
        let result = dia_estimate(&data, &basis, &opts).unwrap();
        let err = result.trace.last().unwrap().frobenius_error.unwrap();
        assert!(err < 0.02, "relative error {err}");
        assert!(hermitian::min_eigenvalue(&result.g_hat) > -1e-12);
        let costs: Vec<f64> = result.trace.records().iter().map(|r| r.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
