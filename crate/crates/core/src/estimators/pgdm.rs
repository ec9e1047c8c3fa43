//! Projected gradient descent with momentum on the linearized likelihood.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{diagonal_start, reference_error, DescentTrace, EstimationResult, FitData, Method, StopReason, TraceRecord};
use crate::lindblad::OperatorBasis;
use crate::{hermitian, CMatrix, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PgdmOptions {
    /// Momentum retention ("friction").
    pub gamma: f64,
    pub eta: f64,
    /// Stop when |ΔC| ≤ tol · max(1, |C|).
    pub tol: f64,
    pub max_iter: usize,
    pub init_trace: f64,
    /// Zero the momentum whenever the cost increases.
    pub momentum_reset: bool,
    /// Consecutive cost increases treated as divergence.
    pub divergence_window: usize,
    #[serde(skip)]
    pub init: Option<CMatrix>,
    #[serde(skip)]
    pub reference: Option<CMatrix>,
}

impl Default for PgdmOptions {
    fn default() -> Self {
        PgdmOptions {
            gamma: 0.99,
            eta: 3e-4,
            tol: 1e-10,
            max_iter: 5000,
            init_trace: 0.25,
            momentum_reset: false,
            divergence_window: 50,
            init: None,
            reference: None,
        }
    }
}

pub fn pgdm_estimate(data: &FitData, basis: &OperatorBasis, opts: &PgdmOptions) -> Result<EstimationResult> {
    let m = data.g_size();
    if basis.len() != m {
        return Err(Error::dim("operator basis does not match the linear model"));
    }
    if !(opts.gamma >= 0.0 && opts.gamma < 1.0) || !(opts.eta > 0.0) {
        return Err(Error::invalid("pGDM needs gamma in [0, 1) and eta > 0"));
    }
    let start = Instant::now();
    let mut g = hermitian::project_psd(opts.init.as_ref().unwrap_or(&diagonal_start(m, opts.init_trace)));
    let mut momentum = CMatrix::zeros(m, m);
    let (mut cost, mut r) = data.cost_and_gradient(&g);
    let mut trace = DescentTrace::default();
    let reference = opts.reference.as_ref();
    let record = |n: usize, g: &CMatrix, cost: f64, step: f64, r: &CMatrix| TraceRecord {
        iteration: n,
        cost,
        step,
        gradient_norm: hermitian::frobenius(r),
        frobenius_error: reference_error(g, reference),
        chi2: data.chi2_of_probabilities(&data.probabilities(g)),
    };
    trace.push(record(0, &g, cost, 0.0, &r));
    let mut increases = 0usize;
    let mut reason = StopReason::MaxIterations;
    let mut iterations = opts.max_iter;
    for n in 1..=opts.max_iter {
        momentum = momentum.scale(opts.gamma) - r.scale(opts.eta);
        let next = hermitian::project_psd(&(&g + &momentum));
        let step = hermitian::frobenius(&(&next - &g));
        g = next;
        let (c_new, r_new) = data.cost_and_gradient(&g);
        r = r_new;
        trace.push(record(n, &g, c_new, step, &r));
        let change = c_new - cost;
        cost = c_new;
        if change.abs() <= opts.tol * cost.abs().max(1.0) {
            reason = StopReason::CostStalled;
            iterations = n;
            break;
        }
        if change > 0.0 {
            increases += 1;
            if opts.momentum_reset {
                momentum.fill(crate::c64(0.0, 0.0));
            }
            if increases >= opts.divergence_window {
                reason = StopReason::Diverged;
                iterations = n;
                break;
            }
        } else {
            increases = 0;
        }
    }
    Ok(EstimationResult {
        method: Method::Pgdm,
        g_hat: g,
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
    use crate::c64;
    use crate::estimators::tests::one_qubit_problem;

    #[test]
    fn recovers_rank_one_noise() {
        let mut g = CMatrix::zeros(3, 3);
        g[(2, 2)] = c64(0.005, 0.0);
        let (design, lin, freqs) = one_qubit_problem(&g);
        let data = FitData::new(&lin, &freqs, &design).unwrap();
        let opts = PgdmOptions {
            init_trace: 0.01,
            reference: Some(g.clone()),
            max_iter: 20000,
            ..Default::default()
        };
        let result = pgdm_estimate(&data, &OperatorBasis::pauli(1).unwrap(), &opts).unwrap();
        let err = result.trace.last().unwrap().frobenius_error.unwrap();
        assert!(err < 0.02, "relative error {err}, {:?}", result.stop_reason);
        assert!(hermitian::min_eigenvalue(&result.g_hat) > -1e-12);
        assert_eq!(hermitian::max_asymmetry(&result.g_hat), 0.0);
    }
}
