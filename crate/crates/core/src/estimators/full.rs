//! Full maximum likelihood on the exact propagation model.
//!
//! G = L L† with L lower triangular (real diagonal); the parameters are the
//! entries of L, optionally followed by the Hamiltonian vector. Gradients
//! are central finite differences.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::search::{conjugate_gradient, CgSettings, Eval};
use super::{diagonal_start, reference_error, DescentTrace, EstimationResult, Method, TraceRecord, PROBABILITY_FLOOR};
use crate::diagnostics::reduced_chi2;
use crate::experiment::OutcomeTensor;
use crate::lindblad::{predicted_probabilities, LindbladModel, OperatorBasis, PauliTransfer, ProbabilityMap};
use crate::pauli::PauliBasis;
use crate::quantum::ExperimentDesign;
use crate::{c64, hermitian, CMatrix, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullOptions {
    /// Hamiltonian vector: fixed when `estimate_hamiltonian` is false,
    /// otherwise the starting point.
    pub c: Vec<f64>,
    pub estimate_hamiltonian: bool,
    pub eta_prime: f64,
    pub xi: f64,
    pub max_iter: usize,
    /// Stop when the finite-difference gradient norm falls to this value.
    pub tol: f64,
    pub rel_tol: f64,
    pub fd_step: f64,
    pub init_trace: f64,
    #[serde(skip)]
    pub init: Option<CMatrix>,
    #[serde(skip)]
    pub reference: Option<CMatrix>,
}

impl FullOptions {
    pub fn new(c: Vec<f64>) -> Self {
        FullOptions {
            c,
            estimate_hamiltonian: false,
            eta_prime: 0.3,
            xi: 0.5,
            max_iter: 3000,
            tol: 1e-7,
            rel_tol: 1e-14,
            fd_step: 1e-6,
            init_trace: 0.25,
            init: None,
            reference: None,
        }
    }
}

fn log_likelihood(p: &[f64], freqs: &OutcomeTensor, rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&r| (freqs.values[r], p[r]))
        .filter(|(f, _)| *f != 0.0)
        .map(|(f, p)| -f * p.max(PROBABILITY_FLOOR).ln())
        .sum()
}

fn observed_rows(freqs: &OutcomeTensor, design: &ExperimentDesign) -> Vec<usize> {
    (0..design.n_configurations()).filter(|&r| freqs.is_observed(design, r)).collect()
}

/// −Σ f log p with p from exact propagation.
pub fn cost_full(
    c: &[f64],
    g: &CMatrix,
    freqs: &OutcomeTensor,
    design: &ExperimentDesign,
    basis: &OperatorBasis,
) -> Result<f64> {
    let model = LindbladModel::with_basis(basis.clone(), c.to_vec(), g.clone())?;
    let p = predicted_probabilities(&model, design)?;
    if freqs.len() != p.len() {
        return Err(Error::dim("frequency tensor does not match the design"));
    }
    Ok(log_likelihood(&p, freqs, &observed_rows(freqs, design)))
}

/// Lower-triangular factor ↔ real parameters: diagonal first, then the
/// (re, im) pairs below the diagonal in column-major order.
pub(crate) fn tri_to_params(l: &CMatrix) -> Vec<f64> {
    let m = l.nrows();
    let mut x: Vec<f64> = (0..m).map(|i| l[(i, i)].re).collect();
    for j in 0..m {
        for i in j + 1..m {
            x.push(l[(i, j)].re);
            x.push(l[(i, j)].im);
        }
    }
    x
}

pub(crate) fn params_to_tri(x: &[f64], m: usize) -> CMatrix {
    let mut l = CMatrix::zeros(m, m);
    for i in 0..m {
        l[(i, i)] = c64(x[i], 0.0);
    }
    let mut k = m;
    for j in 0..m {
        for i in j + 1..m {
            l[(i, j)] = c64(x[k], x[k + 1]);
            k += 2;
        }
    }
    l
}

/// Lower-triangular L with L L† = G, tolerant of singular G.
pub(crate) fn cholesky_psd(g: &CMatrix) -> CMatrix {
    let m = g.nrows();
    // A tiny diagonal shift keeps the factorization defined on the boundary.
    let shift = 1e-14 * (1.0 + g.trace().re.abs());
    let shifted = g + CMatrix::identity(m, m).scale(shift);
    match shifted.cholesky() {
        Some(ch) => ch.unpack(),
        None => {
            // Fall back to the QR of a square-root factor.
            let root = super::dia::psd_factor(g);
            let r = root.adjoint().qr().r();
            let mut l = r.adjoint();
            for j in 0..m {
                let z = l[(j, j)];
                if z.norm() > 0.0 {
                    let phase = z.conj() / z.norm();
                    for i in 0..m {
                        l[(i, j)] *= phase;
                    }
                }
            }
            l
        }
    }
}

/// Adds to Λ the change caused by moving parameter `k` of the triangular
/// factor by `delta` (Pauli basis only).
fn perturb_factor_entry(engine: &PauliTransfer, lambda: &mut crate::RMatrix, l: &CMatrix, k: usize, delta: f64) {
    let m = l.nrows();
    // Locate the entry and the direction u ∈ {1, i}.
    let (i, j, u) = if k < m {
        (k, k, c64(1.0, 0.0))
    } else {
        let mut idx = m;
        let mut found = (0, 0, c64(0.0, 0.0));
        'outer: for col in 0..m {
            for row in col + 1..m {
                if k == idx {
                    found = (row, col, c64(1.0, 0.0));
                    break 'outer;
                }
                if k == idx + 1 {
                    found = (row, col, c64(0.0, 1.0));
                    break 'outer;
                }
                idx += 2;
            }
        }
        found
    };
    // G' − G = δ u e_i L_jᵀ* + δ ū L_j e_iᵀ + δ² e_i e_iᵀ, with L_j column j.
    for r in 0..m {
        if r == i {
            continue;
        }
        let z = u * l[(r, j)].conj() * delta;
        if z.re != 0.0 || z.im != 0.0 {
            engine.add_pair(lambda, i, r, z);
            engine.add_pair(lambda, r, i, z.conj());
        }
    }
    let diag = 2.0 * delta * (u * l[(i, j)].conj()).re + delta * delta;
    engine.add_pair(lambda, i, i, c64(diag, 0.0));
}

pub fn full_ml_estimate(
    freqs: &OutcomeTensor,
    design: &ExperimentDesign,
    basis: &OperatorBasis,
    opts: &FullOptions,
) -> Result<EstimationResult> {
    let pauli = PauliBasis::new(design.n_qubits())?;
    let m = pauli.len() - 1;
    if basis.len() != m || basis.n_qubits() != design.n_qubits() {
        return Err(Error::dim("operator basis does not match the design"));
    }
    if opts.c.len() != m {
        return Err(Error::dim(format!("Hamiltonian vector must have {m} entries")));
    }
    if freqs.len() != design.n_configurations() {
        return Err(Error::dim("frequency tensor does not match the design"));
    }
    if !(opts.fd_step > 0.0) || !(opts.eta_prime > 0.0) {
        return Err(Error::invalid("full ML needs fd_step > 0 and eta' > 0"));
    }
    let g0 = match &opts.init {
        Some(g) => {
            hermitian::require_psd(g, crate::lindblad::PSD_TOLERANCE)?;
            g.clone()
        }
        None => diagonal_start(m, opts.init_trace),
    };
    let start = Instant::now();
    let engine = PauliTransfer::new(&pauli);
    let map = ProbabilityMap::new(&pauli, design);
    let rows = observed_rows(freqs, design);
    let n_g = m * m;

    let unpack = |x: &[f64]| -> (CMatrix, Vec<f64>) {
        let l = params_to_tri(&x[..n_g], m);
        let c = if opts.estimate_hamiltonian {
            x[n_g..].to_vec()
        } else {
            opts.c.clone()
        };
        (&l * l.adjoint(), c)
    };
    let probabilities = |x: &[f64]| {
        let (g, c) = unpack(x);
        map.probabilities_vec(&engine.generator(&c, &basis.to_pauli_g(&g)))
    };
    let mut cost = |x: &[f64]| log_likelihood(&probabilities(x), freqs, &rows);
    let h = opts.fd_step;
    let pauli_basis = basis.is_pauli();
    let mut eval = |x: &[f64]| {
        let (g, c) = unpack(x);
        let base = engine.generator(&c, &basis.to_pauli_g(&g));
        let l = params_to_tri(&x[..n_g], m);
        let mut grad = vec![0.0; x.len()];
        let mut lambda = base.clone();
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            let mut at = |delta: f64| {
                if pauli_basis {
                    // The perturbed generator differs from the base one only
                    // through the touched row and column of G.
                    lambda.copy_from(&base);
                    if k < n_g {
                        perturb_factor_entry(&engine, &mut lambda, &l, k, delta);
                    } else {
                        let mut e = vec![0.0; m];
                        e[k - n_g] = delta;
                        engine.add_hamiltonian(&mut lambda, &e);
                    }
                    log_likelihood(&map.probabilities_vec(&lambda), freqs, &rows)
                } else {
                    let orig = xp[k];
                    xp[k] = orig + delta;
                    let v = log_likelihood(&probabilities(&xp), freqs, &rows);
                    xp[k] = orig;
                    v
                }
            };
            let cp = at(h);
            let cm = at(-h);
            grad[k] = (cp - cm) / (2.0 * h);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Eval {
            cost: log_likelihood(&map.probabilities_vec(&base), freqs, &rows),
            grad,
            stationarity: norm,
        }
    };
    let mut trace = DescentTrace::default();
    let reference = opts.reference.as_ref();
    let d = design.dim();
    let mut observe = |n: usize, x: &[f64], c: f64, step: f64, stat: f64| {
        let (g, _) = unpack(x);
        let chi2 = freqs.shots_per_setting.map(|shots| {
            let p = probabilities(x);
            let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
            reduced_chi2(&pick(&p), &pick(&freqs.values), shots, d, rows.len() / d).0
        });
        trace.push(TraceRecord {
            iteration: n,
            cost: c,
            step,
            gradient_norm: stat,
            frobenius_error: reference_error(&g, reference),
            chi2,
        });
    };
    let mut x0 = tri_to_params(&cholesky_psd(&g0));
    if opts.estimate_hamiltonian {
        x0.extend_from_slice(&opts.c);
    }
    let settings = CgSettings {
        eta_prime: opts.eta_prime,
        xi: opts.xi,
        max_iter: opts.max_iter,
        tol: opts.tol,
        rel_tol: opts.rel_tol,
    };
    let (x, reason, iterations) = conjugate_gradient(x0, settings, &mut cost, &mut eval, &mut observe);
    let (g, c) = unpack(&x);
    Ok(EstimationResult {
        method: Method::Full,
        g_hat: hermitian::symmetrize(&g),
        c_hat: opts.estimate_hamiltonian.then_some(c),
        basis: basis.clone(),
        trace,
        converged: reason.is_converged(),
        stop_reason: reason,
        iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
        options: json!(opts),
    })
}
