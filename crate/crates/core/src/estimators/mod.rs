//! Estimators of the Lindblad matrix.
//!
//! * [`full_ml_estimate`]: nonlinear CG on the exact likelihood, over a
//!   Cholesky factor of G (and optionally the Hamiltonian vector).
//! * [`dia_estimate`]: CG on the linearized likelihood over G = L L†.
//! * [`pgdm_estimate`]: projected gradient descent with momentum.
//! * [`cs_estimate`]: L1-sparse recovery under a residual bound.
//!
//! The linear methods share [`FitData`], which holds the linearized model in
//! real coordinates of Hermitian G (see [`crate::hermitian`]) so that every
//! predicted probability is one dot product.

mod cs;
mod dia;
mod full;
mod pgdm;
mod search;

use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diagnostics::reduced_chi2;
use crate::experiment::OutcomeTensor;
use crate::hermitian;
use crate::lindblad::io::matrix_to_nested;
use crate::lindblad::OperatorBasis;
use crate::linearize::LinearizedModel;
use crate::quantum::ExperimentDesign;
use crate::{CMatrix, Error, RMatrix, Result};

pub use cs::{cs_estimate, CsOptions};
pub use dia::{dia_estimate, DiaOptions};
pub use full::{cost_full, full_ml_estimate, FullOptions};
pub use pgdm::{pgdm_estimate, PgdmOptions};

/// Lower clamp on probabilities inside logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Full,
    Dia,
    Pgdm,
    Cs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Dia => "dia",
            Method::Pgdm => "pgdm",
            Method::Cs => "cs",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "dia" => Ok(Method::Dia),
            "pgdm" => Ok(Method::Pgdm),
            "cs" => Ok(Method::Cs),
            _ => Err(Error::invalid(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Stationarity measure fell below the tolerance.
    Converged,
    /// Relative cost change stayed below the tolerance.
    CostStalled,
    MaxIterations,
    LineSearchFailed,
    Diverged,
    /// The residual bound could not be met.
    Infeasible,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        matches!(self, StopReason::Converged | StopReason::CostStalled)
    }
}

/// One iteration of a descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub cost: f64,
    pub step: f64,
    pub gradient_norm: f64,
    /// ‖Ĝ − G_ref‖_F / ‖G_ref‖_F when a reference was supplied.
    pub frobenius_error: Option<f64>,
    pub chi2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    records: Vec<TraceRecord>,
}

impl DescentTrace {
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.iteration > last.iteration, "trace iterations must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The latest record at or before `iteration`, so a run that stopped
    /// early keeps its final value for later iterations.
    pub fn at(&self, iteration: usize) -> Option<&TraceRecord> {
        let k = self.records.partition_point(|r| r.iteration <= iteration);
        k.checked_sub(1).map(|k| &self.records[k])
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub method: Method,
    pub g_hat: CMatrix,
    pub c_hat: Option<Vec<f64>>,
    pub basis: OperatorBasis,
    pub trace: DescentTrace,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub wall_seconds: f64,
    /// Echo of the solver options.
    pub options: Value,
}

impl EstimationResult {
    pub fn seconds_per_iteration(&self) -> f64 {
        self.wall_seconds / self.iterations.max(1) as f64
    }

    /// JSON form. Timing is left out unless requested so that repeated runs
    /// produce identical files.
    pub fn to_json(&self, include_timing: bool) -> Value {
        let basis = if self.basis.is_pauli() {
            json!("pauli")
        } else {
            json!({ "coeffs": matrix_to_nested(self.basis.coeffs()) })
        };
        let mut v = json!({
            "method": self.method,
            "options": self.options,
            "n_qubits": self.basis.n_qubits(),
            "basis": basis,
            "G_hat": matrix_to_nested(&self.g_hat),
            "c_hat": self.c_hat,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "trace": self.trace.records(),
        });
        if include_timing {
            v["timing"] = json!({
                "wall_seconds": self.wall_seconds,
                "seconds_per_iteration": self.seconds_per_iteration(),
            });
        }
        v
    }

    pub fn write_json(&self, path: &Path, include_timing: bool) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(include_timing))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Relative Frobenius error against an optional reference.
pub(crate) fn reference_error(g: &CMatrix, reference: Option<&CMatrix>) -> Option<f64> {
    reference.map(|r| crate::diagnostics::frobenius_distance(g, r, hermitian::frobenius(r) > 0.0))
}

/// Diagonal starting point with the requested trace.
pub(crate) fn diagonal_start(m: usize, trace: f64) -> CMatrix {
    CMatrix::identity(m, m).scale(trace / m as f64)
}

/// Linearized likelihood over a set of likelihood terms.
///
/// Each selected configuration is one term. For every measurement setting
/// touched by the selection, the unselected outcomes are merged into one
/// remainder term, which keeps the per-setting likelihood a proper
/// distribution. With every independent configuration selected the
/// remainder terms are exactly the dependent outcomes.
#[derive(Debug, Clone)]
pub struct FitData {
    m: usize,
    d: usize,
    f: Vec<f64>,
    pu: Vec<f64>,
    /// Row t: real sensitivity coordinates of term t.
    a: RMatrix,
    /// Terms that are selected configurations, in selection order.
    configs: Vec<usize>,
    n_settings: usize,
    shots: Option<u64>,
}

impl FitData {
    /// All observed configurations.
    pub fn new(lin: &LinearizedModel, freqs: &OutcomeTensor, design: &ExperimentDesign) -> Result<Self> {
        let rows: Vec<usize> = design
            .independent_rows()
            .into_iter()
            .filter(|&r| freqs.is_observed(design, r))
            .collect();
        Self::subset(lin, freqs, design, &rows)
    }

    /// Only the given configuration rows (plus per-setting remainders).
    pub fn subset(
        lin: &LinearizedModel,
        freqs: &OutcomeTensor,
        design: &ExperimentDesign,
        rows: &[usize],
    ) -> Result<Self> {
        let n = design.n_configurations();
        if lin.len() != n || freqs.len() != n {
            return Err(Error::dim(format!(
                "linear model has {} rows and data {} rows, design needs {n}",
                lin.len(),
                freqs.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::invalid("no configurations selected"));
        }
        let d = design.dim();
        let mut selected = vec![false; n];
        for &r in rows {
            if r >= n {
                return Err(Error::invalid(format!("configuration {r} is out of range")));
            }
            if selected[r] {
                return Err(Error::invalid(format!("configuration {r} selected twice")));
            }
            if !freqs.is_observed(design, r) {
                return Err(Error::invalid(format!("configuration {r} belongs to an unobserved setting")));
            }
            selected[r] = true;
        }
        let m = lin.g_size();
        let params: Vec<Vec<f64>> = (0..n).map(|k| hermitian::sensitivity_params(lin.phi(k))).collect();

        let mut f = Vec::new();
        let mut pu = Vec::new();
        let mut a_rows: Vec<Vec<f64>> = Vec::new();
        let mut configs = Vec::with_capacity(rows.len());
        for &r in rows {
            configs.push(f.len());
            f.push(freqs.values[r]);
            pu.push(lin.p_u()[r]);
            a_rows.push(params[r].clone());
        }
        let mut groups: Vec<usize> = rows.iter().map(|&r| design.group_of(r)).collect();
        groups.sort_unstable();
        groups.dedup();
        for &g in &groups {
            let rest: Vec<usize> = (g * d..(g + 1) * d).filter(|&r| !selected[r]).collect();
            if rest.is_empty() {
                continue;
            }
            f.push(rest.iter().map(|&r| freqs.values[r]).sum());
            pu.push(rest.iter().map(|&r| lin.p_u()[r]).sum());
            let mut acc = vec![0.0; m * m];
            for &r in &rest {
                for (x, y) in acc.iter_mut().zip(&params[r]) {
                    *x += y;
                }
            }
            a_rows.push(acc);
        }
        let a = RMatrix::from_fn(a_rows.len(), m * m, |i, j| a_rows[i][j]);
        Ok(FitData {
            m,
            d,
            f,
            pu,
            a,
            configs,
            n_settings: groups.len(),
            shots: freqs.shots_per_setting,
        })
    }

    /// Side length of G.
    pub fn g_size(&self) -> usize {
        self.m
    }

    pub fn n_terms(&self) -> usize {
        self.f.len()
    }

    /// Number of selected configurations.
    pub fn n_configurations(&self) -> usize {
        self.configs.len()
    }

    pub fn shots_per_setting(&self) -> Option<u64> {
        self.shots
    }

    /// Predicted probability of every term.
    pub fn probabilities(&self, g: &CMatrix) -> Vec<f64> {
        let x = nalgebra::DVector::from_vec(hermitian::to_params(g));
        let p = &self.a * x;
        p.iter().zip(&self.pu).map(|(a, b)| a + b).collect()
    }

    pub fn cost_of_probabilities(&self, p: &[f64]) -> f64 {
        self.f
            .iter()
            .zip(p)
            .filter(|(f, _)| **f != 0.0)
            .map(|(f, p)| -f * p.max(PROBABILITY_FLOOR).ln())
            .sum()
    }

    pub fn cost(&self, g: &CMatrix) -> f64 {
        self.cost_of_probabilities(&self.probabilities(g))
    }

    /// Cost and R = −Σ_k f_k Φ_kᵀ / p_k, with δC = Re Tr{R δG}.
    pub fn cost_and_gradient(&self, g: &CMatrix) -> (f64, CMatrix) {
        let p = self.probabilities(g);
        let w = nalgebra::DVector::from_iterator(
            p.len(),
            self.f
                .iter()
                .zip(&p)
                .map(|(f, p)| if *f == 0.0 { 0.0 } else { -f / p.max(PROBABILITY_FLOOR) }),
        );
        let y = self.a.tr_mul(&w);
        (self.cost_of_probabilities(&p), hermitian::gradient_from_params(y.as_slice(), self.m))
    }

    /// Residual f − p over the selected configurations.
    pub fn config_residual(&self, g: &CMatrix) -> Vec<f64> {
        let p = self.probabilities(g);
        self.configs.iter().map(|&t| self.f[t] - p[t]).collect()
    }

    /// Reduced χ² of the predicted term probabilities, when shot counts are
    /// known.
    pub fn chi2_of_probabilities(&self, p: &[f64]) -> Option<f64> {
        self.shots
            .map(|n| reduced_chi2(p, &self.f, n, self.d, self.n_settings).0)
    }

    pub(crate) fn config_terms(&self) -> &[usize] {
        &self.configs
    }

    pub(crate) fn design_matrix(&self) -> &RMatrix {
        &self.a
    }

    pub(crate) fn frequencies(&self) -> &[f64] {
        &self.f
    }

    pub(crate) fn baseline(&self) -> &[f64] {
        &self.pu
    }
}

/// Linearized cost over all observed configurations.
pub fn cost_linear(
    g: &CMatrix,
    lin: &LinearizedModel,
    freqs: &OutcomeTensor,
    design: &ExperimentDesign,
) -> Result<f64> {
    check_g(g, lin)?;
    Ok(FitData::new(lin, freqs, design)?.cost(g))
}

/// Gradient R of the linearized cost over all observed configurations.
pub fn gradient_r(
    g: &CMatrix,
    lin: &LinearizedModel,
    freqs: &OutcomeTensor,
    design: &ExperimentDesign,
) -> Result<CMatrix> {
    check_g(g, lin)?;
    Ok(FitData::new(lin, freqs, design)?.cost_and_gradient(g).1)
}

fn check_g(g: &CMatrix, lin: &LinearizedModel) -> Result<()> {
    let m = lin.g_size();
    if g.nrows() != m || g.ncols() != m {
        return Err(Error::dim(format!("G must be {m}x{m}")));
    }
    hermitian::require_hermitian(g, 1e-12)
}

/// Nested random subsets of `rows`: `repeats` independent shuffles, each
/// cut into prefixes of `start`, `start + step`, … and finally all rows.
/// Repeat `r` uses stream `r` of a ChaCha8 generator seeded with `seed`.
pub fn grow_configuration_subsets(
    rows: &[usize],
    start: usize,
    step: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<usize>>>> {
    if step == 0 {
        return Err(Error::invalid("subset step must be at least 1"));
    }
    if start == 0 || start > rows.len() {
        return Err(Error::invalid(format!("subset start must be in 1..={}", rows.len())));
    }
    let mut sizes: Vec<usize> = (start..rows.len()).step_by(step).collect();
    sizes.push(rows.len());
    Ok((0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut order = rows.to_vec();
            order.shuffle(&mut rng);
            sizes.iter().map(|&n| order[..n].to_vec()).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::OutcomeTensor;
    use crate::lindblad::{predicted_probabilities, sample_hs_random_g, LindbladModel};
    use crate::linearize::{sensitivity_phi, TargetUnitary};
    use crate::quantum::enumerate_configurations;

    pub(super) fn one_qubit_problem(g_true: &CMatrix) -> (ExperimentDesign, LinearizedModel, OutcomeTensor) {
        let design = enumerate_configurations(1, &[1.0], 1000).unwrap();
        let target = TargetUnitary::rx_half_pi();
        let lin = sensitivity_phi(&target, &design, &OperatorBasis::pauli(1).unwrap(), 32).unwrap();
        let model = LindbladModel::new(1, target.hamiltonian_coefficients(), g_true.clone()).unwrap();
        let p = predicted_probabilities(&model, &design).unwrap();
        let freqs = OutcomeTensor::from_probabilities(&design, p).unwrap();
        (design, lin, freqs)
    }

    #[test]
    fn subset_sizes_and_nesting() {
        let rows: Vec<usize> = (0..432).collect();
        let sched = grow_configuration_subsets(&rows, 33, 21, 3, 7).unwrap();
        let sizes: Vec<usize> = sched[0].iter().map(|s| s.len()).collect();
        assert_eq!(sizes.first(), Some(&33));
        assert_eq!(sizes[1], 54);
        assert_eq!(sizes.last(), Some(&432));
        assert!(sizes.windows(2).all(|w| w[1] - w[0] == 21));
        for seq in &sched {
            for w in seq.windows(2) {
                assert_eq!(&w[1][..w[0].len()], &w[0][..]);
            }
        }
        assert_ne!(sched[0][0], sched[1][0]);
        assert!(grow_configuration_subsets(&rows, 0, 21, 1, 0).is_err());
        assert!(grow_configuration_subsets(&rows, 33, 0, 1, 0).is_err());
    }

    #[test]
    fn full_selection_covers_every_outcome() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_hs_random_g(3, 0.05, &mut rng);
        let (design, lin, freqs) = one_qubit_problem(&g);
        let data = FitData::new(&lin, &freqs, &design).unwrap();
        assert_eq!(data.n_terms(), design.n_configurations());
        assert_eq!(data.n_configurations(), 12);
        // Direct sum over all rows.
        let p = crate::linearize::linear_probability(&lin, &g);
        let direct: f64 = freqs.values.iter().zip(&p).map(|(f, p)| -f * p.ln()).sum();
        assert!((data.cost(&g) - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_zero_with_baseline_frequencies() {
        let (design, lin, _) = one_qubit_problem(&CMatrix::zeros(3, 3));
        // Rounding leaves some certain-zero outcomes at ~1e-17; treat as zero.
        let f: Vec<f64> = lin.p_u().iter().map(|&p| if p < 1e-12 { 0.0 } else { p }).collect();
        let freqs = OutcomeTensor::from_probabilities(&design, f.clone()).unwrap();
        let r = gradient_r(&CMatrix::zeros(3, 3), &lin, &freqs, &design).unwrap();
        let mut direct = CMatrix::zeros(3, 3);
        for k in 0..design.n_configurations() {
            if f[k] > 0.0 {
                direct -= lin.phi(k).transpose();
            }
        }
        assert!((r - direct).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn json_has_no_timing_by_default() {
        let result = EstimationResult {
            method: Method::Dia,
            g_hat: CMatrix::zeros(3, 3),
            c_hat: None,
            basis: OperatorBasis::pauli(1).unwrap(),
            trace: DescentTrace::default(),
            converged: true,
            stop_reason: StopReason::Converged,
            iterations: 0,
            wall_seconds: 1.0,
            options: json!({}),
        };
        assert!(result.to_json(false).get("timing").is_none());
        assert!(result.to_json(true).get("timing").is_some());
        assert_eq!("pgdm".parse::<Method>().unwrap(), Method::Pgdm);
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn trace_lookup_pads_final_value() {
        let mut t = DescentTrace::default();
        for i in [0, 1, 5] {
            t.push(TraceRecord {
                iteration: i,
                cost: i as f64,
                step: 0.0,
                gradient_norm: 0.0,
                frobenius_error: None,
                chi2: None,
            });
        }
        assert_eq!(t.at(3).unwrap().iteration, 1);
        assert_eq!(t.at(100).unwrap().iteration, 5);
    }
}
