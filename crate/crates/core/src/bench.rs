//! Reproduction harnesses for the benchmark figures. Each harness returns
//! the raw per-draw results together with a plot-ready table.
//!
//! Draw `r` uses its own generator seeded with `derive_seed(seed, r)`, so
//! results do not depend on how rayon schedules the draws.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{derive_seed, frobenius_distance, median, quantile, shot_noise_floor, sparsifying_basis};
use crate::estimators::{
    cs_estimate, dia_estimate, full_ml_estimate, grow_configuration_subsets, pgdm_estimate, CsOptions, DiaOptions,
    EstimationResult, FitData, FullOptions, PgdmOptions,
};
use crate::experiment::{frequencies, sample_counts, OutcomeTensor};
use crate::lindblad::{
    predicted_probabilities, sample_hs_random_g, sample_projector_g, structured_noise_g, LindbladModel,
    OperatorBasis, StructuredRates,
};
use crate::linearize::{sensitivity_phi, LinearizedModel, TargetUnitary, DEFAULT_PANELS};
use crate::quantum::{enumerate_configurations, ExperimentDesign};
use crate::{c64, CMatrix, Error, Result};

/// Rates used for the five-channel model.
pub const STRUCTURED_RATES: StructuredRates = StructuredRates {
    deph1: 0.011,
    deph2: 0.007,
    damp1: 0.018,
    damp2: 0.013,
    bit_flip: 0.004,
};

/// Column-labelled numeric table written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// CSV with an optional block of `# key: value` comment lines on top.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in header {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_value(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_value(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// Quantiles (20 %, 50 %, 80 %).
fn spread(values: &[f64]) -> [f64; 3] {
    [quantile(values, 0.2), median(values), quantile(values, 0.8)]
}

fn draw_rng(seed: u64, r: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64))
}

/// Same π/2 rotation about a random axis on every qubit.
pub fn random_local_rotation<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<TargetUnitary> {
    let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let axis = [v[0] / norm, v[1] / norm, v[2] / norm];
    TargetUnitary::local_rotation(n_qubits, axis, std::f64::consts::FRAC_PI_2)
}

fn exact_frequencies(target: &TargetUnitary, g: &CMatrix, design: &ExperimentDesign) -> Result<OutcomeTensor> {
    let model = LindbladModel::new(target.n_qubits(), target.hamiltonian_coefficients(), g.clone())?;
    OutcomeTensor::from_probabilities(design, predicted_probabilities(&model, design)?)
}

/// Relative error per iteration 0..=len−1, holding the last value.
fn error_curve(result: &EstimationResult, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            result
                .trace
                .at(n)
                .and_then(|rec| rec.frobenius_error)
                .unwrap_or(f64::NAN)
        })
        .collect()
}

/// Error curves of one method across draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodCurves {
    /// curves[draw][iteration]
    pub curves: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub seconds_per_iteration: Vec<f64>,
}

impl MethodCurves {
    fn from_results(results: &[EstimationResult], len: usize) -> Self {
        MethodCurves {
            curves: results.iter().map(|r| error_curve(r, len)).collect(),
            iterations: results.iter().map(|r| r.iterations).collect(),
            seconds_per_iteration: results.iter().map(|r| r.seconds_per_iteration()).collect(),
        }
    }

    /// Quantiles across draws at iteration `n`.
    pub fn spread_at(&self, n: usize) -> [f64; 3] {
        let v: Vec<f64> = self.curves.iter().map(|c| c[n.min(c.len() - 1)]).collect();
        spread(&v)
    }

    pub fn median_curve(&self) -> Vec<f64> {
        let len = self.curves.iter().map(Vec::len).max().unwrap_or(0);
        (0..len).map(|n| self.spread_at(n)[1]).collect()
    }

    pub fn final_errors(&self) -> Vec<f64> {
        self.curves.iter().map(|c| *c.last().unwrap_or(&f64::NAN)).collect()
    }

    /// First iteration whose error is at or below `threshold`, per draw
    /// (`None` if never reached).
    pub fn iterations_to(&self, threshold: f64) -> Vec<Option<usize>> {
        self.curves.iter().map(|c| c.iter().position(|&e| e <= threshold)).collect()
    }

    pub fn median_seconds_per_iteration(&self) -> f64 {
        median(&self.seconds_per_iteration)
    }
}

#[derive(Debug, Clone)]
pub struct Fig2Options {
    pub repeats: usize,
    pub seed: u64,
    pub trace_scale: f64,
    pub dia: DiaOptions,
    /// Iterations of full ML; 0 skips it.
    pub full_iterations: usize,
}

impl Default for Fig2Options {
    fn default() -> Self {
        Fig2Options {
            repeats: 20,
            seed: 2,
            trace_scale: 0.25,
            dia: DiaOptions::default(),
            full_iterations: 3000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig2Result {
    pub dia: MethodCurves,
    pub full: Option<MethodCurves>,
}

impl Fig2Result {
    pub fn table(&self) -> Table {
        let mut cols = vec!["iteration", "dia_p20", "dia_median", "dia_p80"];
        if self.full.is_some() {
            cols.extend(["full_p20", "full_median", "full_p80"]);
        }
        let mut t = Table::new(&cols);
        let len = self
            .dia
            .curves
            .iter()
            .chain(self.full.iter().flat_map(|f| f.curves.iter()))
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        for n in 0..len {
            let mut row = vec![n as f64];
            row.extend(self.dia.spread_at(n));
            if let Some(f) = &self.full {
                row.extend(f.spread_at(n));
            }
            t.push(row);
        }
        t
    }
}

/// DIA against full ML on exact data from random two-qubit models with a
/// random local rotation as target.
pub fn fig2(opts: &Fig2Options) -> Result<Fig2Result> {
    let design = enumerate_configurations(2, &[1.0], 1)?;
    let basis = OperatorBasis::pauli(2)?;
    let pairs: Vec<(EstimationResult, Option<EstimationResult>)> = (0..opts.repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = draw_rng(opts.seed, r);
            let target = random_local_rotation(2, &mut rng)?;
            let g = sample_hs_random_g(15, opts.trace_scale, &mut rng);
            let freqs = exact_frequencies(&target, &g, &design)?;
            let lin = sensitivity_phi(&target, &design, &basis, DEFAULT_PANELS)?;
            let data = FitData::new(&lin, &freqs, &design)?;
            let dia = dia_estimate(
                &data,
                &basis,
                &DiaOptions {
                    reference: Some(g.clone()),
                    init_trace: opts.trace_scale,
                    ..opts.dia.clone()
                },
            )?;
            let full = if opts.full_iterations > 0 {
                let mut fo = FullOptions::new(target.hamiltonian_coefficients());
                fo.max_iter = opts.full_iterations;
                fo.init_trace = opts.trace_scale;
                fo.reference = Some(g);
                Some(full_ml_estimate(&freqs, &design, &basis, &fo)?)
            } else {
                None
            };
            Ok((dia, full))
        })
        .collect::<Result<_>>()?;
    let dia: Vec<EstimationResult> = pairs.iter().map(|p| p.0.clone()).collect();
    let dia_len = dia.iter().map(|r| r.iterations).max().unwrap_or(0) + 1;
    let full = if opts.full_iterations > 0 {
        let full: Vec<EstimationResult> = pairs.into_iter().filter_map(|p| p.1).collect();
        Some(MethodCurves::from_results(&full, opts.full_iterations + 1))
    } else {
        None
    };
    Ok(Fig2Result {
        dia: MethodCurves::from_results(&dia, dia_len.max(full.as_ref().map_or(0, |_| opts.full_iterations + 1))),
        full,
    })
}

#[derive(Debug, Clone)]
pub struct Fig3Options {
    pub repeats: usize,
    pub seed: u64,
    pub trace_scale: f64,
    pub threshold: f64,
    pub dia: DiaOptions,
    pub pgdm: PgdmOptions,
}

impl Default for Fig3Options {
    fn default() -> Self {
        Fig3Options {
            repeats: 20,
            seed: 3,
            trace_scale: 0.01,
            threshold: 0.1,
            dia: DiaOptions::default(),
            // Step and stopping tuned for this trace scale.
            pgdm: PgdmOptions {
                eta: 3e-5,
                tol: 1e-13,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Ensemble {
    pub dia: MethodCurves,
    pub pgdm: MethodCurves,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Result {
    pub hs: Fig3Ensemble,
    pub rank_one: Fig3Ensemble,
    pub threshold: f64,
}

impl Fig3Result {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "iteration",
            "hs_dia_p20",
            "hs_dia_median",
            "hs_dia_p80",
            "hs_pgdm_p20",
            "hs_pgdm_median",
            "hs_pgdm_p80",
            "rank1_dia_p20",
            "rank1_dia_median",
            "rank1_dia_p80",
            "rank1_pgdm_p20",
            "rank1_pgdm_median",
            "rank1_pgdm_p80",
        ]);
        let all = [&self.hs.dia, &self.hs.pgdm, &self.rank_one.dia, &self.rank_one.pgdm];
        let len = all.iter().flat_map(|m| m.curves.iter()).map(Vec::len).max().unwrap_or(0);
        for n in 0..len {
            let mut row = vec![n as f64];
            for m in all {
                row.extend(m.spread_at(n));
            }
            t.push(row);
        }
        t
    }
}

/// Median over draws of the iterations needed to reach the threshold,
/// counting draws that never reach it as `cap`.
pub fn median_iterations_to(curves: &MethodCurves, threshold: f64, cap: usize) -> f64 {
    let v: Vec<f64> = curves
        .iterations_to(threshold)
        .into_iter()
        .map(|n| n.unwrap_or(cap) as f64)
        .collect();
    median(&v)
}

/// DIA against pGDM on Hilbert–Schmidt and rank-one Lindblad matrices.
pub fn fig3(opts: &Fig3Options) -> Result<Fig3Result> {
    let design = enumerate_configurations(2, &[1.0], 1)?;
    let basis = OperatorBasis::pauli(2)?;
    let run = |rank_one: bool| -> Result<Fig3Ensemble> {
        let salt = if rank_one { 1_000_003 } else { 0 };
        let pairs: Vec<(EstimationResult, EstimationResult)> = (0..opts.repeats)
            .into_par_iter()
            .map(|r| {
                let mut rng = draw_rng(opts.seed, r + salt);
                let target = random_local_rotation(2, &mut rng)?;
                let g = if rank_one {
                    sample_projector_g(15, 1, opts.trace_scale, &mut rng)?
                } else {
                    sample_hs_random_g(15, opts.trace_scale, &mut rng)
                };
                let freqs = exact_frequencies(&target, &g, &design)?;
                let lin = sensitivity_phi(&target, &design, &basis, DEFAULT_PANELS)?;
                let data = FitData::new(&lin, &freqs, &design)?;
                let dia = dia_estimate(
                    &data,
                    &basis,
                    &DiaOptions {
                        reference: Some(g.clone()),
                        init_trace: opts.trace_scale,
                        ..opts.dia.clone()
                    },
                )?;
                let pgdm = pgdm_estimate(
                    &data,
                    &basis,
                    &PgdmOptions {
                        reference: Some(g),
                        init_trace: opts.trace_scale,
                        ..opts.pgdm.clone()
                    },
                )?;
                Ok((dia, pgdm))
            })
            .collect::<Result<_>>()?;
        let len = pairs
            .iter()
            .map(|(a, b)| a.iterations.max(b.iterations))
            .max()
            .unwrap_or(0)
            + 1;
        let dia: Vec<EstimationResult> = pairs.iter().map(|p| p.0.clone()).collect();
        let pgdm: Vec<EstimationResult> = pairs.into_iter().map(|p| p.1).collect();
        Ok(Fig3Ensemble {
            dia: MethodCurves::from_results(&dia, len),
            pgdm: MethodCurves::from_results(&pgdm, len),
        })
    };
    Ok(Fig3Result {
        hs: run(false)?,
        rank_one: run(true)?,
        threshold: opts.threshold,
    })
}

#[derive(Debug, Clone)]
pub struct Fig4Options {
    pub repeats: usize,
    pub seed: u64,
    pub start: usize,
    pub step: usize,
    /// Restrict to these subset sizes (all sizes when empty).
    pub sizes: Vec<usize>,
    pub rates: StructuredRates,
    pub cs: CsOptions,
    pub dia: DiaOptions,
}

impl Default for Fig4Options {
    fn default() -> Self {
        Fig4Options {
            repeats: 20,
            seed: 4,
            start: 33,
            step: 21,
            sizes: Vec::new(),
            rates: STRUCTURED_RATES,
            cs: CsOptions::default(),
            dia: DiaOptions::default(),
        }
    }
}

/// Final relative errors per subset size, errors[size_index][repeat].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetErrors {
    pub sizes: Vec<usize>,
    pub errors: Vec<Vec<f64>>,
}

impl SubsetErrors {
    pub fn median_at(&self, size: usize) -> Option<f64> {
        let k = self.sizes.iter().position(|&s| s == size)?;
        Some(median(&self.errors[k]))
    }

    pub fn spread_at_index(&self, k: usize) -> [f64; 3] {
        spread(&self.errors[k])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig4Result {
    pub cs: SubsetErrors,
    pub dia: SubsetErrors,
    /// Estimates on the complete configuration set of the first schedule.
    #[serde(skip)]
    pub full_set: Option<(CMatrix, CMatrix)>,
    #[serde(skip)]
    pub g_true: CMatrix,
}

impl Fig4Result {
    pub fn table(&self) -> Table {
        subset_table(&[("cs", &self.cs), ("dia", &self.dia)])
    }
}

fn subset_table(methods: &[(&str, &SubsetErrors)]) -> Table {
    let mut names = vec!["n_configurations".to_string()];
    for (m, _) in methods {
        for q in ["p20", "median", "p80"] {
            names.push(format!("{m}_{q}"));
        }
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for (k, &size) in methods[0].1.sizes.iter().enumerate() {
        let mut row = vec![size as f64];
        for (_, e) in methods {
            row.extend(e.spread_at_index(k));
        }
        t.push(row);
    }
    t
}

/// Nested subset schedules over the independent rows, optionally filtered
/// to the requested sizes.
fn schedules(
    design: &ExperimentDesign,
    start: usize,
    step: usize,
    repeats: usize,
    seed: u64,
    keep: &[usize],
) -> Result<(Vec<usize>, Vec<Vec<Vec<usize>>>)> {
    let rows = design.independent_rows();
    let all = grow_configuration_subsets(&rows, start, step, repeats, seed)?;
    let sizes: Vec<usize> = all
        .first()
        .map(|s| s.iter().map(Vec::len).collect())
        .unwrap_or_default();
    let picked: Vec<usize> = (0..sizes.len())
        .filter(|&k| keep.is_empty() || keep.contains(&sizes[k]))
        .collect();
    if picked.is_empty() {
        return Err(Error::invalid("none of the requested subset sizes occurs in the schedule"));
    }
    let filtered = all
        .into_iter()
        .map(|s| picked.iter().map(|&k| s[k].clone()).collect())
        .collect();
    Ok((picked.iter().map(|&k| sizes[k]).collect(), filtered))
}

/// Runs `estimate` on every (size, repeat) cell in parallel.
fn over_subsets<F>(sizes: &[usize], schedules: &[Vec<Vec<usize>>], estimate: F) -> Result<Vec<Vec<EstimationResult>>>
where
    F: Fn(&[usize]) -> Result<EstimationResult> + Sync,
{
    let cells: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|k| (0..schedules.len()).map(move |r| (k, r)))
        .collect();
    let results: Vec<EstimationResult> = cells
        .par_iter()
        .map(|&(k, r)| estimate(&schedules[r][k]))
        .collect::<Result<_>>()?;
    let mut grid: Vec<Vec<EstimationResult>> = vec![Vec::new(); sizes.len()];
    for ((k, _), res) in cells.into_iter().zip(results) {
        grid[k].push(res);
    }
    Ok(grid)
}

fn errors_against(grid: &[Vec<EstimationResult>], sizes: &[usize], reference: &CMatrix, basis: &OperatorBasis) -> SubsetErrors {
    let pauli_ref = reference;
    SubsetErrors {
        sizes: sizes.to_vec(),
        errors: grid
            .iter()
            .map(|row| {
                row.iter()
                    .map(|r| frobenius_distance(&basis.to_pauli_g(&r.g_hat), pauli_ref, true))
                    .collect()
            })
            .collect(),
    }
}

/// CS against DIA on growing configuration subsets for the five-channel
/// model with identity target and exact data.
pub fn fig4(opts: &Fig4Options) -> Result<Fig4Result> {
    let design = enumerate_configurations(2, &[1.0], 1)?;
    let basis = OperatorBasis::pauli(2)?;
    let target = TargetUnitary::identity(2)?;
    let model = structured_noise_g(&opts.rates)?;
    let g_true = model.g().clone();
    let freqs = OutcomeTensor::from_probabilities(&design, predicted_probabilities(&model, &design)?)?;
    let lin = sensitivity_phi(&target, &design, &basis, DEFAULT_PANELS)?;
    let (sizes, sched) = schedules(&design, opts.start, opts.step, opts.repeats, opts.seed, &opts.sizes)?;
    let cs_opts = opts.cs.clone();
    let cs = over_subsets(&sizes, &sched, |rows| {
        cs_estimate(&FitData::subset(&lin, &freqs, &design, rows)?, &basis, &cs_opts)
    })?;
    let dia = over_subsets(&sizes, &sched, |rows| {
        dia_estimate(&FitData::subset(&lin, &freqs, &design, rows)?, &basis, &opts.dia)
    })?;
    let full_set = (sizes.last() == Some(&design.independent_count()))
        .then(|| (cs.last().unwrap()[0].g_hat.clone(), dia.last().unwrap()[0].g_hat.clone()));
    Ok(Fig4Result {
        cs: errors_against(&cs, &sizes, &g_true, &basis),
        dia: errors_against(&dia, &sizes, &g_true, &basis),
        full_set,
        g_true,
    })
}

/// ε scaled to the shot noise of the data: `factor` times the root mean
/// binomial standard deviation √(f(1−f)/N_sc) over the independent rows.
pub fn shot_noise_epsilon(freqs: &OutcomeTensor, design: &ExperimentDesign, factor: f64) -> Result<f64> {
    let shots = freqs
        .shots_per_setting
        .ok_or_else(|| Error::invalid("shot-noise scaled epsilon needs finite-shot data"))?;
    let rows = design.independent_rows();
    let var: f64 = rows
        .iter()
        .map(|&r| {
            let f = freqs.values[r];
            f * (1.0 - f) / shots as f64
        })
        .sum::<f64>()
        / rows.len() as f64;
    Ok(factor * var.sqrt())
}

/// Single-qubit noise with one dominant jump operator along `axis` plus a
/// weak isotropic background.
pub fn single_qubit_noise(rate: f64, axis: [f64; 3], background: f64) -> CMatrix {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let v = nalgebra::DVector::from_iterator(3, axis.iter().map(|a| c64(a / norm, 0.0)));
    (&v * v.adjoint()).scale(rate) + CMatrix::identity(3, 3).scale(background)
}

#[derive(Debug, Clone)]
pub struct Fig5Options {
    pub seed: u64,
    pub shots: u64,
    pub floor_repeats: usize,
    pub g_true: CMatrix,
    pub dia: DiaOptions,
}

impl Default for Fig5Options {
    fn default() -> Self {
        Fig5Options {
            seed: 5,
            shots: 10_000,
            floor_repeats: 20,
            g_true: single_qubit_noise(5.6e-3, [0.77, 0.36, 0.53], 2e-4),
            dia: DiaOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig5Result {
    pub result: EstimationResult,
    pub shot_noise_floor: f64,
    pub g_true: CMatrix,
}

impl Fig5Result {
    /// χ² and error per recorded iteration.
    pub fn chi2_table(&self) -> Table {
        let mut t = Table::new(&["iteration", "chi2", "relative_error"]);
        for rec in self.result.trace.records() {
            t.push(vec![
                rec.iteration as f64,
                rec.chi2.unwrap_or(f64::NAN),
                rec.frobenius_error.unwrap_or(f64::NAN),
            ]);
        }
        t
    }

    pub fn skyline(&self) -> Table {
        skyline(&[("estimate", &self.result.g_hat), ("true", &self.g_true)])
    }
}

/// Entries of several Lindblad matrices side by side, one row per (α, β).
pub fn skyline(mats: &[(&str, &CMatrix)]) -> Table {
    let mut names = vec!["alpha".to_string(), "beta".to_string()];
    for (m, _) in mats {
        names.push(format!("{m}_re"));
        names.push(format!("{m}_im"));
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    let n = mats[0].1.nrows();
    for a in 0..n {
        for b in 0..n {
            let mut row = vec![(a + 1) as f64, (b + 1) as f64];
            for (_, g) in mats {
                row.push(g[(a, b)].re);
                row.push(g[(a, b)].im);
            }
            t.push(row);
        }
    }
    t
}

/// Single-qubit R_X(π/2) with sampled counts: DIA with χ² per iteration.
pub fn fig5(opts: &Fig5Options) -> Result<Fig5Result> {
    let design = enumerate_configurations(1, &[1.0], opts.shots)?;
    let basis = OperatorBasis::pauli(1)?;
    let target = TargetUnitary::rx_half_pi();
    let model = LindbladModel::new(1, target.hamiltonian_coefficients(), opts.g_true.clone())?;
    let p = predicted_probabilities(&model, &design)?;
    let freqs = frequencies(&sample_counts(&design, &p, opts.seed)?)?;
    let lin = sensitivity_phi(&target, &design, &basis, DEFAULT_PANELS)?;
    let data = FitData::new(&lin, &freqs, &design)?;
    let result = dia_estimate(
        &data,
        &basis,
        &DiaOptions {
            reference: Some(opts.g_true.clone()),
            ..opts.dia.clone()
        },
    )?;
    let floor = shot_noise_floor(
        &target,
        &design,
        Some(opts.shots),
        opts.floor_repeats,
        opts.seed.wrapping_add(1),
        &opts.dia,
    )?;
    Ok(Fig5Result {
        result,
        shot_noise_floor: floor.median,
        g_true: opts.g_true.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Fig6Options {
    pub seed: u64,
    pub shots: u64,
    pub n_configurations: usize,
    pub rates: StructuredRates,
    /// CS ε in units of the per-configuration shot-noise deviation.
    pub epsilon_factor: f64,
    pub cs: CsOptions,
    pub dia: DiaOptions,
}

impl Default for Fig6Options {
    fn default() -> Self {
        Fig6Options {
            seed: 6,
            shots: 1000,
            n_configurations: 96,
            rates: STRUCTURED_RATES,
            epsilon_factor: 1.2,
            cs: CsOptions::default(),
            dia: DiaOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig6Result {
    pub dia: EstimationResult,
    pub cs: EstimationResult,
    pub shot_noise_floor: f64,
    pub g_true: CMatrix,
}

impl Fig6Result {
    pub fn skyline(&self) -> Table {
        skyline(&[("dia", &self.dia.g_hat), ("cs", &self.cs.g_hat), ("true", &self.g_true)])
    }
}

/// Two-qubit MS gate under the five-channel model, sampled counts.
fn ms_problem(
    seed: u64,
    shots: u64,
    rates: &StructuredRates,
) -> Result<(TargetUnitary, ExperimentDesign, CMatrix, OutcomeTensor, LinearizedModel)> {
    let design = enumerate_configurations(2, &[1.0], shots)?;
    let target = TargetUnitary::ms_half_pi();
    let g_true = structured_noise_g(rates)?.g().clone();
    let model = LindbladModel::new(2, target.hamiltonian_coefficients(), g_true.clone())?;
    let p = predicted_probabilities(&model, &design)?;
    let freqs = frequencies(&sample_counts(&design, &p, seed)?)?;
    let lin = sensitivity_phi(&target, &design, &OperatorBasis::pauli(2)?, DEFAULT_PANELS)?;
    Ok((target, design, g_true, freqs, lin))
}

/// DIA and CS on a random subset of the MS configurations.
pub fn fig6(opts: &Fig6Options) -> Result<Fig6Result> {
    let (target, design, g_true, freqs, lin) = ms_problem(opts.seed, opts.shots, &opts.rates)?;
    let basis = OperatorBasis::pauli(2)?;
    let rows = design.independent_rows();
    let n = opts.n_configurations.min(rows.len());
    let subset = grow_configuration_subsets(&rows, n, 1, 1, opts.seed)?[0][0].clone();
    let data = FitData::subset(&lin, &freqs, &design, &subset)?;
    let dia = dia_estimate(
        &data,
        &basis,
        &DiaOptions {
            reference: Some(g_true.clone()),
            ..opts.dia.clone()
        },
    )?;
    let cs = cs_estimate(
        &data,
        &basis,
        &CsOptions {
            epsilon: shot_noise_epsilon(&freqs, &design, opts.epsilon_factor)?,
            reference: Some(g_true.clone()),
            ..opts.cs.clone()
        },
    )?;
    let floor = shot_noise_floor(&target, &design, Some(opts.shots), 4, opts.seed.wrapping_add(1), &opts.dia)?;
    Ok(Fig6Result {
        dia,
        cs,
        shot_noise_floor: floor.median,
        g_true,
    })
}

#[derive(Debug, Clone)]
pub struct Fig7Options {
    pub repeats: usize,
    pub seed: u64,
    pub shots: u64,
    pub start: usize,
    pub step: usize,
    pub sizes: Vec<usize>,
    pub rates: StructuredRates,
    pub epsilon_factor: f64,
    pub full_iterations: usize,
    pub cs: CsOptions,
    pub dia: DiaOptions,
}

impl Default for Fig7Options {
    fn default() -> Self {
        Fig7Options {
            repeats: 20,
            seed: 7,
            shots: 1000,
            start: 33,
            step: 21,
            sizes: Vec::new(),
            rates: STRUCTURED_RATES,
            epsilon_factor: 1.2,
            full_iterations: 3000,
            cs: CsOptions::default(),
            dia: DiaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig7Result {
    /// Distances to the full-ML estimate on all configurations.
    pub cs: SubsetErrors,
    pub dia: SubsetErrors,
    pub cs_sparse: SubsetErrors,
    pub full_error: f64,
    #[serde(skip)]
    pub g_full: CMatrix,
}

impl Fig7Result {
    pub fn table(&self) -> Table {
        subset_table(&[("cs", &self.cs), ("dia", &self.dia), ("cs_basis_a", &self.cs_sparse)])
    }
}

/// Linear estimates on subsets compared with full ML on all configurations,
/// including CS in the eigenbasis of the full-ML estimate.
pub fn fig7(opts: &Fig7Options) -> Result<Fig7Result> {
    let (target, design, g_true, freqs, lin) = ms_problem(opts.seed, opts.shots, &opts.rates)?;
    let pauli = OperatorBasis::pauli(2)?;
    let mut fo = FullOptions::new(target.hamiltonian_coefficients());
    fo.max_iter = opts.full_iterations;
    fo.init_trace = g_true.trace().re;
    fo.reference = Some(g_true.clone());
    let full = full_ml_estimate(&freqs, &design, &pauli, &fo)?;
    let g_full = full.g_hat.clone();
    let basis_a = sparsifying_basis(&g_full, &pauli)?;
    let lin_a = lin.in_basis(&basis_a)?;
    let epsilon = shot_noise_epsilon(&freqs, &design, opts.epsilon_factor)?;
    let (sizes, sched) = schedules(&design, opts.start, opts.step, opts.repeats, opts.seed, &opts.sizes)?;
    let cs_opts = CsOptions {
        epsilon,
        ..opts.cs.clone()
    };
    let cs = over_subsets(&sizes, &sched, |rows| {
        cs_estimate(&FitData::subset(&lin, &freqs, &design, rows)?, &pauli, &cs_opts)
    })?;
    let cs_a = over_subsets(&sizes, &sched, |rows| {
        cs_estimate(&FitData::subset(&lin_a, &freqs, &design, rows)?, &basis_a, &cs_opts)
    })?;
    let dia = over_subsets(&sizes, &sched, |rows| {
        dia_estimate(&FitData::subset(&lin, &freqs, &design, rows)?, &pauli, &opts.dia)
    })?;
    Ok(Fig7Result {
        cs: errors_against(&cs, &sizes, &g_full, &pauli),
        dia: errors_against(&dia, &sizes, &g_full, &pauli),
        cs_sparse: errors_against(&cs_a, &sizes, &g_full, &basis_a),
        full_error: frobenius_distance(&g_full, &g_true, true),
        g_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_csv_layout() {
        let mut t = Table::new(&["n", "value"]);
        t.push(vec![3.0, 0.25]);
        t.push(vec![4.0, f64::NAN]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &[("seed".into(), "9".into())]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "# seed: 9\nn,value\n3,2.5e-1\n4,NaN\n");
        assert_eq!(t.column("value").unwrap()[0], 0.25);
    }

    #[test]
    fn single_qubit_noise_has_planted_axis() {
        let g = single_qubit_noise(0.01, [0.0, 0.0, 2.0], 0.0);
        assert!((g[(2, 2)].re - 0.01).abs() < 1e-15);
        assert_eq!(g[(0, 0)].re, 0.0);
    }

    #[test]
    fn fig2_small_run_is_reproducible() {
        let opts = Fig2Options {
            repeats: 2,
            full_iterations: 0,
            dia: DiaOptions {
                max_iter: 30,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = fig2(&opts).unwrap();
        let b = fig2(&opts).unwrap();
        assert_eq!(a.dia.curves, b.dia.curves);
        let t = a.table();
        assert_eq!(t.columns.len(), 4);
        let med = t.column("dia_median").unwrap();
        assert!(med.last().unwrap() < &med[0]);
    }
}
