use std::path::{Path, PathBuf};

use lqt_core::bench::{self, Fig2Options, Fig3Options, Fig4Options, Fig5Options, Fig6Options, Fig7Options};
use lqt_core::diagnostics::{derive_seed, noise_summary, pearson_chi2, shot_noise_floor};
use lqt_core::estimators::{
    cs_estimate, dia_estimate, full_ml_estimate, pgdm_estimate, CsOptions, DiaOptions, EstimationResult, FitData,
    FullOptions, PgdmOptions,
};
use lqt_core::experiment::{frequencies, read_counts, sample_counts, write_counts_with, OutcomeTensor};
use lqt_core::lindblad::io::{nested_to_matrix, read_model, BasisSpec, ModelFile};
use lqt_core::lindblad::{
    predicted_probabilities, sample_hs_random_g, sample_projector_g, structured_noise_g, LindbladModel, OperatorBasis,
};
use lqt_core::linearize::{linear_probability, load_cache, save_cache, sensitivity_phi, LinearizedModel, TargetUnitary};
use lqt_core::quantum::{enumerate_configurations, ExperimentDesign};
use lqt_core::CMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::*;
use crate::output::*;

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::usage(format!("{what} is stochastic and needs --seed")))
}

fn target_unitary(t: &TargetArgs) -> CliResult<TargetUnitary> {
    Ok(match t.target {
        TargetName::Identity => TargetUnitary::identity(t.qubits)?,
        TargetName::Rx => TargetUnitary::rx_half_pi(),
        TargetName::Ms => TargetUnitary::ms_half_pi(),
    })
}

fn target_json(t: &TargetArgs, unitary: &TargetUnitary) -> Value {
    json!({ "name": t.target, "qubits": unitary.n_qubits() })
}

fn basis_from_spec(spec: BasisSpec, n_qubits: usize) -> CliResult<OperatorBasis> {
    Ok(match spec {
        BasisSpec::Named(name) if name == "pauli" => OperatorBasis::pauli(n_qubits)?,
        BasisSpec::Named(name) => return Err(CliError::usage(format!("unknown basis {name:?}"))),
        BasisSpec::Coeffs { coeffs } => OperatorBasis::new(n_qubits, nested_to_matrix(&coeffs)?)?,
    })
}

fn operator_basis(b: &BasisArgs, n_qubits: usize) -> CliResult<OperatorBasis> {
    match b.basis {
        BasisKind::Pauli => Ok(OperatorBasis::pauli(n_qubits)?),
        BasisKind::File => {
            let path = b
                .basis_file
                .as_ref()
                .ok_or_else(|| CliError::usage("--basis file needs --basis-file"))?;
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            basis_from_spec(serde_json::from_str(&text)?, n_qubits)
        }
    }
}

fn basis_inputs(b: &BasisArgs) -> Vec<&Path> {
    b.basis_file.iter().map(PathBuf::as_path).collect()
}

fn check_qubits(target: &TargetUnitary, design: &ExperimentDesign) -> CliResult<()> {
    if target.n_qubits() != design.n_qubits() {
        return Err(CliError::usage(format!(
            "target acts on {} qubits but the data has {}",
            target.n_qubits(),
            design.n_qubits()
        )));
    }
    Ok(())
}

fn model_json(model: &LindbladModel) -> CliResult<Value> {
    Ok(serde_json::to_value(ModelFile::from_model(model))?)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Value> {
    let seed = require_seed(args.seed, "simulate")?;
    let shots = match args.shots_per_setting {
        Shots::Finite(n) => n,
        Shots::Infinite => return Err(CliError::usage("counts need a finite --shots-per-setting")),
    };
    let inputs: Vec<&Path> = args.model.iter().map(PathBuf::as_path).collect();
    let prov = Provenance::new("simulate", args, Some(seed), &inputs)?;
    let model = match &args.model {
        Some(path) => read_model(path)?,
        None => {
            let target = target_unitary(&args.target)?;
            let m = 4usize.pow(target.n_qubits() as u32) - 1;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
            let g = match args.noise {
                NoiseKind::None => CMatrix::zeros(m, m),
                NoiseKind::Hs => sample_hs_random_g(m, args.noise_trace, &mut rng),
                NoiseKind::Rank1 => sample_projector_g(m, 1, args.noise_trace, &mut rng)?,
                NoiseKind::Structured => {
                    if target.n_qubits() != 2 {
                        return Err(CliError::usage("structured noise is a two-qubit model"));
                    }
                    structured_noise_g(&bench::STRUCTURED_RATES)?.g().clone()
                }
            };
            LindbladModel::new(target.n_qubits(), target.hamiltonian_coefficients(), g)?
        }
    };
    let design = enumerate_configurations(model.n_qubits(), &args.times, shots)?;
    let p = predicted_probabilities(&model, &design)?;
    let counts = sample_counts(&design, &p, seed)?;
    ensure_dir(&args.out)?;
    let counts_path = args.out.join("counts.csv");
    write_counts_with(&counts_path, &counts, Some(prov.to_json()))?;
    let model_path = args.out.join("model.json");
    write_json(&model_path, &prov, model_json(&model)?)?;
    Ok(json!({ "counts": counts_path, "model": model_path, "total_shots": counts.total_shots() }))
}

pub fn linearize(args: &LinearizeArgs) -> CliResult<Value> {
    let prov = Provenance::new("linearize", args, None, &basis_inputs(&args.basis))?;
    let target = target_unitary(&args.target)?;
    let basis = operator_basis(&args.basis, target.n_qubits())?;
    let design = enumerate_configurations(target.n_qubits(), &args.times, 1)?;
    let lin = sensitivity_phi(&target, &design, &basis, args.panels)?;
    let key = LinearizedModel::cache_key(&target, &design, &basis, args.panels);
    ensure_dir(&args.out)?;
    let cache_path = args.out.join("linear.bin");
    save_cache(&cache_path, &lin, &key)?;
    let meta_path = args.out.join("linear.json");
    write_json(
        &meta_path,
        &prov,
        json!({
            "target": target_json(&args.target, &target),
            "times": args.times,
            "panels": lin.quadrature_panels(),
            "n_configurations": lin.len(),
            "g_size": lin.g_size(),
            "cache_key": hex::encode(key),
        }),
    )?;
    Ok(json!({ "cache": cache_path, "meta": meta_path, "panels": lin.quadrature_panels() }))
}

/// Design and frequencies from a counts file or from a model.
fn load_data(args: &EstimateArgs) -> CliResult<(ExperimentDesign, OutcomeTensor, Value)> {
    if let Some(path) = &args.counts {
        let table = read_counts(path)?;
        let freqs = frequencies(&table)?;
        return Ok((table.design().clone(), freqs, json!({ "source": "counts" })));
    }
    let path = args
        .model
        .as_ref()
        .ok_or_else(|| CliError::usage("estimate needs --counts or --model"))?;
    let model = read_model(path)?;
    match args.shots_per_setting {
        Shots::Infinite => {
            let design = enumerate_configurations(model.n_qubits(), &args.times, 1)?;
            let p = predicted_probabilities(&model, &design)?;
            let freqs = OutcomeTensor::from_probabilities(&design, p)?;
            Ok((design, freqs, json!({ "source": "model", "shots_per_setting": "inf" })))
        }
        Shots::Finite(n) => {
            let seed = require_seed(args.seed, "sampling counts from a model")?;
            let design = enumerate_configurations(model.n_qubits(), &args.times, n)?;
            let p = predicted_probabilities(&model, &design)?;
            let freqs = frequencies(&sample_counts(&design, &p, seed)?)?;
            Ok((design, freqs, json!({ "source": "model", "shots_per_setting": n })))
        }
    }
}

fn linear_model(
    args: &EstimateArgs,
    target: &TargetUnitary,
    design: &ExperimentDesign,
    basis: &OperatorBasis,
) -> CliResult<LinearizedModel> {
    match &args.linear {
        Some(path) => {
            let key = LinearizedModel::cache_key(target, design, basis, args.panels);
            load_cache(path, &key)?.ok_or_else(|| {
                CliError::usage(format!(
                    "{} was built for a different target, design, basis or panel count",
                    path.display()
                ))
            })
        }
        None => Ok(sensitivity_phi(target, design, basis, args.panels)?),
    }
}

pub fn estimate(args: &EstimateArgs) -> CliResult<Value> {
    let mut inputs: Vec<&Path> = args.counts.iter().chain(&args.model).map(PathBuf::as_path).collect();
    inputs.extend(basis_inputs(&args.basis));
    let prov = Provenance::new("estimate", args, args.seed, &inputs)?;
    let (design, freqs, source) = load_data(args)?;
    let target = target_unitary(&args.target)?;
    check_qubits(&target, &design)?;
    let basis = operator_basis(&args.basis, design.n_qubits())?;
    let s = &args.solver;
    let result: EstimationResult = match s.method {
        MethodArg::Full => {
            let mut o = FullOptions::new(target.hamiltonian_coefficients());
            o.estimate_hamiltonian = s.estimate_hamiltonian;
            o.eta_prime = s.eta.unwrap_or(o.eta_prime);
            o.max_iter = s.max_iter.unwrap_or(o.max_iter);
            o.tol = s.tol.unwrap_or(o.tol);
            o.init_trace = s.init_trace.unwrap_or(o.init_trace);
            full_ml_estimate(&freqs, &design, &basis, &o)?
        }
        method => {
            let lin = linear_model(args, &target, &design, &basis)?;
            let data = FitData::new(&lin, &freqs, &design)?;
            match method {
                MethodArg::Dia => {
                    let mut o = DiaOptions::default();
                    o.eta_prime = s.eta.unwrap_or(o.eta_prime);
                    o.max_iter = s.max_iter.unwrap_or(o.max_iter);
                    o.tol = s.tol.unwrap_or(o.tol);
                    o.init_trace = s.init_trace.unwrap_or(o.init_trace);
                    dia_estimate(&data, &basis, &o)?
                }
                MethodArg::Pgdm => {
                    let mut o = PgdmOptions::default();
                    o.eta = s.eta.unwrap_or(o.eta);
                    o.gamma = s.gamma.unwrap_or(o.gamma);
                    o.max_iter = s.max_iter.unwrap_or(o.max_iter);
                    o.tol = s.tol.unwrap_or(o.tol);
                    o.init_trace = s.init_trace.unwrap_or(o.init_trace);
                    pgdm_estimate(&data, &basis, &o)?
                }
                _ => {
                    let mut o = CsOptions::default();
                    o.epsilon = match (s.epsilon, freqs.shots_per_setting) {
                        (Some(e), _) => e,
                        (None, Some(_)) => bench::shot_noise_epsilon(&freqs, &design, 1.2)?,
                        (None, None) => o.epsilon,
                    };
                    o.max_iter = s.max_iter.unwrap_or(o.max_iter);
                    o.tol = s.tol.unwrap_or(o.tol);
                    cs_estimate(&data, &basis, &o)?
                }
            }
        }
    };
    let mut body = result.to_json(false);
    body["target"] = target_json(&args.target, &target);
    body["times"] = json!(design.times());
    body["panels"] = json!(args.panels);
    body["data"] = source;
    ensure_dir(&args.out)?;
    let path = args.out.join("result.json");
    write_json(&path, &prov, body)?;
    Ok(json!({
        "result": path,
        "method": result.method,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "iterations": result.iterations,
        "chi2": result.trace.last().and_then(|r| r.chi2),
    }))
}

fn field<'a>(v: &'a Value, key: &str, path: &Path) -> CliResult<&'a Value> {
    v.get(key)
        .ok_or_else(|| CliError::usage(format!("{} has no {key:?} field", path.display())))
}

fn parse_field<T: serde::de::DeserializeOwned>(v: &Value, key: &str, path: &Path) -> CliResult<T> {
    Ok(serde_json::from_value(field(v, key, path)?.clone())?)
}

pub fn diagnose(args: &DiagnoseArgs) -> CliResult<Value> {
    let prov = Provenance::new("diagnose", args, args.seed, &[&args.result, &args.counts])?;
    let text = std::fs::read_to_string(&args.result).map_err(io_err(&args.result))?;
    let result: Value = serde_json::from_str(&text)?;
    let rpath = args.result.as_path();

    let table = read_counts(&args.counts)?;
    let design = table.design().clone();
    let freqs = frequencies(&table)?;
    let target_args = TargetArgs {
        target: parse_field(field(&result, "target", rpath)?, "name", rpath)?,
        qubits: parse_field(field(&result, "target", rpath)?, "qubits", rpath)?,
    };
    let target = target_unitary(&target_args)?;
    check_qubits(&target, &design)?;
    let basis = basis_from_spec(parse_field(&result, "basis", rpath)?, design.n_qubits())?;
    let g = nested_to_matrix(&parse_field::<Vec<Vec<[f64; 2]>>>(&result, "G_hat", rpath)?)?;
    let method: MethodArg = parse_field(&result, "method", rpath)?;
    let panels: usize = parse_field(&result, "panels", rpath)?;

    // Same terms and probabilities as the estimator used for its trace.
    let (chi2_fit, p) = if method == MethodArg::Full {
        let c: Option<Vec<f64>> = parse_field(&result, "c_hat", rpath)?;
        let model = LindbladModel::with_basis(basis.clone(), c.unwrap_or_else(|| target.hamiltonian_coefficients()), g.clone())?;
        let p = predicted_probabilities(&model, &design)?;
        (pearson_chi2(&p, &freqs, &design, true)?.chi2, p)
    } else {
        let lin = sensitivity_phi(&target, &design, &basis, panels)?;
        let data = FitData::new(&lin, &freqs, &design)?;
        let chi2 = data
            .chi2_of_probabilities(&data.probabilities(&g))
            .expect("counts always carry a shot count");
        (chi2, linear_probability(&lin, &g))
    };
    let pearson = pearson_chi2(&p, &freqs, &design, true)?;
    let trace_chi2 = result
        .get("trace")
        .and_then(Value::as_array)
        .and_then(|t| t.last())
        .and_then(|r| r.get("chi2"))
        .and_then(Value::as_f64);

    let floor = if args.floor_repeats > 0 {
        let seed = require_seed(args.seed, "the shot-noise floor")?;
        let plain = enumerate_configurations(design.n_qubits(), design.times(), 1)?;
        shot_noise_floor(
            &target,
            &plain,
            Some(table.shots_per_setting()),
            args.floor_repeats,
            seed,
            &DiaOptions::default(),
        )?
        .median
    } else {
        0.0
    };
    let summary = noise_summary(&g, &basis, floor)?;

    ensure_dir(&args.out)?;
    let path = args.out.join("diagnose.json");
    write_json(
        &path,
        &prov,
        json!({
            "method": method,
            "chi2": chi2_fit,
            "trace_chi2": trace_chi2,
            "pearson": pearson,
            "noise": summary,
        }),
    )?;
    let sky = args.out.join("skyline.csv");
    write_table(&sky, &prov, &bench::skyline(&[("estimate", &basis.to_pauli_g(&g))]))?;
    Ok(json!({ "report": path, "skyline": sky, "chi2": chi2_fit, "trace_chi2": trace_chi2 }))
}

fn result_json(r: &EstimationResult) -> Value {
    r.to_json(false)
}

pub fn run_bench(args: &BenchArgs) -> CliResult<Value> {
    let seed = require_seed(args.seed, "bench")?;
    let prov = Provenance::new("bench", args, Some(seed), &[])?;
    let repeats = args.effective_repeats();
    let shots = match args.shots_per_setting {
        Some(Shots::Finite(n)) => Some(n),
        Some(Shots::Infinite) => return Err(CliError::usage("this benchmark samples counts; give a finite shot count")),
        None => None,
    };
    let tune_dia = |mut o: DiaOptions| {
        o.max_iter = args.max_iter.unwrap_or(o.max_iter);
        o.tol = args.tol.unwrap_or(o.tol);
        o
    };
    ensure_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    let mut files: Vec<PathBuf> = Vec::new();
    let summary = match args.figure {
        2 => {
            let d = Fig2Options::default();
            let o = Fig2Options {
                repeats,
                seed,
                dia: tune_dia(d.dia.clone()),
                full_iterations: args.full_iterations.unwrap_or(d.full_iterations),
                ..d
            };
            let r = bench::fig2(&o)?;
            files.push(out("fig2.csv"));
            write_table(&files[0], &prov, &r.table())?;
            let dia_final = r.dia.median_curve().last().copied();
            json!({ "dia_final_median": dia_final, "full_final_median": r.full.as_ref().and_then(|f| f.median_curve().last().copied()) })
        }
        3 => {
            let d = Fig3Options::default();
            let mut pgdm = d.pgdm.clone();
            pgdm.eta = args.eta.unwrap_or(pgdm.eta);
            pgdm.gamma = args.gamma.unwrap_or(pgdm.gamma);
            pgdm.max_iter = args.max_iter.unwrap_or(pgdm.max_iter);
            pgdm.tol = args.tol.unwrap_or(pgdm.tol);
            let o = Fig3Options {
                repeats,
                seed,
                dia: tune_dia(d.dia.clone()),
                pgdm,
                ..d
            };
            let r = bench::fig3(&o)?;
            files.push(out("fig3.csv"));
            write_table(&files[0], &prov, &r.table())?;
            let cap = o.dia.max_iter.max(o.pgdm.max_iter);
            json!({
                "hs_iterations_to_threshold": {
                    "dia": bench::median_iterations_to(&r.hs.dia, r.threshold, cap),
                    "pgdm": bench::median_iterations_to(&r.hs.pgdm, r.threshold, cap),
                },
                "threshold": r.threshold,
            })
        }
        4 => {
            let d = Fig4Options::default();
            let mut cs = d.cs.clone();
            cs.epsilon = args.epsilon.unwrap_or(cs.epsilon);
            let o = Fig4Options {
                repeats,
                seed,
                start: args.subset_start.unwrap_or(d.start),
                step: args.subset_step.unwrap_or(d.step),
                sizes: args.sizes.clone(),
                cs,
                dia: tune_dia(d.dia.clone()),
                ..d
            };
            let r = bench::fig4(&o)?;
            files.push(out("fig4.csv"));
            write_table(&files[0], &prov, &r.table())?;
            json!({ "sizes": r.cs.sizes })
        }
        5 => {
            let d = Fig5Options::default();
            let o = Fig5Options {
                seed,
                shots: shots.unwrap_or(d.shots),
                floor_repeats: repeats,
                dia: tune_dia(d.dia.clone()),
                ..d
            };
            let r = bench::fig5(&o)?;
            files.extend([out("fig5_chi2.csv"), out("fig5_skyline.csv"), out("fig5_result.json")]);
            write_table(&files[0], &prov, &r.chi2_table())?;
            write_table(&files[1], &prov, &r.skyline())?;
            let floor = r.shot_noise_floor;
            write_json(
                &files[2],
                &prov,
                json!({
                    "result": result_json(&r.result),
                    "shot_noise_floor": floor,
                    "noise": noise_summary(&r.result.g_hat, &r.result.basis, floor)?,
                }),
            )?;
            json!({ "shot_noise_floor": floor })
        }
        6 => {
            let d = Fig6Options::default();
            let o = Fig6Options {
                seed,
                shots: shots.unwrap_or(d.shots),
                epsilon_factor: args.epsilon.unwrap_or(d.epsilon_factor),
                dia: tune_dia(d.dia.clone()),
                ..d
            };
            let r = bench::fig6(&o)?;
            files.extend([out("fig6_skyline.csv"), out("fig6_result.json")]);
            write_table(&files[0], &prov, &r.skyline())?;
            write_json(
                &files[1],
                &prov,
                json!({
                    "dia": result_json(&r.dia),
                    "cs": result_json(&r.cs),
                    "shot_noise_floor": r.shot_noise_floor,
                }),
            )?;
            json!({ "shot_noise_floor": r.shot_noise_floor })
        }
        _ => {
            let d = Fig7Options::default();
            let o = Fig7Options {
                repeats,
                seed,
                shots: shots.unwrap_or(d.shots),
                start: args.subset_start.unwrap_or(d.start),
                step: args.subset_step.unwrap_or(d.step),
                sizes: args.sizes.clone(),
                epsilon_factor: args.epsilon.unwrap_or(d.epsilon_factor),
                full_iterations: args.full_iterations.unwrap_or(d.full_iterations),
                dia: tune_dia(d.dia.clone()),
                ..d
            };
            let r = bench::fig7(&o)?;
            files.push(out("fig7.csv"));
            write_table(&files[0], &prov, &r.table())?;
            json!({ "full_ml_error": r.full_error })
        }
    };
    Ok(json!({ "figure": args.figure, "repeats": repeats, "files": files, "summary": summary }))
}
