use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "lqt", version, about = "Lindbladian tomography of weakly noisy gates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for parallel work (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample measurement counts from a Lindblad model.
    Simulate(SimulateArgs),
    /// Compute and cache the linear model around a target gate.
    Linearize(LinearizeArgs),
    /// Estimate the Lindblad matrix from counts.
    Estimate(EstimateArgs),
    /// Goodness of fit and jump operators of an estimate.
    Diagnose(DiagnoseArgs),
    /// Run one of the method-comparison benchmarks.
    Bench(BenchArgs),
}

/// Shots per measurement setting; `inf` means exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Shots::Infinite);
        }
        match s.parse::<u64>() {
            Ok(0) => Err("shot count must be positive".into()),
            Ok(n) => Ok(Shots::Finite(n)),
            Err(_) => Err(format!("expected a positive integer or `inf`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    /// Idle gate on `--qubits` qubits.
    Identity,
    /// Single-qubit X rotation by π/2.
    Rx,
    /// Two-qubit Mølmer–Sørensen gate.
    Ms,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TargetArgs {
    #[arg(long, value_enum, default_value = "rx")]
    pub target: TargetName,
    /// Qubit count for the identity target.
    #[arg(long, default_value_t = 1)]
    pub qubits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Pauli,
    File,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BasisArgs {
    #[arg(long, value_enum, default_value = "pauli")]
    pub basis: BasisKind,
    /// JSON file with `{"coeffs": [[[re, im], ...], ...]}` when `--basis file`.
    #[arg(long)]
    #[serde(skip)]
    pub basis_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Full,
    Dia,
    Pgdm,
    Cs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "dia")]
    pub method: MethodArg,
    /// CS residual bound in probability units; defaults to 1.2 shot-noise
    /// deviations for finite counts.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Step size (pGDM) or initial line-search step (DIA, full ML).
    #[arg(long)]
    pub eta: Option<f64>,
    /// pGDM momentum retention.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Trace of the diagonal starting point.
    #[arg(long)]
    pub init_trace: Option<f64>,
    /// Also fit the Hamiltonian vector (full ML only).
    #[arg(long)]
    pub estimate_hamiltonian: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// Hilbert–Schmidt random G.
    Hs,
    /// Random rank-one G.
    Rank1,
    /// Five-channel two-qubit model.
    Structured,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Model JSON; when absent a model is drawn from `--target` and `--noise`.
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_enum, default_value = "hs")]
    pub noise: NoiseKind,
    /// Trace of the drawn G.
    #[arg(long, default_value_t = 0.01)]
    pub noise_trace: f64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub times: Vec<f64>,
    #[arg(long, default_value = "1000")]
    pub shots_per_setting: Shots,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LinearizeArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub times: Vec<f64>,
    /// Simpson panels for the time integral.
    #[arg(long, default_value_t = 64)]
    pub panels: usize,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Counts CSV with its `.meta.json` sidecar.
    #[arg(long, conflicts_with = "model")]
    #[serde(skip)]
    pub counts: Option<PathBuf>,
    /// Model JSON to generate data from instead of reading counts.
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    /// With `--model`: shots to sample, or `inf` for exact probabilities.
    #[arg(long, default_value = "inf")]
    pub shots_per_setting: Shots,
    /// With `--model`: evolution times.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub times: Vec<f64>,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Linearization cache written by `linearize`.
    #[arg(long)]
    #[serde(skip)]
    pub linear: Option<PathBuf>,
    /// Simpson panels for the linearization.
    #[arg(long, default_value_t = 64)]
    pub panels: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    /// Result JSON written by `estimate`.
    #[arg(long)]
    #[serde(skip)]
    pub result: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub counts: PathBuf,
    /// Repeats for the shot-noise floor; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub floor_repeats: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=7))]
    pub figure: u8,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    /// Use 100 repeats.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub subset_start: Option<usize>,
    #[arg(long)]
    pub subset_step: Option<usize>,
    /// Keep only these subset sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub shots_per_setting: Option<Shots>,
    /// Full ML iterations; 0 skips full ML where it is optional.
    #[arg(long)]
    pub full_iterations: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

impl BenchArgs {
    pub fn effective_repeats(&self) -> usize {
        if self.paper_scale {
            100
        } else {
            self.repeats
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shot_counts_parse() {
        assert_eq!("1000".parse::<Shots>().unwrap(), Shots::Finite(1000));
        assert_eq!("inf".parse::<Shots>().unwrap(), Shots::Infinite);
        assert_eq!("INF".parse::<Shots>().unwrap(), Shots::Infinite);
        assert!("0".parse::<Shots>().is_err());
        assert!("-3".parse::<Shots>().is_err());
        assert!("many".parse::<Shots>().is_err());
    }

    #[test]
    fn paper_scale_overrides_repeats() {
        let cli = Cli::try_parse_from(["lqt", "bench", "--figure", "2", "--repeats", "5", "--paper-scale"]).unwrap();
        match cli.command {
            Command::Bench(b) => assert_eq!(b.effective_repeats(), 100),
            _ => unreachable!(),
        }
    }

    #[test]
    fn times_split_on_commas() {
        let cli = Cli::try_parse_from(["lqt", "linearize", "--times", "0.5,1,2"]).unwrap();
        match cli.command {
            Command::Linearize(l) => assert_eq!(l.times, [0.5, 1.0, 2.0]),
            _ => unreachable!(),
        }
    }
}
