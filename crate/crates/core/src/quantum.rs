//! Initial states, local Pauli measurements and the configuration layout of
//! a tomography experiment.
//!
//! Every probability-shaped vector in the crate uses the same row order: for
//! time index `i`, state `s`, basis `b` and outcome `m`,
//! `row = ((i * n_states + s) * n_bases + b) * d + m`. Bases run over words in
//! `{x, y, z}^N` and outcomes over `{+, -}^N`, both lexicographic with qubit 1
//! as the leading character.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pauli::{self, kron, MAX_QUBITS};
use crate::{c64, CMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn from_char(c: char) -> Option<Axis> {
        match c {
            'x' | 'X' => Some(Axis::X),
            'y' | 'Y' => Some(Axis::Y),
            'z' | 'Z' => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    /// Single-qubit Pauli index (1, 2, 3).
    pub fn pauli_index(self) -> usize {
        self as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Accepts ASCII `+`/`-` and the Unicode minus sign.
    pub fn from_char(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' | '\u{2212}' => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A basis word together with one outcome word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    pub basis: Vec<Axis>,
    pub outcome: Vec<Sign>,
}

impl MeasurementSetting {
    pub fn new(basis: Vec<Axis>, outcome: Vec<Sign>) -> Result<Self> {
        if basis.is_empty() || basis.len() != outcome.len() {
            return Err(Error::invalid(format!(
                "basis word has {} letters but outcome word has {}",
                basis.len(),
                outcome.len()
            )));
        }
        Ok(MeasurementSetting { basis, outcome })
    }

    /// Parses e.g. `("xz", "+-")`.
    pub fn parse(basis: &str, outcome: &str) -> Result<Self> {
        let b = parse_basis(basis)?;
        let m = parse_outcome(outcome)?;
        Self::new(b, m)
    }

    pub fn n_qubits(&self) -> usize {
        self.basis.len()
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", basis_string(&self.basis), outcome_string(&self.outcome))
    }
}

pub fn parse_basis(s: &str) -> Result<Vec<Axis>> {
    s.chars()
        .map(|c| Axis::from_char(c).ok_or_else(|| Error::invalid(format!("unknown basis letter {c:?}"))))
        .collect()
}

pub fn parse_outcome(s: &str) -> Result<Vec<Sign>> {
    s.chars()
        .map(|c| Sign::from_char(c).ok_or_else(|| Error::invalid(format!("unknown outcome symbol {c:?}"))))
        .collect()
}

pub fn basis_string(b: &[Axis]) -> String {
    b.iter().map(|a| a.as_char()).collect()
}

pub fn outcome_string(m: &[Sign]) -> String {
    m.iter().map(|s| s.as_char()).collect()
}

/// Tensor product of single-qubit projectors (1 + m σ_b)/2.
pub fn projector(setting: &MeasurementSetting) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for (&axis, &sign) in setting.basis.iter().zip(&setting.outcome) {
        let sigma = pauli::single_matrix(axis.pauli_index() as u8);
        let p = (CMatrix::identity(2, 2) + sigma.scale(sign.value())).scale(0.5);
        out = kron(&out, &p);
    }
    out
}

/// Ordered set of initial density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    n_qubits: usize,
    states: Vec<CMatrix>,
}

impl StateSet {
    /// Wraps custom states after checking they are density matrices.
    pub fn new(n_qubits: usize, states: Vec<CMatrix>) -> Result<Self> {
        pauli::check_qubits(n_qubits, MAX_QUBITS)?;
        let d = 1usize << n_qubits;
        for (k, rho) in states.iter().enumerate() {
            if rho.nrows() != d || rho.ncols() != d {
                return Err(Error::dim(format!("state {k} is not {d}x{d}")));
            }
            crate::hermitian::require_psd(rho, 1e-10)?;
            let tr = rho.trace();
            if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
                return Err(Error::invalid(format!("state {k} has trace {tr}")));
            }
        }
        Ok(StateSet { n_qubits, states })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, s: usize) -> &CMatrix {
        &self.states[s]
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }
}

fn single_qubit_states() -> [CMatrix; 4] {
    let h = 0.5;
    [
        CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[c64(h, 0.0), c64(h, 0.0), c64(h, 0.0), c64(h, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[c64(h, 0.0), c64(0.0, -h), c64(0.0, h), c64(h, 0.0)]),
    ]
}

/// All tensor products of |0⟩, |1⟩, |+⟩, |+i⟩ in base-4 order.
pub fn standard_initial_states(n_qubits: usize) -> Result<StateSet> {
    pauli::check_qubits(n_qubits, MAX_QUBITS)?;
    let singles = single_qubit_states();
    let count = 1usize << (2 * n_qubits);
    let states = (0..count)
        .map(|s| {
            let mut rho = CMatrix::identity(1, 1);
            for q in 0..n_qubits {
                let digit = (s >> (2 * (n_qubits - 1 - q))) & 3;
                rho = kron(&rho, &singles[digit]);
            }
            rho
        })
        .collect();
    Ok(StateSet { n_qubits, states })
}

/// One probability entry of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Configuration {
    pub state_id: usize,
    pub time_index: usize,
    pub basis_index: usize,
    pub outcome_index: usize,
    /// False for the last outcome of each basis, whose frequency is fixed by
    /// the others.
    pub independent: bool,
}

/// Times, states and measurement words of a tomography run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDesign {
    n_qubits: usize,
    times: Vec<f64>,
    shots_per_setting: u64,
    states: StateSet,
    bases: Vec<Vec<Axis>>,
    outcomes: Vec<Vec<Sign>>,
    configurations: Vec<Configuration>,
}

/// Basis words of length n in lexicographic order.
pub fn all_bases(n_qubits: usize) -> Vec<Vec<Axis>> {
    let count = 3usize.pow(n_qubits as u32);
    (0..count)
        .map(|b| {
            (0..n_qubits)
                .map(|q| Axis::ALL[(b / 3usize.pow((n_qubits - 1 - q) as u32)) % 3])
                .collect()
        })
        .collect()
}

/// Outcome words of length n in lexicographic order, `+` first.
pub fn all_outcomes(n_qubits: usize) -> Vec<Vec<Sign>> {
    let d = 1usize << n_qubits;
    (0..d)
        .map(|m| {
            (0..n_qubits)
                .map(|q| if (m >> (n_qubits - 1 - q)) & 1 == 0 { Sign::Plus } else { Sign::Minus })
                .collect()
        })
        .collect()
}

/// Builds the full design with the standard initial states.
pub fn enumerate_configurations(
    n_qubits: usize,
    times: &[f64],
    shots_per_setting: u64,
) -> Result<ExperimentDesign> {
    let states = standard_initial_states(n_qubits)?;
    ExperimentDesign::with_states(states, times, shots_per_setting)
}

impl ExperimentDesign {
    pub fn with_states(states: StateSet, times: &[f64], shots_per_setting: u64) -> Result<Self> {
        let n_qubits = states.n_qubits();
        if times.is_empty() {
            return Err(Error::invalid("at least one evolution time is required"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("evolution times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("evolution times must be strictly increasing"));
        }
        if shots_per_setting == 0 {
            return Err(Error::invalid("shots per setting must be positive"));
        }
        let bases = all_bases(n_qubits);
        let outcomes = all_outcomes(n_qubits);
        let d = outcomes.len();
        let mut configurations = Vec::with_capacity(times.len() * states.len() * bases.len() * d);
        for time_index in 0..times.len() {
            for state_id in 0..states.len() {
                for basis_index in 0..bases.len() {
                    for outcome_index in 0..d {
                        configurations.push(Configuration {
                            state_id,
                            time_index,
                            basis_index,
                            outcome_index,
                            independent: outcome_index + 1 != d,
                        });
                    }
                }
            }
        }
        Ok(ExperimentDesign {
            n_qubits,
            times: times.to_vec(),
            shots_per_setting,
            states,
            bases,
            outcomes,
            configurations,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn shots_per_setting(&self) -> u64 {
        self.shots_per_setting
    }

    pub fn with_shots(mut self, shots_per_setting: u64) -> Self {
        self.shots_per_setting = shots_per_setting.max(1);
        self
    }

    pub fn states(&self) -> &StateSet {
        &self.states
    }

    pub fn bases(&self) -> &[Vec<Axis>] {
        &self.bases
    }

    pub fn outcomes(&self) -> &[Vec<Sign>] {
        &self.outcomes
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    pub fn n_configurations(&self) -> usize {
        self.configurations.len()
    }

    /// Number of (state, time, basis) groups.
    pub fn n_settings(&self) -> usize {
        self.times.len() * self.states.len() * self.bases.len()
    }

    pub fn independent_count(&self) -> usize {
        self.configurations.iter().filter(|c| c.independent).count()
    }

    /// Row of a configuration in probability-shaped vectors.
    pub fn row(&self, state_id: usize, time_index: usize, basis_index: usize, outcome_index: usize) -> usize {
        ((time_index * self.states.len() + state_id) * self.bases.len() + basis_index) * self.dim()
            + outcome_index
    }

    /// Index of the (state, time, basis) group a row belongs to.
    pub fn group_of(&self, row: usize) -> usize {
        row / self.dim()
    }

    /// Rows of all independent configurations.
    pub fn independent_rows(&self) -> Vec<usize> {
        (0..self.configurations.len())
            .filter(|&k| self.configurations[k].independent)
            .collect()
    }

    pub fn setting(&self, c: &Configuration) -> MeasurementSetting {
        MeasurementSetting {
            basis: self.bases[c.basis_index].clone(),
            outcome: self.outcomes[c.outcome_index].clone(),
        }
    }

    pub fn basis_index(&self, basis: &[Axis]) -> Option<usize> {
        self.bases.iter().position(|b| b == basis)
    }

    pub fn outcome_index(&self, outcome: &[Sign]) -> Option<usize> {
        self.outcomes.iter().position(|m| m == outcome)
    }

    /// Projectors indexed by `basis_index * d + outcome_index`.
    pub fn projectors(&self) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(self.bases.len() * self.dim());
        for b in &self.bases {
            for m in &self.outcomes {
                out.push(projector(&MeasurementSetting {
                    basis: b.clone(),
                    outcome: m.clone(),
                }));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliBasis;
    use crate::RMatrix;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).iter().all(|x| x.norm() < tol)
    }

    fn real(rows: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, rows, &data.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn plus_state_matrix() {
        let set = standard_initial_states(1).unwrap();
        assert_eq!(set.len(), 4);
        assert!(close(set.state(2), &real(2, &[0.5, 0.5, 0.5, 0.5]), 1e-15));
    }

    #[test]
    fn states_are_density_matrices() {
        for n in 1..=3 {
            for rho in standard_initial_states(n).unwrap().states() {
                crate::hermitian::require_psd(rho, 1e-12).unwrap();
                assert!((rho.trace() - c64(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_qubit_states_span_operator_space() {
        let set = standard_initial_states(2).unwrap();
        let basis = PauliBasis::new(2).unwrap();
        // Pauli coefficients of Hermitian matrices are real.
        let m = RMatrix::from_fn(16, 16, |s, a| basis.coefficients(set.state(s))[a].re);
        assert_eq!(m.rank(1e-10), 16);
    }

    #[test]
    fn projector_examples() {
        let z_plus = projector(&MeasurementSetting::parse("z", "+").unwrap());
        assert!(close(&z_plus, &real(2, &[1.0, 0.0, 0.0, 0.0]), 1e-15));
        let x_minus = projector(&MeasurementSetting::parse("x", "-").unwrap());
        assert!(close(&x_minus, &real(2, &[0.5, -0.5, -0.5, 0.5]), 1e-15));

        let p = projector(&MeasurementSetting::parse("xz", "+-").unwrap());
        let px = projector(&MeasurementSetting::parse("x", "+").unwrap());
        let pz = projector(&MeasurementSetting::parse("z", "-").unwrap());
        assert!(close(&p, &kron(&px, &pz), 1e-15));
        assert!(close(&(&p * &p), &p, 1e-14));
        assert!((p.trace() - c64(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn unicode_minus_is_accepted() {
        assert_eq!(parse_outcome("+\u{2212}").unwrap(), vec![Sign::Plus, Sign::Minus]);
        assert!(parse_basis("xw").is_err());
    }

    #[test]
    fn projectors_resolve_identity_per_basis() {
        let design = enumerate_configurations(2, &[1.0], 100).unwrap();
        let proj = design.projectors();
        let d = design.dim();
        for b in 0..design.bases().len() {
            let sum = (0..d).fold(CMatrix::zeros(d, d), |acc, m| acc + &proj[b * d + m]);
            assert!(close(&sum, &CMatrix::identity(d, d), 1e-14));
        }
    }

    #[test]
    fn independent_counts() {
        assert_eq!(enumerate_configurations(1, &[1.0], 1).unwrap().independent_count(), 12);
        assert_eq!(enumerate_configurations(2, &[1.0], 1).unwrap().independent_count(), 432);
        let two_times = enumerate_configurations(2, &[0.5, 1.0], 1).unwrap();
        assert_eq!(two_times.independent_count(), 864);
    }

    #[test]
    fn exactly_one_dependent_outcome_per_group() {
        let design = enumerate_configurations(2, &[0.5, 1.0], 1).unwrap();
        let mut dependent = vec![0usize; design.n_settings()];
        for (k, c) in design.configurations().iter().enumerate() {
            assert_eq!(design.row(c.state_id, c.time_index, c.basis_index, c.outcome_index), k);
            if !c.independent {
                dependent[design.group_of(k)] += 1;
                assert_eq!(outcome_string(&design.outcomes()[c.outcome_index]), "--");
            }
        }
        assert!(dependent.iter().all(|&n| n == 1));
    }

    #[test]
    fn independent_two_qubit_configurations_are_informationally_complete() {
        // Each configuration is the functional ρ ↦ Tr{M ρ}; pairing state and
        // measurement gives a vector in the 256-dimensional space of
        // superoperators, of which the trace-preserving ones span 240.
        let design = enumerate_configurations(2, &[1.0], 1).unwrap();
        let basis = PauliBasis::new(2).unwrap();
        let proj = design.projectors();
        let d = design.dim();
        let state_coeffs: Vec<Vec<f64>> = design
            .states()
            .states()
            .iter()
            .map(|r| basis.coefficients(r).iter().map(|z| z.re).collect())
            .collect();
        let rows: Vec<Vec<f64>> = design
            .configurations()
            .iter()
            .filter(|c| c.independent)
            .map(|c| {
                let m = basis.coefficients(&proj[c.basis_index * d + c.outcome_index]);
                let r = &state_coeffs[c.state_id];
                let mut v = Vec::with_capacity(256);
                for a in 0..16 {
                    for b in 0..16 {
                        v.push(m[a].re * r[b]);
                    }
                }
                v
            })
            .collect();
        let mat = RMatrix::from_fn(rows.len(), 256, |i, j| rows[i][j]);
        assert!(mat.rank(1e-9) >= 240);
    }

    #[test]
    fn dropped_outcome_is_recoverable() {
        let design = enumerate_configurations(1, &[1.0], 1).unwrap();
        let rho = standard_initial_states(1).unwrap().state(3).clone();
        let proj = design.projectors();
        for b in 0..3 {
            let p0 = (&proj[2 * b] * &rho).trace().re;
            let p1 = (&proj[2 * b + 1] * &rho).trace().re;
            assert!((1.0 - p0 - p1).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_times() {
        assert!(enumerate_configurations(1, &[1.0, 0.5], 1).is_err());
        assert!(enumerate_configurations(1, &[-1.0], 1).is_err());
        assert!(enumerate_configurations(5, &[1.0], 1).is_err());
    }
}
