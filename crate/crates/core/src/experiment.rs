//! Finite-shot sampling, relative frequencies and the counts-file format.
//!
//! A counts file is a CSV with header `state_id,time_index,basis,outcome,count`
//! (basis as a word over `x/y/z`, outcome as a word over `+/-`) next to a
//! sidecar `<stem>.meta.json` holding `{"n_qubits", "times", "N_sc"}`.
//! Every (state, time, basis) group that appears in the file must total
//! exactly `N_sc` counts; outcomes missing from a present group count as 0.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quantum::{basis_string, enumerate_configurations, outcome_string, parse_basis, parse_outcome, ExperimentDesign};
use crate::{Error, Result};

/// Whether tensor values are sampled frequencies or exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Frequency,
    Probability,
}

/// Per-configuration values in design row order, with a mask of observed
/// (state, time, basis) groups.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTensor {
    pub kind: TensorKind,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
    /// Shots per setting behind frequencies; `None` in infinite-shot mode.
    pub shots_per_setting: Option<u64>,
}

impl OutcomeTensor {
    /// Infinite-shot mode: exact probabilities stand in for frequencies.
    pub fn from_probabilities(design: &ExperimentDesign, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != design.n_configurations() {
            return Err(Error::dim(format!(
                "expected {} probabilities, got {}",
                design.n_configurations(),
                probabilities.len()
            )));
        }
        Ok(OutcomeTensor {
            kind: TensorKind::Probability,
            values: probabilities,
            observed: vec![true; design.n_settings()],
            shots_per_setting: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_observed(&self, design: &ExperimentDesign, row: usize) -> bool {
        self.observed[design.group_of(row)]
    }
}

/// Integer counts in design row order.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    design: ExperimentDesign,
    counts: Vec<u64>,
    observed: Vec<bool>,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub state_id: usize,
    pub time_index: usize,
    pub basis: String,
    pub outcome: String,
    pub count: u64,
}

impl CountsTable {
    /// Builds a table, checking that each observed group sums to N_sc.
    pub fn new(design: ExperimentDesign, counts: Vec<u64>, observed: Vec<bool>) -> Result<Self> {
        if counts.len() != design.n_configurations() || observed.len() != design.n_settings() {
            return Err(Error::dim("counts do not match the design"));
        }
        let d = design.dim();
        let n_sc = design.shots_per_setting();
        for (g, &seen) in observed.iter().enumerate() {
            let total: u64 = counts[g * d..(g + 1) * d].iter().sum();
            if seen && total != n_sc {
                return Err(Error::invalid(format!("group {g} totals {total} shots, expected {n_sc}")));
            }
            if !seen && total != 0 {
                return Err(Error::invalid(format!("unobserved group {g} has counts")));
            }
        }
        Ok(CountsTable {
            design,
            counts,
            observed,
        })
    }

    pub fn design(&self) -> &ExperimentDesign {
        &self.design
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn shots_per_setting(&self) -> u64 {
        self.design.shots_per_setting()
    }

    /// Σ counts.
    pub fn total_shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Rows of every observed group, in design order.
    pub fn entries(&self) -> Vec<CountEntry> {
        let d = self.design.dim();
        self.design
            .configurations()
            .iter()
            .enumerate()
            .filter(|(k, _)| self.observed[k / d])
            .map(|(k, c)| CountEntry {
                state_id: c.state_id,
                time_index: c.time_index,
                basis: basis_string(&self.design.bases()[c.basis_index]),
                outcome: outcome_string(&self.design.outcomes()[c.outcome_index]),
                count: self.counts[k],
            })
            .collect()
    }
}

/// Draws N_sc shots per (state, time, basis) group by sequential binomial
/// conditioning. Group g uses stream g of a ChaCha8 generator seeded with
/// `seed`, so the result does not depend on scheduling.
pub fn sample_counts(design: &ExperimentDesign, probabilities: &[f64], seed: u64) -> Result<CountsTable> {
    if probabilities.len() != design.n_configurations() {
        return Err(Error::dim("probability vector does not match the design"));
    }
    let d = design.dim();
    let n_sc = design.shots_per_setting();
    for (g, chunk) in probabilities.chunks(d).enumerate() {
        if let Some(p) = chunk.iter().find(|&&p| p < -1e-12 || !p.is_finite()) {
            return Err(Error::invalid(format!("negative or non-finite probability {p} in group {g}")));
        }
        let sum: f64 = chunk.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities of group {g} sum to {sum}")));
        }
    }
    let counts: Vec<u64> = probabilities
        .par_chunks(d)
        .enumerate()
        .flat_map_iter(|(g, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(g as u64);
            multinomial(n_sc, chunk, &mut rng)
        })
        .collect();
    CountsTable::new(design.clone(), counts, vec![true; design.n_settings()])
}

fn multinomial(n: u64, p: &[f64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut out = vec![0u64; p.len()];
    let mut remaining = n;
    let mut mass: f64 = p.iter().map(|x| x.max(0.0)).sum();
    for (k, &pk) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == p.len() {
            out[k] = remaining;
            break;
        }
        let pk = pk.max(0.0);
        let ratio = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = Binomial::new(remaining, ratio)
            .expect("ratio is within [0, 1]")
            .sample(rng);
        out[k] = x;
        remaining -= x;
        mass -= pk;
    }
    out
}

/// f = count / N_sc, with unobserved groups left at zero.
pub fn frequencies(counts: &CountsTable) -> Result<OutcomeTensor> {
    let n_sc = counts.shots_per_setting();
    if n_sc == 0 {
        return Err(Error::invalid("zero shots per setting"));
    }
    let inv = 1.0 / n_sc as f64;
    Ok(OutcomeTensor {
        kind: TensorKind::Frequency,
        values: counts.counts.iter().map(|&c| c as f64 * inv).collect(),
        observed: counts.observed.clone(),
        shots_per_setting: Some(n_sc),
    })
}

/// Contents of the sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsMeta {
    pub n_qubits: usize,
    pub times: Vec<f64>,
    #[serde(rename = "N_sc")]
    pub n_sc: u64,
    /// Free-form provenance, ignored on read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// `data/run.csv` → `data/run.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_counts(path: &Path, table: &CountsTable) -> Result<()> {
    write_counts_with(path, table, None)
}

/// Writes the CSV and its sidecar, embedding `provenance` in the sidecar.
pub fn write_counts_with(path: &Path, table: &CountsTable, provenance: Option<serde_json::Value>) -> Result<()> {
    let mut text = String::from("state_id,time_index,basis,outcome,count\n");
    for e in table.entries() {
        text.push_str(&format!("{},{},{},{},{}\n", e.state_id, e.time_index, e.basis, e.outcome, e.count));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let meta = CountsMeta {
        n_qubits: table.design.n_qubits(),
        times: table.design.times().to_vec(),
        n_sc: table.design.shots_per_setting(),
        provenance,
    };
    let meta_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))
}

pub fn read_counts(path: &Path) -> Result<CountsTable> {
    let meta_path = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CountsMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let design = enumerate_configurations(meta.n_qubits, &meta.times, meta.n_sc)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let expected = ["state_id", "time_index", "basis", "outcome", "count"];
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(parse_err(1, format!("expected header {}", expected.join(","))));
    }

    let d = design.dim();
    let mut counts = vec![0u64; design.n_configurations()];
    let mut seen_row = vec![false; design.n_configurations()];
    let mut observed = vec![false; design.n_settings()];
    let mut first_line = vec![0usize; design.n_settings()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", record.len())));
        }
        let field = |i: usize| record[i].trim();
        let state_id: usize = field(0)
            .parse()
            .map_err(|_| parse_err(line, format!("bad state_id {:?}", field(0))))?;
        let time_index: usize = field(1)
            .parse()
            .map_err(|_| parse_err(line, format!("bad time_index {:?}", field(1))))?;
        let basis = parse_basis(field(2)).map_err(|e| parse_err(line, e.to_string()))?;
        let outcome = parse_outcome(field(3)).map_err(|e| parse_err(line, e.to_string()))?;
        let count: u64 = field(4)
            .parse()
            .map_err(|_| parse_err(line, format!("bad count {:?}", field(4))))?;
        if state_id >= design.states().len() {
            return Err(parse_err(line, format!("state_id {state_id} out of range")));
        }
        if time_index >= design.times().len() {
            return Err(parse_err(line, format!("time_index {time_index} out of range")));
        }
        if basis.len() != meta.n_qubits || outcome.len() != meta.n_qubits {
            return Err(parse_err(line, format!("words must have {} letters", meta.n_qubits)));
        }
        let b = design.basis_index(&basis).expect("valid basis word");
        let m = design.outcome_index(&outcome).expect("valid outcome word");
        let row = design.row(state_id, time_index, b, m);
        if seen_row[row] {
            return Err(parse_err(line, "duplicate row".into()));
        }
        seen_row[row] = true;
        counts[row] = count;
        let g = row / d;
        if !observed[g] {
            observed[g] = true;
            first_line[g] = line;
        }
    }
    let n_sc = meta.n_sc;
    for g in 0..design.n_settings() {
        let total: u64 = counts[g * d..(g + 1) * d].iter().sum();
        if observed[g] && total != n_sc {
            let c = &design.configurations()[g * d];
            return Err(parse_err(
                first_line[g],
                format!(
                    "state {} time {} basis {} totals {total} counts, expected N_sc = {n_sc}",
                    c.state_id,
                    c.time_index,
                    basis_string(&design.bases()[c.basis_index])
                ),
            ));
        }
    }
    CountsTable::new(design, counts, observed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(n: usize, shots: u64) -> ExperimentDesign {
        enumerate_configurations(n, &[1.0], shots).unwrap()
    }

    fn uniform(design: &ExperimentDesign) -> Vec<f64> {
        vec![1.0 / design.dim() as f64; design.n_configurations()]
    }

    #[test]
    fn deterministic_outcome() {
        let dz = design(1, 777);
        let mut p = vec![0.0; dz.n_configurations()];
        for g in 0..dz.n_settings() {
            p[2 * g] = 1.0;
        }
        let t = sample_counts(&dz, &p, 1).unwrap();
        for g in 0..dz.n_settings() {
            assert_eq!(&t.counts()[2 * g..2 * g + 2], &[777, 0]);
        }
    }

    #[test]
    fn binomial_spread() {
        let dz = design(1, 10_000);
        let t = sample_counts(&dz, &uniform(&dz), 42).unwrap();
        for &c in t.counts() {
            assert!((c as f64 - 5000.0).abs() < 5.0 * 50.0, "{c}");
        }
        assert_eq!(t.total_shots(), 120_000);
    }

    #[test]
    fn frequencies_are_ratios() {
        let dz = design(1, 100);
        let mut counts = vec![0u64; dz.n_configurations()];
        for g in 0..dz.n_settings() {
            counts[2 * g] = 60;
            counts[2 * g + 1] = 40;
        }
        let t = CountsTable::new(dz.clone(), counts, vec![true; dz.n_settings()]).unwrap();
        let f = frequencies(&t).unwrap();
        assert_eq!(&f.values[..2], &[0.6, 0.4]);
        assert_eq!(f.kind, TensorKind::Frequency);
    }

    #[test]
    fn infinite_shot_mode_is_identity() {
        let dz = design(2, 1);
        let p: Vec<f64> = (0..dz.n_configurations()).map(|k| ((k % 4) as f64 + 1.0) / 10.0).collect();
        let f = OutcomeTensor::from_probabilities(&dz, p.clone()).unwrap();
        assert_eq!(f.values, p);
        assert_eq!(f.kind, TensorKind::Probability);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let dz = design(1, 10);
        let mut p = uniform(&dz);
        p[0] = -0.1;
        p[1] = 1.1;
        assert!(sample_counts(&dz, &p, 0).is_err());
        let mut p = uniform(&dz);
        p[0] = 0.6;
        assert!(sample_counts(&dz, &p, 0).is_err());
    }

    #[test]
    fn reproducible_sampling() {
        let dz = design(2, 1000);
        let a = sample_counts(&dz, &uniform(&dz), 5).unwrap();
        let b = sample_counts(&dz, &uniform(&dz), 5).unwrap();
        let c = sample_counts(&dz, &uniform(&dz), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn file_round_trip_and_entry_count() {
        let dz = design(2, 1000);
        let table = sample_counts(&dz, &uniform(&dz), 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_counts(&path, &table).unwrap();
        assert!(dir.path().join("run.meta.json").exists());
        let back = read_counts(&path).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.entries().len(), 16 * 9 * 4);
    }

    #[test]
    fn rejects_inconsistent_totals_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            sidecar_path(&path),
            r#"{"n_qubits": 1, "times": [1.0], "N_sc": 10}"#,
        )
        .unwrap();
        std::fs::write(
            &path,
            "state_id,time_index,basis,outcome,count\n0,0,x,+,5\n0,0,x,-,5\n1,0,z,+,3\n1,0,z,\u{2212},4\n",
        )
        .unwrap();
        match read_counts(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("totals 7"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, "state_id,time_index,basis,outcome,count\n0,0,q,+,10\n").unwrap();
        assert!(matches!(read_counts(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn partial_files_mark_observed_groups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.csv");
        std::fs::write(sidecar_path(&path), r#"{"n_qubits": 1, "times": [1.0], "N_sc": 10}"#).unwrap();
        std::fs::write(&path, "state_id,time_index,basis,outcome,count\n2,0,x,+,10\n").unwrap();
        let t = read_counts(&path).unwrap();
        assert_eq!(t.observed().iter().filter(|&&o| o).count(), 1);
        assert_eq!(t.entries().len(), 2);
    }
}
