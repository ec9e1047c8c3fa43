//! Real Pauli-transfer representation of the generator.
//!
//! Writing ρ = Σ_β r_β E_β with r_β = Tr{E_β ρ}/d, the generator acts as a
//! real d²×d² matrix Λ_{αβ} = Tr{E_α L(E_β)}/d. Each Pauli pair (a, b) of the
//! dissipator contributes a fixed sparse pattern read off the multiplication
//! table, so Λ can be assembled from (c, G) without dense superoperators.
//! This is the hot path of full maximum likelihood.

use crate::expm::expm;
use crate::pauli::PauliBasis;
use crate::quantum::ExperimentDesign;
use crate::{c64, CMatrix, RMatrix, C64};

#[derive(Debug, Clone)]
pub struct PauliTransfer {
    n: usize,
    m: usize,
    /// (γ, α, β, coefficient) for −i[E_γ, ·].
    ham: Vec<(u16, u16, u16, f64)>,
    /// Pair (a, b) owns entries[offsets[a*m+b]..offsets[a*m+b+1]].
    offsets: Vec<u32>,
    entries: Vec<(u16, u16, C64)>,
}

impl PauliTransfer {
    pub fn new(pauli: &PauliBasis) -> Self {
        let n = pauli.len();
        let m = n - 1;
        let mut ham = Vec::new();
        for g in 1..n {
            for beta in 0..n {
                let (p1, k) = pauli.product(g, beta);
                let (p2, _) = pauli.product(beta, g);
                if p1 != p2 {
                    // Anticommuting: −i(E_g E_β − E_β E_g) = −2i·p1·E_k.
                    let z = c64(0.0, -2.0) * p1.to_complex();
                    ham.push(((g - 1) as u16, k as u16, beta as u16, z.re));
                }
            }
        }
        let mut offsets = Vec::with_capacity(m * m + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for a in 1..n {
            for b in 1..n {
                let (p3, k3) = pauli.product(b, a);
                for beta in 0..n {
                    let (p1, k1) = pauli.product(a, beta);
                    let (p2, k2) = pauli.product(k1, b);
                    entries.push((k2 as u16, beta as u16, (p1 * p2).to_complex()));
                    let (p4, k4) = pauli.product(k3, beta);
                    let (p5, _) = pauli.product(beta, k3);
                    if p4 == p5 {
                        entries.push((k4 as u16, beta as u16, -(p3 * p4).to_complex()));
                    }
                }
                offsets.push(entries.len() as u32);
            }
        }
        PauliTransfer {
            n,
            m,
            ham,
            offsets,
            entries,
        }
    }

    /// d².
    pub fn size(&self) -> usize {
        self.n
    }

    /// Λ for Hamiltonian coefficients `c` and Pauli-basis Lindblad matrix.
    pub fn generator(&self, c: &[f64], g_pauli: &CMatrix) -> RMatrix {
        let mut lambda = RMatrix::zeros(self.n, self.n);
        self.add_hamiltonian(&mut lambda, c);
        for a in 0..self.m {
            for b in 0..self.m {
                let z = g_pauli[(a, b)];
                if z.re != 0.0 || z.im != 0.0 {
                    self.add_pair(&mut lambda, a, b, z);
                }
            }
        }
        lambda
    }

    pub fn add_hamiltonian(&self, lambda: &mut RMatrix, c: &[f64]) {
        for &(g, alpha, beta, coef) in &self.ham {
            lambda[(alpha as usize, beta as usize)] += c[g as usize] * coef;
        }
    }

    /// Adds Re(z · D^{ab}), the contribution of one Lindblad-matrix entry.
    #[inline]
    pub fn add_pair(&self, lambda: &mut RMatrix, a: usize, b: usize, z: C64) {
        let k = a * self.m + b;
        let (lo, hi) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
        for &(alpha, beta, coef) in &self.entries[lo..hi] {
            lambda[(alpha as usize, beta as usize)] += z.re * coef.re - z.im * coef.im;
        }
    }
}

/// Maps a transfer generator to configuration probabilities for a fixed
/// design.
#[derive(Debug, Clone)]
pub struct ProbabilityMap {
    times: Vec<f64>,
    /// Column s: Pauli coordinates r_β of initial state s.
    states: RMatrix,
    /// Row (b·d + m): Tr{M E_α}.
    meas: RMatrix,
}

impl ProbabilityMap {
    pub fn new(pauli: &PauliBasis, design: &ExperimentDesign) -> Self {
        let n = pauli.len();
        let state_list = design.states().states();
        let states = RMatrix::from_fn(n, state_list.len(), |beta, s| {
            pauli.coefficients(&state_list[s])[beta].re
        });
        let projectors = design.projectors();
        let d = pauli.dim() as f64;
        let meas = RMatrix::from_fn(projectors.len(), n, |k, alpha| {
            pauli.coefficients(&projectors[k])[alpha].re * d
        });
        ProbabilityMap {
            times: design.times().to_vec(),
            states,
            meas,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len() * self.states.ncols() * self.meas.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes all configuration probabilities, in design row order, to `out`.
    pub fn probabilities(&self, lambda: &RMatrix, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let chunk = self.states.ncols() * self.meas.nrows();
        for (i, &t) in self.times.iter().enumerate() {
            let transfer = expm(&lambda.scale(t));
            let evolved = transfer * &self.states;
            let p = &self.meas * evolved;
            // Column-major (meas, state) storage matches the row layout.
            out[i * chunk..(i + 1) * chunk].copy_from_slice(p.as_slice());
        }
    }

    pub fn probabilities_vec(&self, lambda: &RMatrix) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.probabilities(lambda, &mut out);
        out
    }
}
