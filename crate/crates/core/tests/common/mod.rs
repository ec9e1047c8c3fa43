#![allow(dead_code)]

use lqt_core::{c64, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Hermitian with unit Frobenius norm.
pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = gaussian_matrix(n, rng);
    let h = (&a + a.adjoint()).scale(0.5);
    let norm = h.norm();
    h.unscale(norm)
}

/// PSD with the given trace.
pub fn random_psd<R: Rng>(n: usize, trace: f64, rng: &mut R) -> CMatrix {
    let a = gaussian_matrix(n, rng);
    let g = &a * a.adjoint();
    let tr = g.trace().re;
    let g = g.scale(trace / tr);
    (&g + g.adjoint()).scale(0.5)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff_slice(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
