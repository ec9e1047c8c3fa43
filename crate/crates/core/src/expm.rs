//! Dense matrix exponential by scaling and squaring with diagonal Padé
//! approximants (degrees 3, 5, 7, 9, 13).
//!
//! Degree selection and the θ_m thresholds follow Higham's 2005 analysis,
//! which bounds the backward error by unit roundoff in double precision.
//! Works for both real and complex element types.

use nalgebra::{ComplexField, DMatrix};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn norm_1<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Computes `exp(a)` for a square matrix.
///
/// Panics if `a` is not square or contains non-finite entries.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = norm_1(a);
    assert!(norm.is_finite(), "expm: non-finite matrix entries");

    let ident = DMatrix::<T>::identity(n, n);
    for (m, theta) in THETA {
        if norm <= theta {
            let (u, v) = match m {
                3 => pade_low(a, &ident, &B3),
                5 => pade_low(a, &ident, &B5),
                7 => pade_low(a, &ident, &B7),
                _ => pade_low(a, &ident, &B9),
            };
            return solve_pade(u, v);
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));
    let (u, v) = pade13(&scaled, &ident);
    let mut r = solve_pade(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn add_scaled<T: ComplexField<RealField = f64>>(dst: &mut DMatrix<T>, alpha: T, src: &DMatrix<T>) {
    dst.zip_apply(src, |x, y| *x += y * alpha.clone());
}

fn lift<T: ComplexField<RealField = f64>>(x: f64) -> T {
    T::from_real(x)
}

fn pade_low<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    ident: &DMatrix<T>,
    b: &[f64],
) -> (DMatrix<T>, DMatrix<T>) {
    let m = b.len() - 1;
    let a2 = a * a;
    // Even powers A^0, A^2, A^4, ...
    let mut powers = vec![ident.clone(), a2.clone()];
    while 2 * (powers.len()) <= m {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let n = a.nrows();
    let mut odd = DMatrix::<T>::zeros(n, n);
    let mut even = DMatrix::<T>::zeros(n, n);
    for (k, pw) in powers.iter().enumerate() {
        let i_even = 2 * k;
        let i_odd = 2 * k + 1;
        if i_even <= m {
            add_scaled(&mut even, lift::<T>(b[i_even]), pw);
        }
        if i_odd <= m {
            add_scaled(&mut odd, lift::<T>(b[i_odd]), pw);
        }
    }
    (a * odd, even)
}

fn pade13<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    ident: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>) {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |x: f64| lift::<T>(x);

    let mut inner_u = a6.scale(b[13]);
    add_scaled(&mut inner_u, c(b[11]), &a4);
    add_scaled(&mut inner_u, c(b[9]), &a2);
    let mut u = &a6 * inner_u;
    add_scaled(&mut u, c(b[7]), &a6);
    add_scaled(&mut u, c(b[5]), &a4);
    add_scaled(&mut u, c(b[3]), &a2);
    add_scaled(&mut u, c(b[1]), ident);
    let u = a * u;

    let mut inner_v = a6.scale(b[12]);
    add_scaled(&mut inner_v, c(b[10]), &a4);
    add_scaled(&mut inner_v, c(b[8]), &a2);
    let mut v = &a6 * inner_v;
    add_scaled(&mut v, c(b[6]), &a6);
    add_scaled(&mut v, c(b[4]), &a4);
    add_scaled(&mut v, c(b[2]), &a2);
    add_scaled(&mut v, c(b[0]), ident);
    (u, v)
}

fn solve_pade<T: ComplexField<RealField = f64>>(u: DMatrix<T>, v: DMatrix<T>) -> DMatrix<T> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is singular; input norm out of range")
}
