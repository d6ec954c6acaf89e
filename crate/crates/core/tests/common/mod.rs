//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerics.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sudas::numerics::ComplexMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Log-uniform draw on `[lo, hi]`.
pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Kahan–Babuška summation.
pub fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Eigenvalues of a Hermitian matrix, descending, by cyclic Jacobi on the
/// real symmetric embedding `[[Re, -Im], [Im, Re]]` (every eigenvalue
/// appears twice there).
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let m = 2 * n;
    let mut s = vec![vec![0.0; m]; m];
    for r in 0..n {
        for c in 0..n {
            let z = a[(r, c)];
            s[r][c] = z.re;
            s[r + n][c + n] = z.re;
            s[r][c + n] = -z.im;
            s[r + n][c] = z.im;
        }
    }
    for _ in 0..100 {
        let off: f64 = (0..m).flat_map(|p| (0..m).filter(move |&q| q != p).map(move |q| (p, q))).map(|(p, q)| s[p][q] * s[p][q]).sum();
        let scale: f64 = (0..m).map(|p| s[p][p] * s[p][p]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| s[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev.into_iter().step_by(2).collect()
}

/// Singular values via eigenvalues of AᴴA, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let g = &a.adjoint() * a;
    let mut sv: Vec<f64> = hermitian_eigenvalues(&g).into_iter().map(|x| x.max(0.0).sqrt()).collect();
    sv.truncate(a.rows().min(a.cols()));
    sv
}

/// log₂ det of a Hermitian positive definite matrix via its eigenvalues.
pub fn log2_det(a: &ComplexMatrix) -> f64 {
    neumaier_sum(hermitian_eigenvalues(a).into_iter().map(f64::log2))
}

pub fn rel_err(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// `(1+w)·log₂(1+SINR(x)) − price·x` for the relay closed forms; `exact`
/// picks `ab/(1+a+b)` over `ab/(a+b)`.
pub fn relay_surrogate(g: f64, b: f64, w: f64, price: f64, exact: bool, x: f64) -> f64 {
    let a = g * x;
    let s = if a <= 0.0 {
        0.0
    } else if exact {
        a * b / (1.0 + a + b)
    } else {
        a * b / (a + b)
    };
    (1.0 + w) * s.ln_1p() / std::f64::consts::LN_2 - price * x
}

/// `relay_surrogate(x0 + d) - relay_surrogate(x0)` without cancellation.
pub fn relay_surrogate_delta(g: f64, b: f64, w: f64, price: f64, exact: bool, x0: f64, d: f64) -> f64 {
    let (a0, a) = (g * x0, g * (x0 + d));
    let (s0, ds) = if exact {
        (a0 * b / (1.0 + a0 + b), b * (1.0 + b) * g * d / ((1.0 + a + b) * (1.0 + a0 + b)))
    } else if a0 + b <= 0.0 || a + b <= 0.0 {
        return relay_surrogate(g, b, w, price, exact, x0 + d) - relay_surrogate(g, b, w, price, exact, x0);
    } else {
        (a0 * b / (a0 + b), b * b * g * d / ((a + b) * (a0 + b)))
    };
    (1.0 + w) * (ds / (1.0 + s0)).ln_1p() / std::f64::consts::LN_2 - price * d
}
