//! Test support: seeded random tensors and slow reference oracles kept
//! independent of the production code paths they check.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{ComplexTensor3, Tensor3};

/// Uniform [-1, 1) entries, deterministic per seed.
pub fn random_tensor(n1: usize, n2: usize, n3: usize, seed: u64) -> Tensor3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.gen_range(-1.0..1.0))
}

/// Direct O(n3^2) DFT summation along mode 3, the oracle for the FFT path.
pub fn naive_dft_mode3(x: &Tensor3) -> ComplexTensor3 {
    let (n1, n2, n3) = x.dims();
    let mut out = ComplexTensor3::zeros(n1, n2, n3);
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..n3 {
                    let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n3 as f64;
                    acc += Complex64::from_polar(x.at(i, j, t), angle);
                }
                out.set(i, j, k, acc);
            }
        }
    }
    out
}

/// Dense assembly of (2I + Dh'Dh + Dv'Dv + Dz'Dz) from the circular
/// stencils, the oracle for the FFT-diagonalized background solve.
pub fn dense_tv_system(n1: usize, n2: usize, n3: usize) -> nalgebra::DMatrix<f64> {
    let n = n1 * n2 * n3;
    let idx = |i: usize, j: usize, k: usize| i + n1 * j + n1 * n2 * k;
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let r = idx(i, j, k);
                m[(r, r)] += 2.0 + 6.0; // 2I plus the three 1-D Laplacian diagonals
                m[(r, idx((i + 1) % n1, j, k))] -= 1.0;
                m[(r, idx((i + n1 - 1) % n1, j, k))] -= 1.0;
                m[(r, idx(i, (j + 1) % n2, k))] -= 1.0;
                m[(r, idx(i, (j + n2 - 1) % n2, k))] -= 1.0;
                m[(r, idx(i, j, (k + 1) % n3))] -= 1.0;
                m[(r, idx(i, j, (k + n3 - 1) % n3))] -= 1.0;
            }
        }
    }
    m
}

/// Minimize f over [lo, hi] by exhaustive grid search at the given step.
pub fn grid_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let mut best_x = lo;
    let mut best_f = f(lo);
    let n = ((hi - lo) / step).ceil() as usize;
    for t in 1..=n {
        let x = lo + t as f64 * step;
        let v = f(x);
        if v < best_f {
            best_f = v;
            best_x = x;
        }
    }
    best_x
}
