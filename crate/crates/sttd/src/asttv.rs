//! Asymmetric spatial-temporal total variation: circular forward
//! difference operators along the three axes, their adjoints, the
//! weighted TV norm, and the FFT-diagonalized solver for linear systems
//! of the form (2I + Dh'Dh + Dv'Dv + Dz'Dz) B = rhs.

use crate::error::Result;
use crate::tensor::{fft3, ifft3, Tensor3};

/// Horizontal (row-direction) circular forward difference.
pub fn diff_h(x: &Tensor3) -> Tensor3 {
    let (n1, _, _) = x.dims();
    Tensor3::from_fn(x.dims().0, x.dims().1, x.dims().2, |i, j, k| {
        x.at((i + 1) % n1, j, k) - x.at(i, j, k)
    })
}

/// Vertical (column-direction) circular forward difference.
pub fn diff_v(x: &Tensor3) -> Tensor3 {
    let (_, n2, _) = x.dims();
    Tensor3::from_fn(x.dims().0, x.dims().1, x.dims().2, |i, j, k| {
        x.at(i, (j + 1) % n2, k) - x.at(i, j, k)
    })
}

/// Temporal (frame-direction) circular forward difference.
pub fn diff_z(x: &Tensor3) -> Tensor3 {
    let (_, _, n3) = x.dims();
    Tensor3::from_fn(x.dims().0, x.dims().1, x.dims().2, |i, j, k| {
        x.at(i, j, (k + 1) % n3) - x.at(i, j, k)
    })
}

pub fn diff_h_adj(y: &Tensor3) -> Tensor3 {
    let (n1, _, _) = y.dims();
    Tensor3::from_fn(y.dims().0, y.dims().1, y.dims().2, |i, j, k| {
        y.at((i + n1 - 1) % n1, j, k) - y.at(i, j, k)
    })
}

pub fn diff_v_adj(y: &Tensor3) -> Tensor3 {
    let (_, n2, _) = y.dims();
    Tensor3::from_fn(y.dims().0, y.dims().1, y.dims().2, |i, j, k| {
        y.at(i, (j + n2 - 1) % n2, k) - y.at(i, j, k)
    })
}

pub fn diff_z_adj(y: &Tensor3) -> Tensor3 {
    let (_, _, n3) = y.dims();
    Tensor3::from_fn(y.dims().0, y.dims().1, y.dims().2, |i, j, k| {
        y.at(i, j, (k + n3 - 1) % n3) - y.at(i, j, k)
    })
}

/// ||Dh x||_1 + ||Dv x||_1 + delta * ||Dz x||_1.
pub fn asttv_norm(x: &Tensor3, delta: f64) -> f64 {
    assert!(delta >= 0.0);
    let l1 = |t: &Tensor3| t.data().iter().map(|v| v.abs()).sum::<f64>();
    l1(&diff_h(x)) + l1(&diff_v(x)) + delta * l1(&diff_z(x))
}

/// Precomputed Fourier transfer function of (2I + Dh'Dh + Dv'Dv + Dz'Dz).
/// Depends only on the dims (and on whether the TV coupling is present),
/// so it is built once per tensor shape and shared across iterations.
#[derive(Debug, Clone)]
pub struct DiffSpectra {
    dims: (usize, usize, usize),
    denominator: Vec<f64>,
}

impl DiffSpectra {
    /// Transfer function with all three difference operators present.
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        let gain = |w: usize, n: usize| {
            2.0 - 2.0 * (2.0 * std::f64::consts::PI * w as f64 / n as f64).cos()
        };
        let mut denominator = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    denominator.push(2.0 + gain(i, n1) + gain(j, n2) + gain(k, n3));
                }
            }
        }
        DiffSpectra { dims: (n1, n2, n3), denominator }
    }

    /// Transfer function with the TV coupling absent: (2I) B = rhs.
    pub fn without_tv(n1: usize, n2: usize, n3: usize) -> Self {
        DiffSpectra { dims: (n1, n2, n3), denominator: vec![2.0; n1 * n2 * n3] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }
}

/// Solve (2I + Delta) B = rhs by pointwise division in the 3-D Fourier
/// domain. Exact under the circular boundary convention of the
/// difference operators.
pub fn solve_b(rhs: &Tensor3, spectra: &DiffSpectra) -> Result<Tensor3> {
    debug_assert_eq!(rhs.dims(), spectra.dims());
    let mut f = fft3(rhs);
    for (c, d) in f.data_mut().iter_mut().zip(spectra.denominator()) {
        *c /= *d;
    }
    ifft3(&f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_tensor;
    use nalgebra::DVector;

    #[test]
    fn differences_of_constant_are_zero() {
        let x = Tensor3::from_fn(4, 5, 3, |_, _, _| 0.7);
        for op in [diff_h, diff_v, diff_z, diff_h_adj, diff_v_adj, diff_z_adj] {
            assert_eq!(op(&x).frobenius_norm(), 0.0);
        }
    }

    #[test]
    fn ramp_wraps_circularly() {
        let x = Tensor3::from_fn(4, 4, 2, |i, _, _| i as f64);
        let dh = diff_h(&x);
        for k in 0..2 {
            for j in 0..4 {
                for i in 0..3 {
                    assert_eq!(dh.at(i, j, k), 1.0);
                }
                assert_eq!(dh.at(3, j, k), -3.0);
            }
        }
        assert_eq!(diff_v(&x).frobenius_norm(), 0.0);
        assert_eq!(diff_z(&x).frobenius_norm(), 0.0);
    }

    #[test]
    fn identical_slices_have_zero_temporal_difference() {
        let frame = random_tensor(6, 5, 1, 3);
        let x = Tensor3::from_fn(6, 5, 4, |i, j, _| frame.at(i, j, 0));
        assert_eq!(diff_z(&x).frobenius_norm(), 0.0);
    }

    #[test]
    fn forward_ops_telescope_to_zero() {
        let x = random_tensor(5, 6, 4, 11);
        let dh = diff_h(&x);
        for k in 0..4 {
            for j in 0..6 {
                let s: f64 = (0..5).map(|i| dh.at(i, j, k)).sum();
                assert!(s.abs() < 1e-12);
            }
        }
        let dz = diff_z(&x);
        for j in 0..6 {
            for i in 0..5 {
                let s: f64 = (0..4).map(|k| dz.at(i, j, k)).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        type Pair = (fn(&Tensor3) -> Tensor3, fn(&Tensor3) -> Tensor3);
        let ops: [Pair; 3] = [(diff_h, diff_h_adj), (diff_v, diff_v_adj), (diff_z, diff_z_adj)];
        for (idx, (fwd, adj)) in ops.iter().enumerate() {
            for trial in 0..20 {
                let seed = (idx * 100 + trial) as u64;
                let x = random_tensor(4, 5, 3, seed);
                let y = random_tensor(4, 5, 3, seed + 5000);
                let lhs = fwd(&x).dot(&y);
                let rhs = x.dot(&adj(&y));
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn adjoint_of_forward_is_negative_laplacian_stencil() {
        // unit impulse along a length-4 circular line
        let mut x = Tensor3::zeros(4, 1, 1);
        x.set(1, 0, 0, 1.0);
        let lap = diff_h_adj(&diff_h(&x));
        assert_eq!(lap.at(0, 0, 0), -1.0);
        assert_eq!(lap.at(1, 0, 0), 2.0);
        assert_eq!(lap.at(2, 0, 0), -1.0);
        assert_eq!(lap.at(3, 0, 0), 0.0);
    }

    #[test]
    fn asttv_norm_cases() {
        let c = Tensor3::from_fn(4, 4, 3, |_, _, _| 0.3);
        assert_eq!(asttv_norm(&c, 0.5), 0.0);

        let x = random_tensor(4, 4, 3, 17);
        let l1 = |t: &Tensor3| t.data().iter().map(|v| v.abs()).sum::<f64>();
        assert_eq!(asttv_norm(&x, 0.0), l1(&diff_h(&x)) + l1(&diff_v(&x)));
        let expected = l1(&diff_h(&x)) + l1(&diff_v(&x)) + 0.5 * l1(&diff_z(&x));
        assert!((asttv_norm(&x, 0.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn spectra_denominator_bounds() {
        let s = DiffSpectra::new(6, 7, 3);
        assert!(s.denominator().iter().all(|&d| d >= 2.0));
        assert_eq!(s.denominator()[0], 2.0); // DC bin
    }

    #[test]
    fn solve_b_trivial_cases() {
        let s = DiffSpectra::new(4, 4, 3);
        let zero = Tensor3::zeros(4, 4, 3);
        assert!(solve_b(&zero, &s).unwrap().frobenius_norm() < 1e-15);

        let c = Tensor3::from_fn(4, 4, 3, |_, _, _| 1.8);
        let b = solve_b(&c, &s).unwrap();
        for v in b.data() {
            assert!((v - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_b_matches_dense_solve() {
        let (n1, n2, n3) = (6, 6, 3);
        let spectra = DiffSpectra::new(n1, n2, n3);
        let a = crate::test_util::dense_tv_system(n1, n2, n3);
        let lu = a.clone().lu();
        for trial in 0..5 {
            let rhs = random_tensor(n1, n2, n3, 300 + trial);
            let expected = lu.solve(&DVector::from_column_slice(rhs.data())).unwrap();
            let got = solve_b(&rhs, &spectra).unwrap();
            let diff: f64 = got
                .data()
                .iter()
                .zip(expected.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff / expected.norm() <= 1e-8);
        }
    }

    #[test]
    fn solve_b_residual_check() {
        let (n1, n2, n3) = (5, 7, 4);
        let spectra = DiffSpectra::new(n1, n2, n3);
        let rhs = random_tensor(n1, n2, n3, 23);
        let b = solve_b(&rhs, &spectra).unwrap();
        // (2I + Delta) b should reproduce rhs
        let back = b
            .scale(2.0)
            .add(&diff_h_adj(&diff_h(&b)))
            .add(&diff_v_adj(&diff_v(&b)))
            .add(&diff_z_adj(&diff_z(&b)));
        let rel = back.sub(&rhs).frobenius_norm() / rhs.frobenius_norm();
        assert!(rel <= 1e-10, "residual {rel}");
    }

    #[test]
    fn solve_b_is_linear() {
        let spectra = DiffSpectra::new(4, 5, 3);
        let x = random_tensor(4, 5, 3, 31);
        let y = random_tensor(4, 5, 3, 32);
        let (alpha, beta) = (1.7, -0.4);
        let lhs = solve_b(&x.scale(alpha).add(&y.scale(beta)), &spectra).unwrap();
        let rhs = solve_b(&x, &spectra)
            .unwrap()
            .scale(alpha)
            .add(&solve_b(&y, &spectra).unwrap().scale(beta));
        let rel = lhs.sub(&rhs).frobenius_norm() / rhs.frobenius_norm().max(1.0);
        assert!(rel <= 1e-12);
    }
}
