//! Dense 3-D tensor type with mode-3 FFT, frontal-slice access, mode-k
//! unfoldings, and the two low-rank norms used for objective tracking.
//!
//! Layout is column-major within each frontal slice, slices contiguous:
//! element (i, j, k) lives at `i + n1*j + n1*n2*k`. A frontal slice is
//! therefore a contiguous `n1 x n2` column-major matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative imaginary residue tolerated when discarding the imaginary part
/// after an inverse FFT of conjugate-symmetric data.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "tensor dims must be positive");
        Tensor3 { n1, n2, n3, data: vec![0.0; n1 * n2 * n3] }
    }

    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    t.data[i + n1 * j + n1 * n2 * k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n1 * n2 * n3);
        Tensor3 { n1, n2, n3, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // dims are positive by construction
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[i + self.n1 * j + self.n1 * self.n2 * k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[i + self.n1 * j + self.n1 * self.n2 * k] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Contiguous column-major view of frontal slice k.
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.n1 * self.n2;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.n1 * self.n2;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn slice_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n1, self.n2, self.slice(k))
    }

    pub fn same_dims(&self, other: &Tensor3) -> bool {
        self.dims() == other.dims()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Tensor3 {
        debug_assert!(self.same_dims(other));
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        self.map(|v| v * s)
    }

    /// self + other/s, the recurring `V + y/mu` assembly.
    pub fn add_scaled(&self, other: &Tensor3, s: f64) -> Tensor3 {
        self.zip_map(other, |a, b| a + b * s)
    }
}

#[derive(Debug, Clone)]
pub struct ComplexTensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<Complex64>,
}

impl ComplexTensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0);
        ComplexTensor3 { n1, n2, n3, data: vec![Complex64::new(0.0, 0.0); n1 * n2 * n3] }
    }

    pub fn from_real(x: &Tensor3) -> Self {
        let (n1, n2, n3) = x.dims();
        ComplexTensor3 {
            n1,
            n2,
            n3,
            data: x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[i + self.n1 * j + self.n1 * self.n2 * k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: Complex64) {
        self.data[i + self.n1 * j + self.n1 * self.n2 * k] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn slice(&self, k: usize) -> &[Complex64] {
        let n = self.n1 * self.n2;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [Complex64] {
        let n = self.n1 * self.n2;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn slice_matrix(&self, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(self.n1, self.n2, self.slice(k))
    }

    pub fn set_slice(&mut self, k: usize, m: &DMatrix<Complex64>) {
        debug_assert_eq!((m.nrows(), m.ncols()), (self.n1, self.n2));
        self.slice_mut(k).copy_from_slice(m.as_slice());
    }

    /// Discard imaginary parts, erroring if the residue is too large
    /// relative to the real magnitude.
    pub fn into_real(self) -> Result<Tensor3> {
        let max_re = self.data.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
        let max_im = self.data.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
        let tol = IMAG_RESIDUE_TOL * max_re.max(1.0);
        if max_im > tol {
            return Err(Error::SymmetryViolation { residue: max_im, tolerance: tol });
        }
        Ok(Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.into_iter().map(|c| c.re).collect(),
        })
    }

    /// Apply an FFT of the given direction along one mode, in place.
    /// Forward is unnormalized; inverse divides by the mode length.
    pub fn fft_along(&mut self, mode: usize, inverse: bool) {
        let (n1, n2, n3) = (self.n1, self.n2, self.n3);
        let len = match mode {
            1 => n1,
            2 => n2,
            3 => n3,
            _ => panic!("mode must be 1, 2, or 3"),
        };
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let norm = if inverse { 1.0 / len as f64 } else { 1.0 };
        // (outer extents, element stride along the line, line start offset)
        let (outer_a, outer_b, step) = match mode {
            1 => (n2, n3, 1),
            2 => (n1, n3, n1),
            3 => (n1, n2, n1 * n2),
            _ => unreachable!(),
        };
        for b in 0..outer_b {
            for a in 0..outer_a {
                let start = match mode {
                    1 => a * n1 + b * n1 * n2,
                    2 => a + b * n1 * n2,
                    3 => a + b * n1,
                    _ => unreachable!(),
                };
                for (t, slot) in buf.iter_mut().enumerate() {
                    *slot = self.data[start + t * step];
                }
                fft.process(&mut buf);
                for (t, slot) in buf.iter().enumerate() {
                    self.data[start + t * step] = *slot * norm;
                }
            }
        }
    }
}

/// DFT along the third index for every (i, j). Unnormalized forward
/// convention; the inverse carries the 1/n3 factor.
pub fn fft_mode3(x: &Tensor3) -> ComplexTensor3 {
    let mut c = ComplexTensor3::from_real(x);
    c.fft_along(3, false);
    c
}

/// Inverse of [`fft_mode3`]. The imaginary residue is discarded only when
/// it is negligible; otherwise a [`Error::SymmetryViolation`] signals an
/// upstream bug.
pub fn ifft_mode3(x: &ComplexTensor3) -> Result<Tensor3> {
    let mut c = x.clone();
    c.fft_along(3, true);
    c.into_real()
}

/// 3-D forward FFT (all three modes), unnormalized.
pub fn fft3(x: &Tensor3) -> ComplexTensor3 {
    let mut c = ComplexTensor3::from_real(x);
    c.fft_along(1, false);
    c.fft_along(2, false);
    c.fft_along(3, false);
    c
}

/// 3-D inverse FFT carrying the full 1/(n1 n2 n3) factor.
pub fn ifft3(x: &ComplexTensor3) -> Result<Tensor3> {
    let mut c = x.clone();
    c.fft_along(1, true);
    c.fft_along(2, true);
    c.fft_along(3, true);
    c.into_real()
}

/// Singular values of a complex matrix, descending.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Tensor nuclear norm: (1/n3) * sum over Fourier-domain frontal slices of
/// the matrix nuclear norm.
pub fn tnn(x: &Tensor3) -> f64 {
    let xf = fft_mode3(x);
    let (_, _, n3) = x.dims();
    let mut total = 0.0;
    for k in 0..n3 {
        total += singular_values(&xf.slice_matrix(k)).iter().sum::<f64>();
    }
    total / n3 as f64
}

/// Laplace-weighted low-rank surrogate: sum over Fourier-domain slices of
/// sum_i (1 - exp(-sigma_i / eps)). No 1/n3 prefactor (intentionally
/// asymmetric with [`tnn`]).
pub fn laplace_norm(x: &Tensor3, eps: f64) -> f64 {
    assert!(eps > 0.0, "eps must be positive");
    let xf = fft_mode3(x);
    let (_, _, n3) = x.dims();
    let mut total = 0.0;
    for k in 0..n3 {
        for s in singular_values(&xf.slice_matrix(k)) {
            total += 1.0 - (-s / eps).exp();
        }
    }
    total
}

/// Mode-k unfolding with the standard Kolda-Bader column ordering.
pub fn unfold(x: &Tensor3, mode: usize) -> DMatrix<f64> {
    let (n1, n2, n3) = x.dims();
    match mode {
        1 => {
            let mut m = DMatrix::zeros(n1, n2 * n3);
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        m[(i, j + n2 * k)] = x.at(i, j, k);
                    }
                }
            }
            m
        }
        2 => {
            let mut m = DMatrix::zeros(n2, n1 * n3);
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        m[(j, i + n1 * k)] = x.at(i, j, k);
                    }
                }
            }
            m
        }
        3 => {
            let mut m = DMatrix::zeros(n3, n1 * n2);
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        m[(k, i + n1 * j)] = x.at(i, j, k);
                    }
                }
            }
            m
        }
        _ => panic!("mode must be 1, 2, or 3"),
    }
}

/// Inverse of [`unfold`] for the given target dims.
pub fn fold(m: &DMatrix<f64>, mode: usize, dims: (usize, usize, usize)) -> Tensor3 {
    let (n1, n2, n3) = dims;
    match mode {
        1 => Tensor3::from_fn(n1, n2, n3, |i, j, k| m[(i, j + n2 * k)]),
        2 => Tensor3::from_fn(n1, n2, n3, |i, j, k| m[(j, i + n1 * k)]),
        3 => Tensor3::from_fn(n1, n2, n3, |i, j, k| m[(k, i + n1 * j)]),
        _ => panic!("mode must be 1, 2, or 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_tensor, naive_dft_mode3};

    fn rel_err(a: &Tensor3, b: &Tensor3) -> f64 {
        let denom = b.frobenius_norm().max(1e-300);
        a.sub(b).frobenius_norm() / denom
    }

    #[test]
    fn fft_mode3_zeros() {
        let x = Tensor3::zeros(4, 4, 3);
        let xf = fft_mode3(&x);
        for c in xf.data() {
            assert_eq!(*c, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn fft_mode3_dc_only_for_constant() {
        let c = 2.5;
        let x = Tensor3::from_fn(3, 2, 4, |_, _, _| c);
        let xf = fft_mode3(&x);
        for j in 0..2 {
            for i in 0..3 {
                assert!((xf.at(i, j, 0) - Complex64::new(4.0 * c, 0.0)).norm() < 1e-12);
                for k in 1..4 {
                    assert!(xf.at(i, j, k).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fft_mode3_matches_naive_dft() {
        let x = random_tensor(5, 5, 6, 42);
        let xf = fft_mode3(&x);
        let oracle = naive_dft_mode3(&x);
        let mut max_err = 0.0_f64;
        let mut max_mag = 0.0_f64;
        for (a, b) in xf.data().iter().zip(oracle.data()) {
            max_err = max_err.max((a - b).norm());
            max_mag = max_mag.max(b.norm());
        }
        assert!(max_err / max_mag <= 1e-12, "rel err {}", max_err / max_mag);
    }

    #[test]
    fn fft_round_trip() {
        for (seed, (a, b, c)) in [(1, (6, 7, 5)), (2, (32, 32, 8)), (3, (3, 9, 1))] {
            let x = random_tensor(a, b, c, seed);
            let y = ifft_mode3(&fft_mode3(&x)).unwrap();
            assert!(rel_err(&y, &x) <= 1e-12);
        }
    }

    #[test]
    fn fft_conjugate_symmetry() {
        let x = random_tensor(4, 5, 6, 7);
        let xf = fft_mode3(&x);
        let (n1, n2, n3) = xf.dims();
        for k in 1..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    let a = xf.at(i, j, k);
                    let b = xf.at(i, j, (n3 - k) % n3).conj();
                    assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
                }
            }
        }
    }

    #[test]
    fn ifft_rejects_broken_symmetry() {
        let x = random_tensor(3, 3, 4, 9);
        let mut xf = fft_mode3(&x);
        let v = xf.at(0, 0, 1);
        xf.set(0, 0, 1, v + Complex64::new(0.0, 50.0));
        match ifft_mode3(&xf) {
            Err(Error::SymmetryViolation { .. }) => {}
            other => panic!("expected SymmetryViolation, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn tnn_zeros_and_matrix_case() {
        assert_eq!(tnn(&Tensor3::zeros(4, 4, 3)), 0.0);
        // n3 = 1 reduces to the matrix nuclear norm: diag(3, 2) -> 5
        let mut x = Tensor3::zeros(2, 2, 1);
        x.set(0, 0, 0, 3.0);
        x.set(1, 1, 0, 2.0);
        assert!((tnn(&x) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn tnn_matches_dft_svd_oracle() {
        let x = random_tensor(4, 4, 3, 11);
        let xf = naive_dft_mode3(&x);
        let mut expected = 0.0;
        for k in 0..3 {
            expected += singular_values(&xf.slice_matrix(k)).iter().sum::<f64>();
        }
        expected /= 3.0;
        let got = tnn(&x);
        assert!((got - expected).abs() / expected <= 1e-10);
    }

    #[test]
    fn laplace_norm_basics() {
        assert_eq!(laplace_norm(&Tensor3::zeros(3, 3, 2), 0.5), 0.0);
        // single singular value 1, eps = 1 -> 1 - e^{-1}
        let mut x = Tensor3::zeros(2, 2, 1);
        x.set(0, 0, 0, 1.0);
        let expected = 1.0 - (-1.0_f64).exp();
        assert!((laplace_norm(&x, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn laplace_norm_first_order_matches_tnn() {
        let x = random_tensor(4, 4, 3, 13);
        let xf = fft_mode3(&x);
        let sigma_max = (0..3)
            .flat_map(|k| singular_values(&xf.slice_matrix(k)))
            .fold(0.0_f64, f64::max);
        let eps = 1e3 * sigma_max;
        let lhs = eps * laplace_norm(&x, eps);
        let rhs = 3.0 * tnn(&x);
        assert!((lhs - rhs).abs() / rhs <= 0.01, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn laplace_norm_monotone_under_scaling() {
        let x = random_tensor(5, 4, 3, 17);
        let eps = 0.3;
        let base = laplace_norm(&x, eps);
        for alpha in [1.0, 1.5, 2.0, 10.0] {
            assert!(laplace_norm(&x.scale(alpha), eps) >= base - 1e-12);
        }
    }

    #[test]
    fn unfold_shapes() {
        let x = Tensor3::zeros(2, 3, 4);
        assert_eq!(unfold(&x, 1).shape(), (2, 12));
        assert_eq!(unfold(&x, 2).shape(), (3, 8));
        assert_eq!(unfold(&x, 3).shape(), (4, 6));
    }

    #[test]
    fn unfold_rank1_tensor() {
        let u = [1.0, -2.0, 0.5];
        let v = [3.0, 1.0, 2.0, -1.0];
        let w = [0.7, 1.3];
        let x = Tensor3::from_fn(3, 4, 2, |i, j, k| u[i] * v[j] * w[k]);
        for mode in 1..=3 {
            let m = unfold(&x, mode);
            let sv = m.svd(false, false).singular_values;
            for s in sv.iter().skip(1) {
                assert!(*s <= 1e-10 * sv[0]);
            }
        }
    }

    #[test]
    fn fold_unfold_round_trip() {
        let x = random_tensor(3, 4, 5, 23);
        for mode in 1..=3 {
            let m = unfold(&x, mode);
            let y = fold(&m, mode, x.dims());
            assert_eq!(x, y);
        }
    }

    proptest::proptest! {
        #[test]
        fn prop_fft3_round_trip(
            n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..6, seed in 0u64..256
        ) {
            let x = random_tensor(n1, n2, n3, seed);
            let y = ifft3(&fft3(&x)).unwrap();
            proptest::prop_assert!(x.sub(&y).max_abs() <= 1e-12);
        }

        #[test]
        fn prop_fold_inverts_unfold(
            n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..6,
            mode in 1usize..4, seed in 0u64..256
        ) {
            let x = random_tensor(n1, n2, n3, seed);
            proptest::prop_assert_eq!(fold(&unfold(&x, mode), mode, x.dims()), x);
        }

        #[test]
        fn prop_tnn_scales_linearly(c in 0.0f64..10.0, seed in 0u64..256) {
            let x = random_tensor(4, 3, 3, seed);
            let lhs = tnn(&x.scale(c));
            let rhs = c * tnn(&x);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        }
    }
}
