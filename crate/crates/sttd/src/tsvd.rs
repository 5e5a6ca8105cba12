//! Adaptive singular-value thresholding in the Fourier domain: the
//! proximal operator of the Laplace-weighted low-rank surrogate, plus the
//! plain nuclear-norm variant used by the ablation switch.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::tensor::{fft_mode3, ifft_mode3, Tensor3};

#[derive(Debug, Clone, Copy)]
pub struct SvtParams {
    /// Quadratic penalty weight (the solver passes its current mu).
    pub eta: f64,
    /// Laplace scale; small values threshold small singular values hard
    /// and leave large ones nearly untouched.
    pub eps: f64,
}

impl SvtParams {
    pub fn new(eta: f64, eps: f64) -> Self {
        assert!(eta > 0.0 && eps > 0.0, "eta and eps must be positive");
        SvtParams { eta, eps }
    }
}

/// One-step adaptive threshold for a single singular value:
/// max(s - exp(-s/eps) / (eta*eps), 0). The gradient of the Laplace
/// weight is evaluated at the current singular value.
pub fn scalar_threshold(s: f64, p: SvtParams) -> f64 {
    debug_assert!(s >= 0.0);
    (s - (-s / p.eps).exp() / (p.eta * p.eps)).max(0.0)
}

fn threshold_slice(
    m: &DMatrix<Complex64>,
    shrink: &impl Fn(f64) -> f64,
) -> DMatrix<Complex64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let mut sv = svd.singular_values;
    for s in sv.iter_mut() {
        *s = shrink(*s);
    }
    let r = sv.len();
    let mut us = u.columns(0, r).into_owned();
    for (c, s) in sv.iter().enumerate() {
        us.column_mut(c).scale_mut(*s);
    }
    us * vt.rows(0, r)
}

fn svt_fourier(
    q: &Tensor3,
    shrink: impl Fn(f64) -> f64,
) -> Result<Tensor3> {
    let (_, _, n3) = q.dims();
    let mut qf = fft_mode3(q);
    // Slices beyond half are conjugates of earlier ones; thresholding
    // preserves that symmetry, so only the first half needs an SVD.
    let half = n3 / 2 + 1;
    for k in 0..half {
        let z = threshold_slice(&qf.slice_matrix(k), &shrink);
        qf.set_slice(k, &z);
    }
    for k in half..n3 {
        let src = qf.slice_matrix(n3 - k).map(|c| c.conj());
        qf.set_slice(k, &src);
    }
    ifft_mode3(&qf)
}

/// Laplace-weighted singular-value thresholding: FFT along mode 3,
/// per-slice SVD with [`scalar_threshold`], conjugate-symmetric fill,
/// inverse FFT.
pub fn laplace_svt(q: &Tensor3, p: SvtParams) -> Result<Tensor3> {
    svt_fourier(q, |s| scalar_threshold(s, p))
}

/// Plain tensor-nuclear-norm proximal operator: per-slice singular-value
/// soft thresholding at 1/eta.
pub fn plain_tnn_svt(q: &Tensor3, eta: f64) -> Result<Tensor3> {
    assert!(eta > 0.0);
    let tau = 1.0 / eta;
    svt_fourier(q, move |s| (s - tau).max(0.0))
}
