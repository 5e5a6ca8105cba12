//! ADMM decomposition of a stacked-frame tensor D into low-rank
//! background B, sparse target T, and Gaussian noise N, with a Laplace
//! singular-value surrogate for the background and asymmetric
//! spatial-temporal TV coupling.

use serde::{Deserialize, Serialize};

use crate::asttv::{diff_h, diff_h_adj, diff_v, diff_v_adj, diff_z, diff_z_adj, solve_b, DiffSpectra};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::tsvd::{laplace_svt, plain_tnn_svt, SvtParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    Laplace,
    PlainTnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMode {
    Asttv,
    /// Symmetric spatial-temporal TV: forces delta = 1.
    Sttv,
    /// Drop the TV coupling entirely; the background solve reduces to
    /// (2I) B = rhs.
    None,
}

impl std::str::FromStr for Surrogate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(Surrogate::Laplace),
            "plain_tnn" => Ok(Surrogate::PlainTnn),
            other => Err(Error::InvalidParameter(format!("unknown surrogate '{other}'"))),
        }
    }
}

impl std::str::FromStr for TvMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asttv" => Ok(TvMode::Asttv),
            "sttv" => Ok(TvMode::Sttv),
            "none" => Ok(TvMode::None),
            other => Err(Error::InvalidParameter(format!("unknown tv mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverParams {
    /// TV regularization weight.
    pub lambda_tv: f64,
    /// Sparsity tuning constant; the target weight is derived as
    /// lambda_s = h / sqrt(max(n1, n2) * n3).
    pub h: f64,
    /// Noise (Frobenius) weight.
    pub lambda3: f64,
    /// Temporal TV weight in [0, 1].
    pub delta: f64,
    /// Laplace scale for the singular-value surrogate.
    pub eps: f64,
    pub mu0: f64,
    pub mu_max: f64,
    pub rho: f64,
    /// Convergence tolerance on the squared relative residual.
    pub zeta: f64,
    pub max_iter: usize,
    /// Frames per group when stacking a sequence.
    pub group_len: usize,
    pub surrogate: Surrogate,
    pub tv_mode: TvMode,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            lambda_tv: 0.005,
            h: 6.0,
            lambda3: 100.0,
            delta: 0.5,
            eps: 0.01,
            mu0: 1e-2,
            mu_max: 1e7,
            rho: 1.5,
            zeta: 1e-6,
            max_iter: 500,
            group_len: 3,
            surrogate: Surrogate::Laplace,
            tv_mode: TvMode::Asttv,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.lambda_tv > 0.0, "lambda_tv must be > 0"),
            (self.h > 0.0, "H must be > 0"),
            (self.lambda3 > 0.0, "lambda3 must be > 0"),
            ((0.0..=1.0).contains(&self.delta), "delta must be in [0, 1]"),
            (self.eps > 0.0, "eps must be > 0"),
            (self.mu0 > 0.0, "mu0 must be > 0"),
            (self.mu_max >= self.mu0, "mu_max must be >= mu0"),
            (self.rho > 1.0, "rho must be > 1"),
            (self.zeta > 0.0, "zeta must be > 0"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.group_len >= 2, "L must be >= 2"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParameter(msg.into()));
            }
        }
        Ok(())
    }

    /// Effective temporal weight: sttv pins delta to 1.
    pub fn effective_delta(&self) -> f64 {
        match self.tv_mode {
            TvMode::Sttv => 1.0,
            _ => self.delta,
        }
    }

    /// Derived sparsity weight for a tensor of the given dims.
    pub fn lambda_s(&self, dims: (usize, usize, usize)) -> f64 {
        let (n1, n2, n3) = dims;
        self.h / ((n1.max(n2) * n3) as f64).sqrt()
    }
}

/// All iterates of the ADMM loop. Every tensor shares D's dims and
/// starts at zero.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub b: Tensor3,
    pub t: Tensor3,
    pub n: Tensor3,
    pub z: Tensor3,
    pub v1: Tensor3,
    pub v2: Tensor3,
    pub v3: Tensor3,
    pub y1: Tensor3,
    pub y2: Tensor3,
    pub y3: Tensor3,
    pub y4: Tensor3,
    pub y5: Tensor3,
    pub mu: f64,
    pub iter: usize,
    pub residual: f64,
}

impl SolverState {
    pub fn new(dims: (usize, usize, usize), mu0: f64) -> Self {
        let (n1, n2, n3) = dims;
        let z = || Tensor3::zeros(n1, n2, n3);
        SolverState {
            b: z(),
            t: z(),
            n: z(),
            z: z(),
            v1: z(),
            v2: z(),
            v3: z(),
            y1: z(),
            y2: z(),
            y3: z(),
            y4: z(),
            y5: z(),
            mu: mu0,
            iter: 0,
            residual: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub b: Tensor3,
    pub t: Tensor3,
    pub n: Tensor3,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// Elementwise shrinkage: sign(x) * max(|x| - tau, 0).
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    x.signum() * (x.abs() - tau).max(0.0)
}

fn soft_threshold_tensor(x: &Tensor3, tau: f64) -> Tensor3 {
    x.map(|v| soft_threshold(v, tau))
}

/// Low-rank auxiliary update: proximal step on B - y2/mu.
pub fn update_z(state: &SolverState, params: &SolverParams) -> Result<Tensor3> {
    let q = state.b.add_scaled(&state.y2, -1.0 / state.mu);
    match params.surrogate {
        Surrogate::Laplace => laplace_svt(&q, SvtParams::new(state.mu, params.eps)),
        Surrogate::PlainTnn => plain_tnn_svt(&q, state.mu),
    }
}

/// Background update: assemble the right-hand side and solve the
/// FFT-diagonalized linear system. `z_next` is the freshly updated
/// low-rank iterate.
pub fn update_b(
    state: &SolverState,
    d: &Tensor3,
    params: &SolverParams,
    spectra: &DiffSpectra,
    z_next: &Tensor3,
) -> Result<Tensor3> {
    let inv_mu = 1.0 / state.mu;
    let mut rhs = d
        .sub(&state.t)
        .sub(&state.n)
        .add_scaled(&state.y1, inv_mu)
        .add(z_next)
        .add_scaled(&state.y2, inv_mu);
    if params.tv_mode != TvMode::None {
        let theta1 = diff_h_adj(&state.v1.add_scaled(&state.y3, inv_mu));
        let theta2 = diff_v_adj(&state.v2.add_scaled(&state.y4, inv_mu));
        let theta3 = diff_z_adj(&state.v3.add_scaled(&state.y5, inv_mu));
        rhs = rhs.add(&theta1).add(&theta2).add(&theta3);
    }
    solve_b(&rhs, spectra)
}

/// Sparse target update: elementwise shrinkage of the data residual.
pub fn update_t(state: &SolverState, d: &Tensor3, params: &SolverParams, b_next: &Tensor3) -> Tensor3 {
    let lambda_s = params.lambda_s(d.dims());
    let resid = d.sub(b_next).sub(&state.n).add_scaled(&state.y1, 1.0 / state.mu);
    soft_threshold_tensor(&resid, lambda_s / state.mu)
}

/// TV splitting variables: shrinkage of the background differences.
pub fn update_v(
    state: &SolverState,
    params: &SolverParams,
    b_next: &Tensor3,
) -> (Tensor3, Tensor3, Tensor3) {
    let inv_mu = 1.0 / state.mu;
    let tau = params.lambda_tv / state.mu;
    let v1 = soft_threshold_tensor(&diff_h(b_next).add_scaled(&state.y3, -inv_mu), tau);
    let v2 = soft_threshold_tensor(&diff_v(b_next).add_scaled(&state.y4, -inv_mu), tau);
    let v3 = soft_threshold_tensor(
        &diff_z(b_next).add_scaled(&state.y5, -inv_mu),
        params.effective_delta() * tau,
    );
    (v1, v2, v3)
}

/// Noise update: closed-form ridge shrinkage of the data residual.
pub fn update_n(
    state: &SolverState,
    d: &Tensor3,
    params: &SolverParams,
    b_next: &Tensor3,
    t_next: &Tensor3,
) -> Tensor3 {
    let mu = state.mu;
    let scale = 1.0 / (mu + 2.0 * params.lambda3);
    d.sub(b_next)
        .sub(t_next)
        .scale(mu)
        .add(&state.y1)
        .scale(scale)
}

/// Dual ascent on the five constraint multipliers. Call with the state
/// already holding the k+1 primal iterates.
pub fn update_multipliers(state: &mut SolverState, d: &Tensor3) {
    let mu = state.mu;
    let r1 = d.sub(&state.b).sub(&state.t).sub(&state.n);
    state.y1 = state.y1.add_scaled(&r1, mu);
    state.y2 = state.y2.add_scaled(&state.z.sub(&state.b), mu);
    state.y3 = state.y3.add_scaled(&state.v1.sub(&diff_h(&state.b)), mu);
    state.y4 = state.y4.add_scaled(&state.v2.sub(&diff_v(&state.b)), mu);
    state.y5 = state.y5.add_scaled(&state.v3.sub(&diff_z(&state.b)), mu);
}

/// Squared relative data-fit residual; zero input is defined as zero
/// residual (trivially feasible).
pub fn relative_residual(d: &Tensor3, b: &Tensor3, t: &Tensor3, n: &Tensor3) -> f64 {
    let d_norm2 = d.frobenius_norm().powi(2);
    if d_norm2 == 0.0 {
        return d.sub(b).sub(t).sub(n).frobenius_norm().powi(2);
    }
    d.sub(b).sub(t).sub(n).frobenius_norm().powi(2) / d_norm2
}

/// Run the full ADMM loop until the residual drops below zeta or the
/// iteration cap is reached. Non-convergence is not an error: the last
/// iterates are returned with `converged = false`.
pub fn decompose(d: &Tensor3, params: &SolverParams) -> Result<Decomposition> {
    params.validate()?;
    if !d.is_finite() {
        return Err(Error::DimensionMismatch {
            expected: "finite tensor entries".into(),
            got: "NaN or Inf in input".into(),
        });
    }
    let dims = d.dims();
    let spectra = match params.tv_mode {
        TvMode::None => DiffSpectra::without_tv(dims.0, dims.1, dims.2),
        _ => DiffSpectra::new(dims.0, dims.1, dims.2),
    };
    decompose_with_spectra(d, params, &spectra)
}

/// Same as [`decompose`] but with a caller-provided (cached) transfer
/// function, for running many groups of identical shape.
pub fn decompose_with_spectra(
    d: &Tensor3,
    params: &SolverParams,
    spectra: &DiffSpectra,
) -> Result<Decomposition> {
    if spectra.dims() != d.dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", d.dims()),
            got: format!("{:?}", spectra.dims()),
        });
    }
    let mut state = SolverState::new(d.dims(), params.mu0);
    let mut converged = false;
    while state.iter < params.max_iter {
        state.z = update_z(&state, params)?;
        state.b = update_b(&state, d, params, spectra, &state.z)?;
        state.t = update_t(&state, d, params, &state.b);
        if params.tv_mode != TvMode::None {
            let (v1, v2, v3) = update_v(&state, params, &state.b);
            state.v1 = v1;
            state.v2 = v2;
            state.v3 = v3;
        }
        state.n = update_n(&state, d, params, &state.b, &state.t);
        update_multipliers(&mut state, d);
        state.mu = (params.rho * state.mu).min(params.mu_max);
        state.residual = relative_residual(d, &state.b, &state.t, &state.n);
        state.iter += 1;
        if state.residual <= params.zeta {
            converged = true;
            break;
        }
    }
    Ok(Decomposition {
        b: state.b,
        t: state.t,
        n: state.n,
        iterations: state.iter,
        final_residual: state.residual,
        converged,
    })
}
