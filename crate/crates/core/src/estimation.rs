//! Channel estimation: single-shot MMSE, the sequential Kalman recursion,
//! and the closed-form MSE/SNR expressions used as analytic oracles.
//!
//! Training signals are tall matrices x with xᴴx = ρ I_T, so the power ρ is
//! carried inside x and the observation noise is always CN(0, I). All T×T
//! innovation systems are solved via Cholesky, never inverted, and every
//! covariance update re-symmetrizes its result so round-off cannot drift a
//! ten-block recursion off the Hermitian cone.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_eig, hermitize, solve_hpd, solve_hpd_vec, trace_re, CMat, CVec,
};
use crate::rng::complex_gaussian_vector;

/// Relative slack allowed on ‖xᴴx − ρI‖_F when validating training matrices.
const UNITARITY_RTOL: f64 = 1e-9;

/// State of the sequential estimator for one fading block: the predicted and
/// corrected means with their error covariances. Prediction advances
/// `block_index`; correction refines the `*_corr` fields in place.
#[derive(Debug, Clone)]
pub struct KalmanState {
    pub block_index: usize,
    /// ĥ for this block given observations up to the previous block.
    pub h_pred: CVec,
    /// ĥ for this block given observations up to and including it.
    pub h_corr: CVec,
    /// Error covariance of `h_pred`.
    pub r_pred: CMat,
    /// Error covariance of `h_corr`.
    pub r_corr: CMat,
}

impl KalmanState {
    /// Start of a run: zero mean and full prior covariance. Until the first
    /// correction the posterior fields mirror the prior.
    pub fn initial(r: &CMat) -> Self {
        let n = r.nrows();
        Self {
            block_index: 0,
            h_pred: CVec::zeros(n),
            h_corr: CVec::zeros(n),
            r_pred: r.clone(),
            r_corr: r.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.h_pred.len()
    }
}

/// One training round: the sounding matrix that was sent and what came back.
#[derive(Debug, Clone)]
pub struct TrainingObservation {
    pub x: CMat,
    pub y: CVec,
}

/// Mean squared column norm of a training matrix, i.e. its power ρ.
pub fn training_power(x: &CMat) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    x.norm_squared() / x.ncols() as f64
}

/// Validate xᴴx = ρ I_T and return ρ.
fn check_training(x: &CMat) -> Result<f64> {
    let t = x.ncols();
    let rho = training_power(x);
    let mut gram = x.adjoint() * x;
    for k in 0..t {
        gram[(k, k)] -= Complex64::new(rho, 0.0);
    }
    let tol = (UNITARITY_RTOL * rho * t as f64).max(1e-30);
    if gram.norm() > tol {
        return Err(Error::Domain(format!(
            "training matrix is not unitary: deviation {:.3e} with power {rho:.3e}",
            gram.norm()
        )));
    }
    Ok(rho)
}

/// Sound the channel: y = xᴴh + n with n ~ CN(0, I_T).
pub fn observe<R: Rng + ?Sized>(x: &CMat, h: &CVec, rng: &mut R) -> Result<TrainingObservation> {
    check_training(x)?;
    if x.nrows() != h.len() {
        return Err(Error::Dimension(format!(
            "training matrix has {} rows but channel has {} entries",
            x.nrows(),
            h.len()
        )));
    }
    let n = complex_gaussian_vector(rng, x.ncols());
    let y = x.adjoint() * h + n;
    Ok(TrainingObservation { x: x.clone(), y })
}

/// Noise-free observation, a test hook for exact algebraic checks.
pub fn observe_noiseless(x: &CMat, h: &CVec) -> Result<TrainingObservation> {
    check_training(x)?;
    if x.nrows() != h.len() {
        return Err(Error::Dimension(format!(
            "training matrix has {} rows but channel has {} entries",
            x.nrows(),
            h.len()
        )));
    }
    Ok(TrainingObservation {
        x: x.clone(),
        y: x.adjoint() * h,
    })
}

/// A = r·x and the Hermitian innovation matrix M = I_T + xᴴ·A.
fn innovation_parts(r: &CMat, x: &CMat) -> Result<(CMat, CMat)> {
    if r.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{} but training matrix has {} rows",
            r.nrows(),
            r.ncols(),
            x.nrows()
        )));
    }
    let a = r * x;
    let mut m = hermitize(&(x.adjoint() * &a));
    for k in 0..m.nrows() {
        m[(k, k)] += Complex64::new(1.0, 0.0);
    }
    Ok((a, m))
}

/// R_p = r·x(I + xᴴr·x)^{-1}xᴴ·r, the covariance removed from the prior by
/// observing through x. Hermitian PSD; its trace is the MSE reduction.
pub fn posterior_gain_matrix(r_pred: &CMat, x: &CMat) -> Result<CMat> {
    let (a, m) = innovation_parts(r_pred, x)?;
    let sol = solve_hpd(&m, &a.adjoint())?;
    Ok(hermitize(&(&a * sol)))
}

/// trace(R_p) without forming the N×N matrix; selection scans use this.
pub fn posterior_gain_trace(r_pred: &CMat, x: &CMat) -> Result<f64> {
    let (a, m) = innovation_parts(r_pred, x)?;
    let g = a.adjoint() * &a;
    Ok(trace_re(&solve_hpd(&m, &g)?))
}

/// MMSE estimate from a single observation with prior CN(0, r):
/// ĥ = r·x(I + xᴴr·x)^{-1}y, returned with its covariance r·x(…)^{-1}xᴴ·r.
pub fn single_shot_mmse(x: &CMat, y: &CVec, r: &CMat) -> Result<(CVec, CMat)> {
    if y.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "observation has {} entries but training matrix has {} columns",
            y.len(),
            x.ncols()
        )));
    }
    let (a, m) = innovation_parts(r, x)?;
    let h_hat = &a * solve_hpd_vec(&m, y)?;
    let r_hat = hermitize(&(&a * solve_hpd(&m, &a.adjoint())?));
    Ok((h_hat, r_hat))
}

/// Estimation MSE of sounding a CN(0, r) channel through x, normalized by
/// the antenna count: (1/N_t)·tr(r − R_p).
pub fn mse_of_training(x: &CMat, r: &CMat) -> Result<f64> {
    let n = r.nrows() as f64;
    Ok((trace_re(r) - posterior_gain_trace(r, x)?) / n)
}

/// MSE-optimal training for prior covariance r: √ρ times the first `t_len`
/// eigenvector columns, in the deterministic order fixed by the eigensolver.
pub fn x_ss_opt(r: &CMat, t_len: usize, rho: f64) -> Result<CMat> {
    x_opt_full_feedback(r, t_len, rho)
}

/// Same construction applied to a prediction covariance: the training that
/// a receiver with unlimited feedback would request for the coming block.
pub fn x_opt_full_feedback(r_pred: &CMat, t_len: usize, rho: f64) -> Result<CMat> {
    if t_len == 0 || t_len > r_pred.nrows() {
        return Err(Error::Domain(format!(
            "training length {t_len} must lie in 1..={}",
            r_pred.nrows()
        )));
    }
    if rho < 0.0 {
        return Err(Error::Domain(format!("training power must be >= 0, got {rho}")));
    }
    let eig = hermitian_eig(r_pred)?;
    let scale = Complex64::new(rho.sqrt(), 0.0);
    let mut x = eig.eigenvectors.columns(0, t_len).into_owned();
    for z in x.iter_mut() {
        *z *= scale;
    }
    Ok(x)
}

/// Propagate the estimator across a block boundary:
/// mean shrinks by eta, covariance mixes back toward the prior r.
pub fn kalman_predict(state: &KalmanState, eta: f64, r: &CMat) -> KalmanState {
    let e = Complex64::new(eta, 0.0);
    let h_pred = state.h_corr.map(|z| z * e);
    let decay = eta * eta;
    let mut r_pred = state.r_corr.map(|z| z * decay);
    r_pred.zip_apply(r, |out, prior| *out += prior * (1.0 - decay));
    let r_pred = hermitize(&r_pred);
    KalmanState {
        block_index: state.block_index + 1,
        h_corr: h_pred.clone(),
        h_pred,
        r_corr: r_pred.clone(),
        r_pred,
    }
}

/// Everything about a correction that does not depend on the received
/// samples: the gain K = A(I + xᴴA)^{-1} with A = r_pred·x, and the
/// posterior covariance. Strategies whose training choice is observation-
/// independent compute this once and reuse it across Monte Carlo draws.
#[derive(Debug, Clone)]
pub struct CorrectionOperator {
    pub x: CMat,
    pub gain: CMat,
    pub r_corr: CMat,
}

pub fn correction_operator(r_pred: &CMat, x: &CMat) -> Result<CorrectionOperator> {
    check_training(x)?;
    let (a, m) = innovation_parts(r_pred, x)?;
    // M is Hermitian, so K = A·M^{-1} is the adjoint of M^{-1}·Aᴴ.
    let sol = solve_hpd(&m, &a.adjoint())?;
    let r_corr = hermitize(&(r_pred - &a * &sol));
    Ok(CorrectionOperator {
        x: x.clone(),
        gain: sol.adjoint(),
        r_corr,
    })
}

/// Posterior mean: ĥ + K(y − xᴴĥ).
pub fn apply_correction(op: &CorrectionOperator, h_pred: &CVec, y: &CVec) -> CVec {
    let innovation = y - op.x.adjoint() * h_pred;
    h_pred + &op.gain * innovation
}

/// Fold one observation into the state.
pub fn kalman_correct(state: &KalmanState, obs: &TrainingObservation) -> Result<KalmanState> {
    if obs.x.nrows() != state.dim() {
        return Err(Error::Dimension(format!(
            "observation is for {} antennas but state has {}",
            obs.x.nrows(),
            state.dim()
        )));
    }
    let op = correction_operator(&state.r_pred, &obs.x)?;
    let h_corr = apply_correction(&op, &state.h_pred, &obs.y);
    Ok(KalmanState {
        block_index: state.block_index,
        h_pred: state.h_pred.clone(),
        h_corr,
        r_pred: state.r_pred.clone(),
        r_corr: op.r_corr,
    })
}

/// Received-SNR upper bound for one-shot training through the best t_len
/// directions: Σ_t ρλ_t²/(ρλ_t + 1) + λ_1.
pub fn snr_upper_bound_ss(r: &CMat, t_len: usize, rho: f64) -> Result<f64> {
    if t_len == 0 || t_len > r.nrows() {
        return Err(Error::Domain(format!(
            "training length {t_len} must lie in 1..={}",
            r.nrows()
        )));
    }
    let eig = hermitian_eig(r)?;
    let sum: f64 = eig
        .eigenvalues
        .iter()
        .take(t_len)
        .map(|&l| rho * l * l / (rho * l + 1.0))
        .sum();
    Ok(sum + eig.eigenvalues[0])
}

/// SNR ceiling for the exponential spatial model, independent of the
/// antenna count: (t_len + 1)(1 + a)/(1 − a).
pub fn snr_ceiling_bound_exp(t_len: usize, a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain(format!(
            "spatial correlation must lie in [0, 1), got {a}"
        )));
    }
    Ok((t_len as f64 + 1.0) * (1.0 + a) / (1.0 - a))
}

/// MSE trajectory of the unlimited-feedback scheme, in closed form.
///
/// The prediction covariance stays simultaneously diagonalizable with the
/// prior, so the whole recursion lives on the spectrum. Block k trains the
/// t_len dominant directions, dropping each trained eigenvalue by
/// ρλ²/(ρλ+1); crossing the block boundary every direction then mixes back
/// toward its original prior eigenvalue, λ ← η²λ_corr + (1−η²)λ_prior, and
/// the spectrum is re-sorted. The MSE accumulates per-block reductions with
/// geometric decay: MSE_i = tr(r)/N_t − m_i/N_t, m_i = η²m_{i−1} + s_i.
pub fn mse_lower_bound_closed_loop(
    r: &CMat,
    eta: f64,
    t_len: usize,
    rho: f64,
    i_max: usize,
) -> Result<Vec<f64>> {
    if t_len == 0 || t_len > r.nrows() {
        return Err(Error::Domain(format!(
            "training length {t_len} must lie in 1..={}",
            r.nrows()
        )));
    }
    if rho < 0.0 {
        return Err(Error::Domain(format!("training power must be >= 0, got {rho}")));
    }
    let n = r.nrows() as f64;
    let eig = hermitian_eig(r)?;
    let trace: f64 = eig.eigenvalues.iter().sum();
    // (current prediction eigenvalue, prior eigenvalue) per direction
    let mut dirs: Vec<(f64, f64)> = eig.eigenvalues.iter().map(|&l| (l, l)).collect();
    let decay = eta * eta;

    let mut out = Vec::with_capacity(i_max + 1);
    let mut m = 0.0;
    for _ in 0..=i_max {
        let s: f64 = dirs
            .iter()
            .take(t_len)
            .map(|&(l, _)| rho * l * l / (rho * l + 1.0))
            .sum();
        m = decay * m + s;
        out.push((trace - m) / n);
        for (k, d) in dirs.iter_mut().enumerate() {
            let corrected = if k < t_len {
                d.0 - rho * d.0 * d.0 / (rho * d.0 + 1.0)
            } else {
                d.0
            };
            d.0 = decay * corrected + (1.0 - decay) * d.1;
        }
        dirs.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    }
    Ok(out)
}
