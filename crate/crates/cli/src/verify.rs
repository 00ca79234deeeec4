//! Desk-scale cross-check suite behind `mimotrain verify`.
//!
//! Four checks, each comparing an implementation route against an
//! independent route for the same quantity:
//!   ss-mse       single-shot estimation error: filter output vs spectrum sum
//!   tracked-mse  unlimited-feedback error trajectory: closed form vs filter
//!   snr-bounds   simulated SNR stays under the analytic bounds, and the
//!                antenna-independent ceiling dominates the exact bound
//!   snr-approx   selection objective's ratio term vs a Monte Carlo estimate
//!
//! `strict` tightens the exact-arithmetic tolerances by 10x. The snr-approx
//! threshold is an approximation-quality gate, not a precision gate, so it
//! stays at 10% either way; the spread between the two documented variance
//! conventions is always reported as a warning, never a failure.

use anyhow::Result;
use mimotrain::channel::exponential_correlation;
use mimotrain::estimation::{
    apply_correction, correction_operator, kalman_predict, mse_lower_bound_closed_loop,
    mse_of_training, posterior_gain_matrix, snr_ceiling_bound_exp, snr_upper_bound_ss, x_opt_full_feedback,
    x_ss_opt, KalmanState,
};
use mimotrain::numerics::{hermitian_eig, psd_sqrt, trace_re, CMat, CVec};
use mimotrain::rng::{complex_gaussian, complex_gaussian_vector, substream};
use mimotrain::simulator::{run, CodebookSpec, EtaSource, SimConfig};
use mimotrain::strategies::{snr_objective, MomentConvention, StrategyKind};
use nalgebra::QR;
use num_complex::Complex64;
use rand::Rng;

pub const CHECK_NAMES: [&str; 4] = ["ss-mse", "tracked-mse", "snr-bounds", "snr-approx"];

#[derive(Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub warnings: Vec<String>,
}

pub fn run_checks(only: Option<&str>, strict: bool) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    for name in CHECK_NAMES {
        if let Some(sel) = only {
            if sel != name {
                continue;
            }
        }
        let report = match name {
            "ss-mse" => check_ss_mse(strict)?,
            "tracked-mse" => check_tracked_mse(strict)?,
            "snr-bounds" => check_snr_bounds(strict)?,
            "snr-approx" => check_snr_approx()?,
            _ => unreachable!(),
        };
        reports.push(report);
    }
    Ok(reports)
}

fn random_unitary_x(n: usize, t: usize, rho: f64, rng: &mut impl Rng) -> CMat {
    let g = CMat::from_fn(n, t, |_, _| complex_gaussian(rng));
    QR::new(g).q().map(|z| z * Complex64::new(rho.sqrt(), 0.0))
}

/// Filter output and direct formula against the spectral sum
/// 1 - (1/N) sum_t rho lambda_t^2 / (rho lambda_t + 1).
fn check_ss_mse(strict: bool) -> Result<CheckReport> {
    let tol = if strict { 1e-11 } else { 1e-10 };
    let mut rng = substream(7100, &[1]);
    let mut worst = 0.0f64;
    let cases = 50;
    for _ in 0..cases {
        let n = rng.gen_range(2..=32usize);
        let t = rng.gen_range(1..=n.min(8));
        let a = rng.gen_range(0.0..0.95);
        let rho = 10f64.powf(rng.gen_range(-2.0..4.0));
        let r = exponential_correlation(n, a)?;
        let eig = hermitian_eig(&r)?;
        let oracle = 1.0
            - eig
                .eigenvalues
                .iter()
                .take(t)
                .map(|&l| rho * l * l / (rho * l + 1.0))
                .sum::<f64>()
                / n as f64;
        let x = x_ss_opt(&r, t, rho)?;
        let direct = mse_of_training(&x, &r)?;
        let filtered = trace_re(&correction_operator(&r, &x)?.r_corr) / n as f64;
        worst = worst.max((direct - oracle).abs()).max((filtered - oracle).abs());
    }
    Ok(CheckReport {
        name: "ss-mse",
        passed: worst <= tol,
        detail: format!("max |delta| {worst:.2e} over {cases} random cases (tol {tol:.0e})"),
        warnings: Vec::new(),
    })
}

/// Closed-form error trajectory against an explicitly run filter that trains
/// the predicted dominant directions each block.
fn check_tracked_mse(strict: bool) -> Result<CheckReport> {
    let tol = if strict { 1e-9 } else { 1e-8 };
    let n = 8;
    let i_max = 9;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &a in &[0.5, 0.9] {
        for &t in &[1usize, 2] {
            for &rho in &[1.0, 100.0] {
                for &eta in &[0.9881, 0.8721] {
                    let r = exponential_correlation(n, a)?;
                    let closed = mse_lower_bound_closed_loop(&r, eta, t, rho, i_max)?;
                    let mut state = KalmanState::initial(&r);
                    for (i, &cf) in closed.iter().enumerate() {
                        if i > 0 {
                            state = kalman_predict(&state, eta, &r);
                        }
                        let x = x_opt_full_feedback(&state.r_pred, t, rho)?;
                        state.r_corr = correction_operator(&state.r_pred, &x)?.r_corr;
                        let filtered = trace_re(&state.r_corr) / n as f64;
                        worst = worst.max((filtered - cf).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(CheckReport {
        name: "tracked-mse",
        passed: worst <= tol,
        detail: format!(
            "max |delta| {worst:.2e} over {cases} trajectories x {} blocks (tol {tol:.0e})",
            i_max + 1
        ),
        warnings: Vec::new(),
    })
}

/// Simulated mean SNR never exceeds the exact single-shot bound, and the
/// antenna-independent ceiling dominates that bound on a parameter grid.
fn check_snr_bounds(strict: bool) -> Result<CheckReport> {
    let slack = if strict { 1e-13 } else { 1e-12 };
    let mut worst_dominance = f64::NEG_INFINITY;
    for &n in &[8usize, 16, 32, 64, 128] {
        for &rho in &[1.0, 100.0] {
            for &t in &[2usize, 4] {
                for &a in &[0.5, 0.9] {
                    let r = exponential_correlation(n, a)?;
                    let bound = snr_upper_bound_ss(&r, t, rho)?;
                    let ceiling = snr_ceiling_bound_exp(t, a)?;
                    worst_dominance = worst_dominance.max((bound - ceiling) / ceiling);
                }
            }
        }
    }
    let dominance_ok = worst_dominance <= slack;

    let mut worst_sim_margin = f64::NEG_INFINITY;
    for &n in &[8usize, 16, 32] {
        let cfg = SimConfig {
            n_tx: n,
            t_len: 4,
            rho: 100.0,
            a: 0.9,
            eta: EtaSource::Jakes { v_kmh: 3.0, f_c_hz: 2.5e9, tau_s: 5e-3 },
            bits: 6,
            blocks_per_iteration: 10,
            iterations: 300,
            strategy: StrategyKind::ClSsFull,
            codebook: CodebookSpec::default(),
            master_seed: 11,
            shuffle_codebook: true,
            convention: MomentConvention::TraceOfSquare,
        };
        let bound = snr_upper_bound_ss(&exponential_correlation(n, 0.9)?, 4, 100.0)?;
        for m in run(&cfg)? {
            worst_sim_margin = worst_sim_margin.max((m.mean_gamma_lin - bound) / bound);
        }
    }
    let sim_ok = worst_sim_margin <= 0.0;

    Ok(CheckReport {
        name: "snr-bounds",
        passed: dominance_ok && sim_ok,
        detail: format!(
            "ceiling dominance margin {worst_dominance:.2e} (allowed {slack:.0e}); \
             simulated-vs-bound margin {worst_sim_margin:.3} (must be <= 0)"
        ),
        warnings: Vec::new(),
    })
}

/// The selection objective's ratio term against a 10^6-draw Monte Carlo
/// estimate of the same expectation, 20 random operating points.
fn check_snr_approx() -> Result<CheckReport> {
    let tol_rel = 0.10;
    let draws = 1_000_000usize;
    let mut rng = substream(7103, &[1]);
    let mut worst_rel = 0.0f64;
    let mut spread_rel_max = 0.0f64;
    let mut spread_rel_sum = 0.0f64;
    let cases = 20;
    for case in 0..cases {
        let n = if case % 2 == 0 { 4 } else { 8 };
        let a = rng.gen_range(0.3..0.9);
        let rho = 10f64.powf(rng.gen_range(-1.0..2.0));
        let r = exponential_correlation(n, a)?;

        // a state mid-run: two corrected blocks, then one prediction
        let mut state = KalmanState::initial(&r);
        for _ in 0..2 {
            let x = random_unitary_x(n, 2, rho, &mut rng);
            let op = correction_operator(&state.r_pred, &x)?;
            let h = complex_gaussian_vector(&mut rng, n);
            let y = x.adjoint() * &h;
            state.h_corr = apply_correction(&op, &state.h_pred, &y);
            state.r_corr = op.r_corr.clone();
            state = kalman_predict(&state, 0.9881, &r);
        }

        let x = random_unitary_x(n, 2, rho, &mut rng);
        let q_tr = snr_objective(&x, &state, MomentConvention::TraceOfSquare)?.q;
        let q_sq = snr_objective(&x, &state, MomentConvention::SquareOfTrace)?.q;

        let r_p = posterior_gain_matrix(&state.r_pred, &x)?;
        let r_corr = correction_operator(&state.r_pred, &x)?.r_corr;
        let rp_half = psd_sqrt(&r_p)?;
        let mut acc = 0.0f64;
        for _ in 0..draws {
            let g: CVec = complex_gaussian_vector(&mut rng, n);
            let h_est = &state.h_pred + &rp_half * g;
            acc += h_est.dotc(&(&r_corr * &h_est)).re / h_est.norm_squared();
        }
        let mc = acc / draws as f64;
        worst_rel = worst_rel.max((q_tr - mc).abs() / mc.abs());
        let spread = (q_tr - q_sq).abs() / mc.abs();
        spread_rel_max = spread_rel_max.max(spread);
        spread_rel_sum += spread;
    }
    Ok(CheckReport {
        name: "snr-approx",
        passed: worst_rel <= tol_rel,
        detail: format!(
            "worst relative error {:.1}% over {cases} states x {draws} draws (tol {:.0}%)",
            100.0 * worst_rel,
            100.0 * tol_rel
        ),
        warnings: vec![format!(
            "the two documented variance conventions for the ratio term differ by \
             up to {:.2}% (mean {:.2}%) of the Monte Carlo value on these states; \
             this ambiguity is inherent to the objective's definition and is \
             reported here rather than gated",
            100.0 * spread_rel_max,
            100.0 * spread_rel_sum / cases as f64
        )],
    })
}
