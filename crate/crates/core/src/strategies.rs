//! Training-matrix selection policies and the beamforming metric layer.
//!
//! Six policies share one decision type: two open-loop schemes that walk a
//! shared codebook cyclically, two closed-loop schemes that pick a codebook
//! entry against the current prediction state (error-trace or received-SNR
//! objective), and two unquantized references that train along the dominant
//! eigen-directions. Selection is observation-free: it reads only the
//! predicted state, never the current block's measurement.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codebook::TrainingCodebook;
use crate::error::{Error, Result};
use crate::estimation::{posterior_gain_trace, x_opt_full_feedback, KalmanState};
use crate::numerics::{guarded_cholesky, hermitize, CMat, CVec, Tolerances};

/// Zero-information guard for the SNR objective denominator.
const DEGENERATE_MASS: f64 = 1e-12;
/// Estimates shorter than this beamform along e_1 instead of dividing by ~0.
const BEAM_FLOOR: f64 = 1e-12;

/// The selection policies the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Cyclic codebook walk, estimator restarts from the prior every block.
    OlSs,
    /// Cyclic codebook walk feeding a tracking estimator.
    OlMem,
    /// Receiver picks the codebook entry minimizing the posterior error trace.
    ClMemMse,
    /// Receiver picks the codebook entry maximizing an approximate received SNR.
    ClMemSnr,
    /// Unquantized single-shot reference: dominant prior eigen-directions.
    ClSsFull,
    /// Unquantized tracking reference: dominant predicted eigen-directions.
    ClMemFull,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::OlSs,
        StrategyKind::OlMem,
        StrategyKind::ClMemMse,
        StrategyKind::ClMemSnr,
        StrategyKind::ClSsFull,
        StrategyKind::ClMemFull,
    ];

    /// Stable lowercase name used by the CLI and CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::OlSs => "ol_ss",
            StrategyKind::OlMem => "ol_mem",
            StrategyKind::ClMemMse => "cl_mem_mse",
            StrategyKind::ClMemSnr => "cl_mem_snr",
            StrategyKind::ClSsFull => "cl_ss_full",
            StrategyKind::ClMemFull => "cl_mem_full",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Format(format!("unknown strategy {name:?}")))
    }

    /// True for the schemes that keep estimator memory across blocks.
    pub fn uses_memory(&self) -> bool {
        !matches!(self, StrategyKind::OlSs | StrategyKind::ClSsFull)
    }

    /// True for the schemes that need a shared codebook.
    pub fn uses_codebook(&self) -> bool {
        !matches!(self, StrategyKind::ClSsFull | StrategyKind::ClMemFull)
    }
}

/// Uplink cost of conveying one training choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// Exactly this many bits per block (0 for open-loop schemes).
    Bits(u32),
    /// Unquantized reference scheme; no finite bit count applies.
    Unbounded,
}

/// Outcome of a selection call for one block.
#[derive(Debug, Clone)]
pub struct StrategyDecision {
    pub x: CMat,
    pub feedback: Feedback,
    pub codebook_index: Option<usize>,
}

/// Cyclic open-loop schedule: block i uses entry i mod 2^B. Costs no
/// feedback because both ends can derive the index from the block count.
pub fn select_round_robin(codebook: &TrainingCodebook, block_index: usize) -> StrategyDecision {
    let idx = block_index % codebook.len();
    StrategyDecision {
        x: codebook.entry(idx).clone(),
        feedback: Feedback::Bits(0),
        codebook_index: Some(idx),
    }
}

/// Relative width of the scoring band treated as a tie. Keeps rounding
/// noise from overriding the lowest-index rule.
const TIE_RTOL: f64 = 1e-12;

/// First index whose score sits within a hair of the maximum.
fn argmax_lowest_index(scores: &[f64]) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_RTOL * max.abs();
    scores
        .iter()
        .position(|&s| s >= max - tol)
        .unwrap_or(0)
}

/// Pick the entry with the largest posterior gain trace, which is the one
/// minimizing the corrected error trace. Ties go to the lowest index.
pub fn select_min_mse(
    codebook: &TrainingCodebook,
    state: &KalmanState,
) -> Result<StrategyDecision> {
    let scores = codebook
        .entries()
        .iter()
        .map(|entry| posterior_gain_trace(&state.r_pred, entry))
        .collect::<Result<Vec<f64>>>()?;
    let best_idx = argmax_lowest_index(&scores);
    Ok(StrategyDecision {
        x: codebook.entry(best_idx).clone(),
        feedback: Feedback::Bits(codebook.bits),
        codebook_index: Some(best_idx),
    })
}

/// Which reading of the squared-trace fluctuation term to use. The printed
/// formula is ambiguous between tr(G²) and (tr G)²; the matrix reading is
/// the default because it matches matching-order quadratic-form moments, and
/// the scalar reading stays available for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentConvention {
    #[default]
    TraceOfSquare,
    SquareOfTrace,
}

/// Approximate received-SNR objective for one candidate training matrix.
#[derive(Debug, Clone, Copy)]
pub struct SnrObjective {
    pub value: f64,
    /// The second-order correction term alone (the approximated ratio).
    pub q: f64,
    /// Set when the posterior carries no usable mass and the value fell
    /// back to the gain trace.
    pub degenerate: bool,
}

/// Expected beamforming SNR after training with `x`, approximated to second
/// order: gain trace + predicted-mean power + a ratio correction q built
/// from the posterior moments. All matrix algebra happens at T×T size via
/// the innovation factorization; the N×N formulation exists only in tests.
pub fn snr_objective(
    x: &CMat,
    state: &KalmanState,
    convention: MomentConvention,
) -> Result<SnrObjective> {
    let n = state.dim();
    let t = x.ncols();
    if x.nrows() != n || t == 0 || t > n {
        return Err(Error::Dimension(format!(
            "training matrix {}x{} does not fit state dimension {n}",
            x.nrows(),
            t
        )));
    }
    let r = &state.r_pred;
    let h = &state.h_pred;

    let a = r * x;
    let m = hermitize(&(CMat::identity(t, t) + x.adjoint() * &a));
    let chol = guarded_cholesky(&Tolerances::default(), &m)?;
    let g1 = hermitize(&(a.adjoint() * &a));
    let g2 = hermitize(&(a.adjoint() * (r * &a)));
    let s1 = chol.solve(&g1);
    let s2 = chol.solve(&g2);

    let tr_rp = s1.trace().re;
    let tr_rpred_rp = s2.trace().re;
    let s1s1 = &s1 * &s1;
    let tr_rp2 = s1s1.trace().re;
    let tr_rpred_rp2 = (&s2 * &s1).trace().re;
    let tr_rp3 = (&s1s1 * &s1).trace().re;

    let v = r * h;
    let u = a.adjoint() * h;
    let w = a.adjoint() * &v;
    let minv_u = chol.solve(&u);
    let h_rp_h = u.dotc(&minv_u).re;
    let h_rpred_h = h.dotc(&v).re;
    let h_rpred_rp_h = w.dotc(&minv_u).re;
    let h_rp2_h = minv_u.dotc(&(&g1 * &minv_u)).re;

    // posterior error covariance is the predicted one minus the gain matrix
    let h_rcorr_h = h_rpred_h - h_rp_h;
    let tr_rcorr_rp = tr_rpred_rp - tr_rp2;
    let tr_rcorr_rp2 = tr_rpred_rp2 - tr_rp3;
    let h_rcorr_rp_h = h_rpred_rp_h - h_rp2_h;

    let e1 = h_rcorr_h + tr_rcorr_rp;
    let e2 = h.norm_squared() + tr_rp;
    if e2 <= DEGENERATE_MASS {
        return Ok(SnrObjective {
            value: tr_rp,
            q: 0.0,
            degenerate: true,
        });
    }
    let fluctuation = match convention {
        MomentConvention::TraceOfSquare => tr_rp2,
        MomentConvention::SquareOfTrace => tr_rp * tr_rp,
    };
    let var_a2 = 4.0 * h_rp_h + 2.0 * fluctuation;
    let cov = 4.0 * h_rcorr_rp_h + 2.0 * tr_rcorr_rp2;
    // expanded second-order form; no division by e1, which may vanish
    let q = e1 / e2 - cov / (e2 * e2) + e1 * var_a2 / (e2 * e2 * e2);
    Ok(SnrObjective {
        value: e2 + q,
        q,
        degenerate: false,
    })
}

/// Pick the entry with the largest approximate received SNR. Ties go to the
/// lowest index.
pub fn select_max_snr(
    codebook: &TrainingCodebook,
    state: &KalmanState,
    convention: MomentConvention,
) -> Result<StrategyDecision> {
    let scores = codebook
        .entries()
        .iter()
        .map(|entry| snr_objective(entry, state, convention).map(|o| o.value))
        .collect::<Result<Vec<f64>>>()?;
    let best_idx = argmax_lowest_index(&scores);
    Ok(StrategyDecision {
        x: codebook.entry(best_idx).clone(),
        feedback: Feedback::Bits(codebook.bits),
        codebook_index: Some(best_idx),
    })
}

/// Unquantized reference: train along the first T dominant eigen-directions
/// of the predicted error covariance.
pub fn select_full_feedback(
    state: &KalmanState,
    t_len: usize,
    rho: f64,
) -> Result<StrategyDecision> {
    let x = x_opt_full_feedback(&state.r_pred, t_len, rho)?;
    Ok(StrategyDecision {
        x,
        feedback: Feedback::Unbounded,
        codebook_index: None,
    })
}

/// Maximum-ratio beamformer from a channel estimate. A vanishing estimate
/// falls back to e_1 and reports it, so the caller can count the event.
pub fn beamformer(estimate: &CVec) -> (CVec, bool) {
    let norm = estimate.norm();
    if norm < BEAM_FLOOR {
        let mut w = CVec::zeros(estimate.len());
        if !w.is_empty() {
            w[0] = Complex64::new(1.0, 0.0);
        }
        return (w, true);
    }
    (estimate.map(|z| z / Complex64::new(norm, 0.0)), false)
}

/// Per-draw received SNR of a unit beamformer against the true channel.
pub fn realized_snr(h: &CVec, w: &CVec) -> f64 {
    h.dotc(w).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::exponential_correlation;
    use crate::codebook::{design_gsp, TrainingCodebook};
    use crate::estimation::{
        correction_operator, kalman_predict, posterior_gain_matrix, training_power,
    };
    use crate::numerics::{psd_sqrt, trace_re};
    use crate::rng::{complex_gaussian, substream};
    use nalgebra::QR;

    fn random_unitary_x(
        n: usize,
        t: usize,
        rho: f64,
        rng: &mut impl rand::Rng,
    ) -> CMat {
        let g = CMat::from_fn(n, t, |_, _| complex_gaussian(rng));
        QR::new(g).q().map(|z| z * Complex64::new(rho.sqrt(), 0.0))
    }

    // a state mid-run: predict from a corrected state so r_pred is generic
    fn random_state(n: usize, a: f64, eta: f64, rho: f64, seed: u64) -> KalmanState {
        let r = exponential_correlation(n, a).unwrap();
        let mut rng = substream(seed, &[600]);
        let mut state = KalmanState::initial(&r);
        for _ in 0..2 {
            let x = random_unitary_x(n, 2.min(n), rho, &mut rng);
            let op = correction_operator(&state.r_pred, &x).unwrap();
            let h = CVec::from_fn(n, |_, _| complex_gaussian(&mut rng));
            let y = x.adjoint() * &h;
            state.h_corr = crate::estimation::apply_correction(&op, &state.h_pred, &y);
            state.r_corr = op.r_corr.clone();
            state = kalman_predict(&state, eta, &r);
        }
        state
    }

    #[test]
    fn round_robin_wraps_with_period() {
        let cb = design_gsp(4, 2, 2, 1.0, 100, 1).unwrap();
        assert_eq!(select_round_robin(&cb, 0).codebook_index, Some(0));
        assert_eq!(select_round_robin(&cb, 3).codebook_index, Some(3));
        assert_eq!(select_round_robin(&cb, 4).codebook_index, Some(0));
        for i in 0..12 {
            let d = select_round_robin(&cb, i);
            assert_eq!(d.codebook_index, Some(i % 4));
            assert_eq!(d.feedback, Feedback::Bits(0));
            let e = select_round_robin(&cb, i + 4);
            assert_eq!(d.codebook_index, e.codebook_index);
        }
    }

    #[test]
    fn min_mse_is_exhaustive_argmax() {
        let cb = design_gsp(8, 2, 3, 2.0, 200, 2).unwrap();
        for seed in 0..10u64 {
            let state = random_state(8, 0.9, 0.95, 2.0, seed);
            let d = select_min_mse(&cb, &state).unwrap();
            let chosen = posterior_gain_trace(&state.r_pred, &d.x).unwrap();
            for entry in cb.entries() {
                let other = posterior_gain_trace(&state.r_pred, entry).unwrap();
                assert!(chosen >= other - 1e-12);
            }
            assert_eq!(d.feedback, Feedback::Bits(3));
        }
    }

    #[test]
    fn min_mse_prefers_dominant_directions_when_present() {
        let n = 8;
        let rho = 1.0;
        let r = exponential_correlation(n, 0.9).unwrap();
        let state = KalmanState::initial(&r);
        let opt = x_opt_full_feedback(&r, 2, rho).unwrap();
        let mut rng = substream(7, &[601]);
        let mut entries = vec![opt.clone()];
        entries.extend((0..3).map(|_| random_unitary_x(n, 2, rho, &mut rng)));
        let cb = TrainingCodebook::from_entries(n, 2, 2, rho, 0, entries).unwrap();
        let d = select_min_mse(&cb, &state).unwrap();
        assert_eq!(d.codebook_index, Some(0));
    }

    #[test]
    fn min_mse_isotropic_tie_takes_lowest_index() {
        let n = 4;
        let r = CMat::identity(n, n);
        let state = KalmanState::initial(&r);
        let cb = design_gsp(n, 2, 2, 1.0, 100, 3).unwrap();
        let traces: Vec<f64> = cb
            .entries()
            .iter()
            .map(|e| posterior_gain_trace(&state.r_pred, e).unwrap())
            .collect();
        for t in &traces {
            assert!((t - traces[0]).abs() < 1e-10, "identity prior must tie");
        }
        let d = select_min_mse(&cb, &state).unwrap();
        assert_eq!(d.codebook_index, Some(0));
    }

    // N×N reference formulation of every moment entering the objective
    fn snr_objective_direct(x: &CMat, state: &KalmanState, convention: MomentConvention) -> f64 {
        let r_p = posterior_gain_matrix(&state.r_pred, x).unwrap();
        let op = correction_operator(&state.r_pred, x).unwrap();
        let r_corr = &op.r_corr;
        let h = &state.h_pred;
        let quad = |m: &CMat| h.dotc(&(m * h)).re;

        let e1 = quad(r_corr) + trace_re(&(r_corr * &r_p));
        let e2 = h.norm_squared() + trace_re(&r_p);
        let fluct = match convention {
            MomentConvention::TraceOfSquare => trace_re(&(&r_p * &r_p)),
            MomentConvention::SquareOfTrace => trace_re(&r_p) * trace_re(&r_p),
        };
        let var = 4.0 * quad(&r_p) + 2.0 * fluct;
        let cov = 4.0 * h.dotc(&(r_corr * (&r_p * h))).re
            + 2.0 * trace_re(&(r_corr * (&r_p * &r_p)));
        let q = e1 / e2 - cov / (e2 * e2) + e1 * var / (e2 * e2 * e2);
        e2 + q
    }

    #[test]
    fn objective_matches_direct_formulation() {
        for seed in 0..25u64 {
            let state = random_state(6, 0.8, 0.97, 1.5, seed);
            let mut rng = substream(seed, &[602]);
            let x = random_unitary_x(6, 2, 1.5, &mut rng);
            for conv in [MomentConvention::TraceOfSquare, MomentConvention::SquareOfTrace] {
                let fast = snr_objective(&x, &state, conv).unwrap();
                let slow = snr_objective_direct(&x, &state, conv);
                assert!(!fast.degenerate);
                assert!(
                    (fast.value - slow).abs() <= 1e-10 * slow.abs().max(1.0),
                    "seed {seed}: {} vs {slow}",
                    fast.value
                );
            }
        }
    }

    #[test]
    fn objective_with_zero_mean_orders_like_gain_trace() {
        let n = 6;
        let r = CMat::identity(n, n);
        let state = KalmanState::initial(&r);
        let cb = design_gsp(n, 2, 3, 1.0, 200, 5).unwrap();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for e in cb.entries() {
            let obj = snr_objective(e, &state, MomentConvention::TraceOfSquare).unwrap();
            let gain = posterior_gain_trace(&state.r_pred, e).unwrap();
            pairs.push((obj.value, gain));
        }
        let mut by_obj: Vec<usize> = (0..pairs.len()).collect();
        let mut by_gain = by_obj.clone();
        by_obj.sort_by(|&i, &j| pairs[j].0.total_cmp(&pairs[i].0));
        by_gain.sort_by(|&i, &j| pairs[j].1.total_cmp(&pairs[i].1));
        // identical ordering modulo exact ties (identity prior ties everything)
        for (i, j) in by_obj.iter().zip(&by_gain) {
            assert!((pairs[*i].0 - pairs[*j].0).abs() < 1e-9);
        }
    }

    #[test]
    fn objective_degenerate_fallback() {
        let n = 4;
        let r = CMat::identity(n, n).map(|z| z * 1e-16);
        let mut state = KalmanState::initial(&r);
        state.h_pred = CVec::zeros(n);
        let x = {
            let mut rng = substream(1, &[603]);
            random_unitary_x(n, 2, 1.0, &mut rng)
        };
        let obj = snr_objective(&x, &state, MomentConvention::TraceOfSquare).unwrap();
        assert!(obj.degenerate);
        assert!(obj.value >= 0.0 && obj.value < 1e-12);
    }

    #[test]
    fn objective_q_tracks_monte_carlo_ratio() {
        let n = 4;
        let rho: f64 = 1.0;
        let r = exponential_correlation(n, 0.9).unwrap();
        let mut state = KalmanState::initial(&r);
        let mut rng = substream(42, &[604]);
        let r_half = psd_sqrt(&r).unwrap();
        state.h_pred = &r_half * CVec::from_fn(n, |_, _| complex_gaussian(&mut rng));
        let x = random_unitary_x(n, 2, rho, &mut rng);

        let obj = snr_objective(&x, &state, MomentConvention::TraceOfSquare).unwrap();

        let r_p = posterior_gain_matrix(&state.r_pred, &x).unwrap();
        let r_corr = correction_operator(&state.r_pred, &x).unwrap().r_corr;
        let rp_half = psd_sqrt(&r_p).unwrap();
        let draws = 1_000_000usize;
        let mut acc = 0.0f64;
        for _ in 0..draws {
            let g = CVec::from_fn(n, |_, _| complex_gaussian(&mut rng));
            let h_post = &state.h_pred + &rp_half * g;
            let num = h_post.dotc(&(&r_corr * &h_post)).re;
            acc += num / h_post.norm_squared();
        }
        let mc = acc / draws as f64;
        assert!(
            (obj.q - mc).abs() <= 0.10 * mc.abs(),
            "q {} vs Monte Carlo {mc}",
            obj.q
        );
    }

    #[test]
    fn objective_q_stays_in_rayleigh_range() {
        let mut worst_low = 0.0f64;
        let mut worst_high = 0.0f64;
        for seed in 0..100u64 {
            let state = random_state(5, 0.9, 0.95, 1.0, seed);
            let mut rng = substream(seed, &[605]);
            let x = random_unitary_x(5, 2, 1.0, &mut rng);
            let obj = snr_objective(&x, &state, MomentConvention::TraceOfSquare).unwrap();
            let r_corr = correction_operator(&state.r_pred, &x).unwrap().r_corr;
            let eig = crate::numerics::hermitian_eig(&r_corr).unwrap();
            let lmax = eig.eigenvalues[0];
            let lmin = eig.eigenvalues[eig.len() - 1];
            worst_low = worst_low.max(lmin - obj.q);
            worst_high = worst_high.max(obj.q - lmax);
        }
        // q approximates a Rayleigh-quotient mean, so it may only leave the
        // spectral interval by the size of the second-order remainder
        assert!(worst_low <= 1e-3, "q undershoots spectrum by {worst_low}");
        assert!(worst_high <= 1e-3, "q overshoots spectrum by {worst_high}");
    }

    #[test]
    fn max_snr_is_exhaustive_argmax_and_single_entry_trivial() {
        let cb = design_gsp(6, 2, 3, 1.0, 200, 8).unwrap();
        for seed in 0..10u64 {
            let state = random_state(6, 0.85, 0.95, 1.0, seed);
            let d = select_max_snr(&cb, &state, MomentConvention::TraceOfSquare).unwrap();
            let chosen = snr_objective(&d.x, &state, MomentConvention::TraceOfSquare)
                .unwrap()
                .value;
            for e in cb.entries() {
                let other = snr_objective(e, &state, MomentConvention::TraceOfSquare)
                    .unwrap()
                    .value;
                assert!(chosen >= other - 1e-12);
            }
        }

        let single = design_gsp(6, 2, 0, 1.0, 50, 9).unwrap();
        let state = random_state(6, 0.85, 0.95, 1.0, 3);
        let d = select_max_snr(&single, &state, MomentConvention::TraceOfSquare).unwrap();
        assert_eq!(d.codebook_index, Some(0));
        assert_eq!(d.feedback, Feedback::Bits(0));
    }

    #[test]
    fn max_snr_mostly_agrees_with_min_mse_at_high_snr() {
        // states drawn from actual closed-loop operation, where the
        // negligible-difference claim applies; blocks with a zero mean are
        // excluded because both selectors coincide there by construction
        let n = 16;
        let rho = 100.0;
        let eta = 0.9881;
        let ch = crate::channel::GaussMarkovChannel::new(crate::channel::ChannelConfig {
            n_tx: n,
            a: 0.3,
            eta,
        })
        .unwrap();
        let r = ch.correlation().clone();
        let cb = design_gsp(n, 2, 3, rho, 400, 10).unwrap();
        let mut agree = 0usize;
        let mut total = 0usize;
        for iter in 0..112u64 {
            let mut rng_init = crate::rng::block_stream(99, iter, 0, crate::rng::StreamPurpose::ChannelInit);
            let mut st = ch.init_block(&mut rng_init);
            let mut k = KalmanState::initial(&r);
            for block in 0..10u64 {
                if block > 0 {
                    k = kalman_predict(&k, eta, &r);
                    let mut rng_ev = crate::rng::block_stream(
                        99,
                        iter,
                        block,
                        crate::rng::StreamPurpose::ChannelEvolve,
                    );
                    st = ch.evolve_block(&st, &mut rng_ev);
                    let a = select_min_mse(&cb, &k).unwrap();
                    let b = select_max_snr(&cb, &k, MomentConvention::TraceOfSquare).unwrap();
                    total += 1;
                    if a.codebook_index == b.codebook_index {
                        agree += 1;
                    }
                }
                let pick = select_min_mse(&cb, &k).unwrap();
                let mut rng_noise =
                    crate::rng::block_stream(99, iter, block, crate::rng::StreamPurpose::Noise);
                let obs = crate::estimation::observe(&pick.x, &st.h, &mut rng_noise).unwrap();
                k = crate::estimation::kalman_correct(&k, &obs).unwrap();
            }
        }
        assert!(total >= 1000, "need a thousand states, got {total}");
        assert!(
            agree * 10 >= total * 9,
            "agreement {agree}/{total} below 90%"
        );
    }

    #[test]
    fn full_feedback_wraps_eigendirections() {
        let state = random_state(8, 0.9, 0.95, 1.0, 11);
        let d = select_full_feedback(&state, 3, 2.0).unwrap();
        let direct = x_opt_full_feedback(&state.r_pred, 3, 2.0).unwrap();
        assert_eq!(d.x, direct);
        assert_eq!(d.feedback, Feedback::Unbounded);
        assert!(d.codebook_index.is_none());
        assert!((training_power(&d.x) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn beamformer_basics() {
        let mut h = CVec::zeros(3);
        h[1] = Complex64::new(3.0, 0.0);
        let (w, flagged) = beamformer(&h);
        assert!(!flagged);
        assert!((w[1].re - 1.0).abs() < 1e-15 && w[0].norm() == 0.0);

        let mut rng = substream(2, &[606]);
        let g = CVec::from_fn(5, |_, _| complex_gaussian(&mut rng));
        let (w1, _) = beamformer(&g);
        assert!((w1.norm() - 1.0).abs() < 1e-12);
        let (w2, _) = beamformer(&g.map(|z| z * 7.5));
        assert!((&w1 - &w2).norm() < 1e-12);

        let (w0, flagged0) = beamformer(&CVec::zeros(4));
        assert!(flagged0);
        assert!((w0[0].re - 1.0).abs() < 1e-15);
        assert!((w0.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn realized_snr_bounds() {
        let mut rng = substream(3, &[607]);
        for _ in 0..50 {
            let h = CVec::from_fn(6, |_, _| complex_gaussian(&mut rng));
            let (w_matched, _) = beamformer(&h);
            assert!((realized_snr(&h, &w_matched) - h.norm_squared()).abs() < 1e-9);

            let g = CVec::from_fn(6, |_, _| complex_gaussian(&mut rng));
            let proj = &h * (h.dotc(&g) / Complex64::new(h.norm_squared(), 0.0));
            let (w_perp, _) = beamformer(&(&g - proj));
            assert!(realized_snr(&h, &w_perp) < 1e-18);

            let (w_rand, _) = beamformer(&g);
            assert!(realized_snr(&h, &w_rand) <= h.norm_squared() + 1e-12);
        }
    }

    #[test]
    fn analytic_conditional_snr_matches_monte_carlo() {
        let n = 6;
        let state = random_state(n, 0.9, 0.95, 2.0, 17);
        let mut rng = substream(19, &[608]);
        let x = random_unitary_x(n, 2, 2.0, &mut rng);
        let op = correction_operator(&state.r_pred, &x).unwrap();
        let h_true = {
            let r_half = psd_sqrt(&state.r_pred).unwrap();
            &state.h_pred + &r_half * CVec::from_fn(n, |_, _| complex_gaussian(&mut rng))
        };
        let y = x.adjoint() * &h_true;
        let h_corr = crate::estimation::apply_correction(&op, &state.h_pred, &y);
        let r_corr = &op.r_corr;

        let analytic =
            h_corr.norm_squared() + h_corr.dotc(&(r_corr * &h_corr)).re / h_corr.norm_squared();

        let (w, _) = beamformer(&h_corr);
        let corr_half = psd_sqrt(r_corr).unwrap();
        let draws = 1_000_000usize;
        let mut acc = 0.0f64;
        for _ in 0..draws {
            let e = &corr_half * CVec::from_fn(n, |_, _| complex_gaussian(&mut rng));
            let h = &h_corr + e;
            acc += realized_snr(&h, &w);
        }
        let mc = acc / draws as f64;
        assert!(
            (analytic - mc).abs() <= 0.02 * analytic,
            "analytic {analytic} vs Monte Carlo {mc}"
        );
    }

    #[test]
    fn mse_selection_dominates_round_robin_per_call() {
        let n = 8;
        let rho = 1.0;
        let cb = design_gsp(n, 2, 3, rho, 200, 12).unwrap();
        for seed in 0..20u64 {
            let state = random_state(n, 0.9, 0.97, rho, seed);
            let selected = select_min_mse(&cb, &state).unwrap();
            let sel_corr = correction_operator(&state.r_pred, &selected.x)
                .unwrap()
                .r_corr;
            let rr = select_round_robin(&cb, seed as usize);
            let rr_corr = correction_operator(&state.r_pred, &rr.x).unwrap().r_corr;
            assert!(trace_re(&sel_corr) <= trace_re(&rr_corr) + 1e-12);
        }
    }

    #[test]
    fn strategy_kind_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(StrategyKind::parse(k.name()).unwrap(), k);
        }
        assert!(StrategyKind::parse("nope").is_err());
        assert!(StrategyKind::OlSs.uses_codebook());
        assert!(!StrategyKind::ClSsFull.uses_codebook());
        assert!(!StrategyKind::OlSs.uses_memory());
        assert!(StrategyKind::ClMemFull.uses_memory());
    }
}
