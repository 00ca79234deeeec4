//! Deterministic Monte Carlo engine: iterations × fading blocks, one
//! strategy per run, per-block SNR and MSE aggregation.
//!
//! Every random draw comes from a counter-keyed substream
//! (master_seed, iteration, block, purpose), so results are bit-identical
//! for any worker count and channel realizations are shared across
//! strategies run under the same seed. Selection never sees the current
//! block's observation, which lets the engine precompute the whole
//! training sequence once per run for the schemes whose choices do not
//! depend on received data.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, GaussMarkovChannel};
use crate::codebook::{design_gsp, load_codebook, TrainingCodebook};
use crate::error::{Error, Result};
use crate::estimation::{
    apply_correction, correction_operator, kalman_correct, kalman_predict, observe, x_ss_opt,
    CorrectionOperator, KalmanState,
};
use crate::numerics::{trace_re, CMat, CVec};
use crate::rng::{block_stream, StreamPurpose};
use crate::strategies::{
    beamformer, realized_snr, select_full_feedback, select_max_snr, select_min_mse,
    MomentConvention, StrategyKind,
};

/// Where the temporal coefficient comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSource {
    Direct { eta: f64 },
    Jakes { v_kmh: f64, f_c_hz: f64, tau_s: f64 },
}

impl EtaSource {
    pub fn value(&self) -> f64 {
        match *self {
            EtaSource::Direct { eta } => eta,
            EtaSource::Jakes { v_kmh, f_c_hz, tau_s } => {
                crate::channel::jakes_eta(v_kmh, f_c_hz, tau_s)
            }
        }
    }
}

/// Where the shared codebook comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookSpec {
    /// Design on the fly for the run's shape (n_tx, t_len, bits, rho).
    Design { budget: usize, seed: u64 },
    /// Load from a saved file; entries are rescaled to the run's power.
    File { path: PathBuf },
}

impl Default for CodebookSpec {
    fn default() -> Self {
        CodebookSpec::Design { budget: 2000, seed: 1 }
    }
}

/// Full description of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_tx: usize,
    pub t_len: usize,
    /// Training SNR, linear scale.
    pub rho: f64,
    /// Spatial correlation coefficient.
    pub a: f64,
    pub eta: EtaSource,
    pub bits: u32,
    pub blocks_per_iteration: usize,
    pub iterations: usize,
    pub strategy: StrategyKind,
    pub codebook: CodebookSpec,
    pub master_seed: u64,
    /// Re-draw the codebook index order each iteration (affects the cyclic
    /// open-loop schedule only; selection-based schemes scan all entries).
    pub shuffle_codebook: bool,
    pub convention: MomentConvention,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_tx: 16,
            t_len: 2,
            rho: 1.0,
            a: 0.9,
            eta: EtaSource::Direct { eta: 0.9881 },
            bits: 6,
            blocks_per_iteration: 10,
            iterations: 10_000,
            strategy: StrategyKind::OlSs,
            codebook: CodebookSpec::default(),
            master_seed: 1,
            shuffle_codebook: true,
            convention: MomentConvention::TraceOfSquare,
        }
    }
}

impl SimConfig {
    pub fn eta_value(&self) -> f64 {
        self.eta.value()
    }

    pub fn validate(&self) -> Result<()> {
        ChannelConfig {
            n_tx: self.n_tx,
            a: self.a,
            eta: self.eta_value(),
        }
        .validate()?;
        if self.t_len == 0 || self.t_len > self.n_tx {
            return Err(Error::Domain(format!(
                "training length {} must lie in 1..={}",
                self.t_len, self.n_tx
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Domain(format!(
                "training SNR must be positive and finite, got {}",
                self.rho
            )));
        }
        if self.blocks_per_iteration == 0 {
            return Err(Error::Domain("need at least one block per iteration".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Domain("need at least one iteration".into()));
        }
        if self.bits >= 30 {
            return Err(Error::Domain(format!(
                "codebook size 2^{} is not practical",
                self.bits
            )));
        }
        Ok(())
    }
}

/// Aggregated per-block results over all iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub block_index: usize,
    pub samples: usize,
    /// Mean realized SNR, linear scale.
    pub mean_gamma_lin: f64,
    pub gamma_stderr_lin: f64,
    /// 10·log10 of the linear mean (average first, convert once).
    pub mean_gamma_db: f64,
    /// Delta-method standard error of the dB value.
    pub gamma_stderr_db: f64,
    pub mean_mse: f64,
    pub mse_stderr: f64,
    /// Mean over iterations of the estimator's own posterior error trace
    /// divided by n_tx; a consistency reference for `mean_mse`.
    pub analytic_mse: f64,
    /// Iterations whose beamformer fell back to e_1 in this block.
    pub fallback_beams: usize,
}

/// Resolve the codebook a config needs, or None for the unquantized
/// reference strategies. Loaded or designed entries are rescaled so their
/// power matches the run's rho; the packing geometry is power-invariant.
pub fn resolve_codebook(cfg: &SimConfig) -> Result<Option<TrainingCodebook>> {
    if !cfg.strategy.uses_codebook() {
        return Ok(None);
    }
    let cb = match &cfg.codebook {
        CodebookSpec::Design { budget, seed } => {
            design_gsp(cfg.n_tx, cfg.t_len, cfg.bits, cfg.rho, *budget, *seed)?
        }
        CodebookSpec::File { path } => load_codebook(path)?,
    };
    if cb.n_tx != cfg.n_tx || cb.t_len != cfg.t_len || cb.bits != cfg.bits {
        return Err(Error::Format(format!(
            "codebook shape ({}, {}, {} bits) does not match run shape ({}, {}, {} bits)",
            cb.n_tx, cb.t_len, cb.bits, cfg.n_tx, cfg.t_len, cfg.bits
        )));
    }
    rescale_codebook(cb, cfg.rho)
}

fn rescale_codebook(cb: TrainingCodebook, rho: f64) -> Result<Option<TrainingCodebook>> {
    if (cb.rho - rho).abs() <= 1e-12 * rho {
        return Ok(Some(cb));
    }
    let factor = num_complex::Complex64::new((rho / cb.rho).sqrt(), 0.0);
    let entries = cb.entries().iter().map(|e| e.map(|z| z * factor)).collect();
    Ok(Some(TrainingCodebook::from_entries(
        cb.n_tx, cb.t_len, cb.bits, rho, cb.seed, entries,
    )?))
}

/// One training step whose operator was derived before any data arrived.
struct PlannedStep {
    op: CorrectionOperator,
    analytic_mse: f64,
}

/// How the per-iteration loop executes a strategy.
enum RunPlan {
    /// One static single-shot operator for every block.
    SingleShotStatic(PlannedStep),
    /// Single-shot operator per codebook entry, cycled (and shuffled).
    SingleShotCycle(Vec<PlannedStep>),
    /// Full per-block operator sequence known in advance.
    MemoryPlanned(Vec<PlannedStep>),
    /// Tracking estimator over the cycled codebook; covariances depend on
    /// the iteration's permutation, so operators are built per iteration.
    MemoryCycle,
    /// Selection reads the predicted mean, so it must run per iteration.
    MemorySnr,
}

struct RunContext<'a> {
    cfg: &'a SimConfig,
    eta: f64,
    channel: GaussMarkovChannel,
    codebook: Option<&'a TrainingCodebook>,
    plan: RunPlan,
    shuffle: bool,
}

fn planned_step(r_pred: &CMat, x: &CMat, n: usize) -> Result<PlannedStep> {
    let op = correction_operator(r_pred, x)?;
    let analytic_mse = trace_re(&op.r_corr) / n as f64;
    Ok(PlannedStep { op, analytic_mse })
}

fn build_plan(cfg: &SimConfig, cb: Option<&TrainingCodebook>, r: &CMat, eta: f64) -> Result<RunPlan> {
    let n = cfg.n_tx;
    match cfg.strategy {
        StrategyKind::ClSsFull => {
            let x = x_ss_opt(r, cfg.t_len, cfg.rho)?;
            Ok(RunPlan::SingleShotStatic(planned_step(r, &x, n)?))
        }
        StrategyKind::OlSs => {
            let cb = cb.expect("validated");
            let steps = cb
                .entries()
                .iter()
                .map(|x| planned_step(r, x, n))
                .collect::<Result<Vec<_>>>()?;
            Ok(RunPlan::SingleShotCycle(steps))
        }
        StrategyKind::ClMemMse | StrategyKind::ClMemFull => {
            let mut state = KalmanState::initial(r);
            let mut steps = Vec::with_capacity(cfg.blocks_per_iteration);
            for i in 0..cfg.blocks_per_iteration {
                if i > 0 {
                    state = kalman_predict(&state, eta, r);
                }
                let decision = match cfg.strategy {
                    StrategyKind::ClMemMse => select_min_mse(cb.expect("validated"), &state)?,
                    _ => select_full_feedback(&state, cfg.t_len, cfg.rho)?,
                };
                let step = planned_step(&state.r_pred, &decision.x, n)?;
                state.r_corr = step.op.r_corr.clone();
                steps.push(step);
            }
            Ok(RunPlan::MemoryPlanned(steps))
        }
        StrategyKind::OlMem => Ok(RunPlan::MemoryCycle),
        StrategyKind::ClMemSnr => Ok(RunPlan::MemorySnr),
    }
}

struct BlockRecord {
    gamma: f64,
    mse: f64,
    analytic: f64,
    fallback: bool,
}

fn record_block(
    h: &CVec,
    estimate: &CVec,
    analytic: f64,
    n: usize,
) -> BlockRecord {
    let (w, fallback) = beamformer(estimate);
    let gamma = realized_snr(h, &w);
    let mse = (h - estimate).norm_squared() / n as f64;
    BlockRecord { gamma, mse, analytic, fallback }
}

fn iteration_permutation(ctx: &RunContext, iter: u64) -> Option<Vec<usize>> {
    let cb = ctx.codebook?;
    if !ctx.shuffle {
        return None;
    }
    let mut perm: Vec<usize> = (0..cb.len()).collect();
    let mut rng = block_stream(ctx.cfg.master_seed, iter, 0, StreamPurpose::Shuffle);
    perm.shuffle(&mut rng);
    Some(perm)
}

fn simulate_iteration(ctx: &RunContext, iter: u64) -> Result<Vec<BlockRecord>> {
    let cfg = ctx.cfg;
    let n = cfg.n_tx;
    let blocks = cfg.blocks_per_iteration;
    let seed = cfg.master_seed;
    let mut rng_init = block_stream(seed, iter, 0, StreamPurpose::ChannelInit);
    let mut chan = ctx.channel.init_block(&mut rng_init);
    let perm = iteration_permutation(ctx, iter);
    let cycle_index = |i: usize| -> usize {
        let len = ctx.codebook.map_or(1, TrainingCodebook::len);
        let base = i % len;
        perm.as_ref().map_or(base, |p| p[base])
    };
    let mut records = Vec::with_capacity(blocks);

    match &ctx.plan {
        RunPlan::SingleShotStatic(step) => {
            let zero = CVec::zeros(n);
            for i in 0..blocks {
                if i > 0 {
                    let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::ChannelEvolve);
                    chan = ctx.channel.evolve_block(&chan, &mut rng);
                }
                let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::Noise);
                let obs = observe(&step.op.x, &chan.h, &mut rng)?;
                let estimate = apply_correction(&step.op, &zero, &obs.y);
                records.push(record_block(&chan.h, &estimate, step.analytic_mse, n));
            }
        }
        RunPlan::SingleShotCycle(steps) => {
            let zero = CVec::zeros(n);
            for i in 0..blocks {
                if i > 0 {
                    let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::ChannelEvolve);
                    chan = ctx.channel.evolve_block(&chan, &mut rng);
                }
                let step = &steps[cycle_index(i)];
                let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::Noise);
                let obs = observe(&step.op.x, &chan.h, &mut rng)?;
                let estimate = apply_correction(&step.op, &zero, &obs.y);
                records.push(record_block(&chan.h, &estimate, step.analytic_mse, n));
            }
        }
        RunPlan::MemoryPlanned(steps) => {
            let mut h_corr = CVec::zeros(n);
            for (i, step) in steps.iter().enumerate() {
                if i > 0 {
                    let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::ChannelEvolve);
                    chan = ctx.channel.evolve_block(&chan, &mut rng);
                }
                let h_pred = if i == 0 {
                    CVec::zeros(n)
                } else {
                    h_corr.map(|z| z * ctx.eta)
                };
                let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::Noise);
                let obs = observe(&step.op.x, &chan.h, &mut rng)?;
                h_corr = apply_correction(&step.op, &h_pred, &obs.y);
                records.push(record_block(&chan.h, &h_corr, step.analytic_mse, n));
            }
        }
        RunPlan::MemoryCycle | RunPlan::MemorySnr => {
            let r = ctx.channel.correlation();
            let mut state = KalmanState::initial(r);
            for i in 0..blocks {
                if i > 0 {
                    let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::ChannelEvolve);
                    chan = ctx.channel.evolve_block(&chan, &mut rng);
                    state = kalman_predict(&state, ctx.eta, r);
                }
                let x = match &ctx.plan {
                    RunPlan::MemoryCycle => {
                        ctx.codebook.expect("validated").entry(cycle_index(i)).clone()
                    }
                    _ => {
                        let cb = ctx.codebook.expect("validated");
                        select_max_snr(cb, &state, cfg.convention)?.x
                    }
                };
                let mut rng = block_stream(seed, iter, i as u64, StreamPurpose::Noise);
                let obs = observe(&x, &chan.h, &mut rng)?;
                state = kalman_correct(&state, &obs)?;
                let analytic = trace_re(&state.r_corr) / n as f64;
                records.push(record_block(&chan.h, &state.h_corr, analytic, n));
            }
        }
    }
    Ok(records)
}

fn aggregate(cfg: &SimConfig, all: Vec<Vec<BlockRecord>>) -> Vec<BlockMetrics> {
    let n_iter = all.len();
    let blocks = cfg.blocks_per_iteration;
    let mut out = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let mut sum_g = 0.0f64;
        let mut sum_m = 0.0f64;
        let mut sum_a = 0.0f64;
        let mut fallback = 0usize;
        for rec in &all {
            sum_g += rec[b].gamma;
            sum_m += rec[b].mse;
            sum_a += rec[b].analytic;
            fallback += rec[b].fallback as usize;
        }
        let mean_g = sum_g / n_iter as f64;
        let mean_m = sum_m / n_iter as f64;
        let mut var_g = 0.0f64;
        let mut var_m = 0.0f64;
        for rec in &all {
            var_g += (rec[b].gamma - mean_g).powi(2);
            var_m += (rec[b].mse - mean_m).powi(2);
        }
        let denom = (n_iter.max(2) - 1) as f64;
        let se_g = (var_g / denom / n_iter as f64).sqrt();
        let se_m = (var_m / denom / n_iter as f64).sqrt();
        let (db, se_db) = if mean_g > 0.0 {
            (10.0 * mean_g.log10(), 10.0 / std::f64::consts::LN_10 * se_g / mean_g)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        out.push(BlockMetrics {
            block_index: b,
            samples: n_iter,
            mean_gamma_lin: mean_g,
            gamma_stderr_lin: se_g,
            mean_gamma_db: db,
            gamma_stderr_db: se_db,
            mean_mse: mean_m,
            mse_stderr: se_m,
            analytic_mse: sum_a / n_iter as f64,
            fallback_beams: fallback,
        });
    }
    out
}

/// Run a config end to end, resolving its codebook first.
pub fn run(cfg: &SimConfig) -> Result<Vec<BlockMetrics>> {
    let cb = resolve_codebook(cfg)?;
    run_prepared(cfg, cb.as_ref(), None)
}

/// Run with an explicit worker count (None = caller's rayon context).
pub fn run_with_workers(cfg: &SimConfig, workers: Option<usize>) -> Result<Vec<BlockMetrics>> {
    let cb = resolve_codebook(cfg)?;
    run_prepared(cfg, cb.as_ref(), workers)
}

/// Core engine: the codebook is already resolved (None only for the
/// unquantized reference strategies).
pub fn run_prepared(
    cfg: &SimConfig,
    codebook: Option<&TrainingCodebook>,
    workers: Option<usize>,
) -> Result<Vec<BlockMetrics>> {
    cfg.validate()?;
    if cfg.strategy.uses_codebook() && codebook.is_none() {
        return Err(Error::Domain(format!(
            "strategy {} needs a codebook",
            cfg.strategy.name()
        )));
    }
    let eta = cfg.eta_value();
    let channel = GaussMarkovChannel::new(ChannelConfig {
        n_tx: cfg.n_tx,
        a: cfg.a,
        eta,
    })?;
    let plan = build_plan(cfg, codebook, channel.correlation(), eta)?;
    let ctx = RunContext {
        cfg,
        eta,
        channel,
        codebook,
        plan,
        shuffle: cfg.shuffle_codebook,
    };

    let body = || -> Result<Vec<Vec<BlockRecord>>> {
        (0..cfg.iterations as u64)
            .into_par_iter()
            .map(|iter| simulate_iteration(&ctx, iter))
            .collect()
    };
    let all = match workers {
        Some(count) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(count.max(1))
                .build()
                .map_err(|e| Error::Domain(format!("worker pool: {e}")))?;
            pool.install(body)?
        }
        None => body()?,
    };
    Ok(aggregate(cfg, all))
}

/// Parameter axis a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NTx,
    Rho,
    A,
    TLen,
    Bits,
    Strategy,
    Eta,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "n_tx" => SweepAxis::NTx,
            "rho" => SweepAxis::Rho,
            "a" => SweepAxis::A,
            "t_len" => SweepAxis::TLen,
            "bits" => SweepAxis::Bits,
            "strategy" => SweepAxis::Strategy,
            "eta" => SweepAxis::Eta,
            other => return Err(Error::Format(format!("unknown sweep axis {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::NTx => "n_tx",
            SweepAxis::Rho => "rho",
            SweepAxis::A => "a",
            SweepAxis::TLen => "t_len",
            SweepAxis::Bits => "bits",
            SweepAxis::Strategy => "strategy",
            SweepAxis::Eta => "eta",
        }
    }
}

/// One value along a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    Num(f64),
    Strategy(StrategyKind),
}

/// One completed run within a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: SimConfig,
    pub metrics: Vec<BlockMetrics>,
}

fn apply_axis(base: &SimConfig, axis: SweepAxis, value: &AxisValue) -> Result<SimConfig> {
    let mut cfg = base.clone();
    let num = |v: &AxisValue| -> Result<f64> {
        match v {
            AxisValue::Num(x) => Ok(*x),
            AxisValue::Strategy(_) => Err(Error::Format(format!(
                "axis {} takes numeric values",
                axis.name()
            ))),
        }
    };
    let integer = |v: &AxisValue| -> Result<u64> {
        let x = num(v)?;
        if x.fract() != 0.0 || x < 0.0 {
            return Err(Error::Format(format!(
                "axis {} takes nonnegative integers, got {x}",
                axis.name()
            )));
        }
        Ok(x as u64)
    };
    match axis {
        SweepAxis::NTx => cfg.n_tx = integer(value)? as usize,
        SweepAxis::Rho => cfg.rho = num(value)?,
        SweepAxis::A => cfg.a = num(value)?,
        SweepAxis::TLen => cfg.t_len = integer(value)? as usize,
        SweepAxis::Bits => cfg.bits = integer(value)? as u32,
        SweepAxis::Eta => cfg.eta = EtaSource::Direct { eta: num(value)? },
        SweepAxis::Strategy => match value {
            AxisValue::Strategy(s) => cfg.strategy = *s,
            AxisValue::Num(_) => {
                return Err(Error::Format("axis strategy takes strategy names".into()))
            }
        },
    }
    Ok(cfg)
}

/// Run the base config once per axis value. Codebooks are designed once
/// per shape and rescaled when only the power differs.
pub fn run_sweep(
    base: &SimConfig,
    axis: SweepAxis,
    values: &[AxisValue],
    workers: Option<usize>,
) -> Result<Vec<SweepRow>> {
    use std::collections::HashMap;
    let mut cache: HashMap<(usize, usize, u32), TrainingCodebook> = HashMap::new();
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let cfg = apply_axis(base, axis, value)?;
        cfg.validate()?;
        let cb = if cfg.strategy.uses_codebook() {
            let key = (cfg.n_tx, cfg.t_len, cfg.bits);
            let cached = match cache.get(&key) {
                Some(cb) => cb.clone(),
                None => {
                    let cb = match &cfg.codebook {
                        CodebookSpec::Design { budget, seed } => {
                            design_gsp(cfg.n_tx, cfg.t_len, cfg.bits, cfg.rho, *budget, *seed)?
                        }
                        CodebookSpec::File { path } => load_codebook(path)?,
                    };
                    cache.insert(key, cb.clone());
                    cb
                }
            };
            rescale_codebook(cached, cfg.rho)?
        } else {
            None
        };
        let metrics = run_prepared(&cfg, cb.as_ref(), workers)?;
        rows.push(SweepRow { config: cfg, metrics });
    }
    Ok(rows)
}
