//! `mimotrain` command-line front end.
//!
//! Subcommands: `run` (one config or a named preset), `sweep` (one axis,
//! many values), `codebook design|inspect`, `verify` (analytic cross-check
//! suite). Results go to a long-format CSV plus a JSON manifest recording
//! the fully resolved configs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

pub mod output;
pub mod presets;
pub mod verify;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mimotrain::codebook::{design_gsp, load_codebook, save_codebook, TrainingCodebook};
use mimotrain::simulator::{
    run_prepared, run_sweep, AxisValue, CodebookSpec, EtaSource, SimConfig, SweepAxis,
};
use mimotrain::strategies::{MomentConvention, StrategyKind};
use num_complex::Complex64;
use serde::Deserialize;

use output::{db_to_lin, lin_to_db, CsvTable, RunManifest};

/// Worker-count override honored when neither the flag nor the config file
/// sets one.
pub const WORKERS_ENV: &str = "MIMOTRAIN_WORKERS";

#[derive(Parser)]
#[command(
    name = "mimotrain",
    version,
    about = "Downlink training strategy simulator for spatially and temporally correlated channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration or a named preset; write CSV + manifest.
    Run(RunArgs),
    /// Run a one-axis parameter sweep; write CSV + manifest.
    Sweep(SweepArgs),
    /// Design or inspect shared training codebooks.
    Codebook {
        #[command(subcommand)]
        action: CodebookCmd,
    },
    /// Run the analytic cross-check suite and print a pass/fail table.
    Verify(VerifyArgs),
}

/// Flags shared by `run` and `sweep`. Every value falls back to the config
/// file (if given), then to the baseline protocol defaults.
#[derive(Args, Default)]
struct CommonArgs {
    /// Flat JSON config file; explicit flags take precedence over its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transmit antennas [default: 16]
    #[arg(long)]
    n_tx: Option<usize>,
    /// Training symbols per block [default: 2]
    #[arg(long)]
    t_len: Option<usize>,
    /// Training SNR in dB [default: 0]
    #[arg(long)]
    rho_db: Option<f64>,
    /// Spatial correlation coefficient in [0, 1) [default: 0.9]
    #[arg(long)]
    a: Option<f64>,
    /// Temporal coefficient, set directly (otherwise derived from mobility)
    #[arg(long, conflicts_with_all = ["v_kmh", "f_c_hz", "tau_s"])]
    eta: Option<f64>,
    /// Terminal speed in km/h [default: 3]
    #[arg(long)]
    v_kmh: Option<f64>,
    /// Carrier frequency in Hz [default: 2.5e9]
    #[arg(long)]
    f_c_hz: Option<f64>,
    /// Block spacing in seconds [default: 5e-3]
    #[arg(long)]
    tau_s: Option<f64>,
    /// Training strategy: ol_ss, ol_mem, cl_mem_mse, cl_mem_snr, cl_ss_full,
    /// cl_mem_full [default: ol_ss]
    #[arg(long)]
    strategy: Option<String>,
    /// Feedback bits per block (codebook holds 2^bits entries) [default: 6]
    #[arg(long)]
    bits: Option<u32>,
    /// Fading blocks per iteration [default: 10]
    #[arg(long)]
    blocks: Option<usize>,
    /// Monte Carlo iterations [default: 10000]
    #[arg(long)]
    iterations: Option<usize>,
    /// Master seed [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Keep the codebook schedule in index order instead of reshuffling it
    /// each iteration.
    #[arg(long)]
    no_shuffle: bool,
    /// Variance convention in the SNR objective: trace_of_square or
    /// square_of_trace [default: trace_of_square]
    #[arg(long)]
    convention: Option<String>,
    /// Load the codebook from a file instead of designing one.
    #[arg(long, conflicts_with_all = ["budget", "codebook_seed"])]
    codebook_file: Option<PathBuf>,
    /// Refinement budget when designing the codebook [default: 2000]
    #[arg(long)]
    budget: Option<usize>,
    /// Design seed when designing the codebook [default: 1]
    #[arg(long)]
    codebook_seed: Option<u64>,
    /// Worker thread count (otherwise MIMOTRAIN_WORKERS, otherwise all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Named preset; expands to a fixed list of configs (see --list-presets).
    /// Only --iterations, --seed, --budget, --codebook-seed, --no-shuffle and
    /// --workers may be combined with it.
    #[arg(long, conflicts_with_all = [
        "config", "n_tx", "t_len", "rho_db", "a", "eta", "v_kmh", "f_c_hz",
        "tau_s", "strategy", "bits", "blocks", "convention", "codebook_file",
    ])]
    preset: Option<String>,
    /// List the available presets and exit.
    #[arg(long)]
    list_presets: bool,
    #[command(flatten)]
    common: CommonArgs,
    /// Append the analytic single-shot bound and ceiling columns to the CSV.
    #[arg(long)]
    bounds: bool,
    /// CSV output path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Manifest path [default: <out> with a .manifest.json extension]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Axis to vary: n_tx, t_len, rho_db, a, eta, bits, strategy.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values (strategy names for --axis strategy).
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Append the analytic single-shot bound and ceiling columns to the CSV.
    #[arg(long)]
    bounds: bool,
    /// CSV output path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Manifest path [default: <out> with a .manifest.json extension]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CodebookCmd {
    /// Design a codebook and save it to a file.
    Design(CodebookDesignArgs),
    /// Load a codebook file, revalidate its invariants, print a summary.
    Inspect {
        file: PathBuf,
    },
}

#[derive(Args)]
struct CodebookDesignArgs {
    #[arg(long)]
    n_tx: usize,
    #[arg(long)]
    t_len: usize,
    #[arg(long)]
    bits: u32,
    /// Training SNR baked into the entries; runs rescale as needed.
    #[arg(long, default_value_t = 0.0)]
    rho_db: f64,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single named check.
    #[arg(long, value_parser = verify::CHECK_NAMES)]
    only: Option<String>,
    /// Tighten the exact-arithmetic tolerances by 10x. The Monte Carlo
    /// approximation gate keeps its threshold; the variance-convention
    /// spread stays a warning.
    #[arg(long)]
    strict: bool,
}

/// Flat key-value config file; keys mirror the flag names.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n_tx: Option<usize>,
    t_len: Option<usize>,
    rho_db: Option<f64>,
    a: Option<f64>,
    eta: Option<f64>,
    v_kmh: Option<f64>,
    f_c_hz: Option<f64>,
    tau_s: Option<f64>,
    strategy: Option<String>,
    bits: Option<u32>,
    blocks: Option<usize>,
    iterations: Option<usize>,
    seed: Option<u64>,
    shuffle: Option<bool>,
    convention: Option<String>,
    codebook_file: Option<PathBuf>,
    budget: Option<usize>,
    codebook_seed: Option<u64>,
    workers: Option<usize>,
}

fn parse_strategy(name: &str) -> Result<StrategyKind> {
    StrategyKind::parse(&name.replace('-', "_")).map_err(|_| {
        anyhow!(
            "unknown strategy {name:?}; expected one of {}",
            StrategyKind::ALL.map(|k| k.name()).join(", ")
        )
    })
}

fn parse_convention(name: &str) -> Result<MomentConvention> {
    match name.replace('-', "_").as_str() {
        "trace_of_square" => Ok(MomentConvention::TraceOfSquare),
        "square_of_trace" => Ok(MomentConvention::SquareOfTrace),
        _ => bail!("unknown convention {name:?}; expected trace_of_square or square_of_trace"),
    }
}

fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let file: FileConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config file {}", path.display()))?;
    if file.eta.is_some()
        && (file.v_kmh.is_some() || file.f_c_hz.is_some() || file.tau_s.is_some())
    {
        bail!(
            "config file {} sets both eta and mobility parameters",
            path.display()
        );
    }
    Ok(file)
}

/// Merge CLI flags over config-file keys over protocol defaults.
fn resolve_config(c: &CommonArgs) -> Result<(SimConfig, Option<usize>)> {
    let file = load_file_config(c.config.as_ref())?;

    let eta = if let Some(e) = c.eta {
        EtaSource::Direct { eta: e }
    } else if c.v_kmh.is_some() || c.f_c_hz.is_some() || c.tau_s.is_some() {
        EtaSource::Jakes {
            v_kmh: c.v_kmh.or(file.v_kmh).unwrap_or(3.0),
            f_c_hz: c.f_c_hz.or(file.f_c_hz).unwrap_or(2.5e9),
            tau_s: c.tau_s.or(file.tau_s).unwrap_or(5e-3),
        }
    } else if let Some(e) = file.eta {
        EtaSource::Direct { eta: e }
    } else {
        EtaSource::Jakes {
            v_kmh: file.v_kmh.unwrap_or(3.0),
            f_c_hz: file.f_c_hz.unwrap_or(2.5e9),
            tau_s: file.tau_s.unwrap_or(5e-3),
        }
    };

    let strategy = match c.strategy.as_deref().or(file.strategy.as_deref()) {
        Some(s) => parse_strategy(s)?,
        None => StrategyKind::OlSs,
    };
    let convention = match c.convention.as_deref().or(file.convention.as_deref()) {
        Some(s) => parse_convention(s)?,
        None => MomentConvention::TraceOfSquare,
    };

    let codebook = if let Some(path) = c.codebook_file.clone() {
        CodebookSpec::File { path }
    } else if c.budget.is_some() || c.codebook_seed.is_some() {
        CodebookSpec::Design {
            budget: c.budget.or(file.budget).unwrap_or(2000),
            seed: c.codebook_seed.or(file.codebook_seed).unwrap_or(1),
        }
    } else if let Some(path) = file.codebook_file.clone() {
        CodebookSpec::File { path }
    } else {
        CodebookSpec::Design {
            budget: file.budget.unwrap_or(2000),
            seed: file.codebook_seed.unwrap_or(1),
        }
    };

    let shuffle = if c.no_shuffle { false } else { file.shuffle.unwrap_or(true) };

    let cfg = SimConfig {
        n_tx: c.n_tx.or(file.n_tx).unwrap_or(16),
        t_len: c.t_len.or(file.t_len).unwrap_or(2),
        rho: db_to_lin(c.rho_db.or(file.rho_db).unwrap_or(0.0)),
        a: c.a.or(file.a).unwrap_or(0.9),
        eta,
        bits: c.bits.or(file.bits).unwrap_or(6),
        blocks_per_iteration: c.blocks.or(file.blocks).unwrap_or(10),
        iterations: c.iterations.or(file.iterations).unwrap_or(10_000),
        strategy,
        codebook,
        master_seed: c.seed.or(file.seed).unwrap_or(1),
        shuffle_codebook: shuffle,
        convention,
    };
    let workers = resolve_workers(c.workers, file.workers)?;
    Ok((cfg, workers))
}

fn resolve_workers(flag: Option<usize>, file: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if file.is_some() {
        return Ok(file);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(s) => {
            let n: usize = s
                .trim()
                .parse()
                .with_context(|| format!("parsing {WORKERS_ENV}={s:?}"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Design-or-load with a per-shape cache so presets sharing a geometry pay
/// for one design; entries rescale to each run's power.
fn prepare_codebook(
    cfg: &SimConfig,
    cache: &mut HashMap<(usize, usize, u32), TrainingCodebook>,
) -> Result<Option<TrainingCodebook>> {
    if !cfg.strategy.uses_codebook() {
        return Ok(None);
    }
    let key = (cfg.n_tx, cfg.t_len, cfg.bits);
    let cb = match cache.get(&key) {
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
    if cb.n_tx != cfg.n_tx || cb.t_len != cfg.t_len || cb.bits != cfg.bits {
        bail!(
            "codebook shape ({}, {}, {} bits) does not match run shape ({}, {}, {} bits)",
            cb.n_tx,
            cb.t_len,
            cb.bits,
            cfg.n_tx,
            cfg.t_len,
            cfg.bits
        );
    }
    if (cb.rho - cfg.rho).abs() <= 1e-12 * cfg.rho {
        return Ok(Some(cb));
    }
    let factor = Complex64::new((cfg.rho / cb.rho).sqrt(), 0.0);
    let entries = cb.entries().iter().map(|e| e.map(|z| z * factor)).collect();
    Ok(Some(TrainingCodebook::from_entries(
        cb.n_tx, cb.t_len, cb.bits, cfg.rho, cb.seed, entries,
    )?))
}

fn manifest_path(out: &PathBuf, explicit: Option<&PathBuf>) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => out.with_extension("manifest.json"),
    }
}

fn write_outputs(
    out: &PathBuf,
    manifest_file: &PathBuf,
    table: CsvTable,
    manifest: &RunManifest,
) -> Result<()> {
    let rows = table.rows();
    fs::write(out, table.into_string())
        .with_context(|| format!("writing {}", out.display()))?;
    fs::write(manifest_file, manifest.to_json()?)
        .with_context(|| format!("writing {}", manifest_file.display()))?;
    println!(
        "wrote {rows} rows to {} (manifest {}) in {:.1}s",
        out.display(),
        manifest_file.display(),
        manifest.wall_time_s
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    if args.list_presets {
        for name in presets::PRESET_NAMES {
            let p = presets::preset(name).expect("listed preset exists");
            println!("{:6} {:3} configs  {}", p.name, p.configs.len(), p.description);
        }
        return Ok(0);
    }

    let t0 = Instant::now();
    let (configs, preset_name, with_bounds, workers) = match &args.preset {
        Some(name) => {
            let p = presets::preset(name)
                .ok_or_else(|| anyhow!("unknown preset {name:?}; try --list-presets"))?;
            let mut cfgs = p.configs;
            for cfg in &mut cfgs {
                if let Some(it) = args.common.iterations {
                    cfg.iterations = it;
                }
                if let Some(s) = args.common.seed {
                    cfg.master_seed = s;
                }
                if args.common.no_shuffle {
                    cfg.shuffle_codebook = false;
                }
                if let CodebookSpec::Design { budget, seed } = &mut cfg.codebook {
                    if let Some(b) = args.common.budget {
                        *budget = b;
                    }
                    if let Some(s) = args.common.codebook_seed {
                        *seed = s;
                    }
                }
            }
            let workers = resolve_workers(args.common.workers, None)?;
            (cfgs, Some(name.clone()), p.with_bounds || args.bounds, workers)
        }
        None => {
            let (cfg, workers) = resolve_config(&args.common)?;
            (vec![cfg], None, args.bounds, workers)
        }
    };

    let manifest_file = manifest_path(&args.out, args.manifest.as_ref());
    let mut table = CsvTable::new(with_bounds);
    let mut manifest = RunManifest::new(
        "run",
        preset_name.as_deref(),
        with_bounds,
        &args.out.display().to_string(),
    );
    manifest.workers = workers;

    let mut cache = HashMap::new();
    for cfg in &configs {
        cfg.validate()?;
        let cb = prepare_codebook(cfg, &mut cache)?;
        let metrics = run_prepared(cfg, cb.as_ref(), workers)?;
        table.push_run(cfg, &metrics)?;
        manifest.push(cfg);
    }
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    write_outputs(&args.out, &manifest_file, table, &manifest)?;
    Ok(0)
}

fn parse_axis(name: &str) -> Result<(SweepAxis, bool)> {
    let normalized = name.replace('-', "_");
    match normalized.as_str() {
        "rho_db" => Ok((SweepAxis::Rho, true)),
        "rho" => bail!("axis rho takes dB values on the command line; use rho_db"),
        other => Ok((SweepAxis::parse(other)?, false)),
    }
}

fn parse_axis_values(axis: SweepAxis, in_db: bool, raw: &[String]) -> Result<Vec<AxisValue>> {
    raw.iter()
        .map(|s| {
            let s = s.trim();
            if axis == SweepAxis::Strategy {
                Ok(AxisValue::Strategy(parse_strategy(s)?))
            } else {
                let v: f64 = s
                    .parse()
                    .with_context(|| format!("parsing axis value {s:?}"))?;
                Ok(AxisValue::Num(if in_db { db_to_lin(v) } else { v }))
            }
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let t0 = Instant::now();
    let (base, workers) = resolve_config(&args.common)?;
    let (axis, in_db) = parse_axis(&args.axis)?;
    let values = parse_axis_values(axis, in_db, &args.values)?;
    if values.is_empty() {
        bail!("no axis values given");
    }

    let rows = run_sweep(&base, axis, &values, workers)?;

    let manifest_file = manifest_path(&args.out, args.manifest.as_ref());
    let mut table = CsvTable::new(args.bounds);
    let mut manifest = RunManifest::new(
        "sweep",
        None,
        args.bounds,
        &args.out.display().to_string(),
    );
    manifest.workers = workers;
    for row in &rows {
        table.push_run(&row.config, &row.metrics)?;
        manifest.push(&row.config);
    }
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    write_outputs(&args.out, &manifest_file, table, &manifest)?;
    Ok(0)
}

fn cmd_codebook(action: CodebookCmd) -> Result<i32> {
    match action {
        CodebookCmd::Design(a) => {
            let rho = db_to_lin(a.rho_db);
            let cb = design_gsp(a.n_tx, a.t_len, a.bits, rho, a.budget, a.seed)?;
            save_codebook(&cb, &a.out)?;
            println!(
                "designed {} entries ({} x {}, {} bits, rho {} dB, seed {}); \
                 min chordal distance {:.6}; saved to {}",
                cb.len(),
                cb.n_tx,
                cb.t_len,
                cb.bits,
                a.rho_db,
                cb.seed,
                cb.min_chordal(),
                a.out.display()
            );
        }
        CodebookCmd::Inspect { file } => {
            let cb = load_codebook(&file)
                .with_context(|| format!("inspecting {}", file.display()))?;
            println!("file:         {}", file.display());
            println!("n_tx:         {}", cb.n_tx);
            println!("t_len:        {}", cb.t_len);
            println!("bits:         {} ({} entries)", cb.bits, cb.len());
            println!("rho:          {} ({} dB)", cb.rho, lin_to_db(cb.rho));
            println!("design seed:  {}", cb.seed);
            println!("min chordal:  {}", cb.min_chordal());
            println!("all invariants hold");
        }
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let reports = verify::run_checks(args.only.as_deref(), args.strict)?;
    if reports.is_empty() {
        bail!("no checks selected");
    }
    println!("{:<12} {:<6} detail", "check", "result");
    let mut failures = 0;
    for r in &reports {
        println!(
            "{:<12} {:<6} {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        for w in &r.warnings {
            println!("{:<12} {:<6} warning: {}", "", "", w);
        }
        if !r.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} of {} checks failed", reports.len());
        return Ok(1);
    }
    println!("all {} checks passed", reports.len());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Codebook { action } => cmd_codebook(action),
        Command::Verify(args) => cmd_verify(args),
    }
}

/// Parse and execute; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
