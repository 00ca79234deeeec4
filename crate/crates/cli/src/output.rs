//! Result emission: long-format CSV tables and JSON run manifests.
//!
//! The CSV schema is fixed and versioned through the manifest. Floats are
//! printed with 12 significant digits, lines end with `\n`, the decimal
//! separator is always `.`. Optional analytic bound columns are appended
//! after the base schema so downstream readers keyed to the base columns
//! stay valid.

use anyhow::{Context, Result};
use mimotrain::channel::exponential_correlation;
use mimotrain::estimation::{snr_ceiling_bound_exp, snr_upper_bound_ss};
use mimotrain::simulator::{BlockMetrics, SimConfig};
use serde::{Deserialize, Serialize};

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FORMAT: &str = "mimotrain-run-manifest";
pub const MANIFEST_VERSION: u32 = 1;

pub const BASE_COLUMNS: [&str; 13] = [
    "strategy",
    "block",
    "n_tx",
    "t_len",
    "rho_db",
    "a",
    "eta",
    "bits",
    "gamma_db",
    "gamma_stderr",
    "mse",
    "mse_stderr",
    "samples",
];

/// Appended when bound emission is on: the single-shot SNR upper bound for
/// the run's correlation and the antenna-count-independent ceiling.
pub const BOUND_COLUMNS: [&str; 2] = ["gamma_bound_db", "gamma_ceiling_db"];

/// 12 significant digits, locale-independent.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn lin_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Both analytic bounds for a config, in dB.
pub fn bound_columns_db(cfg: &SimConfig) -> Result<(f64, f64)> {
    let r = exponential_correlation(cfg.n_tx, cfg.a)?;
    let bound = snr_upper_bound_ss(&r, cfg.t_len, cfg.rho)?;
    let ceiling = snr_ceiling_bound_exp(cfg.t_len, cfg.a)?;
    Ok((lin_to_db(bound), lin_to_db(ceiling)))
}

pub fn csv_columns(with_bounds: bool) -> Vec<&'static str> {
    let mut cols: Vec<&'static str> = BASE_COLUMNS.to_vec();
    if with_bounds {
        cols.extend_from_slice(&BOUND_COLUMNS);
    }
    cols
}

/// Accumulates result rows for any number of runs into one CSV text.
pub struct CsvTable {
    with_bounds: bool,
    text: String,
    rows: usize,
}

impl CsvTable {
    pub fn new(with_bounds: bool) -> Self {
        let mut text = csv_columns(with_bounds).join(",");
        text.push('\n');
        Self { with_bounds, text, rows: 0 }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn push_run(&mut self, cfg: &SimConfig, metrics: &[BlockMetrics]) -> Result<()> {
        let bounds = if self.with_bounds {
            Some(bound_columns_db(cfg).context("computing bound columns")?)
        } else {
            None
        };
        let rho_db = lin_to_db(cfg.rho);
        let eta = cfg.eta_value();
        for m in metrics {
            let mut fields = vec![
                cfg.strategy.name().to_string(),
                m.block_index.to_string(),
                cfg.n_tx.to_string(),
                cfg.t_len.to_string(),
                fmt_float(rho_db),
                fmt_float(cfg.a),
                fmt_float(eta),
                cfg.bits.to_string(),
                fmt_float(m.mean_gamma_db),
                fmt_float(m.gamma_stderr_db),
                fmt_float(m.mean_mse),
                fmt_float(m.mse_stderr),
                m.samples.to_string(),
            ];
            if let Some((bound_db, ceiling_db)) = bounds {
                fields.push(fmt_float(bound_db));
                fields.push(fmt_float(ceiling_db));
            }
            self.text.push_str(&fields.join(","));
            self.text.push('\n');
            self.rows += 1;
        }
        Ok(())
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// One run within a manifest: the fully resolved config plus the temporal
/// coefficient it resolves to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub config: SimConfig,
    pub resolved_eta: f64,
}

/// Sidecar record of everything needed to reproduce a CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub command: String,
    pub preset: Option<String>,
    pub workers: Option<usize>,
    pub wall_time_s: f64,
    pub csv_path: String,
    pub csv_schema_version: u32,
    pub csv_columns: Vec<String>,
    pub runs: Vec<ManifestRun>,
}

impl RunManifest {
    pub fn new(command: &str, preset: Option<&str>, with_bounds: bool, csv_path: &str) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            preset: preset.map(str::to_string),
            workers: None,
            wall_time_s: 0.0,
            csv_path: csv_path.into(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            csv_columns: csv_columns(with_bounds).iter().map(|s| s.to_string()).collect(),
            runs: Vec::new(),
        }
    }

    pub fn push(&mut self, cfg: &SimConfig) {
        self.runs.push(ManifestRun { config: cfg.clone(), resolved_eta: cfg.eta_value() });
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
