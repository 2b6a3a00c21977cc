//! Result rows, the CSV schema and the JSON sidecar.
//!
//! Floats are written in shortest round-trip form; non-finite values appear
//! as `inf`, `-inf` or `NaN`. Optional columns are empty when absent.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crnsim_core::episode::{DetectorMode, PrecoderMode};
use serde::Serialize;

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::{CliError, Result};

/// Bumped whenever a column is added, removed, renamed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Episode,
    Mean,
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub fingerprint: String,
    pub row_kind: RowKind,
    pub seed: u64,
    pub episode: Option<usize>,
    pub m_p: usize,
    pub m_s: usize,
    pub snr_db: f64,
    pub pilot_symbols: Option<usize>,
    pub location: Option<usize>,
    pub precoder: PrecoderMode,
    pub detector: DetectorMode,
    pub sir_target_db: Option<f64>,
    pub margin_db: Option<f64>,
    pub secondary_power: f64,
    pub beta_tx_db: f64,
    pub beta_rx_db: Option<f64>,
    pub evm_db: f64,
    pub sir_db_0: Option<f64>,
    pub sir_db_1: Option<f64>,
    pub sir_db_2: Option<f64>,
    pub gamma: f64,
    pub throughput_bps: f64,
    pub primary_evm_db_0: Option<f64>,
    pub primary_evm_db_1: Option<f64>,
    pub primary_evm_off_db_0: Option<f64>,
    pub primary_evm_off_db_1: Option<f64>,
    pub primary_evm_degradation_db: f64,
    pub residual_interference: f64,
    pub payload_ber: f64,
    pub max_symbol_error: f64,
}

/// Column name, type and meaning, in CSV order.
pub const COLUMNS: &[(&str, &str, &str)] = &[
    ("experiment", "string", "experiment kind"),
    ("fingerprint", "string", "first 16 hex digits of SHA-256 over the axis point's scenario with seed 0"),
    ("row_kind", "string", "episode, or mean/min/max over the episodes of one axis point"),
    ("seed", "u64", "episode seed; master seed on summary rows"),
    ("episode", "u64?", "episode index; empty on summary rows"),
    ("m_p", "u64", "primary antennas"),
    ("m_s", "u64", "secondary antennas"),
    ("snr_db", "f64", "overhearing and data SNR"),
    ("pilot_symbols", "u64?", "pilot symbols per frame (convergence)"),
    ("location", "u64?", "location index (location_sweep)"),
    ("precoder", "string", "bbf, ebf, ibf or uniform"),
    ("detector", "string", "bic or zf"),
    ("sir_target_db", "f64?", "requested per-antenna SIR at SU 2 (detector_compare)"),
    ("margin_db", "f64?", "requested interference-to-noise ratio at PU 2 (primary_impact)"),
    ("secondary_power", "f64", "secondary transmit power after power control, linear"),
    ("beta_tx_db", "f64", "PU 2 received power with a uniform precoder over that with the chosen precoder"),
    ("beta_rx_db", "f64?", "|EVM| minus the largest finite per-antenna SIR; empty without interference"),
    ("evm_db", "f64", "secondary payload EVM"),
    ("sir_db_0", "f64?", "SIR at SU 2 antenna 0"),
    ("sir_db_1", "f64?", "SIR at SU 2 antenna 1"),
    ("sir_db_2", "f64?", "SIR at SU 2 antenna 2"),
    ("gamma", "f64", "coded bits per symbol from the MCS table"),
    ("throughput_bps", "f64", "secondary throughput"),
    ("primary_evm_db_0", "f64?", "PU 2 stream 0 EVM, secondary on"),
    ("primary_evm_db_1", "f64?", "PU 2 stream 1 EVM, secondary on"),
    ("primary_evm_off_db_0", "f64?", "PU 2 stream 0 EVM, secondary off"),
    ("primary_evm_off_db_1", "f64?", "PU 2 stream 1 EVM, secondary off"),
    ("primary_evm_degradation_db", "f64", "largest on-minus-off primary EVM over streams"),
    ("residual_interference", "f64", "ground-truth secondary interference power at PU 2 per tone, linear"),
    ("payload_ber", "f64", "payload bit error rate"),
    ("max_symbol_error", "f64", "largest |decoded - sent| over payload cells"),
];

/// Receives rows in their final order.
pub trait RowSink {
    fn write_row(&mut self, row: &ResultRow) -> Result<()>;
}

impl RowSink for Vec<ResultRow> {
    fn write_row(&mut self, row: &ResultRow) -> Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

/// Writes `<dir>/<kind>.csv` through a temporary file renamed on `finish`.
pub struct CsvSink {
    writer: csv::Writer<fs::File>,
    tmp: PathBuf,
    path: PathBuf,
    rows: usize,
}

impl CsvSink {
    pub fn create(dir: &Path, kind: ExperimentKind) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = csv_path(dir, kind);
        let tmp = path.with_extension("csv.partial");
        let file = fs::File::create(&tmp).map_err(|source| CliError::Write {
            path: tmp.clone(),
            source,
        })?;
        Ok(Self {
            writer: csv::Writer::from_writer(file),
            tmp,
            path,
            rows: 0,
        })
    }

    /// Flushes and moves the file into place; returns the row count.
    pub fn finish(mut self) -> Result<usize> {
        if self.rows == 0 {
            self.writer.write_record(COLUMNS.iter().map(|c| c.0))?;
        }
        self.writer.flush().map_err(|source| CliError::Write {
            path: self.tmp.clone(),
            source,
        })?;
        drop(self.writer);
        fs::rename(&self.tmp, &self.path).map_err(|source| CliError::Write {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.rows)
    }
}

impl RowSink for CsvSink {
    fn write_row(&mut self, row: &ResultRow) -> Result<()> {
        self.writer.serialize(row)?;
        self.rows += 1;
        Ok(())
    }
}

pub fn csv_path(dir: &Path, kind: ExperimentKind) -> PathBuf {
    dir.join(format!("{kind}.csv"))
}

pub fn sidecar_path(dir: &Path, kind: ExperimentKind) -> PathBuf {
    dir.join(format!("{kind}.json"))
}

#[derive(Serialize)]
struct Column {
    name: &'static str,
    #[serde(rename = "type")]
    ty: &'static str,
    description: &'static str,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    simulator: &'static str,
    simulator_version: &'static str,
    rows: usize,
    columns: Vec<Column>,
    /// Infinite SNRs appear as null here; the TOML form keeps them.
    spec: &'a ExperimentSpec,
    spec_toml: String,
}

/// Writes the sidecar describing a finished CSV.
pub fn write_sidecar(dir: &Path, spec: &ExperimentSpec, rows: usize) -> Result<PathBuf> {
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        simulator: env!("CARGO_PKG_NAME"),
        simulator_version: env!("CARGO_PKG_VERSION"),
        rows,
        columns: COLUMNS
            .iter()
            .map(|&(name, ty, description)| Column { name, ty, description })
            .collect(),
        spec,
        spec_toml: spec.to_toml()?,
    };
    let path = sidecar_path(dir, spec.experiment);
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    let tmp = path.with_extension("json.partial");
    fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .and_then(|_| fs::rename(&tmp, &path))
        .map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}
