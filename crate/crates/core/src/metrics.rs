//! Evaluation metrics: IC capability on both sides, EVM, and throughput
//! extrapolated from the 802.11ac EVM table.

use serde::Serialize;

use crate::episode::EpisodeResult;
use crate::error::{contract, Result};
use crate::grid::SampleGrid;

/// Reported in place of `−∞` when the decoded grid is exact.
pub const EVM_FLOOR_DB: f64 = -300.0;

/// Smallest interference power fed into the tx-side ratio.
pub const POWER_FLOOR: f64 = 1e-30;

/// `10·log10(mean |X̂ − X|² / mean |X|²)` over the grid, floored.
pub fn evm_db(decoded: &SampleGrid, reference: &SampleGrid) -> Result<f64> {
    if !decoded.same_shape(reference) {
        return Err(contract("decoded and reference grids differ in shape"));
    }
    if reference.raw().is_empty() {
        return Err(contract("empty grid"));
    }
    let err: f64 = decoded.raw().iter().zip(reference.raw()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let sig: f64 = reference.raw().iter().map(|z| z.norm_sqr()).sum();
    if sig <= 0.0 {
        return Err(contract("reference grid has zero power"));
    }
    if err == 0.0 {
        return Ok(EVM_FLOOR_DB);
    }
    Ok((10.0 * (err / sig).log10()).max(EVM_FLOOR_DB))
}

/// `10·log10(p_uniform / p_bbf)` with `p_bbf` floored at [`POWER_FLOOR`].
pub fn beta_tx_db(p_uniform: f64, p_bbf: f64) -> f64 {
    10.0 * (p_uniform.max(POWER_FLOOR) / p_bbf.max(POWER_FLOOR)).log10()
}

/// Per-antenna SIR in dB from separated signal and interference grids.
/// An antenna without interference reports `+∞`.
pub fn sir_db(signal: &SampleGrid, interference: &SampleGrid) -> Result<Vec<f64>> {
    if !signal.same_shape(interference) {
        return Err(contract("signal and interference grids differ in shape"));
    }
    Ok((0..signal.dim())
        .map(|m| {
            let i = interference.component_power(m);
            if i == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (signal.component_power(m) / i).log10()
            }
        })
        .collect())
}

/// SIR at each SU 2 antenna from the episode's ground-truth parts.
pub fn sir_db_per_antenna(episode: &EpisodeResult) -> Result<Vec<f64>> {
    sir_db(&episode.su2.signal, &episode.su2.interference)
}

/// `|EVM| − max SIR` over the antennas that saw interference; `None` when
/// none did.
pub fn beta_rx_db(evm_db: f64, sir_db: &[f64]) -> Option<f64> {
    let max = sir_db.iter().copied().filter(|s| s.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    (max > f64::NEG_INFINITY).then(|| evm_db.abs() - max)
}

/// One EVM bracket `[upper, lower)` of the MCS table, in dB.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McsEntry {
    pub upper_db: f64,
    pub lower_db: f64,
    pub modulation: &'static str,
    pub coding_rate: &'static str,
    pub gamma: f64,
}

impl McsEntry {
    /// Whether `evm` falls in `[upper, lower)`, i.e. `lower < evm ≤ upper`.
    /// The first bracket is open at `−5`.
    fn contains(&self, evm: f64) -> bool {
        let below_top = if self.upper_db == f64::INFINITY {
            true
        } else {
            evm <= self.upper_db
        };
        below_top && evm > self.lower_db
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McsTable {
    pub entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn ieee_80211ac() -> Self {
        let rows: [(f64, f64, &str, &str, f64); 11] = [
            (f64::INFINITY, -5.0, "N/A", "N/A", 0.0),
            (-5.0, -10.0, "BPSK", "1/2", 0.5),
            (-10.0, -13.0, "QPSK", "1/2", 1.0),
            (-13.0, -16.0, "QPSK", "3/4", 1.5),
            (-16.0, -19.0, "16QAM", "1/2", 2.0),
            (-19.0, -22.0, "16QAM", "3/4", 3.0),
            (-22.0, -25.0, "64QAM", "2/3", 4.0),
            (-25.0, -27.0, "64QAM", "3/4", 4.5),
            (-27.0, -30.0, "64QAM", "5/6", 5.0),
            (-30.0, -32.0, "256QAM", "3/4", 6.0),
            (-32.0, f64::NEG_INFINITY, "256QAM", "5/6", 20.0 / 3.0),
        ];
        Self {
            entries: rows
                .into_iter()
                .map(|(upper_db, lower_db, modulation, coding_rate, gamma)| McsEntry {
                    upper_db,
                    lower_db,
                    modulation,
                    coding_rate,
                    gamma,
                })
                .collect(),
        }
    }

    pub fn entry(&self, evm_db: f64) -> Option<&McsEntry> {
        self.entries.iter().find(|e| e.contains(evm_db))
    }

    pub fn gamma(&self, evm_db: f64) -> f64 {
        self.entry(evm_db).map_or(0.0, |e| e.gamma)
    }
}

/// Bits per subcarrier implied by `evm_db`. `+5 dB` and NaN give 0.
pub fn gamma_of_evm(evm_db: f64) -> f64 {
    if evm_db.is_nan() {
        return 0.0;
    }
    // table lookup without allocating
    const EDGES: [(f64, f64); 10] = [
        (-5.0, 0.5),
        (-10.0, 1.0),
        (-13.0, 1.5),
        (-16.0, 2.0),
        (-19.0, 3.0),
        (-22.0, 4.0),
        (-25.0, 4.5),
        (-27.0, 5.0),
        (-30.0, 6.0),
        (-32.0, 20.0 / 3.0),
    ];
    if evm_db > EDGES[0].0 {
        return 0.0;
    }
    let mut gamma = EDGES[0].1;
    for &(edge, g) in &EDGES[1..] {
        if evm_db <= edge {
            gamma = g;
        }
    }
    gamma
}

/// Valid subcarriers per 80 in the throughput formula.
pub const THROUGHPUT_VALID: f64 = 48.0;
pub const THROUGHPUT_TOTAL: f64 = 80.0;

/// `r = 1/2 · 48/80 · b · γ(EVM)` in bit/s.
pub fn throughput_bps(evm_db: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(contract(format!("bandwidth {bandwidth_hz} must be positive")));
    }
    Ok(0.5 * THROUGHPUT_VALID / THROUGHPUT_TOTAL * bandwidth_hz * gamma_of_evm(evm_db))
}

/// Per-episode metric summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub beta_tx_db: f64,
    /// `None` when the receiver saw no interference.
    pub beta_rx_db: Option<f64>,
    pub evm_db: f64,
    pub sir_db: Vec<f64>,
    pub gamma: f64,
    pub throughput_bps: f64,
    /// Primary EVM at PU 2 per stream with the secondary transmitting.
    pub primary_evm_db: Vec<f64>,
    /// Same streams and noise, secondary silent.
    pub primary_evm_off_db: Vec<f64>,
    /// Ground-truth interference power at PU 2 (linear, per tone mean).
    pub residual_interference: f64,
    pub payload_ber: f64,
}

impl MetricsReport {
    pub fn from_episode(ep: &EpisodeResult) -> Result<Self> {
        let evm = evm_db(&ep.decoded_payload, &ep.frame.payload())?;
        let sir = sir_db_per_antenna(ep)?;
        let per_stream = |decoded: &SampleGrid| -> Result<Vec<f64>> {
            (0..decoded.dim())
                .map(|m| evm_db(&decoded.component(m), &ep.primary_reference.component(m)))
                .collect()
        };
        let bits = ep.payload_bits.len().max(1);
        Ok(Self {
            beta_tx_db: beta_tx_db(ep.pu2_uniform_power, ep.pu2_power),
            beta_rx_db: beta_rx_db(evm, &sir),
            evm_db: evm,
            sir_db: sir,
            gamma: gamma_of_evm(evm),
            throughput_bps: throughput_bps(evm, ep.bandwidth_hz)?,
            primary_evm_db: per_stream(&ep.primary_decoded)?,
            primary_evm_off_db: per_stream(&ep.primary_decoded_off)?,
            residual_interference: ep.residual_interference,
            payload_ber: ep.bit_errors() as f64 / bits as f64,
        })
    }
}
