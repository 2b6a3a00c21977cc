//! Secondary OFDM frames, primary interference waveforms, and constellations.

mod frame;
mod modulation;
mod primary;

pub use frame::{build_secondary_frame, pilot_positions, pilot_set, FrameLayout, SecondaryFrame};
pub use modulation::{demodulate_symbols, modulate_bits, Constellation};
pub use primary::{cdma_chip_stream, generate_primary_signal, pn_code, PrimaryKind, PrimarySignal};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// OFDM numerology.
///
/// `valid_subcarriers` holds FFT bin indices ordered by signed frequency
/// (negative-frequency bins first), so neighbouring entries are neighbouring
/// tones even across DC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub valid_subcarriers: Vec<usize>,
    pub cp_length: usize,
    /// Samples per second.
    pub sample_rate: f64,
}

impl OfdmConfig {
    /// 64-point 802.11-legacy numerology: tones ±1..±26, 16-sample CP.
    pub fn wifi_legacy(sample_rate: f64) -> Self {
        Self::symmetric(64, 26, 16, sample_rate)
    }

    /// Secondary network at 5 Msps.
    pub fn secondary_5msps() -> Self {
        Self::wifi_legacy(5e6)
    }

    /// Secondary network at 25 Msps.
    pub fn secondary_25msps() -> Self {
        Self::wifi_legacy(25e6)
    }

    /// LTE-like primary: 1024-point FFT, tones ±1..±300, 10 Msps.
    pub fn lte_like() -> Self {
        Self::symmetric(1024, 300, 72, 10e6)
    }

    fn symmetric(fft_size: usize, half: usize, cp_length: usize, sample_rate: f64) -> Self {
        let valid_subcarriers = (fft_size - half..fft_size).chain(1..=half).collect();
        Self {
            fft_size,
            valid_subcarriers,
            cp_length,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || self.valid_subcarriers.is_empty() {
            return Err(contract("OFDM config needs a non-empty FFT and tone set"));
        }
        if self.cp_length >= self.fft_size {
            return Err(contract("cyclic prefix must be shorter than the FFT"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(contract("sample rate must be positive"));
        }
        let mut seen = vec![false; self.fft_size];
        for &k in &self.valid_subcarriers {
            if k >= self.fft_size || seen[k] {
                return Err(contract(format!("invalid or repeated subcarrier {k}")));
            }
            seen[k] = true;
        }
        Ok(())
    }

    pub fn num_valid(&self) -> usize {
        self.valid_subcarriers.len()
    }

    /// Position of FFT bin `k` in the valid-subcarrier list.
    pub fn position_of(&self, k: usize) -> Option<usize> {
        self.valid_subcarriers.iter().position(|&v| v == k)
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_length(&self) -> usize {
        self.fft_size + self.cp_length
    }
}

/// One column of the implementation-parameter table.
#[derive(Clone, Debug, Serialize)]
pub struct NetworkPreset {
    pub name: &'static str,
    pub standard: &'static str,
    pub waveform: &'static str,
    pub fft_size: Option<usize>,
    pub valid_subcarriers: Option<usize>,
    pub sample_rates: &'static [f64],
    pub antennas: &'static [usize],
}

pub fn network_presets() -> Vec<NetworkPreset> {
    vec![
        NetworkPreset {
            name: "primary-wifi",
            standard: "Wi-Fi",
            waveform: "OFDM",
            fft_size: Some(64),
            valid_subcarriers: Some(52),
            sample_rates: &[20e6],
            antennas: &[1],
        },
        NetworkPreset {
            name: "primary-lte-like",
            standard: "LTE-like",
            waveform: "OFDM",
            fft_size: Some(1024),
            valid_subcarriers: Some(600),
            sample_rates: &[10e6],
            antennas: &[1, 2],
        },
        NetworkPreset {
            name: "primary-cdma-like",
            standard: "CDMA-like",
            waveform: "CDMA",
            fft_size: None,
            valid_subcarriers: None,
            sample_rates: &[5e6],
            antennas: &[1],
        },
        NetworkPreset {
            name: "secondary",
            standard: "Wi-Fi-like",
            waveform: "OFDM",
            fft_size: Some(64),
            valid_subcarriers: Some(52),
            sample_rates: &[5e6, 25e6],
            antennas: &[2, 3],
        },
    ]
}
