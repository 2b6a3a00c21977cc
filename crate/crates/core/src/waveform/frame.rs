use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::modulation::{modulate_bits, Constellation};
use super::OfdmConfig;
use crate::error::{contract, Result};
use crate::grid::SampleGrid;
use crate::rng::rng_from_seed;

/// Where the known reference symbols sit in a frame and how they are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameLayout {
    /// Leading OFDM symbols carrying pilots on every valid tone.
    pub pilot_symbols: usize,
    /// Seed of the pilot generator, shared by transmitter and receiver.
    pub pilot_seed: u64,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self {
            pilot_symbols: 4,
            pilot_seed: 0x802_11,
        }
    }
}

/// A secondary-network frame on the symbol × valid-tone grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondaryFrame {
    /// Scalar grid; symbols `0..pilot_symbol_count` are pilots.
    pub grid: SampleGrid,
    pub pilot_symbol_count: usize,
    pub payload_bits: Vec<u8>,
    pub constellation: Constellation,
}

impl SecondaryFrame {
    pub fn symbols(&self) -> usize {
        self.grid.symbols()
    }

    pub fn payload_symbol_count(&self) -> usize {
        self.grid.symbols() - self.pilot_symbol_count
    }

    pub fn symbol(&self, l: usize, k: usize) -> Complex64 {
        self.grid.scalar(l, k)
    }

    /// Payload portion of the grid.
    pub fn payload(&self) -> SampleGrid {
        self.grid.symbol_range(self.pilot_symbol_count, self.grid.symbols())
    }
}

/// Builds a frame: pilot symbols followed by `payload_symbol_count` payload
/// symbols filled row by row. Bits short of the payload capacity are padded
/// with zeros.
pub fn build_secondary_frame(
    payload_bits: &[u8],
    constellation: Constellation,
    config: &OfdmConfig,
    layout: &FrameLayout,
    payload_symbol_count: usize,
) -> Result<SecondaryFrame> {
    config.validate()?;
    let n = config.num_valid();
    let bps = constellation.bits_per_symbol();
    let capacity = payload_symbol_count * n * bps;
    if payload_bits.len() > capacity {
        return Err(contract(format!(
            "{} payload bits overflow a {capacity}-bit grid",
            payload_bits.len()
        )));
    }
    let mut bits = payload_bits.to_vec();
    bits.resize(capacity, 0);
    let payload = modulate_bits(&bits, constellation)?;

    let total = layout.pilot_symbols + payload_symbol_count;
    let mut values = pilot_values(layout, n);
    values.extend(payload);
    debug_assert_eq!(values.len(), total * n);
    Ok(SecondaryFrame {
        grid: SampleGrid::from_scalars(total, n, values)?,
        pilot_symbol_count: layout.pilot_symbols,
        payload_bits: payload_bits.to_vec(),
        constellation,
    })
}

/// Pseudorandom unit-magnitude QPSK pilots, row-major over
/// `layout.pilot_symbols × num_valid`.
fn pilot_values(layout: &FrameLayout, num_valid: usize) -> Vec<Complex64> {
    let mut rng = rng_from_seed(layout.pilot_seed);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    (0..layout.pilot_symbols * num_valid)
        .map(|_| {
            let re = if rng.random::<bool>() { r } else { -r };
            let im = if rng.random::<bool>() { r } else { -r };
            Complex64::new(re, im)
        })
        .collect()
}

/// Pilot cells `(symbol, tone position)` used for the filter on tone position
/// `pos`: every pilot symbol on tones within `radius` list positions, clipped
/// at the band edges.
pub fn pilot_positions(num_valid: usize, pilot_symbols: usize, pos: usize, radius: usize) -> Vec<(usize, usize)> {
    let lo = pos.saturating_sub(radius);
    let hi = (pos + radius).min(num_valid - 1);
    (0..pilot_symbols)
        .flat_map(|l| (lo..=hi).map(move |p| (l, p)))
        .collect()
}

/// The pilot set Q_k for FFT bin `k`, as `(symbol, FFT bin)` pairs.
pub fn pilot_set(config: &OfdmConfig, layout: &FrameLayout, k: usize, neighbor_radius: usize) -> Result<Vec<(usize, usize)>> {
    let pos = config
        .position_of(k)
        .ok_or_else(|| contract(format!("subcarrier {k} is not a valid tone")))?;
    Ok(pilot_positions(config.num_valid(), layout.pilot_symbols, pos, neighbor_radius)
        .into_iter()
        .map(|(l, p)| (l, config.valid_subcarriers[p]))
        .collect())
}
