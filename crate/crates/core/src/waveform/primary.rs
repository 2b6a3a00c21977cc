//! Primary-network transmit signals projected onto the secondary tone grid.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::OfdmConfig;
use crate::error::{contract, Result};
use crate::grid::SampleGrid;
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrimaryKind {
    /// i.i.d. QPSK on every tone.
    Ofdm,
    /// Direct-sequence spread BPSK observed through a per-symbol FFT window.
    Cdma { spreading_factor: usize },
}

impl Default for PrimaryKind {
    fn default() -> Self {
        PrimaryKind::Ofdm
    }
}

impl PrimaryKind {
    pub fn cdma() -> Self {
        PrimaryKind::Cdma { spreading_factor: 8 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PrimaryKind::Ofdm => "ofdm",
            PrimaryKind::Cdma { .. } => "cdma",
        }
    }
}

/// Primary transmit signal, one vector of `M_p` antenna values per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimarySignal {
    pub kind: PrimaryKind,
    pub grid: SampleGrid,
    pub antenna_correlation: f64,
}

impl PrimarySignal {
    pub fn antennas(&self) -> usize {
        self.grid.dim()
    }
}

/// Generates `symbol_count` OFDM-symbol periods of primary signal on the
/// secondary grid.
///
/// Streams are independent per antenna and then mixed by
/// `[[1, 0], [ρ, √(1−ρ²)]]`, which keeps unit power per antenna and yields
/// cross-antenna correlation `ρ`.
pub fn generate_primary_signal(
    kind: PrimaryKind,
    antennas: usize,
    symbol_count: usize,
    config: &OfdmConfig,
    correlation: f64,
    rng_seed: u64,
) -> Result<PrimarySignal> {
    if !(1..=2).contains(&antennas) {
        return Err(contract(format!("primary antenna count must be 1 or 2, got {antennas}")));
    }
    if !(0.0..=1.0).contains(&correlation) {
        return Err(contract(format!("antenna correlation {correlation} outside [0, 1]")));
    }
    config.validate()?;
    let n = config.num_valid();
    let mut rng = rng_from_seed(rng_seed);

    let streams: Vec<Vec<Complex64>> = (0..antennas)
        .map(|_| match kind {
            PrimaryKind::Ofdm => Ok(qpsk_stream(&mut rng, symbol_count * n)),
            PrimaryKind::Cdma { spreading_factor } => {
                cdma_stream(&mut rng, spreading_factor, symbol_count, config)
            }
        })
        .collect::<Result<_>>()?;

    let tail = (1.0 - correlation * correlation).max(0.0).sqrt();
    let grid = SampleGrid::from_fn(symbol_count, n, antennas, |l, k, cell| {
        let i = l * n + k;
        cell[0] = streams[0][i];
        if antennas == 2 {
            cell[1] = streams[0][i] * correlation + streams[1][i] * tail;
        }
    });
    Ok(PrimarySignal {
        kind,
        grid,
        antenna_correlation: correlation,
    })
}

fn qpsk_stream<R: Rng>(rng: &mut R, len: usize) -> Vec<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re = if rng.random::<bool>() { r } else { -r };
            let im = if rng.random::<bool>() { r } else { -r };
            Complex64::new(re, im)
        })
        .collect()
}

fn cdma_stream<R: Rng>(
    rng: &mut R,
    spreading_factor: usize,
    symbol_count: usize,
    config: &OfdmConfig,
) -> Result<Vec<Complex64>> {
    let chips = cdma_chip_stream(rng, spreading_factor, symbol_count * config.symbol_length())?;
    let n = config.fft_size;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64 * code_band_power(spreading_factor, config)?).sqrt();
    let mut out = Vec::with_capacity(symbol_count * config.num_valid());
    let mut window = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..symbol_count {
        let start = l * config.symbol_length() + config.cp_length;
        window
            .iter_mut()
            .zip(&chips[start..start + n])
            .for_each(|(w, &c)| *w = Complex64::new(c, 0.0));
        fft.process(&mut window);
        out.extend(config.valid_subcarriers.iter().map(|&k| window[k] * scale));
    }
    Ok(out)
}

/// Mean over the valid tones of the spread spectrum `|C(k)|² / SF`, the
/// expected per-tone power of a unit-chip-power window.
fn code_band_power(spreading_factor: usize, config: &OfdmConfig) -> Result<f64> {
    let code = pn_code(spreading_factor)?;
    let n = config.fft_size as f64;
    let total: f64 = config
        .valid_subcarriers
        .iter()
        .map(|&k| {
            let c: Complex64 = code
                .iter()
                .enumerate()
                .map(|(j, &cj)| Complex64::from_polar(cj, -std::f64::consts::TAU * (k * j) as f64 / n))
                .sum();
            c.norm_sqr() / spreading_factor as f64
        })
        .sum();
    Ok(total / config.num_valid() as f64)
}

/// `len` chips of random BPSK data spread by [`pn_code`], one chip per sample.
pub fn cdma_chip_stream<R: Rng + ?Sized>(rng: &mut R, spreading_factor: usize, len: usize) -> Result<Vec<f64>> {
    let code = pn_code(spreading_factor)?;
    let mut chips = Vec::with_capacity(len);
    while chips.len() < len {
        let bit = if rng.random::<bool>() { 1.0 } else { -1.0 };
        chips.extend(code.iter().map(|c| c * bit));
    }
    chips.truncate(len);
    Ok(chips)
}

/// Spreading code of `spreading_factor` chips (±1): the window of a
/// maximal-length LFSR sequence with the lowest aperiodic autocorrelation
/// sidelobe (first such window wins).
pub fn pn_code(spreading_factor: usize) -> Result<Vec<f64>> {
    if spreading_factor == 0 || spreading_factor > 1023 {
        return Err(contract(format!("spreading factor {spreading_factor} outside 1..=1023")));
    }
    let degree = (2..=10).find(|&d| (1usize << d) - 1 >= spreading_factor).unwrap_or(10);
    let seq = m_sequence(degree);
    let period = seq.len();
    let window = |shift: usize| -> Vec<f64> { (0..spreading_factor).map(|i| seq[(shift + i) % period]).collect() };
    let best = (0..period)
        .min_by_key(|&shift| peak_sidelobe(&window(shift)))
        .unwrap_or(0);
    Ok(window(best))
}

/// One period of the m-sequence of the given degree.
fn m_sequence(degree: usize) -> Vec<f64> {
    // Fibonacci taps of primitive polynomials, indexed by degree.
    const TAPS: [&[usize]; 11] = [
        &[],
        &[],
        &[2, 1],
        &[3, 2],
        &[4, 3],
        &[5, 3],
        &[6, 5],
        &[7, 6],
        &[8, 6, 5, 4],
        &[9, 5],
        &[10, 7],
    ];
    let taps = TAPS[degree];
    let mut state: u32 = 1;
    (0..(1usize << degree) - 1)
        .map(|_| {
            let out = state & 1;
            let fb = taps.iter().fold(0, |acc, &t| acc ^ ((state >> (degree - t)) & 1));
            state = (state >> 1) | (fb << (degree - 1));
            if out == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Largest aperiodic autocorrelation magnitude at a non-zero lag.
fn peak_sidelobe(code: &[f64]) -> i64 {
    (1..code.len())
        .map(|lag| {
            code.iter()
                .zip(&code[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
                .round() as i64
        })
        .max()
        .unwrap_or(0)
}
