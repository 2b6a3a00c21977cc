//! Block-fading MIMO channels built from tapped delay lines.
//!
//! Every (rx, tx) antenna pair gets `L` i.i.d. circular Gaussian taps with an
//! exponential power-delay profile. The per-tone response is the DFT of the
//! taps at the valid FFT bins, so adjacent tones stay strongly correlated.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::grid::SampleGrid;
use crate::linalg::ComplexMatrix;
use crate::rng::complex_gaussian;
use crate::waveform::OfdmConfig;

/// Tapped-delay-line parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub tap_count: usize,
    /// Power drop between consecutive taps.
    pub decay_db_per_tap: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tap_count: 4,
            decay_db_per_tap: 3.0,
        }
    }
}

impl ChannelConfig {
    pub fn flat() -> Self {
        Self {
            tap_count: 1,
            ..Self::default()
        }
    }

    /// Normalized tap powers, summing to one.
    pub fn power_delay_profile(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.tap_count)
            .map(|n| 10f64.powf(-self.decay_db_per_tap * n as f64 / 10.0))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

/// How the backward channel relates to the forward one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ReciprocityModel {
    /// Backward channel is exactly the transpose.
    #[default]
    Ideal,
    /// Transpose with each entry scaled by `1 + ε`, `ε ~ CN(0, e²)` where
    /// `e = 10^(perturbation_db/20) − 1`. Zero dB is ideal.
    Perturbed { perturbation_db: f64 },
}

impl ReciprocityModel {
    fn error_rms(&self) -> f64 {
        match *self {
            ReciprocityModel::Ideal => 0.0,
            ReciprocityModel::Perturbed { perturbation_db } => 10f64.powf(perturbation_db / 20.0) - 1.0,
        }
    }
}

/// One block-fading MIMO realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    n_rx: usize,
    n_tx: usize,
    /// Taps per antenna pair, indexed `rx * n_tx + tx`.
    taps: Vec<Vec<Complex64>>,
    fft_size: usize,
    bins: Vec<usize>,
    freq: Vec<ComplexMatrix>,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps (`rx * n_tx + tx` order).
    pub fn from_taps(n_rx: usize, n_tx: usize, taps: Vec<Vec<Complex64>>, config: &OfdmConfig) -> Result<Self> {
        if taps.len() != n_rx * n_tx || taps.is_empty() {
            return Err(contract(format!("{n_rx}x{n_tx} channel needs {} tap lists", n_rx * n_tx)));
        }
        let len = taps[0].len();
        if len == 0 || taps.iter().any(|t| t.len() != len) {
            return Err(contract("tap lists must be non-empty and equally long"));
        }
        let mut ch = Self {
            n_rx,
            n_tx,
            taps,
            fft_size: config.fft_size,
            bins: config.valid_subcarriers.clone(),
            freq: Vec::new(),
        };
        ch.freq = ch.bins.iter().map(|&k| ch.dft_at(k)).collect();
        Ok(ch)
    }

    /// Frequency-flat channel equal to `h` on every tone.
    pub fn flat(h: &ComplexMatrix, config: &OfdmConfig) -> Result<Self> {
        let taps = h.entries().iter().map(|&z| vec![z]).collect();
        Self::from_taps(h.rows(), h.cols(), taps, config)
    }

    fn dft_at(&self, k: usize) -> ComplexMatrix {
        let n = self.fft_size as f64;
        ComplexMatrix::from_fn(self.n_rx, self.n_tx, |r, c| {
            self.taps[r * self.n_tx + c]
                .iter()
                .enumerate()
                .map(|(d, &h)| h * Complex64::from_polar(1.0, -std::f64::consts::TAU * ((k * d) % self.fft_size) as f64 / n))
                .sum()
        })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn taps(&self, rx: usize, tx: usize) -> &[Complex64] {
        &self.taps[rx * self.n_tx + tx]
    }

    pub fn num_subcarriers(&self) -> usize {
        self.freq.len()
    }

    /// Response at tone position `pos` (index into the valid-tone list).
    pub fn at(&self, pos: usize) -> &ComplexMatrix {
        &self.freq[pos]
    }

    pub fn responses(&self) -> &[ComplexMatrix] {
        &self.freq
    }

    /// Recomputes the response at FFT bin `k` directly from the taps.
    pub fn response_at_bin(&self, k: usize) -> ComplexMatrix {
        self.dft_at(k)
    }

    /// The backward channel under `model`.
    pub fn reciprocal<R: Rng + ?Sized>(&self, model: &ReciprocityModel, rng: &mut R) -> Self {
        let rms = model.error_rms();
        let mut taps = Vec::with_capacity(self.taps.len());
        for tx in 0..self.n_tx {
            for rx in 0..self.n_rx {
                let t = self.taps(rx, tx);
                if rms == 0.0 {
                    taps.push(t.to_vec());
                } else {
                    let gain = Complex64::new(1.0, 0.0) + complex_gaussian(rng, rms * rms);
                    taps.push(t.iter().map(|h| h * gain).collect());
                }
            }
        }
        let mut ch = Self {
            n_rx: self.n_tx,
            n_tx: self.n_rx,
            taps,
            fft_size: self.fft_size,
            bins: self.bins.clone(),
            freq: Vec::new(),
        };
        ch.freq = if rms == 0.0 {
            self.freq.iter().map(ComplexMatrix::transpose).collect()
        } else {
            ch.bins.iter().map(|&k| ch.dft_at(k)).collect()
        };
        ch
    }

    /// Partially redraws the taps: `ρ·h + √(1−ρ²)·h'` with fresh `h'` from the
    /// same profile. `ρ = 1` returns an identical channel.
    pub fn drift<R: Rng + ?Sized>(&self, coherence: f64, config: &ChannelConfig, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&coherence) {
            return Err(contract(format!("coherence {coherence} outside [0, 1]")));
        }
        if coherence == 1.0 {
            return Ok(self.clone());
        }
        let pdp = config.power_delay_profile();
        let fresh_weight = (1.0 - coherence * coherence).sqrt();
        let taps = self
            .taps
            .iter()
            .map(|t| {
                t.iter()
                    .enumerate()
                    .map(|(d, &h)| h * coherence + complex_gaussian(rng, pdp.get(d).copied().unwrap_or(0.0)) * fresh_weight)
                    .collect()
            })
            .collect();
        let mut ch = Self {
            taps,
            freq: Vec::new(),
            ..self.clone()
        };
        ch.freq = ch.bins.iter().map(|&k| ch.dft_at(k)).collect();
        Ok(ch)
    }

    /// `H(k)·x` on every cell, no noise.
    pub fn propagate(&self, tx: &SampleGrid) -> Result<SampleGrid> {
        if tx.dim() != self.n_tx {
            return Err(contract(format!(
                "channel has {} inputs but transmit grid carries {}-vectors",
                self.n_tx,
                tx.dim()
            )));
        }
        if tx.subcarriers() != self.freq.len() {
            return Err(contract("transmit grid and channel disagree on tone count"));
        }
        Ok(SampleGrid::from_fn(tx.symbols(), tx.subcarriers(), self.n_rx, |l, k, out| {
            out.copy_from_slice(&self.freq[k].mul_vec_unchecked(tx.at(l, k)));
        }))
    }

    /// `y = H(k)·x + w` with i.i.d. `CN(0, noise_power)` per receive antenna.
    pub fn apply<R: Rng + ?Sized>(&self, tx: &SampleGrid, noise_power: f64, rng: &mut R) -> Result<SampleGrid> {
        let clean = self.propagate(tx)?;
        if noise_power == 0.0 {
            return Ok(clean);
        }
        clean.add(&awgn(clean.symbols(), clean.subcarriers(), clean.dim(), noise_power, rng)?)
    }
}

/// Draws a channel realization.
pub fn sample_channel<R: Rng + ?Sized>(
    n_rx: usize,
    n_tx: usize,
    config: &ChannelConfig,
    ofdm: &OfdmConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if config.tap_count == 0 || config.tap_count > ofdm.cp_length {
        return Err(contract(format!(
            "tap count {} must be in 1..={}",
            config.tap_count, ofdm.cp_length
        )));
    }
    let pdp = config.power_delay_profile();
    let taps = (0..n_rx * n_tx)
        .map(|_| pdp.iter().map(|&p| complex_gaussian(rng, p)).collect())
        .collect();
    ChannelRealization::from_taps(n_rx, n_tx, taps, ofdm)
}

/// Noise grid with i.i.d. `CN(0, power)` entries.
pub fn awgn<R: Rng + ?Sized>(symbols: usize, subcarriers: usize, dim: usize, power: f64, rng: &mut R) -> Result<SampleGrid> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(contract(format!("noise power {power} must be finite and non-negative")));
    }
    if power == 0.0 {
        return Ok(SampleGrid::zeros(symbols, subcarriers, dim));
    }
    Ok(SampleGrid::from_fn(symbols, subcarriers, dim, |_, _, cell| {
        for z in cell.iter_mut() {
            *z = complex_gaussian(rng, power);
        }
    }))
}
