//! Gray-mapped PSK/QAM constellations.
//!
//! Symbol index `i` carries its bits MSB first. For square QAM the upper half
//! of the bits selects the in-phase level and the lower half the quadrature
//! level; on each axis the Gray code `g` maps to amplitude `L − 1 − 2·bin(g)`,
//! so QPSK bits `(0, 0)` land on `(1 + i)/√2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constellation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Constellation {
    pub const ALL: [Constellation; 5] = [
        Constellation::Bpsk,
        Constellation::Qpsk,
        Constellation::Qam16,
        Constellation::Qam64,
        Constellation::Qam256,
    ];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Bpsk => 1,
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 6,
            Constellation::Qam256 => 8,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Unit-average-power alphabet indexed by symbol value.
    pub fn points(self) -> Vec<Complex64> {
        (0..self.order()).map(|i| self.point(i)).collect()
    }

    pub fn point(self, index: usize) -> Complex64 {
        match self {
            Constellation::Bpsk => Complex64::new(if index == 0 { 1.0 } else { -1.0 }, 0.0),
            _ => {
                let half = self.bits_per_symbol() / 2;
                let levels = 1usize << half;
                let mask = levels - 1;
                let amp = |g: usize| (levels - 1) as f64 - 2.0 * gray_to_binary(g) as f64;
                let norm = (2.0 * ((levels * levels - 1) as f64) / 3.0).sqrt();
                Complex64::new(amp(index >> half), amp(index & mask)) / norm
            }
        }
    }

    /// Minimum distance between two alphabet points.
    pub fn min_distance(self) -> f64 {
        match self {
            Constellation::Bpsk => 2.0,
            _ => {
                let levels = (1usize << (self.bits_per_symbol() / 2)) as f64;
                2.0 / (2.0 * (levels * levels - 1.0) / 3.0).sqrt()
            }
        }
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Maps bits (0/1 values) to constellation symbols.
pub fn modulate_bits(bits: &[u8], constellation: Constellation) -> Result<Vec<Complex64>> {
    let bps = constellation.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(contract(format!(
            "{} bits is not a multiple of {bps} bits per symbol",
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(contract("bits must be 0 or 1"));
    }
    Ok(bits
        .chunks(bps)
        .map(|chunk| {
            let index = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            constellation.point(index)
        })
        .collect())
}

/// Minimum-distance hard decisions; ties go to the lowest symbol index.
pub fn demodulate_symbols(symbols: &[Complex64], constellation: Constellation) -> Vec<u8> {
    let points = constellation.points();
    let bps = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * bps);
    for s in symbols {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        bits.extend((0..bps).rev().map(|shift| ((best >> shift) & 1) as u8));
    }
    bits
}
