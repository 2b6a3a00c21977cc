use num_complex::Complex64;

use crate::error::{contract, Result};

/// Complex samples on an OFDM-symbol × subcarrier grid, one vector of length
/// `dim` per cell.
///
/// The subcarrier axis is the position in the configured valid-subcarrier
/// list, not the FFT bin.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    symbols: usize,
    subcarriers: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl SampleGrid {
    pub fn zeros(symbols: usize, subcarriers: usize, dim: usize) -> Self {
        Self {
            symbols,
            subcarriers,
            dim,
            data: vec![Complex64::new(0.0, 0.0); symbols * subcarriers * dim],
        }
    }

    pub fn from_fn(
        symbols: usize,
        subcarriers: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize, &mut [Complex64]),
    ) -> Self {
        let mut g = Self::zeros(symbols, subcarriers, dim);
        for l in 0..symbols {
            for k in 0..subcarriers {
                f(l, k, g.at_mut(l, k));
            }
        }
        g
    }

    /// Scalar grid from row-major values (`symbols × subcarriers`).
    pub fn from_scalars(symbols: usize, subcarriers: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != symbols * subcarriers {
            return Err(contract("scalar grid size mismatch"));
        }
        Ok(Self {
            symbols,
            subcarriers,
            dim: 1,
            data: values,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, l: usize, k: usize) -> &[Complex64] {
        let i = (l * self.subcarriers + k) * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn at_mut(&mut self, l: usize, k: usize) -> &mut [Complex64] {
        let i = (l * self.subcarriers + k) * self.dim;
        &mut self.data[i..i + self.dim]
    }

    /// First component of a cell; the value of a scalar grid.
    pub fn scalar(&self, l: usize, k: usize) -> Complex64 {
        self.at(l, k)[0]
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.symbols == other.symbols && self.subcarriers == other.subcarriers && self.dim == other.dim
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(contract("grid sum needs equal shapes"));
        }
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..*self
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * s).collect(),
            ..*self
        }
    }

    /// Cells for OFDM symbols `start..end`.
    pub fn symbol_range(&self, start: usize, end: usize) -> Self {
        let w = self.subcarriers * self.dim;
        Self {
            symbols: end - start,
            data: self.data[start * w..end * w].to_vec(),
            ..*self
        }
    }

    /// Scalar grid holding component `m` of every cell.
    pub fn component(&self, m: usize) -> Self {
        Self::from_fn(self.symbols, self.subcarriers, 1, |l, k, out| out[0] = self.at(l, k)[m])
    }

    /// Mean of `|x_m|²` over all cells for component `m`.
    pub fn component_power(&self, m: usize) -> f64 {
        let cells = self.symbols * self.subcarriers;
        if cells == 0 {
            return 0.0;
        }
        self.data
            .chunks(self.dim)
            .map(|v| v[m].norm_sqr())
            .sum::<f64>()
            / cells as f64
    }

    /// Mean of `|x|²` over all cells (summed over components).
    pub fn mean_power(&self) -> f64 {
        (0..self.dim).map(|m| self.component_power(m)).sum()
    }
}
