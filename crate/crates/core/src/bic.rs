//! Blind interference cancellation at the secondary receiver.
//!
//! The receiver only sees its antenna samples and knows the pilot values. For
//! each tone it pools the pilot cells of that tone and its neighbours, forms
//! `S_yy = Σ y·y*` and `s_yx = Σ y·conj(x)`, and uses the MMSE combiner
//! `G = S_yy⁺·s_yx`. The same filter nulls interference and equalizes the
//! desired channel, so the decoded symbols need no further scaling.
//!
//! Note that nothing in this module takes a channel argument except the
//! zero-forcing baseline.

use num_complex::Complex64;

use crate::error::{contract, Result};
use crate::grid::SampleGrid;
use crate::linalg::{inner, norm_sqr, pinv_hermitian, ComplexMatrix};
use crate::waveform::{pilot_positions, SecondaryFrame};

/// Pilot sums for one tone.
#[derive(Clone, Debug, PartialEq)]
pub struct TonePilotStats {
    pub s_yy: ComplexMatrix,
    pub s_yx: Vec<Complex64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PilotStatistics {
    pub per_subcarrier: Vec<TonePilotStats>,
}

/// Sums over the pilot set of every tone.
pub fn collect_pilot_statistics(
    received: &SampleGrid,
    frame: &SecondaryFrame,
    neighbor_radius: usize,
) -> Result<PilotStatistics> {
    let n = frame.grid.subcarriers();
    if received.subcarriers() != n {
        return Err(contract("received grid and frame disagree on tone count"));
    }
    if received.symbols() < frame.pilot_symbol_count {
        return Err(contract(format!(
            "received grid has {} symbols but the frame has {} pilot symbols",
            received.symbols(),
            frame.pilot_symbol_count
        )));
    }
    let m = received.dim();
    let per_subcarrier = (0..n)
        .map(|pos| {
            let cells = pilot_positions(n, frame.pilot_symbol_count, pos, neighbor_radius);
            let mut s_yy = ComplexMatrix::zeros(m, m);
            let mut s_yx = vec![Complex64::new(0.0, 0.0); m];
            for &(l, p) in &cells {
                let y = received.at(l, p);
                let x = frame.symbol(l, p).conj();
                s_yy.add_outer(y);
                for (acc, yi) in s_yx.iter_mut().zip(y) {
                    *acc += yi * x;
                }
            }
            TonePilotStats {
                s_yy,
                s_yx,
                count: cells.len(),
            }
        })
        .collect();
    Ok(PilotStatistics { per_subcarrier })
}

/// Per-tone receive combiners `G(k)`; decoding is `G(k)*·Y(l,k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFilter {
    pub weights: Vec<Vec<Complex64>>,
}

impl SpatialFilter {
    pub fn num_subcarriers(&self) -> usize {
        self.weights.len()
    }
}

/// `G(k) = S_yy⁺ · s_yx` for every tone.
pub fn build_filter(stats: &PilotStatistics, pinv_tol: f64) -> Result<SpatialFilter> {
    let weights = stats
        .per_subcarrier
        .iter()
        .map(|t| Ok(pinv_hermitian(&t.s_yy, pinv_tol)?.mul_vec_unchecked(&t.s_yx)))
        .collect::<Result<_>>()?;
    Ok(SpatialFilter { weights })
}

/// `X̂(l,k) = G(k)*·Y(l,k)` on every cell; returns a scalar grid.
pub fn decode(filter: &SpatialFilter, received: &SampleGrid) -> Result<SampleGrid> {
    if filter.num_subcarriers() != received.subcarriers() {
        return Err(contract("filter and received grid disagree on tone count"));
    }
    if filter.weights.iter().any(|g| g.len() != received.dim()) {
        return Err(contract("filter length differs from receive antenna count"));
    }
    Ok(SampleGrid::from_fn(received.symbols(), received.subcarriers(), 1, |l, k, out| {
        out[0] = inner(&filter.weights[k], received.at(l, k));
    }))
}

/// Interference-ignorant zero forcing on the effective desired channel
/// `h_eff(k) = H_ss(k)·tx(k)`, where `tx(k)` is the transmitted weight vector
/// (already conjugated and power-scaled).
pub fn zf_decode(h_ss: &[ComplexMatrix], tx_weights: &[Vec<Complex64>], received: &SampleGrid) -> Result<SampleGrid> {
    if h_ss.len() != received.subcarriers() || tx_weights.len() != received.subcarriers() {
        return Err(contract("channel, precoder and received grid disagree on tone count"));
    }
    let h_eff: Vec<Vec<Complex64>> = h_ss
        .iter()
        .zip(tx_weights)
        .map(|(h, w)| h.mul_vec(w))
        .collect::<Result<_>>()?;
    for (k, h) in h_eff.iter().enumerate() {
        if h.len() != received.dim() {
            return Err(contract("effective channel length differs from receive antenna count"));
        }
        if norm_sqr(h) == 0.0 {
            return Err(contract(format!("zero effective channel on tone {k}")));
        }
    }
    Ok(SampleGrid::from_fn(received.symbols(), received.subcarriers(), 1, |l, k, out| {
        let h = &h_eff[k];
        out[0] = inner(h, received.at(l, k)) / norm_sqr(h);
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_PINV_TOL;
    use crate::rng::{complex_gaussian, rng_from_seed};
    use crate::waveform::{build_secondary_frame, Constellation, FrameLayout, OfdmConfig};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn frame(payload_symbols: usize) -> SecondaryFrame {
        build_secondary_frame(&[], Constellation::Qpsk, &OfdmConfig::secondary_5msps(), &FrameLayout::default(), payload_symbols)
            .unwrap()
    }

    fn through_flat(frame: &SecondaryFrame, h: &[Complex64]) -> SampleGrid {
        SampleGrid::from_fn(frame.symbols(), 52, h.len(), |l, k, out| {
            for (o, hi) in out.iter_mut().zip(h) {
                *o = hi * frame.symbol(l, k);
            }
        })
    }

    #[test]
    fn own_tone_statistics_are_four_outer_products() {
        let f = frame(1);
        let mut rng = rng_from_seed(1);
        let y = SampleGrid::from_fn(f.symbols(), 52, 2, |_, _, cell| {
            for z in cell.iter_mut() {
                *z = complex_gaussian(&mut rng, 1.0);
            }
        });
        let stats = collect_pilot_statistics(&y, &f, 0).unwrap();
        let t = &stats.per_subcarrier[9];
        assert_eq!(t.count, 4);
        let mut expect = ComplexMatrix::zeros(2, 2);
        for l in 0..4 {
            expect = expect.add(&ComplexMatrix::outer(y.at(l, 9), y.at(l, 9))).unwrap();
        }
        assert!(expect.sub(&t.s_yy).unwrap().max_abs() < 1e-14);
        let stats1 = collect_pilot_statistics(&y, &f, 1).unwrap();
        assert_eq!(stats1.per_subcarrier[9].count, 12);
        assert_eq!(stats1.per_subcarrier[0].count, 8);
    }

    #[test]
    fn scalar_channel_cross_term() {
        let f = frame(0);
        let gain = c(0.5, -2.0);
        let y = through_flat(&f, &[gain]);
        let stats = collect_pilot_statistics(&y, &f, 1).unwrap();
        let t = &stats.per_subcarrier[20];
        // pilots have unit magnitude: Σ|x|² = 12
        assert!((t.s_yx[0] - gain * 12.0).norm() < 1e-12);
    }

    #[test]
    fn missing_pilots_rejected() {
        let f = frame(0);
        assert!(collect_pilot_statistics(&SampleGrid::zeros(3, 52, 2), &f, 1).is_err());
        assert!(collect_pilot_statistics(&SampleGrid::zeros(4, 50, 2), &f, 1).is_err());
    }

    #[test]
    fn single_stream_filter_inverts_channel() {
        let f = frame(2);
        let h = vec![c(0.3, 1.1), c(-0.7, 0.2), c(0.05, -0.4)];
        let y = through_flat(&f, &h);
        let g = build_filter(&collect_pilot_statistics(&y, &f, 1).unwrap(), DEFAULT_PINV_TOL).unwrap();
        let hn = norm_sqr(&h);
        for w in &g.weights {
            assert!((inner(w, &h) - 1.0).norm() < 1e-9);
            for (wi, hi) in w.iter().zip(&h) {
                assert!((wi - hi / hn).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn filter_trivial_cases() {
        let stats = PilotStatistics {
            per_subcarrier: vec![TonePilotStats {
                s_yy: ComplexMatrix::identity(2),
                s_yx: vec![c(1., 0.), c(0., 0.)],
                count: 1,
            }],
        };
        assert_eq!(build_filter(&stats, DEFAULT_PINV_TOL).unwrap().weights[0], vec![c(1., 0.), c(0., 0.)]);
        let zero = PilotStatistics {
            per_subcarrier: vec![TonePilotStats {
                s_yy: ComplexMatrix::identity(2),
                s_yx: vec![c(0., 0.); 2],
                count: 1,
            }],
        };
        assert_eq!(build_filter(&zero, DEFAULT_PINV_TOL).unwrap().weights[0], vec![c(0., 0.); 2]);
    }

    #[test]
    fn decode_is_linear_and_selects() {
        let mut rng = rng_from_seed(2);
        let y = SampleGrid::from_fn(3, 4, 2, |_, _, cell| {
            for z in cell.iter_mut() {
                *z = complex_gaussian(&mut rng, 1.0);
            }
        });
        let e1 = SpatialFilter {
            weights: vec![vec![c(1., 0.), c(0., 0.)]; 4],
        };
        let out = decode(&e1, &y).unwrap();
        for l in 0..3 {
            for k in 0..4 {
                assert_eq!(out.scalar(l, k), y.at(l, k)[0]);
            }
        }
        let g = SpatialFilter {
            weights: vec![vec![c(0.2, 0.1), c(-1., 0.5)]; 4],
        };
        let g2 = SpatialFilter {
            weights: g.weights.iter().map(|w| w.iter().map(|z| z * 2.0).collect()).collect(),
        };
        let a = decode(&g, &y).unwrap();
        let b = decode(&g2, &y).unwrap();
        for (x, z) in a.raw().iter().zip(b.raw()) {
            assert!((x * 2.0 - z).norm() < 1e-14);
        }
    }

    #[test]
    fn zf_recovers_without_interference() {
        let f = frame(3);
        let h_ss = ComplexMatrix::new(2, 2, vec![c(1., 0.5), c(-0.3, 0.), c(0.2, 0.9), c(0.7, -0.1)]).unwrap();
        let w = vec![c(0.6, 0.), c(0., -0.8)];
        let h_eff = h_ss.mul_vec(&w).unwrap();
        let y = through_flat(&f, &h_eff);
        let out = zf_decode(&vec![h_ss; 52], &vec![w; 52], &y).unwrap();
        for l in 0..f.symbols() {
            for k in 0..52 {
                assert!((out.scalar(l, k) - f.symbol(l, k)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zf_first_antenna_passthrough_and_zero_channel() {
        let mut rng = rng_from_seed(3);
        let y = SampleGrid::from_fn(2, 1, 2, |_, _, cell| {
            for z in cell.iter_mut() {
                *z = complex_gaussian(&mut rng, 1.0);
            }
        });
        let id = ComplexMatrix::identity(2);
        let e1 = vec![c(1., 0.), c(0., 0.)];
        let out = zf_decode(&[id.clone()], &[e1], &y).unwrap();
        assert_eq!(out.scalar(1, 0), y.at(1, 0)[0]);
        assert!(zf_decode(&[id], &[vec![c(0., 0.); 2]], &y).is_err());
    }
}
