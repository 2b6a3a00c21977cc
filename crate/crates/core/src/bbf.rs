//! Blind beamforming at the secondary transmitter.
//!
//! The transmitter overhears the primary receiver's backward traffic, sums the
//! per-tone outer products of what it hears, and steers into the eigenvectors
//! of the smallest eigenvalues. Under reciprocity those vectors span the null
//! space of the backward channel, so transmitting on their element-wise
//! conjugate puts nothing at the primary receiver. No channel estimate is
//! involved.
//!
//! Explicit (EBF) and implicit (IBF) channel-feedback beamformers are provided
//! as reference baselines; they take channel matrices instead of samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::grid::SampleGrid;
use crate::linalg::{hermitian_eig, inner, norm_sqr, ComplexMatrix};

/// Relative eigenvalue cutoff used when the null dimension is detected.
pub const DEFAULT_REL_GAP_TOL: f64 = 1e-6;

/// Per-tone sum of outer products of overheard samples.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceCovariance {
    pub per_subcarrier: Vec<ComplexMatrix>,
    pub sample_count: usize,
}

/// Accumulates `Σ_l Y(l,k)·Y(l,k)*` for each tone of the overheard grid.
pub fn accumulate_covariance(overheard: &SampleGrid) -> Result<InterferenceCovariance> {
    if overheard.symbols() == 0 {
        return Err(Error::NoOverheardSamples);
    }
    let m = overheard.dim();
    if m == 0 {
        return Err(contract("overheard samples must be non-empty vectors"));
    }
    let per_subcarrier = (0..overheard.subcarriers())
        .map(|k| {
            let mut acc = ComplexMatrix::zeros(m, m);
            for l in 0..overheard.symbols() {
                acc.add_outer(overheard.at(l, k));
            }
            acc
        })
        .collect();
    Ok(InterferenceCovariance {
        per_subcarrier,
        sample_count: overheard.symbols(),
    })
}

/// How many minimum eigenvectors to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NullDim {
    /// Exactly this many (e.g. `M_s − M_p` when the primary antenna count is known).
    Known { count: usize },
    /// All eigenvalues below `rel_gap_tol · λ_max`.
    Threshold { rel_gap_tol: f64 },
}

impl Default for NullDim {
    fn default() -> Self {
        NullDim::Threshold {
            rel_gap_tol: DEFAULT_REL_GAP_TOL,
        }
    }
}

/// Orthonormal eigenvectors of the smallest eigenvalues of a PSD covariance,
/// ascending by eigenvalue.
pub fn min_eigvectors(cov: &ComplexMatrix, null_dim: NullDim) -> Result<Vec<Vec<Complex64>>> {
    let eig = hermitian_eig(cov)?;
    let n = cov.rows();
    let count = match null_dim {
        NullDim::Known { count } => {
            if count == 0 || count > n {
                return Err(contract(format!("null dimension {count} outside 1..={n}")));
            }
            count
        }
        NullDim::Threshold { rel_gap_tol } => {
            let lambda_max = eig.eigenvalues[n - 1];
            if lambda_max <= 0.0 {
                n
            } else {
                eig.eigenvalues.iter().filter(|&&l| l < rel_gap_tol * lambda_max).count()
            }
        }
    };
    if count == 0 {
        return Err(Error::InsufficientDof { antennas: n });
    }
    Ok((0..count).map(|j| eig.eigenvector(j)).collect())
}

/// `Σ α_m U_m`, with uniform `α_m = 1/√M_e` when `alpha` is `None`.
pub fn build_precoder(u: &[Vec<Complex64>], alpha: Option<&[f64]>) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let me = u.len();
    if me == 0 {
        return Err(contract("precoder needs at least one basis vector"));
    }
    let alpha = match alpha {
        Some(a) => {
            if a.len() != me {
                return Err(contract(format!("{} weights for {me} basis vectors", a.len())));
            }
            let s: f64 = a.iter().map(|x| x * x).sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(contract(format!("weights must have unit norm, got Σα² = {s}")));
            }
            a.to_vec()
        }
        None => vec![1.0 / (me as f64).sqrt(); me],
    };
    let m = u[0].len();
    let mut p = vec![Complex64::new(0.0, 0.0); m];
    for (um, &a) in u.iter().zip(&alpha) {
        if um.len() != m {
            return Err(contract("basis vectors differ in length"));
        }
        for (pi, ui) in p.iter_mut().zip(um) {
            *pi += ui * a;
        }
    }
    Ok((p, alpha))
}

/// Real weights maximizing `|H_ss · conj(Σ α_m U_m)|²`: the dominant
/// eigenvector of the real part of the Gram matrix of `H_ss·conj(U_m)`.
pub fn optimize_alpha(u: &[Vec<Complex64>], h_ss: &ComplexMatrix) -> Result<Vec<f64>> {
    let me = u.len();
    if me <= 1 {
        return Ok(vec![1.0]);
    }
    let projected: Vec<Vec<Complex64>> = u
        .iter()
        .map(|um| {
            let conj: Vec<Complex64> = um.iter().map(|z| z.conj()).collect();
            h_ss.mul_vec(&conj)
        })
        .collect::<Result<_>>()?;
    // α real, so αᵀ G α = αᵀ Re(G) α.
    let gram = ComplexMatrix::from_fn(me, me, |i, j| Complex64::new(inner(&projected[i], &projected[j]).re, 0.0));
    let eig = hermitian_eig(&gram)?;
    let top = eig.eigenvector(me - 1);
    let alpha: Vec<f64> = top.iter().map(|z| z.re).collect();
    let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(alpha.into_iter().map(|a| a / norm).collect())
}

/// Per-tone unit-norm precoders `P(k)`; the transmitter sends on `conj(P(k))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Precoder {
    pub vectors: Vec<Vec<Complex64>>,
    pub alphas: Vec<Vec<f64>>,
}

impl Precoder {
    /// `[1/√M, …, 1/√M]` on every tone.
    pub fn uniform(antennas: usize, subcarriers: usize) -> Self {
        let v = vec![Complex64::new(1.0 / (antennas as f64).sqrt(), 0.0); antennas];
        Self {
            vectors: vec![v; subcarriers],
            alphas: vec![Vec::new(); subcarriers],
        }
    }

    pub fn antennas(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.vectors.len()
    }

    /// The transmitted weight vector `conj(P(k))`.
    pub fn transmit_vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors[k].iter().map(|z| z.conj()).collect()
    }

    /// Precodes a scalar grid into an `M_s`-vector grid, scaled by `amplitude`.
    pub fn apply(&self, symbols: &SampleGrid, amplitude: f64) -> Result<SampleGrid> {
        if symbols.dim() != 1 || symbols.subcarriers() != self.num_subcarriers() {
            return Err(contract("precoder expects a scalar grid on its tone set"));
        }
        let tx: Vec<Vec<Complex64>> = (0..self.num_subcarriers()).map(|k| self.transmit_vector(k)).collect();
        Ok(SampleGrid::from_fn(symbols.symbols(), symbols.subcarriers(), self.antennas(), |l, k, out| {
            let s = symbols.scalar(l, k) * amplitude;
            for (o, w) in out.iter_mut().zip(&tx[k]) {
                *o = w * s;
            }
        }))
    }
}

/// Weight selection over the null subspace.
#[derive(Clone, Copy, Debug)]
pub enum AlphaPolicy<'a> {
    Uniform,
    /// Maximize received power over these per-tone secondary channels.
    Optimized(&'a [ComplexMatrix]),
}

fn precoder_from_covariances(covs: &[ComplexMatrix], null_dim: NullDim, policy: AlphaPolicy<'_>) -> Result<Precoder> {
    let mut vectors = Vec::with_capacity(covs.len());
    let mut alphas = Vec::with_capacity(covs.len());
    for (k, cov) in covs.iter().enumerate() {
        let u = min_eigvectors(cov, null_dim)?;
        let alpha = match policy {
            AlphaPolicy::Uniform => None,
            AlphaPolicy::Optimized(h) => {
                let h = h.get(k).ok_or_else(|| contract("missing secondary channel for a tone"))?;
                Some(optimize_alpha(&u, h)?)
            }
        };
        let (p, a) = build_precoder(&u, alpha.as_deref())?;
        vectors.push(p);
        alphas.push(a);
    }
    Ok(Precoder { vectors, alphas })
}

/// Blind beamformer from overheard samples.
pub fn blind_precoder(overheard: &SampleGrid, null_dim: NullDim, policy: AlphaPolicy<'_>) -> Result<Precoder> {
    let cov = accumulate_covariance(overheard)?;
    precoder_from_covariances(&cov.per_subcarrier, null_dim, policy)
}

/// Explicit-feedback beamformer from the forward channel (`M_p × M_s` per tone).
pub fn ebf_precoder(forward: &[ComplexMatrix], null_dim: NullDim) -> Result<Precoder> {
    let covs: Vec<ComplexMatrix> = forward
        .iter()
        .map(|h| {
            let b = h.transpose();
            b.matmul(&b.conj_transpose())
        })
        .collect::<Result<_>>()?;
    precoder_from_covariances(&covs, null_dim, AlphaPolicy::Uniform)
}

/// Implicit-feedback beamformer from the backward channel (`M_s × M_p` per
/// tone) as estimated at the secondary transmitter.
pub fn ibf_precoder(backward: &[ComplexMatrix], null_dim: NullDim) -> Result<Precoder> {
    let forward: Vec<ComplexMatrix> = backward.iter().map(ComplexMatrix::transpose).collect();
    ebf_precoder(&forward, null_dim)
}

/// Mean over tones of `‖H_ps(k)·conj(P(k))‖²`.
pub fn residual_interference_power(h_ps: &[ComplexMatrix], precoder: &Precoder) -> Result<f64> {
    if h_ps.len() != precoder.num_subcarriers() || h_ps.is_empty() {
        return Err(contract("channel and precoder tone counts differ"));
    }
    let mut total = 0.0;
    for (k, h) in h_ps.iter().enumerate() {
        total += norm_sqr(&h.mul_vec(&precoder.transmit_vector(k))?);
    }
    Ok(total / h_ps.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, rng_from_seed};
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
    }

    #[test]
    fn covariance_of_single_and_opposed_samples() {
        let y = vec![c(1., 2.), c(-0.5, 0.25)];
        let g = SampleGrid::from_fn(1, 1, 2, |_, _, cell| cell.copy_from_slice(&y));
        let cov = accumulate_covariance(&g).unwrap();
        assert_eq!(cov.per_subcarrier[0], ComplexMatrix::outer(&y, &y));
        let g2 = SampleGrid::from_fn(2, 1, 2, |l, _, cell| {
            let s = if l == 0 { 1.0 } else { -1.0 };
            cell[0] = y[0] * s;
            cell[1] = y[1] * s;
        });
        let cov2 = accumulate_covariance(&g2).unwrap();
        assert_eq!(cov2.per_subcarrier[0], ComplexMatrix::outer(&y, &y).scale(c(2., 0.)));
    }

    #[test]
    fn empty_overhearing_rejected() {
        assert_eq!(accumulate_covariance(&SampleGrid::zeros(0, 4, 2)), Err(Error::NoOverheardSamples));
    }

    #[test]
    fn covariance_of_white_samples_near_identity() {
        let mut rng = rng_from_seed(1);
        let n = 10_000;
        let g = SampleGrid::from_fn(n, 1, 2, |_, _, cell| {
            for z in cell.iter_mut() {
                *z = complex_gaussian(&mut rng, 1.0);
            }
        });
        let cov = accumulate_covariance(&g).unwrap().per_subcarrier[0].scale(c(1.0 / n as f64, 0.));
        assert!(cov.sub(&ComplexMatrix::identity(2)).unwrap().max_abs() < 0.05);
    }

    #[test]
    fn min_eigvector_of_diagonal() {
        let u = min_eigvectors(&ComplexMatrix::from_real_diag(&[5.0, 0.0]), NullDim::default()).unwrap();
        assert_eq!(u, vec![vec![c(0., 0.), c(1., 0.)]]);
    }

    #[test]
    fn null_space_orthogonal_to_rank_one_interference() {
        let mut rng = rng_from_seed(2);
        for ms in [2, 3] {
            for _ in 0..100 {
                let h = random_vec(&mut rng, ms);
                let u = min_eigvectors(&ComplexMatrix::outer(&h, &h), NullDim::default()).unwrap();
                assert_eq!(u.len(), ms - 1);
                let hn = norm_sqr(&h).sqrt();
                for ui in &u {
                    assert!(inner(ui, &h).norm() <= 1e-9 * hn);
                    assert!((norm_sqr(ui) - 1.0).abs() < 1e-12);
                }
                if ms == 3 {
                    assert!(inner(&u[0], &u[1]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_rank_covariance_has_no_null_space() {
        let err = min_eigvectors(&ComplexMatrix::identity(2).scale(c(3., 0.)), NullDim::default());
        // identical eigenvalues: nothing below 1e-6·λ_max
        assert_eq!(err, Err(Error::InsufficientDof { antennas: 2 }));
        assert!(min_eigvectors(&ComplexMatrix::identity(2), NullDim::Known { count: 0 }).is_err());
        assert!(min_eigvectors(&ComplexMatrix::identity(2), NullDim::Known { count: 3 }).is_err());
    }

    #[test]
    fn precoder_combination() {
        let u1 = vec![c(1., 0.), c(0., 0.), c(0., 0.)];
        let u2 = vec![c(0., 0.), c(0., 1.), c(0., 0.)];
        assert_eq!(build_precoder(&[u1.clone()], None).unwrap().0, u1);
        assert_eq!(build_precoder(&[u1.clone(), u2.clone()], Some(&[1.0, 0.0])).unwrap().0, u1);
        let (p, a) = build_precoder(&[u1.clone(), u2.clone()], None).unwrap();
        assert!((norm_sqr(&p) - 1.0).abs() < 1e-12);
        assert!((a[0] - a[1]).abs() < 1e-15);
        let th: f64 = 0.3;
        let (p, _) = build_precoder(&[u1.clone(), u2.clone()], Some(&[th.cos(), th.sin()])).unwrap();
        assert!((norm_sqr(&p) - 1.0).abs() < 1e-10);
        assert!(build_precoder(&[u1, u2], Some(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn alpha_trivial_cases() {
        let u1 = vec![c(1., 0.), c(0., 0.)];
        let h = ComplexMatrix::new(1, 2, vec![c(1., 0.), c(0., 0.)]).unwrap();
        assert_eq!(optimize_alpha(&[u1.clone()], &h).unwrap(), vec![1.0]);
        // second basis vector invisible to the secondary channel
        let u2 = vec![c(0., 0.), c(1., 0.)];
        assert_eq!(optimize_alpha(&[u1, u2], &h).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn optimized_alpha_beats_random_search() {
        let mut rng = rng_from_seed(3);
        for _ in 0..5 {
            let hp = random_vec(&mut rng, 3);
            let u = min_eigvectors(&ComplexMatrix::outer(&hp, &hp), NullDim::Known { count: 2 }).unwrap();
            let h_ss = ComplexMatrix::new(1, 3, random_vec(&mut rng, 3)).unwrap();
            let power = |a: &[f64]| {
                let (p, _) = build_precoder(&u, Some(a)).unwrap();
                let conj: Vec<Complex64> = p.iter().map(|z| z.conj()).collect();
                norm_sqr(&h_ss.mul_vec(&conj).unwrap())
            };
            let best = optimize_alpha(&u, &h_ss).unwrap();
            let opt = power(&best);
            let uniform = power(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
            assert!(opt >= uniform - 1e-12);
            let mut search_best: f64 = 0.0;
            for _ in 0..10_000 {
                let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                search_best = search_best.max(power(&[th.cos(), th.sin()]));
            }
            assert!(opt >= search_best - 1e-9, "{opt} < {search_best}");
        }
    }

    #[test]
    fn ebf_on_unit_column() {
        let h_fwd = ComplexMatrix::new(1, 2, vec![c(1., 0.), c(0., 0.)]).unwrap();
        let p = ebf_precoder(&[h_fwd.clone()], NullDim::Known { count: 1 }).unwrap();
        assert_eq!(p.vectors[0], vec![c(0., 0.), c(1., 0.)]);
        assert!(ibf_precoder(&[h_fwd.transpose()], NullDim::Known { count: 1 }).unwrap() == p);
    }

    #[test]
    fn ebf_nulls_random_channels() {
        let mut rng = rng_from_seed(4);
        for (mp, ms) in [(1, 2), (1, 3), (2, 3)] {
            for _ in 0..200 {
                let h = ComplexMatrix::new(mp, ms, random_vec(&mut rng, mp * ms)).unwrap();
                let p = ebf_precoder(&[h.clone()], NullDim::Known { count: ms - mp }).unwrap();
                assert!(residual_interference_power(&[h], &p).unwrap().sqrt() <= 1e-9);
            }
        }
    }

    #[test]
    fn residual_power_cases() {
        let h = ComplexMatrix::new(1, 2, vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        // P·conj = h* so the received amplitude is ‖h‖² = 1
        let aligned = Precoder {
            vectors: vec![vec![c(0.6, 0.0), c(0.0, 0.8)]],
            alphas: vec![vec![]],
        };
        assert!((residual_interference_power(&[h.clone()], &aligned).unwrap() - 1.0).abs() < 1e-15);
        let orth = Precoder {
            vectors: vec![vec![c(0.0, 0.8), c(0.6, 0.0)]],
            alphas: vec![vec![]],
        };
        assert!(residual_interference_power(&[h], &orth).unwrap() <= 1e-18);
    }

    #[test]
    fn residual_matches_direct_evaluation() {
        let mut rng = rng_from_seed(5);
        let hs: Vec<ComplexMatrix> = (0..6)
            .map(|_| ComplexMatrix::new(2, 3, random_vec(&mut rng, 6)).unwrap())
            .collect();
        let p = Precoder::uniform(3, 6);
        let s = 1.0 / 3f64.sqrt();
        let mut direct = 0.0;
        for h in &hs {
            for r in 0..2 {
                let y = (h[(r, 0)] + h[(r, 1)] + h[(r, 2)]) * s;
                direct += y.norm_sqr();
            }
        }
        direct /= 6.0;
        assert!((residual_interference_power(&hs, &p).unwrap() - direct).abs() < 1e-12);
    }
}
