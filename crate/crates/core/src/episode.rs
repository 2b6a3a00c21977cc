//! Episode engine for the two-phase protocol.
//!
//! Phase I: PU 2 sends backward traffic and SU 1 records what it hears while
//! SU 2 idles. Phase II: PU 1 sends forward traffic to PU 2 while SU 1 sends a
//! precoded frame to SU 2. Every random draw comes from a stream derived from
//! `Scenario::seed` and a purpose tag, so changing one knob (precoder, pilot
//! count) leaves the other draws untouched.
//!
//! SU 1 is told where the phase boundary is; it does not detect it.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bbf::{blind_precoder, ebf_precoder, ibf_precoder, residual_interference_power, AlphaPolicy, NullDim, Precoder};
use crate::bic::{build_filter, collect_pilot_statistics, decode, zf_decode};
use crate::channel::{awgn, sample_channel, ChannelConfig, ChannelRealization, ReciprocityModel};
use crate::error::{contract, Error, Result};
use crate::grid::SampleGrid;
use crate::linalg::{pinv_hermitian, ComplexMatrix, DEFAULT_PINV_TOL};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::waveform::{
    build_secondary_frame, demodulate_symbols, generate_primary_signal, Constellation, FrameLayout, OfdmConfig,
    PrimaryKind, SecondaryFrame,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderMode {
    #[default]
    Bbf,
    /// Null steering on the true forward channel (explicit feedback).
    Ebf,
    /// Null steering on the true backward channel, transposed.
    Ibf,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    #[default]
    Bic,
    Zf,
}

/// How many null-space vectors the precoder combines.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NullDimPolicy {
    /// `M_s − M_p`.
    #[default]
    Known,
    Threshold { rel_gap_tol: f64 },
}

/// Amplitude gains per link in dB, on top of the unit-gain fading.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkGains {
    /// SU 1 → SU 2.
    pub secondary_db: f64,
    /// PU 1 → PU 2.
    pub primary_db: f64,
    /// SU 1 ↔ PU 2, both directions.
    pub su_pu_db: f64,
    /// PU 1 → SU 2.
    pub pu_su_db: f64,
}

impl LinkGains {
    fn amplitude(db: f64) -> f64 {
        10f64.powf(db / 20.0)
    }
}

/// Everything needed to run one episode.
///
/// SNRs are relative to unit transmit power per antenna through a unit-gain
/// channel; `f64::INFINITY` means noise-free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub m_p: usize,
    pub m_s: usize,
    pub primary: PrimaryKind,
    /// Correlation between the primary's antenna streams.
    pub primary_correlation: f64,
    pub overhear_snr_db: f64,
    pub data_snr_db: f64,
    /// Total secondary transmit power.
    pub secondary_power_db: f64,
    /// Primary transmit power per antenna.
    pub primary_power_db: f64,
    /// Power control: cap the secondary power so its ground-truth interference
    /// at PU 2 sits this far from the per-antenna noise power.
    pub interference_margin_db: Option<f64>,
    pub reciprocity: ReciprocityModel,
    pub channel: ChannelConfig,
    /// Correlation of the SU 1 ↔ PU 2 taps between the two phases.
    pub coherence: f64,
    pub link_gains: LinkGains,
    /// `L_p`.
    pub overhear_symbols: usize,
    pub payload_symbols: usize,
    pub layout: FrameLayout,
    pub neighbor_radius: usize,
    pub constellation: Constellation,
    pub precoder: PrecoderMode,
    pub detector: DetectorMode,
    pub null_dim: NullDimPolicy,
    /// Weight the null-space vectors for received power (uses the true
    /// secondary channel).
    pub optimize_alpha: bool,
    pub pinv_tol: f64,
    pub ofdm: OfdmConfig,
    pub seed: u64,
    /// Draw the channels from this seed instead of `seed`, so several
    /// episodes can share one channel realization.
    pub channel_seed: Option<u64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            m_p: 1,
            m_s: 2,
            primary: PrimaryKind::Ofdm,
            primary_correlation: 0.0,
            overhear_snr_db: 20.0,
            data_snr_db: 25.0,
            secondary_power_db: 0.0,
            primary_power_db: 0.0,
            interference_margin_db: None,
            reciprocity: ReciprocityModel::Ideal,
            channel: ChannelConfig::default(),
            coherence: 1.0,
            link_gains: LinkGains::default(),
            overhear_symbols: 40,
            payload_symbols: 50,
            layout: FrameLayout::default(),
            neighbor_radius: 1,
            constellation: Constellation::Qpsk,
            precoder: PrecoderMode::Bbf,
            detector: DetectorMode::Bic,
            null_dim: NullDimPolicy::Known,
            optimize_alpha: false,
            pinv_tol: DEFAULT_PINV_TOL,
            ofdm: OfdmConfig::secondary_5msps(),
            seed: 0,
            channel_seed: None,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Scenario {
        field,
        reason: reason.into(),
    }
}

/// `10^(−snr/10)`; zero for an infinite SNR.
pub fn noise_power(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.m_p) {
            return Err(invalid("m_p", format!("{} not in {{1, 2}}", self.m_p)));
        }
        if !(2..=3).contains(&self.m_s) {
            return Err(invalid("m_s", format!("{} not in {{2, 3}}", self.m_s)));
        }
        if self.m_s <= self.m_p {
            return Err(invalid(
                "m_s",
                format!(
                    "m_s = {} must exceed m_p = {}: a secondary user needs more antennas than a primary user",
                    self.m_s, self.m_p
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.primary_correlation) {
            return Err(invalid("primary_correlation", "must lie in [0, 1]"));
        }
        for (field, snr) in [("overhear_snr_db", self.overhear_snr_db), ("data_snr_db", self.data_snr_db)] {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(invalid(field, "must be a number or +inf"));
            }
        }
        for (field, p) in [
            ("secondary_power_db", self.secondary_power_db),
            ("primary_power_db", self.primary_power_db),
            ("link_gains.secondary_db", self.link_gains.secondary_db),
            ("link_gains.primary_db", self.link_gains.primary_db),
            ("link_gains.su_pu_db", self.link_gains.su_pu_db),
            ("link_gains.pu_su_db", self.link_gains.pu_su_db),
        ] {
            if !p.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if let Some(m) = self.interference_margin_db {
            if !m.is_finite() {
                return Err(invalid("interference_margin_db", "must be finite"));
            }
            if !self.data_snr_db.is_finite() {
                return Err(invalid("interference_margin_db", "needs a finite data_snr_db"));
            }
        }
        if let ReciprocityModel::Perturbed { perturbation_db } = self.reciprocity {
            if !(perturbation_db >= 0.0 && perturbation_db.is_finite()) {
                return Err(invalid("reciprocity", "perturbation_db must be finite and non-negative"));
            }
        }
        if self.channel.tap_count == 0 || self.channel.tap_count > self.ofdm.cp_length {
            return Err(invalid(
                "channel",
                format!("tap_count must be in 1..={}", self.ofdm.cp_length),
            ));
        }
        if !self.channel.decay_db_per_tap.is_finite() {
            return Err(invalid("channel", "decay_db_per_tap must be finite"));
        }
        if !(0.0..=1.0).contains(&self.coherence) {
            return Err(invalid("coherence", "must lie in [0, 1]"));
        }
        if self.payload_symbols == 0 {
            return Err(invalid("payload_symbols", "must be at least 1"));
        }
        if self.layout.pilot_symbols == 0 {
            return Err(invalid("layout", "pilot_symbols must be at least 1"));
        }
        if let PrimaryKind::Cdma { spreading_factor } = self.primary {
            if !(1..=1023).contains(&spreading_factor) {
                return Err(invalid("primary", "spreading_factor must be in 1..=1023"));
            }
        }
        if let NullDimPolicy::Threshold { rel_gap_tol } = self.null_dim {
            if !(rel_gap_tol > 0.0 && rel_gap_tol < 1.0) {
                return Err(invalid("null_dim", "rel_gap_tol must lie in (0, 1)"));
            }
        }
        if !(self.pinv_tol > 0.0 && self.pinv_tol < 1.0) {
            return Err(invalid("pinv_tol", "must lie in (0, 1)"));
        }
        self.ofdm.validate().map_err(|e| invalid("ofdm", e.to_string()))
    }

    fn rng(&self, tag: u64) -> SimRng {
        rng_from_seed(self.stream_seed(tag))
    }

    fn stream_seed(&self, tag: u64) -> u64 {
        derive_seed(self.seed, &[tag])
    }

    fn null_dim(&self) -> NullDim {
        match self.null_dim {
            NullDimPolicy::Known => NullDim::Known {
                count: self.m_s - self.m_p,
            },
            NullDimPolicy::Threshold { rel_gap_tol } => NullDim::Threshold { rel_gap_tol },
        }
    }
}

const TAG_CHANNELS: u64 = 1;
const TAG_PRIMARY_BACKWARD: u64 = 2;
const TAG_PRIMARY_FORWARD: u64 = 3;
const TAG_PAYLOAD: u64 = 4;
const TAG_OVERHEAR_NOISE: u64 = 5;
const TAG_SU_NOISE: u64 = 6;
const TAG_PU_NOISE: u64 = 7;
const TAG_RECIPROCITY: u64 = 8;
const TAG_DRIFT: u64 = 9;

/// The five links of an episode. Link gains are not folded in.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeChannels {
    /// PU 2 → SU 1 during Phase I (`M_s × M_p`).
    pub overhear: ChannelRealization,
    /// SU 1 → PU 2 during Phase II (`M_p × M_s`).
    pub su_to_pu: ChannelRealization,
    /// SU 1 → SU 2 (`M_s × M_s`).
    pub secondary: ChannelRealization,
    /// PU 1 → SU 2 (`M_s × M_p`).
    pub pu_to_su: ChannelRealization,
    /// PU 1 → PU 2 (`M_p × M_p`).
    pub primary: ChannelRealization,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOne {
    /// What SU 1 heard, `M_s` per cell.
    pub overheard: SampleGrid,
    pub channels: EpisodeChannels,
}

/// A received grid and its ground-truth parts (`total = signal +
/// interference + noise`).
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedParts {
    pub signal: SampleGrid,
    pub interference: SampleGrid,
    pub noise: SampleGrid,
    pub total: SampleGrid,
}

impl ReceivedParts {
    fn new(signal: SampleGrid, interference: SampleGrid, noise: SampleGrid) -> Result<Self> {
        let total = signal.add(&interference)?.add(&noise)?;
        Ok(Self {
            signal,
            interference,
            noise,
            total,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub overheard: SampleGrid,
    pub channels: EpisodeChannels,
    pub precoder: Precoder,
    /// Secondary transmit power after power control (linear).
    pub secondary_power: f64,
    pub frame: SecondaryFrame,
    /// At SU 2: signal from SU 1, interference from PU 1.
    pub su2: ReceivedParts,
    /// At PU 2: signal from PU 1, interference from SU 1.
    pub pu2: ReceivedParts,
    /// Decoded payload symbols at SU 2.
    pub decoded_payload: SampleGrid,
    pub payload_bits: Vec<u8>,
    pub decoded_bits: Vec<u8>,
    /// What PU 1 sent, unit power per stream.
    pub primary_reference: SampleGrid,
    /// PU 2's estimates of its streams with and without SU 1 on the air.
    pub primary_decoded: SampleGrid,
    pub primary_decoded_off: SampleGrid,
    /// Ground-truth mean over tones of the secondary power reaching PU 2.
    pub residual_interference: f64,
    /// The same with a uniform precoder at the same transmit power.
    pub uniform_interference: f64,
    /// Mean received power at PU 2 with PU 1 silent: SU 1 plus noise.
    pub pu2_power: f64,
    /// The same with a uniform precoder and the same noise.
    pub pu2_uniform_power: f64,
    pub bandwidth_hz: f64,
}

impl EpisodeResult {
    pub fn bit_errors(&self) -> usize {
        self.payload_bits.iter().zip(&self.decoded_bits).filter(|(a, b)| a != b).count()
    }
}

/// Draws the channels and records what SU 1 overhears.
pub fn run_phase1(scenario: &Scenario) -> Result<PhaseOne> {
    scenario.validate()?;
    if scenario.overhear_symbols == 0 {
        return Err(Error::NoOverheardSamples);
    }
    let (m_p, m_s) = (scenario.m_p, scenario.m_s);
    let ofdm = &scenario.ofdm;
    let mut rng = match scenario.channel_seed {
        Some(seed) => rng_from_seed(derive_seed(seed, &[TAG_CHANNELS])),
        None => scenario.rng(TAG_CHANNELS),
    };
    let overhear = sample_channel(m_s, m_p, &scenario.channel, ofdm, &mut rng)?;
    let secondary = sample_channel(m_s, m_s, &scenario.channel, ofdm, &mut rng)?;
    let pu_to_su = sample_channel(m_s, m_p, &scenario.channel, ofdm, &mut rng)?;
    let primary = sample_channel(m_p, m_p, &scenario.channel, ofdm, &mut rng)?;
    let su_to_pu = overhear
        .drift(scenario.coherence, &scenario.channel, &mut scenario.rng(TAG_DRIFT))?
        .reciprocal(&scenario.reciprocity, &mut scenario.rng(TAG_RECIPROCITY));

    if scenario.reciprocity == ReciprocityModel::Ideal && scenario.coherence == 1.0 {
        let exact = (0..overhear.num_subcarriers()).all(|k| su_to_pu.at(k) == &overhear.at(k).transpose());
        if !exact {
            return Err(contract("ideal reciprocity produced a non-transposed channel"));
        }
    }

    let backward = generate_primary_signal(
        scenario.primary,
        m_p,
        scenario.overhear_symbols,
        ofdm,
        scenario.primary_correlation,
        scenario.stream_seed(TAG_PRIMARY_BACKWARD),
    )?;
    let gain = LinkGains::amplitude(scenario.primary_power_db) * LinkGains::amplitude(scenario.link_gains.su_pu_db);
    let heard = overhear.propagate(&backward.grid)?.scale(gain);
    let noise = awgn(
        heard.symbols(),
        heard.subcarriers(),
        m_s,
        noise_power(scenario.overhear_snr_db),
        &mut scenario.rng(TAG_OVERHEAR_NOISE),
    )?;
    Ok(PhaseOne {
        overheard: heard.add(&noise)?,
        channels: EpisodeChannels {
            overhear,
            su_to_pu,
            secondary,
            pu_to_su,
            primary,
        },
    })
}

/// The precoder SU 1 uses in Phase II under `scenario.precoder`.
pub fn build_scenario_precoder(scenario: &Scenario, phase1: &PhaseOne) -> Result<Precoder> {
    let ch = &phase1.channels;
    match scenario.precoder {
        PrecoderMode::Bbf => {
            let policy = if scenario.optimize_alpha {
                AlphaPolicy::Optimized(ch.secondary.responses())
            } else {
                AlphaPolicy::Uniform
            };
            blind_precoder(&phase1.overheard, scenario.null_dim(), policy)
        }
        PrecoderMode::Ebf => ebf_precoder(ch.su_to_pu.responses(), scenario.null_dim()),
        PrecoderMode::Ibf => ibf_precoder(ch.overhear.responses(), scenario.null_dim()),
        PrecoderMode::Uniform => Ok(Precoder::uniform(scenario.m_s, ch.secondary.num_subcarriers())),
    }
}

fn random_bits(count: usize, rng: &mut SimRng) -> Vec<u8> {
    (0..count).map(|_| u8::from(rng.random::<bool>())).collect()
}

/// Genie zero forcing of the primary streams: `(H*H)⁺H*·y / a`.
fn primary_zf(h: &[ComplexMatrix], amplitude: f64, received: &SampleGrid) -> Result<SampleGrid> {
    let filters: Vec<ComplexMatrix> = h
        .iter()
        .map(|hk| {
            let hh = hk.conj_transpose();
            pinv_hermitian(&hh.matmul(hk)?, DEFAULT_PINV_TOL)?
                .matmul(&hh)
                .map(|w| w.scale(Complex64::new(1.0 / amplitude, 0.0)))
        })
        .collect::<Result<_>>()?;
    let m_p = h.first().map_or(0, ComplexMatrix::cols);
    Ok(SampleGrid::from_fn(received.symbols(), received.subcarriers(), m_p, |l, k, out| {
        out.copy_from_slice(&filters[k].mul_vec_unchecked(received.at(l, k)));
    }))
}

/// Concurrent transmission with a given precoder.
pub fn run_phase2(scenario: &Scenario, phase1: &PhaseOne, precoder: &Precoder) -> Result<EpisodeResult> {
    scenario.validate()?;
    let ofdm = &scenario.ofdm;
    let n = ofdm.num_valid();
    if precoder.num_subcarriers() != n || precoder.antennas() != scenario.m_s {
        return Err(contract("precoder does not match the scenario's tones and antennas"));
    }
    let ch = &phase1.channels;
    let gains = &scenario.link_gains;
    let g_ss = LinkGains::amplitude(gains.secondary_db);
    let g_pp = LinkGains::amplitude(gains.primary_db);
    let g_x = LinkGains::amplitude(gains.su_pu_db);
    let g_ps = LinkGains::amplitude(gains.pu_su_db);
    let amp_p = LinkGains::amplitude(scenario.primary_power_db);
    let noise = noise_power(scenario.data_snr_db);

    let bit_count = scenario.payload_symbols * n * scenario.constellation.bits_per_symbol();
    let payload_bits = random_bits(bit_count, &mut scenario.rng(TAG_PAYLOAD));
    let frame = build_secondary_frame(
        &payload_bits,
        scenario.constellation,
        ofdm,
        &scenario.layout,
        scenario.payload_symbols,
    )?;
    let forward = generate_primary_signal(
        scenario.primary,
        scenario.m_p,
        frame.symbols(),
        ofdm,
        scenario.primary_correlation,
        scenario.stream_seed(TAG_PRIMARY_FORWARD),
    )?;

    // secondary power, capped by power control
    let uniform = Precoder::uniform(scenario.m_s, n);
    let leak = residual_interference_power(ch.su_to_pu.responses(), precoder)? * g_x * g_x;
    let uniform_leak = residual_interference_power(ch.su_to_pu.responses(), &uniform)? * g_x * g_x;
    let mut secondary_power = 10f64.powf(scenario.secondary_power_db / 10.0);
    if let Some(margin) = scenario.interference_margin_db {
        let target = scenario.m_p as f64 * noise * 10f64.powf(margin / 10.0);
        if leak > 0.0 {
            secondary_power = secondary_power.min(target / leak);
        }
    }
    let amp_s = secondary_power.sqrt();
    let tx = precoder.apply(&frame.grid, amp_s)?;

    let (symbols, m_s, m_p) = (frame.symbols(), scenario.m_s, scenario.m_p);
    let su2 = ReceivedParts::new(
        ch.secondary.propagate(&tx)?.scale(g_ss),
        ch.pu_to_su.propagate(&forward.grid)?.scale(amp_p * g_ps),
        awgn(symbols, n, m_s, noise, &mut scenario.rng(TAG_SU_NOISE))?,
    )?;
    let pu2 = ReceivedParts::new(
        ch.primary.propagate(&forward.grid)?.scale(amp_p * g_pp),
        ch.su_to_pu.propagate(&tx)?.scale(g_x),
        awgn(symbols, n, m_p, noise, &mut scenario.rng(TAG_PU_NOISE))?,
    )?;
    let uniform_at_pu = ch.su_to_pu.propagate(&uniform.apply(&frame.grid, amp_s)?)?.scale(g_x);

    let decoded = match scenario.detector {
        DetectorMode::Bic => {
            let stats = collect_pilot_statistics(&su2.total, &frame, scenario.neighbor_radius)?;
            decode(&build_filter(&stats, scenario.pinv_tol)?, &su2.total)?
        }
        DetectorMode::Zf => {
            let h: Vec<ComplexMatrix> = ch
                .secondary
                .responses()
                .iter()
                .map(|m| m.scale(Complex64::new(g_ss, 0.0)))
                .collect();
            let w: Vec<Vec<Complex64>> = (0..n)
                .map(|k| precoder.transmit_vector(k).into_iter().map(|z| z * amp_s).collect())
                .collect();
            zf_decode(&h, &w, &su2.total)?
        }
    };
    let decoded_payload = decoded.symbol_range(frame.pilot_symbol_count, symbols);
    let decoded_bits = demodulate_symbols(decoded_payload.raw(), scenario.constellation);

    let off = pu2.signal.add(&pu2.noise)?;
    let primary_decoded = primary_zf(ch.primary.responses(), amp_p * g_pp, &pu2.total)?;
    let primary_decoded_off = primary_zf(ch.primary.responses(), amp_p * g_pp, &off)?;

    Ok(EpisodeResult {
        overheard: phase1.overheard.clone(),
        channels: ch.clone(),
        precoder: precoder.clone(),
        secondary_power,
        pu2_power: pu2.interference.add(&pu2.noise)?.mean_power(),
        pu2_uniform_power: uniform_at_pu.add(&pu2.noise)?.mean_power(),
        residual_interference: leak * secondary_power,
        uniform_interference: uniform_leak * secondary_power,
        frame,
        su2,
        pu2,
        decoded_payload,
        payload_bits,
        decoded_bits,
        primary_reference: forward.grid,
        primary_decoded,
        primary_decoded_off,
        bandwidth_hz: ofdm.sample_rate,
    })
}

/// Phase I, precoder construction, Phase II.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeResult> {
    let phase1 = run_phase1(scenario)?;
    let precoder = build_scenario_precoder(scenario, &phase1)?;
    run_phase2(scenario, &phase1, &precoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbf::accumulate_covariance;
    use crate::linalg::hermitian_eig;

    fn noiseless(m_p: usize, m_s: usize, seed: u64) -> Scenario {
        Scenario {
            m_p,
            m_s,
            overhear_snr_db: f64::INFINITY,
            data_snr_db: f64::INFINITY,
            seed,
            ..Scenario::default()
        }
    }

    #[test]
    fn validation_names_fields() {
        let bad = |s: Scenario| match s.validate() {
            Err(Error::Scenario { field, .. }) => field,
            other => panic!("expected scenario error, got {other:?}"),
        };
        assert_eq!(bad(Scenario { m_p: 2, m_s: 2, ..Scenario::default() }), "m_s");
        assert_eq!(bad(Scenario { m_p: 3, m_s: 3, ..Scenario::default() }), "m_p");
        assert_eq!(bad(Scenario { m_s: 4, ..Scenario::default() }), "m_s");
        assert_eq!(bad(Scenario { coherence: 1.5, ..Scenario::default() }), "coherence");
        assert_eq!(bad(Scenario { payload_symbols: 0, ..Scenario::default() }), "payload_symbols");
        assert_eq!(bad(Scenario { data_snr_db: f64::NAN, ..Scenario::default() }), "data_snr_db");
        assert_eq!(
            bad(Scenario {
                interference_margin_db: Some(-10.0),
                data_snr_db: f64::INFINITY,
                ..Scenario::default()
            }),
            "interference_margin_db"
        );
        for (m_p, m_s) in [(1, 2), (1, 3), (2, 3)] {
            Scenario { m_p, m_s, ..Scenario::default() }.validate().unwrap();
        }
    }

    #[test]
    fn zero_overhearing_rejected() {
        let s = Scenario {
            overhear_symbols: 0,
            ..Scenario::default()
        };
        assert_eq!(run_phase1(&s), Err(Error::NoOverheardSamples));
    }

    #[test]
    fn noiseless_overhearing_has_rank_m_p() {
        for (m_p, m_s) in [(1, 2), (1, 3), (2, 3)] {
            let p1 = run_phase1(&noiseless(m_p, m_s, 7)).unwrap();
            let cov = accumulate_covariance(&p1.overheard).unwrap();
            for c in &cov.per_subcarrier {
                let ev = hermitian_eig(c).unwrap().eigenvalues;
                let top = ev[m_s - 1];
                for v in &ev[..m_s - m_p] {
                    assert!(*v <= 1e-9 * top);
                }
            }
        }
    }

    #[test]
    fn phase1_is_deterministic() {
        let s = Scenario {
            seed: 99,
            ..Scenario::default()
        };
        assert_eq!(run_phase1(&s).unwrap(), run_phase1(&s).unwrap());
        let other = Scenario { seed: 100, ..s.clone() };
        assert_ne!(run_phase1(&s).unwrap().overheard, run_phase1(&other).unwrap().overheard);
    }

    #[test]
    fn channel_seed_pins_channels_only() {
        let a = Scenario {
            seed: 1,
            channel_seed: Some(7),
            ..Scenario::default()
        };
        let b = Scenario { seed: 2, ..a.clone() };
        let (pa, pb) = (run_phase1(&a).unwrap(), run_phase1(&b).unwrap());
        assert_eq!(pa.channels, pb.channels);
        assert_ne!(pa.overheard, pb.overheard);
        let free = run_phase1(&Scenario { channel_seed: None, ..a }).unwrap();
        assert_ne!(free.channels, pa.channels);
    }

    #[test]
    fn reciprocal_channel_is_transpose() {
        let p1 = run_phase1(&Scenario::default()).unwrap();
        for k in 0..52 {
            assert_eq!(p1.channels.su_to_pu.at(k), &p1.channels.overhear.at(k).transpose());
        }
    }

    #[test]
    fn bbf_nulls_and_bic_decodes_without_noise() {
        for (m_p, m_s) in [(1, 2), (1, 3), (2, 3)] {
            let s = Scenario {
                channel: ChannelConfig::flat(),
                ..noiseless(m_p, m_s, 3)
            };
            let ep = run_episode(&s).unwrap();
            assert!(ep.residual_interference <= 1e-16 * ep.secondary_power);
            assert!(ep.uniform_interference > 1e-3);
            assert_eq!(ep.bit_errors(), 0);
        }
    }

    #[test]
    fn uniform_precoder_still_decodes() {
        let s = Scenario {
            precoder: PrecoderMode::Uniform,
            channel: ChannelConfig::flat(),
            ..noiseless(1, 2, 5)
        };
        let ep = run_episode(&s).unwrap();
        assert!(ep.residual_interference > 1e-3);
        let err = ep
            .decoded_payload
            .raw()
            .iter()
            .zip(ep.frame.payload().raw())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-7);
    }

    #[test]
    fn zf_fails_under_strong_interference() {
        let s = Scenario {
            detector: DetectorMode::Zf,
            primary_power_db: 10.0,
            ..Scenario::default()
        };
        let ep = run_episode(&s).unwrap();
        assert!(ep.bit_errors() as f64 > 0.1 * ep.payload_bits.len() as f64);
    }

    #[test]
    fn parts_add_up() {
        let ep = run_episode(&Scenario::default()).unwrap();
        let sum = ep.su2.signal.add(&ep.su2.interference).unwrap().add(&ep.su2.noise).unwrap();
        assert_eq!(sum, ep.su2.total);
        assert_eq!(ep.decoded_payload.symbols(), 50);
        assert_eq!(ep.decoded_payload.subcarriers(), 52);
        assert_eq!(ep.decoded_bits.len(), ep.payload_bits.len());
    }

    #[test]
    fn power_control_sets_interference() {
        let s = Scenario {
            interference_margin_db: Some(-10.0),
            secondary_power_db: 30.0,
            ..Scenario::default()
        };
        let ep = run_episode(&s).unwrap();
        let target = noise_power(25.0) * 0.1;
        assert!((ep.residual_interference - target).abs() < 1e-9 * target);
        // a cap above the current power leaves it alone
        let loose = Scenario {
            interference_margin_db: Some(60.0),
            ..s.clone()
        };
        assert_eq!(run_episode(&loose).unwrap().secondary_power, 1000.0);
    }

    #[test]
    fn common_noise_across_precoders() {
        let base = Scenario {
            seed: 17,
            ..Scenario::default()
        };
        let a = run_episode(&base).unwrap();
        let b = run_episode(&Scenario {
            precoder: PrecoderMode::Ebf,
            ..base.clone()
        })
        .unwrap();
        assert_eq!(a.pu2.noise, b.pu2.noise);
        assert_eq!(a.pu2_uniform_power, b.pu2_uniform_power);
        assert!(b.residual_interference < 1e-20);
    }

    #[test]
    fn ebf_and_ibf_agree_under_ideal_reciprocity() {
        let base = Scenario {
            seed: 4,
            m_p: 2,
            m_s: 3,
            ..Scenario::default()
        };
        let p1 = run_phase1(&base).unwrap();
        let e = build_scenario_precoder(&Scenario { precoder: PrecoderMode::Ebf, ..base.clone() }, &p1).unwrap();
        let i = build_scenario_precoder(&Scenario { precoder: PrecoderMode::Ibf, ..base.clone() }, &p1).unwrap();
        assert_eq!(e, i);
    }

    #[test]
    fn primary_decodes_cleanly_when_alone() {
        let s = Scenario {
            precoder: PrecoderMode::Ebf,
            ..noiseless(2, 3, 8)
        };
        let ep = run_episode(&s).unwrap();
        for (a, b) in ep.primary_decoded.raw().iter().zip(ep.primary_reference.raw()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn precoder_shape_checked() {
        let s = Scenario::default();
        let p1 = run_phase1(&s).unwrap();
        assert!(run_phase2(&s, &p1, &Precoder::uniform(3, 52)).is_err());
    }
}
