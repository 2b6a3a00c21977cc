//! Experiment runners.
//!
//! A spec expands into axis points; each point runs `episodes` episodes.
//! Episode `e` gets the same seed at every axis point, so modes and sweep
//! values are compared on identical channels, payloads and noise. Episodes
//! of one point run in parallel and are written in episode order, followed
//! by that point's mean, min and max rows.

use std::fmt;

use crnsim_core::channel::ChannelConfig;
use crnsim_core::episode::{DetectorMode, LinkGains, PrecoderMode};
use crnsim_core::rng::{derive_seed, rng_from_seed};
use crnsim_core::{run_episode, EpisodeResult, MetricsReport, Scenario};
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::{CliError, Result};
use crate::output::{ResultRow, RowKind, RowSink};

const EPISODE_STREAM: u64 = 0x6570;
const LOCATION_STREAM: u64 = 0x6c6f;

pub fn episode_seed(master: u64, episode: usize) -> u64 {
    derive_seed(master, &[EPISODE_STREAM, episode as u64])
}

/// Channel seed and link-gain offsets of one location.
pub fn location(master: u64, index: usize, spread_db: f64) -> (u64, LinkGains) {
    let mut rng = rng_from_seed(derive_seed(master, &[LOCATION_STREAM, index as u64]));
    let half = spread_db / 2.0;
    let mut draw = || rng.random_range(-half..=half);
    let gains = LinkGains {
        secondary_db: draw(),
        primary_db: draw(),
        su_pu_db: draw(),
        pu_su_db: draw(),
    };
    (derive_seed(master, &[LOCATION_STREAM, index as u64, 1]), gains)
}

/// One combination of sweep values.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPoint {
    pub m_p: usize,
    pub m_s: usize,
    pub snr_db: f64,
    pub pilot_symbols: Option<usize>,
    pub location: Option<usize>,
    pub precoder: Option<PrecoderMode>,
    pub detector: Option<DetectorMode>,
    pub sir_db: Option<f64>,
    pub margin_db: Option<f64>,
}

impl fmt::Display for AxisPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m_p={} m_s={} snr_db={}", self.m_p, self.m_s, self.snr_db)?;
        if let Some(n) = self.pilot_symbols {
            write!(f, " pilot_symbols={n}")?;
        }
        if let Some(l) = self.location {
            write!(f, " location={l}")?;
        }
        if let Some(p) = self.precoder {
            write!(f, " precoder={p:?}")?;
        }
        if let Some(d) = self.detector {
            write!(f, " detector={d:?}")?;
        }
        if let Some(s) = self.sir_db {
            write!(f, " sir_db={s}")?;
        }
        if let Some(m) = self.margin_db {
            write!(f, " margin_db={m}")?;
        }
        Ok(())
    }
}

fn some_or_none<T: Copy>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

/// Axis points in output order.
pub fn axis_points(spec: &ExperimentSpec) -> Vec<AxisPoint> {
    let s = &spec.sweep;
    let locations: Vec<Option<usize>> = match s.locations {
        Some(n) => (0..n).map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for &[m_p, m_s] in &s.settings {
        for &snr_db in &s.snr_db {
            for &pilot_symbols in &some_or_none(&s.pilot_counts) {
                for &location in &locations {
                    for &precoder in &some_or_none(&s.precoders) {
                        for &detector in &some_or_none(&s.detectors) {
                            for &sir_db in &some_or_none(&s.sir_db) {
                                for &margin_db in &some_or_none(&s.margin_db) {
                                    points.push(AxisPoint {
                                        m_p,
                                        m_s,
                                        snr_db,
                                        pilot_symbols,
                                        location,
                                        precoder,
                                        detector,
                                        sir_db,
                                        margin_db,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    points
}

impl AxisPoint {
    /// The scenario of episode `episode` at this point.
    pub fn scenario(&self, spec: &ExperimentSpec, episode: usize) -> Scenario {
        let mut s = spec.scenario.clone();
        s.m_p = self.m_p;
        s.m_s = self.m_s;
        s.overhear_snr_db = self.snr_db;
        s.data_snr_db = self.snr_db;
        s.seed = episode_seed(spec.sweep.seed, episode);
        if spec.experiment == ExperimentKind::Lemma2 {
            s.channel = ChannelConfig::flat();
        }
        if let Some(n) = self.pilot_symbols {
            s.layout.pilot_symbols = n;
            s.neighbor_radius = 0;
        }
        if let Some(l) = self.location {
            let (channel_seed, offsets) = location(spec.sweep.seed, l, spec.sweep.location_spread_db.unwrap_or(0.0));
            s.channel_seed = Some(channel_seed);
            s.link_gains.secondary_db += offsets.secondary_db;
            s.link_gains.primary_db += offsets.primary_db;
            s.link_gains.su_pu_db += offsets.su_pu_db;
            s.link_gains.pu_su_db += offsets.pu_su_db;
        }
        if let Some(p) = self.precoder {
            s.precoder = p;
        }
        if let Some(d) = self.detector {
            s.detector = d;
        }
        if let Some(sir) = self.sir_db {
            // per antenna: secondary total power against M_p primary streams
            s.primary_power_db = s.secondary_power_db + s.link_gains.secondary_db - s.link_gains.pu_su_db
                - sir
                - 10.0 * (self.m_p as f64).log10();
        }
        if let Some(m) = self.margin_db {
            s.interference_margin_db = Some(m);
        }
        s
    }

    /// Identifies the point's configuration independent of the episode.
    pub fn fingerprint(&self, spec: &ExperimentSpec) -> String {
        let mut s = self.scenario(spec, 0);
        s.seed = 0;
        let json = serde_json::to_vec(&s).expect("scenario serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// Config path most likely responsible for an invalid scenario here.
    pub fn field_hint(&self, spec: &ExperimentSpec) -> String {
        let s = &spec.sweep;
        let index = |found: Option<usize>, name: &str| found.map(|i| format!("sweep.{name}[{i}]"));
        index(s.settings.iter().position(|x| *x == [self.m_p, self.m_s]), "settings")
            .filter(|_| {
                let mut base = spec.scenario.clone();
                base.m_p = self.m_p;
                base.m_s = self.m_s;
                base.validate().is_err()
            })
            .or_else(|| {
                self.pilot_symbols
                    .filter(|n| *n == 0)
                    .and_then(|n| index(s.pilot_counts.iter().position(|x| *x == n), "pilot_counts"))
            })
            .or_else(|| index(s.snr_db.iter().position(|x| x.to_bits() == self.snr_db.to_bits()), "snr_db"))
            .unwrap_or_else(|| "sweep".into())
    }
}

/// Largest `|X̂ − X|` over the payload.
pub fn max_symbol_error(ep: &EpisodeResult) -> f64 {
    ep.decoded_payload
        .raw()
        .iter()
        .zip(ep.frame.payload().raw())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

fn episode_row(
    spec: &ExperimentSpec,
    point: &AxisPoint,
    fingerprint: &str,
    episode: usize,
    scenario: &Scenario,
    ep: &EpisodeResult,
    m: &MetricsReport,
) -> ResultRow {
    let at = |v: &[f64], i: usize| v.get(i).copied();
    let degradation = m
        .primary_evm_db
        .iter()
        .zip(&m.primary_evm_off_db)
        .map(|(on, off)| on - off)
        .fold(f64::NEG_INFINITY, f64::max);
    ResultRow {
        experiment: spec.experiment,
        fingerprint: fingerprint.to_string(),
        row_kind: RowKind::Episode,
        seed: scenario.seed,
        episode: Some(episode),
        m_p: point.m_p,
        m_s: point.m_s,
        snr_db: point.snr_db,
        pilot_symbols: point.pilot_symbols,
        location: point.location,
        precoder: scenario.precoder,
        detector: scenario.detector,
        sir_target_db: point.sir_db,
        margin_db: point.margin_db,
        secondary_power: ep.secondary_power,
        beta_tx_db: m.beta_tx_db,
        beta_rx_db: m.beta_rx_db,
        evm_db: m.evm_db,
        sir_db_0: at(&m.sir_db, 0),
        sir_db_1: at(&m.sir_db, 1),
        sir_db_2: at(&m.sir_db, 2),
        gamma: m.gamma,
        throughput_bps: m.throughput_bps,
        primary_evm_db_0: at(&m.primary_evm_db, 0),
        primary_evm_db_1: at(&m.primary_evm_db, 1),
        primary_evm_off_db_0: at(&m.primary_evm_off_db, 0),
        primary_evm_off_db_1: at(&m.primary_evm_off_db, 1),
        primary_evm_degradation_db: degradation,
        residual_interference: m.residual_interference,
        payload_ber: m.payload_ber,
        max_symbol_error: max_symbol_error(ep),
    }
}

fn stat(values: impl Iterator<Item = f64>, kind: RowKind) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    Some(match kind {
        RowKind::Mean => v.iter().sum::<f64>() / v.len() as f64,
        RowKind::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
        RowKind::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RowKind::Episode => unreachable!("episode is not a statistic"),
    })
}

/// Mean, min and max rows over one point's episode rows.
pub fn summary_rows(rows: &[ResultRow], master_seed: u64) -> Vec<ResultRow> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    [RowKind::Mean, RowKind::Min, RowKind::Max]
        .into_iter()
        .map(|kind| {
            let opt = |get: fn(&ResultRow) -> Option<f64>| stat(rows.iter().filter_map(get), kind);
            let val = |get: fn(&ResultRow) -> f64| stat(rows.iter().map(get), kind).unwrap_or(f64::NAN);
            ResultRow {
                row_kind: kind,
                seed: master_seed,
                episode: None,
                secondary_power: val(|r| r.secondary_power),
                beta_tx_db: val(|r| r.beta_tx_db),
                beta_rx_db: opt(|r| r.beta_rx_db),
                evm_db: val(|r| r.evm_db),
                sir_db_0: opt(|r| r.sir_db_0),
                sir_db_1: opt(|r| r.sir_db_1),
                sir_db_2: opt(|r| r.sir_db_2),
                gamma: val(|r| r.gamma),
                throughput_bps: val(|r| r.throughput_bps),
                primary_evm_db_0: opt(|r| r.primary_evm_db_0),
                primary_evm_db_1: opt(|r| r.primary_evm_db_1),
                primary_evm_off_db_0: opt(|r| r.primary_evm_off_db_0),
                primary_evm_off_db_1: opt(|r| r.primary_evm_off_db_1),
                primary_evm_degradation_db: val(|r| r.primary_evm_degradation_db),
                residual_interference: val(|r| r.residual_interference),
                payload_ber: val(|r| r.payload_ber),
                max_symbol_error: val(|r| r.max_symbol_error),
                ..first.clone()
            }
        })
        .collect()
}

/// Runs every axis point and streams rows to `sink` in a fixed order.
/// Uses the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec, sink: &mut dyn RowSink) -> Result<usize> {
    let episodes = spec.sweep.episodes();
    let mut written = 0;
    for point in axis_points(spec) {
        let fingerprint = point.fingerprint(spec);
        let results: Vec<Result<ResultRow>> = (0..episodes)
            .into_par_iter()
            .map(|e| {
                let scenario = point.scenario(spec, e);
                let context = || format!("{} at {point}, episode {e} (seed {})", spec.experiment, scenario.seed);
                let ep = run_episode(&scenario).map_err(|source| CliError::Run {
                    context: context(),
                    source,
                })?;
                let m = MetricsReport::from_episode(&ep).map_err(|source| CliError::Run {
                    context: context(),
                    source,
                })?;
                Ok(episode_row(spec, &point, &fingerprint, e, &scenario, &ep, &m))
            })
            .collect();
        let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
        for row in rows.iter().chain(&summary_rows(&rows, spec.sweep.seed)) {
            sink.write_row(row)?;
            written += 1;
        }
    }
    Ok(written)
}

/// Convenience wrapper collecting every row.
pub fn collect_rows(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    run_experiment(spec, &mut rows)?;
    Ok(rows)
}
