//! Experiment configuration files.
//!
//! A config is TOML with three tables: the experiment kind, a base
//! [`Scenario`] and the sweep axes. Anything left out takes the kind's
//! default; `crnsim defaults <kind>` prints the fully resolved form.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crnsim_core::episode::{DetectorMode, PrecoderMode};
use crnsim_core::{Error as CoreError, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::axis_points;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lemma1,
    Lemma2,
    Convergence,
    LocationSweep,
    BeamformerCompare,
    DetectorCompare,
    PrimaryImpact,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Lemma1,
        ExperimentKind::Lemma2,
        ExperimentKind::Convergence,
        ExperimentKind::LocationSweep,
        ExperimentKind::BeamformerCompare,
        ExperimentKind::DetectorCompare,
        ExperimentKind::PrimaryImpact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lemma1 => "lemma1",
            ExperimentKind::Lemma2 => "lemma2",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::LocationSweep => "location_sweep",
            ExperimentKind::BeamformerCompare => "beamformer_compare",
            ExperimentKind::DetectorCompare => "detector_compare",
            ExperimentKind::PrimaryImpact => "primary_impact",
        }
    }

    fn uses(self, axis: Axis) -> bool {
        use ExperimentKind::*;
        match axis {
            Axis::Pilots => self == Convergence,
            Axis::Locations => self == LocationSweep,
            Axis::Precoders => self == BeamformerCompare,
            Axis::Detectors | Axis::Sir => self == DetectorCompare,
            Axis::Margin => self == PrimaryImpact,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Pilots,
    Locations,
    Precoders,
    Detectors,
    Sir,
    Margin,
}

/// Sweep axes. Empty lists and `None` mean "use the kind's default"; axes a
/// kind does not use must stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// Episodes per axis point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    /// Master seed. Episode `e` uses the same derived seed at every axis point.
    pub seed: u64,
    /// `[m_p, m_s]` pairs.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub settings: Vec<[usize; 2]>,
    /// Sets both the overhearing and the data SNR.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub snr_db: Vec<f64>,
    /// Pilot symbols per frame (convergence; own-tone pilot sets).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pilot_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub precoders: Vec<PrecoderMode>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<DetectorMode>,
    /// Target per-antenna SIR at SU 2; sets the primary transmit power.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sir_db: Vec<f64>,
    /// Secondary interference at PU 2 relative to its noise power.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub margin_db: Vec<f64>,
    /// Number of locations, each one channel realization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locations: Option<usize>,
    /// Width of the uniform per-location link-gain offsets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location_spread_db: Option<f64>,
}

impl Sweep {
    pub fn episodes(&self) -> usize {
        self.episodes.unwrap_or(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// The fully defaulted spec for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut spec = Self {
            experiment: kind,
            scenario: Scenario::default(),
            sweep: Sweep::default(),
            output: None,
        };
        spec.fill_defaults();
        spec
    }

    /// Fills every empty axis the kind uses.
    pub fn fill_defaults(&mut self) {
        use ExperimentKind::*;
        let kind = self.experiment;
        let s = &mut self.sweep;
        let both = vec![[1, 2], [2, 3]];
        let (episodes, settings, snr): (usize, Vec<[usize; 2]>, Vec<f64>) = match kind {
            Lemma1 => (500, vec![[1, 2], [1, 3], [2, 3]], vec![f64::INFINITY]),
            Lemma2 => (200, both, vec![f64::INFINITY]),
            Convergence => (300, both, vec![5.0, 15.0, 25.0]),
            LocationSweep => (50, both, vec![25.0]),
            BeamformerCompare => (500, both, vec![20.0]),
            DetectorCompare => (200, vec![[1, 2]], vec![25.0]),
            PrimaryImpact => (200, both, vec![20.0]),
        };
        s.episodes.get_or_insert(episodes);
        if s.settings.is_empty() {
            s.settings = settings;
        }
        if s.snr_db.is_empty() {
            s.snr_db = snr;
        }
        if kind.uses(Axis::Pilots) && s.pilot_counts.is_empty() {
            s.pilot_counts = vec![4, 8, 12, 20, 40];
        }
        if kind.uses(Axis::Precoders) && s.precoders.is_empty() {
            s.precoders = vec![PrecoderMode::Ebf, PrecoderMode::Ibf, PrecoderMode::Bbf];
        }
        if kind.uses(Axis::Detectors) && s.detectors.is_empty() {
            s.detectors = vec![DetectorMode::Bic, DetectorMode::Zf];
        }
        if kind.uses(Axis::Sir) && s.sir_db.is_empty() {
            s.sir_db = vec![-10.0];
        }
        if kind.uses(Axis::Margin) && s.margin_db.is_empty() {
            s.margin_db = vec![-10.0];
        }
        if kind.uses(Axis::Locations) {
            s.locations.get_or_insert(12);
            s.location_spread_db.get_or_insert(10.0);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.episodes == Some(0) {
            return Err(CliError::invalid("sweep.episodes", "must be at least 1"));
        }
        let kind = self.experiment;
        let unused = [
            (Axis::Pilots, "sweep.pilot_counts", s.pilot_counts.is_empty()),
            (Axis::Precoders, "sweep.precoders", s.precoders.is_empty()),
            (Axis::Detectors, "sweep.detectors", s.detectors.is_empty()),
            (Axis::Sir, "sweep.sir_db", s.sir_db.is_empty()),
            (Axis::Margin, "sweep.margin_db", s.margin_db.is_empty()),
            (Axis::Locations, "sweep.locations", s.locations.is_none()),
            (Axis::Locations, "sweep.location_spread_db", s.location_spread_db.is_none()),
        ];
        for (axis, field, empty) in unused {
            if !kind.uses(axis) && !empty {
                return Err(CliError::invalid(field, format!("not used by experiment {kind}")));
            }
        }
        let lists = [
            ("sweep.settings", s.settings.is_empty()),
            ("sweep.snr_db", s.snr_db.is_empty()),
            ("sweep.pilot_counts", kind.uses(Axis::Pilots) && s.pilot_counts.is_empty()),
            ("sweep.precoders", kind.uses(Axis::Precoders) && s.precoders.is_empty()),
            ("sweep.detectors", kind.uses(Axis::Detectors) && s.detectors.is_empty()),
            ("sweep.sir_db", kind.uses(Axis::Sir) && s.sir_db.is_empty()),
            ("sweep.margin_db", kind.uses(Axis::Margin) && s.margin_db.is_empty()),
        ];
        for (field, empty) in lists {
            if empty {
                return Err(CliError::invalid(field, "must not be empty"));
            }
        }
        for (field, v) in [("sweep.sir_db", &s.sir_db), ("sweep.margin_db", &s.margin_db)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CliError::invalid(field, "entries must be finite"));
            }
        }
        if kind.uses(Axis::Locations) {
            if s.locations == Some(0) {
                return Err(CliError::invalid("sweep.locations", "must be at least 1"));
            }
            if let Some(w) = s.location_spread_db {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(CliError::invalid("sweep.location_spread_db", "must be finite and non-negative"));
                }
            }
        }
        self.scenario.validate().map_err(|e| scenario_error("scenario", e))?;
        for point in axis_points(self) {
            point
                .scenario(self, 0)
                .validate()
                .map_err(|e| scenario_error(&point.field_hint(self), e))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

fn scenario_error(prefix: &str, e: CoreError) -> CliError {
    match e {
        CoreError::Scenario { field, reason } => CliError::invalid(format!("{prefix}.{field}"), reason),
        other => CliError::invalid(prefix, other.to_string()),
    }
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    spec.fill_defaults();
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}
