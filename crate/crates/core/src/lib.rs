//! Link-level simulator for a two-pair underlay cognitive radio network.
//!
//! A secondary pair shares spectrum with a primary pair. The secondary
//! transmitter overhears the primary's backward traffic and precodes into the
//! null space of what it heard (blind beamforming), and the secondary receiver
//! builds an MMSE combiner from its own pilots that cancels the primary's
//! interference without channel estimates (blind interference cancellation).

pub mod bbf;
pub mod bic;
pub mod channel;
pub mod episode;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};
pub use grid::SampleGrid;
pub use linalg::ComplexMatrix;
pub use episode::{run_episode, EpisodeResult, Scenario};
pub use metrics::MetricsReport;
