// negated float comparisons are used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod detection;
pub mod detrend;
pub mod error;
pub mod indicators;
pub mod pvar;
pub mod rng;
pub mod series;
pub mod simulator;
pub mod stats;
pub mod surrogate;

pub use detection::{DetectionResult, EvidenceKind, DEFAULT_THRESHOLD};
pub use detrend::{detrend_gaussian, ResidualSeries};
pub use error::{EwsError, Result};
pub use rng::RngStream;
pub use series::MultiSeries;
pub use surrogate::{build_null, build_nulls, surrogate_p, NullCache, NullDistribution, NullScenario};
pub use stats::{kendall_tau, lag1_autocorr, TauSummary, TieRule};
pub use pvar::{sample_posterior, PvarModelSpec, PvarPosterior, SamplerSettings};
