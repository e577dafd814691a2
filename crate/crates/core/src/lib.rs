//! Two-step, threshold-gated motion-biometric user verification.
//!
//! The crate covers the full path from raw wearable sensor logs to a
//! verification decision: windowed feature extraction ([`ingest`]), a
//! random-forest classifier with stratified cross-validation ([`forest`]),
//! per-activity identification and per-user authentication models
//! ([`identification`], [`authentication`]), a black-box zeroth-order attack
//! used to stress those models ([`attack`]), and the probability gate that
//! decides when the biometric factor can be trusted ([`gate`]).

pub mod activity;
pub mod attack;
pub mod authentication;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod gate;
pub mod identification;
pub mod ingest;
pub mod seed;
pub mod stats;

pub use activity::{ActivityCategory, ActivityCode, SensorMask, SensorSource};
pub use error::{Error, Result};
pub use forest::{DecisionForest, ForestParams, ProbabilityVector};
pub use gate::{verify, ThresholdTable, VerificationDecision, VerificationOutcome};
pub use ingest::{Dataset, FeatureVector};
