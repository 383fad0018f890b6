//! Concurrent verification of multi-class and structured predictors against
//! deterministic requirements, with estimators and experiments for the
//! associated learnability bounds.
//!
//! The crate is organised bottom-up: [`requirements`] defines `c(x, y)`,
//! [`hypotheses`] the scorers `h(x, y)`, [`verifier`] the wrapped hypothesis
//! `h_c`, [`losses`] the risks, [`complexity`] the capacity estimators,
//! [`structured`] the sequence models and decoders, and [`harness`] the
//! experiments built from all of them.

pub mod complexity;
pub mod error;
pub mod harness;
pub mod hypotheses;
pub mod label;
pub mod losses;
pub mod requirements;
pub mod rng;
pub mod structured;
pub mod verifier;

pub use error::{Error, Result};
pub use hypotheses::{
    FeatureMap, FiniteHypothesisClass, Predictor, Scorer, ScoringHypothesis, TabulatedHypothesis,
};
pub use label::Label;
pub use losses::{FiniteDistribution, Sample};
pub use requirements::{parse_rules, Requirement, Rule};
pub use verifier::{QueryReport, Strategy, VerifiedHypothesis};

/// Crate version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
