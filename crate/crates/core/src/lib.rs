//! Two-party privacy-preserving record linkage by repeated anonymous
//! group assignment.
//!
//! A registry holding behavior labels (e.g. a voter file) and a platform
//! holding user records agree on a hash seed sequence. Each round, both
//! sides hash `(first name, last name, date of birth)` identities into
//! groups; the registry publishes only `group id -> voter count` for
//! groups of exactly the target size, and the platform accumulates those
//! counts as per-user draws. After enough rounds, a three-hypothesis
//! binomial likelihood classifier labels each platform record as a
//! matched voter, matched abstainer, or unmatched — without either party
//! learning any individual record in the other dataset.
//!
//! Modules follow the protocol stages: [`identity`] (canonical join keys
//! and seeded hashing), [`grouping`] (registry-side group count tables),
//! [`draws`] (platform-side draw accumulation and round scheduling),
//! [`classifier`] (likelihoods and the two-stage decision rule),
//! [`calibration`] (Monte Carlo selection of draw quotas), and
//! [`validation`] (truth tables and aggregate reporting).

pub mod calibration;
pub mod classifier;
pub mod draws;
pub mod grouping;
pub mod identity;
pub mod validation;

pub use calibration::{CalibrationPlan, SimulationConfig};
pub use classifier::{ClassLabel, ClassificationResult, PopulationParams};
pub use draws::{DrawStore, RoundPlan};
pub use grouping::{GroupCountTable, GroupParams};
pub use identity::{CanonicalIdentity, HashValue, RoundSeed};
