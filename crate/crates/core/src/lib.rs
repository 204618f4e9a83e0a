//! Portion-wise analysis of ordered firewall policies.
//!
//! The header space of a policy is split into disjoint *portions*; inside a
//! portion every packet matches exactly the same rules, so a single lookup
//! decides it. On top of the partition the crate classifies rule relations,
//! finds inactive, shadowed and redundant rules, merges policy updates,
//! generates a baseline blocking policy and replays firewall logs.

pub mod baseline;
pub mod error;
pub mod loganalyzer;
pub mod model;
pub mod portions;
pub mod relations;
pub mod space;
pub mod update;

pub use error::{Error, Result};
