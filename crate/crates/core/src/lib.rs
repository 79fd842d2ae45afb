//! Claim-level verification and diagnostics for retrieval-augmented answers.
//!
//! Checker outputs are combined by an F1-weighted ensemble, optionally fused
//! with a TransE knowledge-graph signal, and summarized into answer-level and
//! corpus-level metrics.

pub mod backends;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod fusion;
pub mod kg;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod tuning;

pub use error::{Error, Result};
pub use model::{
    argmax_label, Claim, CheckerOutput, EvidenceSpan, FusedClaimResult, LabelDistribution, NeutralType, NliLabel,
    Passage, RagInstance, Spo,
};
