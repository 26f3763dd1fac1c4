//! Fuzzy AND/OR goal models for treatment planning.
//!
//! A model is a fuzzy grammar: a root goal refined by weighted derivation
//! rules into sub-goals and interventions. This crate parses models from the
//! line-oriented `.gotm` format, validates them, computes goal/intervention
//! impact by max-min composition over derivation chains, and propagates
//! what-if satisfaction degrees bottom-up.
//!
//! ```
//! let model = gotm::parse_model("root s\np1: s -> g1 i2 @ 0.8\np2: g1 -> i1 @ 0.6\n").unwrap();
//! assert_eq!(gotm::impact(&model, "s", "i1").unwrap(), 0.6);
//! ```

pub mod cli;
pub mod engine;
pub mod grammar_io;
pub mod model;
pub mod sample;

pub use engine::{
    chain_membership, enumerate_chains, explain_impact, impact, impact_matrix, satisfaction,
    DerivationChain, EngineError, Explanation, ImpactMatrix, RatedChain, SatisfactionAssignment,
};
pub use grammar_io::{
    export_csv, export_dot, export_json, format_weight, parse_model, serialize_model, ExportError,
    ParseError, ParseErrorKind,
};
pub use model::{
    build_model, validate, ChildEdge, Finding, FindingCode, FuzzyRule, ModelError, RuleId,
    SymbolId, SymbolKind, TreatmentModel, ValidationReport,
};
