//! Assigns research fields to biomedical publications from their metadata.
//!
//! Pipeline: join publications to journal field codes ([`corpus`]), pick a
//! flat label set ([`fields`]), sample per-channel datasets ([`sampler`]),
//! train one supervised text classifier per channel ([`embedder`]), combine
//! channel predictions by vote ([`ensemble`]) and score the result
//! ([`evaluate`]).

pub mod corpus;
pub mod embedder;
pub mod ensemble;
pub mod evaluate;
pub mod fields;
pub mod report;
pub mod sampler;
pub mod cli;
