//! Tools for building and comparing one-on-one tutoring dialogue corpora.
//!
//! The crate covers the full measurement pipeline for contrasting a human
//! tutoring corpus with an AI-simulated counterpart:
//!
//! - [`corpus`] — dialogue data model, JSONL serialization, validation,
//!   human/AI pairing by problem.
//! - [`coding`] — the 10-subtype IRF behavioral coding scheme, code
//!   assignment, per-dialogue proportion vectors, Cohen's kappa.
//! - [`stats`] — descriptive summaries, paired and Welch t-tests, Cohen's d,
//!   Student-t CDF.
//! - [`ena`] — epistemic network analysis: co-occurrence accumulation over
//!   stanza windows, spherical normalization, means rotation, node
//!   co-registration, group network comparison.
//! - [`sim`] — tripartite teacher/student/dean dialogue simulation over a
//!   pluggable chat backend.
//! - [`report`] — CSV tables and deterministic SVG network renderings.
//! - [`cli`] — the `dialogue-lab` binary's subcommand wiring.
//!
//! Every analytical step is deterministic given its inputs; the crate's
//! examples directory shows one runnable program per capability.

pub mod cli;
pub mod coding;
pub mod corpus;
pub mod ena;
pub mod report;
pub mod sim;
pub mod stats;
