//! Core engine for aim-forge: an explorer → verifier → refiner agent loop
//! over pluggable model backends.
//!
//! The crate is `no_std` (with `alloc`) so the engine itself stays a pure
//! state machine: every model call goes through the [`backend::Backend`]
//! trait, every persisted entry goes through a [`trajectory::TrajectorySink`],
//! and wall-clock time comes from an [`orchestrator::Clock`]. The companion
//! `aim-forge` crate supplies the std-side implementations (HTTP backend,
//! file sinks, CLI).
//!
//! Module map:
//!
//! - [`model`]: domain types (problem context, statement records, reviews,
//!   trajectory entries, lemma store, run config) and the pure operations on
//!   them (normalization, dedup, context digests).
//! - [`backend`]: the one-model-call contract plus a deterministic scripted
//!   backend for tests and replay.
//! - [`agents`]: prompt construction and structured-output parsing for the
//!   three agent roles.
//! - [`orchestrator`]: the exploration loop and the verify/refine loop,
//!   driven as an explicit state machine that emits a replayable trajectory.
//! - [`prvsim`]: analytic formulas and a seeded Monte Carlo simulator for
//!   the pessimistic-verification policy in isolation.
//! - [`trajectory`]: line-delimited trajectory persistence with exact
//!   round-trip and crash-tolerant reads.
//! - [`latex`]: appendix-style LaTeX report emission and a grammar lint.
//! - [`transcribe`]: deterministic Unicode-math → LaTeX transcription from
//!   a versioned symbol table.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod backend;
pub mod latex;
pub mod model;
pub mod orchestrator;
pub mod prvsim;
pub mod trajectory;
pub mod transcribe;

pub use backend::{
    Backend, BackendError, ChatRequest, ChatResponse, RoleTag, Script, ScriptedBackend,
};
pub use model::{
    normalize_statement, LemmaStore, ProblemContext, Review, RunConfig, StatementRecord,
    TrajectoryEntry, Verdict,
};
pub use orchestrator::{aggregate_pessimistic, run, Engine, RunOutcome, RunState};
pub use prvsim::{simulate_run, ReviewerModel, SimResult};
pub use transcribe::{unicode_math_to_latex, SymbolTable};
