//! The two action loops driven as an explicit state machine: an exploration
//! loop that proposes conjectures, and a verify/refine loop that accepts,
//! refines, or eventually discards each one. Every step lands in the
//! trajectory, flushed through the sink entry by entry so aborted runs stay
//! inspectable.
//!
//! Event comments are stable, frozen strings (the golden trajectory tests
//! pin them):
//!
//! - `exploration iteration {n}: {e} conjecture(s) extracted, {m} malformed block(s) skipped`
//! - `prv round for {id}: {accept|reject} ({a}/{k} accept)`, carries every
//!   review actually issued in the round, inconclusive drafts included
//! - `refinement {c} for {id}`, carries the revised proof
//! - `statement revised during refinement of {id}`, a fresh conjecture
//!   entry, so lemma statements always trace back to a conjecture entry
//! - `refiner parse failure for {id} (refine round {c} consumed)`
//! - `duplicate conjecture {id} skipped (matches lemma {lemma})`
//! - `accepted conjecture {id} duplicates lemma {lemma}; not re-inserted`
//! - `record {id} claims final but the theorem is already established; promoted as lemma`
//! - `record {id} discarded after {c} refine round(s)`
//! - `stop reason: {solved|exploration_limit}`

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agents::{
    build_explorer_prompt, build_refiner_prompt, build_verifier_prompt, extract_conjectures,
    parse_refinement, parse_review, AgentError, PromptTemplates,
};
use crate::backend::{Backend, BackendError};
use crate::model::{
    EntryType, InsertOutcome, LemmaDigest, LemmaStore, ModelError, ProblemContext, RecordId,
    RecordStatus, Review, RunConfig, StatementRecord, TrajectoryEntry, Verdict,
};
use crate::trajectory::{SinkError, TrajectorySink};

/// Wall-clock source for trajectory timestamps.
pub trait Clock {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

/// Clock that always reads the same instant; scripted runs with a fixed
/// clock produce byte-identical trajectories.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

/// A review verdict after inconclusive resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedVerdict {
    Accept,
    Reject,
}

impl core::fmt::Display for ResolvedVerdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ResolvedVerdict::Accept => f.write_str("accept"),
            ResolvedVerdict::Reject => f.write_str("reject"),
        }
    }
}

/// Pessimistic aggregation: accept only when every review accepts.
pub fn aggregate_pessimistic(verdicts: &[ResolvedVerdict]) -> Result<ResolvedVerdict, RunError> {
    if verdicts.is_empty() {
        return Err(RunError::EmptyVerdictList);
    }
    Ok(if verdicts.iter().all(|v| *v == ResolvedVerdict::Accept) {
        ResolvedVerdict::Accept
    } else {
        ResolvedVerdict::Reject
    })
}

/// Counters maintained across a run.
///
/// `rejected` counts verification rounds that returned reject (not records);
/// `duplicates_skipped` counts both pre-verification dedup hits and accepted
/// records whose refined statement collided with an existing lemma.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub conjectures_proposed: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub discarded: u64,
    pub duplicates_skipped: u64,
    pub reviews_issued: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Solved,
    ExplorationLimit,
}

impl core::fmt::Display for StopReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StopReason::Solved => f.write_str("solved"),
            StopReason::ExplorationLimit => f.write_str("exploration_limit"),
        }
    }
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub ctx: ProblemContext,
    pub store: LemmaStore,
    pub trajectory: Vec<TrajectoryEntry>,
    /// Completed exploration iterations.
    pub iteration: u32,
    pub solved: bool,
    pub config: RunConfig,
    pub stats: RunStats,
    next_record_id: u64,
}

impl RunState {
    fn new(ctx: ProblemContext, config: RunConfig) -> Self {
        Self {
            ctx,
            store: LemmaStore::new(),
            trajectory: Vec::new(),
            iteration: 0,
            solved: false,
            config,
            stats: RunStats::default(),
            next_record_id: 0,
        }
    }

    fn next_id(&mut self) -> RecordId {
        self.next_record_id += 1;
        RecordId(self.next_record_id)
    }
}

/// Everything a completed (or aborted-and-recovered) run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Vec<TrajectoryEntry>,
    pub stats: RunStats,
    pub store: LemmaStore,
    pub solved: bool,
    pub iterations: u32,
    pub stop_reason: StopReason,
}

/// One verification round: the aggregate verdict, every review actually
/// issued (inconclusive drafts included), and the per-slot resolved reviews.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrvOutcome {
    pub verdict: ResolvedVerdict,
    pub issued: Vec<Review>,
    pub resolved: Vec<Review>,
}

impl PrvOutcome {
    /// The resolved reviews that rejected, for the refiner.
    pub fn rejecting(&self) -> Vec<Review> {
        self.resolved
            .iter()
            .filter(|r| r.verdict == Verdict::Reject)
            .cloned()
            .collect()
    }
}

/// Drives one run. The engine owns the [`RunState`]; the backend, sink, and
/// clock are borrowed for the run's lifetime. All model calls are issued
/// sequentially, which the concurrency contract permits (results are
/// identical to a fan-out implementation).
pub struct Engine<'a> {
    pub state: RunState,
    backend: &'a mut dyn Backend,
    sink: &'a mut dyn TrajectorySink,
    clock: &'a dyn Clock,
    templates: PromptTemplates,
    seeded: bool,
}

impl<'a> Engine<'a> {
    pub fn new(
        ctx: ProblemContext,
        config: RunConfig,
        backend: &'a mut dyn Backend,
        sink: &'a mut dyn TrajectorySink,
        clock: &'a dyn Clock,
    ) -> Result<Self, RunError> {
        Self::with_templates(
            ctx,
            config,
            backend,
            sink,
            clock,
            PromptTemplates::builtin(),
        )
    }

    pub fn with_templates(
        ctx: ProblemContext,
        config: RunConfig,
        backend: &'a mut dyn Backend,
        sink: &'a mut dyn TrajectorySink,
        clock: &'a dyn Clock,
        templates: PromptTemplates,
    ) -> Result<Self, RunError> {
        config.validate()?;
        Ok(Self {
            state: RunState::new(ctx, config),
            backend,
            sink,
            clock,
            templates,
            seeded: false,
        })
    }

    /// Appends one entry, assigning its index and timestamp, and flushes it
    /// through the sink before continuing.
    fn push_entry(&mut self, mut entry: TrajectoryEntry) -> Result<(), RunError> {
        entry.index = self.state.trajectory.len() as u64;
        entry.timestamp = self.clock.now_ms();
        self.sink.append(&entry)?;
        self.state.trajectory.push(entry);
        Ok(())
    }

    fn push_event(&mut self, comment: String) -> Result<(), RunError> {
        self.push_entry(TrajectoryEntry::new(EntryType::Event).with_comment(comment))
    }

    /// Seeds the trajectory with one entry per assumption and hint, in input
    /// order. Idempotent within a run.
    pub fn seed_context_entries(&mut self) -> Result<(), RunError> {
        if self.seeded {
            return Ok(());
        }
        self.seeded = true;
        let assumptions = self.state.ctx.assumptions.clone();
        for text in assumptions {
            self.push_entry(TrajectoryEntry::new(EntryType::Assumption).with_statement(text))?;
        }
        let hints = self.state.ctx.hints.clone();
        for text in hints {
            self.push_entry(TrajectoryEntry::new(EntryType::Hint).with_statement(text))?;
        }
        Ok(())
    }

    fn lemma_digest(&self) -> Vec<LemmaDigest> {
        self.state
            .store
            .context_digest(self.state.config.lemma_context_budget)
    }

    /// Issues one verification round: `k` independent reviews of the record,
    /// re-asking each inconclusive reviewer slot exactly once and resolving
    /// a second inconclusive to reject. Appends the round to the trajectory
    /// as an event carrying every issued review, and to the record's
    /// resolved review history.
    pub fn prv_verify(&mut self, record: &mut StatementRecord) -> Result<PrvOutcome, RunError> {
        debug_assert_eq!(record.status, RecordStatus::UnderReview);
        let digest = self.lemma_digest();
        let base = build_verifier_prompt(
            record,
            &self.state.ctx,
            &digest,
            &self.state.config,
            &self.templates,
        );
        let k = self.state.config.k_reviews;
        let mut issued = Vec::new();
        let mut resolved = Vec::new();
        for slot in 0..k {
            let mut request = base.clone();
            let response = self.backend.complete(&request)?;
            self.state.stats.reviews_issued += 1;
            let review = parse_review(&response.text, slot);
            issued.push(review.clone());
            let settled = if review.verdict == Verdict::Inconclusive {
                request.attempt = 1;
                let retry_response = self.backend.complete(&request)?;
                self.state.stats.reviews_issued += 1;
                let retry = parse_review(&retry_response.text, slot);
                issued.push(retry.clone());
                if retry.verdict == Verdict::Inconclusive {
                    resolve_inconclusive(retry)
                } else {
                    retry
                }
            } else {
                review
            };
            resolved.push(settled);
        }
        let verdicts: Vec<ResolvedVerdict> = resolved
            .iter()
            .map(|r| match r.verdict {
                Verdict::Accept => ResolvedVerdict::Accept,
                _ => ResolvedVerdict::Reject,
            })
            .collect();
        let verdict = aggregate_pessimistic(&verdicts)?;
        let accepts = verdicts
            .iter()
            .filter(|v| **v == ResolvedVerdict::Accept)
            .count();
        record.review_rounds.push(resolved.clone());
        let comment = format!(
            "prv round for {}: {verdict} ({accepts}/{k} accept)",
            record.id
        );
        self.push_entry(
            TrajectoryEntry::new(EntryType::Event)
                .with_comment(comment)
                .with_reviews(issued.clone()),
        )?;
        Ok(PrvOutcome {
            verdict,
            issued,
            resolved,
        })
    }

    /// The refine loop for a record whose latest verification round
    /// rejected: refiner call, re-verification, repeated until acceptance or
    /// the refine cap, at which point the record is discarded. A refiner
    /// reply without a proof block consumes the round without re-verifying.
    pub fn refine_loop(
        &mut self,
        mut record: StatementRecord,
        mut rejecting: Vec<Review>,
    ) -> Result<StatementRecord, RunError> {
        debug_assert_eq!(record.status, RecordStatus::UnderReview);
        let cap = self.state.config.refine_cap;
        loop {
            if record.refine_count >= cap {
                record.transition_to(RecordStatus::Discarded, cap)?;
                self.state.stats.discarded += 1;
                self.push_event(format!(
                    "record {} discarded after {} refine round(s)",
                    record.id, record.refine_count
                ))?;
                return Ok(record);
            }
            record.transition_to(RecordStatus::Refining, cap)?;
            let mut submitted_new_proof = false;
            while record.status == RecordStatus::Refining {
                let request = build_refiner_prompt(
                    &record,
                    &rejecting,
                    &self.state.ctx,
                    &self.state.config,
                    &self.templates,
                )?;
                let response = self.backend.complete(&request)?;
                record.refine_count += 1;
                match parse_refinement(&response.text, &record) {
                    Ok(refinement) => {
                        let statement_changed = refinement.statement_changed;
                        record.proof = refinement.proof;
                        record.statement = refinement.statement;
                        self.push_entry(
                            TrajectoryEntry::new(EntryType::Event)
                                .with_comment(format!(
                                    "refinement {} for {}",
                                    record.refine_count, record.id
                                ))
                                .with_proof(record.proof.clone()),
                        )?;
                        if statement_changed {
                            // The revised statement becomes a conjecture
                            // entry of its own so any later lemma still
                            // traces back to a logged conjecture.
                            self.push_entry(
                                TrajectoryEntry::new(EntryType::Conjecture)
                                    .with_statement(record.statement.clone())
                                    .with_proof(record.proof.clone())
                                    .with_comment(format!(
                                        "statement revised during refinement of {}",
                                        record.id
                                    )),
                            )?;
                        }
                        record.transition_to(RecordStatus::UnderReview, cap)?;
                        submitted_new_proof = true;
                    }
                    Err(AgentError::RefinementParseFailure { .. }) => {
                        self.push_event(format!(
                            "refiner parse failure for {} (refine round {} consumed)",
                            record.id, record.refine_count
                        ))?;
                        if record.refine_count >= cap {
                            // Out of rounds with nothing to verify: hop back
                            // to under_review so the loop head can discard.
                            record.transition_to(RecordStatus::UnderReview, cap)?;
                        }
                    }
                    Err(other) => return Err(other.into()),
                }
            }
            if !submitted_new_proof {
                continue;
            }
            let round = self.prv_verify(&mut record)?;
            match round.verdict {
                ResolvedVerdict::Accept => {
                    record.transition_to(RecordStatus::Accepted, cap)?;
                    return Ok(record);
                }
                ResolvedVerdict::Reject => {
                    self.state.stats.rejected += 1;
                    rejecting = round.rejecting();
                }
            }
        }
    }

    /// Handles a record that just reached `Accepted`: the first accepted
    /// final claim becomes the theorem; everything else is promoted into the
    /// lemma store (where a refined statement may still collide with an
    /// existing lemma).
    fn promote_accepted(&mut self, record: StatementRecord) -> Result<(), RunError> {
        self.state.stats.accepted += 1;
        let resolved_round = record.latest_round().to_vec();
        if record.claims_final && !self.state.solved {
            let theorem = record.into_theorem()?;
            self.push_entry(
                TrajectoryEntry::new(EntryType::Theorem)
                    .with_correctness(true)
                    .with_statement(theorem.statement.clone())
                    .with_proof(theorem.proof.clone())
                    .with_reviews(resolved_round),
            )?;
            self.state.solved = true;
            return Ok(());
        }
        if record.claims_final {
            self.push_event(format!(
                "record {} claims final but the theorem is already established; promoted as lemma",
                record.id
            ))?;
        }
        let lemma = record.into_lemma()?;
        let id = lemma.id;
        let statement = lemma.statement.clone();
        let proof = lemma.proof.clone();
        match self.state.store.insert(lemma)? {
            InsertOutcome::Inserted => {
                self.push_entry(
                    TrajectoryEntry::new(EntryType::Lemma)
                        .with_correctness(true)
                        .with_statement(statement)
                        .with_proof(proof)
                        .with_reviews(resolved_round),
                )?;
            }
            InsertOutcome::Duplicate { existing } => {
                self.state.stats.duplicates_skipped += 1;
                self.push_event(format!(
                    "accepted conjecture {id} duplicates lemma {existing}; not re-inserted"
                ))?;
            }
        }
        Ok(())
    }

    /// One exploration iteration: an explorer call, extraction, and the full
    /// verify/refine treatment of every extracted conjecture in order.
    /// Conjectures extracted after the theorem is established are still
    /// processed and logged.
    pub fn exploration_iteration(&mut self) -> Result<(), RunError> {
        debug_assert!(!self.state.solved);
        debug_assert!(self.state.iteration < self.state.config.exploration_limit);
        let digest = self.lemma_digest();
        let request = build_explorer_prompt(
            &self.state.ctx,
            &digest,
            &self.state.config,
            self.state.iteration,
            &self.templates,
        );
        let response = self.backend.complete(&request)?;
        let extracted = extract_conjectures(&response.text);
        self.state.iteration += 1;
        self.push_event(format!(
            "exploration iteration {}: {} conjecture(s) extracted, {} malformed block(s) skipped",
            self.state.iteration,
            extracted.blocks.len(),
            extracted.malformed
        ))?;
        let origin = self.state.iteration - 1;
        for block in extracted.blocks {
            self.state.stats.conjectures_proposed += 1;
            let id = self.state.next_id();
            let mut record = StatementRecord::new_conjecture(
                id,
                block.statement,
                block.proof,
                origin,
                block.claims_final,
            );
            self.push_entry(
                TrajectoryEntry::new(EntryType::Conjecture)
                    .with_statement(record.statement.clone())
                    .with_proof(record.proof.clone()),
            )?;
            if self.state.config.dedup_enabled {
                if let Some(existing) = self.state.store.lookup(&record.fingerprint()) {
                    self.state.stats.duplicates_skipped += 1;
                    self.push_event(format!(
                        "duplicate conjecture {id} skipped (matches lemma {existing})"
                    ))?;
                    continue;
                }
            }
            record.transition_to(RecordStatus::UnderReview, self.state.config.refine_cap)?;
            let round = self.prv_verify(&mut record)?;
            let terminal = match round.verdict {
                ResolvedVerdict::Accept => {
                    record.transition_to(RecordStatus::Accepted, self.state.config.refine_cap)?;
                    record
                }
                ResolvedVerdict::Reject => {
                    self.state.stats.rejected += 1;
                    self.refine_loop(record, round.rejecting())?
                }
            };
            if terminal.status == RecordStatus::Accepted {
                self.promote_accepted(terminal)?;
            }
        }
        Ok(())
    }

    /// Seeds the context entries, loops exploration until the problem is
    /// solved or the exploration limit is reached, and records the stop
    /// reason as the final event.
    pub fn run_to_completion(&mut self) -> Result<StopReason, RunError> {
        self.seed_context_entries()?;
        while !self.state.solved && self.state.iteration < self.state.config.exploration_limit {
            self.exploration_iteration()?;
        }
        let reason = if self.state.solved {
            StopReason::Solved
        } else {
            StopReason::ExplorationLimit
        };
        self.push_event(format!("stop reason: {reason}"))?;
        Ok(reason)
    }

    pub fn into_outcome(self, stop_reason: StopReason) -> RunOutcome {
        RunOutcome {
            trajectory: self.state.trajectory,
            stats: self.state.stats,
            store: self.state.store,
            solved: self.state.solved,
            iterations: self.state.iteration,
            stop_reason,
        }
    }
}

/// A reviewer slot that stayed inconclusive after its single re-ask is
/// resolved as a rejection; pessimism extends to unparseable reviews.
fn resolve_inconclusive(draft: Review) -> Review {
    Review {
        verdict: Verdict::Reject,
        rationale: String::from(
            "no parseable verdict after one re-ask; rejected under the pessimistic policy",
        ),
        reviewer_index: draft.reviewer_index,
        raw_output: draft.raw_output,
    }
}

/// Runs the whole workflow over the given backend, flushing every entry
/// through the sink. Backend failures abort the run; whatever reached the
/// sink remains.
pub fn run(
    ctx: ProblemContext,
    config: RunConfig,
    backend: &mut dyn Backend,
    sink: &mut dyn TrajectorySink,
    clock: &dyn Clock,
) -> Result<RunOutcome, RunError> {
    let mut engine = Engine::new(ctx, config, backend, sink, clock)?;
    let stop_reason = engine.run_to_completion()?;
    Ok(engine.into_outcome(stop_reason))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("aggregate_pessimistic requires at least one verdict")]
    EmptyVerdictList,
}
