//! Domain types shared by the whole pipeline, plus the pure operations on
//! them: statement normalization, lemma deduplication, and lemma-context
//! assembly.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// The human-authored problem: background assumptions, hints, and the
/// target statement. Rendered into the system prompt shared by all agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemContext {
    pub title: String,
    /// Ordered background blocks; order is preserved everywhere.
    pub assumptions: Vec<String>,
    /// Ordered guidance blocks; order is preserved everywhere.
    pub hints: Vec<String>,
    pub target_statement: String,
}

impl ProblemContext {
    /// Builds a context, rejecting a target statement that is empty after
    /// whitespace normalization.
    pub fn new(
        title: impl Into<String>,
        assumptions: Vec<String>,
        hints: Vec<String>,
        target_statement: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let target_statement = target_statement.into();
        if normalize_statement(&target_statement).is_empty() {
            return Err(ModelError::EmptyTargetStatement);
        }
        Ok(Self {
            title: title.into(),
            assumptions,
            hints,
            target_statement,
        })
    }
}

/// Identifier for one statement record within a run, assigned sequentially
/// by the orchestrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Conjecture,
    Lemma,
    Theorem,
}

/// Lifecycle state of a statement record. Legal transitions form the graph
///
/// ```text
/// proposed → under_review → { accepted | refining }
/// refining → under_review
/// under_review → discarded        (only once refine_count ≥ refine cap)
/// ```
///
/// enforced by [`StatementRecord::transition_to`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Proposed,
    UnderReview,
    Refining,
    Accepted,
    /// Reserved terminal state; the orchestrator records review rejections in
    /// its stats and ends failed records as `Discarded`, so no lifecycle
    /// transition reaches this variant.
    Rejected,
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    Inconclusive,
}

/// One verifier pass over one proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub verdict: Verdict,
    /// Constructive feedback; non-empty whenever `verdict` is `Reject`.
    pub rationale: String,
    /// Reviewer slot in `[0, k)`. A re-asked slot keeps its index.
    pub reviewer_index: u32,
    pub raw_output: String,
}

/// One conjecture/lemma/theorem candidate moving through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub id: RecordId,
    pub kind: RecordKind,
    pub statement: String,
    pub proof: String,
    pub status: RecordStatus,
    /// Resolved reviews, one inner list per verification round in issue
    /// order. Inconclusive drafts live on the trajectory, not here, so an
    /// accepted record's last round is unanimously `Accept`.
    pub review_rounds: Vec<Vec<Review>>,
    pub refine_count: u32,
    pub origin_iteration: u32,
    pub claims_final: bool,
}

impl StatementRecord {
    /// Fresh conjecture in `Proposed` state.
    pub fn new_conjecture(
        id: RecordId,
        statement: impl Into<String>,
        proof: impl Into<String>,
        origin_iteration: u32,
        claims_final: bool,
    ) -> Self {
        Self {
            id,
            kind: RecordKind::Conjecture,
            statement: statement.into(),
            proof: proof.into(),
            status: RecordStatus::Proposed,
            review_rounds: Vec::new(),
            refine_count: 0,
            origin_iteration,
            claims_final,
        }
    }

    /// Moves the record along the lifecycle graph, rejecting transitions the
    /// graph does not contain. Discarding additionally requires the refine
    /// cap to be exhausted, and accepting requires the latest review round
    /// to be unanimous accepts.
    pub fn transition_to(&mut self, next: RecordStatus, refine_cap: u32) -> Result<(), ModelError> {
        use RecordStatus::*;
        let ok = matches!(
            (self.status, next),
            (Proposed, UnderReview)
                | (UnderReview, Accepted)
                | (UnderReview, Refining)
                | (Refining, UnderReview)
                | (UnderReview, Discarded)
        );
        if !ok {
            return Err(ModelError::IllegalTransition {
                from: self.status,
                to: next,
            });
        }
        if next == Discarded && self.refine_count < refine_cap {
            return Err(ModelError::DiscardBeforeCap {
                refine_count: self.refine_count,
                refine_cap,
            });
        }
        if next == Accepted {
            let unanimous = self.review_rounds.last().is_some_and(|round| {
                !round.is_empty() && round.iter().all(|r| r.verdict == Verdict::Accept)
            });
            if !unanimous {
                return Err(ModelError::AcceptWithoutUnanimousRound { id: self.id });
            }
        }
        self.status = next;
        Ok(())
    }

    /// Converts an accepted conjecture into a lemma (promotion).
    pub fn into_lemma(mut self) -> Result<Self, ModelError> {
        if self.status != RecordStatus::Accepted {
            return Err(ModelError::NotAccepted {
                id: self.id,
                status: self.status,
            });
        }
        self.kind = RecordKind::Lemma;
        Ok(self)
    }

    /// Converts an accepted final-claiming conjecture into the theorem.
    pub fn into_theorem(mut self) -> Result<Self, ModelError> {
        if self.status != RecordStatus::Accepted {
            return Err(ModelError::NotAccepted {
                id: self.id,
                status: self.status,
            });
        }
        self.kind = RecordKind::Theorem;
        Ok(self)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of(&self.statement)
    }

    /// Resolved reviews of the most recent verification round.
    pub fn latest_round(&self) -> &[Review] {
        self.review_rounds.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Dedup key: the normalized statement text. Two records with equal
/// fingerprints are treated as the same conjecture.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn of(statement: &str) -> Self {
        Fingerprint(normalize_statement(statement))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Canonicalizes statement text for fingerprinting and drift detection:
/// Unicode is NFC-composed, markdown emphasis markers (`*`, backticks, and
/// paired `_`) are stripped, whitespace runs collapse to single spaces, and
/// the result is trimmed. Case is preserved since mathematical identifiers
/// are case-significant. Idempotent and total.
///
/// Stripping happens between two composition passes. The first pass keeps
/// marker detection canonical (U+1FEF, for one, composes *into* a backtick);
/// the second pass restores canonical mark ordering where removing a marker
/// joined two combining sequences.
pub fn normalize_statement(text: &str) -> String {
    let composed: String = text.nfc().collect();

    // Underscores are stripped in pairs; an odd trailing one survives.
    let underscore_total = composed.chars().filter(|&c| c == '_').count();
    let kept_underscore_ordinal = if underscore_total % 2 == 1 {
        underscore_total
    } else {
        0
    };
    let mut seen_underscores = 0usize;
    let stripped = composed.chars().filter(|&c| match c {
        '*' | '`' => false,
        '_' => {
            seen_underscores += 1;
            seen_underscores == kept_underscore_ordinal
        }
        _ => true,
    });

    let mut out = String::with_capacity(composed.len());
    let mut pending_space = false;
    for c in stripped.nfc() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

/// Outcome of inserting an accepted record into the lemma store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// The store already holds a lemma with the same fingerprint.
    Duplicate {
        existing: RecordId,
    },
}

/// One entry of a lemma-context digest: the statement plus its full proof.
/// Prompt builders decide how much of the proof to surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaDigest {
    pub statement: String,
    pub proof: String,
}

/// Memory of accepted lemmas in acceptance order, deduplicated by
/// normalized-statement fingerprint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaStore {
    lemmas: Vec<StatementRecord>,
    digest_index: BTreeMap<Fingerprint, RecordId>,
}

impl LemmaStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    /// Lemmas in acceptance order.
    pub fn lemmas(&self) -> &[StatementRecord] {
        &self.lemmas
    }

    /// Looks up the lemma a fingerprint resolves to, if any.
    pub fn lookup(&self, fingerprint: &Fingerprint) -> Option<RecordId> {
        self.digest_index.get(fingerprint).copied()
    }

    /// Appends an accepted record unless its fingerprint is already present.
    /// A non-accepted record is rejected outright: reaching here with one is
    /// an orchestrator bug.
    pub fn insert(&mut self, record: StatementRecord) -> Result<InsertOutcome, ModelError> {
        if record.status != RecordStatus::Accepted {
            return Err(ModelError::NotAccepted {
                id: record.id,
                status: record.status,
            });
        }
        let fingerprint = record.fingerprint();
        if let Some(&existing) = self.digest_index.get(&fingerprint) {
            return Ok(InsertOutcome::Duplicate { existing });
        }
        self.digest_index.insert(fingerprint, record.id);
        self.lemmas.push(record);
        Ok(InsertOutcome::Inserted)
    }

    /// Assembles the lemma context for a prompt: all lemmas in acceptance
    /// order, dropping the oldest first while the combined character count
    /// (statement + proof) exceeds `budget`. Never truncates mid-lemma, so
    /// the result is always a suffix of the acceptance-ordered list.
    pub fn context_digest(&self, budget: usize) -> Vec<LemmaDigest> {
        let mut lengths: Vec<usize> = self
            .lemmas
            .iter()
            .map(|l| l.statement.chars().count() + l.proof.chars().count())
            .collect();
        let mut total: usize = lengths.iter().sum();
        let mut start = 0usize;
        while total > budget && start < self.lemmas.len() {
            total -= lengths[start];
            lengths[start] = 0;
            start += 1;
        }
        self.lemmas[start..]
            .iter()
            .map(|l| LemmaDigest {
                statement: l.statement.clone(),
                proof: l.proof.clone(),
            })
            .collect()
    }
}

/// Per-role sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleParams {
    /// Temperature-like scalar in `[0, 2]`.
    pub temperature: f64,
    /// Output budget handed to the backend, in the backend's units.
    pub max_output_len: u32,
}

impl RoleParams {
    pub const fn new(temperature: f64, max_output_len: u32) -> Self {
        Self {
            temperature,
            max_output_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleParamsSet {
    pub explorer: RoleParams,
    pub verifier: RoleParams,
    pub refiner: RoleParams,
}

impl Default for RoleParamsSet {
    fn default() -> Self {
        Self {
            explorer: RoleParams::new(0.8, 4096),
            verifier: RoleParams::new(0.2, 4096),
            refiner: RoleParams::new(0.5, 4096),
        }
    }
}

/// All run tunables. Defaults are artifact choices, overridable per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Number of independent reviews per verification round (k ≥ 1).
    pub k_reviews: u32,
    /// Maximum explorer iterations per run (E ≥ 1).
    pub exploration_limit: u32,
    /// Refine rounds before a rejected record is discarded (R). 0 disables
    /// refinement: the first rejection discards.
    pub refine_cap: u32,
    /// Approximate character budget for the lemma digest injected into
    /// prompts.
    pub lemma_context_budget: usize,
    pub role_params: RoleParamsSet,
    /// Fixed essential requirements injected verbatim into refiner prompts.
    pub correction_suggestions: Option<String>,
    pub dedup_enabled: bool,
    /// Whether verifier prompts list previously accepted lemmas as trusted
    /// context.
    pub verifier_sees_lemmas: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k_reviews: 3,
            exploration_limit: 8,
            refine_cap: 3,
            lemma_context_budget: 8000,
            role_params: RoleParamsSet::default(),
            correction_suggestions: None,
            dedup_enabled: true,
            verifier_sees_lemmas: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k_reviews < 1 {
            return Err(ModelError::InvalidConfig {
                field: "k_reviews",
                detail: "must be at least 1".to_string(),
            });
        }
        if self.exploration_limit < 1 {
            return Err(ModelError::InvalidConfig {
                field: "exploration_limit",
                detail: "must be at least 1".to_string(),
            });
        }
        if self.lemma_context_budget == 0 {
            return Err(ModelError::InvalidConfig {
                field: "lemma_context_budget",
                detail: "must be positive".to_string(),
            });
        }
        for (name, params) in [
            ("explorer", self.role_params.explorer),
            ("verifier", self.role_params.verifier),
            ("refiner", self.role_params.refiner),
        ] {
            if !(0.0..=2.0).contains(&params.temperature) {
                return Err(ModelError::InvalidConfig {
                    field: "role_params",
                    detail: alloc::format!("{name} temperature must lie in [0, 2]"),
                });
            }
            if params.max_output_len == 0 {
                return Err(ModelError::InvalidConfig {
                    field: "role_params",
                    detail: alloc::format!("{name} max_output_len must be positive"),
                });
            }
        }
        Ok(())
    }
}

/// Category of one trajectory entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryType {
    Assumption,
    Hint,
    Conjecture,
    Lemma,
    Theorem,
    Event,
}

/// One append-only record of a run. Indexes are assigned densely by the
/// orchestrator; lemma and theorem entries always carry `correctness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub index: u64,
    pub entry_type: EntryType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correctness: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub statement: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub proof: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub comment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reviews: Option<Vec<Review>>,
    /// Wall-clock milliseconds since the Unix epoch.
    pub timestamp: u64,
    /// Fields this version does not know, preserved across round-trips.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl TrajectoryEntry {
    /// Blank entry of the given type; index and timestamp are filled in by
    /// whoever appends it.
    pub fn new(entry_type: EntryType) -> Self {
        Self {
            index: 0,
            entry_type,
            correctness: None,
            statement: None,
            proof: None,
            comment: None,
            reviews: None,
            timestamp: 0,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_correctness(mut self, value: bool) -> Self {
        self.correctness = Some(value);
        self
    }

    pub fn with_statement(mut self, text: impl Into<String>) -> Self {
        self.statement = Some(text.into());
        self
    }

    pub fn with_proof(mut self, text: impl Into<String>) -> Self {
        self.proof = Some(text.into());
        self
    }

    pub fn with_comment(mut self, text: impl Into<String>) -> Self {
        self.comment = Some(text.into());
        self
    }

    pub fn with_reviews(mut self, reviews: Vec<Review>) -> Self {
        self.reviews = Some(reviews);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("target statement is empty after normalization")]
    EmptyTargetStatement,
    #[error("record {id} has status {status:?}, expected accepted")]
    NotAccepted { id: RecordId, status: RecordStatus },
    #[error("illegal lifecycle transition {from:?} -> {to:?}")]
    IllegalTransition {
        from: RecordStatus,
        to: RecordStatus,
    },
    #[error("cannot discard at refine_count {refine_count} before the cap {refine_cap}")]
    DiscardBeforeCap { refine_count: u32, refine_cap: u32 },
    #[error("record {id} cannot be accepted without a unanimous review round")]
    AcceptWithoutUnanimousRound { id: RecordId },
    #[error("invalid config field {field}: {detail}")]
    InvalidConfig { field: &'static str, detail: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn accept_review(slot: u32) -> Review {
        Review {
            verdict: Verdict::Accept,
            rationale: "sound".to_string(),
            reviewer_index: slot,
            raw_output: "VERDICT: ACCEPT".to_string(),
        }
    }

    fn accepted_lemma(id: u64, statement: &str) -> StatementRecord {
        let mut record =
            StatementRecord::new_conjecture(RecordId(id), statement, "proof body", 0, false);
        record.transition_to(RecordStatus::UnderReview, 3).unwrap();
        record.review_rounds.push(vec![accept_review(0)]);
        record.transition_to(RecordStatus::Accepted, 3).unwrap();
        record.into_lemma().unwrap()
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize_statement("  A   B "), "A B");
    }

    #[test]
    fn normalize_empty_is_empty() {
        assert_eq!(normalize_statement(""), "");
    }

    #[test]
    fn normalize_strips_markdown_emphasis() {
        assert_eq!(
            normalize_statement("**div u = 0** in `D`"),
            "div u = 0 in D"
        );
    }

    #[test]
    fn normalize_strips_paired_underscores_keeps_odd_tail() {
        assert_eq!(normalize_statement("_emphasis_"), "emphasis");
        assert_eq!(normalize_statement("x_1 = y_2"), "x1 = y2");
        assert_eq!(normalize_statement("lone _ under"), "lone _ under");
    }

    #[test]
    fn normalize_idempotent_when_stripping_joins_combining_marks() {
        // Removing the marker glues two combining marks into one sequence;
        // the same pass must still leave them in canonical order.
        let tricky = "\u{816}*\u{10f46}";
        let once = normalize_statement(tricky);
        assert_eq!(normalize_statement(&once), once);
    }

    #[test]
    fn normalize_strips_markers_created_by_composition() {
        // U+1FEF (GREEK VARIA) composes into the ASCII backtick.
        assert_eq!(normalize_statement("\u{1fef}"), "");
        assert_eq!(normalize_statement("a\u{1fef}b"), "ab");
    }

    #[test]
    fn normalize_composes_unicode() {
        // 'e' followed by a combining acute accent composes to U+00E9.
        assert_eq!(normalize_statement("e\u{0301}"), "\u{00e9}");
    }

    #[test]
    fn normalize_preserves_case() {
        assert_eq!(normalize_statement("λ and Λ"), "λ and Λ");
    }

    #[test]
    fn context_empty_target_rejected() {
        let err = ProblemContext::new("t", vec![], vec![], "  \t ");
        assert_eq!(err.unwrap_err(), ModelError::EmptyTargetStatement);
    }

    #[test]
    fn insert_into_empty_store() {
        let mut store = LemmaStore::new();
        let outcome = store.insert(accepted_lemma(1, "L1 statement")).unwrap();
        assert_eq!(outcome, InsertOutcome::Inserted);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn insert_duplicate_by_normalized_fingerprint() {
        let mut store = LemmaStore::new();
        store.insert(accepted_lemma(1, "div u = 0 in D")).unwrap();
        // Doubled spaces normalize away, so the fingerprints collide.
        let outcome = store.insert(accepted_lemma(2, "div  u =  0 in D")).unwrap();
        assert_eq!(
            outcome,
            InsertOutcome::Duplicate {
                existing: RecordId(1)
            }
        );
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn insert_rejects_non_accepted_record() {
        let mut store = LemmaStore::new();
        let record = StatementRecord::new_conjecture(RecordId(7), "s", "p", 0, false);
        let err = store.insert(record).unwrap_err();
        assert!(matches!(err, ModelError::NotAccepted { .. }));
    }

    #[test]
    fn insert_is_idempotent_for_equal_fingerprints() {
        let mut store = LemmaStore::new();
        store.insert(accepted_lemma(1, "alpha")).unwrap();
        let before = store.clone();
        store.insert(accepted_lemma(2, "alpha")).unwrap();
        store.insert(accepted_lemma(3, " alpha ")).unwrap();
        assert_eq!(store, before);
    }

    #[test]
    fn digest_empty_store() {
        assert!(LemmaStore::new().context_digest(1000).is_empty());
    }

    #[test]
    fn digest_under_budget_keeps_all_in_order() {
        let mut store = LemmaStore::new();
        store.insert(accepted_lemma(1, "first")).unwrap();
        store.insert(accepted_lemma(2, "second")).unwrap();
        store.insert(accepted_lemma(3, "third")).unwrap();
        let digest = store.context_digest(1000);
        assert_eq!(digest.len(), 3);
        assert_eq!(digest[0].statement, "first");
        assert_eq!(digest[2].statement, "third");
    }

    #[test]
    fn digest_drops_oldest_first() {
        // Three lemmas of length 400 each (statement 300 + proof 100 chars);
        // budget 900 holds only the newest two.
        let mut store = LemmaStore::new();
        for (id, ch) in [(1u64, 'a'), (2, 'b'), (3, 'c')] {
            let statement: String = core::iter::repeat_n(ch, 300).collect();
            let mut record =
                StatementRecord::new_conjecture(RecordId(id), statement, "p".repeat(100), 0, false);
            record.transition_to(RecordStatus::UnderReview, 3).unwrap();
            record.review_rounds.push(vec![accept_review(0)]);
            record.transition_to(RecordStatus::Accepted, 3).unwrap();
            store.insert(record.into_lemma().unwrap()).unwrap();
        }
        let digest = store.context_digest(900);
        assert_eq!(digest.len(), 2);
        assert!(digest[0].statement.starts_with('b'));
        assert!(digest[1].statement.starts_with('c'));
    }

    #[test]
    fn lifecycle_legal_path_and_discard_gate() {
        let mut record = StatementRecord::new_conjecture(RecordId(1), "s", "p", 0, false);
        record.transition_to(RecordStatus::UnderReview, 2).unwrap();
        // Discard before the cap is reached must fail.
        let err = record
            .transition_to(RecordStatus::Discarded, 2)
            .unwrap_err();
        assert!(matches!(err, ModelError::DiscardBeforeCap { .. }));
        record.transition_to(RecordStatus::Refining, 2).unwrap();
        record.refine_count += 1;
        record.transition_to(RecordStatus::UnderReview, 2).unwrap();
        record.transition_to(RecordStatus::Refining, 2).unwrap();
        record.refine_count += 1;
        record.transition_to(RecordStatus::UnderReview, 2).unwrap();
        record.transition_to(RecordStatus::Discarded, 2).unwrap();
        assert_eq!(record.status, RecordStatus::Discarded);
    }

    #[test]
    fn lifecycle_illegal_transitions_rejected() {
        let mut record = StatementRecord::new_conjecture(RecordId(1), "s", "p", 0, false);
        for target in [
            RecordStatus::Accepted,
            RecordStatus::Refining,
            RecordStatus::Rejected,
            RecordStatus::Discarded,
        ] {
            let mut probe = record.clone();
            assert!(probe.transition_to(target, 3).is_err(), "{target:?}");
        }
        record.transition_to(RecordStatus::UnderReview, 3).unwrap();
        assert!(record.transition_to(RecordStatus::Rejected, 3).is_err());
    }

    #[test]
    fn accept_requires_unanimous_latest_round() {
        let mut record = StatementRecord::new_conjecture(RecordId(1), "s", "p", 0, false);
        record.transition_to(RecordStatus::UnderReview, 3).unwrap();
        assert!(matches!(
            record.transition_to(RecordStatus::Accepted, 3),
            Err(ModelError::AcceptWithoutUnanimousRound { .. })
        ));
        record.review_rounds.push(vec![
            accept_review(0),
            Review {
                verdict: Verdict::Reject,
                rationale: "gap in step 2".to_string(),
                reviewer_index: 1,
                raw_output: "VERDICT: REJECT".to_string(),
            },
        ]);
        assert!(record.transition_to(RecordStatus::Accepted, 3).is_err());
        record
            .review_rounds
            .push(vec![accept_review(0), accept_review(1)]);
        record.transition_to(RecordStatus::Accepted, 3).unwrap();
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut config = RunConfig::default();
        config.k_reviews = 0;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.role_params.verifier.temperature = 2.5;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.refine_cap = 0; // refinement disabled, still valid
        assert!(config.validate().is_ok());
    }
}
