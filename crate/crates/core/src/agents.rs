//! Prompt construction and structured-output parsing for the three agent
//! roles.
//!
//! The builders render editable templates (shipped in `templates/`, loadable
//! from disk at startup by the companion crate) into [`ChatRequest`]s; the
//! parsers turn semi-structured model output back into domain types. Both
//! grammars are stable contracts:
//!
//! - conjectures: `<conjecture> <statement>…</statement> <proof>…</proof>
//!   <final>true|false</final> </conjecture>`
//! - reviews: a terminal `VERDICT: ACCEPT` / `VERDICT: REJECT` line,
//!   last match wins, case-insensitive
//! - refinements: a `<proof>…</proof>` block, optionally preceded or
//!   followed by a `<statement>…</statement>` block

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::backend::{ChatRequest, RoleTag, SamplingParams};
use crate::model::{
    normalize_statement, LemmaDigest, ProblemContext, Review, RunConfig, StatementRecord, Verdict,
};

/// How many characters of a lemma proof survive into the one-line sketch
/// shown to the explorer.
const PROOF_SKETCH_BUDGET: usize = 160;

/// The four prompt templates. `builtin()` returns the copies embedded from
/// `templates/`; the companion crate can substitute files loaded at startup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub explorer_user: String,
    pub verifier_user: String,
    pub refiner_user: String,
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        Self {
            system: include_str!("../templates/system.txt").to_string(),
            explorer_user: include_str!("../templates/explorer_user.txt").to_string(),
            verifier_user: include_str!("../templates/verifier_user.txt").to_string(),
            refiner_user: include_str!("../templates/refiner_user.txt").to_string(),
        }
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Single-pass `{name}` substitution. Placeholders without a binding are
/// left verbatim; substituted values are never re-scanned.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        match tail[1..].find('}') {
            Some(close) => {
                let name = &tail[1..1 + close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => out.push_str(&tail[..close + 2]),
                }
                rest = &tail[close + 2..];
            }
            None => {
                out.push_str(tail);
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders the shared system prompt: title, then assumptions, then hints,
/// each in input order.
pub fn render_system_prompt(ctx: &ProblemContext, templates: &PromptTemplates) -> String {
    let assumptions = render_numbered_blocks("Assumption", &ctx.assumptions);
    let hints = render_numbered_blocks("Hint", &ctx.hints);
    render(
        &templates.system,
        &[
            ("title", &ctx.title),
            ("assumptions", &assumptions),
            ("hints", &hints),
        ],
    )
}

fn render_numbered_blocks(label: &str, blocks: &[String]) -> String {
    if blocks.is_empty() {
        return "(none)".to_string();
    }
    let mut out = String::new();
    for (i, block) in blocks.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("{label} {}: {block}", i + 1));
    }
    out
}

fn lemma_lines(lemmas: &[LemmaDigest], with_sketch: bool) -> String {
    if lemmas.is_empty() {
        return "(none yet)".to_string();
    }
    let mut out = String::new();
    for (i, lemma) in lemmas.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("Established Lemma {}: {}", i + 1, lemma.statement));
        if with_sketch {
            out.push_str(&format!(
                "\n  proof sketch: {}",
                one_line_sketch(&lemma.proof)
            ));
        }
    }
    out
}

/// Compresses a proof to a single line within [`PROOF_SKETCH_BUDGET`] chars.
fn one_line_sketch(proof: &str) -> String {
    let flat = normalize_statement(proof);
    if flat.chars().count() <= PROOF_SKETCH_BUDGET {
        return flat;
    }
    let mut out: String = flat.chars().take(PROOF_SKETCH_BUDGET).collect();
    out.push('…');
    out
}

/// Builds the exploration request for one iteration: the rendered context
/// as system prompt and a user prompt carrying the target statement, the
/// lemma digest (statements verbatim, proofs as one-line sketches), and the
/// conjecture tag-grammar instructions.
pub fn build_explorer_prompt(
    ctx: &ProblemContext,
    lemmas: &[LemmaDigest],
    config: &RunConfig,
    iteration: u32,
    templates: &PromptTemplates,
) -> ChatRequest {
    debug_assert!(iteration < config.exploration_limit);
    let lemma_block = lemma_lines(lemmas, true);
    let iteration_text = format!("{}", iteration + 1);
    let user_prompt = render(
        &templates.explorer_user,
        &[
            ("target_statement", ctx.target_statement.as_str()),
            ("lemmas", &lemma_block),
            ("iteration", &iteration_text),
        ],
    );
    ChatRequest {
        system_prompt: render_system_prompt(ctx, templates),
        user_prompt,
        sampling: SamplingParams {
            temperature: config.role_params.explorer.temperature,
            max_output_len: config.role_params.explorer.max_output_len,
        },
        role_tag: RoleTag::Explorer,
        attempt: 0,
    }
}

/// Builds the review request for one record. The statement and full proof
/// appear verbatim; the lemma digest is included as trusted context when
/// `config.verifier_sees_lemmas` is set.
pub fn build_verifier_prompt(
    record: &StatementRecord,
    ctx: &ProblemContext,
    lemmas: &[LemmaDigest],
    config: &RunConfig,
    templates: &PromptTemplates,
) -> ChatRequest {
    let lemma_context = if config.verifier_sees_lemmas && !lemmas.is_empty() {
        format!(
            "\nYou may rely on these previously verified lemmas as established results:\n{}\n",
            lemma_lines(lemmas, false)
        )
    } else {
        String::new()
    };
    let proof_text: &str = if record.proof.is_empty() {
        "(no proof was provided)"
    } else {
        &record.proof
    };
    let user_prompt = render(
        &templates.verifier_user,
        &[
            ("statement", record.statement.as_str()),
            ("proof", proof_text),
            ("lemma_context", &lemma_context),
        ],
    );
    ChatRequest {
        system_prompt: render_system_prompt(ctx, templates),
        user_prompt,
        sampling: SamplingParams {
            temperature: config.role_params.verifier.temperature,
            max_output_len: config.role_params.verifier.max_output_len,
        },
        role_tag: RoleTag::Verifier,
        attempt: 0,
    }
}

/// Builds the refinement request from the record and the reviews that
/// rejected it, labeled `Reviewer 1..n`. Correction suggestions from the
/// config are injected verbatim when present.
pub fn build_refiner_prompt(
    record: &StatementRecord,
    rejecting_reviews: &[Review],
    ctx: &ProblemContext,
    config: &RunConfig,
    templates: &PromptTemplates,
) -> Result<ChatRequest, AgentError> {
    if rejecting_reviews.is_empty() {
        return Err(AgentError::NoRejectingReviews { id: record.id.0 });
    }
    let mut reviews = String::new();
    for (i, review) in rejecting_reviews.iter().enumerate() {
        if i > 0 {
            reviews.push_str("\n\n");
        }
        reviews.push_str(&format!("Reviewer {}:\n{}", i + 1, review.rationale));
    }
    let suggestions = match &config.correction_suggestions {
        Some(text) => format!("Essential requirements from the human expert:\n{text}\n\n"),
        None => String::new(),
    };
    let user_prompt = render(
        &templates.refiner_user,
        &[
            ("statement", record.statement.as_str()),
            ("proof", record.proof.as_str()),
            ("reviews", &reviews),
            ("correction_suggestions", &suggestions),
        ],
    );
    Ok(ChatRequest {
        system_prompt: render_system_prompt(ctx, templates),
        user_prompt,
        sampling: SamplingParams {
            temperature: config.role_params.refiner.temperature,
            max_output_len: config.role_params.refiner.max_output_len,
        },
        role_tag: RoleTag::Refiner,
        attempt: 0,
    })
}

/// One parsed conjecture block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjectureBlock {
    pub statement: String,
    pub proof: String,
    pub claims_final: bool,
}

/// Result of scanning explorer output: well-formed blocks in output order
/// plus the count of malformed blocks that were skipped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractedConjectures {
    pub blocks: Vec<ConjectureBlock>,
    pub malformed: usize,
}

/// Renders one conjecture in the tag grammar; the exact inverse of
/// [`extract_conjectures`] for trim-stable statement and proof text.
pub fn render_conjecture_block(statement: &str, proof: &str, claims_final: bool) -> String {
    format!(
        "<conjecture>\n<statement>\n{statement}\n</statement>\n<proof>\n{proof}\n</proof>\n<final>{claims_final}</final>\n</conjecture>"
    )
}

fn tag_content<'a>(haystack: &'a str, tag: &str) -> Option<(&'a str, usize)> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = haystack.find(&open)? + open.len();
    let end = start + haystack[start..].find(&close)?;
    Some((&haystack[start..end], end + close.len()))
}

/// Parses every well-formed `<conjecture>` block out of explorer output.
/// Malformed blocks (missing or unclosed tags, unparseable `<final>`, or a
/// statement/proof that is empty after normalization) are skipped and
/// counted; text outside blocks is ignored. Total: never fails.
pub fn extract_conjectures(output: &str) -> ExtractedConjectures {
    let mut result = ExtractedConjectures::default();
    let mut rest = output;
    while let Some(open) = rest.find("<conjecture>") {
        let after_open = &rest[open + "<conjecture>".len()..];
        let Some(close) = after_open.find("</conjecture>") else {
            // Unclosed block: nothing after it can be trusted.
            result.malformed += 1;
            break;
        };
        let body = &after_open[..close];
        rest = &after_open[close + "</conjecture>".len()..];
        match parse_conjecture_body(body) {
            Some(block) => result.blocks.push(block),
            None => result.malformed += 1,
        }
    }
    result
}

fn parse_conjecture_body(body: &str) -> Option<ConjectureBlock> {
    let (statement, consumed) = tag_content(body, "statement")?;
    let (proof, consumed2) = tag_content(&body[consumed..], "proof")?;
    let (final_text, _) = tag_content(&body[consumed + consumed2..], "final")?;
    let claims_final = match final_text.trim() {
        t if t.eq_ignore_ascii_case("true") => true,
        t if t.eq_ignore_ascii_case("false") => false,
        _ => return None,
    };
    let statement = statement.trim();
    let proof = proof.trim();
    if normalize_statement(statement).is_empty() || normalize_statement(proof).is_empty() {
        return None;
    }
    Some(ConjectureBlock {
        statement: statement.to_string(),
        proof: proof.to_string(),
        claims_final,
    })
}

/// Scans one line for the verdict marker `VERDICT:` followed by `ACCEPT` or
/// `REJECT` (case-insensitive, prefix match, last occurrence wins).
fn verdict_in_line(line: &str) -> Option<Verdict> {
    let lower = line.to_ascii_lowercase();
    let mut found = None;
    let mut rest = lower.as_str();
    let mut base = 0;
    while let Some(at) = rest.find("verdict:") {
        let after = &lower[base + at + "verdict:".len()..];
        let word = after.trim_start();
        if word.starts_with("accept") {
            found = Some(Verdict::Accept);
        } else if word.starts_with("reject") {
            found = Some(Verdict::Reject);
        }
        base += at + "verdict:".len();
        rest = &lower[base..];
    }
    found
}

/// Parses verifier output into a [`Review`]. The verdict comes from the last
/// line carrying a verdict marker; with no such line the review is
/// `Inconclusive` and the rationale is the whole text. Total: arbitrary
/// input never fails. A rejection whose preceding text is empty gets a
/// placeholder rationale so that rejections always explain themselves.
pub fn parse_review(output: &str, reviewer_index: u32) -> Review {
    let mut verdict_line: Option<(usize, Verdict)> = None;
    let mut offsets = Vec::new();
    let mut offset = 0;
    for line in output.split('\n') {
        offsets.push(offset);
        if let Some(v) = verdict_in_line(line) {
            verdict_line = Some((offsets.len() - 1, v));
        }
        offset += line.len() + 1;
    }
    match verdict_line {
        None => Review {
            verdict: Verdict::Inconclusive,
            rationale: output.to_string(),
            reviewer_index,
            raw_output: output.to_string(),
        },
        Some((line_idx, verdict)) => {
            let rationale_end = offsets[line_idx].saturating_sub(1);
            let mut rationale = output[..rationale_end.min(output.len())].trim().to_string();
            if verdict == Verdict::Reject && rationale.is_empty() {
                rationale =
                    "(the reviewer rejected the proof without stating a rationale)".to_string();
            }
            Review {
                verdict,
                rationale,
                reviewer_index,
                raw_output: output.to_string(),
            }
        }
    }
}

/// A parsed refiner reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refinement {
    pub statement: String,
    pub proof: String,
    /// Whether the statement differs from the prior one after normalization.
    pub statement_changed: bool,
}

fn last_tag_content<'a>(haystack: &'a str, tag: &str) -> Option<&'a str> {
    let mut rest = haystack;
    let mut found = None;
    while let Some((content, consumed)) = tag_content(rest, tag) {
        found = Some(content);
        rest = &rest[consumed..];
    }
    found
}

/// Parses refiner output: the last `<proof>` block is the revised proof, the
/// last `<statement>` block (if any) replaces the prior statement. A reply
/// without a proof block wastes the refine round and surfaces as
/// [`AgentError::RefinementParseFailure`].
pub fn parse_refinement(output: &str, prior: &StatementRecord) -> Result<Refinement, AgentError> {
    let proof = last_tag_content(output, "proof")
        .ok_or(AgentError::RefinementParseFailure { id: prior.id.0 })?;
    let statement = last_tag_content(output, "statement").unwrap_or(&prior.statement);
    let statement = statement.trim().to_string();
    let statement_changed =
        normalize_statement(&statement) != normalize_statement(&prior.statement);
    Ok(Refinement {
        statement,
        proof: proof.trim().to_string(),
        statement_changed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("refiner prompt for r{id} requires at least one rejecting review")]
    NoRejectingReviews { id: u64 },
    #[error("refiner output for r{id} contains no <proof> block")]
    RefinementParseFailure { id: u64 },
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn tag_free_text() -> impl Strategy<Value = String> {
        "[A-Za-z0-9 =+.,^()-]{1,60}"
            .prop_map(|s| s.trim().to_string())
            .prop_filter("needs content after normalization", |s| {
                !normalize_statement(s).is_empty()
            })
    }

    proptest! {
        #[test]
        fn conjecture_grammar_round_trips(
            triples in proptest::collection::vec((tag_free_text(), tag_free_text(), any::<bool>()), 0..8)
        ) {
            let mut rendered = String::new();
            for (statement, proof, fin) in &triples {
                rendered.push_str(&render_conjecture_block(statement, proof, *fin));
                rendered.push_str("\n\n");
            }
            let extracted = extract_conjectures(&rendered);
            prop_assert_eq!(extracted.malformed, 0);
            prop_assert_eq!(extracted.blocks.len(), triples.len());
            for (block, (statement, proof, fin)) in extracted.blocks.iter().zip(&triples) {
                prop_assert_eq!(&block.statement, statement);
                prop_assert_eq!(&block.proof, proof);
                prop_assert_eq!(block.claims_final, *fin);
            }
        }

        #[test]
        fn parse_review_is_total(s in "\\PC{0,400}") {
            let review = parse_review(&s, 0);
            if review.verdict == Verdict::Reject {
                prop_assert!(!review.rationale.is_empty());
            }
            prop_assert_eq!(review.raw_output, s);
        }

        #[test]
        fn extracted_blocks_never_empty_after_normalization(s in "\\PC{0,400}") {
            for block in extract_conjectures(&s).blocks {
                prop_assert!(!normalize_statement(&block.statement).is_empty());
                prop_assert!(!normalize_statement(&block.proof).is_empty());
            }
        }
    }
}
