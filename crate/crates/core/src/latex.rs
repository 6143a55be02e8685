//! Appendix-style LaTeX report emission.
//!
//! Each trajectory entry renders as one block: a `\textbf{type}:` line,
//! the statement inside the theorem environment matching the entry type
//! (assumptions and hints render as labeled content blocks), a
//! `\textbf{correctness}:` line with `True`/`False`, the proof inside a
//! `proof` environment, and a `\textbf{comment}:` line where an absent
//! comment renders as `None`. The document compiles under a standard
//! article class with amsthm environments; [`lint_latex`] checks the
//! grammar when no TeX toolchain is around.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::{EntryType, TrajectoryEntry};
use crate::transcribe::SymbolTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReportOptions {
    /// Pass statement and proof text through the Unicode-math transcriber.
    pub transcribe_unicode: bool,
}

const PREAMBLE: &str = "\\documentclass{article}\n\
\\usepackage{amsmath}\n\
\\usepackage{amssymb}\n\
\\usepackage{amsthm}\n\
\n\
\\newtheorem{conjecture}{Conjecture}\n\
\\newtheorem{lemma}{Lemma}\n\
\\newtheorem{theorem}{Theorem}\n\
\n\
\\title{Exploration Trajectory}\n\
\\author{aim-forge}\n\
\n\
\\begin{document}\n\
\\maketitle\n";

/// Emits the full report with the builtin symbol table.
pub fn emit_latex_report(entries: &[TrajectoryEntry], options: &ReportOptions) -> String {
    emit_latex_report_with_table(entries, options, &SymbolTable::builtin())
}

/// Emits the full report, transcribing through `table` when the options ask
/// for it. Total over valid entries; blocks appear in index order.
pub fn emit_latex_report_with_table(
    entries: &[TrajectoryEntry],
    options: &ReportOptions,
    table: &SymbolTable,
) -> String {
    let mut doc = String::from(PREAMBLE);
    for entry in entries {
        doc.push('\n');
        doc.push_str(&entry_block(entry, options, table));
    }
    doc.push_str("\n\\end{document}\n");
    doc
}

fn entry_block(entry: &TrajectoryEntry, options: &ReportOptions, table: &SymbolTable) -> String {
    let body = |text: &str| -> String {
        if options.transcribe_unicode {
            table.transcribe(text)
        } else {
            text.to_string()
        }
    };
    let mut block = format!("\\textbf{{type}}: {}\n", type_name(entry.entry_type));
    match entry.entry_type {
        EntryType::Assumption | EntryType::Hint => {
            let content = entry.statement.as_deref().unwrap_or("");
            block.push_str(&format!("\\textbf{{content}}: {}\n", body(content)));
        }
        EntryType::Conjecture | EntryType::Lemma | EntryType::Theorem => {
            let env = type_name(entry.entry_type);
            if let Some(statement) = &entry.statement {
                block.push_str(&format!(
                    "\\begin{{{env}}}\n{}\n\\end{{{env}}}\n",
                    body(statement)
                ));
            }
            if let Some(correctness) = entry.correctness {
                block.push_str(&format!(
                    "\\textbf{{correctness}}: {}\n",
                    if correctness { "True" } else { "False" }
                ));
            }
            if let Some(proof) = &entry.proof {
                block.push_str(&format!(
                    "\\begin{{proof}}\n{}\n\\end{{proof}}\n",
                    body(proof)
                ));
            }
            block.push_str(&format!("\\textbf{{comment}}: {}\n", comment_text(entry)));
        }
        EntryType::Event => {
            if let Some(proof) = &entry.proof {
                block.push_str(&format!(
                    "\\begin{{proof}}\n{}\n\\end{{proof}}\n",
                    body(proof)
                ));
            }
            block.push_str(&format!("\\textbf{{comment}}: {}\n", comment_text(entry)));
        }
    }
    block
}

fn comment_text(entry: &TrajectoryEntry) -> String {
    match entry.comment.as_deref() {
        Some(text) if !text.is_empty() => escape_text(text),
        _ => "None".to_string(),
    }
}

fn type_name(entry_type: EntryType) -> &'static str {
    match entry_type {
        EntryType::Assumption => "assumption",
        EntryType::Hint => "hint",
        EntryType::Conjecture => "conjecture",
        EntryType::Lemma => "lemma",
        EntryType::Theorem => "theorem",
        EntryType::Event => "event",
    }
}

/// Minimal text-mode escaping for comment lines, which carry engine-authored
/// prose rather than math.
fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '_' => out.push_str("\\_"),
            '#' => out.push_str("\\#"),
            '%' => out.push_str("\\%"),
            '&' => out.push_str("\\&"),
            _ => out.push(c),
        }
    }
    out
}

/// Structural check for emitted documents: document markers present and all
/// `\begin{…}`/`\end{…}` pairs properly nested.
pub fn lint_latex(doc: &str) -> Result<(), LatexLintError> {
    if !doc.starts_with("\\documentclass") {
        return Err(LatexLintError::MissingDocumentClass);
    }
    let mut stack: Vec<String> = Vec::new();
    let mut rest = doc;
    loop {
        let begin = rest.find("\\begin{");
        let end = rest.find("\\end{");
        let take_begin = match (begin, end) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(b), Some(e)) => b < e,
        };
        if take_begin {
            let name_start = begin.unwrap() + "\\begin{".len();
            let Some(close) = rest[name_start..].find('}') else {
                return Err(LatexLintError::UnterminatedTag);
            };
            stack.push(rest[name_start..name_start + close].to_string());
            rest = &rest[name_start + close + 1..];
        } else {
            let name_start = end.unwrap() + "\\end{".len();
            let Some(close) = rest[name_start..].find('}') else {
                return Err(LatexLintError::UnterminatedTag);
            };
            let name = &rest[name_start..name_start + close];
            match stack.pop() {
                Some(open) if open == name => {}
                Some(open) => {
                    return Err(LatexLintError::MismatchedEnvironment {
                        open,
                        close: name.to_string(),
                    })
                }
                None => {
                    return Err(LatexLintError::UnopenedEnvironment {
                        name: name.to_string(),
                    })
                }
            }
            rest = &rest[name_start + close + 1..];
        }
    }
    if let Some(open) = stack.pop() {
        return Err(LatexLintError::UnclosedEnvironment { name: open });
    }
    if !doc.contains("\\begin{document}") {
        return Err(LatexLintError::MissingDocumentEnvironment);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatexLintError {
    #[error("document does not start with \\documentclass")]
    MissingDocumentClass,
    #[error("document has no document environment")]
    MissingDocumentEnvironment,
    #[error("unterminated \\begin/\\end tag")]
    UnterminatedTag,
    #[error("environment {open:?} closed as {close:?}")]
    MismatchedEnvironment { open: String, close: String },
    #[error("\\end{{{name}}} without matching \\begin")]
    UnopenedEnvironment { name: String },
    #[error("environment {name:?} never closed")]
    UnclosedEnvironment { name: String },
}
