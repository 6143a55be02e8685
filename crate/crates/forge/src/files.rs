//! File formats and std-side plumbing: problem files, run-config files,
//! script files, the trajectory file sink, the stats file, and the system
//! clock.
//!
//! - Problem file (TOML): `title`, repeated `[[assumption]]` blocks,
//!   repeated `[[hint]]` blocks, one `[problem]` block, each with a `text`
//!   field.
//! - Config file (TOML): the `RunConfig` fields one-to-one at top level,
//!   plus an optional `[backend]` table (`endpoint`, `model`) for remote
//!   runs and an optional `templates_dir` pointing at prompt template
//!   overrides. The API credential is never read from config files.
//! - Script file (JSON lines): one step per line with `role`, `text`, and
//!   optional `contains` / `finish_reason` / usage fields.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use aim_forge_core::agents::PromptTemplates;
use aim_forge_core::backend::{
    ChatResponse, FinishReason, RoleTag, Script, ScriptStep, StepMatcher, Usage,
};
use aim_forge_core::model::{ProblemContext, RunConfig, TrajectoryEntry};
use aim_forge_core::orchestrator::{Clock, RunOutcome};
use aim_forge_core::trajectory::{entry_to_line, SinkError, TrajectorySink};
use serde::{Deserialize, Serialize};

#[derive(Debug, Deserialize)]
struct TextBlock {
    text: String,
}

#[derive(Debug, Deserialize)]
struct ProblemFile {
    title: String,
    #[serde(default, rename = "assumption")]
    assumptions: Vec<TextBlock>,
    #[serde(default, rename = "hint")]
    hints: Vec<TextBlock>,
    problem: TextBlock,
}

/// Remote endpoint settings from the `[backend]` config table.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
pub struct BackendSettings {
    pub endpoint: String,
    pub model: String,
}

#[derive(Debug, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    run: RunConfig,
    backend: Option<BackendSettings>,
    templates_dir: Option<PathBuf>,
}

/// A fully loaded run configuration.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    pub backend: Option<BackendSettings>,
    pub templates: PromptTemplates,
}

#[derive(Debug, Deserialize, Serialize)]
struct ScriptRow {
    role: RoleTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contains: Option<String>,
    text: String,
    #[serde(default)]
    finish_reason: FinishReason,
    #[serde(default)]
    input_units: u64,
    #[serde(default)]
    output_units: u64,
}

pub fn load_problem(path: &Path) -> Result<ProblemContext, FileError> {
    let raw = read_input(path)?;
    let parsed: ProblemFile = toml::from_str(&raw).map_err(|e| FileError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    ProblemContext::new(
        parsed.title,
        parsed.assumptions.into_iter().map(|b| b.text).collect(),
        parsed.hints.into_iter().map(|b| b.text).collect(),
        parsed.problem.text,
    )
    .map_err(|e| FileError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, FileError> {
    let raw = read_input(path)?;
    let parsed: ConfigFile = toml::from_str(&raw).map_err(|e| FileError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    parsed.run.validate().map_err(|e| FileError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let templates = match &parsed.templates_dir {
        Some(dir) => load_templates(dir)?,
        None => PromptTemplates::builtin(),
    };
    Ok(LoadedConfig {
        run: parsed.run,
        backend: parsed.backend,
        templates,
    })
}

/// Loads the four prompt templates from a directory of `.txt` files,
/// falling back to the builtin text for any file that is absent.
pub fn load_templates(dir: &Path) -> Result<PromptTemplates, FileError> {
    let mut templates = PromptTemplates::builtin();
    for (name, slot) in [
        ("system.txt", &mut templates.system),
        ("explorer_user.txt", &mut templates.explorer_user),
        ("verifier_user.txt", &mut templates.verifier_user),
        ("refiner_user.txt", &mut templates.refiner_user),
    ] {
        let path = dir.join(name);
        if path.exists() {
            *slot = read_input(&path)?;
        }
    }
    Ok(templates)
}

pub fn load_script(path: &Path) -> Result<Script, FileError> {
    let raw = read_input(path)?;
    let mut steps = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ScriptRow = serde_json::from_str(line).map_err(|e| FileError::Parse {
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        let matcher = StepMatcher {
            role_tag: row.role,
            user_prompt_contains: row.contains,
        };
        steps.push(ScriptStep::new(
            matcher,
            ChatResponse {
                text: row.text,
                finish_reason: row.finish_reason,
                usage: Usage {
                    input_units: row.input_units,
                    output_units: row.output_units,
                },
            },
        ));
    }
    Ok(Script::new(steps))
}

fn read_input(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            FileError::Missing {
                path: path.to_path_buf(),
            }
        } else {
            FileError::Io {
                path: path.to_path_buf(),
                detail: e.to_string(),
            }
        }
    })
}

/// Summary written next to the trajectory after a run.
#[derive(Debug, Serialize)]
struct StatsFile<'a> {
    solved: bool,
    stop_reason: &'a aim_forge_core::orchestrator::StopReason,
    iterations: u32,
    lemmas: usize,
    stats: &'a aim_forge_core::orchestrator::RunStats,
}

pub fn write_stats(path: &Path, outcome: &RunOutcome) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(&StatsFile {
        solved: outcome.solved,
        stop_reason: &outcome.stop_reason,
        iterations: outcome.iterations,
        lemmas: outcome.store.len(),
        stats: &outcome.stats,
    })
    .expect("stats serialize");
    fs::write(path, body)
}

/// Appends each entry as one line and flushes it immediately, preserving
/// whole-line discipline so interrupted runs leave at most one partial line.
#[derive(Debug)]
pub struct FileSink {
    file: File,
}

impl FileSink {
    /// Creates (truncating) the trajectory file.
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            file: File::create(path)?,
        })
    }

    /// Opens for appending, for resumed inspection tooling.
    pub fn append_to(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            file: OpenOptions::new().create(true).append(true).open(path)?,
        })
    }
}

impl TrajectorySink for FileSink {
    fn append(&mut self, entry: &TrajectoryEntry) -> Result<(), SinkError> {
        let mut line = entry_to_line(entry).map_err(|e| SinkError {
            detail: e.to_string(),
        })?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.flush())
            .map_err(|e| SinkError {
                detail: e.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("missing file: {path}")]
    Missing { path: PathBuf },
    #[error("cannot read {path}: {detail}")]
    Io { path: PathBuf, detail: String },
    #[error("cannot parse {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn problem_file_round_trip() {
        let file = write_temp(
            r#"
title = "Decay of solutions"

[[assumption]]
text = "D is bounded."

[[assumption]]
text = "u0 lies in L2."

[[hint]]
text = "Energy methods."

[problem]
text = "Show exponential decay."
"#,
            ".toml",
        );
        let ctx = load_problem(file.path()).unwrap();
        assert_eq!(ctx.title, "Decay of solutions");
        assert_eq!(ctx.assumptions.len(), 2);
        assert_eq!(ctx.hints, vec!["Energy methods.".to_string()]);
        assert_eq!(ctx.target_statement, "Show exponential decay.");
    }

    #[test]
    fn problem_file_missing_problem_block_fails() {
        let file = write_temp("title = \"x\"\n", ".toml");
        let err = load_problem(file.path()).unwrap_err();
        assert!(matches!(err, FileError::Parse { .. }));
    }

    #[test]
    fn missing_file_is_distinct() {
        let err = load_problem(Path::new("/nonexistent/problem.toml")).unwrap_err();
        assert!(matches!(err, FileError::Missing { .. }));
        assert!(err.to_string().contains("/nonexistent/problem.toml"));
    }

    #[test]
    fn config_file_maps_run_config_fields() {
        let file = write_temp(
            r#"
k_reviews = 2
exploration_limit = 4
refine_cap = 1
lemma_context_budget = 500
dedup_enabled = false
correction_suggestions = "check hypotheses"

[role_params.explorer]
temperature = 0.9
max_output_len = 1024

[role_params.verifier]
temperature = 0.1
max_output_len = 512

[role_params.refiner]
temperature = 0.4
max_output_len = 1024

[backend]
endpoint = "http://localhost:9000/v1/chat/completions"
model = "local-test"
"#,
            ".toml",
        );
        let loaded = load_config(file.path()).unwrap();
        assert_eq!(loaded.run.k_reviews, 2);
        assert_eq!(loaded.run.exploration_limit, 4);
        assert_eq!(loaded.run.refine_cap, 1);
        assert_eq!(loaded.run.lemma_context_budget, 500);
        assert!(!loaded.run.dedup_enabled);
        assert_eq!(
            loaded.run.correction_suggestions.as_deref(),
            Some("check hypotheses")
        );
        assert_eq!(loaded.run.role_params.explorer.temperature, 0.9);
        let backend = loaded.backend.unwrap();
        assert_eq!(backend.model, "local-test");
    }

    #[test]
    fn config_defaults_apply_when_fields_missing() {
        let file = write_temp("k_reviews = 5\n", ".toml");
        let loaded = load_config(file.path()).unwrap();
        assert_eq!(loaded.run.k_reviews, 5);
        assert_eq!(loaded.run.exploration_limit, 8);
        assert!(loaded.backend.is_none());
    }

    #[test]
    fn config_rejects_invalid_values() {
        let file = write_temp("k_reviews = 0\n", ".toml");
        assert!(matches!(
            load_config(file.path()),
            Err(FileError::Parse { .. })
        ));
    }

    #[test]
    fn script_file_parses_rows() {
        let file = write_temp(
            concat!(
                r#"{"role":"explorer","text":"<conjecture>…</conjecture>"}"#,
                "\n",
                r#"{"role":"verifier","contains":"Lemma","text":"VERDICT: ACCEPT","finish_reason":"complete"}"#,
                "\n",
            ),
            ".jsonl",
        );
        let script = load_script(file.path()).unwrap();
        assert_eq!(script.remaining(), 2);
    }

    #[test]
    fn script_file_bad_line_reports_number() {
        let file = write_temp(
            "{\"role\":\"explorer\",\"text\":\"ok\"}\nnot json\n",
            ".jsonl",
        );
        let err = load_script(file.path()).unwrap_err();
        match err {
            FileError::Parse { detail, .. } => assert!(detail.starts_with("line 2:")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn templates_dir_overrides_builtin() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("explorer_user.txt"),
            "custom {target_statement}",
        )
        .unwrap();
        let config = write_temp(
            &format!("templates_dir = \"{}\"\n", dir.path().display()),
            ".toml",
        );
        let loaded = load_config(config.path()).unwrap();
        assert_eq!(loaded.templates.explorer_user, "custom {target_statement}");
        // Untouched templates fall back to the builtin text.
        assert_eq!(
            loaded.templates.verifier_user,
            PromptTemplates::builtin().verifier_user
        );
    }

    #[test]
    fn file_sink_writes_whole_lines() {
        use aim_forge_core::model::EntryType;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.aimtrj");
        let mut sink = FileSink::create(&path).unwrap();
        let mut entry = TrajectoryEntry::new(EntryType::Event).with_comment("one");
        entry.index = 0;
        sink.append(&entry).unwrap();
        let read = aim_forge_core::trajectory::read_trajectory(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(read.entries.len(), 1);
        assert!(!read.truncated_tail);
    }
}
