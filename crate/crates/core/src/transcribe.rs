//! Deterministic Unicode-math → LaTeX transcription.
//!
//! Substitutions come from a versioned symbol table (`data/symbols.tbl`,
//! embedded as the builtin default; alternative tables parse from the same
//! two-column text format). Superscript and subscript character runs combine
//! greedily into `^{…}` / `_{…}` groups. Characters outside the table pass
//! through unchanged, and the output is a fixed point: emitted LaTeX
//! contains no mapped code point, so transcription is idempotent.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// The symbol table shipped with the crate.
pub const BUILTIN_SYMBOL_TABLE: &str = include_str!("../data/symbols.tbl");

/// Mapping from Unicode symbol sequences to LaTeX replacements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    map: BTreeMap<String, String>,
    max_key_chars: usize,
}

impl SymbolTable {
    /// Parses the two-column table format: symbol sequence, whitespace,
    /// replacement. `#` starts a comment line; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, SymbolTableError> {
        let mut map = BTreeMap::new();
        let mut max_key_chars = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(split) = line.find(char::is_whitespace) else {
                return Err(SymbolTableError::MissingReplacement { line: i + 1 });
            };
            let key = &line[..split];
            let replacement = line[split..].trim();
            if replacement.is_empty() {
                return Err(SymbolTableError::MissingReplacement { line: i + 1 });
            }
            max_key_chars = max_key_chars.max(key.chars().count());
            map.insert(key.to_string(), replacement.to_string());
        }
        Ok(Self { map, max_key_chars })
    }

    /// The table embedded from `data/symbols.tbl`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SYMBOL_TABLE).expect("builtin symbol table parses")
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Option<&str> {
        self.map.get(symbol).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Transcribes `text`, applying table substitutions (longest match
    /// first) and folding superscript/subscript runs into `^{…}` / `_{…}`.
    pub fn transcribe(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        while i < chars.len() {
            if let Some((run, len)) = script_run(&chars[i..], superscript_char, '^') {
                out.push_str(&run);
                i += len;
                continue;
            }
            if let Some((run, len)) = script_run(&chars[i..], subscript_char, '_') {
                out.push_str(&run);
                i += len;
                continue;
            }
            if let Some((replacement, len)) = self.longest_match(&chars[i..]) {
                i += len;
                out.push_str(replacement);
                if needs_separating_space(replacement, chars.get(i), self) {
                    out.push(' ');
                }
                continue;
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }

    fn longest_match(&self, rest: &[char]) -> Option<(&str, usize)> {
        let upper = self.max_key_chars.min(rest.len());
        for len in (1..=upper).rev() {
            let candidate: String = rest[..len].iter().collect();
            if let Some(replacement) = self.map.get(&candidate) {
                return Some((replacement.as_str(), len));
            }
        }
        None
    }
}

/// A control-word replacement is followed by a space when the next piece
/// would otherwise fuse with or crowd the command name: another replacement,
/// or a plain alphanumeric character. Script runs attach directly.
fn needs_separating_space(replacement: &str, next: Option<&char>, table: &SymbolTable) -> bool {
    if !replacement.starts_with('\\') {
        return false;
    }
    let Some(&next) = next else {
        return false;
    };
    if superscript_char(next).is_some() || subscript_char(next).is_some() {
        return false;
    }
    let mut buf = [0u8; 4];
    if table.map.contains_key(next.encode_utf8(&mut buf) as &str) {
        return true;
    }
    next.is_ascii_alphanumeric()
}

/// Folds a leading run of same-class script characters into one group.
fn script_run(
    rest: &[char],
    classify: fn(char) -> Option<char>,
    marker: char,
) -> Option<(String, usize)> {
    let mut body = String::new();
    let mut len = 0;
    for &c in rest {
        match classify(c) {
            Some(plain) => {
                body.push(plain);
                len += 1;
            }
            None => break,
        }
    }
    if len == 0 {
        return None;
    }
    let mut out = String::with_capacity(body.len() + 3);
    out.push(marker);
    out.push('{');
    out.push_str(&body);
    out.push('}');
    Some((out, len))
}

fn superscript_char(c: char) -> Option<char> {
    Some(match c {
        '⁰' => '0',
        '¹' => '1',
        '²' => '2',
        '³' => '3',
        '⁴' => '4',
        '⁵' => '5',
        '⁶' => '6',
        '⁷' => '7',
        '⁸' => '8',
        '⁹' => '9',
        '⁺' => '+',
        '⁻' => '-',
        '⁽' => '(',
        '⁾' => ')',
        'ⁿ' => 'n',
        'ⁱ' => 'i',
        _ => return None,
    })
}

fn subscript_char(c: char) -> Option<char> {
    Some(match c {
        '₀' => '0',
        '₁' => '1',
        '₂' => '2',
        '₃' => '3',
        '₄' => '4',
        '₅' => '5',
        '₆' => '6',
        '₇' => '7',
        '₈' => '8',
        '₉' => '9',
        '₊' => '+',
        '₋' => '-',
        '₍' => '(',
        '₎' => ')',
        _ => return None,
    })
}

/// Transcribes with the builtin table.
pub fn unicode_math_to_latex(text: &str) -> String {
    SymbolTable::builtin().transcribe(text)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolTableError {
    #[error("symbol table line {line} has no replacement column")]
    MissingReplacement { line: usize },
}
