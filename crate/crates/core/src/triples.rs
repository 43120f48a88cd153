//! Extraction of `[head, relation, tail]` triples from free-form LLM text.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// One extracted triple. `head`, `relation` and `tail` are normalized
/// (see [`normalize_entity`]); `display` keeps the original casing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    /// 1-based line the triple was found on.
    pub source_line: usize,
    pub display: [String; 3],
}

impl Triple {
    /// Builds a triple from raw components, normalizing them. Returns
    /// `None` when any component normalizes to the empty string.
    pub fn new(head: &str, relation: &str, tail: &str, source_line: usize) -> Option<Self> {
        let display = [head, relation, tail].map(clean_component);
        let [h, r, t] = display.clone().map(|s| normalize_entity(&s));
        if h.is_empty() || r.is_empty() || t.is_empty() {
            return None;
        }
        Some(Self {
            head: h,
            relation: r,
            tail: t,
            source_line,
            display,
        })
    }

    pub fn key(&self) -> (&str, &str, &str) {
        (&self.head, &self.relation, &self.tail)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.head, self.relation, self.tail)
    }
}

/// Trim, collapse internal whitespace to single spaces, lower-case.
pub fn normalize_entity(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn clean_component(raw: &str) -> String {
    let stripped = raw.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`'));
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub triples: Vec<Triple>,
    /// Non-blank lines that produced no triple.
    pub skipped_lines: usize,
    /// Exact duplicates (after normalization) dropped.
    pub duplicates: usize,
}

/// Bracket groups on one line, or `None` entries for malformed ones
/// (nested or unterminated).
fn bracket_groups(line: &str) -> Vec<Option<&str>> {
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut nested = false;
    let mut start = 0usize;
    for (i, c) in line.char_indices() {
        match c {
            '[' => {
                if depth == 0 {
                    start = i + 1;
                    nested = false;
                } else {
                    nested = true;
                }
                depth += 1;
            }
            ']' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    groups.push((!nested).then(|| &line[start..i]));
                }
            }
            _ => {}
        }
    }
    if depth > 0 {
        groups.push(None);
    }
    groups
}

/// Splits on the first and last comma; anything between becomes the
/// relation.
fn split_group(inner: &str) -> Option<(&str, &str, &str)> {
    let first = inner.find(',')?;
    let last = inner.rfind(',')?;
    if first == last {
        return None;
    }
    Some((&inner[..first], &inner[first + 1..last], &inner[last + 1..]))
}

/// Extracts every well-formed bracket triple in order of first
/// appearance. Never fails; unusable lines are tallied in
/// [`ParseOutcome::skipped_lines`].
pub fn parse_triples(text: &str) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut found = 0usize;
        for group in bracket_groups(line).into_iter().flatten() {
            let Some((h, r, t)) = split_group(group) else {
                continue;
            };
            let Some(triple) = Triple::new(h, r, t, idx + 1) else {
                continue;
            };
            found += 1;
            let key = (
                triple.head.clone(),
                triple.relation.clone(),
                triple.tail.clone(),
            );
            if seen.insert(key) {
                out.triples.push(triple);
            } else {
                out.duplicates += 1;
            }
        }
        if found == 0 {
            out.skipped_lines += 1;
        }
    }
    out
}

/// Parses a concept list as returned by a concept-pruning prompt: one
/// concept per line (numbering and bullets stripped), or a single
/// comma-separated line. Normalized, deduplicated, in order.
pub fn parse_concept_list(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let raw: Vec<&str> = if lines.len() == 1 && lines[0].contains(',') {
        lines[0].split(',').collect()
    } else {
        lines
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in raw {
        let item = item
            .trim()
            .trim_start_matches(|c: char| c.is_ascii_digit())
            .trim_start_matches(['.', ')', '-', '*', '•', ':'])
            .trim();
        let concept = normalize_entity(&clean_component(item));
        if !concept.is_empty() && seen.insert(concept.clone()) {
            out.push(concept);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triple() {
        let out = parse_triples("[Aspirin, treats, Headache]");
        assert_eq!(out.triples.len(), 1);
        assert_eq!(out.triples[0].key(), ("aspirin", "treats", "headache"));
        assert_eq!(out.triples[0].display[0], "Aspirin");
        assert_eq!(out.skipped_lines, 0);
    }

    #[test]
    fn dedupe_and_skip() {
        let out = parse_triples("1. [A, r, B] some prose\nnot a triple\n[A, r, B]");
        assert_eq!(out.triples.len(), 1);
        assert_eq!(out.triples[0].key(), ("a", "r", "b"));
        assert_eq!(out.skipped_lines, 1);
        assert_eq!(out.duplicates, 1);
    }

    #[test]
    fn middle_commas_join_relation() {
        let out = parse_triples("[Drug, is used for, e.g., Pain]");
        assert_eq!(out.triples[0].key(), ("drug", "is used for, e.g.", "pain"));
    }

    #[test]
    fn malformed_groups_are_skipped() {
        let out = parse_triples("[a, b]\n[[a, r, b]]\n[a, r, b\n[, r, b]");
        assert!(out.triples.is_empty());
        assert_eq!(out.skipped_lines, 4);
    }

    #[test]
    fn nested_group_does_not_hide_sibling() {
        let out = parse_triples("[x, [y], z] then [a, r, b]");
        assert_eq!(out.triples.len(), 1);
        assert_eq!(out.triples[0].head, "a");
    }

    #[test]
    fn several_groups_per_line() {
        let out = parse_triples("[a, r, b]; [c, s, d]");
        assert_eq!(out.triples.len(), 2);
        assert_eq!(out.triples[1].source_line, 1);
    }

    #[test]
    fn quotes_are_stripped() {
        let out = parse_triples(r#"["Neural Network", "uses", 'Backpropagation']"#);
        assert_eq!(
            out.triples[0].key(),
            ("neural network", "uses", "backpropagation")
        );
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_entity("  Arterial  Blood Gases "),
            "arterial blood gases"
        );
        assert_eq!(normalize_entity("ANTIHYPERTENSIVES"), "antihypertensives");
        assert_eq!(normalize_entity(""), "");
    }

    #[test]
    fn concept_lists() {
        assert_eq!(
            parse_concept_list("1. Neural Networks\n2) Bayesian  inference\n- neural networks\n"),
            vec!["neural networks", "bayesian inference"]
        );
        assert_eq!(parse_concept_list("a, B ,c"), vec!["a", "b", "c"]);
    }
}
