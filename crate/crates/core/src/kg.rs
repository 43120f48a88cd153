//! Knowledge graphs built from LLM triples: construction, union,
//! JSONL persistence, low-entropy filtering, and LLM-driven pruning.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use demograph_llm::{
    ChatBackend, ChatRequest, ChatResponse, GatewayError, GENERATION_TEMPERATURE,
    PRUNING_TEMPERATURE,
};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::KgError;
use crate::prompt::{DatasetContext, GranularityLevel, TemplateKind, Templates};
use crate::triples::{normalize_entity, parse_concept_list, parse_triples, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub levels: Vec<GranularityLevel>,
    #[serde(default)]
    pub subjects: Vec<String>,
    /// Request digests of the LLM calls that produced the graph.
    #[serde(default)]
    pub digests: Vec<String>,
}

impl Provenance {
    fn absorb(&mut self, other: &Provenance) {
        let levels: BTreeSet<_> = self.levels.iter().chain(&other.levels).copied().collect();
        self.levels = levels.into_iter().collect();
        for s in &other.subjects {
            if !self.subjects.contains(s) {
                self.subjects.push(s.clone());
            }
        }
        for d in &other.digests {
            if !self.digests.contains(d) {
                self.digests.push(d.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KgEdge {
    #[serde(rename = "h")]
    pub head: String,
    #[serde(rename = "r")]
    pub relation: String,
    #[serde(rename = "t")]
    pub tail: String,
}

impl KgEdge {
    pub fn render(&self) -> String {
        format!("[{}, {}, {}]", self.head, self.relation, self.tail)
    }
}

/// Directed, relation-labelled graph over normalized concept strings.
/// Concepts are exactly the edge endpoints; edges are unique and kept in
/// first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeGraph {
    concepts: BTreeSet<String>,
    edges: Vec<KgEdge>,
    relations: BTreeSet<String>,
    provenance: Provenance,
}

impl KnowledgeGraph {
    pub fn from_edges(edges: impl IntoIterator<Item = KgEdge>, provenance: Provenance) -> Self {
        let mut kg = KnowledgeGraph {
            provenance,
            ..Default::default()
        };
        let mut seen = HashSet::new();
        for e in edges {
            if seen.contains(&e) {
                continue;
            }
            seen.insert(e.clone());
            kg.concepts.insert(e.head.clone());
            kg.concepts.insert(e.tail.clone());
            kg.relations.insert(e.relation.clone());
            kg.edges.push(e);
        }
        kg
    }

    pub fn concepts(&self) -> &BTreeSet<String> {
        &self.concepts
    }

    pub fn edges(&self) -> &[KgEdge] {
        &self.edges
    }

    pub fn relations(&self) -> &BTreeSet<String> {
        &self.relations
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Distinct `(head, tail)` pairs in edge order, relations erased.
    pub fn directed_pairs(&self) -> Vec<(&str, &str)> {
        let mut seen = HashSet::new();
        self.edges
            .iter()
            .map(|e| (e.head.as_str(), e.tail.as_str()))
            .filter(|p| seen.insert(*p))
            .collect()
    }

    pub fn rendered_edges(&self) -> Vec<String> {
        self.edges.iter().map(KgEdge::render).collect()
    }

    /// Set equality on concepts, edges and relations (ignores edge order
    /// and provenance).
    pub fn same_content(&self, other: &KnowledgeGraph) -> bool {
        let a: BTreeSet<_> = self.edges.iter().collect();
        let b: BTreeSet<_> = other.edges.iter().collect();
        self.concepts == other.concepts && self.relations == other.relations && a == b
    }

    pub fn invariants_hold(&self) -> bool {
        let endpoints_known = self
            .edges
            .iter()
            .all(|e| self.concepts.contains(&e.head) && self.concepts.contains(&e.tail));
        let normalized = self
            .concepts
            .iter()
            .all(|c| normalize_entity(c) == *c && !c.is_empty());
        let unique = self.edges.iter().collect::<HashSet<_>>().len() == self.edges.len();
        endpoints_known && normalized && unique
    }

    /// Drops every edge touching a single-token concept on the stoplist.
    pub fn without_low_entropy(&self, stoplist: &Stoplist) -> KnowledgeGraph {
        let kept = self
            .edges
            .iter()
            .filter(|e| !stoplist.rejects(&e.head) && !stoplist.rejects(&e.tail))
            .cloned();
        KnowledgeGraph::from_edges(kept, self.provenance.clone())
    }
}

/// Builds a KG from already-normalized triples.
pub fn build_kg(triples: &[Triple], provenance: Provenance) -> KnowledgeGraph {
    KnowledgeGraph::from_edges(
        triples.iter().map(|t| KgEdge {
            head: t.head.clone(),
            relation: t.relation.clone(),
            tail: t.tail.clone(),
        }),
        provenance,
    )
}

pub fn union_kgs(kgs: &[KnowledgeGraph]) -> KnowledgeGraph {
    let mut provenance = Provenance::default();
    for kg in kgs {
        provenance.absorb(&kg.provenance);
    }
    KnowledgeGraph::from_edges(kgs.iter().flat_map(|k| k.edges.iter().cloned()), provenance)
}

/// Single-token concepts that carry no information for the task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

impl Default for Stoplist {
    fn default() -> Self {
        Self::new([
            "is",
            "are",
            "a",
            "an",
            "the",
            "of",
            "and",
            "or",
            "it",
            "this",
            "that",
            "dataset",
            "data",
            "disease",
            "thing",
            "things",
            "concept",
            "entity",
            "node",
            "nodes",
            "graph",
            "type",
            "other",
            "others",
            "etc",
            "something",
            "none",
        ])
    }
}

impl Stoplist {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| normalize_entity(w.as_ref()))
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            words: BTreeSet::new(),
        }
    }

    pub fn rejects(&self, concept: &str) -> bool {
        !concept.contains(' ') && self.words.contains(concept)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
}

pub fn kg_to_jsonl(kg: &KnowledgeGraph) -> String {
    let mut out = serde_json::to_string(&Header {
        provenance: kg.provenance.clone(),
    })
    .expect("header serializes");
    out.push('\n');
    for e in &kg.edges {
        out.push_str(&serde_json::to_string(e).expect("edge serializes"));
        out.push('\n');
    }
    out
}

pub fn kg_from_jsonl(raw: &str, path: &Path) -> Result<KnowledgeGraph, KgError> {
    let err = |line: usize, message: String| KgError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = raw.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| err(1, "missing provenance header".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| err(1, format!("bad header: {e}")))?;
    let mut edges = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let e: KgEdge = serde_json::from_str(line).map_err(|e| err(lineno, e.to_string()))?;
        let e = KgEdge {
            head: normalize_entity(&e.head),
            relation: normalize_entity(&e.relation),
            tail: normalize_entity(&e.tail),
        };
        if e.head.is_empty() || e.relation.is_empty() || e.tail.is_empty() {
            return Err(err(lineno, "empty triple component".into()));
        }
        edges.push(e);
    }
    Ok(KnowledgeGraph::from_edges(edges, header.provenance))
}

pub fn save_kg(kg: &KnowledgeGraph, path: &Path) -> Result<(), KgError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| KgError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, kg_to_jsonl(kg)).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_kg(path: &Path) -> Result<KnowledgeGraph, KgError> {
    let raw = fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    kg_from_jsonl(&raw, path)
}

/// How KG-producing LLM calls are issued.
pub struct LlmSession<'a> {
    pub backend: &'a dyn ChatBackend,
    pub templates: Templates,
    pub model: String,
    pub generation_temperature: f64,
    pub pruning_temperature: f64,
    /// Persist every response here (content-addressed) when set.
    pub cache_dir: Option<PathBuf>,
    /// Write one audit record per pruning round here when set.
    pub audit_dir: Option<PathBuf>,
}

impl<'a> LlmSession<'a> {
    pub fn new(backend: &'a dyn ChatBackend, model: impl Into<String>) -> Self {
        Self {
            backend,
            templates: Templates::builtin(),
            model: model.into(),
            generation_temperature: GENERATION_TEMPERATURE,
            pruning_temperature: PRUNING_TEMPERATURE,
            cache_dir: None,
            audit_dir: None,
        }
    }

    pub fn generation_request(&self, prompt: &str) -> ChatRequest {
        ChatRequest::user(&self.model, prompt, self.generation_temperature)
    }

    pub fn pruning_request(&self, prompt: &str) -> ChatRequest {
        ChatRequest::user(&self.model, prompt, self.pruning_temperature)
    }

    fn call(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        match &self.cache_dir {
            Some(dir) => self.backend.complete_cached(request, dir),
            None => self.backend.complete(request),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub kg: KnowledgeGraph,
    pub prompts: usize,
    pub skipped_lines: usize,
    pub duplicates: usize,
}

/// Plans prompts for `levels`, sends each, parses the responses and
/// unions the per-prompt KGs.
pub fn generate_kg(
    session: &LlmSession<'_>,
    ctx: &DatasetContext,
    levels: &[GranularityLevel],
) -> Result<GenerationReport, KgError> {
    let plan = session.templates.plan(ctx, levels)?;
    let mut kgs = Vec::with_capacity(plan.len());
    let (mut skipped, mut dups) = (0, 0);
    for item in &plan {
        let request = session.generation_request(&item.prompt);
        let response = session.call(&request)?;
        let parsed = parse_triples(&response.text);
        info!(
            "{} prompt for {:?}: {} triples, {} skipped lines",
            item.level,
            item.subject,
            parsed.triples.len(),
            parsed.skipped_lines
        );
        skipped += parsed.skipped_lines;
        dups += parsed.duplicates;
        kgs.push(build_kg(
            &parsed.triples,
            Provenance {
                levels: vec![item.level],
                subjects: vec![item.subject.clone()],
                digests: vec![request.digest()],
            },
        ));
    }
    Ok(GenerationReport {
        kg: union_kgs(&kgs),
        prompts: plan.len(),
        skipped_lines: skipped,
        duplicates: dups,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub kg: KnowledgeGraph,
    pub rounds_completed: usize,
    /// Set when a round parsed to zero triples and pruning stopped early.
    pub aborted: bool,
}

#[derive(Serialize)]
struct RoundAudit<'a> {
    round: usize,
    request_digest: String,
    prompt: &'a str,
    response_text: &'a str,
    edges_in: usize,
    edges_out: usize,
}

fn write_audit(dir: &Path, round: usize, audit: &RoundAudit<'_>) -> Result<(), KgError> {
    fs::create_dir_all(dir).map_err(|source| KgError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(format!("prune_round_{round:02}.json"));
    let body = serde_json::to_string_pretty(audit).expect("audit serializes");
    fs::write(&path, body).map_err(|source| KgError::Io { path, source })
}

/// Re-prompts the LLM with the current edges `rounds` times; each parsed
/// response becomes the new KG. The LLM may add triples, so the result
/// is not capped at `number_to_keep`. A response with no triples stops
/// the loop and keeps the previous round's KG.
pub fn prune_via_ift(
    session: &LlmSession<'_>,
    kg: &KnowledgeGraph,
    number_to_keep: usize,
    rounds: usize,
) -> Result<PruneReport, KgError> {
    if rounds == 0 || number_to_keep == 0 {
        return Err(KgError::Argument(
            "rounds and number_to_keep must both be >= 1".into(),
        ));
    }
    let mut current = kg.clone();
    for round in 1..=rounds {
        let prompt = session.templates.render_ift(
            &current.rendered_edges(),
            number_to_keep,
            TemplateKind::IftTriples,
        )?;
        let request = session.pruning_request(&prompt);
        let response = session.call(&request)?;
        let parsed = parse_triples(&response.text);
        if let Some(dir) = &session.audit_dir {
            write_audit(
                dir,
                round,
                &RoundAudit {
                    round,
                    request_digest: request.digest(),
                    prompt: &prompt,
                    response_text: &response.text,
                    edges_in: current.edges.len(),
                    edges_out: parsed.triples.len(),
                },
            )?;
        }
        if parsed.triples.is_empty() {
            warn!("pruning round {round} parsed to zero triples; keeping previous KG");
            return Ok(PruneReport {
                kg: current,
                rounds_completed: round - 1,
                aborted: true,
            });
        }
        let mut provenance = current.provenance.clone();
        provenance.digests.push(request.digest());
        current = build_kg(&parsed.triples, provenance);
    }
    Ok(PruneReport {
        kg: current,
        rounds_completed: rounds,
        aborted: false,
    })
}

/// Concept-level pruning: asks the LLM to keep the `number_to_keep` most
/// important concepts of `kg`.
pub fn prune_concepts_via_ift(
    session: &LlmSession<'_>,
    kg: &KnowledgeGraph,
    number_to_keep: usize,
) -> Result<Vec<String>, KgError> {
    let concepts: Vec<String> = kg.concepts.iter().cloned().collect();
    let prompt =
        session
            .templates
            .render_ift(&concepts, number_to_keep, TemplateKind::IftConcepts)?;
    let response = session.call(&session.pruning_request(&prompt))?;
    Ok(parse_concept_list(&response.text))
}

/// Asks the LLM for relationships among a fixed concept list. Triples
/// whose endpoints are not in the list are dropped.
pub fn generate_kg_from_concepts(
    session: &LlmSession<'_>,
    ctx: &DatasetContext,
    concepts: &[String],
) -> Result<KnowledgeGraph, KgError> {
    let prompt = session.templates.render_kg_from_concepts(ctx, concepts)?;
    let request = session.generation_request(&prompt);
    let response = session.call(&request)?;
    let allowed: HashSet<&str> = concepts.iter().map(String::as_str).collect();
    let triples: Vec<Triple> = parse_triples(&response.text)
        .triples
        .into_iter()
        .filter(|t| allowed.contains(t.head.as_str()) && allowed.contains(t.tail.as_str()))
        .collect();
    Ok(build_kg(
        &triples,
        Provenance {
            levels: vec![],
            subjects: vec![],
            digests: vec![request.digest()],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(h: &str, r: &str, t: &str) -> KgEdge {
        KgEdge {
            head: h.into(),
            relation: r.into(),
            tail: t.into(),
        }
    }

    #[test]
    fn build_single() {
        let kg = build_kg(&parse_triples("[a, r, b]").triples, Provenance::default());
        assert_eq!(kg.concepts().len(), 2);
        assert_eq!(kg.edges().len(), 1);
        assert_eq!(kg.relations().iter().collect::<Vec<_>>(), vec!["r"]);
        assert!(kg.invariants_hold());
    }

    #[test]
    fn direction_matters() {
        let kg = build_kg(
            &parse_triples("[a, r, b]\n[b, r, a]").triples,
            Provenance::default(),
        );
        assert_eq!(kg.edges().len(), 2);
    }

    #[test]
    fn union_counts() {
        let a = KnowledgeGraph::from_edges(
            [edge("a", "r", "b"), edge("b", "r", "c")],
            Provenance::default(),
        );
        let b = KnowledgeGraph::from_edges(
            [
                edge("d", "r", "e"),
                edge("e", "s", "f"),
                edge("f", "s", "g"),
            ],
            Provenance::default(),
        );
        assert_eq!(union_kgs(&[a.clone(), b]).concepts().len(), 7);
        assert_eq!(union_kgs(&[a.clone(), a.clone()]), a);
        let c = KnowledgeGraph::from_edges(
            [edge("a", "q", "c"), edge("c", "q", "x")],
            Provenance::default(),
        );
        // shares a and c with `a`
        assert_eq!(
            union_kgs(&[a.clone(), c.clone()]).concepts().len(),
            3 + 3 - 2
        );
    }

    #[test]
    fn stoplist_drops_single_token_stopwords() {
        let kg = KnowledgeGraph::from_edges(
            [
                edge("dataset", "contains", "neural network"),
                edge("neural network", "is", "model"),
                edge("disease", "has", "symptom"),
                edge("heart disease", "has", "symptom"),
            ],
            Provenance::default(),
        );
        let f = kg.without_low_entropy(&Stoplist::default());
        assert_eq!(f.edges().len(), 2);
        assert!(!f.concepts().contains("dataset"));
        assert!(f.concepts().contains("heart disease"));
        assert_eq!(kg.without_low_entropy(&Stoplist::empty()), kg);
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let kg = KnowledgeGraph::from_edges(
            [edge("a", "r", "b"), edge("b", "r", "a")],
            Provenance {
                levels: vec![GranularityLevel::Dataset],
                subjects: vec!["dataset".into()],
                digests: vec!["abc".into()],
            },
        );
        let text = kg_to_jsonl(&kg);
        assert_eq!(kg_from_jsonl(&text, Path::new("kg")).unwrap(), kg);

        let empty = KnowledgeGraph::default();
        let text = kg_to_jsonl(&empty);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(kg_from_jsonl(&text, Path::new("kg")).unwrap(), empty);

        let truncated =
            "{\"provenance\":{}}\n{\"h\":\"a\",\"r\":\"r\",\"t\":\"b\"}\n{\"h\":\"a\",\"r\"";
        match kg_from_jsonl(truncated, Path::new("kg")) {
            Err(KgError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            kg_from_jsonl("", Path::new("kg")),
            Err(KgError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn directed_pairs_erase_relations() {
        let kg = KnowledgeGraph::from_edges(
            [
                edge("a", "r", "b"),
                edge("a", "s", "b"),
                edge("b", "r", "a"),
            ],
            Provenance::default(),
        );
        assert_eq!(kg.directed_pairs(), vec![("a", "b"), ("b", "a")]);
    }
}
