//! Placeholder templates for knowledge generation and pruning prompts,
//! and prompt planning across granularity levels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PromptError;

/// Every placeholder a template may reference.
pub const PLACEHOLDERS: &[&str] = &[
    "example",
    "descriptions",
    "triples",
    "concepts",
    "number_of_concepts",
    "term",
    "mode",
    "target_triple_count",
    "task",
];

/// Substring every generation prompt carries; the triple parser relies
/// on the LLM following it.
pub const TRIPLE_FORMAT_ANCHOR: &str = "[ENTITY 1, RELATIONSHIP, ENTITY 2]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Generation,
    IftTriples,
    IftConcepts,
    KgFromConcepts,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [
        TemplateKind::Generation,
        TemplateKind::IftTriples,
        TemplateKind::IftConcepts,
        TemplateKind::KgFromConcepts,
    ];

    pub fn file_name(&self) -> &'static str {
        match self {
            TemplateKind::Generation => "generation.txt",
            TemplateKind::IftTriples => "ift_triples.txt",
            TemplateKind::IftConcepts => "ift_concepts.txt",
            TemplateKind::KgFromConcepts => "kg_from_concepts.txt",
        }
    }

    fn builtin_text(&self) -> &'static str {
        match self {
            TemplateKind::Generation => include_str!("../templates/generation.txt"),
            TemplateKind::IftTriples => include_str!("../templates/ift_triples.txt"),
            TemplateKind::IftConcepts => include_str!("../templates/ift_concepts.txt"),
            TemplateKind::KgFromConcepts => include_str!("../templates/kg_from_concepts.txt"),
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TemplateKind::Generation => "generation",
            TemplateKind::IftTriples => "ift_triples",
            TemplateKind::IftConcepts => "ift_concepts",
            TemplateKind::KgFromConcepts => "kg_from_concepts",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

/// A parsed template. `{name}` is a placeholder; `{{` and `}}` are
/// literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: TemplateKind,
    text: String,
    segments: Vec<Segment>,
}

pub type Bindings = BTreeMap<&'static str, String>;

impl PromptTemplate {
    pub fn parse(kind: TemplateKind, text: &str) -> Result<Self, PromptError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = text.char_indices().peekable();
        while let Some((pos, c)) = chars.next() {
            match c {
                '{' if matches!(chars.peek(), Some((_, '{'))) => {
                    chars.next();
                    literal.push('{');
                }
                '}' if matches!(chars.peek(), Some((_, '}'))) => {
                    chars.next();
                    literal.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some((_, '}')) => break,
                            Some((_, ch)) if ch.is_ascii_alphanumeric() || ch == '_' => {
                                name.push(ch)
                            }
                            _ => return Err(PromptError::UnbalancedBrace(pos)),
                        }
                    }
                    if !PLACEHOLDERS.contains(&name.as_str()) {
                        return Err(PromptError::UnknownPlaceholder {
                            kind: kind.to_string(),
                            name,
                        });
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(name));
                }
                '}' => return Err(PromptError::UnbalancedBrace(pos)),
                _ => literal.push(c),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Self {
            kind,
            text: text.to_string(),
            segments,
        })
    }

    pub fn builtin(kind: TemplateKind) -> Self {
        Self::parse(kind, kind.builtin_text()).expect("built-in templates are valid")
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder; the first unbound one is an error.
    pub fn render(&self, bindings: &Bindings) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.text.len());
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(name) => match bindings.get(name.as_str()) {
                    Some(v) => out.push_str(v),
                    None => return Err(PromptError::UnboundPlaceholder(name.clone())),
                },
            }
        }
        Ok(out)
    }
}

/// Granularity of contextual prompting; finer levels sort higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GranularityLevel {
    /// One prompt about the whole dataset.
    #[serde(rename = "s0")]
    Dataset,
    /// One prompt per class / node type.
    #[serde(rename = "s1")]
    Type,
    /// One prompt per described node.
    #[serde(rename = "s2")]
    Node,
}

impl GranularityLevel {
    fn mode_label(&self) -> &'static str {
        match self {
            GranularityLevel::Dataset => "dataset-level",
            GranularityLevel::Type => "type-level",
            GranularityLevel::Node => "node-level",
        }
    }
}

impl fmt::Display for GranularityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GranularityLevel::Dataset => "s0",
            GranularityLevel::Type => "s1",
            GranularityLevel::Node => "s2",
        })
    }
}

impl FromStr for GranularityLevel {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "s0" => Ok(GranularityLevel::Dataset),
            "s1" => Ok(GranularityLevel::Type),
            "s2" => Ok(GranularityLevel::Node),
            other => Err(PromptError::Argument(format!(
                "unknown granularity level {other:?} (expected s0, s1 or s2)"
            ))),
        }
    }
}

/// Parses `"s0"`, `"s0+s1"`, ... into an ordered, deduplicated level list.
pub fn parse_granularity(spec: &str) -> Result<Vec<GranularityLevel>, PromptError> {
    let levels: BTreeSet<GranularityLevel> =
        spec.split('+').map(str::parse).collect::<Result<_, _>>()?;
    if levels.is_empty() {
        return Err(PromptError::Argument("empty granularity".into()));
    }
    Ok(levels.into_iter().collect())
}

pub fn granularity_label(levels: &[GranularityLevel]) -> String {
    levels
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("+")
}

/// Everything known about the working dataset that can be put in a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetContext {
    pub dataset_name: String,
    pub dataset_summary: String,
    pub task_description: String,
    #[serde(default)]
    pub class_names: Vec<String>,
    #[serde(default)]
    pub node_descriptions: BTreeMap<String, String>,
    pub target_triple_count: usize,
    pub example_triple: String,
}

impl DatasetContext {
    pub fn check_level(&self, level: GranularityLevel) -> Result<(), PromptError> {
        let reason = match level {
            GranularityLevel::Type if self.class_names.is_empty() => "no class names available",
            GranularityLevel::Node if self.node_descriptions.is_empty() => {
                "no node descriptions available"
            }
            _ => return Ok(()),
        };
        Err(PromptError::Capability {
            level: level.to_string(),
            reason: reason.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedPrompt {
    pub level: GranularityLevel,
    pub subject: String,
    pub prompt: String,
}

/// The four template kinds, built-in or loaded from a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    by_kind: BTreeMap<TemplateKind, PromptTemplate>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self {
            by_kind: TemplateKind::ALL
                .iter()
                .map(|k| (*k, PromptTemplate::builtin(*k)))
                .collect(),
        }
    }

    /// Loads `<kind>.txt` files from `dir`; kinds without a file keep the
    /// built-in text.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut templates = Self::builtin();
        for kind in TemplateKind::ALL {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|source| PromptError::Io { path, source })?;
            templates
                .by_kind
                .insert(kind, PromptTemplate::parse(kind, &text)?);
        }
        Ok(templates)
    }

    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        &self.by_kind[&kind]
    }

    pub fn render_generation(
        &self,
        ctx: &DatasetContext,
        level: GranularityLevel,
        subject: Option<&str>,
    ) -> Result<String, PromptError> {
        ctx.check_level(level)?;
        let (term, descriptions) = match level {
            GranularityLevel::Dataset => {
                ("the whole dataset".to_string(), ctx.dataset_summary.clone())
            }
            GranularityLevel::Type => {
                let class = subject.ok_or_else(|| {
                    PromptError::Argument("type-level prompts need a class name".into())
                })?;
                if !ctx.class_names.iter().any(|c| c == class) {
                    return Err(PromptError::Argument(format!("unknown class {class:?}")));
                }
                (
                    format!("class {class}"),
                    format!(
                        "A node from the {} dataset with {class} as label.\n{}",
                        ctx.dataset_name, ctx.dataset_summary
                    ),
                )
            }
            GranularityLevel::Node => {
                let node = subject.ok_or_else(|| {
                    PromptError::Argument("node-level prompts need a node id".into())
                })?;
                let desc = ctx.node_descriptions.get(node).ok_or_else(|| {
                    PromptError::Argument(format!("no description for node {node:?}"))
                })?;
                (
                    format!("node {node}"),
                    format!("{desc}\n{}", ctx.dataset_summary),
                )
            }
        };
        let mut b = Bindings::new();
        b.insert("task", ctx.task_description.clone());
        b.insert("term", term);
        b.insert("mode", level.mode_label().to_string());
        b.insert("descriptions", descriptions);
        b.insert("target_triple_count", ctx.target_triple_count.to_string());
        if !ctx.example_triple.trim().is_empty() {
            b.insert("example", ctx.example_triple.clone());
        }
        self.get(TemplateKind::Generation).render(&b)
    }

    /// Pruning prompt over `candidates` (rendered triples or concepts).
    /// Asking to keep more than the list holds is allowed.
    pub fn render_ift(
        &self,
        candidates: &[String],
        number_of_concepts: usize,
        kind: TemplateKind,
    ) -> Result<String, PromptError> {
        if candidates.is_empty() {
            return Err(PromptError::Argument("empty candidate list".into()));
        }
        if number_of_concepts == 0 {
            return Err(PromptError::Argument(
                "number_of_concepts must be >= 1".into(),
            ));
        }
        let slot = match kind {
            TemplateKind::IftTriples => "triples",
            TemplateKind::IftConcepts => "concepts",
            other => {
                return Err(PromptError::Argument(format!(
                    "{other} is not a pruning template"
                )))
            }
        };
        let mut b = Bindings::new();
        b.insert(slot, candidates.join("\n"));
        b.insert("number_of_concepts", number_of_concepts.to_string());
        self.get(kind).render(&b)
    }

    pub fn render_kg_from_concepts(
        &self,
        ctx: &DatasetContext,
        concepts: &[String],
    ) -> Result<String, PromptError> {
        if concepts.is_empty() {
            return Err(PromptError::Argument("empty concept list".into()));
        }
        let mut b = Bindings::new();
        b.insert("task", ctx.task_description.clone());
        b.insert("descriptions", ctx.dataset_summary.clone());
        b.insert("number_of_concepts", concepts.len().to_string());
        b.insert("target_triple_count", ctx.target_triple_count.to_string());
        b.insert("concepts", concepts.join("\n"));
        if !ctx.example_triple.trim().is_empty() {
            b.insert("example", ctx.example_triple.clone());
        }
        self.get(TemplateKind::KgFromConcepts).render(&b)
    }

    /// One prompt for s0, one per class for s1, one per described node for
    /// s2; several levels concatenate in level order.
    pub fn plan(
        &self,
        ctx: &DatasetContext,
        levels: &[GranularityLevel],
    ) -> Result<Vec<PlannedPrompt>, PromptError> {
        let mut plan = Vec::new();
        for &level in levels {
            ctx.check_level(level)?;
            let subjects: Vec<String> = match level {
                GranularityLevel::Dataset => vec!["dataset".to_string()],
                GranularityLevel::Type => ctx.class_names.clone(),
                GranularityLevel::Node => ctx.node_descriptions.keys().cloned().collect(),
            };
            for subject in subjects {
                let prompt = self.render_generation(ctx, level, Some(&subject))?;
                plan.push(PlannedPrompt {
                    level,
                    subject,
                    prompt,
                });
            }
        }
        Ok(plan)
    }
}

pub fn render_generation_prompt(
    ctx: &DatasetContext,
    level: GranularityLevel,
    subject: Option<&str>,
) -> Result<String, PromptError> {
    Templates::builtin().render_generation(ctx, level, subject)
}

pub fn render_ift_prompt(
    candidates: &[String],
    number_of_concepts: usize,
    kind: TemplateKind,
) -> Result<String, PromptError> {
    Templates::builtin().render_ift(candidates, number_of_concepts, kind)
}

pub fn plan_prompts(
    ctx: &DatasetContext,
    levels: &[GranularityLevel],
) -> Result<Vec<PlannedPrompt>, PromptError> {
    Templates::builtin().plan(ctx, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cora() -> DatasetContext {
        DatasetContext {
            dataset_name: "Cora".into(),
            dataset_summary: "The Cora dataset consists of 2708 scientific publications classified into one of seven classes.".into(),
            task_description: "node classification of scientific publications".into(),
            class_names: [
                "Case_Based",
                "Genetic_Algorithms",
                "Neural_Networks",
                "Probabilistic_Methods",
                "Reinforcement_Learning",
                "Rule_Learning",
                "Theory",
            ]
            .map(String::from)
            .to_vec(),
            node_descriptions: BTreeMap::new(),
            target_triple_count: 100,
            example_triple: "[neural network, trained with, backpropagation]".into(),
        }
    }

    #[test]
    fn dataset_level_prompt_embeds_summary() {
        let p = render_generation_prompt(&cora(), GranularityLevel::Dataset, None).unwrap();
        assert!(p.contains("consists of 2708 scientific publications"));
        assert!(p.contains(TRIPLE_FORMAT_ANCHOR));
        assert!(p.contains("until reaching a total of 100"));
        assert!(p.contains("[neural network, trained with, backpropagation]"));
    }

    #[test]
    fn type_level_prompt_names_class() {
        let p = render_generation_prompt(&cora(), GranularityLevel::Type, Some("Neural_Networks"))
            .unwrap();
        assert!(p.contains("with Neural_Networks as label"));
        assert!(
            render_generation_prompt(&cora(), GranularityLevel::Type, Some("Chemistry")).is_err()
        );
        assert!(render_generation_prompt(&cora(), GranularityLevel::Type, None).is_err());
    }

    #[test]
    fn missing_example_is_unbound() {
        let mut ctx = cora();
        ctx.example_triple.clear();
        let err = render_generation_prompt(&ctx, GranularityLevel::Dataset, None).unwrap_err();
        assert_eq!(err.to_string(), "unbound placeholder: example");
    }

    #[test]
    fn ift_prompt_lists_candidates() {
        let triples: Vec<String> = (0..100).map(|i| format!("[c{i}, r, d{i}]")).collect();
        let p = render_ift_prompt(&triples, 30, TemplateKind::IftTriples).unwrap();
        assert!(p.contains("30"));
        assert!(triples.iter().all(|t| p.contains(t.as_str())));
        assert!(render_ift_prompt(&triples[..1], 1, TemplateKind::IftTriples).is_ok());
        assert!(matches!(
            render_ift_prompt(&[], 1, TemplateKind::IftTriples),
            Err(PromptError::Argument(_))
        ));
        let concepts = vec!["a".to_string(), "b".to_string()];
        let p = render_ift_prompt(&concepts, 5, TemplateKind::IftConcepts).unwrap();
        assert!(p.contains("a\nb"));
    }

    #[test]
    fn plan_sizes() {
        let ctx = cora();
        assert_eq!(
            plan_prompts(&ctx, &[GranularityLevel::Dataset])
                .unwrap()
                .len(),
            1
        );
        assert_eq!(
            plan_prompts(&ctx, &[GranularityLevel::Type]).unwrap().len(),
            7
        );
        let both = parse_granularity("s0+s1").unwrap();
        let plan = plan_prompts(&ctx, &both).unwrap();
        assert_eq!(plan.len(), 8);
        assert_eq!(plan[0].level, GranularityLevel::Dataset);
        assert!(matches!(
            plan_prompts(&ctx, &[GranularityLevel::Node]),
            Err(PromptError::Capability { .. })
        ));
        let mut empty = cora();
        empty.class_names.clear();
        assert!(matches!(
            plan_prompts(&empty, &[GranularityLevel::Type]),
            Err(PromptError::Capability { .. })
        ));
    }

    #[test]
    fn node_level_plan() {
        let mut ctx = cora();
        ctx.node_descriptions
            .insert("12".into(), "Paper on Hopfield nets".into());
        ctx.node_descriptions
            .insert("40".into(), "Paper on Q-learning".into());
        let plan = plan_prompts(&ctx, &[GranularityLevel::Node]).unwrap();
        assert_eq!(plan.len(), 2);
        assert!(plan[0].prompt.contains("Hopfield"));
    }

    #[test]
    fn granularity_ordering_and_parsing() {
        assert!(GranularityLevel::Dataset < GranularityLevel::Type);
        assert!(GranularityLevel::Type < GranularityLevel::Node);
        assert_eq!(
            parse_granularity("s1+s0").unwrap(),
            vec![GranularityLevel::Dataset, GranularityLevel::Type]
        );
        assert!(parse_granularity("s3").is_err());
        assert_eq!(
            granularity_label(&parse_granularity("s0+s1").unwrap()),
            "s0+s1"
        );
    }

    #[test]
    fn template_parsing() {
        let t = PromptTemplate::parse(TemplateKind::Generation, "a {term} {{literal}} b").unwrap();
        let mut b = Bindings::new();
        b.insert("term", "X".into());
        assert_eq!(t.render(&b).unwrap(), "a X {literal} b");
        assert!(matches!(
            PromptTemplate::parse(TemplateKind::Generation, "{bogus}"),
            Err(PromptError::UnknownPlaceholder { .. })
        ));
        assert!(PromptTemplate::parse(TemplateKind::Generation, "{term").is_err());
        assert!(PromptTemplate::parse(TemplateKind::Generation, "x } y").is_err());
    }

    #[test]
    fn builtin_templates_use_declared_placeholders() {
        for kind in TemplateKind::ALL {
            let t = PromptTemplate::builtin(kind);
            assert!(t.placeholders().iter().all(|p| PLACEHOLDERS.contains(p)));
        }
    }

    #[test]
    fn template_dir_overrides_one_kind() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("ift_triples.txt"),
            "keep {number_of_concepts}:\n{triples}",
        )
        .unwrap();
        let t = Templates::from_dir(dir.path()).unwrap();
        let p = t
            .render_ift(&["[a, r, b]".to_string()], 1, TemplateKind::IftTriples)
            .unwrap();
        assert_eq!(p, "keep 1:\n[a, r, b]");
        assert_eq!(
            t.get(TemplateKind::Generation),
            Templates::builtin().get(TemplateKind::Generation)
        );
    }
}
