//! Frozen LLM responses for offline runs.
//!
//! `fixtures/manifest.json` lists, per dataset and granularity, the
//! response text for every planned generation prompt and for each IFT
//! round. [`freeze_fixtures`] renders the prompts, stores the responses
//! in `fixtures/replay` keyed by request digest and rebuilds the KG files
//! under `fixtures/kgs`. [`verify_fixtures`] checks that the stored
//! entries still match the prompts the current templates render.

use std::fs;
use std::path::{Path, PathBuf};

use demograph_core::prompt::parse_granularity;
use demograph_core::{save_kg, LlmSession, TemplateKind};
use demograph_llm::{
    read_entry, write_entry, CacheEntry, ChatRequest, ChatResponse, Gateway, Usage,
};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::experiment::kg_file_name;
use crate::pipeline::{build_kg, load_context, SessionOptions};

pub const FIXTURE_MODEL: &str = "fixture-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IftFixture {
    pub keep: usize,
    /// One response file per pruning round.
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub dataset: String,
    pub context: String,
    pub granularity: String,
    /// One response file per planned prompt, in plan order.
    pub responses: Vec<String>,
    pub ift: Option<IftFixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: String,
    pub entries: Vec<FixtureEntry>,
}

/// The fixture tree shipped with this crate.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn replay_dir(root: &Path) -> PathBuf {
    root.join("replay")
}

pub fn kg_dir(root: &Path, dataset: &str) -> PathBuf {
    root.join("kgs").join(dataset)
}

pub fn load_manifest(root: &Path) -> Result<Manifest, BenchError> {
    let path = root.join("manifest.json");
    let raw = fs::read_to_string(&path).map_err(BenchError::io(&path))?;
    serde_json::from_str(&raw).map_err(|source| BenchError::Json { path, source })
}

fn read_text(root: &Path, rel: &str) -> Result<String, BenchError> {
    let path = root.join("responses").join(rel);
    fs::read_to_string(&path).map_err(BenchError::io(&path))
}

/// Stores `text` as the recorded answer to `request`.
pub fn freeze_response(dir: &Path, request: &ChatRequest, text: &str) -> Result<(), BenchError> {
    let response = ChatResponse {
        text: text.to_string(),
        usage: Usage::default(),
        cached: false,
    };
    let mut entry = CacheEntry::new(request, &response);
    // keep frozen files stable across re-freezing
    entry.timestamp = 0;
    write_entry(dir, &entry)?;
    Ok(())
}

/// The requests an entry issues, paired with the response text recorded
/// for each. IFT prompts depend on the previous round's KG, so they are
/// computed by replaying the earlier steps from `replay`.
fn entry_requests(
    root: &Path,
    manifest: &Manifest,
    entry: &FixtureEntry,
    replay: &Path,
    freeze: bool,
) -> Result<Vec<(ChatRequest, String)>, BenchError> {
    let ctx = load_context(&root.join(&entry.context))?;
    let gateway = Gateway::replay(replay);
    let session = LlmSession::new(&gateway, manifest.model.clone());
    let plan = session
        .templates
        .plan(&ctx, &parse_granularity(&entry.granularity)?)?;
    if plan.len() != entry.responses.len() {
        return Err(BenchError::Config(format!(
            "{} {}: {} planned prompts but {} responses",
            entry.dataset,
            entry.granularity,
            plan.len(),
            entry.responses.len()
        )));
    }
    let mut pairs = Vec::new();
    for (item, file) in plan.iter().zip(&entry.responses) {
        let request = session.generation_request(&item.prompt);
        let text = read_text(root, file)?;
        if freeze {
            freeze_response(replay, &request, &text)?;
        }
        pairs.push((request, text));
    }
    if let Some(ift) = &entry.ift {
        let opts = SessionOptions {
            model: manifest.model.clone(),
            ..Default::default()
        };
        let mut kg = build_kg(&gateway, &opts, &ctx, &entry.granularity, None)?;
        for file in &ift.responses {
            let prompt = session.templates.render_ift(
                &kg.rendered_edges(),
                ift.keep,
                TemplateKind::IftTriples,
            )?;
            let request = session.pruning_request(&prompt);
            let text = read_text(root, file)?;
            if freeze {
                freeze_response(replay, &request, &text)?;
            }
            pairs.push((request, text));
            kg = crate::pipeline::prune(&gateway, &opts, &kg, ift.keep, 1)?.kg;
        }
    }
    Ok(pairs)
}

fn ift_of(entry: &FixtureEntry) -> Option<(usize, usize)> {
    entry.ift.as_ref().map(|i| (i.keep, i.responses.len()))
}

/// Writes replay entries and KG files for every manifest entry. Returns
/// the KG files written.
pub fn freeze_fixtures(root: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let manifest = load_manifest(root)?;
    let replay = replay_dir(root);
    fs::create_dir_all(&replay).map_err(BenchError::io(&replay))?;
    let mut written = Vec::new();
    for entry in &manifest.entries {
        entry_requests(root, &manifest, entry, &replay, true)?;
        let ctx = load_context(&root.join(&entry.context))?;
        let gateway = Gateway::replay(&replay);
        let opts = SessionOptions {
            model: manifest.model.clone(),
            ..Default::default()
        };
        let dir = kg_dir(root, &entry.dataset);
        fs::create_dir_all(&dir).map_err(BenchError::io(&dir))?;
        let raw = build_kg(&gateway, &opts, &ctx, &entry.granularity, None)?;
        let path = dir.join(kg_file_name(&entry.granularity, false));
        save_kg(&raw, &path)?;
        written.push(path);
        if let Some(ift) = ift_of(entry) {
            let pruned = build_kg(&gateway, &opts, &ctx, &entry.granularity, Some(ift))?;
            let path = dir.join(kg_file_name(&entry.granularity, true));
            save_kg(&pruned, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Problems found by [`verify_fixtures`]; empty when everything matches.
pub fn verify_fixtures(root: &Path) -> Result<Vec<String>, BenchError> {
    let manifest = load_manifest(root)?;
    let replay = replay_dir(root);
    let mut problems = Vec::new();
    for entry in &manifest.entries {
        let label = format!("{} {}", entry.dataset, entry.granularity);
        let pairs = match entry_requests(root, &manifest, entry, &replay, false) {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("{label}: {e}"));
                continue;
            }
        };
        for (request, text) in pairs {
            let digest = request.digest();
            match read_entry(&replay, &digest)? {
                None => problems.push(format!("{label}: no replay entry for {digest}")),
                Some(stored) if stored.request != request => {
                    problems.push(format!("{label}: stored request for {digest} differs"))
                }
                Some(stored) if stored.response_text != text => {
                    problems.push(format!("{label}: stored response for {digest} is stale"))
                }
                Some(_) => {}
            }
        }
        let ctx = load_context(&root.join(&entry.context))?;
        let gateway = Gateway::replay(&replay);
        let opts = SessionOptions {
            model: manifest.model.clone(),
            ..Default::default()
        };
        let dir = kg_dir(root, &entry.dataset);
        let mut expect = vec![(kg_file_name(&entry.granularity, false), None)];
        if let Some(ift) = ift_of(entry) {
            expect.push((kg_file_name(&entry.granularity, true), Some(ift)));
        }
        for (file, ift) in expect {
            let rebuilt = match build_kg(&gateway, &opts, &ctx, &entry.granularity, ift) {
                Ok(kg) => kg,
                Err(e) => {
                    problems.push(format!("{label}: {e}"));
                    continue;
                }
            };
            let on_disk = fs::read_to_string(dir.join(&file)).unwrap_or_default();
            if on_disk != demograph_core::kg::kg_to_jsonl(&rebuilt) {
                problems.push(format!("{label}: {file} does not match a replayed build"));
            }
        }
    }
    Ok(problems)
}
