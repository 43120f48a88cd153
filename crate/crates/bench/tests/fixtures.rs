use demograph_bench::fixtures::{
    fixtures_dir, freeze_fixtures, kg_dir, load_manifest, verify_fixtures,
};
use demograph_core::load_kg;

/// Rewrites `fixtures/replay` and `fixtures/kgs` from the manifest. Run
/// after editing templates or response files:
/// `cargo test -p demograph-bench --test fixtures -- --ignored refreeze`
#[test]
#[ignore = "rewrites the shipped fixtures"]
fn refreeze() {
    for path in freeze_fixtures(&fixtures_dir()).unwrap() {
        println!("wrote {}", path.display());
    }
}

#[test]
fn replay_fixtures_match_current_prompts() {
    let problems = verify_fixtures(&fixtures_dir()).unwrap();
    assert!(
        problems.is_empty(),
        "fixture drift:\n{}",
        problems.join("\n")
    );
}

#[test]
fn shipped_kgs_are_well_formed() {
    let root = fixtures_dir();
    let manifest = load_manifest(&root).unwrap();
    assert_eq!(manifest.entries.len(), 4);
    let cora = load_kg(&kg_dir(&root, "cora").join("s0.jsonl")).unwrap();
    let pruned = load_kg(&kg_dir(&root, "cora").join("s0.ift.jsonl")).unwrap();
    assert_eq!(cora.edges().len(), 94);
    assert_eq!(pruned.edges().len(), 50);
    assert!(pruned.concepts().is_subset(cora.concepts()));
    // generation digest first, then one per pruning round
    assert_eq!(pruned.provenance().digests.len(), 2);
    assert_eq!(pruned.provenance().digests[0], cora.provenance().digests[0]);
    for kg in [&cora, &pruned] {
        assert!(kg.invariants_hold());
    }
}
