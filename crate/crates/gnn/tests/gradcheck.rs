use demograph_gnn::{check_gradients, random_instance, Architecture};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;
const TOLERANCE: f64 = 1e-4;

fn check_many(architecture: Architecture, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..20 {
        let inst = random_instance(architecture, &mut rng).unwrap();
        let report = check_gradients(
            &inst.params,
            &inst.input,
            &inst.rows,
            &inst.labels,
            inst.tau,
            EPS,
        )
        .unwrap();
        for (name, err) in &report.relative_errors {
            assert!(
                *err < TOLERANCE,
                "{architecture} trial {trial}: {name} relative error {err:e}"
            );
        }
    }
}

#[test]
fn gcn_gradients_match_finite_differences() {
    check_many(Architecture::Gcn, 11);
}

#[test]
fn gat_gradients_match_finite_differences() {
    check_many(Architecture::Gat, 12);
}

#[test]
fn gcn_single_layer_is_tight() {
    // smooth in the weights: error should be far below the gate
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    while seen < 5 {
        let inst = random_instance(Architecture::Gcn, &mut rng).unwrap();
        if inst.params.spec.layers != 1 {
            continue;
        }
        seen += 1;
        let r = check_gradients(
            &inst.params,
            &inst.input,
            &inst.rows,
            &inst.labels,
            inst.tau,
            EPS,
        )
        .unwrap();
        worst = worst.max(r.max_relative_error());
    }
    assert!(worst < 1e-5, "{worst:e}");
}
