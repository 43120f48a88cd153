use std::rc::Rc;

use demograph_core::{DenseMatrix, Graph, GraphParts, NodeOrigin, Splits};
use demograph_gnn::{
    gat_attention, load_checkpoint, predict, save_checkpoint, Architecture, GnnError, GraphInput,
    ModelParams, ModelSpec, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(n: usize, edges: Vec<(usize, usize)>) -> Graph {
    Graph::new(GraphParts {
        features: DenseMatrix::zeros(n, 0),
        labels: vec![None; n],
        edges,
        splits: Splits::default(),
        origin: vec![NodeOrigin::Original; n],
    })
    .unwrap()
}

fn spec(architecture: Architecture, in_dim: usize, num_classes: usize, heads: usize) -> ModelSpec {
    ModelSpec {
        architecture,
        in_dim,
        hidden: 4,
        num_classes,
        layers: 1,
        heads,
    }
}

fn params(spec: ModelSpec, seed: u64) -> ModelParams {
    ModelParams::init(
        spec,
        vec![],
        Tensor::zeros(0, spec.in_dim),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

fn t(rows: &[Vec<f64>]) -> Tensor {
    Tensor::from_rows(rows).unwrap()
}

#[test]
fn single_node_identity_gcn() {
    let g = graph(1, vec![]);
    let x = t(&[vec![0.3, -1.2, 2.5]]);
    let mut p = params(spec(Architecture::Gcn, 3, 3, 1), 0);
    p.layers[0].weights[0] = t(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ]);
    let input = GraphInput::new(Architecture::Gcn, &g, Rc::new(x.clone()), vec![]).unwrap();
    assert_eq!(predict(&p, &input).unwrap(), x);
}

#[test]
fn path_gcn_matches_hand_computation() {
    // degrees with self-loops are 2, 3, 2
    let g = graph(3, vec![(0, 1), (2, 1)]);
    let x = t(&[vec![1.0], vec![2.0], vec![3.0]]);
    let mut p = params(spec(Architecture::Gcn, 1, 1, 1), 0);
    p.layers[0].weights[0] = t(&[vec![1.0]]);
    p.layers[0].bias = t(&[vec![0.25]]);
    let input = GraphInput::new(Architecture::Gcn, &g, Rc::new(x), vec![]).unwrap();
    let out = predict(&p, &input).unwrap();
    let s6 = 6f64.sqrt();
    let expected = [
        0.5 + 2.0 / s6,
        1.0 / s6 + 2.0 / 3.0 + 3.0 / s6,
        2.0 / s6 + 1.5,
    ];
    for (o, e) in out.data().iter().zip(expected) {
        assert!((o - (e + 0.25)).abs() < 1e-14, "{o} vs {e}");
    }
}

#[test]
fn cora_sized_shapes() {
    let n = 2708;
    let f = 1433;
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i * 7 + 3) % n)).collect();
    let g = graph(n, edges);
    let mut x = Tensor::zeros(n, f);
    for i in 0..n {
        x.row_mut(i)[(i * 31) % f] = 1.0;
        x.row_mut(i)[(i * 17 + 5) % f] = 1.0;
    }
    let p = ModelParams::init(
        ModelSpec {
            architecture: Architecture::Gcn,
            in_dim: f,
            hidden: 64,
            num_classes: 7,
            layers: 2,
            heads: 1,
        },
        vec![],
        Tensor::zeros(0, f),
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    let input = GraphInput::new(Architecture::Gcn, &g, Rc::new(x), vec![]).unwrap();
    assert_eq!(predict(&p, &input).unwrap().shape(), (2708, 7));
}

#[test]
fn feature_width_mismatch_is_shape_error() {
    let g = graph(2, vec![]);
    let p = params(spec(Architecture::Gcn, 3, 2, 1), 0);
    let input =
        GraphInput::new(Architecture::Gcn, &g, Rc::new(Tensor::zeros(2, 4)), vec![]).unwrap();
    assert!(matches!(predict(&p, &input), Err(GnnError::Shape { .. })));
}

#[test]
fn gat_single_node_attends_to_itself() {
    let g = graph(1, vec![]);
    let x = t(&[vec![0.5, -0.5]]);
    let p = params(spec(Architecture::Gat, 2, 3, 2), 4);
    let input = GraphInput::new(Architecture::Gat, &g, Rc::new(x.clone()), vec![]).unwrap();
    assert_eq!(gat_attention(&p, &input, 0).unwrap(), vec![1.0]);
    // output is the head average of x W_h
    let out = predict(&p, &input).unwrap();
    for c in 0..3 {
        let mut acc = 0.0;
        for w in &p.layers[0].weights {
            acc += x.get(0, 0) * w.get(0, c) + x.get(0, 1) * w.get(1, c);
        }
        assert!((out.get(0, c) - acc / 2.0).abs() < 1e-15);
    }
}

#[test]
fn gat_star_with_identical_features_is_uniform() {
    let g = graph(5, vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
    let x = Tensor::filled(5, 3, 0.7);
    let p = params(spec(Architecture::Gat, 3, 2, 1), 9);
    let input = GraphInput::new(Architecture::Gat, &g, Rc::new(x), vec![]).unwrap();
    let edges = input.edges.clone().unwrap();
    let alpha = gat_attention(&p, &input, 0).unwrap();
    for node in 0..5 {
        let r = edges.incoming(node);
        let deg = r.len() as f64;
        for e in r {
            assert!((alpha[e] - 1.0 / deg).abs() < 1e-15);
        }
    }
    assert_eq!(edges.incoming(0).len(), 5);
}

#[test]
fn gat_three_nodes_match_manual_attention() {
    // path 0 - 1 - 2 with self-loops
    let g = graph(3, vec![(0, 1), (1, 2)]);
    let x = t(&[vec![1.0, 0.0], vec![0.5, 2.0], vec![-1.0, 1.0]]);
    let mut p = params(spec(Architecture::Gat, 2, 2, 1), 0);
    p.layers[0].weights[0] = t(&[vec![1.0, -1.0], vec![0.5, 2.0]]);
    p.layers[0].att_src[0] = t(&[vec![0.3], vec![-0.7]]);
    p.layers[0].att_dst[0] = t(&[vec![1.1], vec![0.4]]);
    let input = GraphInput::new(Architecture::Gat, &g, Rc::new(x), vec![]).unwrap();
    let alpha = gat_attention(&p, &input, 0).unwrap();

    // Wh rows: x W
    let wh = [[1.0, -1.0], [1.5, 3.5], [-0.5, 3.0]];
    let s_src: Vec<f64> = wh.iter().map(|r| 0.3 * r[0] - 0.7 * r[1]).collect();
    let s_dst: Vec<f64> = wh.iter().map(|r| 1.1 * r[0] + 0.4 * r[1]).collect();
    let leaky = |v: f64| if v > 0.0 { v } else { 0.2 * v };
    let neighbors: [&[usize]; 3] = [&[0, 1], &[0, 1, 2], &[1, 2]];
    let mut expected = Vec::new();
    for (i, ns) in neighbors.iter().enumerate() {
        let scores: Vec<f64> = ns.iter().map(|&j| leaky(s_dst[i] + s_src[j])).collect();
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        expected.extend(scores.iter().map(|s| s.exp() / z));
    }
    assert_eq!(alpha.len(), expected.len());
    for (a, e) in alpha.iter().zip(&expected) {
        assert!((a - e).abs() < 1e-14, "{a} vs {e}");
    }
}

#[test]
fn dropout_off_forward_is_pure() {
    let g = graph(4, vec![(0, 1), (1, 2), (2, 3)]);
    let x = t(&[
        vec![1.0, 2.0],
        vec![0.0, 1.0],
        vec![3.0, -1.0],
        vec![0.5, 0.5],
    ]);
    for arch in [Architecture::Gcn, Architecture::Gat] {
        let mut s = spec(arch, 2, 3, 2);
        s.layers = 2;
        let p = params(s, 5);
        let input = GraphInput::new(arch, &g, Rc::new(x.clone()), vec![]).unwrap();
        assert_eq!(predict(&p, &input).unwrap(), predict(&p, &input).unwrap());
    }
}

#[test]
fn checkpoint_round_trip() {
    let mut s = spec(Architecture::Gat, 3, 2, 2);
    s.layers = 2;
    let p = ModelParams::init(
        s,
        vec!["a".into(), "b".into()],
        Tensor::filled(2, 3, 0.125),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_checkpoint(&p, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), p);

    std::fs::write(&path, "{\"manifest\": []}").unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(GnnError::Checkpoint(_))
    ));
}
