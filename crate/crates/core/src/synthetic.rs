//! Seeded stochastic-block-model graphs for sanity training runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::{DenseMatrix, Graph, GraphParts, NodeOrigin, Splits};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmConfig {
    pub nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Total feature width; the first `blocks` columns hold the one-hot
    /// community indicator.
    pub feature_dim: usize,
    /// Std of the Gaussian noise added to every feature.
    pub noise: f64,
    pub train_per_class: usize,
    pub val: usize,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            nodes: 200,
            blocks: 2,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            noise: 1.0,
            train_per_class: 20,
            val: 40,
            seed: 7,
        }
    }
}

/// Node `i` belongs to block `i * blocks / nodes`. Undirected edges are
/// stored once as `(lo, hi)`. Remaining labeled nodes form the test split.
pub fn sbm_graph(cfg: &SbmConfig) -> Result<Graph, GraphError> {
    if cfg.blocks == 0 || cfg.nodes < cfg.blocks {
        return Err(GraphError::Schema("need 1 <= blocks <= nodes".into()));
    }
    if cfg.feature_dim < cfg.blocks {
        return Err(GraphError::Schema("feature_dim must be >= blocks".into()));
    }
    let probs_ok = |p: f64| (0.0..=1.0).contains(&p);
    if !probs_ok(cfg.p_in) || !probs_ok(cfg.p_out) || !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(GraphError::Schema(
            "probabilities must lie in [0, 1], noise >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.nodes;
    let block: Vec<usize> = (0..n).map(|i| i * cfg.blocks / n).collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let normal = Normal::new(0.0, cfg.noise).expect("valid std");
    let mut data = vec![0.0; n * cfg.feature_dim];
    for i in 0..n {
        let row = &mut data[i * cfg.feature_dim..(i + 1) * cfg.feature_dim];
        row[block[i]] = 1.0;
        for v in row.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut train = Vec::new();
    let mut rest = Vec::new();
    let mut taken = vec![0usize; cfg.blocks];
    for i in order {
        if taken[block[i]] < cfg.train_per_class {
            taken[block[i]] += 1;
            train.push(i);
        } else {
            rest.push(i);
        }
    }
    let val_count = cfg.val.min(rest.len());
    let mut val = rest[..val_count].to_vec();
    let mut test = rest[val_count..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Graph::new(GraphParts {
        features: DenseMatrix::from_vec(n, cfg.feature_dim, data)?,
        labels: block.into_iter().map(Some).collect(),
        edges,
        splits: Splits { train, val, test },
        origin: vec![NodeOrigin::Original; n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let cfg = SbmConfig::default();
        let a = sbm_graph(&cfg).unwrap();
        assert_eq!(a, sbm_graph(&cfg).unwrap());
        assert_eq!(a.num_nodes(), 200);
        assert_eq!(a.num_classes(), 2);
        assert_eq!(a.splits().train.len(), 40);
        assert_eq!(a.splits().val.len(), 40);
        assert_eq!(a.splits().test.len(), 120);
        // expected edges: 2 * C(100,2) * 0.1 + 100^2 * 0.01 = 990 + 100
        let e = a.edges().len() as f64;
        assert!((e - 1090.0).abs() < 5.0 * 1090f64.sqrt(), "{e}");
        let other = sbm_graph(&SbmConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SbmConfig {
            feature_dim: 1,
            ..Default::default()
        };
        assert!(sbm_graph(&bad).is_err());
    }
}
