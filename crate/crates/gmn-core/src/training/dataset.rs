//! Graph datasets with precomputed spectral caches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{generate, DatasetSplit, GenSpec, Graph, TaskKind};
use crate::spectral::{build_cache, Normalization, SpectralCache};

use super::TrainError;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub caches: Vec<SpectralCache<f64>>,
    pub split: DatasetSplit,
}

impl Dataset {
    /// Preprocesses caches for every graph with the given spectrum settings.
    pub fn from_graphs(
        graphs: Vec<Graph>,
        split: DatasetSplit,
        normalization: Normalization,
        d: usize,
        skip_zero: bool,
    ) -> Result<Self, TrainError> {
        let caches = graphs
            .iter()
            .map(|g| build_cache::<f64>(g, normalization, d, skip_zero))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset { graphs, caches, split })
    }

    /// The toy node-classification task: SBM community recovery with one
    /// labeled seed node per community. Split 80/10/10 by index after a
    /// seeded shuffle.
    pub fn toy_sbm(
        num_graphs: usize,
        n: usize,
        k: usize,
        p_in: f64,
        p_out: f64,
        d: usize,
        seed: u64,
    ) -> Result<Self, TrainError> {
        let spec = GenSpec::Sbm { n, k, p_in, p_out };
        let graphs: Vec<Graph> = (0..num_graphs)
            .map(|i| generate(&spec, seed.wrapping_add(i as u64)))
            .collect::<Result<_, _>>()?;
        let mut order: Vec<usize> = (0..num_graphs).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5B17);
        for i in (1..num_graphs).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let n_val = (num_graphs / 10).max(1);
        let n_test = (num_graphs / 10).max(1);
        let n_train = num_graphs - n_val - n_test;
        let split = DatasetSplit::new(
            order[..n_train].to_vec(),
            order[n_train..n_train + n_val].to_vec(),
            order[n_train + n_val..].to_vec(),
            TaskKind::NodeClass,
            num_graphs,
        )?;
        Dataset::from_graphs(graphs, split, Normalization::SymLaplacian, d, true)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map(|g| g.feature_dim()).unwrap_or(0)
    }

    /// Number of classes for classification tasks (max label + 1).
    pub fn num_classes(&self) -> usize {
        let mut max = -1i64;
        for g in &self.graphs {
            match g.labels() {
                crate::graph::Labels::Node(ls) => {
                    max = max.max(ls.iter().copied().max().unwrap_or(-1))
                }
                crate::graph::Labels::Graph(v) => max = max.max(*v as i64),
                crate::graph::Labels::None => {}
            }
        }
        (max + 1).max(0) as usize
    }

    /// Same dataset with features perturbed per graph (caches unchanged —
    /// noise enters only through X).
    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self, TrainError> {
        let graphs = self
            .graphs
            .iter()
            .zip(features)
            .map(|(g, x)| g.with_features(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset { graphs, caches: self.caches.clone(), split: self.split.clone() })
    }
}
