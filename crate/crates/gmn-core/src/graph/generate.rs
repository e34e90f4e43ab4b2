//! Synthetic graph generators. Pure functions of (spec, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Graph, GraphError, Labels, TaskKind};

/// Generator kinds and their parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum GenSpec {
    /// Balanced stochastic block model with `k` communities. Nodes carry
    /// one-hot seed-marker features (dimension k+1): one random node per
    /// community is tagged with its community id, everyone else with the
    /// "unlabeled" slot. Community ids become node labels.
    Sbm { n: usize, k: usize, p_in: f64, p_out: f64 },
    /// Erdős–Rényi G(n, p) with p chosen so the expected average degree is
    /// `avg_degree`. Features are standard normal.
    ErAvgDegree { n: usize, avg_degree: f64, feature_dim: usize },
    Path { n: usize, feature_dim: usize },
    Cycle { n: usize, feature_dim: usize },
    /// Connects i to i±s (mod n) for each s in `offsets`.
    Circulant { n: usize, offsets: Vec<usize>, feature_dim: usize },
    DisjointUnion { parts: Vec<GenSpec> },
}

/// Deterministic for a fixed (spec, seed) pair.
pub fn generate(spec: &GenSpec, seed: u64) -> Result<Graph, GraphError> {
    match spec {
        GenSpec::Sbm { n, k, p_in, p_out } => sbm(*n, *k, *p_in, *p_out, seed),
        GenSpec::ErAvgDegree { n, avg_degree, feature_dim } => {
            er_avg_degree(*n, *avg_degree, *feature_dim, seed)
        }
        GenSpec::Path { n, feature_dim } => {
            if *n == 0 {
                return Err(GraphError::InvalidParams("path needs n >= 1".into()));
            }
            let edges: Vec<(u32, u32)> = (1..*n as u32).map(|v| (v - 1, v)).collect();
            let x = normal_features(*n, *feature_dim, seed);
            Graph::build(*n, &edges, x, *feature_dim)
        }
        GenSpec::Cycle { n, feature_dim } => {
            if *n < 3 {
                return Err(GraphError::InvalidParams("cycle needs n >= 3".into()));
            }
            let mut edges: Vec<(u32, u32)> = (1..*n as u32).map(|v| (v - 1, v)).collect();
            edges.push((0, *n as u32 - 1));
            let x = normal_features(*n, *feature_dim, seed);
            Graph::build(*n, &edges, x, *feature_dim)
        }
        GenSpec::Circulant { n, offsets, feature_dim } => {
            if offsets.is_empty() {
                return Err(GraphError::InvalidParams("circulant needs offsets".into()));
            }
            for &s in offsets {
                if s == 0 || 2 * s > *n {
                    return Err(GraphError::InvalidParams(format!(
                        "circulant offset {s} must satisfy 0 < s <= n/2"
                    )));
                }
            }
            let mut edges = Vec::new();
            for u in 0..*n {
                for &s in offsets {
                    let v = (u + s) % *n;
                    if v != u {
                        edges.push((u as u32, v as u32));
                    }
                }
            }
            let x = normal_features(*n, *feature_dim, seed);
            Graph::build(*n, &edges, x, *feature_dim)
        }
        GenSpec::DisjointUnion { parts } => {
            let graphs: Vec<Graph> = parts
                .iter()
                .enumerate()
                .map(|(i, p)| generate(p, mix_seed(seed, i as u64)))
                .collect::<Result<_, _>>()?;
            Graph::disjoint_union(&graphs)
        }
    }
}

fn sbm(n: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Graph, GraphError> {
    if k == 0 || n < k {
        return Err(GraphError::InvalidParams("sbm needs 1 <= k <= n".into()));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_in <= p_out {
        return Err(GraphError::InvalidParams("sbm needs 0 <= p_out < p_in <= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Balanced assignment: community c gets nodes [c*n/k, (c+1)*n/k).
    let community: Vec<usize> = (0..n).map(|u| u * k / n).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if community[u] == community[v] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u as u32, v as u32));
            }
        }
    }
    // One seed node per community carries its community id; the rest are
    // marked unlabeled (slot 0).
    let l = k + 1;
    let mut x = vec![0.0; n * l];
    for row in x.chunks_mut(l) {
        row[0] = 1.0;
    }
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&u| community[u] == c).collect();
        let pick = members[rng.gen_range(0..members.len())];
        x[pick * l] = 0.0;
        x[pick * l + c + 1] = 1.0;
    }
    let labels = Labels::Node(community.iter().map(|&c| c as i64).collect());
    Ok(Graph::build(n, &edges, x, l)?.with_labels(labels, TaskKind::NodeClass))
}

fn er_avg_degree(
    n: usize,
    avg_degree: f64,
    feature_dim: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    if n < 2 || avg_degree < 0.0 || avg_degree >= (n - 1) as f64 {
        return Err(GraphError::InvalidParams(
            "er_avg_degree needs n >= 2 and 0 <= deg < n-1".into(),
        ));
    }
    let p = avg_degree / (n - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Geometric skip sampling over the upper triangle: O(m) instead of O(n^2).
    let mut edges = Vec::new();
    if p > 0.0 {
        let log_q = (1.0 - p).ln();
        let mut v: i64 = 1;
        let mut w: i64 = -1;
        let n = n as i64;
        while v < n {
            let r: f64 = rng.gen();
            w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
            while w >= v && v < n {
                w -= v;
                v += 1;
            }
            if v < n {
                edges.push((w as u32, v as u32));
            }
        }
    }
    let x = normal_features(n, feature_dim, mix_seed(seed, 0xFEA7));
    Graph::build(n, &edges, x, feature_dim)
}

fn normal_features(n: usize, l: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * l).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 step
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
