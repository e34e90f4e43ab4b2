//! Graph Laplacians and their top-d eigenpairs.
//!
//! Small problems (n <= 256) go through a dense symmetric eigensolver; larger
//! ones use Lanczos with full reorthogonalization and deflation restarts.
//! Either way the result is a [`SpectralCache`]: ascending eigenvalues, the
//! matching eigenvector slice (row u is the positional encoding of node u),
//! and provenance metadata. Solves run in f64 internally regardless of the
//! cache's scalar type.

mod dense;
mod io;
mod solver;

pub use io::{read_cache, write_cache};
pub use solver::SolveStats;

#[doc(hidden)]
pub use solver::lanczos_for_tests;

/// Dense symmetric eigendecomposition of a row-major n×n buffer, ascending.
/// Exposed for the verification harness (Weyl bounds, spectra certificates).
pub fn dense_eigen_rowmajor(a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    dense::jacobi_eigen(a, n)
}

use thiserror::Error;

use crate::graph::Graph;
use crate::scalar::Scalar;

/// Eigenvalues below this magnitude count as zero for `skip_zero`.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

/// Residual bound the solvers must meet per eigenpair (f64).
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Problems up to this size use the dense solver.
pub const DENSE_THRESHOLD: usize = 256;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigensolver failed to converge after {iterations} iterations (worst residual {worst_residual:.3e})")]
    ConvergenceFailure { iterations: usize, worst_residual: f64 },
    #[error("requested d={d} eigenpairs from an n={n} matrix")]
    DimensionError { d: usize, n: usize },
    #[error("permutation is not a bijection on [0, n)")]
    InvalidPermutation,
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unsupported spectral cache version {found:?} (expected v1)")]
    VersionMismatch { found: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which matrix the spectrum was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// D^{-1/2} (D - A) D^{-1/2}; rows of isolated nodes are zero (0/0 = 0).
    SymLaplacian,
    /// D - A.
    Unnormalized,
    /// D^{-1/2} A D^{-1/2}.
    NormAdjacency,
    /// Solved from a caller-supplied matrix.
    Raw,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::SymLaplacian => "sym_laplacian",
            Normalization::Unnormalized => "unnormalized",
            Normalization::NormAdjacency => "norm_adjacency",
            Normalization::Raw => "raw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sym_laplacian" => Some(Normalization::SymLaplacian),
            "unnormalized" => Some(Normalization::Unnormalized),
            "norm_adjacency" => Some(Normalization::NormAdjacency),
            "raw" => Some(Normalization::Raw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    Lanczos,
    Dense,
    /// Loaded from a `.gmnspec` file; no residual information.
    File,
}

impl SolverTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverTag::Lanczos => "lanczos",
            SolverTag::Dense => "dense",
            SolverTag::File => "file",
        }
    }
}

/// Symmetric sparse matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from (row, col, value) triplets; duplicate positions are summed.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(u32, u32, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_counts = vec![0usize; n + 1];
        let mut col_indices: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_counts[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 1..=n {
            row_counts[i] += row_counts[i - 1];
        }
        SparseMatrix { n, row_offsets: row_counts, col_indices, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = M x
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = T::zero();
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc = acc + self.values[idx] * x[self.col_indices[idx] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_offsets[i]..self.row_offsets[i + 1])
                .map(move |idx| (i, self.col_indices[idx] as usize, self.values[idx]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        match self.col_indices[lo..hi].binary_search(&(c as u32)) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => T::zero(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries().all(|(r, c, v)| {
            let w = self.get(c, r);
            v == w
        })
    }

    fn to_f64(&self) -> SparseMatrix<f64> {
        SparseMatrix {
            n: self.n,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }
}

/// Builds the requested matrix for a graph. Isolated nodes produce zero rows
/// in the normalized forms (the 0/0 = 0 convention).
pub fn laplacian<T: Scalar>(graph: &Graph, normalization: Normalization) -> SparseMatrix<T> {
    let n = graph.n();
    let deg: Vec<f64> = graph.degrees().iter().map(|&d| d as f64).collect();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut triplets: Vec<(u32, u32, T)> = Vec::new();
    let mut push = |r: u32, c: u32, v: f64| {
        if v != 0.0 {
            triplets.push((r, c, T::from_f64(v)));
        }
    };
    match normalization {
        Normalization::SymLaplacian => {
            for u in 0..n {
                let mut diag = deg[u];
                // a self-loop contributes A_uu = 1 to the adjacency
                if graph.edges().binary_search(&(u as u32, u as u32)).is_ok() {
                    diag -= 1.0;
                }
                push(u as u32, u as u32, diag * inv_sqrt[u] * inv_sqrt[u]);
            }
            for &(u, v) in graph.edges() {
                if u != v {
                    let w = -inv_sqrt[u as usize] * inv_sqrt[v as usize];
                    push(u, v, w);
                    push(v, u, w);
                }
            }
        }
        Normalization::Unnormalized => {
            for u in 0..n {
                let mut diag = deg[u];
                if graph.edges().binary_search(&(u as u32, u as u32)).is_ok() {
                    diag -= 1.0;
                }
                push(u as u32, u as u32, diag);
            }
            for &(u, v) in graph.edges() {
                if u != v {
                    push(u, v, -1.0);
                    push(v, u, -1.0);
                }
            }
        }
        Normalization::NormAdjacency | Normalization::Raw => {
            for &(u, v) in graph.edges() {
                if u == v {
                    push(u, u, inv_sqrt[u as usize] * inv_sqrt[u as usize]);
                } else {
                    let w = inv_sqrt[u as usize] * inv_sqrt[v as usize];
                    push(u, v, w);
                    push(v, u, w);
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, &mut triplets)
}

/// Top-d eigenpairs plus provenance. Row `u` of `vectors` is the positional
/// encoding p_u.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache<T> {
    pub n: usize,
    pub d: usize,
    /// Ascending among the first `d - pad_count` entries; trailing pads are 0.
    pub eigenvalues: Vec<T>,
    /// n×d, row-major; pad columns are all-zero.
    pub vectors: Vec<T>,
    pub normalization: Normalization,
    pub skip_zero: bool,
    pub solver: SolverTag,
    /// Worst ||M p - lambda p||_2 over non-pad pairs; None for file loads.
    pub residual: Option<f64>,
    pub pad_count: usize,
}

impl<T: Scalar> SpectralCache<T> {
    pub fn row(&self, u: usize) -> &[T] {
        &self.vectors[u * self.d..(u + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|u| self.vectors[u * self.d + j]).collect()
    }
}

/// Flips eigenvector columns so the entry of maximum absolute value is
/// positive (ties: lowest index wins). Idempotent.
pub fn canonicalize_signs<T: Scalar>(cache: &SpectralCache<T>) -> SpectralCache<T> {
    let mut out = cache.clone();
    canonicalize_in_place(&mut out);
    out
}

pub(crate) fn canonicalize_in_place<T: Scalar>(cache: &mut SpectralCache<T>) {
    for j in 0..cache.d {
        let mut best = T::zero();
        let mut best_val = T::zero();
        for u in 0..cache.n {
            let v = cache.vectors[u * cache.d + j];
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < T::zero() {
            for u in 0..cache.n {
                let idx = u * cache.d + j;
                cache.vectors[idx] = -cache.vectors[idx];
            }
        }
    }
}

/// Reorders rows of P by `perm` (node u moves to index perm[u]); eigenvalues
/// are untouched and no re-canonicalization happens.
pub fn permute_cache<T: Scalar>(
    cache: &SpectralCache<T>,
    perm: &[usize],
) -> Result<SpectralCache<T>, SpectralError> {
    if !crate::graph::is_permutation(perm, cache.n) {
        return Err(SpectralError::InvalidPermutation);
    }
    let mut vectors = vec![T::zero(); cache.vectors.len()];
    for u in 0..cache.n {
        let nu = perm[u];
        vectors[nu * cache.d..(nu + 1) * cache.d].copy_from_slice(cache.row(u));
    }
    Ok(SpectralCache { vectors, ..cache.clone() })
}

/// Computes the top-d eigenpairs of a symmetric matrix.
///
/// With `skip_zero`, eigenvalues with |lambda| < 1e-9 are excluded before
/// taking d; if fewer than d qualify the result is zero-padded (trailing)
/// and `pad_count` records how many.
pub fn eig_topd<T: Scalar>(
    m: &SparseMatrix<T>,
    d: usize,
    which: Which,
    skip_zero: bool,
) -> Result<SpectralCache<T>, SpectralError> {
    Ok(eig_topd_with_stats(m, d, which, skip_zero, 0)?.0)
}

/// As [`eig_topd`], also returning solver work counters (used by the
/// cost-scaling tests). `seed` fixes the Lanczos start vectors.
pub fn eig_topd_with_stats<T: Scalar>(
    m: &SparseMatrix<T>,
    d: usize,
    which: Which,
    skip_zero: bool,
    seed: u64,
) -> Result<(SpectralCache<T>, SolveStats), SpectralError> {
    let n = m.n();
    if d < 1 || d > n {
        return Err(SpectralError::DimensionError { d, n });
    }
    let mf = m.to_f64();
    let (vals, vecs, stats) = solver::solve(&mf, d, which, skip_zero, seed)?;
    let kept = vals.len();
    debug_assert!(kept <= d);
    let pad_count = d - kept;

    // Ascending among kept pairs, pads appended.
    let mut order: Vec<usize> = (0..kept).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let mut eigenvalues: Vec<T> = Vec::with_capacity(d);
    let mut vectors = vec![T::zero(); n * d];
    for (slot, &src) in order.iter().enumerate() {
        eigenvalues.push(T::from_f64(vals[src]));
        for u in 0..n {
            vectors[u * d + slot] = T::from_f64(vecs[src][u]);
        }
    }
    eigenvalues.resize(d, T::zero());

    let mut cache = SpectralCache {
        n,
        d,
        eigenvalues,
        vectors,
        normalization: Normalization::Raw,
        skip_zero,
        solver: if n <= DENSE_THRESHOLD { SolverTag::Dense } else { SolverTag::Lanczos },
        residual: Some(stats.worst_residual),
        pad_count,
    };
    canonicalize_in_place(&mut cache);
    Ok((cache, stats))
}

/// Builds the graph's spectrum for the model: Laplacian normalizations take
/// the smallest eigenvalues, the normalized adjacency the largest.
pub fn build_cache<T: Scalar>(
    graph: &Graph,
    normalization: Normalization,
    d: usize,
    skip_zero: bool,
) -> Result<SpectralCache<T>, SpectralError> {
    let m = laplacian::<T>(graph, normalization);
    let which = match normalization {
        Normalization::NormAdjacency => Which::Largest,
        _ => Which::Smallest,
    };
    let mut cache = eig_topd(&m, d, which, skip_zero)?;
    cache.normalization = normalization;
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GenSpec, Graph};

    fn k2() -> Graph {
        Graph::build(2, &[(0, 1)], vec![0.0, 0.0], 1).unwrap()
    }

    #[test]
    fn k2_sym_laplacian_entries() {
        let l = laplacian::<f64>(&k2(), Normalization::SymLaplacian);
        assert_eq!(l.get(0, 0), 1.0);
        assert_eq!(l.get(0, 1), -1.0);
        assert_eq!(l.get(1, 0), -1.0);
        assert_eq!(l.get(1, 1), 1.0);
        assert!(l.is_symmetric());
    }

    #[test]
    fn triangle_sym_spectrum() {
        let g = Graph::build(3, &[(0, 1), (1, 2), (0, 2)], vec![0.0; 3], 1).unwrap();
        let l = laplacian::<f64>(&g, Normalization::SymLaplacian);
        let (vals, _) = solver::dense_full(&l);
        let expect = [0.0, 1.5, 1.5];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn cycle_spectrum_closed_form() {
        // C_n sym Laplacian eigenvalues are 1 - cos(2 pi k / n).
        let g = generate(&GenSpec::Cycle { n: 6, feature_dim: 1 }, 0).unwrap();
        let l = laplacian::<f64>(&g, Normalization::SymLaplacian);
        let (vals, _) = solver::dense_full(&l);
        let mut expect: Vec<f64> = (0..6)
            .map(|k| 1.0 - (2.0 * std::f64::consts::PI * k as f64 / 6.0).cos())
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn k2_top1_skip_zero_sign_canonical() {
        let l = laplacian::<f64>(&k2(), Normalization::SymLaplacian);
        let cache = eig_topd(&l, 1, Which::Smallest, true).unwrap();
        assert!((cache.eigenvalues[0] - 2.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((cache.vectors[0] - s).abs() < 1e-10);
        assert!((cache.vectors[1] + s).abs() < 1e-10);
        assert_eq!(cache.pad_count, 0);
    }

    #[test]
    fn c6_vs_two_triangles_differ() {
        let c6 = generate(&GenSpec::Cycle { n: 6, feature_dim: 1 }, 0).unwrap();
        let two = generate(
            &GenSpec::DisjointUnion {
                parts: vec![
                    GenSpec::Cycle { n: 3, feature_dim: 1 },
                    GenSpec::Cycle { n: 3, feature_dim: 1 },
                ],
            },
            0,
        )
        .unwrap();
        let a = build_cache::<f64>(&c6, Normalization::SymLaplacian, 2, true).unwrap();
        let b = build_cache::<f64>(&two, Normalization::SymLaplacian, 2, true).unwrap();
        assert!((a.eigenvalues[0] - 0.5).abs() < 1e-10);
        assert!((b.eigenvalues[0] - 1.5).abs() < 1e-10);
    }

    #[test]
    fn full_spectrum_matches_dense() {
        let g = generate(&GenSpec::ErAvgDegree { n: 10, avg_degree: 3.0, feature_dim: 1 }, 4)
            .unwrap();
        let l = laplacian::<f64>(&g, Normalization::SymLaplacian);
        let cache = eig_topd(&l, 10, Which::Smallest, false).unwrap();
        let (vals, _) = solver::dense_full(&l);
        for (a, b) in cache.eigenvalues.iter().zip(vals) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(cache.residual.unwrap() <= RESIDUAL_TOL);
    }

    #[test]
    fn padding_when_not_enough_nonzero() {
        let l = laplacian::<f64>(&k2(), Normalization::SymLaplacian);
        let cache = eig_topd(&l, 2, Which::Smallest, true).unwrap();
        assert_eq!(cache.pad_count, 1);
        assert!((cache.eigenvalues[0] - 2.0).abs() < 1e-10);
        assert_eq!(cache.eigenvalues[1], 0.0);
        assert_eq!(cache.column(1), vec![0.0, 0.0]);
    }

    #[test]
    fn canonicalize_rules() {
        let mk = |vectors: Vec<f64>| SpectralCache::<f64> {
            n: 2,
            d: 1,
            eigenvalues: vec![1.0],
            vectors,
            normalization: Normalization::Raw,
            skip_zero: false,
            solver: SolverTag::Dense,
            residual: None,
            pad_count: 0,
        };
        let c = canonicalize_signs(&mk(vec![-0.9, 0.1]));
        assert_eq!(c.vectors, vec![0.9, -0.1]);
        // idempotent
        assert_eq!(canonicalize_signs(&c), c);
        // tie: lowest index wins
        let t = canonicalize_signs(&mk(vec![-0.5, 0.5]));
        assert_eq!(t.vectors, vec![0.5, -0.5]);
    }

    #[test]
    fn permute_roundtrip() {
        let g = generate(&GenSpec::Cycle { n: 5, feature_dim: 1 }, 0).unwrap();
        let cache = build_cache::<f64>(&g, Normalization::SymLaplacian, 3, true).unwrap();
        let id: Vec<usize> = (0..5).collect();
        assert_eq!(permute_cache(&cache, &id).unwrap(), cache);
        let perm = vec![2, 0, 4, 1, 3];
        let mut inv = vec![0usize; 5];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let p = permute_cache(&cache, &perm).unwrap();
        assert_eq!(p.row(2), cache.row(0));
        assert_eq!(permute_cache(&p, &inv).unwrap(), cache);
        assert!(permute_cache(&cache, &[0, 0, 1, 2, 3]).is_err());
    }

    #[test]
    fn isolated_nodes_zero_rows() {
        // node 2 isolated
        let g = Graph::build(3, &[(0, 1)], vec![0.0; 3], 1).unwrap();
        let l = laplacian::<f64>(&g, Normalization::SymLaplacian);
        assert_eq!(l.get(2, 2), 0.0);
        let a = laplacian::<f64>(&g, Normalization::NormAdjacency);
        assert_eq!(a.get(2, 2), 0.0);
        assert_eq!(a.get(2, 0), 0.0);
    }

    #[test]
    fn cache_io_roundtrip() {
        let g = generate(&GenSpec::ErAvgDegree { n: 12, avg_degree: 3.0, feature_dim: 1 }, 9)
            .unwrap();
        let cache = build_cache::<f64>(&g, Normalization::SymLaplacian, 5, true).unwrap();
        let text = io::format_cache(&cache);
        let back: SpectralCache<f64> = io::parse_cache(&text).unwrap();
        assert_eq!(back.eigenvalues, cache.eigenvalues);
        assert_eq!(back.vectors, cache.vectors);
        assert_eq!(back.normalization, cache.normalization);
        assert_eq!(back.skip_zero, cache.skip_zero);
        assert_eq!(back.pad_count, cache.pad_count);
        assert_eq!(back.solver, SolverTag::File);
    }

    #[test]
    fn cache_io_version_check() {
        let bad = "GMNSPEC v2 n=1 d=1 norm=raw skipzero=0\n0.0\n0.0\n";
        assert!(matches!(
            io::parse_cache::<f64>(bad),
            Err(SpectralError::VersionMismatch { .. })
        ));
    }
}
