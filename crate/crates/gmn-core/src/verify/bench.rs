//! Cost scaling: analytic FLOPs, peak tensor bytes, and wall time of the
//! forward pass over growing node counts, with least-squares linear fits.
//!
//! FLOP counts come from the tape's op-level counters and are exact and
//! machine-independent; wall times are the minimum of repeated
//! single-threaded runs.

use std::time::Instant;

use crate::graph::{generate, GenSpec, Graph};
use crate::model::{init_params, Forward, GraphAux, LayerConfig, Precision};
use crate::numerics::{Tape, Tensor};
use crate::scalar::Scalar;
use crate::spectral::{build_cache, SpectralCache};

use super::{PropertyReport, VerifyError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub edges: usize,
    pub flops: u64,
    pub peak_bytes: usize,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub flops_r2: f64,
    pub bytes_r2: f64,
    /// FLOPs(2n)/FLOPs(n) for each (n, 2n) pair present in the size list.
    pub doubling_ratios: Vec<(usize, f64)>,
    pub wall_ratio_extremes: f64,
    pub report: PropertyReport,
}

impl BenchTable {
    /// CSV: n,edges,flops,peak_bytes,wall_secs plus a fit summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,edges,flops,peak_bytes,wall_secs,flops_r2,bytes_r2\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6e},{:.6},{:.6}\n",
                r.n, r.edges, r.flops, r.peak_bytes, r.wall_secs, self.flops_r2, self.bytes_r2
            ));
        }
        out
    }

    /// Gnuplot-friendly: whitespace columns with a comment header.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# n flops peak_bytes wall_secs\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{} {} {} {:.6e}\n",
                r.n, r.flops, r.peak_bytes, r.wall_secs
            ));
        }
        out
    }
}

fn measure_one<T: Scalar>(
    config: &LayerConfig,
    graph: &Graph,
    cache: &SpectralCache<f64>,
    repeats: usize,
) -> Result<(u64, usize, f64), VerifyError> {
    let params = init_params::<T>(config, 0)?;
    let cache_t = SpectralCache::<T> {
        n: cache.n,
        d: cache.d,
        eigenvalues: cache.eigenvalues.iter().map(|&v| T::from_f64(v)).collect(),
        vectors: cache.vectors.iter().map(|&v| T::from_f64(v)).collect(),
        normalization: cache.normalization,
        skip_zero: cache.skip_zero,
        solver: cache.solver,
        residual: cache.residual,
        pad_count: cache.pad_count,
    };
    let aux = GraphAux::<T>::new(graph);
    let x = Tensor::<T>::from_f64_slice(&[graph.n(), config.l_in], graph.features())
        .map_err(VerifyError::Numerics)?;
    let mut flops = 0u64;
    let mut bytes = 0usize;
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let started = Instant::now();
        let mut tape = Tape::<T>::new().with_finite_checks(false);
        let xid = tape.input(x.clone());
        let mut fwd = Forward::new(&mut tape, &params, config);
        let sc = fwd.spectral_consts(&cache_t);
        let mut h = xid;
        for layer in 0..config.num_layers {
            h = fwd.hybrid_layer(layer, &aux, &sc, h)?;
        }
        let elapsed = started.elapsed().as_secs_f64();
        best = best.min(elapsed);
        flops = tape.flops();
        bytes = tape.peak_bytes();
        std::hint::black_box(tape.value(h).data().first().copied());
    }
    Ok((flops, bytes, best))
}

/// Least-squares fit y = a + b x; returns R².
fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - (a + b * x)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    1.0 - ss_res / ss_tot.max(f64::MIN_POSITIVE)
}

/// Benchmarks the forward pass on random graphs of the given sizes at the
/// configured average degree. Spectral preprocessing runs outside the timed
/// and counted region (the caches are treated as given).
pub fn bench_scaling(
    sizes: &[usize],
    avg_degree: f64,
    config: &LayerConfig,
    precision: Precision,
    repeats: usize,
    seed: u64,
) -> Result<BenchTable, VerifyError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let graph = generate(
            &GenSpec::ErAvgDegree { n, avg_degree, feature_dim: config.l_in },
            seed.wrapping_add(i as u64),
        )?;
        let cache = build_cache::<f64>(&graph, config.normalization, config.d, config.skip_zero)?;
        let (flops, peak_bytes, wall_secs) = match precision {
            Precision::Double => measure_one::<f64>(config, &graph, &cache, repeats)?,
            Precision::Single => measure_one::<f32>(config, &graph, &cache, repeats)?,
        };
        rows.push(BenchRow { n, edges: graph.num_edges(), flops, peak_bytes, wall_secs });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let flops_r2 = linear_fit_r2(&xs, &rows.iter().map(|r| r.flops as f64).collect::<Vec<_>>());
    let bytes_r2 =
        linear_fit_r2(&xs, &rows.iter().map(|r| r.peak_bytes as f64).collect::<Vec<_>>());
    let mut doubling_ratios = Vec::new();
    for a in &rows {
        if let Some(b) = rows.iter().find(|r| r.n == 2 * a.n) {
            doubling_ratios.push((a.n, b.flops as f64 / a.flops as f64));
        }
    }
    let wall_ratio_extremes = rows.last().map(|r| r.wall_secs).unwrap_or(0.0)
        / rows.first().map(|r| r.wall_secs.max(f64::MIN_POSITIVE)).unwrap_or(1.0);

    let mut report = PropertyReport::new("linear_scaling");
    report.trials = rows.len();
    report.seeds = vec![seed];
    report.measure("flops_r2", flops_r2);
    report.measure("bytes_r2", bytes_r2);
    for (n, ratio) in &doubling_ratios {
        report.measure(&format!("flops_doubling_at_{n}"), *ratio);
    }
    report.measure("wall_ratio_extremes", wall_ratio_extremes);
    report.require(flops_r2 >= 0.98);
    report.require(bytes_r2 >= 0.98);
    report.require(doubling_ratios.iter().all(|(_, r)| (1.9..=2.1).contains(r)));

    Ok(BenchTable { rows, flops_r2, bytes_r2, doubling_ratios, wall_ratio_extremes, report })
}
